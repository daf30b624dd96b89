//! Colored noise: the diagonal coloring operator, its range-condition
//! checks, and the exactly sampled Ornstein-Uhlenbeck stochastic
//! convolution together with its moment oracles.
//!
//! The coloring acts mode-by-mode, G e_k = g_k e_k, so the stochastic
//! convolution decouples into scalar OU processes whose transition
//!
//! ```text
//!   z_k(t + dt) = e^{-lambda_k dt} z_k(t)
//!               + g_k xi_k sqrt((1 - e^{-2 lambda_k dt}) / (2 lambda_k))
//! ```
//!
//! is exact in law: there is no time-discretization bias in the noise, and
//! all discretization error in the nonlinear dynamics comes from the
//! drift integrator.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::fx;
use crate::rng::{CounterRng, NoiseStream};
use crate::spectrum::{SpectralField, Spectrum};
use crate::stats;

/// How the per-mode amplitudes g_k are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum ColoringSpec {
    /// g_k = lambda_k^{-gamma}, gamma in (1/4, 1/2].
    PowerLaw { gamma: f64 },
    /// g_k = 1 / sigma_k with a k^{1/4+eps} <= sigma_k <= b k^{1/2}.
    SigmaSequence { sigmas: Vec<f64>, a: f64, b: f64 },
    /// Explicit amplitudes, no band validation. Used for negative controls
    /// (e.g. the cylindrical g_k = 1 excluded by the range hypothesis).
    Raw,
}

/// Diagonal realization of the coloring operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Coloring {
    g: Vec<f64>,
    spec: ColoringSpec,
    epsilon: f64,
}

impl Coloring {
    pub fn make(spec: ColoringSpec, s: &Spectrum, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.25) {
            return Err(invalid("epsilon must lie in (0, 1/4]"));
        }
        let g = match &spec {
            ColoringSpec::PowerLaw { gamma } => {
                if !(*gamma > 0.25 && *gamma <= 0.5) {
                    return Err(invalid("power-law exponent must lie in (1/4, 1/2]"));
                }
                s.eigenvalues()
                    .iter()
                    .map(|&l| fx::powf(l, -gamma))
                    .collect()
            }
            ColoringSpec::SigmaSequence { sigmas, a, b } => {
                if sigmas.len() != s.len() {
                    return Err(Error::DimensionMismatch {
                        expected: s.len(),
                        got: sigmas.len(),
                    });
                }
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(invalid("band constants must be positive"));
                }
                for (idx, &sg) in sigmas.iter().enumerate() {
                    let k = (idx + 1) as f64;
                    let lo = a * fx::powf(k, 0.25 + epsilon);
                    let hi = b * fx::powf(k, 0.5);
                    if !(sg >= lo && sg <= hi) {
                        return Err(invalid(alloc::format!(
                            "sigma_{} = {sg} outside the admissible band [{lo}, {hi}]",
                            idx + 1
                        )));
                    }
                }
                sigmas.iter().map(|&sg| 1.0 / sg).collect()
            }
            ColoringSpec::Raw => {
                return Err(invalid("raw colorings must be built with Coloring::raw"))
            }
        };
        Self::validated(g, spec, epsilon)
    }

    /// Explicit amplitudes without band validation; injectivity (g_k > 0)
    /// is still required.
    pub fn raw(g: Vec<f64>, epsilon: f64) -> Result<Self> {
        Self::validated(g, ColoringSpec::Raw, epsilon)
    }

    fn validated(g: Vec<f64>, spec: ColoringSpec, epsilon: f64) -> Result<Self> {
        if g.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(invalid("all noise amplitudes g_k must be positive and finite"));
        }
        Ok(Coloring { g, spec, epsilon })
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    #[inline]
    pub fn amplitude(&self, k: usize) -> f64 {
        self.g[k]
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.g
    }

    pub fn spec(&self) -> &ColoringSpec {
        &self.spec
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Stationary variance of mode k: g_k^2 / (2 lambda_k).
    pub fn stationary_variance(&self, s: &Spectrum, k: usize) -> f64 {
        let g = self.g[k];
        g * g / (2.0 * s.lambda(k))
    }
}

/// Outcome of the range-condition check on the coloring.
#[derive(Debug, Clone, Copy)]
pub struct RangeCondition {
    /// max_k lambda_k^{1/4+eps} g_k (range of G inside D(A^{1/4+eps})).
    pub upper: f64,
    /// max_k lambda_k^{-1/2} / g_k (V inside the range of G).
    pub lower: f64,
    pub ok: bool,
}

/// Spectralized check of the two-sided range hypothesis. `ok` requires both
/// maxima finite and stable: relative growth below 5% when the truncation
/// doubles from n/2 to n.
pub fn validate_range_condition(c: &Coloring, s: &Spectrum, epsilon: f64) -> Result<RangeCondition> {
    if c.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            got: c.len(),
        });
    }
    let maxima = |upto: usize| -> (f64, f64) {
        let mut up = 0.0f64;
        let mut lo = 0.0f64;
        for k in 0..upto {
            let l = s.lambda(k);
            up = up.max(fx::powf(l, 0.25 + epsilon) * c.amplitude(k));
            lo = lo.max(fx::powf(l, -0.5) / c.amplitude(k));
        }
        (up, lo)
    };
    let (upper, lower) = maxima(s.len());
    let (upper_half, lower_half) = maxima((s.len() / 2).max(1));
    let stable = |full: f64, half: f64| full <= half * 1.05;
    let ok = upper.is_finite()
        && lower.is_finite()
        && stable(upper, upper_half)
        && stable(lower, lower_half);
    Ok(RangeCondition { upper, lower, ok })
}

/// One exact OU transition over a step of length `dt`, with per-mode
/// standard normals supplied by `xi`.
pub fn ou_step_with(
    state: &SpectralField,
    dt: f64,
    c: &Coloring,
    s: &Spectrum,
    mut xi: impl FnMut(usize) -> f64,
) -> Result<SpectralField> {
    if !(dt > 0.0) {
        return Err(invalid("OU step requires dt > 0"));
    }
    if state.len() != s.len() || c.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            got: state.len(),
        });
    }
    let mut out = SpectralField::zero(s.len());
    {
        let oc = out.coeffs_mut();
        for k in 0..s.len() {
            let l = s.lambda(k);
            let decay = fx::exp_neg(l * dt);
            let sd = c.amplitude(k) * fx::sqrt((1.0 - decay * decay) / (2.0 * l));
            oc[k] = decay * state.coeffs()[k] + sd * xi(k);
        }
    }
    Ok(out)
}

/// Exact OU transition drawing its normals from a stateful generator.
pub fn ou_step(
    state: &SpectralField,
    dt: f64,
    c: &Coloring,
    s: &Spectrum,
    rng: &mut CounterRng,
) -> Result<SpectralField> {
    ou_step_with(state, dt, c, s, |_| rng.next_normal())
}

/// Seed record attached to sampled paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRecord {
    pub root: u64,
    pub trajectory: u64,
}

/// Time-stamped sequence of spectral fields.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    times: Vec<f64>,
    fields: Vec<SpectralField>,
    pub seed: Option<SeedRecord>,
}

impl PathSample {
    pub fn new(times: Vec<f64>, fields: Vec<SpectralField>, seed: Option<SeedRecord>) -> Result<Self> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(invalid("path needs matching, nonempty times and fields"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("path times must be strictly increasing"));
        }
        let n = fields[0].len();
        if fields.iter().any(|f| f.len() != n) {
            return Err(invalid("all path fields must share one truncation"));
        }
        Ok(PathSample {
            times,
            fields,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn truncation(&self) -> usize {
        self.fields[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[SpectralField] {
        &self.fields
    }

    pub fn field(&self, idx: usize) -> &SpectralField {
        &self.fields[idx]
    }

    pub fn last(&self) -> &SpectralField {
        self.fields.last().expect("nonempty path")
    }

    /// Uniform grid spacing, if the grid is uniform.
    pub fn uniform_dt(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let dt = self.times[1] - self.times[0];
        let uniform = self
            .times
            .windows(2)
            .all(|w| fx::abs(w[1] - w[0] - dt) < 1e-9 * dt.max(1.0));
        uniform.then_some(dt)
    }

    /// Projects every field onto the first `m` modes.
    pub fn projected(&self, m: usize) -> PathSample {
        PathSample {
            times: self.times.clone(),
            fields: self.fields.iter().map(|f| f.resized(m)).collect(),
            seed: self.seed,
        }
    }
}

/// Samples the stochastic convolution from Z_0 = 0 on the uniform grid
/// {0, dt, ..., T} by repeated exact transitions. Increments are addressed
/// by (step, mode) in the stream, so the path is a pure function of
/// (seed, trajectory, grid).
pub fn ou_sample_path(
    horizon: f64,
    dt: f64,
    c: &Coloring,
    s: &Spectrum,
    stream: &NoiseStream,
    seed: SeedRecord,
) -> Result<PathSample> {
    if !(horizon > 0.0 && dt > 0.0 && dt <= horizon) {
        return Err(invalid("need 0 < dt <= T"));
    }
    let steps = ((horizon / dt) + 0.5) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut fields = Vec::with_capacity(steps + 1);
    let mut z = SpectralField::zero(s.len());
    times.push(0.0);
    fields.push(z.clone());
    for step in 0..steps {
        z = ou_step_with(&z, dt, c, s, |k| stream.normal(step as u64, k as u64, 0))?;
        times.push(dt * (step + 1) as f64);
        fields.push(z.clone());
    }
    PathSample::new(times, fields, Some(seed))
}

/// Closed-form second moment of the A^gamma increment:
/// E || A^gamma (z(t+h) - z(t)) ||^2.
pub fn increment_moment_oracle(c: &Coloring, s: &Spectrum, gamma: f64, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && t >= 0.0) {
        return Err(invalid("need h > 0 and t >= 0"));
    }
    let terms: Vec<f64> = (0..s.len())
        .map(|k| {
            let l = s.lambda(k);
            let g = c.amplitude(k);
            let eh = fx::exp_neg(l * h);
            let drift = (1.0 - eh) * (1.0 - eh) * (1.0 - fx::exp_neg(2.0 * l * t)) / (2.0 * l);
            let fresh = (1.0 - eh * eh) / (2.0 * l);
            fx::powf(l, 2.0 * gamma) * g * g * (drift + fresh)
        })
        .collect();
    Ok(stats::pairwise_sum(&terms))
}

/// Estimated Hoelder exponent with its regression quality.
#[derive(Debug, Clone, Copy)]
pub struct HolderEstimate {
    pub beta_hat: f64,
    pub r2: f64,
}

/// Raw-path regression: slope of log mean ||A^gamma (z(t+h)-z(t))||^2
/// against log h over dyadic lags, halved. Noisier than the oracle route.
pub fn holder_exponent_estimate(
    path: &PathSample,
    s: &Spectrum,
    gamma: f64,
) -> Result<HolderEstimate> {
    if path.len() < 100 {
        return Err(invalid("Hoelder regression needs at least 100 grid points"));
    }
    let dt = path
        .uniform_dt()
        .ok_or_else(|| invalid("Hoelder regression needs a uniform grid"))?;
    let mut lags = Vec::new();
    let mut lag = 1usize;
    while lag <= path.len() / 4 {
        lags.push(lag);
        lag *= 2;
    }
    let mut log_h = Vec::new();
    let mut log_m = Vec::new();
    for &lag in &lags {
        let mut acc = Vec::new();
        for idx in 0..(path.len() - lag) {
            let diff = path.field(idx + lag).sub(path.field(idx));
            let v = s.fractional_norm(&diff, gamma)?;
            acc.push(v * v);
        }
        let mean = stats::pairwise_sum(&acc) / acc.len() as f64;
        if mean <= 0.0 {
            return Err(Error::Degenerate(alloc::string::String::from(
                "constant path has no increment scaling",
            )));
        }
        log_h.push(fx::ln(lag as f64 * dt));
        log_m.push(fx::ln(mean));
    }
    let fit = stats::linear_fit(&log_h, &log_m);
    Ok(HolderEstimate {
        beta_hat: fit.slope / 2.0,
        r2: fit.r2,
    })
}

/// Oracle-driven regression of the same slope, using the closed-form
/// increment moments at a fixed base time.
pub fn holder_exponent_oracle(
    c: &Coloring,
    s: &Spectrum,
    gamma: f64,
    t: f64,
    lags: &[f64],
) -> Result<HolderEstimate> {
    if lags.len() < 2 {
        return Err(invalid("need at least two lags"));
    }
    let mut log_h = Vec::new();
    let mut log_m = Vec::new();
    for &h in lags {
        let m = increment_moment_oracle(c, s, gamma, t, h)?;
        log_h.push(fx::ln(h));
        log_m.push(fx::ln(m));
    }
    let fit = stats::linear_fit(&log_h, &log_m);
    Ok(HolderEstimate {
        beta_hat: fit.slope / 2.0,
        r2: fit.r2,
    })
}

/// Truncation trend of the Hilbert-Schmidt time integral behind the
/// stochastic convolution's regularity.
#[derive(Debug, Clone, Copy)]
pub struct HsIntegral {
    pub value_full: f64,
    pub value_half: f64,
    pub saturating: bool,
}

/// Quadrature of int_0^1 t^{-2 alpha} sum_k g_k^2 e^{-2 t lambda_k} dt at
/// truncations n and n/2. The substitution t = s^{1/(1-2 alpha)} removes
/// the endpoint singularity exactly, leaving a smooth integrand for
/// Simpson's rule.
pub fn hs_integral_check(c: &Coloring, s: &Spectrum, alpha: f64) -> Result<HsIntegral> {
    if !(alpha < 0.5) {
        return Err(invalid("time integral diverges for alpha >= 1/2"));
    }
    if c.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            got: c.len(),
        });
    }
    let p = 1.0 / (1.0 - 2.0 * alpha);
    let integrand = |sv: f64, upto: usize| -> f64 {
        let t = fx::powf(sv, p);
        let mut acc = 0.0;
        for k in 0..upto {
            let g = c.amplitude(k);
            acc += g * g * fx::exp_neg(2.0 * t * s.lambda(k));
        }
        p * acc
    };
    let simpson = |upto: usize| -> f64 {
        let m = 2000usize;
        let h = 1.0 / m as f64;
        let mut acc = integrand(0.0, upto) + integrand(1.0, upto);
        for idx in 1..m {
            let w = if idx % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(idx as f64 * h, upto);
        }
        acc * h / 3.0
    };
    let value_full = simpson(s.len());
    let value_half = simpson((s.len() / 2).max(1));
    let saturating = value_full <= value_half * 1.05;
    Ok(HsIntegral {
        value_full,
        value_half,
        saturating,
    })
}
