//! Markov-semigroup estimators for the truncated stochastic dynamics:
//! Monte Carlo evaluation of P_t phi, ergodic time averages, a histogram
//! total-variation proxy for mixing, the derivative flow with its
//! energy bound, and gradient estimation by the probabilistic
//! integration-by-parts formula cross-checked against common-random-number
//! finite differences.

use alloc::vec::Vec;

use crate::basis::TriadTable;
use crate::error::{invalid, Error, Result};
use crate::fx;
use crate::noise::{Coloring, PathSample, SeedRecord};
use crate::rng::{CounterRng, NoiseStream};
use crate::solver::{sample_joint_increment, step_truncated_with, Cutoff};
use crate::spectrum::{SpectralField, Spectrum};
use crate::stats::{self, MeanStderr};

/// Test functions phi for the semigroup. The tanh wrapper is bounded with
/// sup norm at most 1; the other two are unbounded but square-integrable
/// diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// phi(u) = u_k.
    ModeCoordinate(usize),
    /// phi(u) = ||A^gamma u||.
    FractionalNorm(f64),
    /// phi(u) = tanh(u_k / scale), bounded in [-1, 1].
    BoundedTanh { mode: usize, scale: f64 },
}

impl Observable {
    pub fn eval(&self, u: &SpectralField, s: &Spectrum) -> Result<f64> {
        match *self {
            Observable::ModeCoordinate(k) => {
                if k >= u.len() {
                    return Err(invalid("observable mode outside the truncation"));
                }
                Ok(u.coeffs()[k])
            }
            Observable::FractionalNorm(gamma) => s.fractional_norm(u, gamma),
            Observable::BoundedTanh { mode, scale } => {
                if mode >= u.len() {
                    return Err(invalid("observable mode outside the truncation"));
                }
                if !(scale > 0.0) {
                    return Err(invalid("tanh scale must be positive"));
                }
                Ok(fx::tanh(u.coeffs()[mode] / scale))
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Observable::BoundedTanh { .. })
    }
}

/// Monte Carlo budget and seeding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCConfig {
    pub samples: usize,
    pub horizon: f64,
    pub burn_in: f64,
    pub thinning: usize,
    pub seed: u64,
}

impl MCConfig {
    pub fn new(samples: usize, horizon: f64, seed: u64) -> Result<Self> {
        let mc = MCConfig {
            samples,
            horizon,
            burn_in: 0.0,
            thinning: 1,
            seed,
        };
        mc.validate()?;
        Ok(mc)
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Result<Self> {
        self.burn_in = burn_in;
        self.validate()?;
        Ok(self)
    }

    pub fn with_thinning(mut self, thinning: usize) -> Result<Self> {
        self.thinning = thinning;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(invalid("Monte Carlo needs at least two samples"));
        }
        if !(self.horizon >= 0.0) {
            return Err(invalid("horizon must be nonnegative"));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.horizon.max(f64::MIN_POSITIVE)) {
            return Err(invalid("burn-in must be nonnegative and below the horizon"));
        }
        if self.thinning == 0 {
            return Err(invalid("thinning stride must be positive"));
        }
        Ok(())
    }
}

/// The truncated stochastic dynamics: cutoff nonlinearity, coloring, and
/// grid, bundled so estimators share one sampling mechanism.
#[derive(Debug, Clone)]
pub struct Dynamics<'a> {
    pub cutoff: Cutoff,
    pub coloring: &'a Coloring,
    pub spectrum: &'a Spectrum,
    pub table: &'a TriadTable,
    pub dt: f64,
}

impl<'a> Dynamics<'a> {
    pub fn new(
        cutoff: Cutoff,
        coloring: &'a Coloring,
        spectrum: &'a Spectrum,
        table: &'a TriadTable,
        dt: f64,
    ) -> Result<Self> {
        if coloring.len() != spectrum.len() {
            return Err(Error::DimensionMismatch {
                expected: spectrum.len(),
                got: coloring.len(),
            });
        }
        if table.truncation() != spectrum.len() {
            return Err(Error::DimensionMismatch {
                expected: spectrum.len(),
                got: table.truncation(),
            });
        }
        if !(dt > 0.0) {
            return Err(invalid("step size must be positive"));
        }
        Ok(Dynamics {
            cutoff,
            coloring,
            spectrum,
            table,
            dt,
        })
    }

    pub fn n(&self) -> usize {
        self.spectrum.len()
    }

    fn check_state(&self, x: &SpectralField) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn steps_for(&self, horizon: f64) -> usize {
        ((horizon / self.dt) + 0.5) as usize
    }

    /// Samples one trajectory of u on the uniform grid up to `horizon`.
    pub fn simulate_path(
        &self,
        x: &SpectralField,
        horizon: f64,
        stream: &NoiseStream,
        seed: SeedRecord,
    ) -> Result<PathSample> {
        self.check_state(x)?;
        if !(horizon >= self.dt) {
            return Err(invalid("horizon must cover at least one step"));
        }
        let steps = self.steps_for(horizon);
        let mut u = x.clone();
        let mut times = Vec::with_capacity(steps + 1);
        let mut fields = Vec::with_capacity(steps + 1);
        times.push(0.0);
        fields.push(u.clone());
        for j in 0..steps {
            let inc =
                sample_joint_increment(self.dt, self.coloring, self.spectrum, stream, j as u64)?;
            u = step_truncated_with(&u, self.dt, &self.cutoff, self.spectrum, self.table, &inc.eta)
                .map_err(|e| match e {
                    Error::BlowUp { norm, .. } => Error::BlowUp {
                        step: j,
                        time: self.dt * j as f64,
                        norm,
                    },
                    other => other,
                })?;
            times.push(self.dt * (j + 1) as f64);
            fields.push(u.clone());
        }
        PathSample::new(times, fields, Some(seed))
    }

    /// Endpoint X_t^x for one trajectory; t = 0 returns x itself.
    pub fn simulate_u(&self, x: &SpectralField, t: f64, seed: u64, trajectory: u64) -> Result<SpectralField> {
        self.check_state(x)?;
        if t == 0.0 {
            return Ok(x.clone());
        }
        let stream = NoiseStream::new(seed, trajectory);
        let rec = SeedRecord {
            root: seed,
            trajectory,
        };
        Ok(self.simulate_path(x, t, &stream, rec)?.last().clone())
    }
}

/// Monte Carlo estimate of P_t phi(x) over independent trajectories.
pub fn semigroup_estimate(
    dynamics: &Dynamics<'_>,
    phi: &Observable,
    x: &SpectralField,
    t: f64,
    mc: &MCConfig,
) -> Result<MeanStderr> {
    mc.validate()?;
    if t == 0.0 {
        let v = phi.eval(x, dynamics.spectrum)?;
        return Ok(MeanStderr {
            mean: v,
            stderr: 0.0,
            n: mc.samples,
        });
    }
    let mut vals = Vec::with_capacity(mc.samples);
    for traj in 0..mc.samples {
        let endpoint = dynamics.simulate_u(x, t, mc.seed, traj as u64)?;
        vals.push(phi.eval(&endpoint, dynamics.spectrum)?);
    }
    Ok(stats::mean_stderr(&vals))
}

/// Ergodic time average of phi along one long trajectory, after burn-in
/// and with thinning; the standard error comes from batch means.
pub fn time_average(
    dynamics: &Dynamics<'_>,
    phi: &Observable,
    x: &SpectralField,
    mc: &MCConfig,
) -> Result<MeanStderr> {
    mc.validate()?;
    let stream = NoiseStream::new(mc.seed, 0);
    let rec = SeedRecord {
        root: mc.seed,
        trajectory: 0,
    };
    let path = dynamics.simulate_path(x, mc.horizon, &stream, rec)?;
    let mut vals = Vec::new();
    for j in (0..path.len()).step_by(mc.thinning) {
        if path.times()[j] >= mc.burn_in {
            vals.push(phi.eval(path.field(j), dynamics.spectrum)?);
        }
    }
    if vals.len() < 4 {
        return Err(Error::Degenerate(alloc::string::String::from(
            "too few post-burn-in samples for a time average",
        )));
    }
    // batch means absorb serial correlation into the error bar
    let batches = 30.min(vals.len() / 2);
    let per = vals.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let chunk = &vals[b * per..(b + 1) * per];
            stats::pairwise_sum(chunk) / chunk.len() as f64
        })
        .collect();
    Ok(stats::mean_stderr(&means))
}

/// Histogram total-variation proxy between the laws of X_t^x and X_t^y:
/// the maximum over observables of the half-L1 distance between pooled
/// Freedman-Diaconis histograms of endpoint samples. Upper-biased by
/// binning and Monte Carlo noise.
pub fn tv_distance_proxy(
    dynamics: &Dynamics<'_>,
    x: &SpectralField,
    y: &SpectralField,
    t: f64,
    observables: &[Observable],
    mc: &MCConfig,
) -> Result<f64> {
    mc.validate()?;
    if observables.len() < 2 {
        return Err(invalid("the proxy needs at least two observables"));
    }
    let mut worst = 0.0f64;
    let mut a_samples = alloc::vec![Vec::with_capacity(mc.samples); observables.len()];
    let mut b_samples = alloc::vec![Vec::with_capacity(mc.samples); observables.len()];
    for traj in 0..mc.samples {
        let ex = dynamics.simulate_u(x, t, mc.seed, traj as u64)?;
        // disjoint trajectory ids keep the two ensembles independent
        let ey = dynamics.simulate_u(y, t, mc.seed, (mc.samples + traj) as u64)?;
        for (i, phi) in observables.iter().enumerate() {
            a_samples[i].push(phi.eval(&ex, dynamics.spectrum)?);
            b_samples[i].push(phi.eval(&ey, dynamics.spectrum)?);
        }
    }
    for i in 0..observables.len() {
        worst = worst.max(stats::histogram_tv(&a_samples[i], &b_samples[i]));
    }
    Ok(worst)
}

/// A sampled trajectory with its derivative flow and the Brownian
/// increments that drove it.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub u: PathSample,
    pub flow: PathSample,
    /// dw[j][k]: Brownian increment of mode k over step j.
    pub dw: Vec<Vec<f64>>,
}

/// Integrates the derivative flow U (the directional derivative of the
/// truncated dynamics) alongside the trajectory it linearizes:
///
/// ```text
///   U' + A U + Theta'(r) 2 <A^{1/4}u, A^{1/4}U> B_n(u)
///           + Theta(r) (B_n(U, u) + B_n(u, U)) = 0,  U(0) = h,
/// ```
///
/// with r = ||A^{1/4}u||^2, by exponential Euler along the shared grid.
pub fn derivative_flow(
    dynamics: &Dynamics<'_>,
    x: &SpectralField,
    h: &SpectralField,
    horizon: f64,
    stream: &NoiseStream,
    seed: SeedRecord,
) -> Result<FlowSample> {
    dynamics.check_state(x)?;
    dynamics.check_state(h)?;
    if !(horizon >= dynamics.dt) {
        return Err(invalid("horizon must cover at least one step"));
    }
    let s = dynamics.spectrum;
    let steps = dynamics.steps_for(horizon);
    let mut u = x.clone();
    let mut flow = h.clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut u_fields = Vec::with_capacity(steps + 1);
    let mut flow_fields = Vec::with_capacity(steps + 1);
    let mut dw = Vec::with_capacity(steps);
    times.push(0.0);
    u_fields.push(u.clone());
    flow_fields.push(flow.clone());
    for j in 0..steps {
        let quarter = s.fractional_norm(&u, 0.25)?;
        let r = quarter * quarter;
        let theta = dynamics.cutoff.value(r);
        let theta_d = dynamics.cutoff.derivative(r);

        // linearized drift at the current state
        let mut lin = dynamics
            .table
            .bilinear_apply(&flow, &u)?
            .add(&dynamics.table.bilinear_apply(&u, &flow)?)
            .scaled(theta);
        if theta_d != 0.0 {
            let mut pairing = 0.0;
            for k in 0..u.len() {
                pairing += fx::sqrt(s.lambda(k)) * u.coeffs()[k] * flow.coeffs()[k];
            }
            lin = lin.add(&dynamics.table.b_apply(&u)?.scaled(theta_d * 2.0 * pairing));
        }
        let drift = lin.scaled(-1.0);

        let inc = sample_joint_increment(dynamics.dt, dynamics.coloring, s, stream, j as u64)?;
        let next_u =
            step_truncated_with(&u, dynamics.dt, &dynamics.cutoff, s, dynamics.table, &inc.eta)?;
        let mut next_flow = SpectralField::zero(u.len());
        {
            let oc = next_flow.coeffs_mut();
            for k in 0..u.len() {
                let a = s.lambda(k) * dynamics.dt;
                oc[k] = fx::exp_neg(a) * flow.coeffs()[k]
                    + dynamics.dt * fx::expm1_over(a) * drift.coeffs()[k];
            }
        }
        if !next_flow.is_finite() {
            return Err(Error::BlowUp {
                step: j,
                time: dynamics.dt * j as f64,
                norm: flow.norm(),
            });
        }
        u = next_u;
        flow = next_flow;
        times.push(dynamics.dt * (j + 1) as f64);
        u_fields.push(u.clone());
        flow_fields.push(flow.clone());
        dw.push(inc.dw);
    }
    Ok(FlowSample {
        u: PathSample::new(times.clone(), u_fields, Some(seed))?,
        flow: PathSample::new(times, flow_fields, Some(seed))?,
        dw,
    })
}

/// Two sides of the derivative-flow energy bound.
#[derive(Debug, Clone, Copy)]
pub struct FlowBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Checks the pathwise energy bound for the derivative flow:
/// int_0^t ||A^{1/2} U||^2 ds <= 2 ||h||^2 [1 + int_0^t K^4 e^{K^4} ds]
/// with K(s) = 2 c0 (1 v sup|Theta'|) (sup_{r<=s} ||A^{1/4}u||^3 + sup ||A^{1/4}u||).
pub fn gronwall_flow_check(
    sample: &FlowSample,
    h: &SpectralField,
    s: &Spectrum,
    c0: f64,
) -> Result<FlowBound> {
    if !(c0 > 0.0) {
        return Err(invalid("empirical trilinear constant must be positive"));
    }
    let times = sample.flow.times();
    let mut lhs = 0.0f64;
    let mut integral = 0.0f64;
    let mut sup_quarter = 0.0f64;
    let kexp = |q: f64| -> f64 {
        let k = 2.0 * c0 * Cutoff::MAX_DERIVATIVE.max(1.0) * (q * q * q + q);
        let k4 = k * k * k * k;
        k4 * fx::exp(k4.min(700.0))
    };
    let vnorm = |j: usize| -> Result<f64> { s.fractional_norm(sample.flow.field(j), 0.5) };
    let mut prev_v = vnorm(0)?;
    let q0 = s.fractional_norm(sample.u.field(0), 0.25)?;
    sup_quarter = sup_quarter.max(q0);
    let mut prev_k = kexp(sup_quarter);
    for j in 1..times.len() {
        let dt = times[j] - times[j - 1];
        let cur_v = vnorm(j)?;
        lhs += 0.5 * dt * (prev_v * prev_v + cur_v * cur_v);
        prev_v = cur_v;
        sup_quarter = sup_quarter.max(s.fractional_norm(sample.u.field(j), 0.25)?);
        let cur_k = kexp(sup_quarter);
        integral += 0.5 * dt * (prev_k + cur_k);
        prev_k = cur_k;
    }
    let hn = h.norm();
    let rhs = 2.0 * hn * hn * (1.0 + integral);
    Ok(FlowBound {
        lhs,
        rhs,
        ok: lhs <= rhs,
    })
}

/// Outcome of the diagonal noise-inverse bound probe.
#[derive(Debug, Clone, Copy)]
pub struct NoiseInverseBound {
    pub max_ratio: f64,
    pub max_ratio_half: f64,
    pub ok: bool,
}

/// Samples random states and compares the preimage norm against the
/// V-norm: ratio(x) = (sum x_k^2 / g_k^2) / (sum lambda_k x_k^2). `ok`
/// when the maximum is stable (growth below 5%) from truncation n/2 to n.
pub fn noise_inverse_bound_check(
    c: &Coloring,
    s: &Spectrum,
    samples: usize,
    rng: &mut CounterRng,
) -> Result<NoiseInverseBound> {
    if c.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            got: c.len(),
        });
    }
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let ratio = |x: &SpectralField| -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..x.len() {
            let g = c.amplitude(k);
            num += x.coeffs()[k] * x.coeffs()[k] / (g * g);
            den += s.lambda(k) * x.coeffs()[k] * x.coeffs()[k];
        }
        num / den
    };
    let half = (s.len() / 2).max(1);
    let (mut worst, mut worst_half) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let x = SpectralField::random_gaussian(s.len(), rng);
        worst = worst.max(ratio(&x));
        worst_half = worst_half.max(ratio(&x.resized(half)));
    }
    // single modes are the extreme points of the diagonal quotient
    for k in 0..s.len() {
        let r = SpectralField::unit(s.len(), k);
        let v = ratio(&r);
        worst = worst.max(v);
        if k < half {
            worst_half = worst_half.max(v);
        }
    }
    Ok(NoiseInverseBound {
        max_ratio: worst,
        max_ratio_half: worst_half,
        ok: worst <= worst_half * 1.05,
    })
}

/// Gradient of P_t phi at x in direction h by the probabilistic
/// integration-by-parts identity: the Monte Carlo mean of
/// phi(X_t) (1/t) sum_k int_0^t (U_k(s)/g_k) dW_k(s), with the Ito sum
/// accumulated on the solver grid from the same Brownian increments that
/// drove X.
pub fn bismut_gradient(
    dynamics: &Dynamics<'_>,
    phi: &Observable,
    x: &SpectralField,
    h: &SpectralField,
    t: f64,
    mc: &MCConfig,
) -> Result<MeanStderr> {
    mc.validate()?;
    if !(t > 0.0) {
        return Err(invalid("the gradient formula needs t > 0"));
    }
    let mut vals = Vec::with_capacity(mc.samples);
    for traj in 0..mc.samples {
        let stream = NoiseStream::new(mc.seed, traj as u64);
        let rec = SeedRecord {
            root: mc.seed,
            trajectory: traj as u64,
        };
        let sample = derivative_flow(dynamics, x, h, t, &stream, rec)?;
        let mut ito = 0.0f64;
        for (j, dw) in sample.dw.iter().enumerate() {
            let flow = sample.flow.field(j);
            for k in 0..flow.len() {
                ito += flow.coeffs()[k] / dynamics.coloring.amplitude(k) * dw[k];
            }
        }
        let endpoint = phi.eval(sample.u.last(), dynamics.spectrum)?;
        vals.push(endpoint * ito / t);
    }
    Ok(stats::mean_stderr(&vals))
}

/// Common-random-number finite-difference gradient:
/// (phi(X_t^{x + delta h}) - phi(X_t^x)) / delta averaged over paired
/// trajectories.
pub fn finite_difference_gradient(
    dynamics: &Dynamics<'_>,
    phi: &Observable,
    x: &SpectralField,
    h: &SpectralField,
    t: f64,
    delta: f64,
    mc: &MCConfig,
) -> Result<MeanStderr> {
    mc.validate()?;
    if !(delta > 0.0) {
        return Err(invalid("difference step must be positive"));
    }
    if !(t > 0.0) {
        return Err(invalid("need t > 0"));
    }
    let shifted = x.add(&h.scaled(delta));
    let mut vals = Vec::with_capacity(mc.samples);
    for traj in 0..mc.samples {
        // identical stream: both trajectories see the same noise
        let a = dynamics.simulate_u(x, t, mc.seed, traj as u64)?;
        let b = dynamics.simulate_u(&shifted, t, mc.seed, traj as u64)?;
        let fa = phi.eval(&a, dynamics.spectrum)?;
        let fb = phi.eval(&b, dynamics.spectrum)?;
        vals.push((fb - fa) / delta);
    }
    Ok(stats::mean_stderr(&vals))
}

/// Difference-quotient probe of the strong-Feller Lipschitz estimate.
#[derive(Debug, Clone)]
pub struct LipschitzProbe {
    /// |P_t phi(x) - P_t phi(y)| / ||x - y|| for each admitted pair.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Combined-standard-error scale of the noisiest quotient.
    pub max_stderr: f64,
}

/// Estimates the semigroup Lipschitz quotient over state pairs with
/// common-random-number coupling; coincident pairs are skipped.
pub fn sf_lipschitz_probe(
    dynamics: &Dynamics<'_>,
    phi: &Observable,
    pairs: &[(SpectralField, SpectralField)],
    t: f64,
    mc: &MCConfig,
) -> Result<LipschitzProbe> {
    mc.validate()?;
    if !(t > 0.0) {
        return Err(invalid("need t > 0"));
    }
    if !phi.is_bounded() {
        return Err(invalid("the Lipschitz probe requires a bounded observable"));
    }
    let mut ratios = Vec::new();
    let mut max_stderr = 0.0f64;
    for (x, y) in pairs {
        let dist = x.sub(y).norm();
        if dist == 0.0 {
            continue;
        }
        let mut diffs = Vec::with_capacity(mc.samples);
        for traj in 0..mc.samples {
            let a = dynamics.simulate_u(x, t, mc.seed, traj as u64)?;
            let b = dynamics.simulate_u(y, t, mc.seed, traj as u64)?;
            diffs.push(phi.eval(&a, dynamics.spectrum)? - phi.eval(&b, dynamics.spectrum)?);
        }
        let est = stats::mean_stderr(&diffs);
        ratios.push(fx::abs(est.mean) / dist);
        max_stderr = max_stderr.max(est.stderr / dist);
    }
    if ratios.is_empty() {
        return Err(Error::Degenerate(alloc::string::String::from(
            "all pairs coincide",
        )));
    }
    let max_ratio = ratios.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(LipschitzProbe {
        ratios,
        max_ratio,
        max_stderr,
    })
}

/// Hit-frequency estimate for reaching a delta-ball around a target.
#[derive(Debug, Clone, Copy)]
pub struct HitFrequency {
    pub hits: usize,
    pub samples: usize,
    pub frequency: f64,
    /// Exact one-sided binomial lower confidence bound at 95%.
    pub lower_confidence: f64,
}

/// Fraction of trajectories with ||A^{1/4}(X_T^x - y)|| < delta, with an
/// exact binomial lower confidence bound on the hit probability.
pub fn irreducibility_probe(
    dynamics: &Dynamics<'_>,
    x: &SpectralField,
    y: &SpectralField,
    t: f64,
    delta: f64,
    mc: &MCConfig,
) -> Result<HitFrequency> {
    mc.validate()?;
    dynamics.check_state(y)?;
    if !(delta >= 0.0) {
        return Err(invalid("radius must be nonnegative"));
    }
    let mut hits = 0usize;
    for traj in 0..mc.samples {
        let endpoint = dynamics.simulate_u(x, t, mc.seed, traj as u64)?;
        let miss = dynamics.spectrum.fractional_norm(&endpoint.sub(y), 0.25)?;
        if miss < delta {
            hits += 1;
        }
    }
    Ok(HitFrequency {
        hits,
        samples: mc.samples,
        frequency: hits as f64 / mc.samples as f64,
        lower_confidence: stats::binomial_lower_bound(hits, mc.samples, 0.05),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{assemble_torus_basis, b_bound_constant_probe};
    use crate::noise::ColoringSpec;

    fn torus(n: usize) -> (Spectrum, TriadTable) {
        let (basis, s) = assemble_torus_basis(n).unwrap();
        (s, TriadTable::assemble(&basis))
    }

    fn colored(s: &Spectrum) -> Coloring {
        Coloring::make(ColoringSpec::PowerLaw { gamma: 0.5 }, s, 0.25).unwrap()
    }

    /// E[f(N(mu, sigma^2))] by Simpson quadrature over +-10 sigma.
    fn gaussian_expect(mu: f64, sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
        let m = 4000;
        let (lo, hi) = (mu - 10.0 * sigma, mu + 10.0 * sigma);
        let hstep = (hi - lo) / m as f64;
        let dens = |x: f64| {
            let z = (x - mu) / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * core::f64::consts::PI).sqrt())
        };
        let g = |x: f64| f(x) * dens(x);
        let mut acc = g(lo) + g(hi);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g(lo + i as f64 * hstep);
        }
        acc * hstep / 3.0
    }

    #[test]
    fn observable_contracts() {
        let s = Spectrum::synthetic(4, 1.0).unwrap();
        let mut u = SpectralField::zero(4);
        u.coeffs_mut()[1] = 100.0;
        let phi = Observable::BoundedTanh { mode: 1, scale: 0.5 };
        let v = phi.eval(&u, &s).unwrap();
        assert!(v.abs() <= 1.0 && v > 0.99);
        assert!(phi.is_bounded());
        assert!(!Observable::ModeCoordinate(0).is_bounded());
        assert!(Observable::ModeCoordinate(9).eval(&u, &s).is_err());
        assert_eq!(Observable::ModeCoordinate(1).eval(&u, &s).unwrap(), 100.0);
    }

    #[test]
    fn mc_config_invariants() {
        assert!(MCConfig::new(1, 1.0, 0).is_err());
        assert!(MCConfig::new(10, 1.0, 0).unwrap().with_burn_in(1.5).is_err());
        assert!(MCConfig::new(10, 1.0, 0).unwrap().with_thinning(0).is_err());
        assert!(MCConfig::new(10, 1.0, 0)
            .unwrap()
            .with_burn_in(0.5)
            .is_ok());
    }

    #[test]
    fn simulate_u_time_zero_and_determinism() {
        let (s, table) = torus(8);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let mut rng = CounterRng::new(3, 0);
        let x = SpectralField::random_gaussian(8, &mut rng).scaled(0.3);
        assert_eq!(dynamics.simulate_u(&x, 0.0, 1, 0).unwrap(), x);
        let a = dynamics.simulate_u(&x, 0.5, 1, 7).unwrap();
        let b = dynamics.simulate_u(&x, 0.5, 1, 7).unwrap();
        assert_eq!(a, b);
        let other = dynamics.simulate_u(&x, 0.5, 1, 8).unwrap();
        assert!(a.sub(&other).norm() > 0.0);
    }

    #[test]
    fn linear_endpoint_law_matches_gaussian_moments() {
        let s = Spectrum::synthetic(4, 1.0).unwrap();
        let table = TriadTable::empty(4);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let x = SpectralField::new(alloc::vec![0.5, -0.3, 0.2, 0.1]).unwrap();
        let t = 0.5;
        let m = 4000;
        let mut per_mode = alloc::vec![Vec::with_capacity(m); 4];
        for traj in 0..m {
            let e = dynamics.simulate_u(&x, t, 12, traj as u64).unwrap();
            for k in 0..4 {
                per_mode[k].push(e.coeffs()[k]);
            }
        }
        for k in 0..4 {
            let l = s.lambda(k);
            let g = c.amplitude(k);
            let mean = (-l * t).exp() * x.coeffs()[k];
            let var = g * g * (1.0 - (-2.0 * l * t).exp()) / (2.0 * l);
            let est = stats::mean_stderr(&per_mode[k]);
            assert!(
                (est.mean - mean).abs() < 3.0 * est.stderr,
                "mode {k} mean {} vs {mean}",
                est.mean
            );
            let sq: Vec<f64> = per_mode[k].iter().map(|v| (v - mean) * (v - mean)).collect();
            let est_var = stats::mean_stderr(&sq);
            assert!(
                (est_var.mean - var).abs() < 3.0 * est_var.stderr,
                "mode {k} var {} vs {var}",
                est_var.mean
            );
        }
    }

    #[test]
    fn semigroup_estimate_trivial_cases() {
        let (s, table) = torus(8);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let x = SpectralField::unit(8, 0).scaled(0.4);
        let phi = Observable::BoundedTanh { mode: 0, scale: 1.0 };
        let at_zero = semigroup_estimate(&dynamics, &phi, &x, 0.0, &MCConfig::new(10, 1.0, 0).unwrap()).unwrap();
        assert_eq!(at_zero.mean, (0.4f64).tanh());
        assert_eq!(at_zero.stderr, 0.0);
        let est = semigroup_estimate(&dynamics, &phi, &x, 0.5, &MCConfig::new(200, 1.0, 5).unwrap()).unwrap();
        assert!(est.mean.abs() <= 1.0);
    }

    #[test]
    fn time_average_recovers_ou_stationary_moment() {
        let s = Spectrum::synthetic(4, 1.0).unwrap();
        let table = TriadTable::empty(4);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let x = SpectralField::zero(4);
        let mc = MCConfig::new(2, 400.0, 31).unwrap().with_burn_in(10.0).unwrap();
        // squared mode-1 coordinate via the fractional norm on mode 1 only:
        // use a dedicated average of u_1^2 through ModeCoordinate samples
        let stream = NoiseStream::new(mc.seed, 0);
        let rec = SeedRecord { root: mc.seed, trajectory: 0 };
        let path = dynamics.simulate_path(&x, mc.horizon, &stream, rec).unwrap();
        let vals: Vec<f64> = path
            .fields()
            .iter()
            .zip(path.times())
            .filter(|(_, &t)| t >= mc.burn_in)
            .map(|(f, _)| f.coeffs()[0] * f.coeffs()[0])
            .collect();
        let batches = 30;
        let per = vals.len() / batches;
        let means: Vec<f64> = (0..batches)
            .map(|b| stats::pairwise_sum(&vals[b * per..(b + 1) * per]) / per as f64)
            .collect();
        let est = stats::mean_stderr(&means);
        let target = c.stationary_variance(&s, 0);
        assert!(
            (est.mean - target).abs() < 3.0 * est.stderr,
            "avg {} target {target} se {}",
            est.mean,
            est.stderr
        );

        // constant observable averages to exactly itself
        let phi = Observable::BoundedTanh { mode: 0, scale: 1.0 };
        let avg = time_average(&dynamics, &phi, &x, &mc).unwrap();
        assert!(avg.mean.abs() <= 1.0);
    }

    #[test]
    fn tv_proxy_trivial_cases() {
        let (s, table) = torus(8);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let x = SpectralField::unit(8, 0).scaled(0.5);
        let y = SpectralField::unit(8, 1).scaled(-0.5);
        let obs = [Observable::ModeCoordinate(0), Observable::ModeCoordinate(1)];
        let mc = MCConfig::new(200, 1.0, 17).unwrap();
        // distinct point masses at t=0
        let d0 = tv_distance_proxy(&dynamics, &x, &y, 0.0, &obs, &mc).unwrap();
        assert!(d0 > 0.99);
        // identical laws stay near the Monte Carlo floor
        let dsame = tv_distance_proxy(&dynamics, &x, &x, 0.5, &obs, &mc).unwrap();
        assert!(dsame <= 4.0 / (mc.samples as f64).sqrt(), "tv {dsame}");
    }

    #[test]
    fn derivative_flow_linear_is_heat_flow() {
        let s = Spectrum::synthetic(6, 1.0).unwrap();
        let table = TriadTable::empty(6);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let x = SpectralField::unit(6, 0).scaled(0.3);
        let mut rng = CounterRng::new(41, 0);
        let h = SpectralField::random_gaussian(6, &mut rng);
        let stream = NoiseStream::new(9, 0);
        let rec = SeedRecord { root: 9, trajectory: 0 };
        let fs = derivative_flow(&dynamics, &x, &h, 1.0, &stream, rec).unwrap();
        let expect = s.semigroup_apply(&h, 1.0).unwrap();
        assert!(fs.flow.last().sub(&expect).norm() < 1e-12);
        // h = 0 stays 0
        let fs0 = derivative_flow(&dynamics, &x, &SpectralField::zero(6), 1.0, &stream, rec).unwrap();
        assert_eq!(fs0.flow.last().norm(), 0.0);
    }

    #[test]
    fn derivative_flow_consistent_with_crn_differencing() {
        let (s, table) = torus(16);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 5e-3).unwrap();
        let mut rng = CounterRng::new(43, 0);
        let x = SpectralField::random_gaussian(16, &mut rng).scaled(0.3);
        let h = SpectralField::random_gaussian(16, &mut rng);
        let stream = NoiseStream::new(21, 0);
        let rec = SeedRecord { root: 21, trajectory: 0 };
        let t = 0.5;
        let fs = derivative_flow(&dynamics, &x, &h, t, &stream, rec).unwrap();
        let err_at = |delta: f64| -> f64 {
            let shifted = x.add(&h.scaled(delta));
            let a = dynamics.simulate_u(&x, t, 21, 0).unwrap();
            let b = dynamics.simulate_u(&shifted, t, 21, 0).unwrap();
            let quotient = b.sub(&a).scaled(1.0 / delta);
            quotient.sub(fs.flow.last()).norm()
        };
        let (e2, e3) = (err_at(1e-2), err_at(1e-3));
        assert!(e3 < e2, "differencing error not shrinking: {e2} vs {e3}");
        assert!(e2 / 1e-2 < 100.0 * h.norm()); // O(delta) scale sanity
    }

    #[test]
    fn flow_bound_holds_along_sampled_runs() {
        let (s, table) = torus(16);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 5e-3).unwrap();
        let mut rng = CounterRng::new(47, 0);
        let c0 = b_bound_constant_probe(&table, &s, 0.25, 0.25, 0.5, 200, &mut rng).unwrap();
        for run in 0..5 {
            let x = SpectralField::random_gaussian(16, &mut rng).scaled(0.4);
            let h = SpectralField::random_gaussian(16, &mut rng);
            let stream = NoiseStream::new(100 + run, 0);
            let rec = SeedRecord { root: 100 + run, trajectory: 0 };
            let fs = derivative_flow(&dynamics, &x, &h, 1.0, &stream, rec).unwrap();
            let chk = gronwall_flow_check(&fs, &h, &s, c0).unwrap();
            assert!(chk.ok, "run {run}: lhs {} rhs {}", chk.lhs, chk.rhs);
        }
        // linear backend: explicit heat integral
        let lin_table = TriadTable::empty(16);
        let lin =
            Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &lin_table, 5e-3).unwrap();
        let h = SpectralField::unit(16, 2);
        let stream = NoiseStream::new(7, 0);
        let rec = SeedRecord { root: 7, trajectory: 0 };
        let fs = derivative_flow(&lin, &SpectralField::zero(16), &h, 1.0, &stream, rec).unwrap();
        let chk = gronwall_flow_check(&fs, &h, &s, c0).unwrap();
        let l = s.lambda(2);
        let exact = (1.0 - (-2.0 * l).exp()) / 2.0; // int_0^1 lambda e^{-2 lambda t} dt
        assert!((chk.lhs - exact).abs() < 1e-2 * exact.max(1e-2));
        assert!(chk.ok);
    }

    #[test]
    fn noise_inverse_ratio_identities() {
        let s = Spectrum::synthetic(32, 1.0).unwrap();
        let c = colored(&s); // gamma = 1/2: g_k = lambda_k^{-1/2}
        let mut rng = CounterRng::new(53, 0);
        let chk = noise_inverse_bound_check(&c, &s, 100, &mut rng).unwrap();
        assert!((chk.max_ratio - 1.0).abs() < 1e-12, "ratio {}", chk.max_ratio);
        assert!(chk.ok);

        // single mode with a generic coloring
        let g = alloc::vec![0.7; 32];
        let c2 = Coloring::raw(g, 0.2).unwrap();
        let num = 1.0 / (0.7 * 0.7);
        let den = s.lambda(4);
        let chk2 = noise_inverse_bound_check(&c2, &s, 1, &mut rng).unwrap();
        assert!(chk2.max_ratio >= num / den - 1e-12);

        // gamma = 0.3 coloring is stable across the half-truncation
        let c3 = Coloring::make(ColoringSpec::PowerLaw { gamma: 0.3 }, &s, 0.05).unwrap();
        let chk3 = noise_inverse_bound_check(&c3, &s, 200, &mut rng).unwrap();
        assert!(chk3.ok, "{chk3:?}");
    }

    #[test]
    fn bismut_linear_mode_coordinate() {
        let s = Spectrum::synthetic(4, 1.0).unwrap();
        let table = TriadTable::empty(4);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let x = SpectralField::new(alloc::vec![0.3, -0.2, 0.1, 0.0]).unwrap();
        let h = SpectralField::new(alloc::vec![1.0, 0.5, 0.0, 0.0]).unwrap();
        let t = 0.5;
        let mc = MCConfig::new(4000, t, 59).unwrap();
        let phi = Observable::ModeCoordinate(0);
        let est = bismut_gradient(&dynamics, &phi, &x, &h, t, &mc).unwrap();
        let expect = (-s.lambda(0) * t).exp() * h.coeffs()[0];
        assert!(
            (est.mean - expect).abs() < 3.0 * est.stderr,
            "bismut {} +- {} vs {expect}",
            est.mean,
            est.stderr
        );
        assert!(bismut_gradient(&dynamics, &phi, &x, &h, 0.0, &mc).is_err());
        // h = 0: the integrand vanishes identically
        let z = bismut_gradient(&dynamics, &phi, &x, &SpectralField::zero(4), t, &mc).unwrap();
        assert!(z.mean.abs() < 1e-12 && z.stderr < 1e-12);
    }

    #[test]
    fn bismut_linear_tanh_against_quadrature() {
        let s = Spectrum::synthetic(2, 1.0).unwrap();
        let table = TriadTable::empty(2);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let x = SpectralField::new(alloc::vec![0.4, 0.0]).unwrap();
        let h = SpectralField::new(alloc::vec![1.0, 0.0]).unwrap();
        let (t, scale) = (0.5, 0.7);
        let phi = Observable::BoundedTanh { mode: 0, scale };
        let mc = MCConfig::new(4000, t, 61).unwrap();
        let est = bismut_gradient(&dynamics, &phi, &x, &h, t, &mc).unwrap();
        // d/d eps E tanh((mu + eps e^{-lt} h)/c + sigma Z / c)
        let l = s.lambda(0);
        let g = c.amplitude(0);
        let mu = (-l * t).exp() * x.coeffs()[0];
        let sigma = (g * g * (1.0 - (-2.0 * l * t).exp()) / (2.0 * l)).sqrt();
        let sech2 = |v: f64| {
            let th = (v / scale).tanh();
            (1.0 - th * th) / scale
        };
        let expect = (-l * t).exp() * gaussian_expect(mu, sigma, sech2);
        assert!(
            (est.mean - expect).abs() < 3.0 * est.stderr.max(1e-3),
            "bismut {} +- {} vs {expect}",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn gradient_estimators_agree_nonlinear() {
        let (s, table) = torus(16);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let mut rng = CounterRng::new(67, 0);
        let x = SpectralField::random_gaussian(16, &mut rng).scaled(0.3);
        let h = SpectralField::random_gaussian(16, &mut rng);
        let t = 1.0;
        let phi = Observable::BoundedTanh { mode: 0, scale: 1.0 };
        let mc = MCConfig::new(600, t, 71).unwrap();
        let bis = bismut_gradient(&dynamics, &phi, &x, &h, t, &mc).unwrap();
        let fd = finite_difference_gradient(&dynamics, &phi, &x, &h, t, 1e-3, &mc).unwrap();
        assert!(
            stats::within_combined_se(bis, fd, 3.0),
            "bismut {}+-{} fd {}+-{}",
            bis.mean,
            bis.stderr,
            fd.mean,
            fd.stderr
        );
        // delta-robustness of the finite-difference estimator
        let fd2 = finite_difference_gradient(&dynamics, &phi, &x, &h, t, 1e-2, &mc).unwrap();
        assert!(stats::within_combined_se(fd, fd2, 3.0));
    }

    #[test]
    fn lipschitz_probe_linear_bound() {
        let s = Spectrum::synthetic(2, 1.0).unwrap();
        let table = TriadTable::empty(2);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let phi = Observable::BoundedTanh { mode: 0, scale: 1.0 };
        let t = 0.5;
        let mk = |a: f64| SpectralField::new(alloc::vec![a, 0.0]).unwrap();
        let pairs = alloc::vec![
            (mk(0.0), mk(0.0)), // skipped
            (mk(0.2), mk(0.1)),
            (mk(0.4), mk(0.35)),
        ];
        let mc = MCConfig::new(2000, t, 73).unwrap();
        let probe = sf_lipschitz_probe(&dynamics, &phi, &pairs, t, &mc).unwrap();
        assert_eq!(probe.ratios.len(), 2);
        // Gaussian closed form: |d/dmu E tanh(X)| <= e^{-lt} sup E sech^2
        let l = s.lambda(0);
        let g = c.amplitude(0);
        let sigma = (g * g * (1.0 - (-2.0 * l * t).exp()) / (2.0 * l)).sqrt();
        let sech2 = |v: f64| {
            let th = v.tanh();
            1.0 - th * th
        };
        let lip = (-l * t).exp() * gaussian_expect(0.0, sigma, sech2);
        assert!(
            probe.max_ratio <= lip + 3.0 * probe.max_stderr,
            "ratio {} bound {lip}",
            probe.max_ratio
        );
        // unbounded observables are rejected
        assert!(
            sf_lipschitz_probe(&dynamics, &Observable::ModeCoordinate(0), &pairs, t, &mc).is_err()
        );
    }

    #[test]
    fn irreducibility_trivial_radii() {
        let (s, table) = torus(8);
        let c = colored(&s);
        let dynamics = Dynamics::new(Cutoff::new(5.0).unwrap(), &c, &s, &table, 0.01).unwrap();
        let x = SpectralField::zero(8);
        let y = SpectralField::unit(8, 0).scaled(0.1);
        let mc = MCConfig::new(50, 0.5, 79).unwrap();
        let wide = irreducibility_probe(&dynamics, &x, &y, 0.5, 1e9, &mc).unwrap();
        assert_eq!(wide.frequency, 1.0);
        assert!(wide.lower_confidence > 0.9);
        let zero = irreducibility_probe(&dynamics, &x, &y, 0.5, 0.0, &mc).unwrap();
        assert_eq!(zero.frequency, 0.0);
        assert_eq!(zero.lower_confidence, 0.0);
    }

    #[test]
    fn irreducibility_near_deterministic_target() {
        let (s, table) = torus(16);
        let base = colored(&s);
        // noise scaled down: trajectories hug the controlled path
        let g: Vec<f64> = base.amplitudes().iter().map(|&v| v / 100.0).collect();
        let c = Coloring::raw(g, 0.25).unwrap();
        let dynamics = Dynamics::new(Cutoff::new(1e9).unwrap(), &c, &s, &table, 0.01).unwrap();
        // a freely decayed target reachable by the unforced dynamics
        let mut y0 = SpectralField::zero(16);
        y0.coeffs_mut()[0] = 0.2;
        let free = dynamics.simulate_u(&y0, 0.5, 999, 0).unwrap();
        let mc = MCConfig::new(100, 0.5, 83).unwrap();
        let probe = irreducibility_probe(&dynamics, &y0, &free, 0.5, 0.05, &mc).unwrap();
        assert!(probe.frequency > 0.0, "{probe:?}");
        assert!(probe.lower_confidence > 0.0);
    }
}
