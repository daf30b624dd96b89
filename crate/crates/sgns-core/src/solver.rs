//! Galerkin solver for the shifted velocity equation
//!
//! ```text
//!   v' + A v + B_n(v + z) = 0,   v(0) = Pi_n x,
//! ```
//!
//! driven by a supplied stochastic-convolution path z. Exponential
//! integrators discretize the mild form directly (the linear part is
//! exact), so the mild-formulation residual measures only the quadrature
//! of the nonlinearity. The module also houses the a priori monitors, the
//! Galerkin convergence and regularization probes, the truncated SDE step
//! with its smooth cutoff, the steering-control synthesis, and a discrete
//! comparator for the singular-kernel Gronwall inequality.

use alloc::vec::Vec;

use crate::basis::TriadTable;
use crate::error::{invalid, Error, Result};
use crate::fx;
use crate::noise::{Coloring, PathSample};
use crate::rng::{CounterRng, NoiseStream};
use crate::spectrum::{SpectralField, Spectrum};

/// Time discretization of the nonlinear drift. The linear part is always
/// integrated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// First order in B: v <- e^{-dt A} v + dt phi1(dt A) N(v).
    ExponentialEuler,
    /// Second-order exponential Runge-Kutta with the phi2 correction.
    Etd2,
}

/// Grid, truncation, and monitor parameters for one integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    pub integrator: Integrator,
    /// Regularity margin of the noise; constrains the monitor exponents.
    pub epsilon: f64,
    /// L^p monitor exponent, in [4, 4/(1-2 epsilon)).
    pub p: f64,
    /// Fractional exponents tracked by the sup monitor, each in [0, 1/4 + epsilon).
    pub gamma_monitor: Vec<f64>,
}

impl SolverConfig {
    pub fn new(n: usize, dt: f64, horizon: f64) -> Result<Self> {
        let cfg = SolverConfig {
            n,
            dt,
            horizon,
            integrator: Integrator::ExponentialEuler,
            epsilon: 0.25,
            p: 4.0,
            gamma_monitor: alloc::vec![0.25],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        self.p = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma_monitor(mut self, gamma_monitor: Vec<f64>) -> Result<Self> {
        self.gamma_monitor = gamma_monitor;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("truncation must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("time step must be positive"));
        }
        if !(self.horizon >= self.dt) {
            return Err(invalid("horizon must cover at least one step"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.25) {
            return Err(invalid("epsilon must lie in (0, 1/4]"));
        }
        let p_max = 4.0 / (1.0 - 2.0 * self.epsilon);
        if !(self.p >= 4.0 && self.p < p_max) {
            return Err(invalid(alloc::format!(
                "monitor exponent p must lie in [4, {p_max})"
            )));
        }
        let g_max = 0.25 + self.epsilon;
        if self
            .gamma_monitor
            .iter()
            .any(|&g| !(g >= 0.0 && g < g_max))
        {
            return Err(invalid(alloc::format!(
                "monitor exponents must lie in [0, {g_max})"
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) + 0.5) as usize
    }

    /// Heuristic stability ceiling for the step size given an empirical
    /// nonlinearity constant and the running sup of ||A^{1/4} state||^2.
    pub fn suggested_max_dt(c0: f64, max_theta_deriv: f64, sup_quarter_sq: f64) -> f64 {
        0.5 / (c0 * max_theta_deriv.max(1.0) * sup_quarter_sq.max(1e-12))
    }
}

/// Smooth truncation profile Theta_R: identically 1 on [0, R], identically
/// 0 on [R+1, infinity), quintic smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    radius: f64,
}

impl Cutoff {
    /// sup |Theta'_R|, attained at the midpoint of the transition band.
    pub const MAX_DERIVATIVE: f64 = 15.0 / 8.0;

    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(invalid("cutoff radius must be finite and nonnegative"));
        }
        Ok(Cutoff { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= self.radius {
            1.0
        } else if r >= self.radius + 1.0 {
            0.0
        } else {
            let s = r - self.radius;
            1.0 - (6.0 * s * s - 15.0 * s + 10.0) * s * s * s
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        if r <= self.radius || r >= self.radius + 1.0 {
            0.0
        } else {
            let s = r - self.radius;
            -30.0 * s * s * (1.0 - s) * (1.0 - s)
        }
    }
}

/// Galerkin drift -B_n(w) at the truncation of `w`, evaluated through a
/// table that may be assembled at a larger truncation.
pub(crate) fn galerkin_drift(w: &SpectralField, table: &TriadTable) -> Result<SpectralField> {
    if table.truncation() < w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: table.truncation(),
        });
    }
    let b = if table.truncation() == w.len() {
        table.b_apply(w)?
    } else {
        table.b_apply(&w.resized(table.truncation()))?.resized(w.len())
    };
    Ok(b.scaled(-1.0))
}

fn blow_up_guard(out: &SpectralField) -> Result<()> {
    if out.is_finite() {
        Ok(())
    } else {
        Err(Error::BlowUp {
            step: 0,
            time: 0.0,
            norm: f64::NAN,
        })
    }
}

/// One exponential-Euler step of the v-equation with frozen forcing z.
pub fn step_v(
    v: &SpectralField,
    z: &SpectralField,
    dt: f64,
    s: &Spectrum,
    table: &TriadTable,
) -> Result<SpectralField> {
    if !(dt > 0.0) {
        return Err(invalid("step size must be positive"));
    }
    if v.len() != z.len() || v.len() > s.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            got: z.len(),
        });
    }
    let drift = galerkin_drift(&v.add(z), table)?;
    let mut out = SpectralField::zero(v.len());
    {
        let oc = out.coeffs_mut();
        for k in 0..v.len() {
            let x = s.lambda(k) * dt;
            oc[k] = fx::exp_neg(x) * v.coeffs()[k] + dt * fx::expm1_over(x) * drift.coeffs()[k];
        }
    }
    blow_up_guard(&out)?;
    Ok(out)
}

/// One second-order exponential Runge-Kutta step; the corrector stage
/// evaluates the drift at the predicted state with the forcing advanced
/// to the end of the step.
pub fn step_v_etd2(
    v: &SpectralField,
    z_now: &SpectralField,
    z_next: &SpectralField,
    dt: f64,
    s: &Spectrum,
    table: &TriadTable,
) -> Result<SpectralField> {
    let n1 = galerkin_drift(&v.add(z_now), table)?;
    let mut pred = SpectralField::zero(v.len());
    {
        let oc = pred.coeffs_mut();
        for k in 0..v.len() {
            let x = s.lambda(k) * dt;
            oc[k] = fx::exp_neg(x) * v.coeffs()[k] + dt * fx::expm1_over(x) * n1.coeffs()[k];
        }
    }
    let n2 = galerkin_drift(&pred.add(z_next), table)?;
    let mut out = pred;
    {
        let oc = out.coeffs_mut();
        for k in 0..v.len() {
            let x = s.lambda(k) * dt;
            oc[k] += dt * fx::phi2(x) * (n2.coeffs()[k] - n1.coeffs()[k]);
        }
    }
    blow_up_guard(&out)?;
    Ok(out)
}

fn attach_context(e: Error, step: usize, time: f64, norm: f64) -> Error {
    match e {
        Error::BlowUp { .. } => Error::BlowUp { step, time, norm },
        other => other,
    }
}

/// Integrates the v-equation from v(0) = Pi_n x along the supplied noise
/// path. Returns the v-trajectory and the reconstructed u = v + z.
///
/// The noise grid must refine the solver grid: its spacing divides the
/// solver step and its horizon covers the solver horizon.
pub fn integrate(
    x: &SpectralField,
    z_path: &PathSample,
    cfg: &SolverConfig,
    s: &Spectrum,
    table: &TriadTable,
) -> Result<(PathSample, PathSample)> {
    cfg.validate()?;
    if cfg.n > s.len() {
        return Err(Error::DimensionMismatch {
            expected: cfg.n,
            got: s.len(),
        });
    }
    let dt_z = z_path
        .uniform_dt()
        .ok_or_else(|| invalid("noise path must live on a uniform grid"))?;
    let ratio = cfg.dt / dt_z;
    let stride = (ratio + 0.5) as usize;
    if stride == 0 || fx::abs(ratio - stride as f64) > 1e-9 {
        return Err(invalid("noise grid must refine the solver grid"));
    }
    let steps = cfg.steps();
    if steps * stride + 1 > z_path.len() {
        return Err(invalid("noise path shorter than the solver horizon"));
    }

    let mut v = x.resized(cfg.n);
    let z_at = |j: usize| z_path.field(j * stride).resized(cfg.n);

    let mut times = Vec::with_capacity(steps + 1);
    let mut v_fields = Vec::with_capacity(steps + 1);
    let mut u_fields = Vec::with_capacity(steps + 1);
    times.push(0.0);
    u_fields.push(v.add(&z_at(0)));
    v_fields.push(v.clone());

    for j in 0..steps {
        let t = cfg.dt * j as f64;
        let z_now = z_at(j);
        let next = match cfg.integrator {
            Integrator::ExponentialEuler => step_v(&v, &z_now, cfg.dt, s, table),
            Integrator::Etd2 => step_v_etd2(&v, &z_now, &z_at(j + 1), cfg.dt, s, table),
        }
        .map_err(|e| attach_context(e, j, t, v.norm()))?;
        v = next;
        times.push(cfg.dt * (j + 1) as f64);
        u_fields.push(v.add(&z_at(j + 1)));
        v_fields.push(v.clone());
    }

    let seed = z_path.seed;
    Ok((
        PathSample::new(times.clone(), v_fields, seed)?,
        PathSample::new(times, u_fields, seed)?,
    ))
}

/// H-norm defect of the mild identity
/// v(t) + int_0^t e^{-(t-s)A} B_n(v + z) ds - e^{-tA} Pi_n x
/// at a grid time, with the convolution integral computed by an
/// exponentially weighted trapezoid rule on the trajectory grid.
pub fn mild_residual(
    v_traj: &PathSample,
    z_path: &PathSample,
    x: &SpectralField,
    s: &Spectrum,
    table: &TriadTable,
    t: f64,
) -> Result<f64> {
    let n = v_traj.truncation();
    let idx = v_traj
        .times()
        .iter()
        .position(|&tj| fx::abs(tj - t) <= 1e-9 * t.max(1.0))
        .ok_or_else(|| invalid("requested time is not on the trajectory grid"))?;
    let dt_z = z_path
        .uniform_dt()
        .ok_or_else(|| invalid("noise path must live on a uniform grid"))?;

    let z_at_time = |tj: f64| -> Result<SpectralField> {
        let j = ((tj / dt_z) + 0.5) as usize;
        if j >= z_path.len() || fx::abs(z_path.times()[j] - tj) > 1e-9 * tj.max(1.0) {
            return Err(invalid("trajectory time missing from the noise grid"));
        }
        Ok(z_path.field(j).resized(n))
    };

    // B_n(v + z) at every grid node up to t
    let mut b_nodes = Vec::with_capacity(idx + 1);
    for j in 0..=idx {
        let w = v_traj.field(j).add(&z_at_time(v_traj.times()[j])?);
        b_nodes.push(galerkin_drift(&w, table)?.scaled(-1.0));
    }

    let mut defect = v_traj.field(idx).sub(&s.semigroup_apply(&x.resized(n), t)?);
    for j in 0..idx {
        let (tj, tj1) = (v_traj.times()[j], v_traj.times()[j + 1]);
        let h = tj1 - tj;
        let left = s.semigroup_apply(&b_nodes[j], t - tj)?;
        let right = s.semigroup_apply(&b_nodes[j + 1], t - tj1)?;
        defect = defect.add(&left.add(&right).scaled(0.5 * h));
    }
    Ok(defect.norm())
}

/// Trapezoid quadrature of int_0^T ||A^{1/4} v(t)||^p dt along the
/// trajectory grid.
pub fn apriori_lp_monitor(v_traj: &PathSample, s: &Spectrum, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid("monitor exponent must be at least 1"));
    }
    let vals: Result<Vec<f64>> = v_traj
        .fields()
        .iter()
        .map(|f| Ok(fx::powf(s.fractional_norm(f, 0.25)?, p)))
        .collect();
    let vals = vals?;
    let mut acc = 0.0;
    for j in 0..v_traj.len() - 1 {
        let h = v_traj.times()[j + 1] - v_traj.times()[j];
        acc += 0.5 * h * (vals[j] + vals[j + 1]);
    }
    Ok(acc)
}

/// Grid maximum of ||A^gamma v(t)||.
pub fn apriori_sup_monitor(v_traj: &PathSample, s: &Spectrum, gamma: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(invalid("sup-monitor exponent must lie in [0, 1/2)"));
    }
    let mut best = 0.0f64;
    for f in v_traj.fields() {
        best = best.max(s.fractional_norm(f, gamma)?);
    }
    Ok(best)
}

/// Cauchy differences between consecutive truncation levels driven by one
/// shared noise path: d_i = sup_t ||A^gamma (v_{n_{i+1}} - v_{n_i})||, the
/// coarser trajectory zero-padded into the finer space.
pub fn galerkin_convergence_probe(
    x: &SpectralField,
    z_path: &PathSample,
    levels: &[usize],
    cfg: &SolverConfig,
    gamma: f64,
    s: &Spectrum,
    table: &TriadTable,
) -> Result<Vec<f64>> {
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("need at least two strictly increasing levels"));
    }
    let top = *levels.last().expect("nonempty levels");
    if top > s.len() || top > table.truncation() {
        return Err(invalid("levels exceed the assembled truncation"));
    }
    let mut trajectories = Vec::with_capacity(levels.len());
    for &m in levels {
        let mut cfg_m = cfg.clone();
        cfg_m.n = m;
        let (v, _) = integrate(x, z_path, &cfg_m, s, table)?;
        trajectories.push(v);
    }
    let mut out = Vec::with_capacity(levels.len() - 1);
    for pair in trajectories.windows(2) {
        let (coarse, fine) = (&pair[0], &pair[1]);
        let m = fine.truncation();
        let mut d = 0.0f64;
        for j in 0..fine.len() {
            let diff = fine.field(j).sub(&coarse.field(j).resized(m));
            d = d.max(s.fractional_norm(&diff, gamma)?);
        }
        out.push(d);
    }
    Ok(out)
}

/// Supremum of ||A^gamma u(t)|| over [t0, T]. With t0 > 0 this stays finite
/// for merely square-summable initial data; t0 = 0 is allowed as the
/// negative control (the value then includes ||A^gamma x|| itself).
pub fn regularization_probe(
    x: &SpectralField,
    z_path: &PathSample,
    cfg: &SolverConfig,
    t0: f64,
    gamma: f64,
    s: &Spectrum,
    table: &TriadTable,
) -> Result<f64> {
    if !(t0 >= 0.0 && t0 < cfg.horizon) {
        return Err(invalid("need 0 <= t0 < horizon"));
    }
    let (_, u) = integrate(x, z_path, cfg, s, table)?;
    let mut best = 0.0f64;
    for j in 0..u.len() {
        if u.times()[j] + 1e-12 >= t0 {
            best = best.max(s.fractional_norm(u.field(j), gamma)?);
        }
    }
    Ok(best)
}

/// Per-mode joint sample of the Brownian increment and the matching
/// stochastic-convolution increment over one step. The pair is needed
/// whenever a trajectory and an Ito integral against the same Brownian
/// motion are accumulated together.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    /// Convolution innovation: z(t+dt) - e^{-dt A} z(t), coloring included.
    pub eta: Vec<f64>,
    /// Raw Brownian increments, variance dt per mode.
    pub dw: Vec<f64>,
}

/// Draws (eta, dW) from their exact joint Gaussian law:
/// Var eta_k = g_k^2 (1-e^{-2 lambda dt})/(2 lambda), Var dW_k = dt,
/// Cov = g_k (1-e^{-lambda dt})/lambda.
pub fn sample_joint_increment(
    dt: f64,
    c: &Coloring,
    s: &Spectrum,
    stream: &NoiseStream,
    step: u64,
) -> Result<NoiseIncrement> {
    if !(dt > 0.0) {
        return Err(invalid("increment needs dt > 0"));
    }
    if c.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            got: c.len(),
        });
    }
    let n = s.len();
    let mut eta = Vec::with_capacity(n);
    let mut dw = Vec::with_capacity(n);
    for k in 0..n {
        let l = s.lambda(k);
        let g = c.amplitude(k);
        let e1 = fx::exp_neg(l * dt);
        let var_eta = g * g * (1.0 - e1 * e1) / (2.0 * l);
        let cov = g * (1.0 - e1) / l;
        let xi1 = stream.normal(step, k as u64, 0);
        let xi2 = stream.normal(step, k as u64, 1);
        let w = fx::sqrt(dt) * xi1;
        let resid = (var_eta - cov * cov / dt).max(0.0);
        eta.push(cov / dt * w + fx::sqrt(resid) * xi2);
        dw.push(w);
    }
    Ok(NoiseIncrement { eta, dw })
}

/// One step of the truncated SDE with a caller-supplied convolution
/// innovation: exponential-Euler drift with the cutoff nonlinearity plus
/// the exact linear-noise increment.
pub fn step_truncated_with(
    u: &SpectralField,
    dt: f64,
    cutoff: &Cutoff,
    s: &Spectrum,
    table: &TriadTable,
    eta: &[f64],
) -> Result<SpectralField> {
    if eta.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: eta.len(),
        });
    }
    let quarter = s.fractional_norm(u, 0.25)?;
    let theta = cutoff.value(quarter * quarter);
    let drift = galerkin_drift(u, table)?.scaled(theta);
    let mut out = SpectralField::zero(u.len());
    {
        let oc = out.coeffs_mut();
        for k in 0..u.len() {
            let x = s.lambda(k) * dt;
            oc[k] = fx::exp_neg(x) * u.coeffs()[k]
                + dt * fx::expm1_over(x) * drift.coeffs()[k]
                + eta[k];
        }
    }
    blow_up_guard(&out)?;
    Ok(out)
}

/// Truncated-SDE step drawing its noise from a stateful generator.
pub fn step_truncated(
    u: &SpectralField,
    dt: f64,
    cutoff: &Cutoff,
    c: &Coloring,
    s: &Spectrum,
    table: &TriadTable,
    rng: &mut CounterRng,
) -> Result<SpectralField> {
    if c.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: c.len(),
        });
    }
    let eta: Vec<f64> = (0..u.len())
        .map(|k| {
            let l = s.lambda(k);
            let e1 = fx::exp_neg(l * dt);
            c.amplitude(k) * fx::sqrt((1.0 - e1 * e1) / (2.0 * l)) * rng.next_normal()
        })
        .collect();
    step_truncated_with(u, dt, cutoff, s, table, &eta)
}

/// Steering noise path z-bar with z-bar(0) = 0 whose induced solution
/// reaches y at time T. The reference trajectory u-bar runs the heat flow
/// from x on [0, t0], a linear bridge on [t0, t1], and the backward heat
/// flow into y on [t1, T]; v-bar solves v' + Av = -B_n(u-bar) from x, and
/// z-bar = u-bar - v-bar.
pub fn synthesize_control(
    x: &SpectralField,
    y: &SpectralField,
    horizon: f64,
    t0: f64,
    t1: f64,
    gamma: f64,
    dt: f64,
    s: &Spectrum,
    table: &TriadTable,
) -> Result<PathSample> {
    if !(0.0 < t0 && t0 < t1 && t1 < horizon) {
        return Err(invalid("need 0 < t0 < t1 < T"));
    }
    if !(gamma > 0.25 && gamma < 0.5) {
        return Err(invalid("control regularity exponent must lie in (1/4, 1/2)"));
    }
    if !(dt > 0.0 && dt <= horizon) {
        return Err(invalid("need 0 < dt <= T"));
    }
    if x.len() != y.len() || x.len() > s.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    let steps = ((horizon / dt) + 0.5) as usize;

    let at_t0 = s.semigroup_apply(x, t0)?;
    let mut at_t1 = SpectralField::zero(n);
    {
        let oc = at_t1.coeffs_mut();
        for k in 0..n {
            oc[k] = y.coeffs()[k] * fx::exp(s.lambda(k) * (horizon - t1));
        }
    }
    if !at_t1.is_finite() {
        return Err(invalid(
            "backward heat flow overflows; shorten T - t1 or smooth the target",
        ));
    }
    let ubar = |t: f64| -> Result<SpectralField> {
        if t <= t0 {
            s.semigroup_apply(x, t)
        } else if t >= t1 {
            let mut f = SpectralField::zero(n);
            let oc = f.coeffs_mut();
            for k in 0..n {
                oc[k] = y.coeffs()[k] * fx::exp(s.lambda(k) * (horizon - t));
            }
            Ok(f)
        } else {
            let w = (t - t0) / (t1 - t0);
            Ok(at_t0.scaled(1.0 - w).add(&at_t1.scaled(w)))
        }
    };

    let mut vbar = x.clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut zbar = Vec::with_capacity(steps + 1);
    times.push(0.0);
    zbar.push(SpectralField::zero(n));
    for j in 0..steps {
        let t = dt * j as f64;
        let forcing = galerkin_drift(&ubar(t)?, table)?;
        let mut next = SpectralField::zero(n);
        {
            let oc = next.coeffs_mut();
            for k in 0..n {
                let a = s.lambda(k) * dt;
                oc[k] = fx::exp_neg(a) * vbar.coeffs()[k] + dt * fx::expm1_over(a) * forcing.coeffs()[k];
            }
        }
        vbar = next;
        let tn = dt * (j + 1) as f64;
        times.push(tn);
        zbar.push(ubar(tn)?.sub(&vbar));
    }
    PathSample::new(times, zbar, None)
}

/// Replays the controlled trajectory and reports the endpoint miss
/// ||A^{1/4}(u(T) - y)||.
pub fn verify_control(
    zbar: &PathSample,
    x: &SpectralField,
    y: &SpectralField,
    cfg: &SolverConfig,
    s: &Spectrum,
    table: &TriadTable,
) -> Result<f64> {
    let (_, u) = integrate(x, zbar, cfg, s, table)?;
    s.fractional_norm(&u.last().sub(&y.resized(cfg.n)), 0.25)
}

/// Verdict of the discrete singular-kernel Gronwall comparator.
#[derive(Debug, Clone, Copy)]
pub struct GronwallCheck {
    /// u(t) <= a t^{-alpha} + b int_0^t (t-s)^{-beta} u(s) ds on the grid.
    pub hypothesis_holds: bool,
    /// u(t) <= a M t^{-alpha} on the grid.
    pub conclusion_holds: bool,
    /// The comparison constant M.
    pub constant: f64,
}

/// Comparison constant from the iterated-kernel series
/// M = sum_m (b Gamma(1-beta) T^{1-beta})^m Gamma(1-alpha) / Gamma(1-alpha + m(1-beta)).
pub fn gronwall_constant(a_exp: f64, b_coef: f64, beta: f64, horizon: f64) -> Result<f64> {
    if !(a_exp >= 0.0 && a_exp < 1.0 && beta >= 0.0 && beta < 1.0) {
        return Err(invalid("exponents must lie in [0, 1)"));
    }
    if !(b_coef >= 0.0 && horizon > 0.0) {
        return Err(invalid("need b >= 0 and T > 0"));
    }
    let q = b_coef * fx::tgamma(1.0 - beta) * fx::powf(horizon, 1.0 - beta);
    let g_top = fx::tgamma(1.0 - a_exp);
    let mut total = 0.0f64;
    let mut qpow = 1.0f64;
    for m in 0..10_000 {
        let term = qpow * g_top / fx::tgamma(1.0 - a_exp + m as f64 * (1.0 - beta));
        total += term;
        if term < 1e-16 * total.max(1.0) {
            return Ok(total);
        }
        qpow *= q;
    }
    Err(Error::Degenerate(alloc::string::String::from(
        "comparison series did not converge in 10000 terms",
    )))
}

/// Checks the hypothesis and the conclusion of the singular-kernel
/// Gronwall inequality on a grid trace, with the convolution integral by
/// product integration (the kernel factor integrated exactly per cell).
pub fn modified_gronwall_check(
    times: &[f64],
    u: &[f64],
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
) -> Result<GronwallCheck> {
    if times.len() != u.len() || times.len() < 2 {
        return Err(invalid("need matching grids with at least two nodes"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
        return Err(invalid("times must be strictly increasing and positive"));
    }
    if u.iter().any(|&x| !(x >= 0.0)) {
        return Err(invalid("trace must be nonnegative"));
    }
    let horizon = *times.last().expect("nonempty grid");
    let m_const = gronwall_constant(alpha, b, beta, horizon)?;
    let slack = 1e-12;
    let mut hypothesis_holds = true;
    let mut conclusion_holds = true;
    for i in 0..times.len() {
        let t = times[i];
        // product integration from 0: the leading cell [0, t_0] uses u(t_0)
        let mut conv = u[0] * (fx::powf(t, 1.0 - beta) - fx::powf(t - times[0], 1.0 - beta))
            / (1.0 - beta);
        for j in 0..i {
            let w = (fx::powf(t - times[j], 1.0 - beta) - fx::powf(t - times[j + 1], 1.0 - beta))
                / (1.0 - beta);
            conv += u[j] * w;
        }
        let rhs_hyp = a * fx::powf(t, -alpha) + b * conv;
        if u[i] > rhs_hyp * (1.0 + slack) + slack {
            hypothesis_holds = false;
        }
        if u[i] > a * m_const * fx::powf(t, -alpha) * (1.0 + slack) + slack {
            conclusion_holds = false;
        }
    }
    Ok(GronwallCheck {
        hypothesis_holds,
        conclusion_holds,
        constant: m_const,
    })
}
