//! Diagonal representation of the Stokes operator: eigenvalues, fractional
//! powers, the analytic semigroup, and the smoothing/interpolation
//! inequality checks.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::fx;

/// Which eigenbasis the spectrum comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Divergence-free real Fourier modes on the 2-torus; eigenvalues are
    /// sorted values of |k|^2 over the admissible lattice.
    Torus,
    /// Abstract spectrum lambda_k = c * k, with structure constants supplied
    /// by the caller.
    Synthetic,
}

/// Ordered truncation of the Stokes spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    backend: Backend,
}

impl Spectrum {
    /// Synthetic spectrum lambda_k = c * k for k = 1..=n.
    pub fn synthetic(n: usize, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("truncation level n must be >= 1"));
        }
        if !(c > 0.0) {
            return Err(invalid("eigenvalue slope c must be positive"));
        }
        Ok(Spectrum {
            eigenvalues: (1..=n).map(|k| c * k as f64).collect(),
            backend: Backend::Synthetic,
        })
    }

    /// Spectrum from an explicit eigenvalue list (used by the torus basis
    /// assembly). Values must be positive and nondecreasing.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, backend: Backend) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(invalid("truncation level n must be >= 1"));
        }
        for w in eigenvalues.windows(2) {
            if w[1] < w[0] {
                return Err(invalid("eigenvalues must be nondecreasing"));
            }
        }
        if !(eigenvalues[0] > 0.0) {
            return Err(invalid("eigenvalues must be strictly positive"));
        }
        Ok(Spectrum {
            eigenvalues,
            backend,
        })
    }

    pub fn torus(n: usize) -> Result<Self> {
        Ok(crate::basis::assemble_torus_basis(n)?.1)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Eigenvalue of mode `k` (0-based index).
    #[inline]
    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Diagonal action of A^alpha.
    pub fn fractional_apply(&self, x: &SpectralField, alpha: f64) -> Result<SpectralField> {
        self.check_len(x)?;
        let coeffs = self
            .eigenvalues
            .iter()
            .zip(&x.coeffs)
            .map(|(&l, &c)| fx::powf(l, alpha) * c)
            .collect();
        Ok(SpectralField { coeffs })
    }

    /// ||A^alpha x|| = sqrt(sum_k lambda_k^{2 alpha} x_k^2).
    pub fn fractional_norm(&self, x: &SpectralField, alpha: f64) -> Result<f64> {
        self.check_len(x)?;
        let mut s = 0.0;
        for (&l, &c) in self.eigenvalues.iter().zip(&x.coeffs) {
            s += fx::powf(l, 2.0 * alpha) * c * c;
        }
        Ok(fx::sqrt(s))
    }

    /// Diagonal action of e^{-tA}, t >= 0.
    pub fn semigroup_apply(&self, x: &SpectralField, t: f64) -> Result<SpectralField> {
        if !(t >= 0.0) {
            return Err(invalid("semigroup time must be nonnegative"));
        }
        self.check_len(x)?;
        let coeffs = self
            .eigenvalues
            .iter()
            .zip(&x.coeffs)
            .map(|(&l, &c)| fx::exp_neg(t * l) * c)
            .collect();
        Ok(SpectralField { coeffs })
    }

    /// Truncated Hilbert-Schmidt sum: sum_k lambda_k^{-2 alpha}.
    pub fn hilbert_schmidt_tail(&self, alpha: f64) -> f64 {
        let terms: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|&l| fx::powf(l, -2.0 * alpha))
            .collect();
        crate::stats::pairwise_sum(&terms)
    }

    // A field from a coarser Galerkin space embeds canonically; diagonal
    // operators act on its leading modes.
    fn check_len(&self, x: &SpectralField) -> Result<()> {
        if x.len() > self.len() {
            Err(Error::DimensionMismatch {
                expected: self.len(),
                got: x.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Coefficient sequence of a velocity field against the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("field coefficients must be finite"));
        }
        Ok(SpectralField { coeffs })
    }

    pub fn zero(n: usize) -> Self {
        SpectralField {
            coeffs: alloc::vec![0.0; n],
        }
    }

    /// Unit coefficient at 0-based index `k`.
    pub fn unit(n: usize, k: usize) -> Self {
        let mut coeffs = alloc::vec![0.0; n];
        coeffs[k] = 1.0;
        SpectralField { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Euclidean norm of the coefficients (the H norm).
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for &c in &self.coeffs {
            s += c * c;
        }
        fx::sqrt(s)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        SpectralField {
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.len(), other.len());
        SpectralField {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.len(), other.len());
        SpectralField {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn dot(&self, other: &SpectralField) -> f64 {
        assert_eq!(self.len(), other.len());
        let mut s = 0.0;
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            s += a * b;
        }
        s
    }

    /// Project onto the first `m` modes (m <= n), or zero-pad up to `m`.
    pub fn resized(&self, m: usize) -> SpectralField {
        let mut coeffs = alloc::vec![0.0; m];
        let take = m.min(self.len());
        coeffs[..take].copy_from_slice(&self.coeffs[..take]);
        SpectralField { coeffs }
    }

    /// Random field with independent N(0,1) coefficients.
    pub fn random_gaussian(n: usize, rng: &mut crate::rng::CounterRng) -> SpectralField {
        SpectralField {
            coeffs: (0..n).map(|_| rng.next_normal()).collect(),
        }
    }
}

/// Outcome of a two-sided inequality check.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Relative slack absorbed by all inequality checks.
pub const CHECK_SLACK: f64 = 1e-12;

/// Verifies the semigroup smoothing bound
/// max_k lambda_k^alpha e^{-t lambda_k} <= (alpha/e)^alpha t^{-alpha}.
pub fn smoothing_bound_check(s: &Spectrum, alpha: f64, t: f64) -> Result<BoundCheck> {
    if !(alpha > 0.0 && t > 0.0) {
        return Err(invalid("smoothing bound requires alpha > 0 and t > 0"));
    }
    let mut lhs = 0.0f64;
    for &l in s.eigenvalues() {
        lhs = lhs.max(fx::powf(l, alpha) * fx::exp_neg(t * l));
    }
    let rhs = fx::powf(alpha / core::f64::consts::E, alpha) * fx::powf(t, -alpha);
    Ok(BoundCheck {
        lhs,
        rhs,
        ok: lhs <= rhs * (1.0 + CHECK_SLACK),
    })
}

/// Verifies ||A^r x|| <= ||A^p x||^lam ||A^q x||^{1-lam} with
/// r = lam p + (1-lam) q.
pub fn interpolation_check(
    s: &Spectrum,
    x: &SpectralField,
    p: f64,
    q: f64,
    lam: f64,
) -> Result<BoundCheck> {
    if !(p >= 0.0 && q > p) {
        return Err(invalid("interpolation requires 0 <= p < q"));
    }
    if !(lam > 0.0 && lam < 1.0) {
        return Err(invalid("interpolation weight must lie in (0,1)"));
    }
    let r = lam * p + (1.0 - lam) * q;
    let lhs = s.fractional_norm(x, r)?;
    let rhs = fx::powf(s.fractional_norm(x, p)?, lam) * fx::powf(s.fractional_norm(x, q)?, 1.0 - lam);
    Ok(BoundCheck {
        lhs,
        rhs,
        ok: lhs <= rhs * (1.0 + CHECK_SLACK),
    })
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Torus => "torus",
            Backend::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(Backend::Torus),
            "synthetic" => Ok(Backend::Synthetic),
            other => Err(invalid(alloc::format!("unknown backend '{other}'"))),
        }
    }
}
