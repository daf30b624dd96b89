//! Thin shims over `libm` so the rest of the crate stays `no_std`-clean.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn cbrt(x: f64) -> f64 {
    libm::cbrt(x)
}

#[inline]
pub fn tgamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// exp(-x) for x >= 0, clamped so underflow gives exactly 0.
#[inline]
pub fn exp_neg(x: f64) -> f64 {
    if x > 745.0 {
        0.0
    } else {
        libm::exp(-x)
    }
}

/// (1 - e^{-x}) / x, continuous at 0. This is the phi_1 weight of the
/// exponential Euler step evaluated at -x.
#[inline]
pub fn expm1_over(x: f64) -> f64 {
    if libm::fabs(x) < 1e-8 {
        1.0 - x / 2.0 + x * x / 6.0
    } else {
        -libm::expm1(-x) / x
    }
}

/// (e^{-x} - 1 + x) / x^2, the phi_2 weight at -x, continuous at 0.
#[inline]
pub fn phi2(x: f64) -> f64 {
    if libm::fabs(x) < 1e-5 {
        0.5 - x / 6.0 + x * x / 24.0
    } else {
        (libm::expm1(-x) + x) / (x * x)
    }
}
