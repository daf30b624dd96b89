//! Small statistical utilities shared by the estimators.

use alloc::vec::Vec;

use crate::fx;

/// Pairwise summation. Order-independent reductions elsewhere rely on this
/// to keep floating-point totals reproducible.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn mean_stderr(xs: &[f64]) -> MeanStderr {
    let n = xs.len();
    assert!(n >= 2, "standard error needs at least two samples");
    let mean = pairwise_sum(xs) / n as f64;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    MeanStderr {
        mean,
        stderr: fx::sqrt(var / n as f64),
        n,
    }
}

/// Two estimates agree within `k` combined standard errors.
pub fn within_combined_se(a: MeanStderr, b: MeanStderr, k: f64) -> bool {
    let se = fx::sqrt(a.stderr * a.stderr + b.stderr * b.stderr);
    fx::abs(a.mean - b.mean) <= k * se.max(1e-300)
}

/// Ordinary least squares y = slope * x + intercept, with r^2.
#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    assert!(n >= 2.0);
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}

/// Freedman-Diaconis bin width on the pooled sample. Falls back to a
/// 1-bin rule when the IQR degenerates.
pub fn fd_bin_width(pooled: &mut [f64]) -> f64 {
    pooled.sort_unstable_by(|a, b| a.partial_cmp(b).expect("nonfinite sample"));
    let n = pooled.len();
    let q = |p: f64| -> f64 {
        let idx = p * (n - 1) as f64;
        let lo = fx::floor(idx) as usize;
        let hi = (lo + 1).min(n - 1);
        let w = idx - lo as f64;
        pooled[lo] * (1.0 - w) + pooled[hi] * w
    };
    let iqr = q(0.75) - q(0.25);
    if iqr <= 0.0 {
        let span = pooled[n - 1] - pooled[0];
        if span > 0.0 {
            span
        } else {
            1.0
        }
    } else {
        2.0 * iqr / fx::cbrt(n as f64)
    }
}

/// Half-L1 distance between normalized histograms of two samples, using a
/// common Freedman-Diaconis binning of the pooled data. Lies in [0, 1].
pub fn histogram_tv(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let width = fd_bin_width(&mut pooled);
    let lo = pooled[0];
    let hi = pooled[pooled.len() - 1];
    let nbins = (((hi - lo) / width) as usize + 1).max(1);
    let bin = |x: f64| -> usize {
        let i = ((x - lo) / width) as usize;
        i.min(nbins - 1)
    };
    let mut ha = alloc::vec![0.0f64; nbins];
    let mut hb = alloc::vec![0.0f64; nbins];
    for &x in a {
        ha[bin(x)] += 1.0 / a.len() as f64;
    }
    for &x in b {
        hb[bin(x)] += 1.0 / b.len() as f64;
    }
    0.5 * ha
        .iter()
        .zip(&hb)
        .map(|(p, q)| fx::abs(p - q))
        .sum::<f64>()
}

/// Exact one-sided lower confidence bound for a binomial proportion: the
/// p solving P(Bin(n, p) >= k) = alpha, found by bisection. The bound is
/// strictly positive iff k >= 1.
pub fn binomial_lower_bound(k: usize, n: usize, alpha: f64) -> f64 {
    assert!(k <= n && n > 0);
    if k == 0 {
        return 0.0;
    }
    // P(Bin(n, p) >= k) is increasing in p; bisect on it.
    let tail = |p: f64| -> f64 {
        // Complementary CDF via direct summation of the lower tail.
        let mut logp = 0.0;
        let mut cdf = 0.0;
        // log C(n, i) p^i (1-p)^(n-i), accumulated iteratively.
        let (lp, lq) = (fx::ln(p), fx::ln(1.0 - p));
        logp += n as f64 * lq;
        cdf += fx::exp(logp.min(700.0));
        let mut logc = 0.0;
        for i in 1..k {
            logc += fx::ln((n - i + 1) as f64) - fx::ln(i as f64);
            let l = logc + i as f64 * lp + (n - i) as f64 * lq;
            cdf += fx::exp(l.min(700.0));
        }
        1.0 - cdf
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) >= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}
