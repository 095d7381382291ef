//! Small statistics toolkit shared by the Monte Carlo audits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, streams};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Two-sided 99% normal quantile used for Wilson intervals.
pub const WILSON_Z: f64 = 2.575_829_303_548_901;

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// `ln Σ exp(v_i)` without overflow.
pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = values.map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// Closed interval estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn scale(&self, s: f64) -> Interval {
        if s >= 0.0 {
            Interval { lo: self.lo * s, hi: self.hi * s }
        } else {
            Interval { lo: self.hi * s, hi: self.lo * s }
        }
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval { lo: (center - half).max(0.0), hi: (center + half).min(1.0) }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `(mean |s|^p)^{1/p}` for nonnegative samples.
pub fn moment_root(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let powered: Vec<f64> = samples.iter().map(|s| s.abs().powf(p)).collect();
    mean(&powered).powf(1.0 / p)
}

/// Percentile bootstrap interval (2.5%, 97.5%) for `(E|S|^p)^{1/p}`.
pub fn bootstrap_moment_ci(samples: &[f64], p: f64, seed: u64, resamples: usize) -> Interval {
    let n = samples.len();
    if n == 0 {
        return Interval { lo: f64::NAN, hi: f64::NAN };
    }
    let powered: Vec<f64> = samples.iter().map(|s| s.abs().powf(p)).collect();
    let mut stats: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, streams::BOOTSTRAP, b as u64);
            let mut acc = 0.0;
            for _ in 0..n {
                acc += powered[rng.random_range(0..n)];
            }
            (acc / n as f64).powf(1.0 / p)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let idx = |q: f64| -> f64 {
        let pos = q * (resamples - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = pos - lo as f64;
        stats[lo] * (1.0 - w) + stats[hi] * w
    };
    let point = moment_root(samples, p);
    Interval { lo: idx(0.025).min(point), hi: idx(0.975).max(point) }
}

/// Adaptive Simpson quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    // Start from several panels so a narrow bump cannot hide between the
    // first few nodes.
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            let lo = a + h * k as f64;
            let hi = if k + 1 == PANELS { b } else { lo + h };
            let (flo, fhi) = (f(lo), f(hi));
            let (m, fm, whole) = simpson(f, lo, flo, hi, fhi);
            recurse(f, lo, flo, hi, fhi, m, fm, whole, tol / PANELS as f64, 48)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_point_estimate() {
        let iv = wilson_interval(30, 100, WILSON_Z);
        assert!(iv.contains(0.3));
        assert!(iv.lo > 0.15 && iv.hi < 0.45);
        let zero = wilson_interval(0, 1000, WILSON_Z);
        assert_eq!(zero.lo, 0.0);
        assert!(zero.hi < 0.01);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((2.0 * (1.0 - normal_cdf(1.0)) - 0.317_310_507_862_914).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_gaussian_density() {
        let f = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = integrate(&f, -10.0, 10.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bootstrap_interval_brackets_estimate() {
        let xs: Vec<f64> = (0..500).map(|i| (i % 17) as f64 / 7.0).collect();
        let iv = bootstrap_moment_ci(&xs, 2.0, 3, 200);
        assert!(iv.contains(moment_root(&xs, 2.0)));
        assert!(iv.hi - iv.lo < 0.5);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(v.iter().copied()) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
