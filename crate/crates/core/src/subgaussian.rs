//! φ-sub-Gaussian drivers, empirical τ_φ, increment tail audits and the
//! moment/tail conversions.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orlicz::OrliczFunction;
use crate::rng::{stream_rng, streams};
use crate::stats::{log_sum_exp, mean, pairwise_sum, std_dev, wilson_interval, Interval, WILSON_Z};

/// Draws are generated in blocks; block `k` uses generator `(seed, stream, k)`.
pub const DRAW_BLOCK: usize = 1 << 12;
pub const JACKKNIFE_GROUPS: usize = 20;

pub type Sampler = Arc<dyn Fn(&mut ChaCha8Rng) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverKind {
    Gaussian { sigma: f64 },
    Rademacher,
    /// Uniform on `[-b, b]`.
    UniformBounded { b: f64 },
    /// `κ·W − κΓ(1 + 1/q)` with `W` standard Weibull of shape `q`.
    WeibullCentered { q: f64, kappa: f64 },
    Custom { name: String },
}

#[derive(Clone)]
pub struct ProcessDriver {
    kind: DriverKind,
    claimed_tau: Option<f64>,
    sampler: Option<Sampler>,
}

impl fmt::Debug for ProcessDriver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessDriver").field("kind", &self.kind).field("claimed_tau", &self.claimed_tau).finish()
    }
}

fn weibull_mean(q: f64, kappa: f64) -> f64 {
    kappa * libm::tgamma(1.0 + 1.0 / q)
}

impl ProcessDriver {
    /// Catalog driver; `Custom` kinds need [`ProcessDriver::custom`].
    pub fn new(kind: DriverKind) -> Result<ProcessDriver> {
        let claimed_tau = match &kind {
            DriverKind::Gaussian { sigma } if *sigma > 0.0 => Some(*sigma),
            DriverKind::Rademacher => Some(1.0),
            DriverKind::UniformBounded { b } if *b > 0.0 => Some(b / 3f64.sqrt()),
            DriverKind::WeibullCentered { q, kappa } if *q > 0.0 && *kappa > 0.0 => None,
            DriverKind::Custom { name } => {
                return Err(Error::InvalidParams(format!("custom driver '{name}' needs a sampler")))
            }
            other => return Err(Error::InvalidParams(format!("invalid driver parameters {other:?}"))),
        };
        Ok(ProcessDriver { kind, claimed_tau, sampler: None })
    }

    pub fn gaussian(sigma: f64) -> ProcessDriver {
        ProcessDriver::new(DriverKind::Gaussian { sigma }).expect("σ > 0")
    }

    pub fn rademacher() -> ProcessDriver {
        ProcessDriver::new(DriverKind::Rademacher).expect("no parameters")
    }

    pub fn custom<F>(name: &str, sampler: F, claimed_tau: Option<f64>) -> ProcessDriver
    where
        F: Fn(&mut ChaCha8Rng) -> f64 + Send + Sync + 'static,
    {
        ProcessDriver { kind: DriverKind::Custom { name: name.into() }, claimed_tau, sampler: Some(Arc::new(sampler)) }
    }

    pub fn kind(&self) -> &DriverKind {
        &self.kind
    }

    pub fn claimed_tau(&self) -> Option<f64> {
        self.claimed_tau
    }

    /// The law of `s·ξ`.
    pub fn scaled(&self, s: f64) -> Result<ProcessDriver> {
        if !(s > 0.0) {
            return Err(Error::InvalidParams(format!("scale must be positive, got {s}")));
        }
        let kind = match &self.kind {
            DriverKind::Gaussian { sigma } => DriverKind::Gaussian { sigma: sigma * s },
            DriverKind::UniformBounded { b } => DriverKind::UniformBounded { b: b * s },
            DriverKind::WeibullCentered { q, kappa } => DriverKind::WeibullCentered { q: *q, kappa: kappa * s },
            DriverKind::Rademacher | DriverKind::Custom { .. } => {
                let base = self.clone();
                let name = match &self.kind {
                    DriverKind::Custom { name } => format!("{name}*{s}"),
                    _ => format!("rademacher*{s}"),
                };
                return Ok(ProcessDriver::custom(&name, move |rng| s * base.sample(rng), self.claimed_tau.map(|t| t * s)));
            }
        };
        ProcessDriver::new(kind)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.kind {
            DriverKind::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            DriverKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            DriverKind::UniformBounded { b } => b * (2.0 * rng.random::<f64>() - 1.0),
            DriverKind::WeibullCentered { q, kappa } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                kappa * (-u.ln()).powf(1.0 / q) - weibull_mean(*q, *kappa)
            }
            DriverKind::Custom { .. } => (self.sampler.as_ref().expect("custom sampler"))(rng),
        }
    }

    /// A vector with i.i.d. coordinates.
    pub fn sample_vector(&self, rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.sample(rng)).collect()
    }

    /// `n` reproducible draws; independent of the thread count.
    pub fn draws(&self, n: usize, seed: u64, stream: u64) -> Vec<f64> {
        let mut out = vec![0.0; n];
        out.par_chunks_mut(DRAW_BLOCK).enumerate().for_each(|(k, chunk)| {
            let mut rng = stream_rng(seed, stream, k as u64);
            for x in chunk {
                *x = self.sample(&mut rng);
            }
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringAudit {
    pub mean: f64,
    pub sd: f64,
    pub n_samples: usize,
    pub passed: bool,
}

/// `|mean| ≤ 4·sd/√n`.
pub fn centering_audit(driver: &ProcessDriver, n_samples: usize, seed: u64) -> CenteringAudit {
    let xs = driver.draws(n_samples, seed, streams::DRIVER);
    let (m, sd) = (mean(&xs), std_dev(&xs));
    CenteringAudit { mean: m, sd, n_samples, passed: m.abs() <= 4.0 * sd / (n_samples as f64).sqrt() }
}

/// Default `λ` grid for [`tau_phi_estimate`]. Drivers such as the centred
/// Weibull approach their `τ` only at large `λ`, so the grid reaches `λ = 8`.
pub fn default_lambda_grid() -> Vec<f64> {
    symmetric_log_grid(0.02, 8.0, 33)
}

/// `±λ` for `count` log-spaced `λ ∈ [lo, hi]`.
pub fn symmetric_log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    let step = if count > 1 { (hi / lo).ln() / (count - 1) as f64 } else { 0.0 };
    let pos: Vec<f64> = (0..count).map(|k| lo * (step * k as f64).exp()).collect();
    pos.iter().rev().map(|l| -l).chain(pos.iter().copied()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau: f64,
    pub argmax_lambda: f64,
    pub jackknife_se: f64,
    /// Grid points dropped because the empirical MGF overflowed.
    pub truncated: Vec<f64>,
    pub n_samples: usize,
}

fn tau_from_centered(xs: &[f64], phi: &OrliczFunction, grid: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    let ln_n = (xs.len() as f64).ln();
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    let mut truncated = Vec::new();
    for &lambda in grid {
        let log_m = log_sum_exp(xs.iter().map(|x| lambda * x)) - ln_n;
        if !log_m.is_finite() || log_m >= f64::MAX.ln() {
            truncated.push(lambda);
            continue;
        }
        let y = log_m.max(0.0);
        let inv = match phi.inverse(y) {
            Ok(v) => v,
            Err(Error::OutOfRange { .. }) => phi.clone().with_range(y).inverse(y)?,
            Err(e) => return Err(e),
        };
        let t = inv / lambda.abs();
        if t > best.0 {
            best = (t, lambda);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::MgfOverflow { lambda: truncated.first().copied().unwrap_or(f64::NAN) });
    }
    Ok((best.0, best.1, truncated))
}

/// `sup_λ φ^{-1}(log m̂(λ))/|λ|` over the grid. Draws are centred by their
/// sample mean first, which makes `log m̂ ≥ 0` and removes `1/λ` noise
/// amplification at small `λ`.
pub fn tau_phi_estimate(
    driver: &ProcessDriver,
    phi: &OrliczFunction,
    lambda_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<TauEstimate> {
    if lambda_grid.is_empty() || lambda_grid.iter().any(|&l| l == 0.0 || !l.is_finite()) {
        return Err(Error::InvalidParams("λ grid must be nonempty, finite and exclude 0".into()));
    }
    if n_samples < 2 * JACKKNIFE_GROUPS {
        return Err(Error::InvalidParams(format!("need at least {} samples", 2 * JACKKNIFE_GROUPS)));
    }
    let mut xs = driver.draws(n_samples, seed, streams::DRIVER);
    let m = mean(&xs);
    xs.iter_mut().for_each(|x| *x -= m);
    let (tau, argmax_lambda, truncated) = tau_from_centered(&xs, phi, lambda_grid)?;

    // Leave-one-group-out over contiguous groups.
    let g = JACKKNIFE_GROUPS;
    let size = n_samples / g;
    let raw = driver.draws(n_samples, seed, streams::DRIVER);
    let loo: Vec<f64> = (0..g)
        .into_par_iter()
        .map(|k| {
            let mut rest: Vec<f64> = raw[..k * size].iter().chain(&raw[(k + 1) * size..]).copied().collect();
            let mk = mean(&rest);
            rest.iter_mut().for_each(|x| *x -= mk);
            tau_from_centered(&rest, phi, lambda_grid).map(|r| r.0)
        })
        .collect::<Result<_>>()?;
    let lm = mean(&loo);
    let ss = pairwise_sum(&loo.iter().map(|t| (t - lm).powi(2)).collect::<Vec<_>>());
    let jackknife_se = ((g - 1) as f64 / g as f64 * ss).sqrt();
    Ok(TauEstimate { tau, argmax_lambda, jackknife_se, truncated, n_samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub u: f64,
    pub exceedances: usize,
    pub empirical: f64,
    pub wilson: Interval,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailAuditReport {
    pub u_grid: Vec<f64>,
    pub tau: f64,
    pub points: Vec<TailPoint>,
    pub n_samples: usize,
    pub seed: u64,
    pub passed: bool,
}

/// Minimum expected exceedance count under the bound for a grid point to be auditable.
pub const MIN_RESOLVED_COUNT: f64 = 10.0;

/// Largest `u` with `2exp(−φ*(u)) ≥ min_count/n`.
pub fn max_resolvable_u(phi: &OrliczFunction, n_samples: usize, min_count: f64) -> Result<f64> {
    let target = (2.0 * n_samples as f64 / min_count).ln();
    if target <= 0.0 {
        return Ok(0.0);
    }
    let conj = phi.conjugate()?;
    match conj.inverse(target) {
        Ok(u) => Ok(u),
        Err(Error::OutOfRange { .. }) => conj.with_range(target).inverse(target),
        Err(e) => Err(e),
    }
}

/// Empirical `P(|ξ| ≥ uτ)` against `2exp(−φ*(u))`, judged on the Wilson upper bound.
pub fn increment_tail_audit(
    driver: &ProcessDriver,
    tau: f64,
    phi: &OrliczFunction,
    u_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<TailAuditReport> {
    let conj = phi.conjugate()?;
    tail_audit_with_exponent(driver, tau, &|u| conj.eval(u), u_grid, n_samples, seed)
}

/// As [`increment_tail_audit`] with the bound `2exp(−h(u))` for a given exponent `h`.
pub fn tail_audit_with_exponent(
    driver: &ProcessDriver,
    tau: f64,
    exponent: &dyn Fn(f64) -> f64,
    u_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<TailAuditReport> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParams(format!("τ must be positive, got {tau}")));
    }
    let resolution = MIN_RESOLVED_COUNT / n_samples as f64;
    let mut bounds = Vec::with_capacity(u_grid.len());
    for &u in u_grid {
        if u < 0.0 {
            return Err(Error::InvalidParams(format!("u must be nonnegative, got {u}")));
        }
        let bound = 2.0 * (-exponent(u)).exp();
        if bound < resolution {
            return Err(Error::ResolutionTooLow { u, bound, resolution });
        }
        bounds.push(bound);
    }
    let abs: Vec<f64> = driver.draws(n_samples, seed, streams::DRIVER).into_iter().map(f64::abs).collect();
    let points: Vec<TailPoint> = u_grid
        .iter()
        .zip(bounds)
        .map(|(&u, bound)| {
            let thr = u * tau;
            let exceedances = abs.par_iter().filter(|&&x| x >= thr).count();
            let wilson = wilson_interval(exceedances, n_samples, WILSON_Z);
            TailPoint {
                u,
                exceedances,
                empirical: exceedances as f64 / n_samples as f64,
                wilson,
                bound,
                passed: wilson.hi <= bound,
            }
        })
        .collect();
    let passed = points.iter().all(|p| p.passed);
    Ok(TailAuditReport { u_grid: u_grid.to_vec(), tau, points, n_samples, seed, passed })
}

/// `e·(c1·u + c2·√u + c3)`: the level beyond which the tail is at most `e^{-u}`.
pub fn moment_to_tail_threshold(c1: f64, c2: f64, c3: f64, u: f64) -> Result<f64> {
    if u < 1.0 || c1 < 0.0 || c2 < 0.0 || c3 < 0.0 {
        return Err(Error::Precondition(format!("need c_i ≥ 0 and u ≥ 1, got ({c1}, {c2}, {c3}, {u})")));
    }
    Ok(std::f64::consts::E * (c1 * u + c2 * u.sqrt() + c3))
}

/// `c̃_α = sup_{p≥1} (∫_0^∞ p u^{p-1} e^{-p u^α/4} du)^{1/p}`, attained at `p = 1`.
/// Fitted by quadrature; only `α ∈ {1, 2}` are tabulated.
pub fn tail_to_moment_constant(alpha: f64) -> Result<f64> {
    if alpha == 1.0 {
        Ok(4.0)
    } else if alpha == 2.0 {
        Ok(std::f64::consts::PI.sqrt())
    } else {
        Err(Error::AlphaUnsupported(alpha))
    }
}

/// `γ·(c̃_α·c + u*)`.
pub fn tail_to_moment_bound(gamma: f64, c: f64, u_star: f64, alpha: f64, p: f64) -> Result<f64> {
    let ct = tail_to_moment_constant(alpha)?;
    if gamma < 0.0 || c < 1.0 || u_star < 0.0 || p < 1.0 {
        return Err(Error::Precondition(format!("need γ ≥ 0, c ≥ 1, u* ≥ 0, p ≥ 1; got ({gamma}, {c}, {u_star}, {p})")));
    }
    Ok(gamma * (ct * c + u_star))
}

/// `√(e/(e−1))·α^{α/2}`, an upper bound for `E|g|^α`.
pub fn gaussian_moment_bound(alpha: f64) -> Result<f64> {
    if alpha < 1.0 {
        return Err(Error::Precondition(format!("α must be ≥ 1, got {alpha}")));
    }
    let e = std::f64::consts::E;
    Ok((e / (e - 1.0)).sqrt() * alpha.powf(alpha / 2.0))
}
