//! Random projections `P = A/√m` with i.i.d. driver rows.
//!
//! Row `i` of trial `k` comes from `(seed_k, PROJECTION, i)`, so the first
//! `m` rows of a run with `m' > m` coincide with the run at `m`: pass
//! fractions at different `m` are paired.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist2, dot, norm2};
use crate::orlicz::{half_square, OrliczFunction};
use crate::rng::{derive_seed, stream_rng, streams};
use crate::stats::{mean, pairwise_sum, std_dev};
use crate::subgaussian::{
    increment_tail_audit, symmetric_log_grid, tail_audit_with_exponent, tau_phi_estimate, DriverKind, ProcessDriver,
    TailAuditReport,
};

#[derive(Debug, Clone)]
pub struct JlExperiment {
    pub points: Vec<Vec<f64>>,
    pub m: usize,
    pub driver: ProcessDriver,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistortion {
    pub i: usize,
    pub j: usize,
    /// `‖P(x_i − x_j)‖ / ‖x_i − x_j‖`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JlTrial {
    pub max_deviation: f64,
    pub pass_fraction: f64,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JlReport {
    pub n_points: usize,
    pub dim: usize,
    pub m: usize,
    pub eps: f64,
    pub n_pairs: usize,
    pub trials: Vec<JlTrial>,
    pub max_deviation: f64,
    pub mean_pass_fraction: f64,
    /// Fraction of trials in which every pair is within `1 ± ε`.
    pub all_pairs_pass_rate: f64,
    /// Ratios of the first trial, one row per unordered pair.
    pub histogram: Vec<PairDistortion>,
    pub seed: u64,
}

/// Projected coordinates `P x` for every point.
fn project(points: &[Vec<f64>], driver: &ProcessDriver, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let scale = 1.0 / (m as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..m as u64)
        .map(|i| driver.sample_vector(&mut stream_rng(seed, streams::PROJECTION, i), dim))
        .collect();
    points.iter().map(|x| rows.iter().map(|r| scale * dot(r, x)).collect()).collect()
}

fn trial_ratios(points: &[Vec<f64>], pairs: &[(usize, usize, f64)], driver: &ProcessDriver, m: usize, seed: u64) -> Vec<PairDistortion> {
    let px = project(points, driver, m, seed);
    pairs.iter().map(|&(i, j, d)| PairDistortion { i, j, ratio: dist2(&px[i], &px[j]) / d }).collect()
}

pub fn jl_project_and_audit(exp: &JlExperiment) -> Result<JlReport> {
    let n = exp.points.len();
    if n < 2 || exp.m == 0 || exp.trials == 0 {
        return Err(Error::Precondition("need N ≥ 2, m ≥ 1 and at least one trial".into()));
    }
    let dim = exp.points[0].len();
    if dim == 0 || exp.points.iter().any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidParams("points must be finite and share a nonzero dimension".into()));
    }
    if !(exp.eps > 0.0) {
        return Err(Error::InvalidParams(format!("ε must be positive, got {}", exp.eps)));
    }
    let pairs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, dist2(&exp.points[i], &exp.points[j])))
        .filter(|p| p.2 > 0.0)
        .collect();
    if pairs.is_empty() {
        return Err(Error::Precondition("all points coincide".into()));
    }
    let runs: Vec<Vec<PairDistortion>> = (0..exp.trials as u64)
        .into_par_iter()
        .map(|k| trial_ratios(&exp.points, &pairs, &exp.driver, exp.m, derive_seed(exp.seed, k)))
        .collect();
    let trials: Vec<JlTrial> = runs
        .iter()
        .map(|r| {
            let dev = r.iter().map(|p| (p.ratio - 1.0).abs()).fold(0.0, f64::max);
            let passed = r.iter().filter(|p| (p.ratio - 1.0).abs() <= exp.eps).count();
            JlTrial { max_deviation: dev, pass_fraction: passed as f64 / r.len() as f64, all_pass: passed == r.len() }
        })
        .collect();
    let max_deviation = trials.iter().map(|t| t.max_deviation).fold(0.0, f64::max);
    let mean_pass_fraction = mean(&trials.iter().map(|t| t.pass_fraction).collect::<Vec<_>>());
    let all_pairs_pass_rate = trials.iter().filter(|t| t.all_pass).count() as f64 / trials.len() as f64;
    Ok(JlReport {
        n_points: n,
        dim,
        m: exp.m,
        eps: exp.eps,
        n_pairs: pairs.len(),
        trials,
        max_deviation,
        mean_pass_fraction,
        all_pairs_pass_rate,
        histogram: runs.into_iter().next().expect("trials > 0"),
        seed: exp.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyAudit {
    /// `E⟨row, u⟩²` per direction.
    pub second_moments: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub passed: bool,
}

/// `E⟨row, u⟩² = 1` within 3 standard errors for random unit `u`.
pub fn isotropy_audit(driver: &ProcessDriver, dim: usize, n_draws: usize, n_dirs: usize, seed: u64) -> Result<IsotropyAudit> {
    if dim == 0 || n_draws < 2 || n_dirs == 0 {
        return Err(Error::Precondition("need dim ≥ 1, n_draws ≥ 2, n_dirs ≥ 1".into()));
    }
    let dirs: Vec<Vec<f64>> = (0..n_dirs as u64)
        .map(|k| {
            let mut rng = stream_rng(seed, streams::ISOTROPY, k);
            let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = norm2(&g);
            g.into_iter().map(|x| x / n).collect()
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n_draws as u64)
        .into_par_iter()
        .map(|i| driver.sample_vector(&mut stream_rng(derive_seed(seed, 1), streams::ISOTROPY, i), dim))
        .collect();
    let mut second_moments = Vec::new();
    let mut standard_errors = Vec::new();
    for u in &dirs {
        let sq: Vec<f64> = rows.iter().map(|r| dot(r, u).powi(2)).collect();
        second_moments.push(pairwise_sum(&sq) / sq.len() as f64);
        standard_errors.push(std_dev(&sq) / (sq.len() as f64).sqrt());
    }
    let passed = second_moments.iter().zip(&standard_errors).all(|(m, se)| (m - 1.0).abs() <= 3.0 * se);
    Ok(IsotropyAudit { second_moments, standard_errors, passed })
}

/// `E ξ²` for catalog drivers.
pub fn driver_second_moment(driver: &ProcessDriver) -> Option<f64> {
    match driver.kind() {
        DriverKind::Gaussian { sigma } => Some(sigma * sigma),
        DriverKind::Rademacher => Some(1.0),
        DriverKind::UniformBounded { b } => Some(b * b / 3.0),
        DriverKind::WeibullCentered { q, kappa } => {
            let m1 = kappa * libm::tgamma(1.0 + 1.0 / q);
            Some(kappa * kappa * libm::tgamma(1.0 + 2.0 / q) - m1 * m1)
        }
        DriverKind::Custom { .. } => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareTailReport {
    pub tau: f64,
    pub base: TailAuditReport,
    pub tau_square: f64,
    pub square: TailAuditReport,
}

/// If `ξ` passes its tail audit with `τ = τ_φ(ξ)`, check that `ξ² − Eξ²`
/// satisfies `P(|η| ≥ uτ') ≤ 2exp(−φ(√u))` with `τ'` fitted on an independent
/// seed as `max_u q_{1−e^{-φ(√u)}}(|η|)/u`.
pub fn square_tail_audit(
    driver: &ProcessDriver,
    phi: &OrliczFunction,
    u_grid: &[f64],
    u_grid_square: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<SquareTailReport> {
    let second = driver_second_moment(driver)
        .ok_or_else(|| Error::InvalidParams("square audit needs a catalog driver".into()))?;
    let grid = symmetric_log_grid(0.02, 2.0, 25);
    let tau = tau_phi_estimate(driver, phi, &grid, n_samples, derive_seed(seed, 1))?.tau;
    let base = increment_tail_audit(driver, tau, phi, u_grid, n_samples, derive_seed(seed, 2))?;
    let d = driver.clone();
    let sq = ProcessDriver::custom("square", move |rng| d.sample(rng).powi(2) - second, None);
    let exponent = |u: f64| phi.eval(u.abs().sqrt());
    let mut fit = sq.draws(n_samples, derive_seed(seed, 3), streams::DRIVER);
    fit.iter_mut().for_each(|x| *x = x.abs());
    fit.sort_by(f64::total_cmp);
    let tau_square = u_grid_square
        .iter()
        .filter(|&&u| u > 0.0)
        .map(|&u| {
            let level = 1.0 - (-exponent(u)).exp();
            let k = ((level * n_samples as f64).ceil() as usize).min(n_samples - 1);
            fit[k] / u
        })
        .fold(f64::MIN_POSITIVE, f64::max);
    let square = tail_audit_with_exponent(&sq, tau_square, &exponent, u_grid_square, n_samples, derive_seed(seed, 4))?;
    Ok(SquareTailReport { tau, base, tau_square, square })
}

/// Gaussian-row demo: two points along one direction.
pub fn demo_points() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![3.0, 0.0]]
}

/// φ used for the base audit when none is configured.
pub fn default_phi() -> OrliczFunction {
    half_square()
}
