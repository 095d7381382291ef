//! Small-ball lower bound on `λ_min(Φ; C)` for `Φ` with i.i.d. rows `φ_i ~ φ₀`:
//! `λ_min ≥ ξ√m Q_{2ξ} − 2W_m − ξt` with probability `1 − e^{−t²/2}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apps::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::functionals::{estimate_gamma, ChainingContext, EstimateMode, FunctionalKind};
use crate::linalg::{dot, norm2};
use crate::metric::FiniteMetricSpace;
use crate::rng::{derive_seed, stream_rng, streams};
use crate::stats::{mean, std_dev, wilson_interval, Interval, WILSON_Z};
use crate::subgaussian::ProcessDriver;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallReport {
    pub m: usize,
    pub xi: f64,
    pub t: f64,
    pub n_dirs: usize,
    pub n_mc: usize,
    /// `min_u P(|⟨φ₀,u⟩| ≥ 2ξ)` over sampled directions.
    pub q: f64,
    /// Lower end is the smallest Wilson lower limit, upper end the smallest upper limit.
    pub q_ci: Interval,
    /// `min_u E|⟨φ₀,u⟩|` over sampled directions.
    pub alpha: f64,
    /// `E sup_{u ∈ C∩S} ⟨h,u⟩` with `h = m^{-1/2} Σ ε_i φ_i`, using `‖P_C h‖`.
    pub w: f64,
    pub w_ci: Interval,
    /// Same expectation with the sup restricted to the sampled directions.
    pub w_sampled: f64,
    pub bound: f64,
    /// Conservative: lower `Q`, upper `W`.
    pub bound_ci: Interval,
    pub seed: u64,
}

#[allow(clippy::too_many_arguments)]
pub fn small_ball_lower_bound(
    driver: &ProcessDriver,
    cone: &ConeSpec,
    m: usize,
    xi: f64,
    t: f64,
    n_mc: usize,
    n_dirs: usize,
    seed: u64,
) -> Result<SmallBallReport> {
    cone.validate()?;
    if !(xi > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidParams(format!("ξ and t must be positive, got ξ={xi}, t={t}")));
    }
    if m == 0 || n_mc < 2 || n_dirs == 0 {
        return Err(Error::InvalidParams("need m ≥ 1, n_mc ≥ 2 and n_dirs ≥ 1".into()));
    }
    let dim = cone.dim();
    let dirs = (0..n_dirs as u64)
        .map(|k| cone.sample_unit(&mut stream_rng(seed, streams::CONE, k)))
        .collect::<Result<Vec<_>>>()?;

    let draws: Vec<Vec<f64>> = (0..n_mc as u64)
        .into_par_iter()
        .map(|i| driver.sample_vector(&mut stream_rng(seed, streams::SMALL_BALL, i), dim))
        .collect();
    let mut q = f64::INFINITY;
    let mut q_ci = Interval { lo: f64::INFINITY, hi: f64::INFINITY };
    let mut alpha = f64::INFINITY;
    for u in &dirs {
        let proj: Vec<f64> = draws.iter().map(|x| dot(x, u).abs()).collect();
        let hits = proj.iter().filter(|&&v| v >= 2.0 * xi).count();
        let ci = wilson_interval(hits, n_mc, WILSON_Z);
        q = q.min(hits as f64 / n_mc as f64);
        q_ci = Interval { lo: q_ci.lo.min(ci.lo), hi: q_ci.hi.min(ci.hi) };
        alpha = alpha.min(mean(&proj));
    }

    let scale = 1.0 / (m as f64).sqrt();
    let sups: Vec<(f64, f64)> = (0..n_mc as u64)
        .into_par_iter()
        .map(|k| {
            let rep = derive_seed(seed, k + 1);
            let mut signs = stream_rng(rep, streams::RADEMACHER, 0);
            let mut h = vec![0.0; dim];
            for i in 0..m as u64 {
                let row = driver.sample_vector(&mut stream_rng(rep, streams::SMALL_BALL, i), dim);
                let eps = if rand::Rng::random::<bool>(&mut signs) { scale } else { -scale };
                h.iter_mut().zip(&row).for_each(|(a, b)| *a += eps * b);
            }
            let sampled = dirs.iter().map(|u| dot(&h, u)).fold(f64::NEG_INFINITY, f64::max);
            (norm2(&cone.project(&h)), sampled)
        })
        .collect();
    let exact: Vec<f64> = sups.iter().map(|s| s.0).collect();
    let w = mean(&exact);
    let half = WILSON_Z * std_dev(&exact) / (n_mc as f64).sqrt();
    let w_ci = Interval { lo: w - half, hi: w + half };
    let w_sampled = mean(&sups.iter().map(|s| s.1).collect::<Vec<_>>());

    let root_m = (m as f64).sqrt();
    let bound = xi * root_m * q - 2.0 * w - xi * t;
    let bound_ci = Interval {
        lo: xi * root_m * q_ci.lo - 2.0 * w_ci.hi - xi * t,
        hi: xi * root_m * q_ci.hi - 2.0 * w_ci.lo - xi * t,
    };
    Ok(SmallBallReport { m, xi, t, n_dirs, n_mc, q, q_ci, alpha, w, w_ci, w_sampled, bound, bound_ci, seed })
}

/// Constants of the asymptotic form; none are universal values, so callers supply them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinSingleConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// `c1 √m α μ^{-2} − c2 γ + c3 Δ − αt/3` with `μ = Δ/α`.
pub fn minsingle_lower_bound(k: &MinSingleConstants, m: usize, alpha: f64, gamma: f64, delta: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidParams(format!("α and Δ must be positive, got α={alpha}, Δ={delta}")));
    }
    let mu = delta / alpha;
    Ok(k.c1 * (m as f64).sqrt() * alpha / (mu * mu) - k.c2 * gamma + k.c3 * delta - alpha * t / 3.0)
}

/// `T = {1..m}` with `d(i,j) = Δ` for `i ≠ j`, the index metric of i.i.d. rows.
pub fn index_space(m: usize, delta: f64) -> Result<FiniteMetricSpace> {
    FiniteMetricSpace::from_matrix((0..m).map(|i| (0..m).map(|j| if i == j { 0.0 } else { delta }).collect()).collect())
}

/// Heuristic `γ_{φ,p}` of the index metric.
pub fn index_gamma(m: usize, delta: f64, ctx: &ChainingContext, p: f64) -> Result<f64> {
    let mode = if m <= crate::functionals::EXACT_GAMMA_CAP { EstimateMode::Exact } else { EstimateMode::Heuristic };
    Ok(estimate_gamma(&index_space(m, delta)?, ctx, p, FunctionalKind::Gamma, mode)?.value)
}
