//! Monte Carlo audits of sup-process moment and tail bounds and of order-2
//! Gaussian chaos.
//!
//! Trial `k` draws its randomness from `(seed, PROCESS, k)` (and
//! `(seed, PROCESS_PRIME, k)` for the independent copy `g'`), so paired
//! comparisons on the same seed share draws exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{estimate_gamma, ChainingContext, EstimateMode, Exactness, FunctionalKind, EXACT_GAMMA_CAP};
use crate::linalg::{dist2, from_rows, operator_norm, to_rows};
use crate::metric::{diameter, FiniteMetricSpace};
use crate::orlicz::{half_square, OrliczFunction, OrliczKind};
use crate::rng::{derive_seed, stream_rng, streams};
use crate::stats::{bootstrap_moment_ci, mean, moment_root, wilson_interval, Interval, BOOTSTRAP_RESAMPLES, WILSON_Z};
use crate::subgaussian::{default_lambda_grid, tau_phi_estimate, DriverKind, ProcessDriver};

/// Serializable model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Canonical { index: Vec<Vec<f64>>, driver: DriverKind },
    ChaosY { matrices: Vec<Vec<Vec<f64>>> },
    ChaosZ { matrices: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone)]
pub enum ProcessModel {
    /// `X_t = Σ t_i ξ_i` with i.i.d. `ξ_i` from the driver.
    Canonical { index: Vec<Vec<f64>>, driver: ProcessDriver },
    /// `Y_t = ‖tg‖² − ‖t‖²_HS`.
    ChaosY { matrices: Vec<DMatrix<f64>> },
    /// `Z_t = ⟨tg, tg'⟩`.
    ChaosZ { matrices: Vec<DMatrix<f64>> },
}

fn check_matrices(ms: &[DMatrix<f64>]) -> Result<()> {
    let first = ms.first().ok_or(Error::EmptySubset)?;
    if ms.iter().any(|m| m.shape() != first.shape()) {
        return Err(Error::InvalidParams("matrices must share a shape".into()));
    }
    if ms.iter().any(|m| m.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidParams("matrix entries must be finite".into()));
    }
    Ok(())
}

impl ProcessModel {
    pub fn canonical(index: Vec<Vec<f64>>, driver: ProcessDriver) -> Result<ProcessModel> {
        let dim = index.first().ok_or(Error::EmptySubset)?.len();
        if dim == 0 || index.iter().any(|t| t.len() != dim || t.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidParams("index vectors must be finite and share a nonzero dimension".into()));
        }
        Ok(ProcessModel::Canonical { index, driver })
    }

    pub fn chaos_y(matrices: Vec<DMatrix<f64>>) -> Result<ProcessModel> {
        check_matrices(&matrices)?;
        Ok(ProcessModel::ChaosY { matrices })
    }

    pub fn chaos_z(matrices: Vec<DMatrix<f64>>) -> Result<ProcessModel> {
        check_matrices(&matrices)?;
        Ok(ProcessModel::ChaosZ { matrices })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<ProcessModel> {
        match spec {
            ModelSpec::Canonical { index, driver } => {
                ProcessModel::canonical(index.clone(), ProcessDriver::new(driver.clone())?)
            }
            ModelSpec::ChaosY { matrices } => ProcessModel::chaos_y(matrices.iter().map(|m| from_rows(m)).collect()),
            ModelSpec::ChaosZ { matrices } => ProcessModel::chaos_z(matrices.iter().map(|m| from_rows(m)).collect()),
        }
    }

    pub fn to_spec(&self) -> Option<ModelSpec> {
        match self {
            ProcessModel::Canonical { index, driver } => match driver.kind() {
                DriverKind::Custom { .. } => None,
                k => Some(ModelSpec::Canonical { index: index.clone(), driver: k.clone() }),
            },
            ProcessModel::ChaosY { matrices } => Some(ModelSpec::ChaosY { matrices: matrices.iter().map(to_rows).collect() }),
            ProcessModel::ChaosZ { matrices } => Some(ModelSpec::ChaosZ { matrices: matrices.iter().map(to_rows).collect() }),
        }
    }

    pub fn n_index(&self) -> usize {
        match self {
            ProcessModel::Canonical { index, .. } => index.len(),
            ProcessModel::ChaosY { matrices } | ProcessModel::ChaosZ { matrices } => matrices.len(),
        }
    }

    pub fn is_chaos(&self) -> bool {
        !matches!(self, ProcessModel::Canonical { .. })
    }

    /// Every index vector or matrix multiplied by `s`.
    pub fn scaled(&self, s: f64) -> ProcessModel {
        match self {
            ProcessModel::Canonical { index, driver } => ProcessModel::Canonical {
                index: index.iter().map(|t| t.iter().map(|x| s * x).collect()).collect(),
                driver: driver.clone(),
            },
            ProcessModel::ChaosY { matrices } => ProcessModel::ChaosY { matrices: matrices.iter().map(|m| m * s).collect() },
            ProcessModel::ChaosZ { matrices } => ProcessModel::ChaosZ { matrices: matrices.iter().map(|m| m * s).collect() },
        }
    }

    /// Canonical: `τ·‖s − t‖₂` with `τ = τ_φ` of one coordinate. Chaos: `d_∞(s, t) = ‖s − t‖` (`tau` ignored).
    pub fn induced_metric(&self, tau: f64) -> Result<FiniteMetricSpace> {
        match self {
            ProcessModel::Canonical { index, .. } => {
                let n = index.len();
                let d = (0..n).map(|i| (0..n).map(|j| tau * dist2(&index[i], &index[j])).collect()).collect();
                FiniteMetricSpace::from_matrix(d)
            }
            ProcessModel::ChaosY { matrices } | ProcessModel::ChaosZ { matrices } => {
                let n = matrices.len();
                let mut d = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in i + 1..n {
                        let v = operator_norm(&(&matrices[i] - &matrices[j]));
                        d[i][j] = v;
                        d[j][i] = v;
                    }
                }
                FiniteMetricSpace::from_matrix(d)
            }
        }
    }

    /// `X_t` for every index under trial `trial`.
    pub fn realize(&self, seed: u64, trial: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, streams::PROCESS, trial);
        match self {
            ProcessModel::Canonical { index, driver } => {
                let xi = driver.sample_vector(&mut rng, index[0].len());
                index.iter().map(|t| t.iter().zip(&xi).map(|(a, b)| a * b).sum()).collect()
            }
            ProcessModel::ChaosY { matrices } => {
                let g = gaussian_vector(&mut rng, matrices[0].ncols());
                matrices.iter().map(|t| (t * &g).norm_squared() - t.norm_squared()).collect()
            }
            ProcessModel::ChaosZ { matrices } => {
                let g = gaussian_vector(&mut rng, matrices[0].ncols());
                let mut rng2 = stream_rng(seed, streams::PROCESS_PRIME, trial);
                let g2 = gaussian_vector(&mut rng2, matrices[0].ncols());
                matrices.iter().map(|t| (t * &g).dot(&(t * &g2))).collect()
            }
        }
    }
}

fn gaussian_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `sup_t |X_t|` per trial.
pub fn sup_samples(model: &ProcessModel, n_trials: usize, seed: u64) -> Vec<f64> {
    (0..n_trials as u64)
        .into_par_iter()
        .map(|k| model.realize(seed, k).into_iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect()
}

/// `sup_t |X_t − X_{t0}|` per trial.
pub fn centered_sup_samples(model: &ProcessModel, t0: usize, n_trials: usize, seed: u64) -> Vec<f64> {
    (0..n_trials as u64)
        .into_par_iter()
        .map(|k| {
            let x = model.realize(seed, k);
            x.iter().fold(0.0f64, |m, v| m.max((v - x[t0]).abs()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    pub n_trials: usize,
    pub value: f64,
    pub ci: Interval,
    pub seed: u64,
}

fn check_trials(p: f64, n_trials: usize) -> Result<()> {
    if !(p >= 1.0) {
        return Err(Error::InvalidP(p));
    }
    if n_trials == 0 {
        return Err(Error::Precondition("n_trials must be positive".into()));
    }
    Ok(())
}

/// Moment root and bootstrap interval of already drawn samples.
pub fn moment_estimate(samples: &[f64], p: f64, seed: u64) -> MomentEstimate {
    MomentEstimate {
        p,
        n_trials: samples.len(),
        value: moment_root(samples, p),
        ci: bootstrap_moment_ci(samples, p, derive_seed(seed, streams::BOOTSTRAP), BOOTSTRAP_RESAMPLES),
        seed,
    }
}

/// `(E sup_t |X_t|^p)^{1/p}` with a percentile bootstrap interval.
pub fn simulate_sup_moment(model: &ProcessModel, p: f64, n_trials: usize, seed: u64) -> Result<MomentEstimate> {
    check_trials(p, n_trials)?;
    Ok(moment_estimate(&sup_samples(model, n_trials, seed), p, seed))
}

/// [`simulate_sup_moment`] restricted to chaos models.
pub fn chaos_moment(model: &ProcessModel, p: f64, n_trials: usize, seed: u64) -> Result<MomentEstimate> {
    if !model.is_chaos() {
        return Err(Error::InvalidParams("chaos_moment needs a chaos model".into()));
    }
    simulate_sup_moment(model, p, n_trials, seed)
}

/// `τ_φ` of one coordinate: the claimed value under `x²/2`, otherwise estimated.
pub fn coordinate_tau(driver: &ProcessDriver, phi: &OrliczFunction, seed: u64) -> Result<f64> {
    if let (OrliczKind::HalfSquare, Some(t)) = (phi.kind(), driver.claimed_tau()) {
        return Ok(t);
    }
    let grid = default_lambda_grid();
    Ok(tau_phi_estimate(driver, phi, &grid, 100_000, derive_seed(seed, streams::DRIVER))?.tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCell {
    pub model: usize,
    pub p: f64,
    pub empirical: MomentEstimate,
    /// `γ̃ + √p·Δ + p·Δ`.
    pub bound_term: f64,
    /// `min_{t0} (E|X_{t0}|^p)^{1/p}`; zero whenever the index set contains the origin.
    pub anchor_term: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentModelSummary {
    pub n_index: usize,
    pub gamma_tilde: f64,
    pub gamma_exactness: Exactness,
    pub diameter: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAuditReport {
    pub models: Vec<MomentModelSummary>,
    pub cells: Vec<MomentCell>,
    pub fitted_constant: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub passed: bool,
}

/// `γ̃ + √pΔ + pΔ`.
pub fn moment_bound_term(gamma_tilde: f64, diameter: f64, p: f64) -> f64 {
    gamma_tilde + p.sqrt() * diameter + p * diameter
}

fn gamma_of(space: &FiniteMetricSpace, ctx: &ChainingContext, p: f64, kind: FunctionalKind) -> Result<(f64, Exactness)> {
    let mode = if space.n_points() <= EXACT_GAMMA_CAP { EstimateMode::Exact } else { EstimateMode::Heuristic };
    let v = estimate_gamma(space, ctx, p, kind, mode)?;
    Ok((v.value, v.exactness))
}

/// Fits one constant `C` with `(E sup|X_t|^p)^{1/p} ≤ C·(γ̃ + √pΔ + pΔ + anchor)`
/// over every model and `p`. The anchor `min_{t0}(E|X_{t0}|^p)^{1/p}` keeps
/// index sets without the origin (singletons in particular) honest.
pub fn audit_moment_bound(
    models: &[ProcessModel],
    phi: &OrliczFunction,
    p_grid: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<MomentAuditReport> {
    if models.is_empty() || p_grid.is_empty() {
        return Err(Error::Precondition("need at least one model and one p".into()));
    }
    for &p in p_grid {
        check_trials(p, n_trials)?;
    }
    let ctx = ChainingContext::new(phi)?;
    let mut summaries = Vec::new();
    let mut cells = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        let ProcessModel::Canonical { driver, .. } = model else {
            return Err(Error::InvalidParams("moment audit runs on canonical models".into()));
        };
        let tau = coordinate_tau(driver, phi, seed)?;
        let space = model.induced_metric(tau)?;
        let diam = diameter(&space, None)?;
        let model_seed = derive_seed(seed, mi as u64);
        let realizations: Vec<Vec<f64>> =
            (0..n_trials as u64).into_par_iter().map(|k| model.realize(model_seed, k)).collect();
        let sups: Vec<f64> =
            realizations.iter().map(|x| x.iter().fold(0.0, |m: f64, v| m.max(v.abs()))).collect();
        let mut gamma = None;
        for &p in p_grid {
            let (g, exactness) = gamma_of(&space, &ctx, p, FunctionalKind::GammaTilde)?;
            gamma.get_or_insert((g, exactness));
            let anchor = (0..model.n_index())
                .map(|t| moment_root(&realizations.iter().map(|x| x[t]).collect::<Vec<_>>(), p))
                .fold(f64::INFINITY, f64::min);
            let empirical = moment_estimate(&sups, p, model_seed);
            let bound_term = moment_bound_term(g, diam, p);
            let denom = bound_term + anchor;
            let ratio = (denom > 0.0).then(|| empirical.value / denom);
            cells.push(MomentCell { model: mi, p, empirical, bound_term, anchor_term: anchor, ratio });
        }
        let (g, e) = gamma.expect("nonempty p grid");
        summaries.push(MomentModelSummary { n_index: model.n_index(), gamma_tilde: g, gamma_exactness: e, diameter: diam, tau });
    }
    let fitted = cells.iter().filter_map(|c| c.ratio).fold(0.0, f64::max);
    Ok(MomentAuditReport { models: summaries, cells, fitted_constant: fitted, n_trials, seed, passed: fitted.is_finite() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConstants {
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

impl TailConstants {
    /// `C4 = C5 = C6 = e·C_fit`, following the Markov step from a moment bound.
    pub fn from_moment_fit(c_fit: f64) -> TailConstants {
        let c = std::f64::consts::E * c_fit;
        TailConstants { c4: c, c5: c, c6: c }
    }

    pub fn scaled(&self, s: f64) -> TailConstants {
        TailConstants { c4: self.c4 * s, c5: self.c5 * s, c6: self.c6 * s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupTailPoint {
    pub u: f64,
    pub threshold: f64,
    pub exceedances: usize,
    pub empirical: f64,
    pub wilson: Interval,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupTailReport {
    pub constants: TailConstants,
    pub gamma_tilde: f64,
    pub diameter: f64,
    pub t0: usize,
    pub points: Vec<SupTailPoint>,
    pub n_trials: usize,
    pub seed: u64,
    pub passed: bool,
}

/// `P(sup_t |X_t − X_{t0}| ≥ C4Δφ*(u) + C5Δ√φ*(u) + C6γ̃)` against `exp(−φ*(u))`,
/// with `t0` the first index and `γ̃` taken at `p`.
#[allow(clippy::too_many_arguments)]
pub fn audit_tail_bound(
    model: &ProcessModel,
    phi: &OrliczFunction,
    p: f64,
    u_grid: &[f64],
    constants: TailConstants,
    n_trials: usize,
    seed: u64,
) -> Result<SupTailReport> {
    check_trials(p, n_trials)?;
    let ProcessModel::Canonical { driver, .. } = model else {
        return Err(Error::InvalidParams("tail audit runs on canonical models".into()));
    };
    let conj = phi.conjugate()?;
    let resolution = 10.0 / n_trials as f64;
    let mut phis = Vec::new();
    for &u in u_grid {
        if u < std::f64::consts::SQRT_2 * (1.0 - 1e-12) {
            return Err(Error::Precondition(format!("u must be ≥ √2, got {u}")));
        }
        let f = conj.eval(u);
        let bound = (-f).exp();
        if bound < resolution {
            return Err(Error::ResolutionTooLow { u, bound, resolution });
        }
        phis.push(f);
    }
    let ctx = ChainingContext::new(phi)?;
    let tau = coordinate_tau(driver, phi, seed)?;
    let space = model.induced_metric(tau)?;
    let diam = diameter(&space, None)?;
    let (g, _) = gamma_of(&space, &ctx, p, FunctionalKind::GammaTilde)?;
    let sups = centered_sup_samples(model, 0, n_trials, seed);
    let points: Vec<SupTailPoint> = u_grid
        .iter()
        .zip(phis)
        .map(|(&u, f)| {
            let threshold = constants.c4 * diam * f + constants.c5 * diam * f.sqrt() + constants.c6 * g;
            // a zero threshold only arises for a constant process; sup ≡ 0 then counts as no exceedance
            let exceedances = sups.iter().filter(|&&s| s >= threshold && s > 0.0).count();
            let wilson = wilson_interval(exceedances, n_trials, WILSON_Z);
            let bound = (-f).exp();
            SupTailPoint {
                u,
                threshold,
                exceedances,
                empirical: exceedances as f64 / n_trials as f64,
                wilson,
                bound,
                passed: wilson.hi <= bound,
            }
        })
        .collect();
    let passed = points.iter().all(|p| p.passed);
    Ok(SupTailReport { constants, gamma_tilde: g, diameter: diam, t0: 0, points, n_trials, seed, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleIncrementReport {
    pub p_grid: Vec<f64>,
    pub moments: Vec<f64>,
    pub ratios: Vec<f64>,
    pub fitted_constant: f64,
}

/// `(E|X_t − X_s|^p)^{1/p} / (Δp + Δ√p)` across `p` for a two-point canonical
/// model at unit induced distance.
pub fn single_increment_audit(driver: &ProcessDriver, tau: f64, p_grid: &[f64], n_trials: usize, seed: u64) -> Result<SingleIncrementReport> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParams(format!("τ must be positive, got {tau}")));
    }
    let model = ProcessModel::canonical(vec![vec![0.0], vec![1.0 / tau]], driver.clone())?;
    let incs = centered_sup_samples(&model, 0, n_trials, seed);
    let mut moments = Vec::new();
    let mut ratios = Vec::new();
    for &p in p_grid {
        check_trials(p, n_trials)?;
        let m = moment_root(&incs, p);
        moments.push(m);
        ratios.push(m / (p + p.sqrt()));
    }
    let fitted = ratios.iter().copied().fold(0.0, f64::max);
    Ok(SingleIncrementReport { p_grid: p_grid.to_vec(), moments, ratios, fitted_constant: fitted })
}

/// `b ↦ gᵀbg − tr b`.
fn decoupled_lhs(b: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
    g.dot(&(b * g)) - b.trace()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub p: f64,
    /// `E sup_b |Σ_{i≠j} b_ij g_i g_j + Σ b_ii(g_i² − 1)|^p`.
    pub lhs: f64,
    pub lhs_ci: Interval,
    /// `E sup_b |Σ b_ij g_i g'_j|^p`.
    pub rhs: f64,
    pub rhs_ci: Interval,
    pub scaled_rhs_upper: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub passed: bool,
}

/// Paired draws: both sides use the same `g` in every trial.
pub fn decoupling_audit(collection: &[DMatrix<f64>], p: f64, n_trials: usize, seed: u64) -> Result<DecouplingReport> {
    check_trials(p, n_trials)?;
    check_matrices(collection)?;
    if collection.iter().any(|b| !b.is_square()) {
        return Err(Error::InvalidParams("decoupling needs square matrices".into()));
    }
    let n = collection[0].nrows();
    let pairs: Vec<(f64, f64)> = (0..n_trials as u64)
        .into_par_iter()
        .map(|k| {
            let g = gaussian_vector(&mut stream_rng(seed, streams::PROCESS, k), n);
            let g2 = gaussian_vector(&mut stream_rng(seed, streams::PROCESS_PRIME, k), n);
            let l = collection.iter().fold(0.0, |m: f64, b| m.max(decoupled_lhs(b, &g).abs()));
            let r = collection.iter().fold(0.0, |m: f64, b| m.max(g.dot(&(b * &g2)).abs()));
            (l, r)
        })
        .collect();
    let (ls, rs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let boot = derive_seed(seed, streams::BOOTSTRAP);
    let pow = |i: Interval| Interval { lo: i.lo.powf(p), hi: i.hi.powf(p) };
    let lhs_ci = pow(bootstrap_moment_ci(&ls, p, boot, BOOTSTRAP_RESAMPLES));
    let rhs_ci = pow(bootstrap_moment_ci(&rs, p, boot, BOOTSTRAP_RESAMPLES));
    let lhs = moment_root(&ls, p).powf(p);
    let rhs = moment_root(&rs, p).powf(p);
    let scaled_rhs_upper = 2f64.powf(p) * rhs_ci.hi;
    Ok(DecouplingReport { p, lhs, lhs_ci, rhs, rhs_ci, scaled_rhs_upper, n_trials, seed, passed: lhs <= scaled_rhs_upper })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosBoundReport {
    pub p: f64,
    pub skipped: Option<String>,
    pub gamma: f64,
    pub gamma_exactness: Option<Exactness>,
    /// `sup_t ‖t‖_HS`.
    pub v: f64,
    pub moment: Option<MomentEstimate>,
    /// `(E sup|Y_t|^p)^{1/p} / (γ(γ + V))`.
    pub ratio: Option<f64>,
    pub ratio_ci: Option<Interval>,
    /// `U_{2p}^{1/2p}` with `U_r = E sup_t ‖tg‖₂^r`.
    pub u_root: f64,
    /// `U_{2p}^{1/2p} / (γ + V)`.
    pub u_ratio: Option<f64>,
    /// `γ_{2,p} = 0` (at most `2^{2^{k_p}}` matrices) while the moment is positive.
    pub degenerate: bool,
    pub n_trials: usize,
    pub seed: u64,
}

pub fn hilbert_schmidt(t: &DMatrix<f64>) -> f64 {
    t.norm()
}

/// Fits `L` for `(E sup|Y_t|^p)^{1/p} ≤ L·γ_{2,p}(T, d_∞)(γ_{2,p}(T, d_∞) + V)`
/// and the companion `U_{2p}^{1/2p} ≤ L(γ_{2,p} + V)`. `T` must contain 0.
pub fn chaos_bound_audit(collection: &[DMatrix<f64>], p: f64, n_trials: usize, seed: u64) -> Result<ChaosBoundReport> {
    check_trials(p, n_trials)?;
    check_matrices(collection)?;
    if !collection.iter().any(|t| t.iter().all(|&x| x == 0.0)) {
        return Err(Error::Precondition("the collection must contain the zero matrix".into()));
    }
    let v = collection.iter().map(hilbert_schmidt).fold(0.0, f64::max);
    let mut report = ChaosBoundReport {
        p,
        skipped: None,
        gamma: 0.0,
        gamma_exactness: None,
        v,
        moment: None,
        ratio: None,
        ratio_ci: None,
        u_root: 0.0,
        u_ratio: None,
        degenerate: false,
        n_trials,
        seed,
    };
    if v == 0.0 {
        report.skipped = Some("all matrices are zero; every quantity vanishes".into());
        return Ok(report);
    }
    let model = ProcessModel::chaos_y(collection.to_vec())?;
    let space = model.induced_metric(1.0)?;
    let ctx = ChainingContext::new(&half_square())?;
    let (gamma, exactness) = gamma_of(&space, &ctx, p, FunctionalKind::Gamma)?;
    report.gamma = gamma;
    report.gamma_exactness = Some(exactness);
    let cols = collection[0].ncols();
    let pairs: Vec<(f64, f64)> = (0..n_trials as u64)
        .into_par_iter()
        .map(|k| {
            let g = gaussian_vector(&mut stream_rng(seed, streams::PROCESS, k), cols);
            collection.iter().fold((0.0, 0.0), |(ys, us): (f64, f64), t| {
                let tg = (t * &g).norm_squared();
                (ys.max((tg - t.norm_squared()).abs()), us.max(tg))
            })
        })
        .collect();
    let ys: Vec<f64> = pairs.iter().map(|x| x.0).collect();
    // U_{2p}^{1/2p} = (E sup ‖tg‖^{2p})^{1/2p} = (E (sup ‖tg‖²)^p)^{1/2p}
    let u_root = moment_root(&pairs.iter().map(|x| x.1).collect::<Vec<_>>(), p).sqrt();
    let m = moment_estimate(&ys, p, seed);
    let denom = gamma * (gamma + v);
    if denom > 0.0 {
        report.ratio = Some(m.value / denom);
        report.ratio_ci = Some(m.ci.scale(1.0 / denom));
    } else {
        report.degenerate = m.value > 0.0;
    }
    report.u_ratio = Some(u_root / (gamma + v));
    report.u_root = u_root;
    report.moment = Some(m);
    Ok(report)
}

/// Random canonical Gaussian models with the origin among the index vectors.
pub fn canonical_gaussian_family(count: usize, max_index: usize, dim: usize, seed: u64) -> Result<Vec<ProcessModel>> {
    if max_index < 2 || dim == 0 {
        return Err(Error::InvalidParams("need max_index ≥ 2 and dim ≥ 1".into()));
    }
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, streams::INSTANCE, i as u64);
            let n = rng.random_range(2..=max_index);
            let mut index = vec![vec![0.0; dim]];
            for _ in 1..n {
                index.push((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
            }
            ProcessModel::canonical(index, ProcessDriver::gaussian(1.0))
        })
        .collect()
}

/// Random square matrix collections of side ≤ `max_dim` with `min_size..=max_size`
/// members, zero matrix first.
pub fn matrix_family(count: usize, max_dim: usize, min_size: usize, max_size: usize, seed: u64) -> Vec<Vec<DMatrix<f64>>> {
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, streams::INSTANCE, 0x1000 + i as u64);
            let k = rng.random_range(1..=max_dim);
            let size = rng.random_range(min_size.max(2)..=max_size.max(min_size).max(2));
            let mut out = vec![DMatrix::zeros(k, k)];
            for _ in 1..size {
                out.push(DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal)));
            }
            out
        })
        .collect()
}

/// Mean of `Y_t` per index over `n_trials` draws.
pub fn chaos_means(model: &ProcessModel, n_trials: usize, seed: u64) -> Vec<f64> {
    let real: Vec<Vec<f64>> = (0..n_trials as u64).into_par_iter().map(|k| model.realize(seed, k)).collect();
    (0..model.n_index()).map(|t| mean(&real.iter().map(|x| x[t]).collect::<Vec<_>>())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::operator_norm_exact;
    use crate::stats::{integrate, std_dev};
    use proptest::prelude::*;

    fn e11(k: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(k, k);
        m[(0, 0)] = 1.0;
        m
    }

    fn gauss_model(index: Vec<Vec<f64>>) -> ProcessModel {
        ProcessModel::canonical(index, ProcessDriver::gaussian(1.0)).unwrap()
    }

    #[test]
    fn gaussian_sup_moment_examples() {
        let one = simulate_sup_moment(&gauss_model(vec![vec![1.0]]), 2.0, 20_000, 1).unwrap();
        assert!(one.ci.contains(one.value) && (one.value - 1.0).abs() < 0.03);
        let pm = simulate_sup_moment(&gauss_model(vec![vec![1.0], vec![-1.0]]), 2.0, 20_000, 1).unwrap();
        assert_eq!(pm.value, one.value);
        assert!(simulate_sup_moment(&gauss_model(vec![vec![1.0]]), 2.0, 0, 1).is_err());
        assert!(simulate_sup_moment(&gauss_model(vec![vec![1.0]]), 0.5, 10, 1).is_err());
    }

    #[test]
    fn chaos_examples() {
        let z = chaos_moment(&ProcessModel::chaos_z(vec![e11(2)]).unwrap(), 2.0, 40_000, 3).unwrap();
        assert!(z.ci.contains(1.0) || (z.value - 1.0).abs() < 0.03, "{z:?}");
        let y = chaos_moment(&ProcessModel::chaos_y(vec![e11(2)]).unwrap(), 2.0, 40_000, 3).unwrap();
        assert!((y.value - 2f64.sqrt()).abs() < 0.05, "{y:?}");
        // E|g² − 1| by quadrature
        let dens = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let oracle = 2.0 * integrate(&|x: f64| (x * x - 1.0).abs() * dens(x), 0.0, 12.0, 1e-12);
        let y1 = chaos_moment(&ProcessModel::chaos_y(vec![e11(2)]).unwrap(), 1.0, 40_000, 4).unwrap();
        assert!((y1.value - oracle).abs() < 0.03, "{} vs {oracle}", y1.value);
        let zero = chaos_moment(&ProcessModel::chaos_y(vec![DMatrix::zeros(2, 2)]).unwrap(), 1.0, 100, 1).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(chaos_moment(&gauss_model(vec![vec![1.0]]), 1.0, 10, 1).is_err());
    }

    #[test]
    fn chaos_y_is_centred() {
        let ms = matrix_family(1, 3, 2, 3, 5).remove(0);
        let model = ProcessModel::chaos_y(ms).unwrap();
        let n = 50_000;
        let real: Vec<Vec<f64>> = (0..n as u64).map(|k| model.realize(8, k)).collect();
        for (t, m) in chaos_means(&model, n, 8).into_iter().enumerate() {
            let sd = std_dev(&real.iter().map(|x| x[t]).collect::<Vec<_>>());
            assert!(m.abs() <= 4.0 * sd / (n as f64).sqrt() + 1e-12, "index {t}: {m}");
        }
    }

    #[test]
    fn induced_metrics() {
        let idx = vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, -1.0]];
        let s = gauss_model(idx.clone()).induced_metric(1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.d(i, j) - dist2(&idx[i], &idx[j])).abs() < 1e-12);
            }
        }
        let ms = matrix_family(4, 8, 2, 4, 2);
        for col in ms {
            let space = ProcessModel::chaos_y(col.clone()).unwrap().induced_metric(1.0).unwrap();
            for i in 0..col.len() {
                for j in 0..col.len() {
                    let exact = operator_norm_exact(&(&col[i] - &col[j]));
                    assert!((space.d(i, j) - exact).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn moment_audit_singleton_and_linearity() {
        let rep = audit_moment_bound(&[gauss_model(vec![vec![1.0]])], &half_square(), &[1.0, 2.0], 5_000, 2).unwrap();
        assert!(rep.passed);
        for c in &rep.cells {
            assert_eq!(c.bound_term, 0.0);
            assert!((c.ratio.unwrap() - 1.0).abs() < 1e-12);
        }
        let (g, d) = (1.3, 0.7);
        for p in [1.0, 2.0, 4.0] {
            let grow = moment_bound_term(g, d, 2.0 * p) - moment_bound_term(g, d, p);
            assert!(grow >= p * d);
        }
    }

    #[test]
    fn moment_audit_on_small_family() {
        let family = canonical_gaussian_family(3, 6, 3, 11).unwrap();
        let rep = audit_moment_bound(&family, &half_square(), &[1.0, 2.0], 20_000, 4).unwrap();
        assert_eq!(rep.cells.len(), 6);
        assert!(rep.passed && rep.fitted_constant > 0.0 && rep.fitted_constant < 10.0);
        assert!(rep.cells.iter().all(|c| c.anchor_term == 0.0));
    }

    #[test]
    fn tail_audit_power_and_singleton() {
        let phi = half_square();
        let family = canonical_gaussian_family(1, 6, 3, 12).unwrap();
        let m = audit_moment_bound(&family, &phi, &[1.0, 2.0], 20_000, 5).unwrap();
        let us = [2f64.sqrt(), 2.0, 2.5];
        let c = TailConstants::from_moment_fit(m.fitted_constant);
        assert!(audit_tail_bound(&family[0], &phi, 1.0, &us, c, 20_000, 6).unwrap().passed);
        let weak = audit_tail_bound(&family[0], &phi, 1.0, &us, c.scaled(0.01), 20_000, 6).unwrap();
        assert!(!weak.passed);
        let single = gauss_model(vec![vec![1.0]]);
        assert!(audit_tail_bound(&single, &phi, 1.0, &us, c, 1_000, 6).unwrap().passed);
        assert!(audit_tail_bound(&family[0], &phi, 1.0, &[1.0], c, 1_000, 6).is_err());
        assert!(matches!(
            audit_tail_bound(&family[0], &phi, 1.0, &[4.0], c, 1_000, 6),
            Err(Error::ResolutionTooLow { .. })
        ));
    }

    #[test]
    fn decoupling_examples() {
        let mut e12 = DMatrix::zeros(2, 2);
        e12[(0, 1)] = 1.0;
        for (b, p) in [(vec![e12.clone()], 2.0), (vec![e11(2)], 2.0), (vec![e11(2), e12], 1.0)] {
            let rep = decoupling_audit(&b, p, 20_000, 9).unwrap();
            assert!(rep.passed, "{rep:?}");
        }
    }

    #[test]
    fn chaos_bound_examples() {
        let only_zero = chaos_bound_audit(&[DMatrix::zeros(2, 2)], 1.0, 100, 1).unwrap();
        assert!(only_zero.skipped.is_some());
        let rep = chaos_bound_audit(&[DMatrix::zeros(2, 2), e11(2)], 1.0, 20_000, 1).unwrap();
        assert!(rep.ratio.unwrap().is_finite() && rep.ratio.unwrap() > 0.0);
        assert!(rep.gamma > 0.0 && (rep.v - 1.0).abs() < 1e-12);
        assert!(chaos_bound_audit(&[e11(2)], 1.0, 100, 1).is_err());
        // k_2 = 1 and a 2-point T fits in one level-1 partition, so γ_{2,2} = 0
        let flat = chaos_bound_audit(&[DMatrix::zeros(2, 2), e11(2)], 2.0, 2_000, 1).unwrap();
        assert!(flat.degenerate && flat.ratio.is_none() && flat.gamma == 0.0);
        // scaling by s: moment × s², γ(γ + V) × s², same draws
        let col = matrix_family(1, 3, 2, 3, 7).remove(0);
        let a = chaos_bound_audit(&col, 1.0, 5_000, 3).unwrap();
        let scaled: Vec<DMatrix<f64>> = col.iter().map(|m| m * 2.5).collect();
        let b = chaos_bound_audit(&scaled, 1.0, 5_000, 3).unwrap();
        assert!((a.ratio.unwrap() - b.ratio.unwrap()).abs() < 1e-6 * a.ratio.unwrap());
    }

    #[test]
    fn single_increment_constant_is_finite() {
        for d in [ProcessDriver::gaussian(1.0), ProcessDriver::rademacher()] {
            let ps: Vec<f64> = (1..=8).map(f64::from).collect();
            let rep = single_increment_audit(&d, d.claimed_tau().unwrap(), &ps, 20_000, 3).unwrap();
            assert!(rep.fitted_constant.is_finite() && rep.fitted_constant < 2.0);
        }
    }

    #[test]
    fn spec_round_trip() {
        let m = gauss_model(vec![vec![1.0, 2.0]]);
        let spec = m.to_spec().unwrap();
        let back = ProcessModel::from_spec(&spec).unwrap();
        assert_eq!(back.realize(3, 4), m.realize(3, 4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn adding_an_index_never_lowers_the_sup(seed in 0u64..1000, extra in prop::collection::vec(-2.0..2.0f64, 3)) {
            let base = canonical_gaussian_family(1, 5, 3, seed).unwrap().remove(0);
            let ProcessModel::Canonical { mut index, driver } = base.clone() else { unreachable!() };
            index.push(extra);
            let bigger = ProcessModel::canonical(index, driver).unwrap();
            let a = sup_samples(&base, 500, seed);
            let b = sup_samples(&bigger, 500, seed);
            prop_assert!(a.iter().zip(&b).all(|(x, y)| y >= x));
        }

        #[test]
        fn moments_increase_in_p(seed in 0u64..1000, p in 1.0..6.0f64, dp in 0.0..3.0f64) {
            let m = canonical_gaussian_family(1, 5, 2, seed).unwrap().remove(0);
            let s = sup_samples(&m, 500, seed);
            prop_assert!(moment_root(&s, p + dp) >= moment_root(&s, p) * (1.0 - 1e-12));
        }
    }
}
