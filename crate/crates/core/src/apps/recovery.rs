//! Basis pursuit denoising `min ‖x‖₁ s.t. ‖Φx − y‖₂ ≤ η` and the
//! conic error bound `‖x_η − x*‖₂ ≤ 2η / λ_min(Φ; D(‖·‖₁, x*))`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::apps::cone::{ConeSpec, ConicEstimate};
use crate::error::{Error, Result};
use crate::linalg::{dist2, dot, from_rows, norm1, norm2, operator_norm};
use crate::rng::{stream_rng, streams};

/// Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryInstance {
    pub phi: Vec<Vec<f64>>,
    pub x_star: Vec<f64>,
    pub e: Vec<f64>,
    pub y: Vec<f64>,
    pub eta: f64,
}

fn apply(phi: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (phi * DVector::from_column_slice(x)).iter().copied().collect()
}

fn residual_norm(phi: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    dist2(&apply(phi, x), y)
}

/// Feasibility slack accepted for solver output.
fn feasible(resid: f64, eta: f64, y_norm: f64) -> bool {
    resid <= eta * (1.0 + 1e-6) + 1e-9 * y_norm.max(1.0)
}

impl RecoveryInstance {
    pub fn matrix(&self) -> DMatrix<f64> {
        from_rows(&self.phi)
    }

    pub fn m(&self) -> usize {
        self.phi.len()
    }

    pub fn n(&self) -> usize {
        self.x_star.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.m(), self.n());
        if m == 0 || n == 0 {
            return Err(Error::InvalidParams("Φ must be nonempty".into()));
        }
        if self.phi.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParams(format!("Φ rows must have length {n}")));
        }
        if self.y.len() != m || self.e.len() != m {
            return Err(Error::InvalidParams(format!("y and e must have length {m}")));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !self.phi.iter().all(|r| finite(r)) || !finite(&self.x_star) || !finite(&self.y) || !finite(&self.e) {
            return Err(Error::InvalidParams("non-finite entry".into()));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParams(format!("η must be finite and nonnegative, got {}", self.eta)));
        }
        let r = residual_norm(&self.matrix(), &self.x_star, &self.y);
        if r > self.eta {
            return Err(Error::Precondition(format!("‖y − Φx*‖ = {r} exceeds η = {}", self.eta)));
        }
        Ok(())
    }

    /// Gaussian `Φ/√m`, `sparsity` nonzeros of magnitude in [1, 2] with random
    /// signs, and noise of norm (just under) `η` in a uniform direction.
    pub fn generate(n: usize, m: usize, sparsity: usize, eta: f64, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 || sparsity > n || !(eta >= 0.0) {
            return Err(Error::InvalidParams(format!("bad instance shape n={n} m={m} s={sparsity} η={eta}")));
        }
        let mut rng = stream_rng(seed, streams::INSTANCE, 0);
        let scale = 1.0 / (m as f64).sqrt();
        let phi: Vec<Vec<f64>> =
            (0..m).map(|_| (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let mut x_star = vec![0.0; n];
        for i in rand::seq::index::sample(&mut rng, n, sparsity) {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            x_star[i] = sign * rng.random_range(1.0..2.0);
        }
        let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let gn = norm2(&g);
        let a = from_rows(&phi);
        let clean = apply(&a, &x_star);
        let mut shrink = if gn > 0.0 { eta / gn } else { 0.0 };
        loop {
            let e: Vec<f64> = g.iter().map(|v| v * shrink).collect();
            let y: Vec<f64> = clean.iter().zip(&e).map(|(c, e)| c + e).collect();
            let inst = RecoveryInstance { phi: phi.clone(), x_star: x_star.clone(), e, y, eta };
            if inst.validate().is_ok() {
                return Ok(inst);
            }
            shrink *= 1.0 - 1e-12;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpdnResult {
    pub x: Vec<f64>,
    pub l1: f64,
    pub residual: f64,
    pub feasible: bool,
    /// Dual certificate `z` with `‖Φᵀz‖∞ ≤ 1`.
    pub dual: Vec<f64>,
    /// `−⟨z, y⟩ − η‖z‖`, a lower bound on the optimum.
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub polished: bool,
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn dual_report(phi: &DMatrix<f64>, w: &[f64], y: &[f64], eta: f64) -> (Vec<f64>, f64) {
    let at = phi.transpose() * DVector::from_column_slice(w);
    let s = at.amax().max(1.0);
    let z: Vec<f64> = w.iter().map(|v| v / s).collect();
    let value = -dot(&z, y) - eta * norm2(&z);
    (z, value)
}

/// Closed-form minimiser on a fixed support and sign pattern taken from `x`,
/// with candidate KKT multipliers. With `η = 0` the multiplier is not unique:
/// besides the minimum-norm one, the dual iterate `z_hint` projected onto
/// `{w : Φ_Sᵀw = −sign}` is offered.
fn polish(phi: &DMatrix<f64>, y: &[f64], eta: f64, x: &[f64], rel: f64, z_hint: &DVector<f64>) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let top = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() > rel * top).collect();
    if support.is_empty() || support.len() > phi.nrows() {
        return None;
    }
    let sub = phi.select_columns(&support);
    let signs = DVector::from_iterator(support.len(), support.iter().map(|&i| x[i].signum()));
    let chol = (sub.transpose() * &sub).cholesky()?;
    let yv = DVector::from_column_slice(y);
    let x_ls = chol.solve(&(sub.transpose() * &yv));
    let r_ls = &sub * &x_ls - &yv;
    let g_s = chol.solve(&signs);
    let v = &sub * &g_s;
    let (xs, ws) = if eta == 0.0 {
        if r_ls.norm() > 1e-10 * yv.norm().max(1.0) {
            return None;
        }
        let projected = z_hint - &sub * chol.solve(&(sub.transpose() * z_hint + &signs));
        (x_ls, vec![-v, projected])
    } else {
        let q = eta * eta - r_ls.norm_squared();
        if q <= 0.0 || v.norm() == 0.0 {
            return None;
        }
        let c = q.sqrt() / v.norm();
        let xs = &x_ls - &g_s * c;
        let w = (&sub * &xs - &yv) / c;
        (xs, vec![w])
    };
    if xs.iter().zip(signs.iter()).any(|(a, s)| a.signum() != *s || *a == 0.0) {
        return None;
    }
    let mut full = vec![0.0; x.len()];
    for (k, &i) in support.iter().enumerate() {
        full[i] = xs[k];
    }
    Some((full, ws.iter().map(|w| w.iter().copied().collect()).collect()))
}

fn best_polished(phi: &DMatrix<f64>, y: &[f64], eta: f64, x: &[f64], z: &DVector<f64>, iterations: usize) -> Option<BpdnResult> {
    let y_norm = norm2(y);
    [1e-2, 1e-4, 1e-6, 1e-8]
        .iter()
        .filter_map(|&rel| polish(phi, y, eta, x, rel, z))
        .filter_map(|(x, ws)| {
            let residual = residual_norm(phi, &x, y);
            if !feasible(residual, eta, y_norm) {
                return None;
            }
            let (dual, dual_value) = ws
                .iter()
                .map(|w| dual_report(phi, w, y, eta))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one multiplier");
            let l1 = norm1(&x);
            Some(BpdnResult { l1, residual, feasible: true, gap: l1 - dual_value, dual, dual_value, x, iterations, polished: true })
        })
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
}

/// Chambolle–Pock on `‖x‖₁ + ι_{B(y,η)}(Φx)` with `τ = σ = 0.99/‖Φ‖`, followed
/// by a support polish whose KKT multiplier gives the dual certificate.
/// Succeeds once the duality gap is at most `tol · max(1, ‖x‖₁)`.
pub fn recover_bpdn(inst: &RecoveryInstance, tol: f64, max_iters: usize) -> Result<BpdnResult> {
    inst.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("solver tolerance must be positive, got {tol}")));
    }
    let phi = inst.matrix();
    let (y, eta) = (&inst.y, inst.eta);
    let (m, n) = (inst.m(), inst.n());
    if norm2(y) <= eta {
        let residual = norm2(y);
        return Ok(BpdnResult {
            x: vec![0.0; n],
            l1: 0.0,
            residual,
            feasible: true,
            dual: vec![0.0; m],
            dual_value: 0.0,
            gap: 0.0,
            iterations: 0,
            polished: false,
        });
    }
    let step = 0.99 / operator_norm(&phi).max(f64::MIN_POSITIVE);
    let phi_t = phi.transpose();
    let yv = DVector::from_column_slice(y);
    let mut x = DVector::<f64>::zeros(n);
    let mut x_bar = x.clone();
    let mut z = DVector::<f64>::zeros(m);
    let mut best: Option<BpdnResult> = None;
    for it in 1..=max_iters {
        // prox of σF*: v − σ·proj_{B(y,η)}(v/σ)
        let v = &z + &phi * &x_bar * step;
        let c = &v / step - &yv;
        let cn = c.norm();
        let proj = if cn <= eta { &v / step } else { &yv + c * (eta / cn) };
        z = v - proj * step;
        let grad = &x - &phi_t * &z * step;
        let next = grad.map(|g| soft(g, step));
        x_bar = &next * 2.0 - &x;
        x = next;
        if it % 25 == 0 || it == max_iters {
            let xs: Vec<f64> = x.iter().copied().collect();
            if let Some(cand) = best_polished(&phi, y, eta, &xs, &z, it) {
                let done = cand.gap <= tol * cand.l1.max(1.0);
                if best.as_ref().is_none_or(|b| cand.gap < b.gap) {
                    best = Some(cand);
                }
                if done {
                    return Ok(best.expect("just set"));
                }
            }
        }
    }
    let (iterate, gap) = match best {
        Some(b) => (b.x, b.gap),
        None => {
            let (_, dv) = dual_report(&phi, &z.iter().copied().collect::<Vec<_>>(), y, eta);
            (x.iter().copied().collect::<Vec<_>>(), norm1(x.as_slice()) - dv)
        }
    };
    Err(Error::NotConverged { iterations: max_iters, gap, iterate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryAudit {
    pub error: f64,
    pub eta: f64,
    pub lambda: f64,
    /// `2η/λ̂`.
    pub bound: f64,
    pub ratio: Option<f64>,
    /// Whether `λ̂` is a certified lower bound on the descent-cone value.
    pub certified: bool,
    pub holds: bool,
}

/// Compares `‖x_η − x*‖₂` with `2η/λ̂`. Only exact full-space values (which
/// lower-bound every cone) or exact values on the descent cone at `x*`
/// certify the comparison; anything else is diagnostic.
pub fn recovery_error_audit(inst: &RecoveryInstance, x_eta: &[f64], est: &ConicEstimate) -> Result<RecoveryAudit> {
    if !(est.value > 0.0) {
        return Err(Error::NoPositiveEstimate);
    }
    if x_eta.len() != inst.n() {
        return Err(Error::InvalidParams(format!("x_η has length {}, expected {}", x_eta.len(), inst.n())));
    }
    let lambda = est.lower.unwrap_or(est.value);
    let certified = est.certified
        && est.lower.is_some_and(|l| l > 0.0)
        && match &est.cone {
            ConeSpec::FullSpace { dim } => *dim == inst.n(),
            ConeSpec::L1Descent { x_star } => *x_star == inst.x_star,
            ConeSpec::Orthant { .. } => false,
        };
    let error = dist2(x_eta, &inst.x_star);
    let bound = 2.0 * inst.eta / lambda;
    let slack = 1e-8 * norm2(&inst.x_star).max(1.0);
    Ok(RecoveryAudit {
        error,
        eta: inst.eta,
        lambda,
        bound,
        ratio: (bound > 0.0).then(|| error / bound),
        certified,
        holds: error <= bound + slack,
    })
}
