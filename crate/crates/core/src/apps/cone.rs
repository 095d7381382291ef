//! Cones, their Euclidean projections and minimum conic singular values.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm1, norm2, operator_norm, sigma_min};
use crate::rng::{stream_rng, streams};

/// Dense exact oracles are used up to this side length.
pub const EXACT_ORACLE_CAP: usize = 32;
const DESCENT_ITERS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConeSpec {
    FullSpace { dim: usize },
    /// The nonnegative orthant.
    Orthant { dim: usize },
    /// `D(‖·‖₁, x*)`.
    L1Descent { x_star: Vec<f64> },
}

/// `Σ_{i∈S} sign(x*_i) u_i + ‖u_{S^c}‖₁`, the directional derivative of `‖·‖₁` at `x*`.
fn l1_directional_derivative(x_star: &[f64], u: &[f64]) -> f64 {
    x_star
        .iter()
        .zip(u)
        .map(|(&x, &v)| if x != 0.0 { x.signum() * v } else { v.abs() })
        .sum()
}

/// `u ∈ D(‖·‖₁, x*)` iff the directional derivative is ≤ 0.
pub fn l1_descent_cone_membership(x_star: &[f64], u: &[f64]) -> Result<bool> {
    if x_star.iter().all(|&x| x == 0.0) {
        return Err(Error::Precondition("x* must be nonzero".into()));
    }
    if x_star.len() != u.len() {
        return Err(Error::InvalidParams(format!("dimensions differ: {} vs {}", x_star.len(), u.len())));
    }
    Ok(l1_directional_derivative(x_star, u) <= 0.0)
}

fn normalize(mut u: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm2(&u);
    if n > 0.0 && n.is_finite() {
        u.iter_mut().for_each(|x| *x /= n);
        Some(u)
    } else {
        None
    }
}

/// Projection of `u` onto `cone(∂‖x*‖₁) = {θz : z_S = sign(x*_S), |z_{S^c}| ≤ 1, θ ≥ 0}`.
fn project_polar_l1(x_star: &[f64], u: &[f64]) -> Vec<f64> {
    let at = |theta: f64| -> (f64, Vec<f64>) {
        let mut dist = 0.0;
        let p: Vec<f64> = x_star
            .iter()
            .zip(u)
            .map(|(&x, &v)| {
                let q = if x != 0.0 { theta * x.signum() } else { v.clamp(-theta, theta) };
                dist += (v - q) * (v - q);
                q
            })
            .collect();
        (dist, p)
    };
    // dist(θ) is convex and piecewise quadratic; its derivative vanishes at
    // θ(|S| + |A|) = Σ_S s_i v_i + Σ_A |v_i| with A = {i ∉ S : |v_i| > θ}.
    let mut num: f64 = x_star.iter().zip(u).filter(|(x, _)| **x != 0.0).map(|(x, v)| x.signum() * v).sum();
    let mut den = x_star.iter().filter(|x| **x != 0.0).count() as f64;
    let mut off: Vec<f64> = x_star.iter().zip(u).filter(|(x, _)| **x == 0.0).map(|(_, v)| v.abs()).collect();
    off.sort_by(|a, b| b.total_cmp(a));
    let mut theta = (num / den).max(0.0);
    for &b in &off {
        if b <= theta {
            break;
        }
        num += b;
        den += 1.0;
        theta = (num / den).max(0.0);
    }
    at(theta).1
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        match self {
            ConeSpec::FullSpace { dim } | ConeSpec::Orthant { dim } => *dim,
            ConeSpec::L1Descent { x_star } => x_star.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::EmptyCone);
        }
        if let ConeSpec::L1Descent { x_star } = self {
            if x_star.iter().all(|&x| x == 0.0) {
                return Err(Error::Precondition("x* must be nonzero".into()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        if u.len() != self.dim() {
            return false;
        }
        match self {
            ConeSpec::FullSpace { .. } => true,
            ConeSpec::Orthant { .. } => u.iter().all(|&x| x >= 0.0),
            ConeSpec::L1Descent { x_star } => l1_directional_derivative(x_star, u) <= 0.0,
        }
    }

    /// Euclidean projection onto the (closed) cone.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        match self {
            ConeSpec::FullSpace { .. } => u.to_vec(),
            ConeSpec::Orthant { .. } => u.iter().map(|x| x.max(0.0)).collect(),
            // Moreau: P_D(u) = u − P_{D°}(u)
            ConeSpec::L1Descent { x_star } => {
                let polar = project_polar_l1(x_star, u);
                u.iter().zip(polar).map(|(a, b)| a - b).collect()
            }
        }
    }

    /// A direction in `C ∩ S^{n-1}`.
    pub fn sample_unit(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.dim();
        for _ in 0..1000 {
            let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let u = match self {
                ConeSpec::FullSpace { .. } => Some(g),
                ConeSpec::Orthant { .. } => Some(g.into_iter().map(f64::abs).collect()),
                ConeSpec::L1Descent { x_star } => {
                    let mut u = g;
                    let on: f64 = x_star.iter().zip(&u).filter(|(x, _)| **x != 0.0).map(|(x, v)| x.signum() * v).sum();
                    if on == 0.0 {
                        None
                    } else {
                        if on > 0.0 {
                            for (x, v) in x_star.iter().zip(u.iter_mut()) {
                                if *x != 0.0 {
                                    *v = -*v;
                                }
                            }
                        }
                        // off-support ℓ1 mass is a uniform fraction of the on-support slack
                        let off = norm1(&x_star.iter().zip(&u).filter(|(x, _)| **x == 0.0).map(|(_, v)| *v).collect::<Vec<_>>());
                        let budget = 0.999 * rng.random::<f64>() * on.abs();
                        if off > 0.0 {
                            let s = budget / off;
                            for (x, v) in x_star.iter().zip(u.iter_mut()) {
                                if *x == 0.0 {
                                    *v *= s;
                                }
                            }
                        }
                        Some(u)
                    }
                }
            };
            if let Some(v) = u.and_then(normalize) {
                if self.contains(&v) {
                    return Ok(v);
                }
            }
        }
        Err(Error::EmptyCone)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConicMethod {
    Sampled,
    ProjectedDescent,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicEstimate {
    pub method: ConicMethod,
    pub cone: ConeSpec,
    /// Point estimate; an upper bound on `λ_min` unless `certified`.
    pub value: f64,
    /// Certified lower bound (exact oracles only).
    pub lower: Option<f64>,
    pub certified: bool,
    pub argmin: Option<Vec<f64>>,
}

fn phi_norm(phi: &DMatrix<f64>, u: &[f64]) -> f64 {
    (phi * DVector::from_column_slice(u)).norm()
}

fn is_diagonal(phi: &DMatrix<f64>) -> bool {
    phi.is_square() && phi.iter().enumerate().all(|(k, &x)| x == 0.0 || k / phi.nrows() == k % phi.nrows())
}

/// `λ_min(Φ; C) = inf_{u ∈ C ∩ S^{n-1}} ‖Φu‖₂`.
///
/// `Sampled` and `ProjectedDescent` return upper estimates; `Exact` covers
/// the full space (smallest singular value) and the orthant for diagonal `Φ`.
pub fn min_conic_singular_value(
    phi: &DMatrix<f64>,
    cone: &ConeSpec,
    method: ConicMethod,
    budget: usize,
    seed: u64,
) -> Result<ConicEstimate> {
    cone.validate()?;
    if phi.ncols() != cone.dim() {
        return Err(Error::InvalidParams(format!("Φ has {} columns, cone dimension {}", phi.ncols(), cone.dim())));
    }
    let mk = |value: f64, certified: bool, argmin: Option<Vec<f64>>| ConicEstimate {
        method,
        cone: cone.clone(),
        value,
        lower: certified.then_some(value),
        certified,
        argmin,
    };
    match method {
        ConicMethod::Exact => {
            if phi.nrows() > EXACT_ORACLE_CAP || phi.ncols() > EXACT_ORACLE_CAP {
                return Err(Error::OracleUnavailable(format!("Φ is {}×{}, above {EXACT_ORACLE_CAP}", phi.nrows(), phi.ncols())));
            }
            match cone {
                ConeSpec::FullSpace { .. } => Ok(mk(sigma_min(phi), true, None)),
                ConeSpec::Orthant { .. } if is_diagonal(phi) => {
                    let (k, d) = (0..phi.ncols())
                        .map(|k| (k, phi[(k, k)].abs()))
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .expect("nonempty");
                    let mut e = vec![0.0; phi.ncols()];
                    e[k] = 1.0;
                    Ok(mk(d, true, Some(e)))
                }
                _ => Err(Error::OracleUnavailable("no exact oracle for this cone and matrix".into())),
            }
        }
        ConicMethod::Sampled => {
            if budget == 0 {
                return Err(Error::Precondition("budget must be positive".into()));
            }
            let best = (0..budget as u64)
                .into_par_iter()
                .map(|k| {
                    let u = cone.sample_unit(&mut stream_rng(seed, streams::CONE, k))?;
                    Ok((phi_norm(phi, &u), u))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("budget > 0");
            Ok(mk(best.0, false, Some(best.1)))
        }
        ConicMethod::ProjectedDescent => {
            let starts = budget.clamp(1, 64);
            let l = operator_norm(phi).powi(2).max(f64::MIN_POSITIVE);
            let step = 0.5 / l;
            let best = (0..starts as u64)
                .into_par_iter()
                .map(|k| {
                    let mut u = cone.sample_unit(&mut stream_rng(seed, streams::DESCENT, k))?;
                    let mut best = (phi_norm(phi, &u), u.clone());
                    for _ in 0..DESCENT_ITERS {
                        let grad = phi.transpose() * (phi * DVector::from_column_slice(&u));
                        let moved: Vec<f64> = u.iter().zip(grad.iter()).map(|(a, g)| a - step * g).collect();
                        match normalize(cone.project(&moved)) {
                            Some(v) if cone.contains(&v) => u = v,
                            _ => break,
                        }
                        let val = phi_norm(phi, &u);
                        if val < best.0 {
                            best = (val, u.clone());
                        }
                    }
                    Ok(best)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("starts > 0");
            Ok(mk(best.0, false, Some(best.1)))
        }
    }
}
