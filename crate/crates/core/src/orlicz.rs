//! Orlicz N-functions and their derived objects.
//!
//! An [`OrliczFunction`] is an immutable, cheaply clonable evaluator plus the
//! metadata needed for numeric work: a catalog tag, the closed form of its
//! Young–Fenchel conjugate when one is known, and an evaluation grid.
//! Inverses are always computed by bisection so that catalog and custom
//! functions share one code path; closed forms serve as test oracles.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub const DEFAULT_X_MAX: f64 = 64.0;
pub const DEFAULT_RESOLUTION: usize = 1 << 14;

/// Range that conjugates are made invertible on by default (covers 2^n, n ≤ 20).
pub const DEFAULT_INVERSE_RANGE: f64 = (1u64 << 21) as f64;

const MAX_RANGE_X: f64 = 1.152_921_504_606_847e18; // 2^60
const CONJUGATE_SEARCH_CAP: f64 = 1e150;
const INVERSE_REL_TOL: f64 = 1e-12;

/// Catalog tags accepted by [`make_orlicz`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogKind {
    /// `c|x|^a`, `c > 0`, `a > 1`.
    Power,
    /// `c(exp(|x|^α) − 1)`, `c > 0`, `α > 1`.
    ExpPower,
    /// `exp(|x|) − |x| − 1`.
    ExpMinusLinear,
    /// `x²/2`.
    HalfSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrliczKind {
    Power { c: f64, a: f64 },
    ExpPower { c: f64, alpha: f64 },
    ExpMinusLinear,
    /// `(|x|+1) ln(|x|+1) − |x|`, the conjugate of `exp_minus_linear`.
    ExpMinusLinearConjugate,
    HalfSquare,
    Custom { name: String },
    NumericConjugate { of: Box<OrliczKind> },
    PsiSquare { of: Box<OrliczKind> },
    Standardized { of: Box<OrliczKind> },
}

impl fmt::Display for OrliczKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrliczKind::Power { c, a } => write!(f, "power(c={c}, a={a})"),
            OrliczKind::ExpPower { c, alpha } => write!(f, "exp_power(c={c}, α={alpha})"),
            OrliczKind::ExpMinusLinear => write!(f, "exp_minus_linear"),
            OrliczKind::ExpMinusLinearConjugate => write!(f, "exp_minus_linear*"),
            OrliczKind::HalfSquare => write!(f, "half_square"),
            OrliczKind::Custom { name } => write!(f, "custom({name})"),
            OrliczKind::NumericConjugate { of } => write!(f, "({of})*"),
            OrliczKind::PsiSquare { of } => write!(f, "psi[{of}]"),
            OrliczKind::Standardized { of } => write!(f, "std[{of}]"),
        }
    }
}

/// How the conjugate of a function is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugateForm {
    Closed(OrliczKind),
    Numeric,
}

/// Evaluation grid `{k·x_max/resolution : 0 ≤ k ≤ resolution}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainGrid {
    pub x_max: f64,
    pub resolution: usize,
}

impl Default for DomainGrid {
    fn default() -> Self {
        DomainGrid { x_max: DEFAULT_X_MAX, resolution: DEFAULT_RESOLUTION }
    }
}

impl DomainGrid {
    pub fn step(&self) -> f64 {
        self.x_max / self.resolution as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..=self.resolution).map(move |k| k as f64 * h)
    }
}

#[derive(Clone)]
pub struct OrliczFunction {
    kind: OrliczKind,
    eval: Evaluator,
    conjugate_form: ConjugateForm,
    grid: DomainGrid,
    generalized: bool,
}

impl fmt::Debug for OrliczFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OrliczFunction")
            .field("kind", &self.kind)
            .field("conjugate_form", &self.conjugate_form)
            .field("grid", &self.grid)
            .field("generalized", &self.generalized)
            .finish()
    }
}

/// Which function [`inverse_at`] inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseSide {
    Direct,
    Conjugate,
}

fn expm1_minus_x(x: f64) -> f64 {
    // e^x − x − 1 for x ≥ 0, series near 0 to avoid cancellation.
    if x < 0.1 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..=14 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

fn exp_minus_linear_conjugate(x: f64) -> f64 {
    // (x+1) ln(x+1) − x = Σ_{k≥2} (−1)^k x^k / (k(k−1)) for small x.
    if x < 0.05 {
        let mut pow = x * x;
        let mut sum = 0.0;
        for k in 2..=16 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * pow / (k * (k - 1)) as f64;
            pow *= x;
        }
        sum
    } else {
        (x + 1.0) * x.ln_1p() - x
    }
}

fn evaluator_for(kind: &OrliczKind) -> Option<Evaluator> {
    let e: Evaluator = match *kind {
        OrliczKind::Power { c, a } => Arc::new(move |x: f64| c * x.abs().powf(a)),
        OrliczKind::ExpPower { c, alpha } => {
            Arc::new(move |x: f64| c * x.abs().powf(alpha).exp_m1())
        }
        OrliczKind::ExpMinusLinear => Arc::new(|x: f64| expm1_minus_x(x.abs())),
        OrliczKind::ExpMinusLinearConjugate => {
            Arc::new(|x: f64| exp_minus_linear_conjugate(x.abs()))
        }
        OrliczKind::HalfSquare => Arc::new(|x: f64| 0.5 * x * x),
        _ => return None,
    };
    Some(e)
}

fn closed_conjugate(kind: &OrliczKind) -> ConjugateForm {
    match *kind {
        OrliczKind::Power { c, a } => {
            let b = a / (a - 1.0);
            let c1 = (c * a).powf(-b / a) / b;
            ConjugateForm::Closed(OrliczKind::Power { c: c1, a: b })
        }
        OrliczKind::HalfSquare => ConjugateForm::Closed(OrliczKind::HalfSquare),
        OrliczKind::ExpMinusLinear => ConjugateForm::Closed(OrliczKind::ExpMinusLinearConjugate),
        OrliczKind::ExpMinusLinearConjugate => ConjugateForm::Closed(OrliczKind::ExpMinusLinear),
        _ => ConjugateForm::Numeric,
    }
}

/// Build a catalog N-function. Parameter lists: power `[c, a]`,
/// exp_power `[c, α]`, the other kinds take none.
pub fn make_orlicz(kind: CatalogKind, params: &[f64]) -> Result<OrliczFunction> {
    let want = match kind {
        CatalogKind::Power | CatalogKind::ExpPower => 2,
        CatalogKind::ExpMinusLinear | CatalogKind::HalfSquare => 0,
    };
    if params.len() != want {
        return Err(Error::InvalidParams(format!(
            "{kind:?} takes {want} parameters, got {}",
            params.len()
        )));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParams("non-finite parameter".into()));
    }
    let tag = match kind {
        CatalogKind::Power => {
            let (c, a) = (params[0], params[1]);
            if c <= 0.0 || a <= 1.0 {
                return Err(Error::InvalidParams(format!("power needs c>0, a>1 (c={c}, a={a})")));
            }
            OrliczKind::Power { c, a }
        }
        CatalogKind::ExpPower => {
            let (c, alpha) = (params[0], params[1]);
            if c <= 0.0 || alpha <= 1.0 {
                return Err(Error::InvalidParams(format!(
                    "exp_power needs c>0, α>1 (c={c}, α={alpha})"
                )));
            }
            OrliczKind::ExpPower { c, alpha }
        }
        CatalogKind::ExpMinusLinear => OrliczKind::ExpMinusLinear,
        CatalogKind::HalfSquare => OrliczKind::HalfSquare,
    };
    Ok(OrliczFunction::from_closed_kind(tag, DomainGrid::default()))
}

pub fn half_square() -> OrliczFunction {
    OrliczFunction::from_closed_kind(OrliczKind::HalfSquare, DomainGrid::default())
}

impl OrliczFunction {
    fn from_closed_kind(kind: OrliczKind, grid: DomainGrid) -> OrliczFunction {
        let eval = evaluator_for(&kind).expect("closed kind has an evaluator");
        OrliczFunction {
            conjugate_form: closed_conjugate(&kind),
            kind,
            eval,
            grid,
            generalized: false,
        }
    }

    /// Wrap a user evaluator; it must pass the grid audit of N-function
    /// invariants.
    pub fn custom<F>(name: &str, f: F, grid: DomainGrid) -> Result<OrliczFunction>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let func = OrliczFunction {
            kind: OrliczKind::Custom { name: name.to_string() },
            eval: Arc::new(f),
            conjugate_form: ConjugateForm::Numeric,
            grid,
            generalized: false,
        };
        func.audit_invariants()?;
        Ok(func)
    }

    pub fn kind(&self) -> &OrliczKind {
        &self.kind
    }

    pub fn grid(&self) -> DomainGrid {
        self.grid
    }

    pub fn conjugate_form(&self) -> &ConjugateForm {
        &self.conjugate_form
    }

    /// True for generalized Young functions exempt from N-function checks.
    pub fn is_generalized(&self) -> bool {
        self.generalized
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn evaluator(&self) -> Evaluator {
        Arc::clone(&self.eval)
    }

    /// Grid audit of the N-function invariants: φ(0)=0, evenness,
    /// nonnegativity, midpoint convexity and φ(x)/x going from ~0 to large.
    pub fn audit_invariants(&self) -> Result<()> {
        let f0 = self.eval(0.0);
        if f0.abs() > 1e-12 {
            return Err(Error::InvalidNFunction(format!("φ(0) = {f0}")));
        }
        let pts: Vec<f64> = self.grid.points().collect();
        let vals: Vec<f64> = pts.iter().map(|&x| self.eval(x)).collect();
        for (&x, &v) in pts.iter().zip(&vals) {
            if v.is_nan() || v < -1e-12 {
                return Err(Error::InvalidNFunction(format!("φ({x}) = {v}")));
            }
            if !v.is_finite() {
                continue;
            }
            let m = self.eval(-x);
            if (m - v).abs() > 1e-12 * v.abs().max(1.0) {
                return Err(Error::InvalidNFunction(format!("not even at x={x}: {v} vs {m}")));
            }
        }
        for k in 1..vals.len() - 1 {
            let (a, b, c) = (vals[k - 1], vals[k], vals[k + 1]);
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                continue;
            }
            if b > 0.5 * (a + c) + 1e-10 * c.abs().max(1.0) {
                return Err(Error::InvalidNFunction(format!("not convex near x={}", pts[k])));
            }
        }
        let last = vals.iter().rposition(|v| v.is_finite()).unwrap_or(0);
        if last < 2 {
            return Err(Error::InvalidNFunction("no finite values on the grid".into()));
        }
        let near_zero = vals[1] / pts[1];
        let far = vals[last] / pts[last];
        if !(near_zero < 1e-3 * far) {
            return Err(Error::InvalidNFunction(format!(
                "φ(x)/x does not grow: {near_zero:.3e} at x_min vs {far:.3e} at x_max"
            )));
        }
        Ok(())
    }

    /// Young–Fenchel conjugate; closed form for catalog kinds, otherwise a
    /// numeric Legendre transform. The result is invertible on at least
    /// `[0, 2^21]`.
    pub fn conjugate(&self) -> Result<OrliczFunction> {
        match &self.conjugate_form {
            ConjugateForm::Closed(kind) => {
                Ok(OrliczFunction::from_closed_kind(kind.clone(), self.grid)
                    .with_range(DEFAULT_INVERSE_RANGE))
            }
            ConjugateForm::Numeric => self.numeric_conjugate(),
        }
    }

    /// Numeric Legendre transform regardless of closed forms.
    pub fn numeric_conjugate(&self) -> Result<OrliczFunction> {
        let table = Arc::new(ConjugateTable::new(self));
        let t = Arc::clone(&table);
        let conj = OrliczFunction {
            kind: OrliczKind::NumericConjugate { of: Box::new(self.kind.clone()) },
            eval: Arc::new(move |x: f64| t.eval(x)),
            conjugate_form: ConjugateForm::Numeric,
            grid: self.grid,
            generalized: self.generalized,
        };
        if !self.generalized {
            conj.check_numeric_convexity()?;
        }
        Ok(conj.with_range(DEFAULT_INVERSE_RANGE))
    }

    fn check_numeric_convexity(&self) -> Result<()> {
        const SAMPLES: usize = 256;
        let h = self.grid.x_max / SAMPLES as f64;
        let vals: Vec<f64> = (0..=SAMPLES).map(|k| self.eval(k as f64 * h)).collect();
        for k in 1..SAMPLES {
            let (a, b, c) = (vals[k - 1], vals[k], vals[k + 1]);
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                continue;
            }
            let defect = b - 0.5 * (a + c);
            if defect > 1e-8 * c.abs().max(1.0) {
                return Err(Error::GridTooCoarse { x: k as f64 * h, defect });
            }
        }
        Ok(())
    }

    /// Same function with `x_max` doubled until `f(x_max) ≥ y` (or 2^60).
    pub fn with_range(mut self, y: f64) -> OrliczFunction {
        while self.eval(self.grid.x_max) < y && self.grid.x_max < MAX_RANGE_X {
            self.grid.x_max *= 2.0;
        }
        self
    }

    /// Monotone bisection for `f(x) = y` on `[0, x_max]`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::InvalidParams(format!("inverse needs y ≥ 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let top = self.eval(self.grid.x_max);
        if y > top {
            return Err(Error::OutOfRange { y, max: top });
        }
        let (mut lo, mut hi) = (0.0f64, self.grid.x_max);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= INVERSE_REL_TOL * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Splice `x²/2` on `|x| < √2` with `φ(|x|) − φ(√2) + 1` outside.
    /// The splice is continuous; a kink that breaks convexity is rejected.
    pub fn standardize(&self) -> Result<OrliczFunction> {
        let base = self.evaluator();
        let r2 = std::f64::consts::SQRT_2;
        let shift = base(r2) - 1.0;
        let func = OrliczFunction {
            kind: OrliczKind::Standardized { of: Box::new(self.kind.clone()) },
            eval: Arc::new(move |x: f64| {
                let a = x.abs();
                if a < r2 {
                    0.5 * a * a
                } else {
                    base(a) - shift
                }
            }),
            conjugate_form: ConjugateForm::Numeric,
            grid: self.grid,
            generalized: false,
        };
        func.audit_invariants()?;
        Ok(func)
    }
}

/// Tabulated `φ` on the grid for repeated Legendre transforms.
struct ConjugateTable {
    base: Evaluator,
    step: f64,
    x_max: f64,
    values: Vec<f64>,
}

impl ConjugateTable {
    fn new(f: &OrliczFunction) -> ConjugateTable {
        let grid = f.grid;
        let values = grid.points().map(|y| f.eval(y)).collect();
        ConjugateTable { base: f.evaluator(), step: grid.step(), x_max: grid.x_max, values }
    }

    fn objective(&self, x: f64, y: f64) -> f64 {
        let v = (self.base)(y);
        if v.is_finite() {
            x * y - v
        } else {
            f64::NEG_INFINITY
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        let mut best_k = 0;
        let mut best = f64::NEG_INFINITY;
        for (k, &v) in self.values.iter().enumerate() {
            let g = x * (k as f64 * self.step) - v;
            if g > best {
                best = g;
                best_k = k;
            }
        }
        let last = self.values.len() - 1;
        let (lo, hi) = if best_k == last {
            // Maximiser beyond the grid: expand geometrically.
            let mut prev = self.x_max - self.step;
            let mut y = self.x_max;
            let mut gy = best;
            loop {
                let next = 2.0 * y;
                let gn = self.objective(x, next);
                if !(gn > gy) {
                    break (prev, next);
                }
                if next > CONJUGATE_SEARCH_CAP {
                    return gn;
                }
                prev = y;
                y = next;
                gy = gn;
            }
        } else {
            let lo = if best_k == 0 { 0.0 } else { (best_k - 1) as f64 * self.step };
            (lo, (best_k + 1) as f64 * self.step)
        };
        best.max(golden_max(|y| self.objective(x, y), lo, hi))
    }
}

fn golden_max<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    gc.max(gd)
}

/// `f^{-1}(y)` or `f*^{-1}(y)`.
pub fn inverse_at(f: &OrliczFunction, y: f64, which: InverseSide) -> Result<f64> {
    match which {
        InverseSide::Direct => f.inverse(y),
        InverseSide::Conjugate => f.conjugate()?.inverse(y),
    }
}

/// Default Δ2 audit grid: `x = 2^k`, `k = 1..=20`.
pub fn default_delta2_grid() -> Vec<f64> {
    (1..=20).map(|k| (1u64 << k) as f64).collect()
}

/// `M_b = 1 − sup_x φ*^{-1}(x)/φ*^{-1}(bx)` over the grid, if it lies in (0,1).
pub fn delta2_modulus(phi: &OrliczFunction, b: f64, x_grid: &[f64]) -> Result<f64> {
    if !(b >= 1.0) {
        return Err(Error::InvalidParams(format!("Δ2 audit needs b ≥ 1, got {b}")));
    }
    if x_grid.is_empty() || x_grid.iter().any(|&x| x < 2.0) {
        return Err(Error::InvalidParams("Δ2 grid points must be ≥ 2".into()));
    }
    let top = x_grid.iter().cloned().fold(0.0, f64::max) * b;
    let conj = phi.conjugate()?.with_range(top);
    let mut sup = 0.0f64;
    for &x in x_grid {
        let num = conj.inverse(x)?;
        let den = conj.inverse(b * x)?;
        sup = sup.max(num / den);
    }
    let m = 1.0 - sup;
    if m > 0.0 && m < 1.0 {
        Ok(m)
    } else {
        Err(Error::Delta2Fails { b, sup_ratio: sup })
    }
}

/// Grid estimate of `liminf_{x→0} φ(x)/x²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QCondition {
    pub constant: f64,
    pub passes: bool,
}

pub const Q_FAIL_THRESHOLD: f64 = 1e-8;

pub fn q_condition_constant(phi: &OrliczFunction) -> QCondition {
    let constant = (4..=40)
        .map(|k| {
            let x = (-(k as f64)).exp2();
            phi.eval(x) / (x * x)
        })
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    QCondition { constant, passes: constant >= Q_FAIL_THRESHOLD }
}

/// Audited Q- and Δ2-condition values for one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCertificate {
    pub q_constant: f64,
    pub q_passes: bool,
    /// `(b, M_b)` for every audited `b` that passed.
    pub delta2_modulus: Vec<(f64, f64)>,
    pub audited_grid: Vec<f64>,
}

impl ConditionCertificate {
    pub fn audit(phi: &OrliczFunction, bs: &[f64]) -> ConditionCertificate {
        let q = q_condition_constant(phi);
        let grid = default_delta2_grid();
        let delta2_modulus = bs
            .iter()
            .filter_map(|&b| delta2_modulus(phi, b, &grid).ok().map(|m| (b, m)))
            .collect();
        ConditionCertificate {
            q_constant: q.constant,
            q_passes: q.passes,
            delta2_modulus,
            audited_grid: grid,
        }
    }

    pub fn modulus(&self, b: f64) -> Option<f64> {
        self.delta2_modulus.iter().find(|(bb, _)| *bb == b).map(|&(_, m)| m)
    }

    pub fn has_delta2(&self, b: f64) -> bool {
        self.modulus(b).is_some()
    }
}

/// `ψ(x) = φ(√|x|)`, a generalized Young function (may be linear near 0).
pub fn psi_square_transform(phi: &OrliczFunction) -> OrliczFunction {
    let base = phi.evaluator();
    let x_max = (phi.grid.x_max * phi.grid.x_max).min(1e6);
    OrliczFunction {
        kind: OrliczKind::PsiSquare { of: Box::new(phi.kind.clone()) },
        eval: Arc::new(move |x: f64| base(x.abs().sqrt())),
        conjugate_form: ConjugateForm::Numeric,
        grid: DomainGrid { x_max, resolution: phi.grid.resolution },
        generalized: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn power(c: f64, a: f64) -> OrliczFunction {
        make_orlicz(CatalogKind::Power, &[c, a]).unwrap()
    }

    fn eml() -> OrliczFunction {
        make_orlicz(CatalogKind::ExpMinusLinear, &[]).unwrap()
    }

    #[test]
    fn catalog_values() {
        assert_eq!(half_square().eval(2.0), 2.0);
        assert_eq!(power(1.0, 3.0).eval(2.0), 8.0);
        assert_eq!(power(1.0, 3.0).eval(-2.0), 8.0);
        assert!(matches!(
            make_orlicz(CatalogKind::Power, &[1.0, 0.5]),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            make_orlicz(CatalogKind::ExpPower, &[0.0, 2.0]),
            Err(Error::InvalidParams(_))
        ));
        assert!(make_orlicz(CatalogKind::HalfSquare, &[1.0]).is_err());
    }

    #[test]
    fn custom_functions_are_audited() {
        let ok = OrliczFunction::custom("quartic", |x| x.powi(4), DomainGrid::default());
        assert!(ok.is_ok());
        let not_even = OrliczFunction::custom("odd", |x| x * x + x, DomainGrid::default());
        assert!(matches!(not_even, Err(Error::InvalidNFunction(_))));
        let concave =
            OrliczFunction::custom("sqrt", |x: f64| x.abs().sqrt(), DomainGrid::default());
        assert!(matches!(concave, Err(Error::InvalidNFunction(_))));
        let linear = OrliczFunction::custom("abs", |x: f64| x.abs(), DomainGrid::default());
        assert!(matches!(linear, Err(Error::InvalidNFunction(_))));
        let shifted = OrliczFunction::custom("shift", |x: f64| x * x + 1.0, DomainGrid::default());
        assert!(matches!(shifted, Err(Error::InvalidNFunction(_))));
    }

    #[test]
    fn closed_conjugates() {
        let hs = half_square().conjugate().unwrap();
        assert_eq!(hs.eval(2.0), 2.0);
        let c = eml().conjugate().unwrap();
        let x: f64 = 3.0;
        assert_relative_eq!(c.eval(x), (x + 1.0) * (x + 1.0).ln() - x, max_relative = 1e-14);
        let p = power(1.0, 3.0).conjugate().unwrap();
        // sup_y (xy − y³) at y = √(x/3)
        let c1 = 2.0 / (3.0 * 3f64.sqrt());
        assert_relative_eq!(p.eval(2.0), c1 * 2f64.powf(1.5), max_relative = 1e-14);
    }

    #[test]
    fn numeric_conjugate_matches_closed_forms() {
        for f in [half_square(), power(1.0, 3.0), eml(), power(2.0, 1.5)] {
            let closed = f.conjugate().unwrap();
            let numeric = f.numeric_conjugate().unwrap();
            for k in 0..=64 {
                let x = k as f64 * 0.5;
                let (a, b) = (closed.eval(x), numeric.eval(x));
                assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-300), "{:?} x={x}: {a} vs {b}", f.kind());
            }
        }
    }

    #[test]
    fn exp_power_has_numeric_conjugate() {
        let f = make_orlicz(CatalogKind::ExpPower, &[1.0, 2.0]).unwrap();
        assert_eq!(f.conjugate_form(), &ConjugateForm::Numeric);
        let c = f.conjugate().unwrap();
        // Young's inequality at a few points
        for &x in &[0.5, 1.0, 3.0, 10.0] {
            for &y in &[0.1, 0.7, 1.5, 2.0] {
                assert!(x * y <= f.eval(y) + c.eval(x) + 1e-10);
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let hs = half_square();
        assert_relative_eq!(inverse_at(&hs, 2.0, InverseSide::Direct).unwrap(), 2.0, max_relative = 1e-10);
        assert_relative_eq!(inverse_at(&hs, 8.0, InverseSide::Conjugate).unwrap(), 4.0, max_relative = 1e-10);
        assert_eq!(hs.inverse(0.0).unwrap(), 0.0);
        assert!(matches!(hs.inverse(1e9), Err(Error::OutOfRange { .. })));

        // independent root of e^x − x − 1 = 1 by bracketing Newton iterations
        let mut root: f64 = 1.0;
        for _ in 0..60 {
            root -= (root.exp() - root - 2.0) / (root.exp() - 1.0);
        }
        let x = inverse_at(&eml(), 1.0, InverseSide::Direct).unwrap();
        assert!((x - root).abs() < 1e-10 * root, "{x} vs {root}");
        assert!((x - 1.146_193_220_620_583).abs() < 1e-10);
    }

    #[test]
    fn delta2_examples() {
        let grid = default_delta2_grid();
        let m2 = delta2_modulus(&half_square(), 2.0, &grid).unwrap();
        assert_relative_eq!(m2, 1.0 - 1.0 / 2f64.sqrt(), max_relative = 1e-9);
        let m4 = delta2_modulus(&power(1.0, 3.0), 4.0, &grid).unwrap();
        assert_relative_eq!(m4, 1.0 - 0.25f64.powf(2.0 / 3.0), max_relative = 1e-9);
        assert!(matches!(
            delta2_modulus(&half_square(), 1.0, &grid),
            Err(Error::Delta2Fails { .. })
        ));
        assert!(delta2_modulus(&half_square(), 2.0, &[1.0]).is_err());
    }

    #[test]
    fn q_condition_examples() {
        let q = q_condition_constant(&half_square());
        assert_eq!(q.constant, 0.5);
        assert!(q.passes);
        assert!(!q_condition_constant(&power(1.0, 3.0)).passes);
        let e = q_condition_constant(&eml());
        assert!((e.constant - 0.5).abs() < 1e-4);
        assert!(e.passes);
    }

    #[test]
    fn certificate_records_passing_moduli() {
        let cert = ConditionCertificate::audit(&half_square(), &[1.0, 2.0, 4.0]);
        assert!(cert.has_delta2(2.0));
        assert!(cert.has_delta2(4.0));
        assert!(!cert.has_delta2(1.0));
        assert!(cert.delta2_modulus.iter().all(|&(_, m)| m > 0.0 && m < 1.0));
        assert!(cert.q_passes);
    }

    #[test]
    fn psi_transform_examples() {
        let psi = psi_square_transform(&half_square());
        assert_eq!(psi.eval(4.0), 2.0);
        assert!(psi.is_generalized());
        let psi4 = psi_square_transform(&power(1.0, 4.0));
        assert_relative_eq!(psi4.eval(3.0), 9.0, max_relative = 1e-12);
        let conj = psi.conjugate().unwrap();
        assert!(conj.eval(0.25).abs() < 1e-9);
        assert!(conj.eval(0.5).abs() < 1e-9);
        assert!(conj.eval(0.6) > 1e10);
    }

    #[test]
    fn standardize_splices_half_square() {
        let s = eml().standardize().unwrap();
        assert_eq!(s.eval(1.0), 0.5);
        let r2 = std::f64::consts::SQRT_2;
        assert_relative_eq!(s.eval(r2), 1.0, max_relative = 1e-12);
        assert!(s.eval(3.0) > s.eval(2.0));
    }

    #[test]
    fn conjugate_involution_on_catalog() {
        for f in [half_square(), power(1.0, 3.0), eml()] {
            let back = f.conjugate().unwrap().numeric_conjugate().unwrap();
            for k in 1..=64 {
                let x = k as f64 * 0.5;
                let (a, b) = (f.eval(x), back.eval(x));
                assert!((a - b).abs() <= 1e-6 * a, "{:?} x={x}: {a} vs {b}", f.kind());
            }
        }
    }

    proptest! {
        #[test]
        fn young_inequality(x in 0.0f64..30.0, y in 0.0f64..30.0, which in 0usize..3) {
            let f = [half_square(), power(1.0, 3.0), eml()][which].clone();
            let c = f.conjugate().unwrap();
            prop_assert!(x * y <= f.eval(y) + c.eval(x) + 1e-10 * (x * y).max(1.0));
        }

        #[test]
        fn inverse_round_trip(logy in -6.0f64..12.0, which in 0usize..3) {
            let f = [half_square(), power(1.0, 3.0), eml()][which].clone();
            let y = 10f64.powf(logy);
            let c = f.conjugate().unwrap();
            for g in [&f, &c] {
                if let Ok(x) = g.inverse(y) {
                    prop_assert!((g.eval(x) - y).abs() <= 1e-8 * y);
                }
            }
        }

        #[test]
        fn inverse_scaling(x in 0.01f64..100.0, beta in 1.0f64..8.0) {
            let f = power(1.0, 3.0);
            let up = f.inverse(beta * x).unwrap();
            prop_assert!(up <= beta * f.inverse(x).unwrap() + 1e-10);
            let down = f.inverse(x / beta).unwrap();
            prop_assert!(down >= f.inverse(x).unwrap() / beta - 1e-10);
        }

        #[test]
        fn superlinear_scaling_and_monotone_ratio(x in 0.001f64..40.0, beta in 1.0f64..4.0) {
            for f in [half_square(), power(2.0, 1.7), eml()] {
                prop_assert!(f.eval(beta * x) >= beta * f.eval(x) * (1.0 - 1e-12));
                prop_assert!(f.eval(beta * x) / (beta * x) >= f.eval(x) / x * (1.0 - 1e-12));
            }
        }
    }
}
