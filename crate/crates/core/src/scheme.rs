//! Growth-condition machinery: (a, r)-separation, growth audits and the
//! partition-building construction driven by a set functional `F`.
//!
//! Radii `r^{-j}` are taken relative to a unit: the scheme picks
//! `unit = r^{-j_0}` and then works with small relative depths, so widely
//! scaled inputs never push `r^{-j}` toward underflow.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{estimate_gamma, eval_gamma_partitions, ChainingContext, EstimateMode, FunctionalKind};
use crate::metric::{diameter_of, k_index, level_cap, maximal_packing, AdmissiblePartitions, FiniteMetricSpace, Partition};
use crate::rng::{stream_rng, streams};

const REL_TOL: f64 = 1e-12;
const MAX_SCHEME_LEVELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub r: u32,
    pub c_star: f64,
    pub p: f64,
}

impl GrowthParams {
    pub fn new(r: u32, c_star: f64, p: f64) -> Result<GrowthParams> {
        if r < 8 {
            return Err(Error::InvalidParams(format!("r must be ≥ 8, got {r}")));
        }
        if !(c_star > 0.0) {
            return Err(Error::InvalidParams(format!("c* must be positive, got {c_star}")));
        }
        k_index(p)?;
        Ok(GrowthParams { r, c_star, p })
    }

    /// `r = 16`, `c* = 1/8`.
    pub fn standard(p: f64) -> Result<GrowthParams> {
        GrowthParams::new(16, 0.125, p)
    }

    fn rf(&self) -> f64 {
        self.r as f64
    }

    /// First level the growth condition speaks about: `1 + ⌊log₂ p⌋`.
    pub fn first_level(&self) -> usize {
        1 + k_index(self.p).expect("validated p")
    }
}

/// A nonnegative functional on subsets of the index set.
pub trait SetFunctional: Send + Sync {
    fn tag(&self) -> String;
    /// `F(H)`; `subset` need not be sorted.
    fn eval(&self, subset: &[usize]) -> Result<f64>;
}

fn canonical(subset: &[usize]) -> Vec<usize> {
    let mut key = subset.to_vec();
    key.sort_unstable();
    key.dedup();
    key
}

/// Thread-safe memo keyed by the sorted subset.
#[derive(Debug, Default)]
struct Memo {
    store: RwLock<HashMap<Vec<usize>, f64>>,
}

impl Memo {
    fn get_or(&self, key: Vec<usize>, compute: impl FnOnce(&[usize]) -> Result<f64>) -> Result<f64> {
        if let Some(&v) = self.store.read().expect("memo lock").get(&key) {
            return Ok(v);
        }
        let v = compute(&key)?;
        self.store.write().expect("memo lock").insert(key, v);
        Ok(v)
    }
}

/// `F(H) = γ_{φ,p}(H, d)` or `γ̃_{φ,p}(H, d)` by the exact oracle; `F(∅) = 0`.
pub struct ExactGammaFunctional {
    space: Arc<FiniteMetricSpace>,
    ctx: Arc<ChainingContext>,
    p: f64,
    kind: FunctionalKind,
    memo: Memo,
}

impl ExactGammaFunctional {
    pub fn new(space: Arc<FiniteMetricSpace>, ctx: Arc<ChainingContext>, p: f64, kind: FunctionalKind) -> Result<Self> {
        k_index(p)?;
        if !matches!(kind, FunctionalKind::Gamma | FunctionalKind::GammaTilde) {
            return Err(Error::InvalidParams(format!("{kind:?} is not a γ functional")));
        }
        Ok(ExactGammaFunctional { space, ctx, p, kind, memo: Memo::default() })
    }
}

impl SetFunctional for ExactGammaFunctional {
    fn tag(&self) -> String {
        match self.kind {
            FunctionalKind::Gamma => "gamma".into(),
            _ => "gamma_tilde".into(),
        }
    }

    fn eval(&self, subset: &[usize]) -> Result<f64> {
        self.memo.get_or(canonical(subset), |key| {
            if key.is_empty() {
                return Ok(0.0);
            }
            let sub = self.space.subspace(key);
            match estimate_gamma(&sub, &self.ctx, self.p, self.kind, EstimateMode::Exact) {
                Ok(v) => Ok(v.value),
                Err(Error::ExactTooLarge { n, cap }) => Err(Error::OracleUnavailable(format!(
                    "subset of {n} points exceeds the exact cap {cap}"
                ))),
                Err(e) => Err(e),
            }
        })
    }
}

/// A caller-supplied functional, memoised.
pub struct CustomFunctional<F> {
    name: String,
    f: F,
    memo: Memo,
}

impl<F> CustomFunctional<F>
where
    F: Fn(&[usize]) -> f64 + Send + Sync,
{
    pub fn new(name: &str, f: F) -> Self {
        CustomFunctional { name: name.to_string(), f, memo: Memo::default() }
    }
}

impl<F> SetFunctional for CustomFunctional<F>
where
    F: Fn(&[usize]) -> f64 + Send + Sync,
{
    fn tag(&self) -> String {
        format!("custom:{}", self.name)
    }

    fn eval(&self, subset: &[usize]) -> Result<f64> {
        self.memo.get_or(canonical(subset), |key| Ok((self.f)(key)))
    }
}

/// Monotonicity audit on random increasing chains `∅ ⊂ {t_1} ⊂ {t_1,t_2} ⊂ …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneAudit {
    pub chains: usize,
    pub comparisons: usize,
    pub violations: Vec<(Vec<usize>, usize, f64, f64)>,
}

pub fn audit_monotone(f: &dyn SetFunctional, n_points: usize, chains: usize, seed: u64) -> Result<MonotoneAudit> {
    let mut violations = Vec::new();
    let mut comparisons = 0;
    for c in 0..chains {
        let mut rng = stream_rng(seed, streams::INSTANCE, c as u64);
        let mut order: Vec<usize> = (0..n_points).collect();
        for i in (1..n_points).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut prev = f.eval(&[])?;
        for k in 1..=n_points {
            let v = f.eval(&order[..k])?;
            if v < 0.0 || v < prev - REL_TOL * prev.abs().max(1.0) {
                violations.push((order[..k - 1].to_vec(), order[k - 1], prev, v));
            }
            comparisons += 1;
            prev = v;
        }
    }
    Ok(MonotoneAudit { chains, comparisons, violations })
}

/// `H_ℓ ⊆ B(t_ℓ, 2a/r)` for every `ℓ` and `a ≤ d(t_ℓ, t_ℓ') ≤ 2ar` for `ℓ ≠ ℓ'`.
pub fn check_separated(
    space: &FiniteMetricSpace,
    subsets: &[Vec<usize>],
    centers: &[usize],
    a: f64,
    params: &GrowthParams,
) -> bool {
    let m = subsets.len();
    if m < 2 || centers.len() != m || !(a > 0.0) {
        return false;
    }
    let n = space.n_points();
    if centers.iter().chain(subsets.iter().flatten()).any(|&t| t >= n) {
        return false;
    }
    let radius = 2.0 * a / params.rf();
    let slack = |x: f64| x * (1.0 + REL_TOL);
    for (h, &c) in subsets.iter().zip(centers) {
        if h.iter().any(|&t| space.d(c, t) > slack(radius)) {
            return false;
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            let d = space.d(centers[i], centers[j]);
            if d < a * (1.0 - REL_TOL) || d > slack(2.0 * a * params.rf()) {
                return false;
            }
        }
    }
    true
}

/// One test configuration for the growth condition at level `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedFamily {
    pub n: usize,
    pub a: f64,
    pub subsets: Vec<Vec<usize>>,
    pub centers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthInstanceResult {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthAuditReport {
    pub params: GrowthParams,
    pub functional: String,
    pub evaluated: Vec<GrowthInstanceResult>,
    /// Instances rejected before evaluation, with the reason.
    pub rejected: Vec<(usize, String)>,
    pub violations: usize,
}

/// Checks `F(∪H_ℓ) ≥ c*·a·φ*^{-1}(2^n) + min_ℓ F(H_ℓ)` on every valid instance.
pub fn growth_condition_audit(
    space: &FiniteMetricSpace,
    f: &dyn SetFunctional,
    params: &GrowthParams,
    ctx: &ChainingContext,
    instances: &[SeparatedFamily],
) -> Result<GrowthAuditReport> {
    let mut evaluated = Vec::new();
    let mut rejected = Vec::new();
    for (index, inst) in instances.iter().enumerate() {
        if inst.n < params.first_level() {
            rejected.push((index, format!("level {} below 1 + k_p = {}", inst.n, params.first_level())));
            continue;
        }
        let m = level_cap(inst.n);
        if inst.subsets.len() != m {
            rejected.push((index, format!("{} sets, expected m = {m}", inst.subsets.len())));
            continue;
        }
        if !check_separated(space, &inst.subsets, &inst.centers, inst.a, params) {
            rejected.push((index, "not (a, r)-separated".into()));
            continue;
        }
        let union: Vec<usize> = inst.subsets.iter().flatten().copied().collect();
        let lhs = f.eval(&union)?;
        let mut min_part = f64::INFINITY;
        for h in &inst.subsets {
            min_part = min_part.min(f.eval(h)?);
        }
        let rhs = params.c_star * inst.a * ctx.weight(inst.n) + min_part;
        let margin = lhs - rhs;
        evaluated.push(GrowthInstanceResult {
            index,
            lhs,
            rhs,
            margin,
            passed: margin >= -REL_TOL * rhs.abs().max(1.0),
        });
    }
    let violations = evaluated.iter().filter(|r| !r.passed).count();
    Ok(GrowthAuditReport { params: *params, functional: f.tag(), evaluated, rejected, violations })
}

/// Random planar `(a, r)`-separated families at level `n = 1 + k_p` (`m = 4`
/// sets for `p < 2`), each cluster within `2a/r` of its centre and at most
/// `max_points` points overall. Returns the space together with the family.
pub fn generate_separated_families(
    params: &GrowthParams,
    count: usize,
    max_points: usize,
    seed: u64,
) -> Result<Vec<(FiniteMetricSpace, SeparatedFamily)>> {
    let n = params.first_level();
    let m = level_cap(n);
    if m > max_points {
        return Err(Error::InvalidParams(format!(
            "level {n} needs {m} centres but only {max_points} points are allowed"
        )));
    }
    let rf = params.rf();
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rng = stream_rng(seed, streams::INSTANCE, idx as u64);
        let a = 0.5 + 1.5 * rng.random::<f64>();
        let mut centres: Vec<[f64; 2]> = Vec::with_capacity(m);
        let side = 3.0 * a;
        while centres.len() < m {
            let c = [side * rng.random::<f64>(), side * rng.random::<f64>()];
            if centres.iter().all(|q| ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2)).sqrt() >= a * (1.0 + 1e-9)) {
                centres.push(c);
            }
        }
        let mut points: Vec<Vec<f64>> = centres.iter().map(|c| c.to_vec()).collect();
        let mut subsets: Vec<Vec<usize>> = (0..m).map(|l| vec![l]).collect();
        let extra = rng.random_range(0..=max_points - m);
        for _ in 0..extra {
            let l = rng.random_range(0..m);
            let rho = 0.99 * (2.0 * a / rf) * rng.random::<f64>();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            points.push(vec![centres[l][0] + rho * theta.cos(), centres[l][1] + rho * theta.sin()]);
            subsets[l].push(points.len() - 1);
        }
        // Occasionally drop the centre from its own set: only the ball condition is required.
        for (l, h) in subsets.iter_mut().enumerate() {
            if h.len() > 1 && rng.random::<f64>() < 0.25 {
                h.retain(|&t| t != l);
            }
        }
        let space = FiniteMetricSpace::from_vectors(points)?;
        out.push((space, SeparatedFamily { n, a, subsets, centers: (0..m).collect() }));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellTag {
    /// `Δ(A) ≤ 2 r^{-j-1}`.
    Small,
    /// Every `t ∈ A` has `F(B ∩ B(t, 2r^{-j-2})) ≤ F(B) − c* φ*^{-1}(2^n) r^{-j-1}`.
    Large,
    /// Passed through unchanged at a level below `1 + k_p`.
    Carried,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedCell {
    pub points: Vec<usize>,
    pub tag: CellTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub cells: Vec<TaggedCell>,
    /// The `r^{-j-1}`-separated points extracted from `I`.
    pub packing: Vec<usize>,
}

/// `unit·r^{-j}`.
fn radius(unit: f64, r: f64, j: i32) -> f64 {
    unit * r.powi(-j)
}

/// The splitting step: cells around a maximal `r^{-j-1}`-separated packing
/// of `I`, plus the remainder `B \ I`. Radii are `unit·r^{-j}`.
#[allow(clippy::too_many_arguments)]
pub fn partition_step(
    space: &FiniteMetricSpace,
    b: &[usize],
    f: &dyn SetFunctional,
    j: i32,
    unit: f64,
    n: usize,
    params: &GrowthParams,
    ctx: &ChainingContext,
) -> Result<StepOutcome> {
    if b.is_empty() {
        return Err(Error::EmptySubset);
    }
    let r = params.rf();
    let diam = diameter_of(space, b);
    if diam > 2.0 * radius(unit, r, j) * (1.0 + REL_TOL) {
        return Err(Error::Precondition(format!(
            "Δ(B) = {diam} exceeds 2r^(-j) = {}",
            2.0 * radius(unit, r, j)
        )));
    }
    let m = level_cap(n);
    let f_b = f.eval(b)?;
    let drop = params.c_star * ctx.weight(n) * radius(unit, r, j + 1);
    let small_ball = 2.0 * radius(unit, r, j + 2);
    let mut in_i = Vec::new();
    let mut rest = Vec::new();
    for &t in b {
        let local = f.eval(&space.ball_in(t, small_ball, b))?;
        if local > f_b - drop {
            in_i.push(t);
        } else {
            rest.push(t);
        }
    }
    let sep = radius(unit, r, j + 1);
    let packing = maximal_packing(space, &in_i, sep, m);
    if packing.len() >= m {
        return Err(Error::PackingTooLarge { level: n, m, witness: packing });
    }
    let mut taken = vec![false; in_i.len()];
    let mut cells = Vec::new();
    for &c in &packing {
        let mut cell = Vec::new();
        for (k, &t) in in_i.iter().enumerate() {
            if !taken[k] && space.d(c, t) <= sep {
                taken[k] = true;
                cell.push(t);
            }
        }
        if !cell.is_empty() {
            cells.push(TaggedCell { points: cell, tag: CellTag::Small });
        }
    }
    debug_assert!(taken.iter().all(|&x| x), "maximal packing covers I");
    if !rest.is_empty() {
        cells.push(TaggedCell { points: rest, tag: CellTag::Large });
    }
    Ok(StepOutcome { cells, packing })
}

/// Post-hoc re-check of a step's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCheck {
    pub is_partition: bool,
    pub small_cells_ok: bool,
    pub large_cells_ok: bool,
}

impl StepCheck {
    pub fn ok(&self) -> bool {
        self.is_partition && self.small_cells_ok && self.large_cells_ok
    }
}

#[allow(clippy::too_many_arguments)]
pub fn verify_step(
    space: &FiniteMetricSpace,
    b: &[usize],
    f: &dyn SetFunctional,
    j: i32,
    unit: f64,
    n: usize,
    params: &GrowthParams,
    ctx: &ChainingContext,
    outcome: &StepOutcome,
) -> Result<StepCheck> {
    let r = params.rf();
    let mut all: Vec<usize> = outcome.cells.iter().flat_map(|c| c.points.iter().copied()).collect();
    let total = all.len();
    all.sort_unstable();
    all.dedup();
    let is_partition = all.len() == total && all == canonical(b);
    let small_limit = 2.0 * radius(unit, r, j + 1) * (1.0 + REL_TOL);
    let small_cells_ok = outcome
        .cells
        .iter()
        .filter(|c| c.tag == CellTag::Small)
        .all(|c| diameter_of(space, &c.points) <= small_limit);
    let f_b = f.eval(b)?;
    let target = f_b - params.c_star * ctx.weight(n) * radius(unit, r, j + 1);
    let small_ball = 2.0 * radius(unit, r, j + 2);
    let mut large_cells_ok = true;
    for c in outcome.cells.iter().filter(|c| c.tag == CellTag::Large) {
        for &t in &c.points {
            if f.eval(&space.ball_in(t, small_ball, b))? > target + REL_TOL * f_b.abs().max(1.0) {
                large_cells_ok = false;
            }
        }
    }
    Ok(StepCheck { is_partition, small_cells_ok, large_cells_ok })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub partitions: AdmissiblePartitions,
    /// Tag of every cell at every level (level 0 is the root).
    pub tags: Vec<Vec<CellTag>>,
    pub value: f64,
    pub f_total: f64,
    pub diameter: f64,
    /// `value / (F(T) + Δ(T))`, the empirical `Lr/c*`-type constant.
    pub ratio: f64,
    pub j0: i32,
    /// Steps whose post-hoc re-check failed.
    pub failed_checks: usize,
    pub steps_checked: usize,
}

/// Runs the recursion from `A_0 = {T}` until every cell is a singleton.
pub fn build_partition_scheme(
    space: &FiniteMetricSpace,
    f: &dyn SetFunctional,
    params: &GrowthParams,
    ctx: &ChainingContext,
) -> Result<SchemeResult> {
    let n_points = space.n_points();
    let all: Vec<usize> = (0..n_points).collect();
    let diam = diameter_of(space, &all);
    let f_total = f.eval(&all)?;
    let r = params.rf();
    if n_points == 1 || diam == 0.0 {
        let mut levels = vec![vec![all.clone()]];
        if n_points > 1 {
            levels.push(all.iter().map(|&t| vec![t]).collect());
        }
        let partitions = AdmissiblePartitions { levels };
        let value = eval_gamma_partitions(space, ctx, params.p, &partitions)?;
        let tags = partitions.levels.iter().map(|l| vec![CellTag::Carried; l.len()]).collect();
        return Ok(SchemeResult {
            partitions,
            tags,
            value,
            f_total,
            diameter: diam,
            ratio: 0.0,
            j0: 0,
            failed_checks: 0,
            steps_checked: 0,
        });
    }
    let mut j0 = ((2.0 / diam).ln() / r.ln()).floor() as i32;
    while diam > 2.0 * r.powi(-j0) {
        j0 -= 1;
    }
    while diam <= 2.0 * r.powi(-(j0 + 1)) {
        j0 += 1;
    }
    let unit = r.powi(-j0);
    let first = params.first_level();
    // (cell, relative depth j − j0)
    let mut current: Vec<(Vec<usize>, i32)> = vec![(all.clone(), 0)];
    let mut levels: Vec<Partition> = vec![vec![all]];
    let mut tags: Vec<Vec<CellTag>> = vec![vec![CellTag::Carried]];
    let mut failed_checks = 0;
    let mut steps_checked = 0;
    let mut n = 0;
    while current.iter().any(|(c, _)| c.len() > 1) {
        if n >= MAX_SCHEME_LEVELS {
            return Err(Error::NotAdmissible("scheme did not reach singletons".into()));
        }
        let mut next = Vec::new();
        let mut next_tags = Vec::new();
        for (cell, depth) in &current {
            if n < first {
                next.push((cell.clone(), *depth));
                next_tags.push(CellTag::Carried);
                continue;
            }
            let outcome = partition_step(space, cell, f, *depth, unit, n, params, ctx)?;
            let check = verify_step(space, cell, f, *depth, unit, n, params, ctx, &outcome)?;
            steps_checked += 1;
            if !check.ok() {
                failed_checks += 1;
            }
            for c in outcome.cells {
                let d = if c.tag == CellTag::Small { depth + 1 } else { *depth };
                next_tags.push(c.tag);
                next.push((c.points, d));
            }
        }
        levels.push(next.iter().map(|(c, _)| c.clone()).collect());
        tags.push(next_tags);
        current = next;
        n += 1;
    }
    let partitions = AdmissiblePartitions { levels };
    partitions.validate(n_points)?;
    let value = eval_gamma_partitions(space, ctx, params.p, &partitions)?;
    Ok(SchemeResult {
        partitions,
        tags,
        value,
        f_total,
        diameter: diam,
        ratio: value / (f_total + diam),
        j0,
        failed_checks,
        steps_checked,
    })
}
