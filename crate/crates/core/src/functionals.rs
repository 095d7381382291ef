//! Chaining functionals `γ_{φ,p}` (partitions), `γ̃_{φ,p}` (nets), the
//! Dudley-type entropy integral and the finite-cardinality bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{
    build_admissible, covering_number, diameter_of, entropy_number, for_each_combination, k_index,
    level_cap, Admissible, AdmissibleForm, AdmissibleNets, AdmissiblePartitions, CoveringMode,
    FiniteMetricSpace, Partition, EXHAUSTIVE_COVER_CAP,
};
use crate::orlicz::{default_delta2_grid, delta2_modulus, OrliczFunction};

/// Exact oracles enumerate every admissible sequence; only tiny spaces.
pub const EXACT_GAMMA_CAP: usize = 8;
pub const LOCAL_SEARCH_BUDGET: usize = 1000;
const WEIGHT_LEVELS: usize = 25;

/// `φ`, its conjugate, the chaining weights `φ*^{-1}(2^n)` and the Δ2 audit
/// at `b = 2`, computed once per function.
#[derive(Debug, Clone)]
pub struct ChainingContext {
    phi: OrliczFunction,
    conj: OrliczFunction,
    weights: Vec<f64>,
    delta2: Option<f64>,
}

impl ChainingContext {
    pub fn new(phi: &OrliczFunction) -> Result<ChainingContext> {
        let conj = phi.conjugate()?.with_range((WEIGHT_LEVELS as f64).exp2());
        let weights = (0..WEIGHT_LEVELS)
            .map(|n| conj.inverse((n as f64).exp2()))
            .collect::<Result<Vec<f64>>>()?;
        let delta2 = delta2_modulus(phi, 2.0, &default_delta2_grid()).ok();
        Ok(ChainingContext { phi: phi.clone(), conj, weights, delta2 })
    }

    pub fn phi(&self) -> &OrliczFunction {
        &self.phi
    }

    pub fn conjugate(&self) -> &OrliczFunction {
        &self.conj
    }

    /// `φ*^{-1}(2^n)`.
    pub fn weight(&self, n: usize) -> f64 {
        self.weights[n.min(WEIGHT_LEVELS - 1)]
    }

    /// `φ*^{-1}(y)`.
    pub fn conj_inverse(&self, y: f64) -> Result<f64> {
        self.conj.inverse(y)
    }

    /// `M_2` when the Δ2 audit at `b = 2` passed.
    pub fn delta2_modulus(&self) -> Option<f64> {
        self.delta2
    }

    pub fn require_delta2(&self) -> Result<()> {
        self.delta2.map(|_| ()).ok_or(Error::Delta2Missing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Gamma,
    GammaTilde,
    Dudley,
    FiniteCard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    ExactOracle,
    HeuristicUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainingValue {
    pub value: f64,
    pub kind: FunctionalKind,
    pub p: f64,
    pub exactness: Exactness,
    pub witness: Option<Admissible>,
}

/// `sup_t Σ_{n≥k_p} φ*^{-1}(2^n) d(t, T_n)`.
pub fn eval_gamma_nets(
    space: &FiniteMetricSpace,
    ctx: &ChainingContext,
    p: f64,
    nets: &AdmissibleNets,
) -> Result<f64> {
    let k_p = k_index(p)?;
    let n_points = space.n_points();
    nets.validate(n_points)?;
    if nets.k_start > k_p {
        return Err(Error::NotAdmissible(format!(
            "nets start at level {} but the sum starts at k_p = {k_p}",
            nets.k_start
        )));
    }
    let last = &nets.levels.last().ok_or_else(|| Error::NotAdmissible("no levels".into()))?.1;
    if (0..n_points).any(|t| space.dist_to_set(t, last) > 0.0) {
        return Err(Error::NotAdmissible("last net does not cover every point".into()));
    }
    let levels: Vec<(usize, &[usize])> = nets
        .levels
        .iter()
        .filter(|(n, _)| *n >= k_p)
        .map(|(n, s)| (*n, s.as_slice()))
        .collect();
    Ok(nets_objective(space, ctx, &levels))
}

fn nets_objective(space: &FiniteMetricSpace, ctx: &ChainingContext, levels: &[(usize, &[usize])]) -> f64 {
    (0..space.n_points())
        .map(|t| levels.iter().map(|&(n, set)| ctx.weight(n) * space.dist_to_set(t, set)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `sup_t Σ_{n≥k_p} φ*^{-1}(2^n) Δ(A_n(t))`.
pub fn eval_gamma_partitions(
    space: &FiniteMetricSpace,
    ctx: &ChainingContext,
    p: f64,
    parts: &AdmissiblePartitions,
) -> Result<f64> {
    let k_p = k_index(p)?;
    parts.validate(space.n_points())?;
    if parts.levels.last().is_some_and(|l| l.iter().any(|c| c.len() > 1)) {
        return Err(Error::NotAdmissible("last partition is not into singletons".into()));
    }
    Ok(partitions_objective(space, ctx, k_p, &parts.levels))
}

fn partitions_objective(space: &FiniteMetricSpace, ctx: &ChainingContext, k_p: usize, levels: &[Partition]) -> f64 {
    let mut per_point = vec![0.0; space.n_points()];
    for (n, part) in levels.iter().enumerate().skip(k_p) {
        for cell in part {
            let term = ctx.weight(n) * diameter_of(space, cell);
            for &t in cell {
                per_point[t] += term;
            }
        }
    }
    per_point.into_iter().fold(0.0, f64::max)
}

/// Exact (oracle) or heuristic value of `γ` or `γ̃`.
pub fn estimate_gamma(
    space: &FiniteMetricSpace,
    ctx: &ChainingContext,
    p: f64,
    kind: FunctionalKind,
    mode: EstimateMode,
) -> Result<ChainingValue> {
    let k_p = k_index(p)?;
    let (value, witness, exactness) = match (kind, mode) {
        (FunctionalKind::GammaTilde, EstimateMode::Exact) => {
            check_exact_size(space)?;
            let (v, w) = exact_gamma_tilde(space, ctx, k_p);
            (v, Admissible::Nets(w), Exactness::ExactOracle)
        }
        (FunctionalKind::Gamma, EstimateMode::Exact) => {
            check_exact_size(space)?;
            let (v, w) = exact_gamma(space, ctx, k_p);
            (v, Admissible::Partitions(w), Exactness::ExactOracle)
        }
        (FunctionalKind::GammaTilde, EstimateMode::Heuristic) => {
            let Admissible::Nets(nets) = build_admissible(space, p, AdmissibleForm::Nets)? else {
                unreachable!("nets requested")
            };
            let nets = improve_nets(space, ctx, nets);
            let v = eval_gamma_nets(space, ctx, p, &nets)?;
            (v, Admissible::Nets(nets), Exactness::HeuristicUpper)
        }
        (FunctionalKind::Gamma, EstimateMode::Heuristic) => {
            let Admissible::Partitions(parts) = build_admissible(space, p, AdmissibleForm::Partitions)? else {
                unreachable!("partitions requested")
            };
            let parts = improve_partitions(space, ctx, k_p, parts);
            let v = eval_gamma_partitions(space, ctx, p, &parts)?;
            (v, Admissible::Partitions(parts), Exactness::HeuristicUpper)
        }
        (other, _) => {
            return Err(Error::InvalidParams(format!("estimate_gamma does not compute {other:?}")))
        }
    };
    Ok(ChainingValue { value, kind, p, exactness, witness: Some(witness) })
}

fn check_exact_size(space: &FiniteMetricSpace) -> Result<()> {
    let n = space.n_points();
    if n > EXACT_GAMMA_CAP {
        return Err(Error::ExactTooLarge { n, cap: EXACT_GAMMA_CAP });
    }
    Ok(())
}

/// Levels `n ≥ k_p` at which `card ≤ 2^{2^n}` actually constrains (`2^{2^n} < N`).
fn constrained_levels(k_p: usize, n_points: usize) -> Vec<usize> {
    (k_p..).take_while(|&n| level_cap(n) < n_points).collect()
}

fn exact_gamma_tilde(space: &FiniteMetricSpace, ctx: &ChainingContext, k_p: usize) -> (f64, AdmissibleNets) {
    let n_points = space.n_points();
    let levels = constrained_levels(k_p, n_points);
    // Larger nets never hurt, so each constrained level uses exactly 2^{2^n} points.
    let choices: Vec<Vec<Vec<usize>>> = levels
        .iter()
        .map(|&n| {
            let mut sets = Vec::new();
            for_each_combination(n_points, level_cap(n), &mut |c| sets.push(c.to_vec()));
            sets
        })
        .collect();
    let mut pick = vec![0usize; levels.len()];
    let mut best = (f64::INFINITY, pick.clone());
    loop {
        let chosen: Vec<(usize, &[usize])> =
            levels.iter().zip(&pick).enumerate().map(|(i, (&n, &c))| (n, choices[i][c].as_slice())).collect();
        let v = nets_objective(space, ctx, &chosen);
        if v < best.0 {
            best = (v, pick.clone());
        }
        if !advance(&mut pick, &choices.iter().map(Vec::len).collect::<Vec<_>>()) {
            break;
        }
    }
    let mut net_levels: Vec<(usize, Vec<usize>)> =
        levels.iter().zip(&best.1).enumerate().map(|(i, (&n, &c))| (n, choices[i][c].clone())).collect();
    net_levels.push((k_p + levels.len(), (0..n_points).collect()));
    (best.0, AdmissibleNets { k_start: k_p, levels: net_levels })
}

/// Odometer increment; false after the last combination.
fn advance(pick: &mut [usize], sizes: &[usize]) -> bool {
    for i in (0..pick.len()).rev() {
        pick[i] += 1;
        if pick[i] < sizes[i] {
            return true;
        }
        pick[i] = 0;
    }
    false
}

fn exact_gamma(space: &FiniteMetricSpace, ctx: &ChainingContext, k_p: usize) -> (f64, AdmissiblePartitions) {
    let n_points = space.n_points();
    // Levels 1.. with 2^{2^n} < N are free; the first level with room for all
    // singletons ends the chain.
    let free: Vec<usize> = (1..).take_while(|&n| level_cap(n) < n_points).collect();
    let root: Partition = vec![(0..n_points).collect()];
    let mut best: (f64, Vec<Partition>) = (f64::INFINITY, Vec::new());
    let mut chain = vec![root];
    search_chains(space, ctx, k_p, &free, &mut chain, &mut best);
    let mut levels = best.1;
    if levels.last().is_some_and(|l| l.iter().any(|c| c.len() > 1)) {
        levels.push((0..n_points).map(|t| vec![t]).collect());
    }
    (best.0, AdmissiblePartitions { levels })
}

fn search_chains(
    space: &FiniteMetricSpace,
    ctx: &ChainingContext,
    k_p: usize,
    free: &[usize],
    chain: &mut Vec<Partition>,
    best: &mut (f64, Vec<Partition>),
) {
    let depth = chain.len();
    if depth > free.len() {
        let v = partitions_objective(space, ctx, k_p, chain);
        if v < best.0 {
            *best = (v, chain.clone());
        }
        return;
    }
    let cap = level_cap(free[depth - 1]);
    let parent = chain[depth - 1].clone();
    for_each_refinement(&parent, cap, &mut |next| {
        chain.push(next.to_vec());
        search_chains(space, ctx, k_p, free, chain, best);
        chain.pop();
    });
}

/// Every refinement of `parent` into at most `cap` cells.
fn for_each_refinement(parent: &Partition, cap: usize, f: &mut dyn FnMut(&Partition)) {
    fn rec(parent: &Partition, i: usize, cap: usize, acc: &mut Partition, f: &mut dyn FnMut(&Partition)) {
        if i == parent.len() {
            f(acc);
            return;
        }
        let room = cap - acc.len() - (parent.len() - i - 1);
        for_each_set_partition(&parent[i], room, &mut |blocks| {
            let before = acc.len();
            acc.extend(blocks.iter().cloned());
            rec(parent, i + 1, cap, acc, f);
            acc.truncate(before);
        });
    }
    if parent.len() > cap {
        return;
    }
    rec(parent, 0, cap, &mut Vec::new(), f);
}

/// Set partitions of `items` into at most `max_blocks` blocks (restricted growth strings).
fn for_each_set_partition(items: &[usize], max_blocks: usize, f: &mut dyn FnMut(&[Vec<usize>])) {
    fn rec(items: &[usize], i: usize, max_blocks: usize, blocks: &mut Vec<Vec<usize>>, f: &mut dyn FnMut(&[Vec<usize>])) {
        if i == items.len() {
            f(blocks);
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(items[i]);
            rec(items, i + 1, max_blocks, blocks, f);
            blocks[b].pop();
        }
        if blocks.len() < max_blocks {
            blocks.push(vec![items[i]]);
            rec(items, i + 1, max_blocks, blocks, f);
            blocks.pop();
        }
    }
    rec(items, 0, max_blocks, &mut Vec::new(), f);
}

/// First-improvement single-point swaps within each constrained net.
fn improve_nets(space: &FiniteMetricSpace, ctx: &ChainingContext, mut nets: AdmissibleNets) -> AdmissibleNets {
    let n_points = space.n_points();
    let objective = |nets: &AdmissibleNets| {
        let lv: Vec<(usize, &[usize])> = nets.levels.iter().map(|(n, s)| (*n, s.as_slice())).collect();
        nets_objective(space, ctx, &lv)
    };
    let mut current = objective(&nets);
    let mut accepted = 0;
    'search: while accepted < LOCAL_SEARCH_BUDGET {
        for li in 0..nets.levels.len() {
            if nets.levels[li].1.len() >= n_points {
                continue;
            }
            for pos in 0..nets.levels[li].1.len() {
                for cand in 0..n_points {
                    if nets.levels[li].1.contains(&cand) {
                        continue;
                    }
                    let old = std::mem::replace(&mut nets.levels[li].1[pos], cand);
                    let v = objective(&nets);
                    if v < current * (1.0 - 1e-12) {
                        current = v;
                        accepted += 1;
                        continue 'search;
                    }
                    nets.levels[li].1[pos] = old;
                }
            }
        }
        break;
    }
    nets
}

/// First-improvement moves of one point into a sibling cell; the point then
/// joins, at every deeper level, the child of its new cell with the smallest
/// resulting diameter.
fn improve_partitions(
    space: &FiniteMetricSpace,
    ctx: &ChainingContext,
    k_p: usize,
    mut parts: AdmissiblePartitions,
) -> AdmissiblePartitions {
    let n_points = space.n_points();
    let mut current = partitions_objective(space, ctx, k_p, &parts.levels);
    let mut accepted = 0;
    'search: while accepted < LOCAL_SEARCH_BUDGET {
        for level in 1..parts.levels.len() {
            let parent_owner = parts.owners(level - 1, n_points);
            let owner = parts.owners(level, n_points);
            for t in 0..n_points {
                let from = owner[t];
                for to in 0..parts.levels[level].len() {
                    if to == from || parent_owner[parts.levels[level][to][0]] != parent_owner[t] {
                        continue;
                    }
                    let candidate = move_point(space, &parts, level, t, to);
                    let v = partitions_objective(space, ctx, k_p, &candidate.levels);
                    if v < current * (1.0 - 1e-12) {
                        current = v;
                        parts = candidate;
                        accepted += 1;
                        continue 'search;
                    }
                }
            }
        }
        break;
    }
    parts
}

fn move_point(
    space: &FiniteMetricSpace,
    parts: &AdmissiblePartitions,
    level: usize,
    t: usize,
    to: usize,
) -> AdmissiblePartitions {
    let mut levels = parts.levels.clone();
    let last = levels.len() - 1;
    for part in levels.iter_mut().skip(level) {
        for cell in part.iter_mut() {
            cell.retain(|&s| s != t);
        }
    }
    let mut host = levels[level][to].clone();
    levels[level][to].push(t);
    levels[level][to].sort_unstable();
    for (n, part) in levels.iter_mut().enumerate().skip(level + 1) {
        if n == last {
            part.push(vec![t]);
            break;
        }
        let child = part
            .iter()
            .enumerate()
            .filter(|(_, cell)| !cell.is_empty() && host.contains(&cell[0]))
            .map(|(c, cell)| {
                let mut grown = cell.clone();
                grown.push(t);
                (c, diameter_of(space, &grown))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c)
            .expect("every cell has children at deeper levels");
        host = part[child].clone();
        part[child].push(t);
        part[child].sort_unstable();
    }
    for part in levels.iter_mut() {
        part.retain(|c| !c.is_empty());
        part.sort();
    }
    AdmissiblePartitions { levels }
}

/// Dudley value with a flag telling whether every covering number used was exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DudleyValue {
    pub value: f64,
    pub exact: bool,
}

/// `∫_0^{e_{k_p}} φ*^{-1}(ln N(T,d,ε)) dε`, summed exactly over the steps of `N`.
pub fn dudley_bound(space: &FiniteMetricSpace, ctx: &ChainingContext, p: f64) -> Result<DudleyValue> {
    ctx.require_delta2()?;
    let k_p = k_index(p)?;
    let top = entropy_number(space, k_p);
    let n = space.n_points();
    let (mode, mut exact) = if n <= EXHAUSTIVE_COVER_CAP {
        (CoveringMode::Exact, top.exact)
    } else {
        (CoveringMode::Greedy, false)
    };
    if top.value <= 0.0 {
        return Ok(DudleyValue { value: 0.0, exact });
    }
    let mut steps = vec![0.0];
    steps.extend(space.distinct_distances().into_iter().filter(|&d| d < top.value));
    steps.push(top.value);
    let mut value = 0.0;
    for w in steps.windows(2) {
        let (a, b) = (w[0], w[1]);
        // N is constant on [a, b); at a = 0 every ball is a single point.
        let count = if a == 0.0 { n } else { covering_number(space, a, mode)? };
        if count > 1 {
            value += (b - a) * ctx.conj_inverse((count as f64).ln())?;
        }
    }
    exact &= mode == CoveringMode::Exact;
    Ok(DudleyValue { value, exact })
}

/// `Δ(T) φ*^{-1}(ln card T)`.
pub fn finite_cardinality_bound(space: &FiniteMetricSpace, ctx: &ChainingContext) -> Result<f64> {
    ctx.require_delta2()?;
    let n = space.n_points();
    if n < 2 {
        return Ok(0.0);
    }
    let idx: Vec<usize> = (0..n).collect();
    Ok(diameter_of(space, &idx) * ctx.conj_inverse((n as f64).ln())?)
}
