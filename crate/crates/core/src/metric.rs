//! Finite metric spaces, covering and entropy numbers, nets and admissible
//! sequences.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

/// Largest space for which [`CoveringMode::Exact`] is available.
pub const EXACT_COVER_CAP: usize = 64;
/// Up to this size exact covering numbers use plain subset enumeration.
pub const EXHAUSTIVE_COVER_CAP: usize = 16;
/// Exact entropy numbers are available up to this size.
pub const EXACT_ENTROPY_CAP: usize = 16;
/// Spaces up to this size get every triangle inequality checked.
pub const TRIANGLE_AUDIT_CAP: usize = 512;
const TRIANGLE_SAMPLES: usize = 1_000_000;
const TRIANGLE_TOL: f64 = 1e-9;

/// `2^{2^n}`, saturating at `usize::MAX`.
pub fn level_cap(n: usize) -> usize {
    if n >= 6 {
        return usize::MAX;
    }
    let bits = 1u32 << n;
    if bits >= usize::BITS {
        usize::MAX
    } else {
        1usize << bits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSource {
    Vectors { points: Vec<Vec<f64>>, metric: String },
    Matrix,
}

/// A finite index set `{0, …, n−1}` with a validated distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>,
    source: MetricSource,
}

impl FiniteMetricSpace {
    /// Euclidean distances between the given vectors.
    pub fn from_vectors(points: Vec<Vec<f64>>) -> Result<FiniteMetricSpace> {
        Self::from_vectors_with(points, "euclidean", crate::linalg::dist2)
    }

    /// Distances `metric(x_i, x_j)` under a caller-supplied metric, validated
    /// like an explicit matrix.
    pub fn from_vectors_with<F>(points: Vec<Vec<f64>>, name: &str, metric: F) -> Result<FiniteMetricSpace>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Sync,
    {
        if points.is_empty() {
            return Err(Error::InvalidMetric("no points".into()));
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidMetric(format!(
                    "row {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if let Some(j) = p.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidMetric(format!("row {i}, column {j} is not finite")));
            }
        }
        let n = points.len();
        let dist: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if i == j {
                    0.0
                } else {
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    metric(&points[a], &points[b])
                }
            })
            .collect();
        let space = FiniteMetricSpace {
            n,
            dist,
            source: MetricSource::Vectors { points, metric: name.to_string() },
        };
        space.validate()?;
        Ok(space)
    }

    /// An explicit square distance matrix.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<FiniteMetricSpace> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty distance matrix".into()));
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMetric(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            dist.extend_from_slice(row);
        }
        let space = FiniteMetricSpace { n, dist, source: MetricSource::Matrix };
        space.validate()?;
        Ok(space)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.d(i, i) != 0.0 {
                return Err(Error::InvalidMetric(format!("d({i},{i}) = {} ≠ 0", self.d(i, i))));
            }
            for j in 0..n {
                let v = self.d(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMetric(format!("d({i},{j}) = {v} is not a finite nonnegative number")));
                }
                if j > i {
                    let w = self.d(j, i);
                    if (v - w).abs() > 1e-12 * v.abs().max(1.0) {
                        return Err(Error::InvalidMetric(format!("not symmetric at ({i},{j}): {v} vs {w}")));
                    }
                }
            }
        }
        let violation = |(i, j, k): (usize, usize, usize)| {
            self.d(i, k) > self.d(i, j) + self.d(j, k) + TRIANGLE_TOL
        };
        let bad = if n <= TRIANGLE_AUDIT_CAP {
            (0..n).into_par_iter().find_map_first(|i| {
                for j in 0..n {
                    for k in 0..n {
                        if violation((i, j, k)) {
                            return Some((i, j, k));
                        }
                    }
                }
                None
            })
        } else {
            let mut rng = stream_rng(0, streams::TRIANGLE, n as u64);
            (0..TRIANGLE_SAMPLES)
                .map(|_| (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)))
                .find(|&t| violation(t))
        };
        if let Some((i, j, k)) = bad {
            return Err(Error::InvalidMetric(format!(
                "triangle inequality fails for ({i},{j},{k}): d({i},{k}) = {} > {} + {}",
                self.d(i, k),
                self.d(i, j),
                self.d(j, k)
            )));
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> &MetricSource {
        &self.source
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Same points with every distance multiplied by `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> FiniteMetricSpace {
        let source = match &self.source {
            MetricSource::Vectors { points, metric } if metric == "euclidean" => MetricSource::Vectors {
                points: points.iter().map(|p| p.iter().map(|x| x * lambda).collect()).collect(),
                metric: metric.clone(),
            },
            _ => MetricSource::Matrix,
        };
        FiniteMetricSpace { n: self.n, dist: self.dist.iter().map(|d| d * lambda).collect(), source }
    }

    /// The subspace on `idx` (in the given order).
    pub fn subspace(&self, idx: &[usize]) -> FiniteMetricSpace {
        let k = idx.len();
        let mut dist = Vec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                dist.push(self.d(i, j));
            }
        }
        FiniteMetricSpace { n: k, dist, source: MetricSource::Matrix }
    }

    /// `d(t, S) = min_{s∈S} d(t, s)`; infinite for empty `S`.
    pub fn dist_to_set(&self, t: usize, set: &[usize]) -> f64 {
        set.iter().map(|&s| self.d(t, s)).fold(f64::INFINITY, f64::min)
    }

    /// Indices within closed distance `radius` of `center`, restricted to `within`.
    pub fn ball_in(&self, center: usize, radius: f64, within: &[usize]) -> Vec<usize> {
        within.iter().copied().filter(|&s| self.d(center, s) <= radius).collect()
    }

    /// Sorted distinct positive pairwise distances.
    pub fn distinct_distances(&self) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.d(i, j))
            .filter(|&d| d > 0.0)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// `Δ(S) = max_{s,t∈S} d(s,t)`; the whole space when `subset` is `None`.
pub fn diameter(space: &FiniteMetricSpace, subset: Option<&[usize]>) -> Result<f64> {
    let all: Vec<usize>;
    let idx = match subset {
        Some(s) => s,
        None => {
            all = (0..space.n_points()).collect();
            &all
        }
    };
    if idx.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(diameter_of(space, idx))
}

pub(crate) fn diameter_of(space: &FiniteMetricSpace, idx: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            best = best.max(space.d(i, j));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringMode {
    Exact,
    Greedy,
}

/// Number of closed `ε`-balls centred at points of the space needed to cover it.
pub fn covering_number(space: &FiniteMetricSpace, eps: f64, mode: CoveringMode) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParams(format!("covering radius must be positive, got {eps}")));
    }
    let n = space.n_points();
    match mode {
        CoveringMode::Greedy => Ok(greedy_cover(space, eps)),
        CoveringMode::Exact if n > EXACT_COVER_CAP => {
            Err(Error::ExactTooLarge { n, cap: EXACT_COVER_CAP })
        }
        CoveringMode::Exact => {
            let balls = ball_masks(space, eps);
            if n <= EXHAUSTIVE_COVER_CAP {
                Ok(exhaustive_cover(&balls, n))
            } else {
                Ok(branch_and_bound_cover(&balls, n, greedy_cover(space, eps)))
            }
        }
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn ball_masks(space: &FiniteMetricSpace, eps: f64) -> Vec<u64> {
    let n = space.n_points();
    (0..n)
        .map(|i| (0..n).filter(|&j| space.d(i, j) <= eps).fold(0u64, |m, j| m | (1 << j)))
        .collect()
}

fn exhaustive_cover(balls: &[u64], n: usize) -> usize {
    let full = full_mask(n);
    for k in 1..=n {
        let mut found = false;
        for_each_combination(n, k, &mut |c| {
            if !found && c.iter().fold(0u64, |m, &i| m | balls[i]) == full {
                found = true;
            }
        });
        if found {
            return k;
        }
    }
    n
}

fn branch_and_bound_cover(balls: &[u64], n: usize, upper: usize) -> usize {
    fn search(balls: &[u64], full: u64, covered: u64, used: usize, best: &mut usize, max_ball: u32) {
        if covered == full {
            *best = (*best).min(used);
            return;
        }
        let remaining = (full & !covered).count_ones();
        let lower = used + remaining.div_ceil(max_ball) as usize;
        if lower >= *best {
            return;
        }
        let u = (full & !covered).trailing_zeros() as usize;
        let mut options: Vec<usize> = (0..balls.len()).filter(|&c| balls[c] >> u & 1 == 1).collect();
        options.sort_by_key(|&c| std::cmp::Reverse((balls[c] & !covered).count_ones()));
        for c in options {
            search(balls, full, covered | balls[c], used + 1, best, max_ball);
        }
    }
    let full = full_mask(n);
    let max_ball = balls.iter().map(|b| b.count_ones()).max().unwrap_or(1);
    let mut best = upper;
    search(balls, full, 0, 0, &mut best, max_ball);
    best
}

fn greedy_cover(space: &FiniteMetricSpace, eps: f64) -> usize {
    let n = space.n_points();
    let mut covered = vec![false; n];
    let mut left = n;
    let mut count = 0;
    while left > 0 {
        let mut best = (0usize, 0usize);
        for c in 0..n {
            let gain = (0..n).filter(|&j| !covered[j] && space.d(c, j) <= eps).count();
            if gain > best.1 {
                best = (c, gain);
            }
        }
        for (j, cov) in covered.iter_mut().enumerate() {
            if !*cov && space.d(best.0, j) <= eps {
                *cov = true;
                left -= 1;
            }
        }
        count += 1;
    }
    count
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        f(&c);
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Entropy number with an exactness flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub value: f64,
    pub exact: bool,
}

/// `e_n = inf_{card S ≤ 2^{2^n}} sup_t d(t, S)`.
pub fn entropy_number(space: &FiniteMetricSpace, n: usize) -> EntropyValue {
    let size = space.n_points();
    let k = level_cap(n);
    if k >= size {
        return EntropyValue { value: 0.0, exact: true };
    }
    let radius = |set: &[usize]| (0..size).map(|t| space.dist_to_set(t, set)).fold(0.0, f64::max);
    if size <= EXACT_ENTROPY_CAP {
        let mut best = f64::INFINITY;
        for_each_combination(size, k, &mut |c| best = best.min(radius(c)));
        EntropyValue { value: best, exact: true }
    } else {
        let value = (0..size)
            .map(|s| radius(&greedy_net(space, k, s)))
            .fold(f64::INFINITY, f64::min);
        EntropyValue { value, exact: false }
    }
}

/// Farthest-point-first net of size `min(k, n)` from `seed_point`; ties go
/// to the lowest index. Points are returned in selection order.
pub fn greedy_net(space: &FiniteMetricSpace, k: usize, seed_point: usize) -> Vec<usize> {
    let n = space.n_points();
    let k = k.min(n).max(1);
    let mut net = vec![seed_point];
    let mut gap: Vec<f64> = space.row(seed_point).to_vec();
    while net.len() < k {
        let mut far = 0;
        let mut far_d = -1.0;
        for (t, &g) in gap.iter().enumerate() {
            if g > far_d {
                far = t;
                far_d = g;
            }
        }
        net.push(far);
        for (t, g) in gap.iter_mut().enumerate() {
            *g = g.min(space.d(far, t));
        }
    }
    net
}

/// Greedy maximal `a`-separated subset of `within` (pairwise `d ≥ a`),
/// scanning in the given order. Stops early once `limit` points are found.
pub fn maximal_packing(space: &FiniteMetricSpace, within: &[usize], a: f64, limit: usize) -> Vec<usize> {
    let mut packing: Vec<usize> = Vec::new();
    for &t in within {
        if packing.len() >= limit {
            break;
        }
        if packing.iter().all(|&s| space.d(s, t) >= a) {
            packing.push(t);
        }
    }
    packing
}

/// Nets `T_n` for `n ≥ k_start`, each with `card(T_n) ≤ 2^{2^n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleNets {
    pub k_start: usize,
    pub levels: Vec<(usize, Vec<usize>)>,
}

impl AdmissibleNets {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        for (i, (n, set)) in self.levels.iter().enumerate() {
            if *n != self.k_start + i {
                return Err(Error::NotAdmissible(format!("level {n} out of sequence")));
            }
            if set.is_empty() || set.len() > level_cap(*n) {
                return Err(Error::NotAdmissible(format!(
                    "card(T_{n}) = {} outside [1, {}]",
                    set.len(),
                    level_cap(*n)
                )));
            }
            if let Some(&bad) = set.iter().find(|&&t| t >= n_points) {
                return Err(Error::NotAdmissible(format!("T_{n} contains unknown point {bad}")));
            }
        }
        Ok(())
    }

    /// `T_n`, with levels past the last one repeating it.
    pub fn level(&self, n: usize) -> Option<&[usize]> {
        if n < self.k_start || self.levels.is_empty() {
            return None;
        }
        let i = (n - self.k_start).min(self.levels.len() - 1);
        Some(&self.levels[i].1)
    }
}

pub type Partition = Vec<Vec<usize>>;

/// Nested partitions `A_0 = {T}, A_1, …` with `card(A_n) ≤ 2^{2^n}`.
/// Levels past the last one repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePartitions {
    pub levels: Vec<Partition>,
}

impl AdmissiblePartitions {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        let Some(first) = self.levels.first() else {
            return Err(Error::NotAdmissible("no levels".into()));
        };
        if first.len() != 1 {
            return Err(Error::NotAdmissible(format!("card(A_0) = {}", first.len())));
        }
        let mut prev_owner: Option<Vec<usize>> = None;
        for (n, part) in self.levels.iter().enumerate() {
            if part.len() > level_cap(n) {
                return Err(Error::NotAdmissible(format!(
                    "card(A_{n}) = {} > {}",
                    part.len(),
                    level_cap(n)
                )));
            }
            let owner = owner_map(part, n_points)
                .map_err(|e| Error::NotAdmissible(format!("A_{n}: {e}")))?;
            if let Some(prev) = &prev_owner {
                for cell in part {
                    let parent = prev[cell[0]];
                    if cell.iter().any(|&t| prev[t] != parent) {
                        return Err(Error::NotAdmissible(format!("A_{n} does not refine A_{}", n - 1)));
                    }
                }
            }
            prev_owner = Some(owner);
        }
        Ok(())
    }

    pub fn level(&self, n: usize) -> &Partition {
        &self.levels[n.min(self.levels.len() - 1)]
    }

    /// Cell index of every point at level `n`.
    pub fn owners(&self, n: usize, n_points: usize) -> Vec<usize> {
        owner_map(self.level(n), n_points).expect("validated partition")
    }
}

fn owner_map(part: &Partition, n_points: usize) -> std::result::Result<Vec<usize>, String> {
    let mut owner = vec![usize::MAX; n_points];
    for (c, cell) in part.iter().enumerate() {
        if cell.is_empty() {
            return Err(format!("cell {c} is empty"));
        }
        for &t in cell {
            if t >= n_points {
                return Err(format!("unknown point {t}"));
            }
            if owner[t] != usize::MAX {
                return Err(format!("point {t} lies in two cells"));
            }
            owner[t] = c;
        }
    }
    if let Some(t) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(format!("point {t} is not covered"));
    }
    Ok(owner)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibleForm {
    Nets,
    Partitions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissible {
    Nets(AdmissibleNets),
    Partitions(AdmissiblePartitions),
}

/// `⌊log₂ p⌋` for `p ≥ 1`.
pub fn k_index(p: f64) -> Result<usize> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidP(p));
    }
    Ok(p.log2().floor() as usize)
}

/// Greedy admissible sequence: farthest-point nets, or Voronoi refinements by them.
pub fn build_admissible(space: &FiniteMetricSpace, p: f64, form: AdmissibleForm) -> Result<Admissible> {
    let k_p = k_index(p)?;
    let n = space.n_points();
    Ok(match form {
        AdmissibleForm::Nets => {
            let mut levels = Vec::new();
            let mut level = k_p;
            loop {
                let net = greedy_net(space, level_cap(level), 0);
                let done = net.len() == n;
                levels.push((level, net));
                if done {
                    break;
                }
                level += 1;
            }
            Admissible::Nets(AdmissibleNets { k_start: k_p, levels })
        }
        AdmissibleForm::Partitions => Admissible::Partitions(build_partitions(space)),
    })
}

fn build_partitions(space: &FiniteMetricSpace) -> AdmissiblePartitions {
    let n = space.n_points();
    let mut levels: Vec<Partition> = vec![vec![(0..n).collect()]];
    let mut level = 0;
    while levels[level].iter().any(|c| c.len() > 1) {
        let cap = level_cap(level + 1);
        let current = &levels[level];
        let budget = (cap / current.len()).max(1);
        let net = greedy_net(space, cap, 0);
        let mut next: Partition = Vec::new();
        for cell in current {
            let pieces = voronoi(space, cell, &net);
            if pieces.len() <= budget {
                next.extend(pieces);
            } else {
                // Too many global centres land in this cell: use its own net.
                let sub = space.subspace(cell);
                let local: Vec<usize> = greedy_net(&sub, budget, 0).into_iter().map(|i| cell[i]).collect();
                next.extend(voronoi(space, cell, &local));
            }
        }
        levels.push(next);
        level += 1;
    }
    AdmissiblePartitions { levels }
}

/// Split `cell` by nearest centre (ties to the earlier centre in `centers`);
/// empty pieces are dropped and pieces keep centre order.
fn voronoi(space: &FiniteMetricSpace, cell: &[usize], centers: &[usize]) -> Partition {
    let mut order: Vec<usize> = centers.to_vec();
    order.sort_unstable();
    let mut pieces: Vec<Vec<usize>> = vec![Vec::new(); order.len()];
    for &t in cell {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &s) in order.iter().enumerate() {
            let d = space.d(t, s);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        pieces[best].push(t);
    }
    pieces.into_iter().filter(|p| !p.is_empty()).collect()
}
