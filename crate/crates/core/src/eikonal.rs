//! Discrete eikonal system `∇Wᵀ M_ε⁻¹ ∇W = 1` on the grid.
//!
//! With the Selling stencil `{(wᵢ, eᵢ)}` of the index-scaled inverse metric at
//! node m, the scheme is
//!
//! ```text
//! Σᵢ wᵢ · max(0, u − aᵢ)² = 1,   aᵢ = min(W[m − eᵢ], W[m + eᵢ])
//! ```
//!
//! Out-of-domain neighbors count as +∞. The update is causal (`u > aᵢ` for
//! every active term), so fast marching solves it in one label-setting pass.
//! A Gauss–Seidel fixed-point iteration of the same update serves as an
//! independent oracle.
//!
//! Stencils are computed once per θ-slice at unit cost; the per-node weights
//! are those times `C⁻²`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{CostVolume, DistanceField, GridSpec};
use crate::metric::MetricParams;
use crate::selling::{decompose, scaled_inverse_metric, SellingStencil, StencilTerm};

const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    #[default]
    FastMarching,
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub params: MetricParams,
    /// Seed nodes (i, j, k); k wraps.
    pub seeds: Vec<(i64, i64, i64)>,
    pub mode: SolveMode,
    /// Fixed-point stopping threshold on the max nodal change of a sweep.
    pub tolerance: f64,
    /// Fixed-point sweep cap; `None` means `10 · (nx + ny + ntheta)`.
    pub max_sweeps: Option<usize>,
    #[serde(skip)]
    pub execution: Execution,
}

impl SolveConfig {
    pub fn new(params: MetricParams, seeds: Vec<(i64, i64, i64)>) -> Self {
        SolveConfig {
            params,
            seeds,
            mode: SolveMode::FastMarching,
            tolerance: 1e-9,
            max_sweeps: None,
            execution: Execution::default(),
        }
    }

    pub fn with_mode(mut self, mode: SolveMode) -> Self {
        self.mode = mode;
        self
    }

    fn seed_indices(&self, grid: &GridSpec) -> Result<Vec<usize>> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("at least one seed is required".into()));
        }
        self.seeds
            .iter()
            .map(|&(i, j, k)| grid.index_of(i, j, k))
            .collect()
    }
}

/// Per-slice unit-cost stencils plus the reverse adjacency used to find the
/// nodes whose stencil touches a freshly accepted node.
#[derive(Debug, Clone)]
pub struct StencilTable {
    grid: GridSpec,
    slices: Vec<SellingStencil>,
    /// `reverse[k]`: displacements r such that node n + r (in slice
    /// k + r_θ) has n in its stencil, for n in slice k.
    reverse: Vec<Vec<[i32; 3]>>,
}

impl StencilTable {
    /// Decompose `H D_ε(θ_k, 1) H` for every slice.
    ///
    /// Slices with θ < 0 reuse the stencil of their θ → −θ mirror with
    /// mirrored offsets, so the discrete problem keeps the reflection
    /// symmetry (x, y, θ) → (x, −y, −θ) bit for bit.
    pub fn build(grid: &GridSpec, params: &MetricParams, exec: Execution) -> Result<Self> {
        params.validate()?;
        let direct = |k: usize| -> Result<SellingStencil> {
            let theta = grid.theta_of(k as i64);
            decompose(&scaled_inverse_metric(theta, 1.0, params, grid)?)
        };
        let is_rep = |k: usize| {
            let m = grid.mirror_slice(k);
            m == k || grid.theta_of(k as i64) > 0.0
        };
        let reps = exec.map_range(grid.ntheta, |k| if is_rep(k) { Some(direct(k)) } else { None });
        let mut slices = vec![SellingStencil::default(); grid.ntheta];
        for (k, rep) in reps.into_iter().enumerate() {
            if let Some(s) = rep {
                slices[k] = s?;
            }
        }
        for k in 0..grid.ntheta {
            if !is_rep(k) {
                slices[k] = slices[grid.mirror_slice(k)].mirrored();
            }
        }

        let n = grid.ntheta as i64;
        let mut reverse = vec![Vec::new(); grid.ntheta];
        for (km, stencil) in slices.iter().enumerate() {
            for t in &stencil.terms {
                for sign in [1i32, -1] {
                    let kn = (km as i64 + (sign * t.offset[2]) as i64).rem_euclid(n) as usize;
                    reverse[kn].push([-sign * t.offset[0], -sign * t.offset[1], -sign * t.offset[2]]);
                }
            }
        }
        for r in &mut reverse {
            r.sort_unstable();
            r.dedup();
        }
        Ok(StencilTable {
            grid: *grid,
            slices,
            reverse,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn slice(&self, k: usize) -> &SellingStencil {
        &self.slices[k]
    }

    pub fn reverse_offsets(&self, k: usize) -> &[[i32; 3]] {
        &self.reverse[k]
    }

    /// Flat index of (i, j, k) + offset, or `None` outside the spatial box.
    #[inline]
    fn shift(&self, i: usize, j: usize, k: usize, off: [i32; 3]) -> Option<usize> {
        let g = &self.grid;
        let ii = i as i64 + off[0] as i64;
        let jj = j as i64 + off[1] as i64;
        if ii < 0 || jj < 0 || ii >= g.nx as i64 || jj >= g.ny as i64 {
            return None;
        }
        let kk = (k as i64 + off[2] as i64).rem_euclid(g.ntheta as i64) as usize;
        Some(g.flat(ii as usize, jj as usize, kk))
    }

    /// (weight, a) pairs of node `idx` with cost scale `inv_c2 = C⁻²`.
    #[inline]
    fn gather<F: Fn(usize) -> f64>(&self, idx: usize, inv_c2: f64, value: &F) -> ([(f64, f64); 6], usize) {
        let (i, j, k) = self.grid.unflatten(idx);
        let mut out = [(0.0, INF); 6];
        let mut len = 0;
        for &StencilTerm { weight, offset } in &self.slices[k].terms {
            let plus = self.shift(i, j, k, offset).map_or(INF, value);
            let minus = self
                .shift(i, j, k, [-offset[0], -offset[1], -offset[2]])
                .map_or(INF, value);
            out[len] = (weight * inv_c2, plus.min(minus));
            len += 1;
        }
        (out, len)
    }
}

/// Solve `Σ wᵢ max(0, u − aᵢ)² = 1` for the unique root.
///
/// Terms are visited by increasing `aᵢ`, growing the active set until the
/// root no longer exceeds the next neighbor value. Returns +∞ if no term has
/// positive weight and a finite neighbor.
pub fn local_update(terms: &[(f64, f64)]) -> f64 {
    let mut buf = [(0.0f64, 0.0f64); 8];
    let mut len = 0;
    for &(w, a) in terms {
        if w > 0.0 && a.is_finite() {
            if len == buf.len() {
                // More terms than any 3D Selling stencil produces.
                return local_update_slow(terms);
            }
            buf[len] = (w, a);
            len += 1;
        }
    }
    solve_sorted(&mut buf[..len])
}

fn local_update_slow(terms: &[(f64, f64)]) -> f64 {
    let mut v: Vec<(f64, f64)> = terms
        .iter()
        .copied()
        .filter(|&(w, a)| w > 0.0 && a.is_finite())
        .collect();
    solve_sorted(&mut v)
}

#[inline]
fn solve_sorted(terms: &mut [(f64, f64)]) -> f64 {
    if terms.is_empty() {
        return INF;
    }
    // Insertion sort: stable, and at most six entries.
    for n in 1..terms.len() {
        let mut m = n;
        while m > 0 && terms[m - 1].1 > terms[m].1 {
            terms.swap(m - 1, m);
            m -= 1;
        }
    }
    let (mut sw, mut swa, mut swa2) = (0.0, 0.0, 0.0);
    let mut u = INF;
    for (n, &(w, a)) in terms.iter().enumerate() {
        sw += w;
        swa += w * a;
        swa2 += w * a * a;
        let disc = (swa * swa - sw * (swa2 - 1.0)).max(0.0);
        u = (swa + disc.sqrt()) / sw;
        if n + 1 == terms.len() || u <= terms[n + 1].1 {
            break;
        }
    }
    u
}

/// `Σ wᵢ max(0, u − aᵢ)² − 1`.
fn scheme_residual(u: f64, terms: &[(f64, f64)]) -> f64 {
    terms
        .iter()
        .filter(|&&(w, a)| w > 0.0 && a < u)
        .map(|&(w, a)| w * (u - a) * (u - a))
        .sum::<f64>()
        - 1.0
}

/// Diagnostics collected during a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub accepted: usize,
    pub heap_pops: usize,
    /// Fast marching: number of times an accepted value was smaller than its
    /// predecessor. Zero for a causal scheme.
    pub causality_violations: usize,
    pub sweeps: usize,
}

fn check_grids(cost: &CostVolume, grid: &GridSpec) -> Result<()> {
    if cost.grid() != grid {
        return Err(Error::DimensionMismatch {
            expected: format!("{grid:?}"),
            found: format!("{:?}", cost.grid()),
        });
    }
    Ok(())
}

pub fn solve(cost: &CostVolume, config: &SolveConfig) -> Result<DistanceField> {
    solve_with_stats(cost, config).map(|(f, _)| f)
}

pub fn solve_with_stats(cost: &CostVolume, config: &SolveConfig) -> Result<(DistanceField, SolveStats)> {
    let table = StencilTable::build(cost.grid(), &config.params, config.execution)?;
    solve_with_table(cost, config, &table)
}

/// Solve reusing a prebuilt stencil table (same grid and metric parameters).
pub fn solve_with_table(
    cost: &CostVolume,
    config: &SolveConfig,
    table: &StencilTable,
) -> Result<(DistanceField, SolveStats)> {
    config.params.validate()?;
    check_grids(cost, table.grid())?;
    let seeds = config.seed_indices(table.grid())?;
    match config.mode {
        SolveMode::FastMarching => Ok(fast_marching(cost, table, &seeds)),
        SolveMode::FixedPoint => {
            let g = table.grid();
            let cap = config.max_sweeps.unwrap_or(10 * (g.nx + g.ny + g.ntheta));
            fixed_point(cost, table, &seeds, config.tolerance, cap)
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    key: f64,
    idx: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on key.
        other.key.total_cmp(&self.key).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const FAR: u8 = 0;
const TRIAL: u8 = 1;
const ACCEPTED: u8 = 2;

fn fast_marching(cost: &CostVolume, table: &StencilTable, seeds: &[usize]) -> (DistanceField, SolveStats) {
    let grid = *table.grid();
    let mut values = vec![INF; grid.len()];
    let mut state = vec![FAR; grid.len()];
    let mut heap = BinaryHeap::new();
    let mut stats = SolveStats::default();
    for &s in seeds {
        values[s] = 0.0;
        state[s] = TRIAL;
        heap.push(HeapEntry { key: 0.0, idx: s as u32 });
    }
    let uniform = cost.uniform_value().map(|c| 1.0 / (c * c));

    let mut last = 0.0f64;
    while let Some(HeapEntry { key, idx }) = heap.pop() {
        stats.heap_pops += 1;
        let n = idx as usize;
        if state[n] == ACCEPTED || key > values[n] {
            continue;
        }
        state[n] = ACCEPTED;
        stats.accepted += 1;
        if key < last {
            stats.causality_violations += 1;
        }
        last = key;

        let (i, j, k) = grid.unflatten(n);
        for &r in table.reverse_offsets(k) {
            let Some(m) = table.shift(i, j, k, r) else { continue };
            if state[m] == ACCEPTED {
                continue;
            }
            let inv_c2 = uniform.unwrap_or_else(|| {
                let c = cost.at(m);
                1.0 / (c * c)
            });
            let (terms, len) = table.gather(m, inv_c2, &|q: usize| {
                if state[q] == ACCEPTED {
                    values[q]
                } else {
                    INF
                }
            });
            let u = local_update(&terms[..len]);
            if u < values[m] {
                values[m] = u;
                state[m] = TRIAL;
                heap.push(HeapEntry { key: u, idx: m as u32 });
            }
        }
    }
    (DistanceField { grid, values }, stats)
}

/// Visit order for one Gauss–Seidel sweep: bit 0/1/2 reverse the i/j/k axes.
fn sweep_order(grid: &GridSpec, dir: usize, mut visit: impl FnMut(usize)) {
    let axis = |n: usize, rev: bool| -> Box<dyn Iterator<Item = usize>> {
        if rev {
            Box::new((0..n).rev())
        } else {
            Box::new(0..n)
        }
    };
    for k in axis(grid.ntheta, dir & 4 != 0) {
        for j in axis(grid.ny, dir & 2 != 0) {
            for i in axis(grid.nx, dir & 1 != 0) {
                visit(grid.flat(i, j, k));
            }
        }
    }
}

fn fixed_point(
    cost: &CostVolume,
    table: &StencilTable,
    seeds: &[usize],
    tolerance: f64,
    max_sweeps: usize,
) -> Result<(DistanceField, SolveStats)> {
    let grid = *table.grid();
    let mut values = vec![INF; grid.len()];
    let mut is_seed = vec![false; grid.len()];
    for &s in seeds {
        values[s] = 0.0;
        is_seed[s] = true;
    }
    let mut stats = SolveStats::default();
    let mut change = INF;
    for sweep in 0..max_sweeps {
        change = 0.0;
        sweep_order(&grid, sweep % 8, |m| {
            if is_seed[m] {
                return;
            }
            let c = cost.at(m);
            let (terms, len) = table.gather(m, 1.0 / (c * c), &|q| values[q]);
            let u = local_update(&terms[..len]);
            let old = values[m];
            let delta = if old == u { 0.0 } else { (old - u).abs() };
            change = f64::max(change, if delta.is_nan() { INF } else { delta });
            values[m] = u;
        });
        stats.sweeps = sweep + 1;
        if change <= tolerance {
            return Ok((DistanceField { grid, values }, stats));
        }
    }
    Err(Error::NotConverged {
        sweeps: max_sweeps,
        change,
    })
}

/// Max over non-seed finite nodes of `|Σ wᵢ max(0, u − aᵢ)² − 1|`.
/// Seeds are the nodes holding exactly zero; an empty set gives 0.
pub fn residual(field: &DistanceField, cost: &CostVolume, params: &MetricParams, exec: Execution) -> Result<f64> {
    check_grids(cost, &field.grid)?;
    let table = StencilTable::build(&field.grid, params, exec)?;
    residual_with_table(field, cost, &table, exec)
}

pub fn residual_with_table(
    field: &DistanceField,
    cost: &CostVolume,
    table: &StencilTable,
    exec: Execution,
) -> Result<f64> {
    check_grids(cost, &field.grid)?;
    let values = &field.values;
    Ok(exec.max_range(values.len(), 0.0, |m| {
        let u = values[m];
        if u == 0.0 || !u.is_finite() {
            return 0.0;
        }
        let c = cost.at(m);
        let (terms, len) = table.gather(m, 1.0 / (c * c), &|q| values[q]);
        scheme_residual(u, &terms[..len]).abs()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn local_update_examples() {
        assert_eq!(local_update(&[(1.0, 0.0)]), 1.0);
        assert!((local_update(&[(1.0, 0.0), (1.0, 0.0)]) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(local_update(&[(1.0, 0.0), (1.0, 10.0)]), 1.0);
        assert_eq!(local_update(&[(1.0, INF), (2.0, INF)]), INF);
        assert_eq!(local_update(&[(0.0, 0.0)]), INF);
        assert_eq!(local_update(&[]), INF);
    }

    /// Bisection on the monotone residual as an independent root finder.
    fn bisect(terms: &[(f64, f64)]) -> f64 {
        let lo0 = terms.iter().filter(|t| t.0 > 0.0).map(|t| t.1).fold(INF, f64::min);
        let (mut lo, mut hi) = (lo0, lo0 + 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if scheme_residual(mid, terms) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    proptest::proptest! {
        #[test]
        fn local_update_matches_bisection(
            raw in proptest::collection::vec((0.0f64..50.0, 0.0f64..3.0), 1..7)
        ) {
            let terms: Vec<(f64, f64)> = raw;
            proptest::prop_assume!(terms.iter().any(|t| t.0 > 1e-6));
            let u = local_update(&terms);
            let b = bisect(&terms);
            proptest::prop_assert!((u - b).abs() <= 1e-9 * (1.0 + b), "{} vs {}", u, b);
            for &(w, a) in &terms {
                if w > 0.0 && a < u {
                    proptest::prop_assert!(u > a);
                }
            }
            proptest::prop_assert!(scheme_residual(u, &terms).abs() < 1e-9);
        }
    }

    fn small_grid() -> GridSpec {
        GridSpec::new(9, 9, 8, 0.5, 0.5, -2.0, -2.0).unwrap()
    }

    fn random_cost(g: GridSpec, rng: &mut StdRng) -> CostVolume {
        CostVolume::from_values(g, (0..g.len()).map(|_| rng.gen_range(0.2..1.0)).collect()).unwrap()
    }

    #[test]
    fn reverse_adjacency_is_the_transpose() {
        let g = GridSpec::paper(6).unwrap();
        let table = StencilTable::build(&g, &MetricParams::default(), Execution::Sequential).unwrap();
        // Brute force: for every node m of a slice and every stencil neighbor
        // n = m ± e, n − m must be listed (negated) in n's reverse offsets.
        for km in 0..g.ntheta {
            for t in &table.slice(km).terms {
                for s in [1, -1] {
                    let e = [s * t.offset[0], s * t.offset[1], s * t.offset[2]];
                    let kn = (km as i64 + e[2] as i64).rem_euclid(g.ntheta as i64) as usize;
                    assert!(table.reverse_offsets(kn).contains(&[-e[0], -e[1], -e[2]]));
                }
            }
        }
    }

    #[test]
    fn seed_only_and_residual_edge_cases() {
        let g = small_grid();
        let cost = CostVolume::uniform(g, 1.0).unwrap();
        let p = MetricParams::default();
        let zero = DistanceField::new(g, vec![0.0; g.len()]).unwrap();
        assert_eq!(residual(&zero, &cost, &p, Execution::Sequential).unwrap(), 0.0);

        let cfg = SolveConfig::new(p, vec![(4, 4, 3)]);
        let (field, stats) = solve_with_stats(&cost, &cfg).unwrap();
        assert_eq!(field.get(4, 4, 3).unwrap(), 0.0);
        assert_eq!(stats.causality_violations, 0);
        assert_eq!(stats.accepted, g.len());
        assert!(field.values.iter().enumerate().all(|(i, &v)| i == g.flat(4, 4, 3) || v > 0.0));
        let r = residual(&field, &cost, &p, Execution::Parallel).unwrap();
        assert!(r <= 1e-6, "residual {r}");

        let mut bumped = field.clone();
        let idx = g.flat(6, 4, 3);
        bumped.values[idx] += 1.0;
        assert!(residual(&bumped, &cost, &p, Execution::Sequential).unwrap() >= 0.1);
    }

    #[test]
    fn rejects_bad_configs() {
        let g = small_grid();
        let cost = CostVolume::uniform(g, 1.0).unwrap();
        let p = MetricParams::default();
        assert!(solve(&cost, &SolveConfig::new(p, vec![])).is_err());
        assert!(solve(&cost, &SolveConfig::new(p, vec![(9, 0, 0)])).is_err());
        let bad = MetricParams { epsilon: 0.0, beta: 1.0 };
        assert!(matches!(
            solve(&cost, &SolveConfig::new(bad, vec![(0, 0, 0)])),
            Err(Error::InvalidParameter(_))
        ));
        let mut capped = SolveConfig::new(p, vec![(0, 0, 0)]).with_mode(SolveMode::FixedPoint);
        capped.max_sweeps = Some(1);
        assert!(matches!(solve(&cost, &capped), Err(Error::NotConverged { .. })));
        let other = CostVolume::uniform(GridSpec::paper(3).unwrap(), 1.0).unwrap();
        let field = solve(&cost, &SolveConfig::new(p, vec![(0, 0, 0)])).unwrap();
        assert!(residual(&field, &other, &p, Execution::Sequential).is_err());
    }

    #[test]
    fn fast_marching_matches_fixed_point_on_random_costs() {
        let mut rng = StdRng::seed_from_u64(7);
        let g = small_grid();
        for eps in [0.1, 0.5, 1.0] {
            let p = MetricParams::new(eps, 1.0).unwrap();
            let cost = random_cost(g, &mut rng);
            let cfg = SolveConfig::new(p, vec![(4, 4, 0), (1, 7, 5)]);
            let fm = solve(&cost, &cfg).unwrap();
            let fp = solve(&cost, &cfg.clone().with_mode(SolveMode::FixedPoint)).unwrap();
            let diff = fm
                .values
                .iter()
                .zip(&fp.values)
                .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
                .fold(0.0, f64::max);
            assert!(diff <= 1e-8, "eps {eps}: {diff:e}");
        }
    }

    #[test]
    fn raising_cost_never_lowers_distance() {
        let mut rng = StdRng::seed_from_u64(11);
        let g = small_grid();
        let p = MetricParams::default();
        for _ in 0..5 {
            let low = random_cost(g, &mut rng);
            let high: Vec<f64> = low
                .to_vec()
                .iter()
                .map(|c| (c * rng.gen_range(1.0..1.5)).min(1.0))
                .collect();
            let high = CostVolume::from_values(g, high).unwrap();
            let cfg = SolveConfig::new(p, vec![(4, 4, 2)]);
            let a = solve(&low, &cfg).unwrap();
            let b = solve(&high, &cfg).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(y >= x, "{y} < {x}");
            }
        }
    }

    #[test]
    fn pure_rotation_and_forward_axes() {
        let n = 12;
        let g = GridSpec::paper(n).unwrap();
        let s = PI / n as f64;
        let c = 2 * n as i64;
        let k0 = g.nearest_slice(0.0) as i64;
        let cost = CostVolume::uniform(g, 1.0).unwrap();
        let field = solve(&cost, &SolveConfig::new(MetricParams::default(), vec![(c, c, k0)])).unwrap();
        for k in 0..g.ntheta as i64 {
            let theta = g.theta_of(k);
            let w = field.get(c, c, k).unwrap();
            assert!((w - theta.abs()).abs() <= 2.0 * s, "θ={theta}: {w}");
        }
        for i in 0..g.nx as i64 {
            let x = g.x_of(i as usize);
            let w = field.get(i, c, k0).unwrap();
            assert!((w - x.abs()).abs() <= 2.0 * s, "x={x}: {w}");
        }
    }

    #[test]
    fn stencil_table_matches_direct_decomposition() {
        let g = GridSpec::paper(8).unwrap();
        let p = MetricParams::default();
        let table = StencilTable::build(&g, &p, Execution::Parallel).unwrap();
        for k in 0..g.ntheta {
            let d = scaled_inverse_metric(g.theta_of(k as i64), 1.0, &p, &g).unwrap();
            let rec = table.slice(k).reconstruct();
            assert!(rec.sub(&d).frobenius() <= 1e-10 * d.frobenius());
        }
    }
}
