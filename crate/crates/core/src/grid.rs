//! Discrete sampling of SE(2): spatial box × periodic θ circle.
//!
//! Flat index order is x fastest, then y, then θ:
//! `flat = i + nx * (j + ny * k)`. Orientation samples are
//! `θ_k = −π + (k + 1) · 2π / ntheta`, so the last slice sits at θ = π.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{canonical_angle, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub ntheta: usize,
    pub hx: f64,
    pub hy: f64,
    pub htheta: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl GridSpec {
    pub fn new(
        nx: usize,
        ny: usize,
        ntheta: usize,
        hx: f64,
        hy: f64,
        origin_x: f64,
        origin_y: f64,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || ntheta == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid dimensions must be positive, got {nx}x{ny}x{ntheta}"
            )));
        }
        if !(hx > 0.0 && hy > 0.0 && hx.is_finite() && hy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spatial steps must be positive, got hx={hx} hy={hy}"
            )));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::InvalidParameter("origin must be finite".into()));
        }
        if nx.checked_mul(ny).and_then(|v| v.checked_mul(ntheta)).is_none_or(|n| n > u32::MAX as usize) {
            return Err(Error::InvalidParameter("grid has too many nodes".into()));
        }
        Ok(GridSpec {
            nx,
            ny,
            ntheta,
            hx,
            hy,
            htheta: 2.0 * PI / ntheta as f64,
            origin_x,
            origin_y,
        })
    }

    /// The uniform validation grid with step `s = π/n`: `x_i = i s`,
    /// `y_j = j s` with `|x_i|, |y_j| ≤ 2π`, and `θ_k = k s` with
    /// `−π + s ≤ θ_k ≤ π`. That is `(4n+1)² · 2n` nodes.
    pub fn paper(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("paper grid needs n >= 2, got {n}")));
        }
        let s = PI / n as f64;
        let half = 2 * n;
        let origin = -(half as f64) * s;
        let mut g = GridSpec::new(2 * half + 1, 2 * half + 1, 2 * n, s, s, origin, origin)?;
        // 2π/(2n) and π/n are the same double, but keep them visibly equal.
        g.htheta = s;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat index; θ index wraps, spatial indices must be in range.
    pub fn index_of(&self, i: i64, j: i64, k: i64) -> Result<usize> {
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        let k = k.rem_euclid(self.ntheta as i64) as usize;
        Ok(self.flat(i as usize, j as usize, k))
    }

    #[inline]
    pub(crate) fn flat(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn unflatten(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let rest = idx / self.nx;
        (i, rest % self.ny, rest / self.ny)
    }

    pub fn x_of(&self, i: usize) -> f64 {
        self.origin_x + i as f64 * self.hx
    }

    pub fn y_of(&self, j: usize) -> f64 {
        self.origin_y + j as f64 * self.hy
    }

    /// Orientation of slice `k` (wrapped), in (−π, π].
    pub fn theta_of(&self, k: i64) -> f64 {
        let n = self.ntheta as i64;
        let k = k.rem_euclid(n);
        // Integer numerator keeps θ = 0 and mirror pairs exact.
        ((2 * (k + 1) - n) as f64 * PI / n as f64).min(PI)
    }

    pub fn pose_of(&self, i: i64, j: i64, k: i64) -> Result<Pose> {
        let idx = self.index_of(i, j, k)?;
        let (i, j, k) = self.unflatten(idx);
        Ok(Pose::new(self.x_of(i), self.y_of(j), self.theta_of(k as i64)))
    }

    /// Slice index of the orientation sample nearest to θ.
    pub fn nearest_slice(&self, theta: f64) -> usize {
        let f = (canonical_angle(theta) + PI) / self.htheta - 1.0;
        (f.round() as i64).rem_euclid(self.ntheta as i64) as usize
    }

    /// Nearest node, or an error if (x, y) is outside the box.
    pub fn nearest_node(&self, p: &Pose) -> Result<(usize, usize, usize)> {
        let (fx, fy) = self.spatial_coords(p)?;
        Ok((fx.round() as usize, fy.round() as usize, self.nearest_slice(p.theta)))
    }

    /// Slice mirrored by θ → −θ.
    pub fn mirror_slice(&self, k: usize) -> usize {
        let n = self.ntheta as i64;
        (n - 2 - k as i64).rem_euclid(n) as usize
    }

    /// Length of the cell diagonal √(hx² + hy² + hθ²).
    pub fn cell_diagonal(&self) -> f64 {
        (self.hx * self.hx + self.hy * self.hy + self.htheta * self.htheta).sqrt()
    }

    pub fn min_step(&self) -> f64 {
        self.hx.min(self.hy).min(self.htheta)
    }

    pub fn x_max(&self) -> f64 {
        self.x_of(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y_of(self.ny - 1)
    }

    /// Whether (x, y) lies in the sampled box.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.spatial_coords(&Pose::new(x, y, 0.0)).is_ok()
    }

    /// Fractional spatial index coordinates, clamped onto the box when the
    /// point sits within rounding distance of an edge.
    fn spatial_coords(&self, p: &Pose) -> Result<(f64, f64)> {
        let slack = 1e-9;
        let fx = (p.x - self.origin_x) / self.hx;
        let fy = (p.y - self.origin_y) / self.hy;
        let (mx, my) = ((self.nx - 1) as f64, (self.ny - 1) as f64);
        if !(fx >= -slack && fx <= mx + slack && fy >= -slack && fy <= my + slack) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y });
        }
        Ok((snap(fx).clamp(0.0, mx), snap(fy).clamp(0.0, my)))
    }

    /// Tri-linear interpolation of node values at `p`, θ wrapping across the
    /// π/−π seam. Nodes entering with zero weight are ignored, so the result
    /// is exact at nodes; any +∞ node with positive weight gives +∞.
    pub fn interpolate(&self, values: &[f64], p: &Pose) -> Result<f64> {
        debug_assert_eq!(values.len(), self.len());
        let (fx, fy) = self.spatial_coords(p)?;
        let (i0, tx) = split_cell(fx, self.nx);
        let (j0, ty) = split_cell(fy, self.ny);
        let ft = snap((canonical_angle(p.theta) + PI) / self.htheta - 1.0).rem_euclid(self.ntheta as f64);
        let mut k0 = ft.floor() as usize;
        let mut tt = ft - k0 as f64;
        if k0 >= self.ntheta {
            k0 = self.ntheta - 1;
            tt = 1.0;
        }
        let k1 = (k0 + 1) % self.ntheta;
        let i1 = (i0 + 1).min(self.nx - 1);
        let j1 = (j0 + 1).min(self.ny - 1);

        let mut acc = 0.0;
        for (k, wk) in [(k0, 1.0 - tt), (k1, tt)] {
            for (j, wj) in [(j0, 1.0 - ty), (j1, ty)] {
                for (i, wi) in [(i0, 1.0 - tx), (i1, tx)] {
                    let w = wi * wj * wk;
                    if w == 0.0 {
                        continue;
                    }
                    let v = values[self.flat(i, j, k)];
                    if v == f64::INFINITY {
                        return Ok(f64::INFINITY);
                    }
                    acc += w * v;
                }
            }
        }
        Ok(acc)
    }
}

/// Round fractional index coordinates that are integers up to rounding noise.
fn snap(f: f64) -> f64 {
    let r = f.round();
    if (f - r).abs() < 1e-9 {
        r
    } else {
        f
    }
}

fn split_cell(f: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let i0 = (f.floor() as usize).min(n - 2);
    (i0, f - i0 as f64)
}

/// Cost values per node in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
enum CostValues {
    Uniform(f64),
    Dense(Vec<f64>),
}

/// External cost on the grid.
///
/// A constant cost is stored as a single value; application-size uniform
/// grids would otherwise carry tens of millions of identical entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    grid: GridSpec,
    values: CostValues,
}

impl CostVolume {
    pub fn uniform(grid: GridSpec, value: f64) -> Result<Self> {
        validate_cost(0, value)?;
        Ok(CostVolume {
            grid,
            values: CostValues::Uniform(value),
        })
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} cost values", grid.len()),
                found: format!("{}", values.len()),
            });
        }
        for (index, &v) in values.iter().enumerate() {
            validate_cost(index, v)?;
        }
        Ok(CostVolume {
            grid,
            values: CostValues::Dense(values),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        match &self.values {
            CostValues::Uniform(c) => *c,
            CostValues::Dense(v) => v[idx],
        }
    }

    pub fn uniform_value(&self) -> Option<f64> {
        match self.values {
            CostValues::Uniform(c) => Some(c),
            CostValues::Dense(_) => None,
        }
    }

    /// Materialized per-node values.
    pub fn to_vec(&self) -> Vec<f64> {
        match &self.values {
            CostValues::Uniform(c) => vec![*c; self.grid.len()],
            CostValues::Dense(v) => v.clone(),
        }
    }

    pub fn min_value(&self) -> f64 {
        match &self.values {
            CostValues::Uniform(c) => *c,
            CostValues::Dense(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Every value multiplied by `lambda`, which must keep values in (0, 1].
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        match &self.values {
            CostValues::Uniform(c) => CostVolume::uniform(self.grid, c * lambda),
            CostValues::Dense(v) => {
                CostVolume::from_values(self.grid, v.iter().map(|c| c * lambda).collect())
            }
        }
    }

    /// Tri-linear interpolation of the cost at `p`.
    pub fn interpolate(&self, p: &Pose) -> Result<f64> {
        match &self.values {
            CostValues::Uniform(c) => {
                self.grid.interpolate_check(p)?;
                Ok(*c)
            }
            CostValues::Dense(v) => self.grid.interpolate(v, p),
        }
    }
}

impl GridSpec {
    fn interpolate_check(&self, p: &Pose) -> Result<()> {
        self.spatial_coords(p).map(|_| ())
    }
}

fn validate_cost(index: usize, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidCost { index, value })
    }
}

/// Replicate a planar cost image over every orientation slice.
/// `image` is row-major with x fastest: `image[i + nx * j]`.
pub fn lift_cost_2d(image: &[f64], width: usize, height: usize, grid: GridSpec) -> Result<CostVolume> {
    if width != grid.nx || height != grid.ny || image.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} image", grid.nx, grid.ny),
            found: format!("{width}x{height} image with {} pixels", image.len()),
        });
    }
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.ntheta {
        values.extend_from_slice(image);
    }
    CostVolume::from_values(grid, values)
}

/// Solved distance map. `+∞` marks nodes the front never reached; seed nodes
/// hold exactly `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl DistanceField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} field values", grid.len()),
                found: format!("{}", values.len()),
            });
        }
        Ok(DistanceField { grid, values })
    }

    pub fn get(&self, i: i64, j: i64, k: i64) -> Result<f64> {
        Ok(self.values[self.grid.index_of(i, j, k)?])
    }

    pub fn interpolate(&self, p: &Pose) -> Result<f64> {
        self.grid.interpolate(&self.values, p)
    }

    /// Flat indices of nodes holding exactly zero.
    pub fn seed_nodes(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn seed_poses(&self) -> Vec<Pose> {
        self.seed_nodes()
            .into_iter()
            .map(|idx| {
                let (i, j, k) = self.grid.unflatten(idx);
                Pose::new(self.grid.x_of(i), self.grid.y_of(j), self.grid.theta_of(k as i64))
            })
            .collect()
    }

    pub fn max_finite(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }
}
