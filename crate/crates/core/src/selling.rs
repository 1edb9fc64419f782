//! Selling's decomposition of 3×3 symmetric positive definite matrices.
//!
//! A superbase is four integer vectors `b0..b3` summing to zero, any three of
//! which form a unimodular basis. It is D-obtuse when `bᵢᵀ D bⱼ ≤ 0` for all
//! `i ≠ j`; in that case
//!
//! ```text
//! D = Σ_{i<j} −(bᵢᵀ D bⱼ) · eᵢⱼ eᵢⱼᵀ,   eᵢⱼ = b_k × b_l  ({k, l} = complement of {i, j})
//! ```
//!
//! with nonnegative weights. Starting from the canonical superbase, any pair
//! with a positive scalar product is flipped
//! (`bᵢ → −bᵢ`, `b_k → b_k + bᵢ` for the two others) until the superbase is
//! obtuse.
//!
//! The resulting offsets drive the upwind scheme in [`crate::eikonal`]: for a
//! grid-scaled inverse metric they are expressed in index space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::metric::{inverse_metric, MetricParams, SymMat3};

/// Maximum number of superbase flips before giving up.
pub const MAX_FLIPS: usize = 1000;

/// Relative obtuseness tolerance, scaled by `trace(D)`.
pub const OBTUSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StencilTerm {
    pub weight: f64,
    pub offset: [i32; 3],
}

impl StencilTerm {
    pub fn offset_f64(&self) -> [f64; 3] {
        [self.offset[0] as f64, self.offset[1] as f64, self.offset[2] as f64]
    }
}

/// Nonnegative weights on pairwise non-parallel integer offsets, at most six.
/// Offsets are sign-normalized (first nonzero component positive); the scheme
/// always uses them as ± pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SellingStencil {
    pub terms: Vec<StencilTerm>,
}

impl SellingStencil {
    /// `Σ w e eᵀ`.
    pub fn reconstruct(&self) -> SymMat3 {
        let offsets: Vec<[f64; 3]> = self.terms.iter().map(StencilTerm::offset_f64).collect();
        SymMat3::from_rank_one_sum(self.terms.iter().zip(&offsets).map(|(t, e)| (t.weight, e)))
    }

    pub fn max_offset_component(&self) -> i32 {
        self.terms
            .iter()
            .flat_map(|t| t.offset.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// The stencil of `S D S` with `S = diag(1, −1, −1)`, term order kept.
    pub fn mirrored(&self) -> Self {
        SellingStencil {
            terms: self
                .terms
                .iter()
                .map(|t| StencilTerm {
                    weight: t.weight,
                    offset: normalize_sign([t.offset[0], -t.offset[1], -t.offset[2]]),
                })
                .collect(),
        }
    }
}

type Vec3i = [i64; 3];

fn cross(a: Vec3i, b: Vec3i) -> Vec3i {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn to_f64(v: Vec3i) -> [f64; 3] {
    [v[0] as f64, v[1] as f64, v[2] as f64]
}

fn normalize_sign(v: [i32; 3]) -> [i32; 3] {
    let first = v.iter().copied().find(|&c| c != 0).unwrap_or(0);
    if first < 0 {
        [-v[0], -v[1], -v[2]]
    } else {
        v
    }
}

/// The pairs (i, j) with their complementary (k, l).
const PAIRS: [((usize, usize), (usize, usize)); 6] = [
    ((0, 1), (2, 3)),
    ((0, 2), (1, 3)),
    ((0, 3), (1, 2)),
    ((1, 2), (0, 3)),
    ((1, 3), (0, 2)),
    ((2, 3), (0, 1)),
];

/// Obtuse-superbase reduction of `d`.
///
/// Weights within `OBTUSE_TOL · trace(d)` of zero are dropped, so the stencil
/// only lists active terms.
pub fn decompose(d: &SymMat3) -> Result<SellingStencil> {
    let entries = d.to_array();
    if entries.iter().flatten().any(|v| !v.is_finite()) || !d.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let tol = OBTUSE_TOL * d.trace();
    let mut b: [Vec3i; 4] = [[-1, -1, -1], [1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let dot = |b: &[Vec3i; 4], i: usize, j: usize| d.bilinear(to_f64(b[i]), to_f64(b[j]));

    let mut flips = 0;
    loop {
        let mut worst: Option<(usize, usize, f64)> = None;
        for &((i, j), _) in &PAIRS {
            let s = dot(&b, i, j);
            if s > tol && worst.is_none_or(|(_, _, w)| s > w) {
                worst = Some((i, j, s));
            }
        }
        let Some((i, j, _)) = worst else { break };
        if flips == MAX_FLIPS {
            return Err(Error::SellingIterationCap(MAX_FLIPS));
        }
        flips += 1;
        let bi = b[i];
        for (k, bk) in b.iter_mut().enumerate() {
            if k != i && k != j {
                for c in 0..3 {
                    bk[c] += bi[c];
                }
            }
        }
        b[i] = [-bi[0], -bi[1], -bi[2]];
    }

    let mut terms = Vec::with_capacity(6);
    for &((i, j), (k, l)) in &PAIRS {
        let w = -dot(&b, i, j);
        if w <= tol {
            continue;
        }
        let e = cross(b[k], b[l]);
        let offset = normalize_sign([e[0] as i32, e[1] as i32, e[2] as i32]);
        terms.push(StencilTerm { weight: w, offset });
    }
    Ok(SellingStencil { terms })
}

/// `H D_ε H` with `H = diag(1/hx, 1/hy, 1/hθ)`: the inverse metric in index
/// coordinates, whose decomposition yields offsets in grid steps.
pub fn scaled_inverse_metric(
    theta: f64,
    cost: f64,
    params: &MetricParams,
    grid: &GridSpec,
) -> Result<SymMat3> {
    let d = inverse_metric(theta, cost, params)?;
    let (sx, sy, st) = (1.0 / grid.hx, 1.0 / grid.hy, 1.0 / grid.htheta);
    Ok(SymMat3 {
        xx: d.xx * sx * sx,
        yy: d.yy * sy * sy,
        tt: d.tt * st * st,
        xy: d.xy * sx * sy,
        xt: d.xt * sx * st,
        yt: d.yt * sy * st,
    })
}
