//! Geodesic backtracking: integrate `γ̇ = −M_ε⁻¹ ∇W(γ)` from an endpoint down
//! the distance map until a seed is reached.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CostVolume, DistanceField};
use crate::metric::{angle_diff, inverse_metric, metric_norm_sq, MetricParams, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Euclidean (x, y, θ) length of one RK4 step. Default `0.25 · min step`.
    pub step: Option<f64>,
    /// Stop once within this distance of a seed. Default one cell diagonal.
    pub seed_radius: Option<f64>,
}

/// Poses from the start toward the seed, with cumulative metric length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub poses: Vec<Pose>,
    pub arclength: Vec<f64>,
}

impl GeodesicPath {
    pub fn length(&self) -> f64 {
        self.arclength.last().copied().unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,theta,arclength\n");
        for (p, s) in self.poses.iter().zip(&self.arclength) {
            out.push_str(&format!("{},{},{},{}\n", p.x, p.y, p.theta, s));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("path serializes")
    }
}

/// Central differences of the interpolated field with half-cell steps.
pub fn gradient_at(field: &DistanceField, p: &Pose) -> Result<[f64; 3]> {
    let g = &field.grid;
    let h = [0.5 * g.hx, 0.5 * g.hy, 0.5 * g.htheta];
    let mut grad = [0.0; 3];
    for (axis, slot) in grad.iter_mut().enumerate() {
        let mut plus = *p;
        let mut minus = *p;
        match axis {
            0 => {
                plus.x += h[0];
                minus.x -= h[0];
            }
            1 => {
                plus.y += h[1];
                minus.y -= h[1];
            }
            _ => {
                plus.theta += h[2];
                minus.theta -= h[2];
            }
        }
        let (wp, wm) = (field.interpolate(&plus)?, field.interpolate(&minus)?);
        if !wp.is_finite() || !wm.is_finite() {
            return Err(Error::Unreachable {
                x: p.x,
                y: p.y,
                theta: p.theta,
            });
        }
        *slot = (wp - wm) / (2.0 * h[axis]);
    }
    Ok(grad)
}

struct Tracer<'a> {
    field: &'a DistanceField,
    cost: &'a CostVolume,
    params: &'a MetricParams,
    step: f64,
}

impl Tracer<'_> {
    /// Descent direction `−D_ε ∇W`, rescaled to Euclidean length `step`.
    fn velocity(&self, p: &Pose) -> Result<[f64; 3]> {
        let grad = gradient_at(self.field, p)?;
        let c = self.cost.interpolate(p)?;
        let v = inverse_metric(p.theta, c, self.params)?.mul_vec(grad);
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Ok([0.0; 3]);
        }
        let s = -self.step / norm;
        Ok([v[0] * s, v[1] * s, v[2] * s])
    }

    fn rk4(&self, p: &Pose) -> Result<Pose> {
        let at = |q: &Pose, k: [f64; 3], f: f64| Pose::new(q.x + f * k[0], q.y + f * k[1], q.theta + f * k[2]);
        let k1 = self.velocity(p)?;
        let k2 = self.velocity(&at(p, k1, 0.5))?;
        let k3 = self.velocity(&at(p, k2, 0.5))?;
        let k4 = self.velocity(&at(p, k3, 1.0))?;
        let d: [f64; 3] = std::array::from_fn(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
        Ok(at(p, d, 1.0).canonical())
    }

    /// `G_ε` length of the chord from `a` to `b`, metric taken at the midpoint.
    fn segment_length(&self, a: &Pose, b: &Pose) -> Result<f64> {
        let d = [b.x - a.x, b.y - a.y, angle_diff(b.theta, a.theta)];
        let mid = Pose::new(a.x + 0.5 * d[0], a.y + 0.5 * d[1], a.theta + 0.5 * d[2]);
        let c = self.cost.interpolate(&mid)?;
        Ok(metric_norm_sq(d, mid.theta, c, self.params)?.sqrt())
    }
}

/// Backtrack from `start` to the nearest seed of `field` (nodes at exactly 0).
///
/// RK4 with fixed Euclidean step; the path ends with the exact seed pose.
pub fn trace(
    field: &DistanceField,
    cost: &CostVolume,
    params: &MetricParams,
    start: Pose,
    config: &TraceConfig,
) -> Result<GeodesicPath> {
    params.validate()?;
    let g = &field.grid;
    if cost.grid() != g {
        return Err(Error::DimensionMismatch {
            expected: format!("{g:?}"),
            found: format!("{:?}", cost.grid()),
        });
    }
    let step = config.step.unwrap_or(0.25 * g.min_step());
    let radius = config.seed_radius.unwrap_or(g.cell_diagonal());
    if !(step > 0.0) || !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step ({step}) must be positive and seed radius ({radius}) nonnegative"
        )));
    }
    let start = start.canonical();
    let w0 = field.interpolate(&start)?;
    if !w0.is_finite() {
        return Err(Error::Unreachable {
            x: start.x,
            y: start.y,
            theta: start.theta,
        });
    }
    let seeds = field.seed_poses();
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("distance field has no seed nodes".into()));
    }
    let tracer = Tracer {
        field,
        cost,
        params,
        step,
    };
    let nearest_seed = |p: &Pose| -> (f64, Pose) {
        seeds
            .iter()
            .map(|s| (p.distance(s), *s))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("nonempty")
    };

    let cap = (10.0 * (g.nx + g.ny + g.ntheta) as f64 / 0.25).ceil() as usize;
    let mut poses = vec![start];
    let mut arclength = vec![0.0];
    let mut current = start;
    for _ in 0..=cap {
        let (dist, seed) = nearest_seed(&current);
        if dist <= radius {
            if dist > 0.0 {
                let len = tracer.segment_length(&current, &seed)?;
                poses.push(seed);
                arclength.push(arclength.last().unwrap() + len);
            }
            return Ok(GeodesicPath { poses, arclength });
        }
        let next = tracer.rk4(&current)?;
        if next == current {
            break;
        }
        let len = tracer.segment_length(&current, &next)?;
        poses.push(next);
        arclength.push(arclength.last().unwrap() + len);
        current = next;
    }
    Err(Error::TraceNotConverged(cap))
}
