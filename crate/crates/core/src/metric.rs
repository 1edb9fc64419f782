//! Left-invariant frame on SE(2) and the cost-weighted metric tensor in the
//! fixed (x, y, θ) frame.
//!
//! Coordinate order is (x, y, θ) throughout. With frame matrix R whose columns
//! are (X1, X2, X3) the metric is `M_ε = R diag(C²β², C², ε⁻²C²β²) Rᵀ` and its
//! inverse is built directly as `D_ε = R diag(C⁻²β⁻², C⁻², ε²C⁻²β⁻²) Rᵀ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point (x, y, θ) of SE(2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    /// Same pose with θ mapped into (−π, π].
    pub fn canonical(self) -> Self {
        Pose {
            theta: canonical_angle(self.theta),
            ..self
        }
    }

    /// Euclidean distance in (x, y, θ) with θ measured along the circle.
    pub fn distance(&self, other: &Pose) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dt = angle_diff(self.theta, other.theta);
        (dx * dx + dy * dy + dt * dt).sqrt()
    }
}

/// Map an angle into (−π, π]. Angles already in range are returned untouched,
/// which makes the map idempotent bit-for-bit.
pub fn canonical_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Signed difference a − b wrapped into (−π, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    canonical_angle(a - b)
}

/// Relaxation and balance parameters of `G_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub epsilon: f64,
    pub beta: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            epsilon: 0.1,
            beta: 1.0,
        }
    }
}

impl MetricParams {
    pub fn new(epsilon: f64, beta: f64) -> Result<Self> {
        let p = MetricParams { epsilon, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Symmetric 3×3 matrix, (x, y, θ) order, six stored entries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymMat3 {
    pub xx: f64,
    pub yy: f64,
    pub tt: f64,
    pub xy: f64,
    pub xt: f64,
    pub yt: f64,
}

impl SymMat3 {
    pub fn identity() -> Self {
        SymMat3::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        SymMat3 {
            xx: a,
            yy: b,
            tt: c,
            ..Default::default()
        }
    }

    /// Build from a full row-major array; only the upper triangle is read.
    pub fn from_array(m: [[f64; 3]; 3]) -> Self {
        SymMat3 {
            xx: m[0][0],
            yy: m[1][1],
            tt: m[2][2],
            xy: m[0][1],
            xt: m[0][2],
            yt: m[1][2],
        }
    }

    pub fn to_array(&self) -> [[f64; 3]; 3] {
        [
            [self.xx, self.xy, self.xt],
            [self.xy, self.yy, self.yt],
            [self.xt, self.yt, self.tt],
        ]
    }

    /// `Σ wᵢ vᵢ vᵢᵀ`.
    pub fn from_rank_one_sum<'a>(terms: impl IntoIterator<Item = (f64, &'a [f64; 3])>) -> Self {
        let mut m = SymMat3::default();
        for (w, v) in terms {
            m.xx += w * v[0] * v[0];
            m.yy += w * v[1] * v[1];
            m.tt += w * v[2] * v[2];
            m.xy += w * v[0] * v[1];
            m.xt += w * v[0] * v[2];
            m.yt += w * v[1] * v[2];
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMat3 {
            xx: self.xx * s,
            yy: self.yy * s,
            tt: self.tt * s,
            xy: self.xy * s,
            xt: self.xt * s,
            yt: self.yt * s,
        }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.tt
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        [
            self.xx * v[0] + self.xy * v[1] + self.xt * v[2],
            self.xy * v[0] + self.yy * v[1] + self.yt * v[2],
            self.xt * v[0] + self.yt * v[1] + self.tt * v[2],
        ]
    }

    /// `uᵀ M v`.
    pub fn bilinear(&self, u: [f64; 3], v: [f64; 3]) -> f64 {
        let mv = self.mul_vec(v);
        u[0] * mv[0] + u[1] * mv[1] + u[2] * mv[2]
    }

    pub fn quad(&self, v: [f64; 3]) -> f64 {
        self.bilinear(v, v)
    }

    /// Plain (non-symmetric in general) matrix product.
    pub fn matmul(&self, other: &SymMat3) -> [[f64; 3]; 3] {
        let a = self.to_array();
        let b = other.to_array();
        let mut c = [[0.0; 3]; 3];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }

    pub fn frobenius(&self) -> f64 {
        (self.xx * self.xx
            + self.yy * self.yy
            + self.tt * self.tt
            + 2.0 * (self.xy * self.xy + self.xt * self.xt + self.yt * self.yt))
            .sqrt()
    }

    pub fn sub(&self, other: &SymMat3) -> Self {
        SymMat3 {
            xx: self.xx - other.xx,
            yy: self.yy - other.yy,
            tt: self.tt - other.tt,
            xy: self.xy - other.xy,
            xt: self.xt - other.xt,
            yt: self.yt - other.yt,
        }
    }

    /// Sylvester's criterion on the leading principal minors.
    pub fn is_positive_definite(&self) -> bool {
        let m1 = self.xx;
        let m2 = self.xx * self.yy - self.xy * self.xy;
        let m3 = self.xx * (self.yy * self.tt - self.yt * self.yt)
            - self.xy * (self.xy * self.tt - self.yt * self.xt)
            + self.xt * (self.xy * self.yt - self.yy * self.xt);
        m1 > 0.0 && m2 > 0.0 && m3 > 0.0
    }
}

/// The left-invariant frame (X1, X2, X3) at orientation θ, in fixed
/// coordinates.
pub fn frame(theta: f64) -> [[f64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    [[c, s, 0.0], [0.0, 0.0, 1.0], [-s, c, 0.0]]
}

/// `R diag(w) Rᵀ` for the frame at θ. X2 = ∂θ carries no spatial part, so
/// the (x,θ) and (y,θ) entries are exactly zero.
fn frame_conjugate(theta: f64, w_forward: f64, w_rotation: f64, w_sideways: f64) -> SymMat3 {
    let (s, c) = theta.sin_cos();
    SymMat3 {
        xx: w_forward * c * c + w_sideways * s * s,
        yy: w_forward * s * s + w_sideways * c * c,
        tt: w_rotation,
        xy: (w_forward - w_sideways) * c * s,
        xt: 0.0,
        yt: 0.0,
    }
}

fn check_cost(cost: f64) -> Result<()> {
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "cost must be positive, got {cost}"
        )));
    }
    Ok(())
}

/// Fixed-frame metric tensor `M_ε` at unit cost. Requires ε > 0.
fn unit_metric(theta: f64, params: &MetricParams) -> SymMat3 {
    let b2 = params.beta * params.beta;
    frame_conjugate(theta, b2, 1.0, b2 / (params.epsilon * params.epsilon))
}

/// Fixed-frame inverse metric `D_ε` at unit cost. Finite for ε = 0.
fn unit_inverse(theta: f64, params: &MetricParams) -> SymMat3 {
    let ib2 = 1.0 / (params.beta * params.beta);
    frame_conjugate(theta, ib2, 1.0, params.epsilon * params.epsilon * ib2)
}

/// Metric tensor `M_ε(θ, C)`.
///
/// Built as `C² · M_ε(θ, 1)` so the scalar-cost factorization holds bit for
/// bit.
pub fn metric_matrix(theta: f64, cost: f64, params: &MetricParams) -> Result<SymMat3> {
    params.validate()?;
    check_cost(cost)?;
    Ok(unit_metric(theta, params).scale(cost * cost))
}

/// Inverse metric `D_ε(θ, C) = C⁻² · D_ε(θ, 1)`, assembled in closed form
/// rather than by inverting `M_ε` (which is ill-conditioned as ε ↓ 0).
pub fn inverse_metric(theta: f64, cost: f64, params: &MetricParams) -> Result<SymMat3> {
    params.validate()?;
    check_cost(cost)?;
    Ok(unit_inverse(theta, params).scale(1.0 / (cost * cost)))
}

/// The rank-2 ε = 0 limit of `D_ε`. Diagnostics only; the solver rejects ε = 0.
pub fn sub_riemannian_inverse(theta: f64, cost: f64, beta: f64) -> Result<SymMat3> {
    check_cost(cost)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let limit = MetricParams { epsilon: 0.0, beta };
    Ok(unit_inverse(theta, &limit).scale(1.0 / (cost * cost)))
}

/// `G_ε(v, v) = vᵀ M_ε v`.
pub fn metric_norm_sq(v: [f64; 3], theta: f64, cost: f64, params: &MetricParams) -> Result<f64> {
    Ok(metric_matrix(theta, cost, params)?.quad(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P01: MetricParams = MetricParams {
        epsilon: 0.1,
        beta: 1.0,
    };

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn assert_mat(m: &SymMat3, expect: [[f64; 3]; 3], tol: f64) {
        let a = m.to_array();
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(a[i][j], expect[i][j], tol), "{m:?} vs {expect:?}");
            }
        }
    }

    #[test]
    fn frame_at_zero_and_quarter_turn() {
        let f = frame(0.0);
        assert_eq!(f[0], [1.0, 0.0, 0.0]);
        assert_eq!(f[1], [0.0, 0.0, 1.0]);
        assert_eq!(f[2], [-0.0, 1.0, 0.0]);
        let f = frame(PI / 2.0);
        assert!(close(f[0][0], 0.0, 1e-15) && close(f[0][1], 1.0, 1e-15));
        assert!(close(f[2][0], -1.0, 1e-15) && close(f[2][1], 0.0, 1e-15));
    }

    #[test]
    fn metric_examples() {
        assert_mat(
            &metric_matrix(0.0, 1.0, &P01).unwrap(),
            [[1.0, 0.0, 0.0], [0.0, 100.0, 0.0], [0.0, 0.0, 1.0]],
            1e-12,
        );
        assert_mat(
            &metric_matrix(PI / 2.0, 1.0, &P01).unwrap(),
            [[100.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            1e-12,
        );
        let iso = MetricParams::new(1.0, 1.0).unwrap();
        for theta in [-3.0, -1.0, 0.3, 2.5] {
            assert_mat(
                &metric_matrix(theta, 1.0, &iso).unwrap(),
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                1e-14,
            );
        }
    }

    #[test]
    fn inverse_examples() {
        assert_mat(
            &inverse_metric(0.0, 1.0, &P01).unwrap(),
            [[1.0, 0.0, 0.0], [0.0, 0.01, 0.0], [0.0, 0.0, 1.0]],
            1e-14,
        );
        let d1 = inverse_metric(0.7, 1.0, &P01).unwrap();
        let d2 = inverse_metric(0.7, 2.0, &P01).unwrap();
        assert_eq!(d2, d1.scale(0.25));
        assert_mat(
            &sub_riemannian_inverse(0.0, 1.0, 1.0).unwrap(),
            [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            0.0,
        );
    }

    #[test]
    fn norm_examples() {
        for theta in [-2.0, 0.0, 1.1] {
            let (s, c) = f64::sin_cos(theta);
            assert!(close(metric_norm_sq([0.0, 0.0, 1.0], theta, 1.0, &P01).unwrap(), 1.0, 1e-14));
            assert!(close(metric_norm_sq([c, s, 0.0], theta, 1.0, &P01).unwrap(), 1.0, 1e-13));
            assert!(close(metric_norm_sq([-s, c, 0.0], theta, 1.0, &P01).unwrap(), 100.0, 1e-13));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(metric_matrix(0.0, 0.0, &P01).is_err());
        assert!(metric_matrix(0.0, -1.0, &P01).is_err());
        let bad = MetricParams {
            epsilon: 0.0,
            beta: 1.0,
        };
        assert!(metric_matrix(0.0, 1.0, &bad).is_err());
        assert!(inverse_metric(0.0, 1.0, &bad).is_err());
        assert!(MetricParams::new(0.1, 0.0).is_err());
        assert!(MetricParams::new(1.5, 1.0).is_err());
    }

    #[test]
    fn canonical_angle_range() {
        assert_eq!(canonical_angle(PI), PI);
        assert_eq!(canonical_angle(-PI), PI);
        assert!(close(canonical_angle(3.0 * PI / 2.0), -PI / 2.0, 1e-15));
        assert!(close(canonical_angle(-7.0), -7.0 + 2.0 * PI, 1e-15));
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent(theta in -50.0f64..50.0) {
            let p = Pose::new(1.0, 2.0, theta).canonical();
            prop_assert!(p.theta > -PI && p.theta <= PI);
            prop_assert_eq!(p.canonical(), p);
        }

        #[test]
        fn frame_is_orthonormal(theta in -10.0f64..10.0) {
            let f = frame(theta);
            let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot(f[i], f[j]) - expect).abs() < 1e-15);
                }
            }
        }

        #[test]
        fn inverse_times_metric_is_identity(
            theta in -4.0f64..4.0, cost in 0.01f64..1.0, eps in 0.01f64..1.0, beta in 0.1f64..5.0
        ) {
            let p = MetricParams::new(eps, beta).unwrap();
            let m = metric_matrix(theta, cost, &p).unwrap();
            let d = inverse_metric(theta, cost, &p).unwrap();
            let prod = d.matmul(&m);
            for (i, row) in prod.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((v - expect).abs() < 1e-12, "{:?}", prod);
                }
            }
            prop_assert!(m.is_positive_definite());
            prop_assert!(d.is_positive_definite());
        }

        #[test]
        fn block_structure_and_cost_factorization(
            theta in -4.0f64..4.0, cost in 0.001f64..1.0, eps in 0.01f64..1.0
        ) {
            let p = MetricParams::new(eps, 1.3).unwrap();
            let m = metric_matrix(theta, cost, &p).unwrap();
            let d = inverse_metric(theta, cost, &p).unwrap();
            prop_assert_eq!((m.xt, m.yt, d.xt, d.yt), (0.0, 0.0, 0.0, 0.0));
            prop_assert_eq!(m.tt, cost * cost);
            prop_assert_eq!(m, metric_matrix(theta, 1.0, &p).unwrap().scale(cost * cost));
            prop_assert_eq!(d, inverse_metric(theta, 1.0, &p).unwrap().scale(1.0 / (cost * cost)));
        }

        #[test]
        fn rotation_covariance(theta in -4.0f64..4.0, phi in -4.0f64..4.0, eps in 0.05f64..1.0) {
            let p = MetricParams::new(eps, 1.0).unwrap();
            let m = metric_matrix(theta, 1.0, &p).unwrap().to_array();
            let rotated = metric_matrix(theta + phi, 1.0, &p).unwrap().to_array();
            let (s, c) = phi.sin_cos();
            let r = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            v += r[i][a] * m[a][b] * r[j][b];
                        }
                    }
                    prop_assert!((v - rotated[i][j]).abs() < 1e-9 * (1.0 + v.abs()));
                }
            }
        }

        #[test]
        fn norm_dominates_spatial_speed(
            v in proptest::array::uniform3(-3.0f64..3.0), theta in -4.0f64..4.0,
            cost in 0.01f64..1.0, eps in 0.01f64..1.0, beta in 0.1f64..3.0
        ) {
            let p = MetricParams::new(eps, beta).unwrap();
            let n = metric_norm_sq(v, theta, cost, &p).unwrap();
            let lower = cost * cost * beta * beta * (v[0] * v[0] + v[1] * v[1]);
            prop_assert!(n >= lower * (1.0 - 1e-12));
            let (s, c) = theta.sin_cos();
            let fwd = v[0] * c + v[1] * s;
            let side = v[0] * s - v[1] * c;
            let closed = cost * cost * (beta * beta * fwd * fwd + v[2] * v[2])
                + cost * cost * beta * beta * side * side / (eps * eps);
            prop_assert!((n - closed).abs() <= 1e-10 * (1.0 + closed));
        }
    }
}
