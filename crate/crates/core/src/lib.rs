//! Sub-Riemannian geodesics on the roto-translation group SE(2).
//!
//! The crate computes distance maps on a discretized SE(2) = R² ⋊ S¹ for the
//! cost-weighted metric
//!
//! ```text
//! G_ε(γ̇, γ̇) = C² (β² |ẋ cosθ + ẏ sinθ|² + |θ̇|²) + ε⁻² C² β² |ẋ sinθ − ẏ cosθ|²
//! ```
//!
//! whose ε ↓ 0 limit forbids sideways motion (the Reeds–Shepp car). The
//! pipeline is:
//!
//! 1. [`metric`]: left-invariant frame and the fixed-frame metric tensor and
//!    its closed-form inverse.
//! 2. [`grid`] / [`io`]: periodic-θ grid, cost volumes, distance fields,
//!    tri-linear interpolation and the raw volume file format.
//! 3. [`selling`]: obtuse-superbase reduction of the (grid-scaled) inverse
//!    metric into a nonnegative stencil on integer offsets.
//! 4. [`eikonal`]: causal fast marching on that stencil, and a Gauss–Seidel
//!    fixed-point solver of the same discrete system.
//! 5. [`tracer`]: RK4 backtracking of geodesics through the distance map.
//! 6. [`oracle`]: uniform-cost ground truth by Hamiltonian geodesic shooting,
//!    sphere sampling with minimal-arrival filtering, and the max relative
//!    error `E∞(t)`.
//!
//! Batch loops go through [`exec::Execution`]; with the `parallel` feature
//! (default) they are spread over the rayon pool.

pub mod eikonal;
pub mod error;
pub mod exec;
pub mod grid;
pub mod io;
pub mod metric;
pub mod oracle;
pub mod selling;
pub mod tracer;

pub use eikonal::{
    local_update, residual, solve, solve_with_stats, SolveConfig, SolveMode, SolveStats, StencilTable,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{CostVolume, DistanceField, GridSpec};
pub use metric::{MetricParams, Pose, SymMat3};
pub use oracle::{
    arrival_map, max_relative_error, sample_sphere, shoot, shoot_with_trail, ArrivalMap, ErrorReport, ShotGeodesic,
    SphereEndpoint, SphereParams, SphereSample,
};
pub use selling::{decompose, scaled_inverse_metric, SellingStencil, StencilTerm};
pub use tracer::{gradient_at, trace, GeodesicPath, TraceConfig};
