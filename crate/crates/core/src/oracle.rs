//! Uniform-cost ground truth (C = 1, β = 1) by geodesic shooting.
//!
//! With momentum components `hᵢ = ⟨λ, Xᵢ⟩` and the brackets
//! `[X2, X1] = X3`, `[X2, X3] = −X1`, `[X1, X3] = 0`, the normal extremals of
//! `H = ½(h1² + h2²)` satisfy
//!
//! ```text
//! ẋ = h1 cosθ   ẏ = h1 sinθ   θ̇ = h2
//! ḣ1 = h2 h3    ḣ2 = −h1 h3   ḣ3 = −h1 h2
//! ```
//!
//! On the level set `h1² + h2² = 1` the curves are arclength parametrized, so
//! a geodesic shot for time t has sub-Riemannian length t. It is only
//! minimizing up to its cut time. [`sample_sphere`] approximates the
//! restriction to minimizers two ways: an endpoint is dropped if any shot
//! geodesic reaches its (x, y, θ) bin strictly earlier, or if its geodesic
//! has already passed a point where a distinct geodesic of equal length
//! arrives.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::DistanceField;
use crate::metric::{canonical_angle, Pose};

type State = [f64; 6];

fn rhs(s: &State) -> State {
    let [_, _, theta, h1, h2, h3] = *s;
    let (sn, cs) = theta.sin_cos();
    [h1 * cs, h1 * sn, h2, h2 * h3, -h1 * h3, -h1 * h2]
}

fn rk4_step(s: &State, h: f64) -> State {
    let add = |a: &State, k: &State, f: f64| -> State { std::array::from_fn(|i| a[i] + f * k[i]) };
    let k1 = rhs(s);
    let k2 = rhs(&add(s, &k1, 0.5 * h));
    let k3 = rhs(&add(s, &k2, 0.5 * h));
    let k4 = rhs(&add(s, &k3, h));
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn initial_state(alpha: f64, c: f64) -> State {
    [0.0, 0.0, 0.0, alpha.cos(), alpha.sin(), c]
}

fn state_pose(s: &State) -> Pose {
    Pose::new(s[0], s[1], canonical_angle(s[2]))
}

/// Number of RK4 steps and their size for integrating to exactly `t_max`.
fn step_plan(t_max: f64, dt: f64) -> (usize, f64) {
    let n = ((t_max / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, t_max / n as f64)
}

fn validate_shot(t_max: f64, dt: f64) -> Result<()> {
    if !(t_max > 0.0 && t_max.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need t_max > 0 and dt > 0, got t_max={t_max} dt={dt}"
        )));
    }
    Ok(())
}

/// One shot geodesic from the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotGeodesic {
    pub alpha: f64,
    pub c: f64,
    pub endpoint: Pose,
    pub length: f64,
    /// Final momentum (h1, h2, h3).
    pub momentum: [f64; 3],
    /// Pose after every step, starting at the origin; only from
    /// [`shoot_with_trail`].
    pub trail: Option<Vec<Pose>>,
}

/// Integrate from `(0, 0, 0; cos α, sin α, c)` for arclength `t_max`.
pub fn shoot(alpha: f64, c: f64, t_max: f64, dt: f64) -> Result<ShotGeodesic> {
    shoot_impl(alpha, c, t_max, dt, false)
}

pub fn shoot_with_trail(alpha: f64, c: f64, t_max: f64, dt: f64) -> Result<ShotGeodesic> {
    shoot_impl(alpha, c, t_max, dt, true)
}

fn shoot_impl(alpha: f64, c: f64, t_max: f64, dt: f64, keep: bool) -> Result<ShotGeodesic> {
    validate_shot(t_max, dt)?;
    let (n, h) = step_plan(t_max, dt);
    let mut s = initial_state(alpha, c);
    let mut trail = keep.then(|| {
        let mut v = Vec::with_capacity(n + 1);
        v.push(state_pose(&s));
        v
    });
    for _ in 0..n {
        s = rk4_step(&s, h);
        if let Some(t) = trail.as_mut() {
            t.push(state_pose(&s));
        }
    }
    Ok(ShotGeodesic {
        alpha,
        c,
        endpoint: state_pose(&s),
        length: t_max,
        momentum: [s[3], s[4], s[5]],
        trail,
    })
}

/// Sampling density of the (α, c) momentum grid and the binning resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereParams {
    pub n_alpha: usize,
    pub n_c: usize,
    pub c_max: f64,
    pub dt: f64,
    pub bin_size: f64,
}

impl Default for SphereParams {
    fn default() -> Self {
        SphereParams {
            n_alpha: 64,
            n_c: 201,
            c_max: 6.0,
            dt: 1e-3,
            bin_size: 0.05,
        }
    }
}

impl SphereParams {
    fn validate(&self) -> Result<()> {
        if self.n_alpha == 0 || self.n_c == 0 {
            return Err(Error::InvalidParameter("n_alpha and n_c must be positive".into()));
        }
        if !(self.c_max >= 0.0 && self.dt > 0.0 && self.bin_size > 0.0) {
            return Err(Error::InvalidParameter(format!("bad sphere parameters {self:?}")));
        }
        Ok(())
    }

    /// The shot momenta: α = 2πm/n_alpha, c evenly spaced over [−c_max, c_max].
    pub fn momenta(&self) -> Vec<(f64, f64)> {
        let cs: Vec<f64> = if self.n_c == 1 {
            vec![0.0]
        } else {
            (0..self.n_c)
                .map(|m| -self.c_max + 2.0 * self.c_max * m as f64 / (self.n_c - 1) as f64)
                .collect()
        };
        let mut out = Vec::with_capacity(self.n_alpha * cs.len());
        for m in 0..self.n_alpha {
            let alpha = 2.0 * PI * m as f64 / self.n_alpha as f64;
            for &c in &cs {
                out.push((alpha, c));
            }
        }
        out
    }
}

type BinKey = (i64, i64, i64);

/// Bins are centered on multiples of `size`, so the coordinate axes run
/// through bin centers rather than along bin faces.
fn bin_of(p: &Pose, size: f64) -> BinKey {
    let turn = (2.0 * PI / size).ceil() as i64;
    let t = p.theta.rem_euclid(2.0 * PI);
    (
        (p.x / size).round() as i64,
        (p.y / size).round() as i64,
        ((t / size).round() as i64) % turn,
    )
}

/// First-arrival times of all shot geodesics into (x, y, θ) bins, sampled on
/// the integration grid.
#[derive(Debug, Clone)]
pub struct ArrivalMap {
    bin_size: f64,
    first: HashMap<BinKey, f64>,
}

impl ArrivalMap {
    /// Earliest time any shot geodesic was seen in the bin containing `p`.
    pub fn first_arrival(&self, p: &Pose) -> Option<f64> {
        self.first.get(&bin_of(p, self.bin_size)).copied()
    }

    pub fn bins(&self) -> usize {
        self.first.len()
    }
}

/// Values below this are treated as zero when looking for sign changes.
const SIGN_FLOOR: f64 = 1e-12;

/// `R1 = y cos(θ/2) − x sin(θ/2)`, `R2 = x cos(θ/2) + y sin(θ/2)` and
/// `R3 = cos(θ/2)` on the unwrapped angle. Their zero sets are fixed by
/// inversion composed with `(x, y, θ) ↦ (−x, y, −θ)`, with
/// `(x, y, θ) ↦ (x, −y, −θ)`, and by plain inversion. Where a geodesic from
/// the origin to `g` changes their sign, the reversed curve `s ↦ g⁻¹γ(t − s)`
/// mapped by that reflection is a twin of the same length ending at `g`.
/// Unless the geodesic is its own twin, it stops minimizing there.
fn reflection_invariants(s: &State) -> [f64; 3] {
    let (sn, cs) = (0.5 * s[2]).sin_cos();
    [s[1] * cs - s[0] * sn, s[0] * cs + s[1] * sn, cs]
}

/// Initial momentum `(α, c)` of the twin through a zero of `R[m]` reached in
/// state `s`.
fn twin_momentum(s: &State, m: usize) -> (f64, f64) {
    let [_, _, _, h1, h2, h3] = *s;
    match m {
        0 => (h2.atan2(h1), -h3),
        1 => (h2.atan2(-h1), h3),
        _ => ((-h2).atan2(-h1), -h3),
    }
}

/// Momenta closer than this are the same geodesic.
const TWIN_TOL: f64 = 1e-6;

fn same_momentum(a: (f64, f64), b: (f64, f64)) -> bool {
    canonical_angle(a.0 - b.0).abs() < TWIN_TOL && (a.1 - b.1).abs() < TWIN_TOL
}

/// Locate the zero of `R[m]` within the RK4 step of size `h` from `s`, whose
/// sign at `s` is `sign`. Returns the offset into the step and the state there.
fn bisect_crossing(s: &State, h: f64, m: usize, sign: f64) -> (f64, State) {
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if reflection_invariants(&rk4_step(s, mid))[m] * sign > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, rk4_step(s, lo))
}

/// Per-geodesic result of a sphere run.
struct Run {
    alpha: f64,
    c: f64,
    endpoint: Pose,
    /// Time the geodesic first entered its endpoint's bin.
    own_entry: f64,
    /// First time the geodesic met a twin distinct from itself.
    maxwell: Option<f64>,
    /// First entry time into every bin the geodesic visited.
    arrivals: HashMap<BinKey, f64>,
}

fn run_geodesic(alpha: f64, c: f64, t: f64, dt: f64, bin: f64) -> Run {
    let (n, h) = step_plan(t, dt);
    let mut s = initial_state(alpha, c);
    let mut current = bin_of(&state_pose(&s), bin);
    let mut arrivals = HashMap::from([(current, 0.0)]);
    let mut signs = [0.0f64; 3];
    let mut maxwell = None;
    for step in 1..=n {
        let prev = s;
        s = rk4_step(&s, h);
        let time = step as f64 * h;
        if maxwell.is_none() {
            for (m, r) in reflection_invariants(&s).into_iter().enumerate() {
                if r.abs() <= SIGN_FLOOR {
                    continue;
                }
                if signs[m] * r < 0.0 {
                    let (_, at) = bisect_crossing(&prev, h, m, signs[m]);
                    if !same_momentum(twin_momentum(&at, m), (alpha, c)) {
                        maxwell = Some(time);
                    }
                }
                signs[m] = r.signum();
            }
        }
        let key = bin_of(&state_pose(&s), bin);
        if key != current {
            arrivals.entry(key).or_insert(time);
            current = key;
        }
    }
    Run {
        alpha,
        c,
        endpoint: state_pose(&s),
        own_entry: arrivals[&current],
        maxwell,
        arrivals,
    }
}

/// Arrival map from shooting every momentum of `params` up to time `t`.
pub fn arrival_map(t: f64, params: &SphereParams, exec: Execution) -> Result<ArrivalMap> {
    Ok(sphere_runs(t, params, exec)?.1)
}

/// Shots per batch; bounds the memory held by per-geodesic arrival tables.
const BATCH: usize = 256;

fn sphere_runs(t: f64, params: &SphereParams, exec: Execution) -> Result<(Vec<Run>, ArrivalMap)> {
    params.validate()?;
    validate_shot(t, params.dt)?;
    let momenta = params.momenta();
    let mut first: HashMap<BinKey, f64> = HashMap::new();
    let mut runs = Vec::with_capacity(momenta.len());
    for chunk in momenta.chunks(BATCH) {
        let batch = exec.map(chunk, |&(a, c)| run_geodesic(a, c, t, params.dt, params.bin_size));
        for mut run in batch {
            for (key, time) in run.arrivals.drain() {
                first
                    .entry(key)
                    .and_modify(|v| *v = v.min(time))
                    .or_insert(time);
            }
            run.arrivals = HashMap::new();
            runs.push(run);
        }
    }
    Ok((
        runs,
        ArrivalMap {
            bin_size: params.bin_size,
            first,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereEndpoint {
    pub alpha: f64,
    pub c: f64,
    pub pose: Pose,
    pub t: f64,
}

/// Endpoints of shot geodesics at arclength `radius`, filtered to minimal
/// arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSample {
    pub radius: f64,
    pub endpoints: Vec<SphereEndpoint>,
    /// Number of geodesics shot.
    pub shots: usize,
}

impl SphereSample {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,c,x,y,theta,t\n");
        for e in &self.endpoints {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.alpha, e.c, e.pose.x, e.pose.y, e.pose.theta, e.t
            ));
        }
        out
    }
}

/// Shoot the momentum grid to arclength `t` and keep the endpoints whose
/// geodesic was the first to enter their bin and has not yet met a distinct
/// twin of equal length.
///
/// Binning alone needs some sampled geodesic to pass through the same bin
/// earlier, which the momentum grid rarely provides away from the axes; the
/// sign test catches those. Both tests can also drop valid endpoints.
pub fn sample_sphere(t: f64, params: &SphereParams, exec: Execution) -> Result<SphereSample> {
    let (runs, map) = sphere_runs(t, params, exec)?;
    let shots = runs.len();
    let endpoints: Vec<SphereEndpoint> = runs
        .into_iter()
        .filter(|r| map.first[&bin_of(&r.endpoint, params.bin_size)] >= r.own_entry)
        .filter(|r| r.maxwell.is_none_or(|m| m >= t))
        .map(|r| SphereEndpoint {
            alpha: r.alpha,
            c: r.c,
            pose: r.endpoint,
            t,
        })
        .collect();
    if endpoints.is_empty() {
        return Err(Error::EmptySample(format!(
            "no minimal arrivals at t={t}; sampling is too coarse"
        )));
    }
    Ok(SphereSample {
        radius: t,
        endpoints,
        shots,
    })
}

/// Result of comparing a distance map against a sphere sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `max |W(g) − t| / t` over the used endpoints.
    pub e_inf: f64,
    pub used: usize,
    /// Endpoints whose interpolation stencil touched +∞.
    pub excluded: usize,
}

/// The max relative error `E∞(t) = max |W(g) − t| / t`, W tri-linearly
/// interpolated.
pub fn max_relative_error(field: &DistanceField, sample: &SphereSample) -> Result<ErrorReport> {
    let mut report = ErrorReport {
        e_inf: 0.0,
        used: 0,
        excluded: 0,
    };
    for e in &sample.endpoints {
        let w = field.interpolate(&e.pose)?;
        if !w.is_finite() {
            report.excluded += 1;
            continue;
        }
        report.used += 1;
        report.e_inf = report.e_inf.max((w - e.t).abs() / e.t);
    }
    if report.used == 0 {
        return Err(Error::EmptySample("every endpoint touched an unreached node".into()));
    }
    Ok(report)
}
