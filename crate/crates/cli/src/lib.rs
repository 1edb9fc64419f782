//! `se2fm` command line: solve, trace, validate, sphere and convert.
//!
//! Every run writes a JSON manifest next to its main output listing the
//! configuration, grid, phase timings, output checksums and errors. The
//! process exits non-zero iff the manifest holds an error; each error is
//! also printed to stderr as `{"error": {"code": ..., "message": ...}}`.

mod commands;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use manifest::{ErrorRecord, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "se2fm", version, about = "Sub-Riemannian fast marching on SE(2)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the distance map from one or more seed nodes.
    Solve(SolveArgs),
    /// Backtrack geodesics from start poses down a solved distance map.
    Trace(TraceArgs),
    /// Compare uniform-cost solves against shot geodesic spheres.
    Validate(ValidateArgs),
    /// Export the grid nodes on a level set of a distance map.
    Sphere(SphereArgs),
    /// Turn an 8-bit PGM image into a cost volume.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    /// Fast marching.
    Fm,
    /// Gauss–Seidel fixed-point iteration.
    Fp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DtypeArg {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(allow_negative_numbers = true, group = clap::ArgGroup::new("source").required(true).args(["cost", "uniform"]))]
pub struct SolveArgs {
    /// Cost volume header.
    #[arg(long)]
    pub cost: Option<PathBuf>,
    /// Uniform unit cost on the validation grid of `--paper-n`.
    #[arg(long, requires = "paper_n")]
    pub uniform: bool,
    /// Grid resolution n: step π/n, 4n+1 spatial nodes per axis, 2n angles.
    #[arg(long, conflicts_with = "cost")]
    pub paper_n: Option<usize>,
    /// Seed node i,j,k; repeatable. Defaults to the center node at θ = 0.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_index)]
    pub seed: Vec<(i64, i64, i64)>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "fm")]
    pub mode: ModeArg,
    /// Output field header; the data goes next to it as `<stem>.raw`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "f32")]
    pub dtype: DtypeArg,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct TraceArgs {
    /// Distance field header.
    #[arg(long)]
    pub field: PathBuf,
    /// Cost volume header; uniform unit cost when omitted.
    #[arg(long)]
    pub cost: Option<PathBuf>,
    /// Start pose x,y,theta; repeatable.
    #[arg(long, required = true, allow_hyphen_values = true, value_parser = parse_pose)]
    pub start: Vec<(f64, f64, f64)>,
    /// Euclidean (x, y, θ) step length.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Output path; with several starts, start m goes to `<stem>_<m>.<ext>`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: PathFormat,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ValidateArgs {
    /// Sphere radii.
    #[arg(long = "t", value_delimiter = ',', default_value = "2,4,6")]
    pub t: Vec<f64>,
    /// Grid resolutions.
    #[arg(long = "n", value_delimiter = ',', default_value = "25,50,101")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Output CSV with rows `n,t,E_inf,cpu_seconds`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SphereArgs {
    /// Distance field header.
    #[arg(long)]
    pub field: PathBuf,
    /// Level-set value.
    #[arg(long = "t")]
    pub t: f64,
    /// Output CSV with rows `i,j,k,x,y,theta,w`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ConvertArgs {
    /// 8-bit PGM image (P2 or P5).
    #[arg(long)]
    pub pgm: PathBuf,
    /// Cost is ((v + 1) / 256)^gamma, clamped to [1e-3, 1].
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Number of orientation slices.
    #[arg(long, default_value_t = 64)]
    pub ntheta: usize,
    /// Pixel spacing.
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    /// Output cost header.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> Result<(T, T, T), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected three comma-separated values, got {s:?}"));
    };
    let p = |v: &str| v.parse::<T>().map_err(|_| format!("bad number {v:?} in {s:?}"));
    Ok((p(a)?, p(b)?, p(c)?))
}

fn parse_index(s: &str) -> Result<(i64, i64, i64), String> {
    parse_triple(s)
}

fn parse_pose(s: &str) -> Result<(f64, f64, f64), String> {
    parse_triple(s)
}

/// Run one subcommand, write its manifest and report errors. Returns true on
/// success.
pub fn run(cli: Cli) -> bool {
    let (manifest, out) = match cli.command {
        Command::Solve(a) => (commands::solve(&a), a.out),
        Command::Trace(a) => (commands::trace(&a), a.out),
        Command::Validate(a) => (commands::validate(&a), a.out),
        Command::Sphere(a) => (commands::sphere(&a), a.out),
        Command::Convert(a) => (commands::convert(&a), a.out),
    };
    let mut manifest = manifest;
    let path = RunManifest::path_for(&out);
    if let Err(e) = manifest.write(&path) {
        manifest
            .errors
            .push(ErrorRecord::new("io", format!("writing {}: {e}", path.display())));
    }
    for e in &manifest.errors {
        eprintln!("{}", e.to_json());
    }
    manifest.ok()
}
