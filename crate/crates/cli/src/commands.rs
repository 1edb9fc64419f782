use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::{DynamicImage, ImageReader};
use se2fm::io::{self, Dtype};
use se2fm::{
    max_relative_error, residual, sample_sphere, CostVolume, DistanceField, Execution, GridSpec, MetricParams,
    Pose, SolveConfig, SolveMode, SphereParams, TraceConfig,
};

use crate::manifest::{ErrorRecord, RunManifest};
use crate::{ConvertArgs, DtypeArg, ModeArg, PathFormat, SolveArgs, SphereArgs, TraceArgs, ValidateArgs};

type Step<T = ()> = Result<T, ErrorRecord>;

fn io_err(path: &Path, e: std::io::Error) -> ErrorRecord {
    ErrorRecord::new("io", format!("{}: {e}", path.display()))
}

fn config<T: serde::Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

/// Run `body`, recording its error (if any) in a fresh manifest.
fn with_manifest<T: serde::Serialize>(
    name: &str,
    args: &T,
    body: impl FnOnce(&mut RunManifest) -> Step,
) -> RunManifest {
    let mut m = RunManifest::new(name, config(args));
    if let Err(e) = body(&mut m) {
        m.errors.push(e);
    }
    m
}

fn timed<T>(m: &mut RunManifest, phase: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    m.timings.insert(phase.to_string(), t0.elapsed().as_secs_f64());
    out
}

fn record(m: &mut RunManifest, path: &Path) -> Step {
    m.output(path).map_err(|e| io_err(path, e))
}

fn write_file(m: &mut RunManifest, path: &Path, text: &str) -> Step {
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    record(m, path)
}

pub fn solve(a: &SolveArgs) -> RunManifest {
    with_manifest("solve", a, |m| {
        let params = MetricParams::new(a.epsilon, a.beta)?;
        let cost = timed(m, "load", || match (&a.cost, a.paper_n) {
            (Some(path), _) => io::load_cost(path),
            (None, Some(n)) => CostVolume::uniform(GridSpec::paper(n)?, 1.0),
            (None, None) => Err(se2fm::Error::InvalidParameter("no cost source".into())),
        })?;
        let grid = *cost.grid();
        m.grid = Some(grid);
        let seeds = if a.seed.is_empty() {
            vec![(
                (grid.nx / 2) as i64,
                (grid.ny / 2) as i64,
                grid.nearest_slice(0.0) as i64,
            )]
        } else {
            a.seed.clone()
        };
        let mode = match a.mode {
            ModeArg::Fm => SolveMode::FastMarching,
            ModeArg::Fp => SolveMode::FixedPoint,
        };
        let config = SolveConfig::new(params, seeds).with_mode(mode);
        let field = timed(m, "solve", || se2fm::solve(&cost, &config))?;
        let res = timed(m, "residual", || residual(&field, &cost, &params, Execution::default()))?;
        let dtype = match a.dtype {
            DtypeArg::F32 => Dtype::F32,
            DtypeArg::F64 => Dtype::F64,
        };
        let data = timed(m, "write", || io::save_field(&field, &a.out, dtype))?;
        record(m, &a.out)?;
        record(m, &data)?;
        println!(
            "solved {}x{}x{} grid in {:.3} s; max residual {res:.3e}",
            grid.nx, grid.ny, grid.ntheta, m.timings["solve"]
        );
        Ok(())
    })
}

/// Output path of start `m` out of `total`.
fn numbered(out: &Path, m: usize, total: usize) -> PathBuf {
    if total == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match out.extension() {
        Some(ext) => out.with_file_name(format!("{stem}_{m}.{}", ext.to_string_lossy())),
        None => out.with_file_name(format!("{stem}_{m}")),
    }
}

pub fn trace(a: &TraceArgs) -> RunManifest {
    with_manifest("trace", a, |m| {
        let params = MetricParams::new(a.epsilon, a.beta)?;
        let field = timed(m, "load", || -> se2fm::Result<DistanceField> { io::load_field(&a.field) })?;
        let cost = match &a.cost {
            Some(path) => io::load_cost(path)?,
            None => CostVolume::uniform(field.grid, 1.0)?,
        };
        if *cost.grid() != field.grid {
            return Err(se2fm::Error::DimensionMismatch {
                expected: format!("{:?}", field.grid),
                found: format!("{:?}", cost.grid()),
            }
            .into());
        }
        m.grid = Some(field.grid);
        let config = TraceConfig {
            step: a.step,
            seed_radius: None,
        };
        let t0 = Instant::now();
        for (k, &(x, y, theta)) in a.start.iter().enumerate() {
            let start = Pose::new(x, y, theta);
            let context = format!("start {k} ({x},{y},{theta})");
            let path = match se2fm::trace(&field, &cost, &params, start, &config) {
                Ok(p) => p,
                Err(e) => {
                    m.errors.push(ErrorRecord::from(e).with_context(context));
                    continue;
                }
            };
            let w = field.interpolate(&start)?;
            let out = numbered(&a.out, k, a.start.len());
            let text = match a.format {
                PathFormat::Csv => path.to_csv(),
                PathFormat::Json => path.to_json() + "\n",
            };
            write_file(m, &out, &text)?;
            println!(
                "{context}: {} poses, length {:.6}, W(start) {w:.6} -> {}",
                path.poses.len(),
                path.length(),
                out.display()
            );
        }
        m.timings.insert("trace".into(), t0.elapsed().as_secs_f64());
        Ok(())
    })
}

pub fn validate(a: &ValidateArgs) -> RunManifest {
    with_manifest("validate", a, |m| {
        let params = MetricParams::new(a.epsilon, 1.0)?;
        let sphere = SphereParams::default();
        let mut samples = Vec::new();
        for &t in &a.t {
            let s = timed(m, &format!("sphere_t{t}"), || sample_sphere(t, &sphere, Execution::default()))?;
            samples.push(s);
        }
        let mut csv = String::from("n,t,E_inf,cpu_seconds\n");
        for &n in &a.n {
            let grid = GridSpec::paper(n)?;
            let cost = CostVolume::uniform(grid, 1.0)?;
            let (i, j, k) = grid.nearest_node(&Pose::new(0.0, 0.0, 0.0))?;
            let config = SolveConfig::new(params, vec![(i as i64, j as i64, k as i64)]);
            let phase = format!("solve_n{n}");
            let field = timed(m, &phase, || se2fm::solve(&cost, &config))?;
            let secs = m.timings[&phase];
            for s in &samples {
                let e = max_relative_error(&field, s)?.e_inf;
                writeln!(csv, "{n},{},{e},{secs}", s.radius).expect("string write");
                println!("n={n} t={} E_inf={e:.5} solve {secs:.2} s", s.radius);
            }
        }
        write_file(m, &a.out, &csv)
    })
}

pub fn sphere(a: &SphereArgs) -> RunManifest {
    with_manifest("sphere", a, |m| {
        let field = io::load_field(&a.field)?;
        let g = field.grid;
        m.grid = Some(g);
        let half = 0.5 * g.cell_diagonal();
        let mut csv = String::from("i,j,k,x,y,theta,w\n");
        let mut count = 0;
        for (idx, &w) in field.values.iter().enumerate() {
            if w.is_finite() && (w - a.t).abs() <= half {
                let (i, j, k) = g.unflatten(idx);
                let p = g.pose_of(i as i64, j as i64, k as i64)?;
                writeln!(csv, "{i},{j},{k},{},{},{},{w}", p.x, p.y, p.theta).expect("string write");
                count += 1;
            }
        }
        if count == 0 {
            eprintln!(
                "warning: no nodes with |W - {}| <= {half:.4}; max finite W is {:.4}",
                a.t,
                field.max_finite()
            );
        } else {
            println!("{count} nodes in the shell |W - {}| <= {half:.4}", a.t);
        }
        write_file(m, &a.out, &csv)
    })
}

/// Cost of an 8-bit pixel value: `((v + 1) / 256)^gamma` clamped to [1e-3, 1].
pub fn pixel_cost(v: u8, gamma: f64) -> f64 {
    ((v as f64 + 1.0) / 256.0).powf(gamma).clamp(1e-3, 1.0)
}

pub fn convert(a: &ConvertArgs) -> RunManifest {
    with_manifest("convert", a, |m| {
        if !(a.gamma > 0.0 && a.gamma.is_finite()) {
            return Err(ErrorRecord::new("invalid_parameter", format!("gamma must be > 0, got {}", a.gamma)));
        }
        let bad = |e: String| ErrorRecord::new("malformed_image", format!("{}: {e}", a.pgm.display()));
        let img = ImageReader::open(&a.pgm)
            .map_err(|e| io_err(&a.pgm, e))?
            .with_guessed_format()
            .map_err(|e| io_err(&a.pgm, e))?
            .decode()
            .map_err(|e| bad(e.to_string()))?;
        let DynamicImage::ImageLuma8(gray) = img else {
            return Err(bad("expected an 8-bit grayscale PGM".into()));
        };
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let grid = GridSpec::new(w, h, a.ntheta, a.spacing, a.spacing, 0.0, 0.0)?;
        m.grid = Some(grid);
        // Pixel (column, row) becomes node (i, j); pixels are stored row-major.
        let costs: Vec<f64> = gray.as_raw().iter().map(|&v| pixel_cost(v, a.gamma)).collect();
        let cost = se2fm::grid::lift_cost_2d(&costs, w, h, grid)?;
        let data = io::save_cost(&cost, &a.out)?;
        record(m, &a.out)?;
        record(m, &data)?;
        println!("{w}x{h} image lifted to {} orientations", a.ntheta);
        Ok(())
    })
}
