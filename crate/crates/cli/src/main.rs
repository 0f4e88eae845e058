//! `pswit` — certify nonclassicality of bosonic states from matrices of
//! smoothed phase-space distribution values.
//!
//! Exit codes: `eval` exits 0 when no violation is found and 2 when
//! nonclassicality is certified; every command exits 1 on error (bad
//! input, unsupported parameter domain, I/O failure).

mod figures;
mod formats;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use pswit_core::{
    bootstrap_det, build_matrix, distribution, estimate_matrix, make_state, minimize, report,
    scan, BootstrapSummary, DensityMatrix, DetectorModel, PhasePoint, SchemeConfig, SearchResult,
    SearchSpec, StateSpec, WitnessReport, POSITIVITY_TOLERANCE,
};

use formats::{
    emit_output, fmt_f64, json_bytes, load_toml, scan_table_csv, DetectorFile, PointsFile,
    RunRecord, ScanFile, SchemeFile,
};

/// Offset mixed into the run seed so the bootstrap resampler never shares
/// a stream with the shot sampler.
const BOOTSTRAP_SEED_OFFSET: u64 = 0x626f_6f74_7374_7261;

#[derive(Parser)]
#[command(
    name = "pswit",
    version,
    about = "Phase-space nonclassicality witnesses for bosonic states"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Test a state for nonclassicality at a list of phase-space points.
    ///
    /// Prints a JSON report; exits 2 when nonclassicality is certified,
    /// 0 when the matrix passes the positivity checks.
    Eval {
        /// State description (TOML).
        #[arg(long)]
        state: PathBuf,
        /// Phase-space point list (TOML).
        #[arg(long)]
        points: PathBuf,
        /// Also write the report here (plus a `.run.json` sidecar).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the Fock-space cutoff from the state file.
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Tabulate a smoothed distribution on a square grid (CSV: re,im,value).
    Qfunc {
        /// State description (TOML); must be single-mode.
        #[arg(long)]
        state: PathBuf,
        /// Width parameter of the distribution (1 = Husimi, 2 = Wigner).
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Grid as RADIUS:N, covering [-RADIUS, RADIUS]^2 with N points per axis.
        #[arg(long, default_value = "3:81")]
        grid: String,
        /// Write CSV here instead of stdout (plus a `.run.json` sidecar).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the Fock-space cutoff from the state file.
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Evaluate a criterion over a 1D or 2D parameter grid (CSV output).
    Scan {
        /// State description (TOML).
        #[arg(long)]
        state: PathBuf,
        /// Scan description: criterion, fixed parameters, axes (TOML).
        #[arg(long)]
        search: PathBuf,
        /// Write CSV here instead of stdout (plus a `.run.json` sidecar).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the Fock-space cutoff from the state file.
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Minimize a criterion over free parameters (JSON result).
    Optimize {
        /// State description (TOML).
        #[arg(long)]
        state: PathBuf,
        /// Search description: criterion, fixed/free parameters, strategy (TOML).
        #[arg(long)]
        search: PathBuf,
        /// Also write the result here (plus a `.run.json` sidecar).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the seed from the search file.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the Fock-space cutoff from the state file.
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Simulate a click-detector measurement of the matrix (JSON result).
    Simulate {
        /// State description (TOML); must be single-mode.
        #[arg(long)]
        state: PathBuf,
        /// Detector response: eta, delta, chi, optional cutoff (TOML).
        #[arg(long)]
        detector: PathBuf,
        /// Scheme: beam splitter, LO amplitudes, shots, seed (TOML).
        #[arg(long)]
        scheme: PathBuf,
        /// Also write the result here (plus a `.run.json` sidecar).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the seed from the scheme file.
        #[arg(long)]
        seed: Option<u64>,
        /// Bootstrap resamples for the determinant confidence interval.
        #[arg(long, default_value_t = 400)]
        resamples: usize,
        /// Override the Fock-space cutoff from the state file.
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Regenerate a bundled dataset (CSV, bit-identical across runs).
    Reproduce {
        /// Dataset id: fig2, fig3, fig4b, fig5, or fig6.
        figure: String,
        /// Write CSV here instead of stdout (plus a `.run.json` sidecar).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Eval { state, points, out, cutoff } => cmd_eval(&state, &points, out.as_deref(), cutoff),
        Cmd::Qfunc { state, sigma, grid, out, cutoff } => {
            cmd_qfunc(&state, sigma, &grid, out.as_deref(), cutoff)
        }
        Cmd::Scan { state, search, out, cutoff } => {
            cmd_scan(&state, &search, out.as_deref(), cutoff)
        }
        Cmd::Optimize { state, search, out, seed, cutoff } => {
            cmd_optimize(&state, &search, out.as_deref(), seed, cutoff)
        }
        Cmd::Simulate { state, detector, scheme, out, seed, resamples, cutoff } => {
            cmd_simulate(&state, &detector, &scheme, out.as_deref(), seed, resamples, cutoff)
        }
        Cmd::Reproduce { figure, out } => cmd_reproduce(&figure, out.as_deref()),
    }
}

/// Loads a state file, applying the optional cutoff override, and builds
/// the density matrix.
fn load_state(path: &Path, cutoff: Option<usize>) -> Result<(StateSpec, DensityMatrix)> {
    let mut spec: StateSpec = load_toml(path, "state")?;
    if cutoff.is_some() {
        spec.cutoff = cutoff;
    }
    let state =
        make_state(&spec).with_context(|| format!("state file {}", path.display()))?;
    Ok((spec, state))
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EvalRecord {
    command: &'static str,
    tool_version: &'static str,
    state: StateSpec,
    points: PointsFile,
    tolerance: f64,
    dimension: usize,
    report: WitnessReport,
    verdict: &'static str,
}

fn cmd_eval(
    state_path: &Path,
    points_path: &Path,
    out: Option<&Path>,
    cutoff: Option<usize>,
) -> Result<i32> {
    let (spec, state) = load_state(state_path, cutoff)?;
    let points_file: PointsFile = load_toml(points_path, "points")?;
    let points = points_file.to_points()?;
    let tolerance = points_file.tolerance.unwrap_or(POSITIVITY_TOLERANCE);
    let matrix = build_matrix(&state, &points)?;
    let rep = report(&matrix, tolerance)?;
    let verdict = if rep.nonclassical { "nonclassicality certified" } else { "no violation found" };
    let nonclassical = rep.nonclassical;
    let record = EvalRecord {
        command: "eval",
        tool_version: env!("CARGO_PKG_VERSION"),
        state: spec,
        points: points_file,
        tolerance,
        dimension: points.len(),
        report: rep,
        verdict,
    };
    let bytes = json_bytes(&record)?;
    std::io::Write::write_all(&mut std::io::stdout(), &bytes)
        .context("cannot write to stdout")?;
    if let Some(path) = out {
        formats::write_atomic(path, &bytes)?;
        RunRecord::new(
            "eval",
            None,
            Some(serde_json::to_value(&record.state)?),
            serde_json::json!({
                "points": points_path.display().to_string(),
                "tolerance": tolerance,
            }),
            path,
        )
        .write_beside(path)?;
    }
    Ok(if nonclassical { 2 } else { 0 })
}

// ---------------------------------------------------------------------------
// qfunc
// ---------------------------------------------------------------------------

/// Parses "RADIUS:N" into a positive radius and an axis point count >= 2.
fn parse_grid(grid: &str) -> Result<(f64, usize)> {
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 2 {
        bail!("grid must be RADIUS:N, got `{grid}`");
    }
    let radius: f64 = parts[0]
        .parse()
        .with_context(|| format!("grid radius `{}` is not a number", parts[0]))?;
    let n: usize = parts[1]
        .parse()
        .with_context(|| format!("grid size `{}` is not an integer", parts[1]))?;
    if !radius.is_finite() || radius <= 0.0 {
        bail!("grid radius must be finite and > 0, got {radius}");
    }
    if n < 2 {
        bail!("grid needs at least 2 points per axis, got {n}");
    }
    Ok((radius, n))
}

fn cmd_qfunc(
    state_path: &Path,
    sigma: f64,
    grid: &str,
    out: Option<&Path>,
    cutoff: Option<usize>,
) -> Result<i32> {
    let (spec, state) = load_state(state_path, cutoff)?;
    if state.mode_count() != 1 {
        bail!("qfunc needs a single-mode state, got {} modes", state.mode_count());
    }
    let (radius, n) = parse_grid(grid)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["re", "im", "value"])?;
    let coord = |i: usize| -radius + 2.0 * radius * i as f64 / (n - 1) as f64;
    for i in 0..n {
        let re = coord(i);
        for j in 0..n {
            let im = coord(j);
            let point = PhasePoint::single(C64::new(re, im), sigma)?;
            let value = distribution(&state, &point)?;
            w.write_record(&[fmt_f64(re), fmt_f64(im), fmt_f64(value)])?;
        }
    }
    let bytes = w.into_inner()?;
    emit_output(out, &bytes)?;
    if let Some(path) = out {
        RunRecord::new(
            "qfunc",
            None,
            Some(serde_json::to_value(&spec)?),
            serde_json::json!({ "sigma": sigma, "grid": grid }),
            path,
        )
        .write_beside(path)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

fn cmd_scan(
    state_path: &Path,
    search_path: &Path,
    out: Option<&Path>,
    cutoff: Option<usize>,
) -> Result<i32> {
    let (spec, state) = load_state(state_path, cutoff)?;
    let file: ScanFile = load_toml(search_path, "scan")?;
    let axes = file
        .axes
        .iter()
        .map(|a| a.to_axis())
        .collect::<Result<Vec<_>>>()?;
    let table = scan(&state, &file.criterion, &file.fixed, &axes)?;
    let bytes = scan_table_csv(&table)?;
    emit_output(out, &bytes)?;
    if let Some(path) = out {
        RunRecord::new(
            "scan",
            None,
            Some(serde_json::to_value(&spec)?),
            serde_json::to_value(&file)?,
            path,
        )
        .write_beside(path)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct OptimizeRecord {
    command: &'static str,
    tool_version: &'static str,
    state: StateSpec,
    search: SearchSpec,
    result: SearchResult,
}

fn cmd_optimize(
    state_path: &Path,
    search_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    cutoff: Option<usize>,
) -> Result<i32> {
    let (spec, state) = load_state(state_path, cutoff)?;
    let mut search: SearchSpec = load_toml(search_path, "search")?;
    if let Some(s) = seed {
        search.seed = s;
    }
    let result = minimize(&state, &search)?;
    let effective_seed = search.seed;
    let record = OptimizeRecord {
        command: "optimize",
        tool_version: env!("CARGO_PKG_VERSION"),
        state: spec,
        search,
        result,
    };
    let bytes = json_bytes(&record)?;
    std::io::Write::write_all(&mut std::io::stdout(), &bytes)
        .context("cannot write to stdout")?;
    if let Some(path) = out {
        formats::write_atomic(path, &bytes)?;
        RunRecord::new(
            "optimize",
            Some(effective_seed),
            Some(serde_json::to_value(&record.state)?),
            serde_json::json!({ "search": search_path.display().to_string() }),
            path,
        )
        .write_beside(path)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DetectorEcho {
    eta: f64,
    delta: f64,
    chi: f64,
    cutoff: usize,
}

#[derive(Serialize)]
struct SchemeEcho {
    t: C64,
    r: C64,
    lo_amplitudes: Vec<C64>,
    shots: u64,
    seed: u64,
}

#[derive(Serialize)]
struct SimulateRecord {
    command: &'static str,
    tool_version: &'static str,
    state: StateSpec,
    detector: DetectorEcho,
    scheme: SchemeEcho,
    /// Phase-space points probed by each detector, derived from the LOs.
    alphas: Vec<C64>,
    /// Estimated joint no-click probabilities (row-major, symmetric).
    values: Vec<Vec<f64>>,
    /// Binomial standard errors of the estimates.
    std_errors: Vec<Vec<f64>>,
    /// Determinant of the estimated matrix (plug-in point estimate).
    determinant: f64,
    bootstrap: BootstrapSummary,
    resamples: usize,
}

fn matrix_rows(a: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn cmd_simulate(
    state_path: &Path,
    detector_path: &Path,
    scheme_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    resamples: usize,
    cutoff: Option<usize>,
) -> Result<i32> {
    let (spec, state) = load_state(state_path, cutoff)?;
    let det_file: DetectorFile = load_toml(detector_path, "detector")?;
    let det_cutoff = det_file.cutoff.unwrap_or_else(|| state.cutoff().max(1));
    let detector = DetectorModel::new(det_file.eta, det_file.delta, det_file.chi, det_cutoff)?;
    let scheme_file: SchemeFile = load_toml(scheme_path, "scheme")?;
    let effective_seed = seed.unwrap_or(scheme_file.seed);
    let scheme = SchemeConfig::new(
        scheme_file.t,
        scheme_file.r,
        scheme_file.lo_amplitudes.clone(),
        scheme_file.shots,
        effective_seed,
    )?;
    let alphas = pswit_core::lo_to_alpha(&scheme)?;
    let est = estimate_matrix(&state, &detector, &scheme)?;
    let boot = bootstrap_det(&est, resamples, effective_seed ^ BOOTSTRAP_SEED_OFFSET)?;
    let k = est.dim();
    let plug_in = DMatrix::from_fn(k, k, |i, j| est.values()[[i, j]])
        .lu()
        .determinant();
    let record = SimulateRecord {
        command: "simulate",
        tool_version: env!("CARGO_PKG_VERSION"),
        state: spec,
        detector: DetectorEcho {
            eta: detector.eta(),
            delta: detector.delta(),
            chi: detector.chi(),
            cutoff: detector.cutoff(),
        },
        scheme: SchemeEcho {
            t: scheme_file.t,
            r: scheme_file.r,
            lo_amplitudes: scheme_file.lo_amplitudes,
            shots: scheme_file.shots,
            seed: effective_seed,
        },
        alphas,
        values: matrix_rows(est.values()),
        std_errors: matrix_rows(est.std_errors()),
        determinant: plug_in,
        bootstrap: boot,
        resamples,
    };
    let bytes = json_bytes(&record)?;
    std::io::Write::write_all(&mut std::io::stdout(), &bytes)
        .context("cannot write to stdout")?;
    if let Some(path) = out {
        formats::write_atomic(path, &bytes)?;
        RunRecord::new(
            "simulate",
            Some(effective_seed),
            Some(serde_json::to_value(&record.state)?),
            serde_json::json!({
                "detector": detector_path.display().to_string(),
                "scheme": scheme_path.display().to_string(),
                "resamples": resamples,
            }),
            path,
        )
        .write_beside(path)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

fn cmd_reproduce(figure: &str, out: Option<&Path>) -> Result<i32> {
    let bytes = figures::build(figure)?;
    emit_output(out, &bytes)?;
    if let Some(path) = out {
        RunRecord::new(
            "reproduce",
            None,
            None,
            serde_json::json!({ "figure": figure }),
            path,
        )
        .write_beside(path)?;
    }
    Ok(0)
}
