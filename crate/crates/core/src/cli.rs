//! The `switchsim` command-line front end.
//!
//! Settings resolve as defaults, then an optional TOML config file, then
//! flags. Output files are written single-threaded after all points are
//! gathered in input order, so they do not depend on the worker count.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::fock::{DEFAULT_LEAK_TOL, DEFAULT_N_MAX};
use crate::measures::{measure_conditionals_with, non_gaussianity, MeasureOptions, MeasureReport};
use crate::phase_space::{
    auto_bounds, wigner_interference, wigner_numeric, Bounds, GridSpec, InterferenceParams, PhaseSpaceGrid,
    VConvention,
};
use crate::switch::{run_switch, Branch, ControlQubit, FrameChoice, SwitchOutcome, SwitchParams};
use crate::SCHEMA;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;
pub const EXIT_PARTIAL: i32 = 5;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "switchsim",
    version,
    about = "Quantum switch of squeezing and displacement on one bosonic mode"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Fixed Fock cutoff (skips the doubling schedule)
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    /// Largest amplitude mass tolerated in the guard band
    #[arg(long, global = true)]
    pub leak_tol: Option<f64>,
    /// Phase-space grid points, `NxM`
    #[arg(long, global = true, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// `auto` or `qmin,qmax,pmin,pmax`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub bounds: Option<String>,
    /// Simulation basis: `auto`, `number`, `balanced`, `s` or `s,re,im`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub frame: Option<String>,
    /// Machine-readable output
    #[arg(long, global = true)]
    pub json: bool,
    /// Output file (sweep: output prefix)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "SWITCHSIM_THREADS")]
    pub threads: Option<usize>,
    /// TOML config; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct PointArgs {
    #[arg(short = 'r', long)]
    pub r: f64,
    #[arg(short = 'x', long)]
    pub x: f64,
    #[arg(short = 'y', long)]
    pub y: f64,
    /// Control qubit angle in `cos θ|0⟩ + e^{iφ} sin θ|1⟩`
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchArg {
    Plus,
    Minus,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Plus => Branch::Plus,
            BranchArg::Minus => Branch::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Branch probabilities, norms and leading Fock amplitudes
    #[command(allow_negative_numbers = true)]
    State {
        #[command(flatten)]
        point: PointArgs,
        /// Number of leading amplitudes to print
        #[arg(long, default_value_t = 8)]
        amplitudes: usize,
    },
    /// Wigner function of one branch on a grid
    #[command(allow_negative_numbers = true)]
    Wigner {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum, default_value_t = BranchArg::Plus)]
        branch: BranchArg,
    },
    /// Non-Gaussianity and non-classicality of both branches
    #[command(allow_negative_numbers = true)]
    Measures {
        #[command(flatten)]
        point: PointArgs,
        /// Skip the Wigner quadrature
        #[arg(long)]
        ng_only: bool,
        /// Also report the residual of the closed-form interference expression
        #[arg(long)]
        interference: bool,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        nu: f64,
        #[arg(long, default_value = "verbatim")]
        v_convention: String,
    },
    /// Tables over an (x, y) grid, one file per r
    #[command(allow_negative_numbers = true)]
    Sweep {
        /// Comma-separated r values
        #[arg(long, allow_hyphen_values = true)]
        r_values: Option<String>,
        /// `min,max,count`
        #[arg(long, allow_hyphen_values = true)]
        x_range: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        y_range: Option<String>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        ng_only: bool,
    },
    /// Residual between the closed-form interference expression and the numeric Wigner function
    #[command(allow_negative_numbers = true)]
    Reconcile {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum, default_value_t = BranchArg::Plus)]
        branch: BranchArg,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        nu: f64,
        #[arg(long, default_value = "verbatim")]
        v_convention: String,
        /// Coarse search over (μ, ν) for the smallest RMS residual
        #[arg(long)]
        search: bool,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{failed} of {total} sweep points failed or did not converge")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Sim(e) => sim_exit_code(e),
            CliError::Io(_) => EXIT_FAILURE,
            CliError::Partial { .. } => EXIT_PARTIAL,
        }
    }
}

fn sim_exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) => EXIT_USAGE,
        Error::Convergence { .. } | Error::Quadrature { .. } => EXIT_CONVERGENCE,
        Error::DegenerateOutcome { .. } => EXIT_DEGENERATE,
        _ => EXIT_FAILURE,
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid must look like NxM, got {s:?}"))?;
    let n = a.trim().parse().map_err(|e| format!("bad grid {s:?}: {e}"))?;
    let m = b.trim().parse().map_err(|e| format!("bad grid {s:?}: {e}"))?;
    Ok((n, m))
}

pub fn parse_frame(s: &str) -> std::result::Result<FrameChoice, String> {
    match s.trim() {
        "auto" => return Ok(FrameChoice::Auto),
        "number" => return Ok(FrameChoice::Number),
        "balanced" => return Ok(FrameChoice::Balanced),
        _ => {}
    }
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("bad frame {s:?}: {e}"))?;
    match v[..] {
        [squeeze] => Ok(FrameChoice::Custom {
            squeeze,
            center: [0.0, 0.0],
        }),
        [squeeze, re, im] => Ok(FrameChoice::Custom {
            squeeze,
            center: [re, im],
        }),
        _ => Err(format!("frame must be auto, number, balanced, s or s,re,im; got {s:?}")),
    }
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad number list {s:?}: {e}")))
}

/// `(min, max, count)` axis of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.max } else { self.min + i as f64 * step })
            .collect()
    }
}

impl FromStr for Range {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [a, b, n] = parts[..] else {
            return Err(CliError::Usage(format!("range must be min,max,count; got {s:?}")));
        };
        let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("bad range {s:?}: {e}"));
        let range = Range {
            min: a.parse().map_err(|e| bad(&e))?,
            max: b.parse().map_err(|e| bad(&e))?,
            count: n.parse().map_err(|e| bad(&e))?,
        };
        if range.count < 2 || !(range.min < range.max) || !range.min.is_finite() || !range.max.is_finite() {
            return Err(CliError::Usage(format!("range {s:?} needs count ≥ 2 and min < max")));
        }
        Ok(range)
    }
}

/// Optional settings file. Keys mirror the long flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub cutoff: Option<usize>,
    pub leak_tol: Option<f64>,
    pub grid: Option<String>,
    pub bounds: Option<String>,
    pub frame: Option<String>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub r_values: Option<Vec<f64>>,
    pub x_range: Option<String>,
    pub y_range: Option<String>,
    pub format: Option<Format>,
    pub ng_only: Option<bool>,
}

/// Fully resolved settings shared by all subcommands.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub cutoff: Option<usize>,
    pub leak_tol: f64,
    pub grid: GridSpec,
    pub frame: FrameChoice,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub json: bool,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    config: ConfigFile,
}

impl Settings {
    pub fn resolve(g: &GlobalArgs) -> CliResult<Self> {
        let config: ConfigFile = match &g.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let grid = match g.grid.or(config.grid.as_deref().map(parse_grid).transpose().map_err(CliError::Usage)?) {
            Some((n, m)) => (n, m),
            None => (GridSpec::default().n_q, GridSpec::default().n_p),
        };
        let bounds = match g.bounds.as_deref().or(config.bounds.as_deref()) {
            Some(b) => Bounds::from_str(b).map_err(|e| CliError::Usage(e.to_string()))?,
            None => Bounds::Auto,
        };
        let grid = GridSpec::new(grid.0, grid.1, bounds);
        grid.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let frame = match g.frame.as_deref().or(config.frame.as_deref()) {
            Some(f) => parse_frame(f).map_err(CliError::Usage)?,
            None => FrameChoice::Auto,
        };
        let leak_tol = g.leak_tol.or(config.leak_tol).unwrap_or(DEFAULT_LEAK_TOL);
        if !(leak_tol > 0.0 && leak_tol < 1.0) {
            return Err(CliError::Usage(format!("leak tolerance {leak_tol} must lie in (0, 1)")));
        }
        Ok(Self {
            cutoff: g.cutoff.or(config.cutoff),
            leak_tol,
            grid,
            frame,
            threads: g.threads.or(config.threads),
            json: g.json,
            out: g.out.clone(),
            config,
        })
    }

    pub fn params(&self, r: f64, x: f64, y: f64) -> SwitchParams {
        let mut p = SwitchParams::new(r, x, y);
        p.cutoff = self.cutoff;
        p.leak_tol = self.leak_tol;
        p.frame = self.frame;
        p
    }

    fn point_params(&self, pt: &PointArgs) -> CliResult<SwitchParams> {
        let mut p = self.params(pt.r, pt.x, pt.y);
        p.control = ControlQubit {
            theta: pt.theta,
            phi: pt.phi,
        };
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        // reader went away, e.g. `| head`
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("switchsim: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let settings = Settings::resolve(&cli.global)?;
    if let Some(n) = settings.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a pool built earlier in the same process is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::State { point, amplitudes } => cmd_state(&settings, &point, amplitudes, out),
        Command::Wigner { point, branch } => cmd_wigner(&settings, &point, branch.into(), out),
        Command::Measures {
            point,
            ng_only,
            interference,
            mu,
            nu,
            v_convention,
        } => {
            let interference = interference
                .then(|| interference_params(mu, nu, &v_convention))
                .transpose()?;
            cmd_measures(&settings, &point, ng_only, interference, out)
        }
        Command::Sweep {
            r_values,
            x_range,
            y_range,
            format,
            ng_only,
        } => {
            let spec = SweepSpec::resolve(&settings, r_values, x_range, y_range, format, ng_only)?;
            let result = cmd_sweep(&settings, &spec)?;
            writeln!(out, "{}", result.summary())?;
            if result.failed > 0 {
                return Err(CliError::Partial {
                    failed: result.failed,
                    total: result.total,
                });
            }
            Ok(())
        }
        Command::Reconcile {
            point,
            branch,
            mu,
            nu,
            v_convention,
            search,
        } => {
            let interference = interference_params(mu, nu, &v_convention)?;
            cmd_reconcile(&settings, &point, branch.into(), interference, search, out)
        }
    }
}

fn interference_params(mu: f64, nu: f64, v: &str) -> CliResult<InterferenceParams> {
    Ok(InterferenceParams {
        mu,
        nu,
        v_convention: VConvention::from_str(v).map_err(|e| CliError::Usage(e.to_string()))?,
    })
}

/// Conventions every manifest records.
fn conventions() -> Value {
    json!({
        "quadratures": "q=(a+a^dag)/sqrt2, p=(a-a^dag)/(i sqrt2), vacuum variance 1/2",
        "squeezing": "S(r)=exp(r/2 (a^dag^2 - a^2)), stretches q by e^r",
        "braid": "beta = cosh(r) alpha + sinh(r) alpha*",
        "delta_nc": "integral |W| - integral W",
        "delta_ng": "h(sqrt det V), nats",
    })
}

/// Hex SHA-256 of the canonical JSON of `manifest`.
pub fn manifest_digest(manifest: &Value) -> String {
    hex::encode(Sha256::digest(manifest.to_string().as_bytes()))
}

fn base_manifest(command: &str, settings: &Settings, parameters: Value) -> Value {
    json!({
        "schema": SCHEMA,
        "tool_version": VERSION,
        "command": command,
        "settings": settings,
        "parameters": parameters,
        "conventions": conventions(),
    })
}

fn emit(settings: &Settings, text: &str, out: &mut dyn Write) -> CliResult<()> {
    match &settings.out {
        Some(path) => fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn e16(v: f64) -> String {
    format!("{v:.16e}")
}

fn cplx(c: crate::C64) -> [f64; 2] {
    [c.re, c.im]
}

fn cmd_state(settings: &Settings, pt: &PointArgs, amplitudes: usize, out: &mut dyn Write) -> CliResult<()> {
    let params = settings.point_params(pt)?;
    let run = run_switch(&params)?;
    let branches: Vec<Value> = [&run.plus, &run.minus]
        .iter()
        .map(|b| {
            let amps: Vec<[f64; 2]> = b
                .state
                .as_ref()
                .map(|s| s.amplitudes().iter().take(amplitudes).copied().map(cplx).collect())
                .unwrap_or_default();
            json!({
                "branch": b.branch,
                "probability": b.probability,
                "norm_sq": b.norm_sq,
                "degenerate": b.degenerate,
                "amplitudes": amps,
            })
        })
        .collect();
    let (ap, am) = params.analytic_probabilities();
    if settings.json {
        let doc = json!({
            "schema": SCHEMA,
            "params": {"r": params.r, "x": params.x, "y": params.y, "theta": params.control.theta, "phi": params.control.phi},
            "cutoff": run.cutoff,
            "frame": run.frame,
            "order_overlap": cplx(run.order_overlap),
            "analytic_norms": [run.analytic_norms.0, run.analytic_norms.1],
            "analytic_probabilities": [ap, am],
            "branches": branches,
        });
        return emit(settings, &format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable")), out);
    }
    let mut s = String::new();
    let _ = writeln!(s, "r = {}  x = {}  y = {}", params.r, params.x, params.y);
    let _ = writeln!(s, "cutoff {}  basis {}", run.cutoff, run.frame);
    let _ = writeln!(s, "order overlap {:.12e} {:+.12e}i", run.order_overlap.re, run.order_overlap.im);
    for b in [&run.plus, &run.minus] {
        let _ = write!(s, "{:<5}  p = {:.12}  |ψ|² = {:.12}", b.branch, b.probability, b.norm_sq);
        if b.degenerate {
            let _ = write!(s, "  (degenerate)");
        }
        s.push('\n');
        if let Some(state) = &b.state {
            for (n, c) in state.amplitudes().iter().take(amplitudes).enumerate() {
                let _ = writeln!(s, "    {n:>4}  {:+.12e} {:+.12e}i", c.re, c.im);
            }
        }
    }
    let _ = writeln!(s, "analytic p+ = {ap:.12}  p- = {am:.12}");
    emit(settings, &s, out)
}

fn nondegenerate<'a>(run: &'a SwitchOutcome, branch: Branch) -> CliResult<&'a crate::fock::FockVector> {
    let b = run.branch(branch);
    b.state.as_ref().ok_or(CliError::Sim(Error::DegenerateOutcome {
        branch,
        norm_sq: b.norm_sq,
    }))
}

fn cmd_wigner(settings: &Settings, pt: &PointArgs, branch: Branch, out: &mut dyn Write) -> CliResult<()> {
    let params = settings.point_params(pt)?;
    let run = run_switch(&params)?;
    let state = nondegenerate(&run, branch)?;
    let grid = wigner_numeric(state, &settings.grid)?;
    let manifest = base_manifest(
        "wigner",
        settings,
        json!({"r": params.r, "x": params.x, "y": params.y, "theta": params.control.theta,
               "phi": params.control.phi, "branch": branch, "bounds": grid.bounds()}),
    );
    let digest = manifest_digest(&manifest);
    let integral = grid.integrate();
    let text = if settings.json {
        let q: Vec<f64> = (0..grid.n_q()).map(|i| grid.q(i)).collect();
        let p: Vec<f64> = (0..grid.n_p()).map(|j| grid.p(j)).collect();
        let w: Vec<Vec<f64>> = grid.values.outer_iter().map(|row| row.to_vec()).collect();
        let doc = json!({
            "schema": SCHEMA,
            "manifest": manifest,
            "manifest_sha256": digest,
            "cutoff": run.cutoff,
            "frame": run.frame,
            "integral": integral,
            "q": q, "p": p, "W": w,
        });
        format!("{}\n", serde_json::to_string(&doc).expect("serializable"))
    } else {
        let mut s = String::new();
        let b = grid.bounds();
        let _ = writeln!(s, "# schema: {SCHEMA}");
        let _ = writeln!(s, "# manifest_sha256: {digest}");
        let _ = writeln!(s, "# r={} x={} y={} branch={branch}", params.r, params.x, params.y);
        let _ = writeln!(s, "# grid: {}x{} q=[{},{}] p=[{},{}]", grid.n_q(), grid.n_p(), e16(b[0]), e16(b[1]), e16(b[2]), e16(b[3]));
        let _ = writeln!(s, "# cutoff: {} basis: {}", run.cutoff, run.frame);
        let _ = writeln!(s, "# integral: {}", e16(integral));
        s.push_str("q,p,W\n");
        for i in 0..grid.n_q() {
            let q = e16(grid.q(i));
            for j in 0..grid.n_p() {
                let _ = writeln!(s, "{q},{},{}", e16(grid.p(j)), e16(grid.values[[i, j]]));
            }
        }
        s
    };
    emit(settings, &text, out)
}

fn cmd_measures(
    settings: &Settings,
    pt: &PointArgs,
    ng_only: bool,
    interference: Option<InterferenceParams>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let params = settings.point_params(pt)?;
    let opts = MeasureOptions {
        grid: settings.grid,
        interference,
        ng_only,
    };
    let (plus, minus) = measure_conditionals_with(&params, &opts)?;
    if settings.json {
        let doc = json!({
            "schema": SCHEMA,
            "params": {"r": params.r, "x": params.x, "y": params.y, "theta": params.control.theta, "phi": params.control.phi},
            "plus": plus,
            "minus": minus,
        });
        return emit(settings, &format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable")), out);
    }
    let mut s = String::new();
    let _ = writeln!(s, "r = {}  x = {}  y = {}", params.r, params.x, params.y);
    let _ = writeln!(s, "cutoff {}  basis {}", plus.cutoff_used, plus.frame);
    for m in [&plus, &minus] {
        write_report(&mut s, m);
    }
    emit(settings, &s, out)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.10}"))
}

fn write_report(s: &mut String, m: &MeasureReport) {
    let _ = writeln!(s, "{}: p = {:.12}{}", m.branch, m.probability, if m.degenerate { "  (degenerate)" } else { "" });
    let _ = writeln!(s, "  delta_nG = {}", opt(m.delta_ng));
    let _ = writeln!(s, "  delta_nC = {}", opt(m.delta_nc));
    if let Some(nc) = &m.nonclassicality {
        let _ = writeln!(
            s,
            "  min W = {:.6e}  ∬W - 1 = {:.2e}  grid {}x{}  refinements {}  converged {}",
            nc.min_wigner,
            nc.integral - 1.0,
            nc.grid.n_q,
            nc.grid.n_p,
            nc.refinements,
            nc.converged
        );
    }
    if let Some(v) = &m.covariance {
        let _ = writeln!(
            s,
            "  mean ({:.8}, {:.8})  V = [[{:.8}, {:.8}], [{:.8}, {:.8}]]",
            v.mean[0], v.mean[1], v.matrix[0][0], v.matrix[0][1], v.matrix[1][0], v.matrix[1][1]
        );
    }
    if let Some(r) = m.reference_covariance_residual {
        let _ = writeln!(s, "  reference covariance block residual {r:.6e}");
    }
    if let Some(r) = m.residual_interference {
        let _ = writeln!(s, "  interference expression residual {r:.6e}");
    }
}

/// Resolved sweep request.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub r_values: Vec<f64>,
    pub x_range: Range,
    pub y_range: Range,
    pub format: Format,
    pub ng_only: bool,
    /// Output files are `{prefix}_r{r}.{csv,json}` plus `{prefix}_manifest.json`.
    pub prefix: PathBuf,
}

impl SweepSpec {
    fn resolve(
        settings: &Settings,
        r_values: Option<String>,
        x_range: Option<String>,
        y_range: Option<String>,
        format: Option<Format>,
        ng_only: bool,
    ) -> CliResult<Self> {
        let cfg = &settings.config.sweep;
        let r_values = match r_values {
            Some(s) => parse_list(&s)?,
            None => cfg.r_values.clone().unwrap_or_else(|| vec![1.0, 4.0]),
        };
        if r_values.is_empty() || r_values.iter().any(|r| !r.is_finite()) {
            return Err(CliError::Usage("r values must be finite".into()));
        }
        let range = |flag: Option<String>, cfg: &Option<String>| -> CliResult<Range> {
            flag.or_else(|| cfg.clone())
                .map_or(Ok(Range { min: -8.0, max: 8.0, count: 65 }), |s| s.parse())
        };
        let json_default = if settings.json { Format::Json } else { Format::Csv };
        Ok(Self {
            r_values,
            x_range: range(x_range, &cfg.x_range)?,
            y_range: range(y_range, &cfg.y_range)?,
            format: format.or(cfg.format).unwrap_or(json_default),
            ng_only: ng_only || cfg.ng_only.unwrap_or(false),
            prefix: settings.out.clone().unwrap_or_else(|| PathBuf::from("sweep")),
        })
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub x: f64,
    pub y: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub delta_ng_plus: f64,
    pub delta_ng_minus: f64,
    pub delta_nc_plus: f64,
    pub delta_nc_minus: f64,
    pub cutoff: usize,
    /// `ok`, `degenerate-minus`, `degenerate-plus`, `unconverged` or `error: …`.
    pub status: String,
}

impl SweepRow {
    fn failed(&self) -> bool {
        self.status == "unconverged" || self.status.starts_with("error")
    }
}

fn sweep_point(settings: &Settings, r: f64, x: f64, y: f64, ng_only: bool) -> SweepRow {
    let mut row = SweepRow {
        x,
        y,
        p_plus: f64::NAN,
        p_minus: f64::NAN,
        delta_ng_plus: f64::NAN,
        delta_ng_minus: f64::NAN,
        delta_nc_plus: f64::NAN,
        delta_nc_minus: f64::NAN,
        cutoff: 0,
        status: String::new(),
    };
    let params = settings.params(r, x, y);
    let result = if ng_only {
        ng_row(&params, &mut row)
    } else {
        full_row(&params, &settings.grid, &mut row)
    };
    row.status = match result {
        Err(e) => format!("error: {}", e.to_string().replace([',', '\n'], ";")),
        Ok(status) => status.into(),
    };
    row
}

fn branch_status(plus_degenerate: bool, minus_degenerate: bool, converged: bool) -> &'static str {
    match (plus_degenerate, minus_degenerate) {
        _ if !converged => "unconverged",
        (true, _) => "degenerate-plus",
        (_, true) => "degenerate-minus",
        _ => "ok",
    }
}

/// Fills the probability and non-Gaussianity columns.
fn ng_row(params: &SwitchParams, row: &mut SweepRow) -> crate::Result<&'static str> {
    let run = run_switch(params)?;
    row.cutoff = run.cutoff;
    row.p_plus = run.plus.probability;
    row.p_minus = run.minus.probability;
    if let Some(s) = &run.plus.state {
        row.delta_ng_plus = non_gaussianity(s)?;
    }
    if let Some(s) = &run.minus.state {
        row.delta_ng_minus = non_gaussianity(s)?;
    }
    Ok(branch_status(run.plus.degenerate, run.minus.degenerate, true))
}

/// Fills every column; `unconverged` if a δ_nC refinement did not settle.
fn full_row(params: &SwitchParams, grid: &GridSpec, row: &mut SweepRow) -> crate::Result<&'static str> {
    let opts = MeasureOptions {
        grid: *grid,
        ..Default::default()
    };
    let (plus, minus) = measure_conditionals_with(params, &opts)?;
    row.cutoff = plus.cutoff_used;
    row.p_plus = plus.probability;
    row.p_minus = minus.probability;
    let mut converged = true;
    for (m, ng, nc) in [
        (&plus, &mut row.delta_ng_plus, &mut row.delta_nc_plus),
        (&minus, &mut row.delta_ng_minus, &mut row.delta_nc_minus),
    ] {
        *ng = m.delta_ng.unwrap_or(f64::NAN);
        *nc = m.delta_nc.unwrap_or(f64::NAN);
        converged &= m.nonclassicality.as_ref().is_none_or(|n| n.converged);
    }
    Ok(branch_status(plus.degenerate, minus.degenerate, converged))
}

/// What a sweep wrote.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub digest: String,
    pub failed: usize,
    pub total: usize,
}

impl SweepResult {
    fn summary(&self) -> String {
        let names: Vec<String> = self.files.iter().map(|p| p.display().to_string()).collect();
        format!(
            "wrote {} ({} points, {} failed); manifest {}",
            names.join(", "),
            self.total,
            self.failed,
            self.manifest.display()
        )
    }
}

const SWEEP_COLUMNS: &str = "x,y,p_plus,p_minus,delta_ng_plus,delta_ng_minus,delta_nc_plus,delta_nc_minus,cutoff,status";

fn sweep_path(prefix: &Path, r: f64, ext: &str) -> PathBuf {
    let name = prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    prefix.with_file_name(format!("{name}_r{r}.{ext}"))
}

pub fn cmd_sweep(settings: &Settings, spec: &SweepSpec) -> CliResult<SweepResult> {
    let started = Instant::now();
    let xs = spec.x_range.values();
    let ys = spec.y_range.values();
    let points: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let manifest = base_manifest(
        "sweep",
        settings,
        json!({
            "r_values": spec.r_values,
            "x_range": spec.x_range,
            "y_range": spec.y_range,
            "format": spec.format,
            "ng_only": spec.ng_only,
            "n_max": DEFAULT_N_MAX,
            "row_order": "y outer, x inner",
        }),
    );
    let digest = manifest_digest(&manifest);

    let mut files = Vec::new();
    let mut point_flags = Vec::new();
    let mut failed = 0;
    for &r in &spec.r_values {
        let rows: Vec<SweepRow> = points
            .par_iter()
            .map(|&(x, y)| sweep_point(settings, r, x, y, spec.ng_only))
            .collect();
        failed += rows.iter().filter(|row| row.failed()).count();
        point_flags.extend(rows.iter().map(|row| json!({"r": r, "x": row.x, "y": row.y, "status": row.status})));
        let (path, text) = match spec.format {
            Format::Csv => (sweep_path(&spec.prefix, r, "csv"), sweep_csv(&digest, r, &rows)),
            Format::Json => {
                let doc = json!({"schema": SCHEMA, "manifest_sha256": digest, "r": r, "rows": rows});
                (
                    sweep_path(&spec.prefix, r, "json"),
                    format!("{}\n", serde_json::to_string(&doc).expect("serializable")),
                )
            }
        };
        fs::write(&path, text)?;
        files.push(path);
    }

    let manifest_path = {
        let name = spec.prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        spec.prefix.with_file_name(format!("{name}_manifest.json"))
    };
    let sidecar = json!({
        "manifest": manifest,
        "manifest_sha256": digest,
        "points": point_flags,
        "wall_clock_s": started.elapsed().as_secs_f64(),
    });
    fs::write(&manifest_path, format!("{}\n", serde_json::to_string_pretty(&sidecar).expect("serializable")))?;
    Ok(SweepResult {
        files,
        manifest: manifest_path,
        digest,
        failed,
        total: points.len() * spec.r_values.len(),
    })
}

fn sweep_csv(digest: &str, r: f64, rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# schema: {SCHEMA}");
    let _ = writeln!(s, "# manifest_sha256: {digest}");
    let _ = writeln!(s, "# r: {}", e16(r));
    s.push_str(SWEEP_COLUMNS);
    s.push('\n');
    for row in rows {
        let nums = [
            row.x,
            row.y,
            row.p_plus,
            row.p_minus,
            row.delta_ng_plus,
            row.delta_ng_minus,
            row.delta_nc_plus,
            row.delta_nc_minus,
        ];
        for v in nums {
            s.push_str(&e16(v));
            s.push(',');
        }
        let _ = writeln!(s, "{},{}", row.cutoff, row.status);
    }
    s
}

/// Residual of the interference expression against the numeric Wigner function.
#[derive(Debug, Clone, Serialize)]
pub struct ReconcileReport {
    pub branch: Branch,
    pub interference: InterferenceParams,
    pub max_abs: f64,
    pub rms: f64,
    pub bounds: [f64; 4],
    pub best_fit: Option<BestFit>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BestFit {
    pub mu: f64,
    pub nu: f64,
    pub v_convention: VConvention,
    pub max_abs: f64,
    pub rms: f64,
}

/// Coarse `(μ, ν)` search grid.
const SEARCH_MU: (f64, f64, usize) = (-1.0, 2.0, 13);
const SEARCH_NU: (f64, f64, usize) = (-1.0, 1.0, 9);

pub fn reconcile(
    params: &SwitchParams,
    branch: Branch,
    interference: InterferenceParams,
    grid: &GridSpec,
    search: bool,
) -> crate::Result<ReconcileReport> {
    let run = run_switch(params)?;
    let b = run.branch(branch);
    let state = b.state.as_ref().ok_or(Error::DegenerateOutcome {
        branch,
        norm_sq: b.norm_sq,
    })?;
    let spec = match grid.bounds {
        Bounds::Auto => grid.with_bounds(auto_bounds(state)?),
        Bounds::Fixed { .. } => *grid,
    };
    let numeric = wigner_numeric(state, &spec)?;
    let residual = |e: &InterferenceParams| -> crate::Result<(f64, f64)> {
        let closed: PhaseSpaceGrid = wigner_interference(params, e, branch, &spec)?;
        let r = closed.residual(&numeric)?;
        Ok((r.max_abs, r.rms))
    };
    let (max_abs, rms) = residual(&interference)?;
    let best_fit = if search {
        let axis = |(lo, hi, n): (f64, f64, usize)| Range { min: lo, max: hi, count: n }.values();
        let mut best: Option<BestFit> = None;
        for v_convention in [VConvention::Verbatim, VConvention::AsSquared] {
            for &mu in &axis(SEARCH_MU) {
                for &nu in &axis(SEARCH_NU) {
                    let (m, r) = residual(&InterferenceParams { mu, nu, v_convention })?;
                    if best.is_none_or(|b| r < b.rms) {
                        best = Some(BestFit {
                            mu,
                            nu,
                            v_convention,
                            max_abs: m,
                            rms: r,
                        });
                    }
                }
            }
        }
        best
    } else {
        None
    };
    Ok(ReconcileReport {
        branch,
        interference,
        max_abs,
        rms,
        bounds: numeric.bounds(),
        best_fit,
    })
}

fn cmd_reconcile(
    settings: &Settings,
    pt: &PointArgs,
    branch: Branch,
    interference: InterferenceParams,
    search: bool,
    out: &mut dyn Write,
) -> CliResult<()> {
    let params = settings.point_params(pt)?;
    let report = reconcile(&params, branch, interference, &settings.grid, search)?;
    let text = if settings.json {
        let doc = json!({"schema": SCHEMA, "params": {"r": params.r, "x": params.x, "y": params.y}, "report": report});
        format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable"))
    } else {
        let mut s = String::new();
        let _ = writeln!(s, "r = {}  x = {}  y = {}  branch {branch}", params.r, params.x, params.y);
        let _ = writeln!(
            s,
            "mu = {}  nu = {}  v: {:?}  max |ΔW| = {:.6e}  rms = {:.6e}",
            interference.mu, interference.nu, interference.v_convention, report.max_abs, report.rms
        );
        if let Some(b) = report.best_fit {
            let _ = writeln!(
                s,
                "best fit: mu = {}  nu = {}  v: {:?}  max |ΔW| = {:.6e}  rms = {:.6e}",
                b.mu, b.nu, b.v_convention, b.max_abs, b.rms
            );
        }
        s
    };
    emit(settings, &text, out)
}
