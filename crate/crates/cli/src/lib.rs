//! Command-line front end for the `lieflow` engine.
//!
//! [`run`] parses `argv`, executes one subcommand and returns the process
//! exit code: `0` on success, `1` when `verify` finds a failing check, `2`
//! on malformed input and `3` when a solver does not converge.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use lieflow::algebra::{GroupDescriptor, NormKind};
use lieflow::controls::Control;
use lieflow::evolution::{fmt_f64, left_log_derivative, Evolver, ExtensionDescriptor, Path};
use lieflow::flows::{glue_flow, FlowOptions};
use lieflow::io::{
    field_from_json, parse_json, CommutatorSpec, ControlSpec, CurveSpec, TrotterSpec,
};
use lieflow::limits::{commutator_sweep, trotter_sweep, ConvergenceReport};
use lieflow::Error;

pub mod verify;

const DEFAULT_N_LIST: [u64; 8] = [8, 16, 32, 64, 128, 256, 512, 1024];
const DEFAULT_PACK: &str = include_str!("../../../data/verify.json");

#[derive(Parser, Debug)]
#[command(
    name = "lieflow",
    version,
    about = "Evolutions, flows and limit experiments on matrix Lie groups"
)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Flags {
    /// Cells of the uniform output grid.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Fixed-point tolerance for evolutions and flows.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Comma-separated, strictly increasing sweep values.
    #[arg(long = "n-list", global = true, value_delimiter = ',')]
    n_list: Option<Vec<u64>>,
    /// Seed of the verify suite (overrides the pack seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Group name (GL2, SL2, SO3, SE2, HEIS3, SCALAR, ...).
    #[arg(long, global = true)]
    group: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration whose entries override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Left evolution of a control: path CSV plus a JSON summary.
    Evolve { input: PathBuf },
    /// L¹ distance between δ^ℓ(Evol(γ)) and γ, swept over `--n-list` grids.
    Roundtrip { input: PathBuf },
    /// Homomorphism and axiom defects of the control group law.
    Odot { first: PathBuf, second: PathBuf },
    /// Direct evolution against the split-extension decomposition (SE2 or HEIS3).
    Extension { input: PathBuf },
    /// Strong Trotter errors over the `--n-list` sweep.
    Trotter {
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 33)]
        samples: usize,
    },
    /// Strong commutator errors over the `--n-list` sweep.
    Commutator {
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
    },
    /// Trajectory of a time-dependent vector field.
    Flow {
        input: PathBuf,
        /// Initial point, comma separated (defaults to the origin).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
    /// Runs the invariant suite from a check pack (the shipped pack by default).
    Verify { pack: Option<PathBuf> },
}

/// Configuration file entries; each present entry overrides the matching flag.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub grid: Option<usize>,
    pub picard_tol: Option<f64>,
    pub flow_tol: Option<f64>,
    pub path_tol: Option<f64>,
    pub n_list: Option<Vec<u64>>,
    pub seed: Option<u64>,
    pub group: Option<String>,
    pub out: Option<PathBuf>,
}

/// Resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: usize,
    pub picard_tol: f64,
    pub flow_tol: f64,
    pub path_tol: f64,
    pub n_list: Option<Vec<u64>>,
    /// Overrides the seed of a verify pack.
    pub seed: Option<u64>,
    pub group: Option<String>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: 1024,
            picard_tol: 1e-12,
            flow_tol: 1e-12,
            path_tol: 1e-8,
            n_list: None,
            seed: None,
            group: None,
            out: None,
        }
    }
}

impl RunConfig {
    fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(g) = flags.grid {
            cfg.grid = g;
        }
        if let Some(t) = flags.tol {
            cfg.picard_tol = t;
            cfg.flow_tol = t;
        }
        cfg.n_list = flags.n_list.clone();
        cfg.seed = flags.seed;
        cfg.group = flags.group.clone();
        cfg.out = flags.out.clone();
        if let Some(path) = &flags.config {
            let file: ConfigFile = parse_json(&read(path)?, "config")?;
            cfg.grid = file.grid.unwrap_or(cfg.grid);
            cfg.picard_tol = file.picard_tol.unwrap_or(cfg.picard_tol);
            cfg.flow_tol = file.flow_tol.unwrap_or(cfg.flow_tol);
            cfg.path_tol = file.path_tol.unwrap_or(cfg.path_tol);
            if file.seed.is_some() {
                cfg.seed = file.seed;
            }
            if file.n_list.is_some() {
                cfg.n_list = file.n_list;
            }
            if file.group.is_some() {
                cfg.group = file.group;
            }
            if file.out.is_some() {
                cfg.out = file.out;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.grid < 2 {
            return Err(CliError::input("grid must be at least 2"));
        }
        for (name, t) in [
            ("picard_tol", self.picard_tol),
            ("flow_tol", self.flow_tol),
            ("path_tol", self.path_tol),
        ] {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CliError::input(&format!("{name} must be positive")));
            }
        }
        if let Some(ns) = &self.n_list {
            if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::input(
                    "n-list must be positive and strictly increasing",
                ));
            }
        }
        Ok(())
    }

    pub fn evolver(&self) -> Evolver {
        Evolver {
            grid: self.grid,
            picard_tol: self.picard_tol,
            path_tol: self.path_tol,
            ..Evolver::default()
        }
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            grid: self.grid,
            flow_tol: self.flow_tol,
            ..FlowOptions::default()
        }
    }

    fn sweep(&self) -> Vec<u64> {
        self.n_list
            .clone()
            .unwrap_or_else(|| DEFAULT_N_LIST.to_vec())
    }

    fn group(&self) -> Result<Option<Arc<GroupDescriptor>>, CliError> {
        Ok(match &self.group {
            Some(name) => Some(GroupDescriptor::from_name(name)?),
            None => None,
        })
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(msg: &str) -> Self {
        CliError {
            code: 2,
            message: msg.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. } => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &FsPath) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::input(&format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&FsPath>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::input(&format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            match stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
            {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                    Err(CliError::input(&format!("cannot write output: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn load_control(path: &FsPath, cfg: &RunConfig) -> Result<(ControlSpec, Control), CliError> {
    let spec: ControlSpec = parse_json(&read(path)?, "control")?;
    let control = spec.build(cfg.group()?.as_ref())?;
    Ok((spec, control))
}

#[derive(Serialize)]
struct EvolveSummary {
    group: String,
    grid: usize,
    nodes: usize,
    pieces: usize,
    picard_iters: usize,
    residual: f64,
    defect_max: f64,
    partition: Vec<f64>,
    final_point: Vec<Vec<f64>>,
}

fn cmd_evolve(cfg: &RunConfig, input: &FsPath) -> Result<i32, CliError> {
    let (_, control) = load_control(input, cfg)?;
    let ev = cfg.evolver().evolve(&control)?;
    let fin = ev.path.final_point();
    let m = fin.matrix();
    let summary = EvolveSummary {
        group: control.group().name(),
        grid: cfg.grid,
        nodes: ev.path.len(),
        pieces: ev.partition.len() - 1,
        picard_iters: ev.picard_iters,
        residual: ev.residual,
        defect_max: ev.defect_max(),
        partition: ev.partition.clone(),
        final_point: (0..m.nrows())
            .map(|i| m.row(i).iter().cloned().collect())
            .collect(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    emit(cfg.out.as_deref(), &ev.path.to_csv())?;
    match &cfg.out {
        Some(p) => emit(Some(&p.with_extension("json")), &json)?,
        None => eprint!("{json}"),
    }
    Ok(0)
}

fn cmd_roundtrip(cfg: &RunConfig, input: &FsPath) -> Result<i32, CliError> {
    let (spec, _) = load_control(input, cfg)?;
    let group = cfg.group()?;
    let grids = cfg.n_list.clone().unwrap_or_else(|| vec![cfg.grid as u64]);
    let mut errors = Vec::with_capacity(grids.len());
    for &n in &grids {
        let n = n as usize;
        let spec = match &spec {
            ControlSpec::Sampled {
                group,
                p_class,
                expr,
                ..
            } => ControlSpec::Sampled {
                group: group.clone(),
                n,
                p_class: *p_class,
                expr: expr.clone(),
            },
            step => step.clone(),
        };
        let control = spec.build(group.as_ref())?;
        let evolver = Evolver {
            grid: n,
            ..cfg.evolver()
        };
        let path = evolver.evolve(&control)?.path;
        errors.push(left_log_derivative(&path)?.l1_distance(&control, NormKind::Frobenius)?);
    }
    let report = ConvergenceReport::new(grids, errors, false)?;
    emit(cfg.out.as_deref(), &report.to_csv())?;
    Ok(0)
}

fn table(rows: &[(&str, f64)]) -> String {
    let mut out = String::from("check,value\n");
    for (name, v) in rows {
        writeln!(out, "{name},{}", fmt_f64(*v)).unwrap();
    }
    out
}

/// `sup_t ‖a(t) − b(t)·c(t)‖_max` with `b`, `c` interpolated onto `a`'s grid.
fn product_defect(a: &Path, b: &Path, c: &Path) -> Result<f64, Error> {
    let mut worst = 0.0f64;
    for (t, p) in a.times().iter().zip(a.points()) {
        let q = b.value_at(*t)?.mul(&c.value_at(*t)?)?;
        worst = worst.max((p - q.matrix()).amax());
    }
    Ok(worst)
}

fn cmd_odot(cfg: &RunConfig, first: &FsPath, second: &FsPath) -> Result<i32, CliError> {
    let (_, g1) = load_control(first, cfg)?;
    let (_, g2) = load_control(second, cfg)?;
    let ev = cfg.evolver();
    let prod = ev.odot(&g1, &g2)?;
    let hom = product_defect(
        &ev.evolve(&prod)?.path,
        &ev.evolve(&g1)?.path,
        &ev.evolve(&g2)?.path,
    )?;
    let zero = Control::zero(g1.group());
    let inv = ev.odot_inverse(&g1)?;
    let l1 = |c: Control, d: &Control| c.l1_distance(d, NormKind::Max);
    let rows = [
        ("homomorphism_sup", hom),
        ("left_identity_l1", l1(ev.odot(&zero, &g1)?, &g1)?),
        ("right_identity_l1", l1(ev.odot(&g1, &zero)?, &g1)?),
        ("right_inverse_l1", l1(ev.odot(&g1, &inv)?, &zero)?),
        ("left_inverse_l1", l1(ev.odot(&inv, &g1)?, &zero)?),
    ];
    emit(cfg.out.as_deref(), &table(&rows))?;
    Ok(0)
}

fn cmd_extension(cfg: &RunConfig, input: &FsPath) -> Result<i32, CliError> {
    let ext = match cfg.group.as_deref().map(|g| g.to_ascii_uppercase()) {
        None => ExtensionDescriptor::se2(),
        Some(g) if g == "SE2" => ExtensionDescriptor::se2(),
        Some(g) if g == "HEIS3" || g == "HEISENBERG" => ExtensionDescriptor::heisenberg(),
        Some(g) => {
            return Err(CliError::input(&format!(
                "no split extension shipped for group {g}"
            )))
        }
    };
    let spec: ControlSpec = parse_json(&read(input)?, "control")?;
    let control = spec.build(Some(&ext.g))?;
    let ev = cfg.evolver();
    let split = ev.evolve_via_extension(&control, &ext)?;
    let direct = ev.evolve(&control)?.path;
    let rows = [
        (
            "direct_vs_decomposed_sup",
            split.path.sup_distance(&direct)?,
        ),
        ("tau_defect", split.tau_defect),
    ];
    emit(cfg.out.as_deref(), &table(&rows))?;
    Ok(0)
}

fn experiment_group(
    doc_group: Option<&str>,
    cfg: &RunConfig,
) -> Result<Arc<GroupDescriptor>, CliError> {
    if let Some(g) = cfg.group()? {
        return Ok(g);
    }
    Ok(GroupDescriptor::from_name(doc_group.unwrap_or("SL2"))?)
}

fn sl2_pair() -> (CurveSpec, CurveSpec) {
    (
        CurveSpec::ExpLine {
            v: vec![1.0, 0.0, 0.0],
        },
        CurveSpec::ExpLine {
            v: vec![0.0, 1.0, 0.0],
        },
    )
}

fn cmd_trotter(
    cfg: &RunConfig,
    input: Option<&FsPath>,
    horizon: f64,
    samples: usize,
) -> Result<i32, CliError> {
    let spec = match input {
        Some(p) => parse_json(&read(p)?, "trotter")?,
        None => TrotterSpec {
            group: Some("SL2".into()),
            curve: CurveSpec::Product {
                v: vec![1.0, 0.0, 0.0],
                w: vec![0.0, 1.0, 0.0],
            },
        },
    };
    let group = experiment_group(spec.group.as_deref(), cfg)?;
    let curve = spec.curve.build(&group, &cfg.evolver())?;
    let report = trotter_sweep(&curve, horizon, &cfg.sweep(), samples)?;
    emit(cfg.out.as_deref(), &report.to_csv())?;
    Ok(0)
}

fn cmd_commutator(cfg: &RunConfig, input: Option<&FsPath>, time: f64) -> Result<i32, CliError> {
    let spec = match input {
        Some(p) => parse_json(&read(p)?, "commutator")?,
        None => {
            let (gamma, eta) = sl2_pair();
            CommutatorSpec {
                group: Some("SL2".into()),
                gamma,
                eta,
            }
        }
    };
    let group = experiment_group(spec.group.as_deref(), cfg)?;
    let ev = cfg.evolver();
    let gamma = spec.gamma.build(&group, &ev)?;
    let eta = spec.eta.build(&group, &ev)?;
    let report = commutator_sweep(&gamma, &eta, time, &cfg.sweep())?;
    emit(cfg.out.as_deref(), &report.to_csv())?;
    Ok(0)
}

fn cmd_flow(cfg: &RunConfig, input: &FsPath, x0: Option<&[f64]>) -> Result<i32, CliError> {
    let field = field_from_json(&read(input)?)?;
    let x0 = match x0 {
        Some(x) => DVector::from_column_slice(x),
        None => DVector::zeros(field.dim()),
    };
    let traj = glue_flow(&field, &x0, &cfg.flow_options())?;
    emit(cfg.out.as_deref(), &traj.to_csv())?;
    Ok(0)
}

fn cmd_verify(cfg: &RunConfig, pack: Option<&FsPath>) -> Result<i32, CliError> {
    let text = match pack {
        Some(p) => read(p)?,
        None => DEFAULT_PACK.to_string(),
    };
    let pack: verify::Pack = parse_json(&text, "verify pack")?;
    let seed = cfg.seed.unwrap_or(pack.seed);
    let ctx = verify::Context {
        seed,
        grid: cfg.grid,
        picard_tol: cfg.picard_tol,
        flow_tol: cfg.flow_tol,
    };
    let outcomes = verify::run_checks(&ctx, &pack.tolerances)?;
    emit(cfg.out.as_deref(), &verify::to_csv(&outcomes))?;
    Ok(if outcomes.iter().all(|o| o.pass) {
        0
    } else {
        1
    })
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    match &cli.command {
        Command::Evolve { input } => cmd_evolve(&cfg, input),
        Command::Roundtrip { input } => cmd_roundtrip(&cfg, input),
        Command::Odot { first, second } => cmd_odot(&cfg, first, second),
        Command::Extension { input } => cmd_extension(&cfg, input),
        Command::Trotter {
            input,
            horizon,
            samples,
        } => cmd_trotter(&cfg, input.as_deref(), *horizon, *samples),
        Command::Commutator { input, time } => cmd_commutator(&cfg, input.as_deref(), *time),
        Command::Flow { input, x0 } => cmd_flow(&cfg, input, x0.as_deref()),
        Command::Verify { pack } => cmd_verify(&cfg, pack.as_deref()),
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lieflow: {}", e.message);
            e.code
        }
    }
}
