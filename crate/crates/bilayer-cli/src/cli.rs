//! Command-line surface and command execution.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bilayer_core::ed;
use bilayer_core::fss::CollapseParams;
use bilayer_core::lattice::LatticeSpec;
use bilayer_core::sse::Couplings;

use crate::analyze;
use crate::config::{Mode, RunConfig};
use crate::error::CliError;
use crate::io;
use crate::tasks::{self, PointResult};

#[derive(Debug, Parser)]
#[command(
    name = "bilayer",
    version,
    about = "Quantum Monte Carlo for a square-lattice spin-1/2 bilayer with \
             ferromagnetic intra-layer Ising and antiferromagnetic inter-layer \
             Heisenberg couplings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate whatever the configuration's `mode` asks for.
    Run(RunArgs),
    /// Simulate an observable grid (requires / forces mode "observables").
    Sweep(RunArgs),
    /// Simulate replica manifolds (forces mode "replica-eh").
    ReplicaEh(RunArgs),
    /// Exactly diagonalize a small system (forces mode "ed").
    Ed(RunArgs),
    /// Locate curve crossings in an estimator table and extrapolate them.
    Analyze(AnalyzeArgs),
    /// Evaluate a scaling collapse of an estimator table.
    Collapse(CollapseArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the worker thread count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Stop every point after this many completed bins, exiting with
    /// code 3 and leaving only checkpoints behind. A later identical
    /// `run` resumes and reproduces the uninterrupted output.
    #[arg(long)]
    pub stop_after_bins: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Estimator table (CSV) produced by `run`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Observable whose curves are intersected.
    #[arg(long, default_value = "binder")]
    pub observable: String,
    /// Parametric bootstrap resamples per crossing.
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollapseArgs {
    /// Estimator table (CSV) produced by `run`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "binder")]
    pub observable: String,
    /// Assumed critical coupling ratio.
    #[arg(long)]
    pub g_c: f64,
    /// Correlation-length exponent.
    #[arg(long, default_value_t = 0.63)]
    pub nu: f64,
    /// Susceptibility exponent; rescales the ordinate by L^(-gamma/nu).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Refine (g_c, nu) around the given values before reporting.
    #[arg(long)]
    pub optimize: bool,
    /// Report destination (a sibling `.csv` gets the collapsed points);
    /// stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(args, None),
        Command::Sweep(args) => cmd_run(args, Some(Mode::Observables)),
        Command::ReplicaEh(args) => cmd_run(args, Some(Mode::ReplicaEh)),
        Command::Ed(args) => cmd_run(args, Some(Mode::Ed)),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Collapse(args) => cmd_collapse(args),
    }
}

fn cmd_run(args: RunArgs, mode: Option<Mode>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if let Some(workers) = args.workers {
        cfg.workers = Some(workers);
    }
    cfg.validate()?;
    match cfg.mode {
        Mode::Observables => run_observables(&cfg, args.stop_after_bins),
        Mode::ReplicaEh => run_replica(&cfg, args.stop_after_bins),
        Mode::Ed => run_ed(&cfg),
    }
}

/// Per-point progress written next to the outputs when a run fails or is
/// stopped early, so partial results are discoverable.
#[derive(Debug, Serialize)]
struct ManifestEntry {
    l: u32,
    g: f64,
    beta: f64,
    bins_target: u64,
    bins_completed: u64,
    checkpoint: Option<String>,
}

fn write_partial_manifest(cfg: &RunConfig, specs: &[tasks::PointSpec]) {
    let entries: Vec<ManifestEntry> = specs
        .iter()
        .map(|spec| {
            let ckpt = spec
                .checkpoint_dir
                .as_ref()
                .map(|d| d.join(spec.checkpoint_file()))
                .filter(|p| p.exists());
            let bins_completed = ckpt
                .as_ref()
                .and_then(|p| {
                    crate::checkpoint::ChainCheckpoint::load(p, &spec.fingerprint()).ok()
                })
                .map_or(0, |ck| ck.completed_bins);
            ManifestEntry {
                l: spec.l,
                g: spec.g,
                beta: spec.beta,
                bins_target: spec.bins,
                bins_completed,
                checkpoint: ckpt.map(|p| p.display().to_string()),
            }
        })
        .collect();
    // Best effort: never mask the original failure.
    let _ = io::write_json(&cfg.out_dir.join("manifest.json"), &entries);
}

fn run_grid(
    cfg: &RunConfig,
    stop_after_bins: Option<u64>,
) -> Result<(Vec<tasks::PointSpec>, Vec<PointResult>), CliError> {
    let specs = tasks::specs_from_config(cfg, stop_after_bins);
    match tasks::run_points(&specs, worker_count(cfg)) {
        Ok(results) => Ok((specs, results)),
        Err(err) => {
            write_partial_manifest(cfg, &specs);
            Err(err)
        }
    }
}

fn worker_count(cfg: &RunConfig) -> usize {
    cfg.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn run_observables(cfg: &RunConfig, stop_after_bins: Option<u64>) -> Result<(), CliError> {
    let (_, results) = run_grid(cfg, stop_after_bins)?;
    let mut rows = Vec::new();
    for result in &results {
        match result {
            PointResult::Series(series) => rows.extend(io::rows_from_series(series)),
            PointResult::Replica(_) => unreachable!("observables mode runs plain chains"),
        }
    }
    let csv_path = cfg.out_dir.join("estimators.csv");
    io::write_csv(&csv_path, &rows)?;
    io::write_json(&cfg.out_dir.join("estimators.json"), &rows)?;
    println!("wrote {} ({} rows)", csv_path.display(), rows.len());
    Ok(())
}

fn run_replica(cfg: &RunConfig, stop_after_bins: Option<u64>) -> Result<(), CliError> {
    let (specs, results) = run_grid(cfg, stop_after_bins)?;
    let mut momentum = Vec::new();
    let mut onsite = Vec::new();
    for (spec, result) in specs.iter().zip(&results) {
        let est = match result {
            PointResult::Replica(est) => est,
            PointResult::Series(_) => unreachable!("replica mode runs manifolds"),
        };
        let lat = LatticeSpec::new(spec.l as usize, spec.boundary)?;
        let grid = lat.momentum_grid();
        momentum.extend(io::momentum_rows(
            est,
            spec.l as usize,
            spec.g,
            spec.beta,
            &grid.points,
        ));
        onsite.extend(io::onsite_rows(est, spec.l as usize, spec.g, spec.beta));
    }
    let momentum_path = cfg.out_dir.join("replica_momentum.csv");
    io::write_csv(&momentum_path, &momentum)?;
    io::write_csv(&cfg.out_dir.join("replica_onsite.csv"), &onsite)?;
    println!(
        "wrote {} ({} rows)",
        momentum_path.display(),
        momentum.len()
    );
    Ok(())
}

/// Exact-diagonalization report for one small system.
#[derive(Debug, Serialize)]
struct EdJson {
    l: usize,
    boundary: String,
    j: f64,
    g: f64,
    beta: f64,
    h_field: f64,
    n_rep: usize,
    energy: f64,
    m_abs: f64,
    m2: f64,
    m4: f64,
    binder: Option<f64>,
    chi: f64,
    /// Layer-A spin correlations by displacement index `dx + L dy`.
    corr_a: Vec<f64>,
    /// Leading reduced-density-matrix eigenvalues, descending.
    lambda: Vec<f64>,
    /// Entanglement spectrum levels `-ln lambda`.
    xi: Vec<f64>,
    entanglement_entropy: f64,
    /// Off-diagonal weight of the reduced density matrix in the product
    /// basis; zero iff the replica correlators are trivially flat.
    diag_defect: f64,
    /// `[site][tau]` replica correlators of `sigma^z_i`.
    g_onsite: Vec<Vec<f64>>,
    /// `[k][tau]` replica correlators of the momentum modes, ordered as
    /// `momentum_points`.
    g_momentum: Vec<Vec<f64>>,
    momentum_points: Vec<(usize, usize)>,
}

fn run_ed(cfg: &RunConfig) -> Result<(), CliError> {
    let l = cfg.ls()[0];
    let g = cfg.gs()[0];
    let beta = cfg.beta_for(l);
    let n_rep = cfg.run.n_rep.unwrap_or(2);
    let lat = LatticeSpec::new(l as usize, cfg.boundary())?;
    let coup = Couplings::new(cfg.couplings.j, g)?;

    let h = ed::build_hamiltonian(&lat, &coup, cfg.run.h_field)?;
    let spectrum = ed::diagonalize(h);
    let obs = ed::thermal_observables(&spectrum, &lat, beta);
    let rho = ed::thermal_rho(&spectrum, beta);
    let rho_a = ed::reduce_to_a(&rho, lat.n_sites_per_layer);
    let eh = ed::eh_report(&rho_a, lat.l, n_rep)?;

    let keep = eh.lambda.len().min(64);
    let report = EdJson {
        l: lat.l,
        boundary: format!("{:?}", lat.boundary).to_lowercase(),
        j: cfg.couplings.j,
        g,
        beta,
        h_field: cfg.run.h_field,
        n_rep,
        energy: obs.scalars.energy,
        m_abs: obs.scalars.m_abs,
        m2: obs.scalars.m2,
        m4: obs.scalars.m4,
        binder: obs.scalars.binder,
        chi: obs.scalars.chi,
        corr_a: obs.corr_a,
        lambda: eh.lambda[..keep].to_vec(),
        xi: eh.xi[..keep].to_vec(),
        entanglement_entropy: eh.entropy,
        diag_defect: eh.diag_defect,
        g_onsite: eh.g_onsite,
        g_momentum: eh.g_momentum,
        momentum_points: lat.momentum_grid().points,
    };
    let path = cfg.out_dir.join("ed.json");
    io::write_json(&path, &report)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let rows = io::read_estimator_csv(&args.input)?;
    let report = analyze::analyze_crossings(&rows, &args.observable, args.n_boot, args.seed)?;
    emit_json(&report, args.out.as_deref())
}

fn cmd_collapse(args: CollapseArgs) -> Result<(), CliError> {
    let rows = io::read_estimator_csv(&args.input)?;
    let kappa = match args.gamma {
        Some(gamma) => -gamma / args.nu,
        None => 0.0,
    };
    let mut params = CollapseParams {
        g_c: args.g_c,
        nu: args.nu,
        kappa,
    };
    if args.optimize {
        let series = analyze::series_by_size(&rows, &args.observable)?;
        let (refined, _) = bilayer_core::fss::optimize_collapse(
            &series,
            &params,
            (params.g_c * 0.98, params.g_c * 1.02),
            (params.nu * 0.7, params.nu * 1.3),
        )?;
        params = refined;
    }
    let (report, collapsed) = analyze::evaluate_collapse(&rows, &args.observable, &params)?;
    if let Some(out) = &args.out {
        io::write_csv(&out.with_extension("csv"), &collapsed)?;
    }
    emit_json(&report, args.out.as_deref())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&std::path::Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            io::write_json(path, value)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_parses() {
        let cli = Cli::try_parse_from([
            "bilayer",
            "run",
            "--config",
            "run.toml",
            "--seed",
            "7",
            "--stop-after-bins",
            "3",
        ])
        .unwrap();
        match cli.command {
            Command::Run(args) => {
                assert_eq!(args.seed, Some(7));
                assert_eq!(args.stop_after_bins, Some(3));
            }
            _ => panic!("expected run"),
        }

        let cli = Cli::try_parse_from([
            "bilayer",
            "collapse",
            "--in",
            "est.csv",
            "--g-c",
            "3.044",
            "--gamma",
            "1.24",
        ])
        .unwrap();
        match cli.command {
            Command::Collapse(args) => {
                assert_eq!(args.g_c, 3.044);
                assert_eq!(args.nu, 0.63);
                assert_eq!(args.gamma, Some(1.24));
            }
            _ => panic!("expected collapse"),
        }
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(Cli::try_parse_from(["bilayer", "run", "--config", "c.toml", "--bogus"]).is_err());
    }
}
