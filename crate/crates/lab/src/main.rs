//! `heavy-markov-lab`: experiments on random Markov matrices with
//! heavy-tailed weights.

mod commands;
mod config;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::output::{sha256_file, Outputs};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hml_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("oracle checks failed: {0}")]
    Oracle(String),
    #[error("replay differs from the manifest: {0}")]
    Mismatch(String),
}

impl LabError {
    fn exit_code(&self) -> u8 {
        match self {
            LabError::Config(_) => 2,
            LabError::Core(e) if e.is_numerical() => 3,
            LabError::Core(hml_core::Error::Io(_) | hml_core::Error::Csv(_) | hml_core::Error::Json(_)) => 1,
            LabError::Core(_) => 2,
            LabError::Oracle(_) => 3,
            LabError::Io(_) | LabError::Csv(_) | LabError::Json(_) | LabError::Mismatch(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "heavy-markov-lab", version, about = "Spectra of random Markov matrices with heavy-tailed weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues and modulus histogram of sampled matrices.
    Spectrum(ExperimentConfig),
    /// Singular values of `M - z`.
    Singular(ExperimentConfig),
    /// Limiting singular value density from truncated trees.
    PwitMeasure(ExperimentConfig),
    /// Limiting singular value density from population dynamics.
    RdeMeasure(ExperimentConfig),
    /// Unfolding maps and network weights of a small matrix.
    UnfoldDemo(ExperimentConfig),
    /// Distances between network edge laws and tree edge laws.
    LocalConvergence(ExperimentConfig),
    /// Mean edge radius of the spectrum over a grid of tail indices.
    EdgeScan(ExperimentConfig),
    /// Closed-form checks of the samplers and formulas.
    OracleSuite(ExperimentConfig),
    /// Re-run a manifest and compare output digests.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for the re-run; defaults to the manifest's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(name: &str, cfg: &ExperimentConfig) -> Result<RunManifest, LabError> {
    let start = Instant::now();
    let mut out = Outputs::new(&cfg.out, cfg.format)?;
    let outcome = match name {
        "spectrum" => commands::spectrum(cfg, &mut out),
        "singular" => commands::singular(cfg, &mut out),
        "pwit-measure" => commands::pwit_measure(cfg, &mut out),
        "rde-measure" => commands::rde_measure(cfg, &mut out),
        "unfold-demo" => commands::unfold_demo(cfg, &mut out),
        "local-convergence" => commands::local_convergence(cfg, &mut out),
        "edge-scan" => commands::edge_scan(cfg, &mut out),
        "oracle-suite" => commands::oracle_suite(cfg, &mut out),
        other => return Err(LabError::Config(format!("unknown command `{other}`"))),
    }?;
    let dir = out.dir().to_path_buf();
    let manifest = RunManifest {
        command: name.to_string(),
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cfg.seed,
        derived_seeds: outcome.seeds,
        inputs: outcome.inputs,
        outputs: out.into_files(),
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    manifest.write(&dir)?;
    Ok(manifest)
}

fn replay(path: &PathBuf, out: Option<PathBuf>) -> Result<(), LabError> {
    let recorded = RunManifest::read(path)?;
    for i in &recorded.inputs {
        let now = sha256_file(std::path::Path::new(&i.path))?;
        if now != i.sha256 {
            return Err(LabError::Mismatch(format!("input {} changed since the run", i.path)));
        }
    }
    let mut cfg = recorded.config.clone();
    cfg.out = match out {
        Some(o) => o,
        None => path.parent().map(PathBuf::from).unwrap_or_default(),
    };
    let fresh = execute(&recorded.command, &cfg)?;
    let mut diffs = Vec::new();
    for want in &recorded.outputs {
        match fresh.outputs.iter().find(|f| f.path == want.path) {
            Some(got) if got.sha256 == want.sha256 => {}
            Some(_) => diffs.push(format!("{} has a different digest", want.path)),
            None => diffs.push(format!("{} was not produced", want.path)),
        }
    }
    if fresh.outputs.len() != recorded.outputs.len() {
        diffs.push(format!("{} outputs recorded, {} produced", recorded.outputs.len(), fresh.outputs.len()));
    }
    if !diffs.is_empty() {
        return Err(LabError::Mismatch(diffs.join("; ")));
    }
    println!("replay: {} output(s) identical to {}", fresh.outputs.len(), path.display());
    Ok(())
}

fn configure_threads() -> Result<(), LabError> {
    hml_core::linalg::sequential_kernels();
    let Ok(v) = std::env::var("HML_THREADS") else {
        return Ok(());
    };
    let k: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| LabError::Config(format!("HML_THREADS={v} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| LabError::Config(format!("cannot start {k} worker threads: {e}")))
}

fn run(cli: Cli) -> Result<(), LabError> {
    configure_threads()?;
    let (name, cfg) = match cli.command {
        Command::Replay { manifest, out } => return replay(&manifest, out),
        Command::Spectrum(c) => ("spectrum", c),
        Command::Singular(c) => ("singular", c),
        Command::PwitMeasure(c) => ("pwit-measure", c),
        Command::RdeMeasure(c) => ("rde-measure", c),
        Command::UnfoldDemo(c) => ("unfold-demo", c),
        Command::LocalConvergence(c) => ("local-convergence", c),
        Command::EdgeScan(c) => ("edge-scan", c),
        Command::OracleSuite(c) => ("oracle-suite", c),
    };
    let m = execute(name, &cfg)?;
    println!("wrote {} file(s) and {} to {}", m.outputs.len(), MANIFEST_FILE, cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
