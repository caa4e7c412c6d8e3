use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biot_cli::report::{emit, to_json};
use biot_cli::{cmd_estimate, cmd_solve, cmd_sweep, cmd_verify, CliError, CliResult, ExperimentConfig, LChoice, Mode};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Fixed-stress splitting for impermeable Biot problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults reproduce the reference setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single mesh with this many subdivisions per side.
    #[arg(long = "mesh-n", global = true)]
    mesh_n: Option<usize>,
    /// Output file (stdout for JSON reports when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Power-iteration accuracy preset.
    #[arg(long, value_enum, global = true)]
    mode: Option<Mode>,
    /// Seed of the power-iteration start vectors.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral estimates and the predicted optimal L per mesh.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Write reduced operators (Matrix Market) and the mesh for each n here.
        #[arg(long = "dump-matrices")]
        dump_matrices: Option<PathBuf>,
    },
    /// Time-march one mesh with a fixed or the estimated optimal L.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Stabilization parameter in 1/Pa, or "optimal".
        #[arg(long = "L", default_value = "optimal")]
        l: LChoice,
        /// Write reduced operators (Matrix Market) and the mesh here.
        #[arg(long = "dump-matrices")]
        dump_matrices: Option<PathBuf>,
    },
    /// Average iterations over the D grid for every mesh (CSV plus JSON sidecar).
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Dense-oracle checks on a small mesh (n = 8 unless --mesh-n is given).
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = common.mesh_n {
        cfg.mesh.n = vec![n];
    }
    if let Some(mode) = common.mode {
        cfg.spectral.mode = mode;
        cfg.spectral.tol = None;
    }
    if let Some(seed) = common.seed {
        cfg.spectral.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Estimate { common, dump_matrices } => {
            let cfg = load_config(&common)?;
            let report = cmd_estimate(&cfg, dump_matrices.as_deref())?;
            emit(common.out.as_deref(), &to_json(&report)?)
        }
        Command::Solve { common, l, dump_matrices } => {
            let cfg = load_config(&common)?;
            let report = cmd_solve(&cfg, l, dump_matrices.as_deref())?;
            emit(common.out.as_deref(), &to_json(&report)?)?;
            if report.diverged {
                return Err(CliError::Diverged(format!(
                    "L = {:e} on n = {}: step {} did not converge in {} iterations",
                    report.l,
                    report.n,
                    report.iterations.len(),
                    cfg.solver.max_iter
                )));
            }
            Ok(())
        }
        Command::Sweep { common } => {
            let cfg = load_config(&common)?;
            let csv_path = common.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
            let report = cmd_sweep(&cfg, |row| {
                eprintln!(
                    "n = {:>4}  D = {:.4e}  avg = {:>7.2}{}",
                    row.n,
                    row.d,
                    row.avg_iterations,
                    if row.diverged { "  (diverged)" } else { "" }
                );
            })?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            let text = String::from_utf8(buf).map_err(|e| CliError::Serialize(e.to_string()))?;
            emit(Some(&csv_path), &text)?;
            emit(Some(&sidecar(&csv_path)), &to_json(&report)?)
        }
        Command::Verify { common } => {
            let mut cfg = load_config(&common)?;
            let n = common.mesh_n.unwrap_or(8);
            cfg.mesh.n = vec![n];
            let report = cmd_verify(&cfg, n)?;
            eprint!("{}", report.table());
            emit(common.out.as_deref(), &to_json(&report)?)?;
            match report.failures() {
                0 => Ok(()),
                k => Err(CliError::VerificationFailed(k)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
