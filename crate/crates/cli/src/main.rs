//! Command-line entry point. Exit codes: 0 success, 2 configuration
//! error, 3 integration abort.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use degensim::config::{FileConfig, RunConfig};
use degensim::experiments::{self, IntegrationAbort};
use degensim::output::ensure_dir;

#[derive(Parser)]
#[command(
    name = "degensim",
    about = "Simulation experiments for degenerate diffusion-reaction systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Problem preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Time-integration tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Regularization parameter (0 = degenerate coefficient).
    #[arg(long)]
    eps: Option<f64>,
    /// Grid size as NxM.
    #[arg(long)]
    grid: Option<String>,
    /// Final simulation time.
    #[arg(long)]
    t_end: Option<f64>,
    /// Also write legacy-VTK snapshot files.
    #[arg(long)]
    vtk: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its artifacts.
    Run(CommonOpts),
    /// Grid-refinement study over 2^kappa grids.
    ConvergeGrid {
        #[command(flatten)]
        common: CommonOpts,
        /// Kappa exponents, e.g. --kappa 5 --kappa 6
        #[arg(long = "kappa", required = true)]
        kappas: Vec<u32>,
        /// Comparison times.
        #[arg(long = "time", default_values_t = [2.0, 6.0])]
        times: Vec<f64>,
    },
    /// Regularization (epsilon) convergence against the eps = 0 reference.
    ConvergeEps {
        #[command(flatten)]
        common: CommonOpts,
        /// Epsilon values, descending.
        #[arg(long = "eps-value", required = true)]
        eps_list: Vec<f64>,
    },
    /// Validation against the exact self-similar solution.
    Barenblatt {
        #[command(flatten)]
        common: CommonOpts,
        /// Grid sizes.
        #[arg(long = "n", default_values_t = [32usize, 64, 128])]
        grids: Vec<usize>,
    },
    /// Domain-length sweep of the quorum-sensing model.
    QsSweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Domain lengths L.
        #[arg(long = "l", default_values_t = [1.0, 1.5, 2.0, 2.5])]
        l_list: Vec<f64>,
    },
}

fn load_config(opts: &CommonOpts) -> anyhow::Result<RunConfig> {
    let mut file = match &opts.config {
        Some(path) => FileConfig::from_path(path)?,
        None => FileConfig::default(),
    };
    file = file.merge(FileConfig {
        preset: opts.preset.clone(),
        grid: opts.grid.clone(),
        eps: opts.eps,
        tol: opts.tol,
        t_end: opts.t_end,
        out: opts.out.clone(),
        vtk: if opts.vtk { Some(true) } else { None },
        ..FileConfig::default()
    });
    RunConfig::from_file(&file)
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(opts) => {
            let cfg = load_config(&opts)?;
            let sim = experiments::run(&cfg)?;
            println!(
                "run complete: t = {}, {} accepted / {} rejected steps, artifacts in {}",
                sim.final_time, sim.trace.accepted, sim.trace.rejected, cfg.out
            );
        }
        Command::ConvergeGrid {
            common,
            kappas,
            times,
        } => {
            let cfg = load_config(&common)?;
            let rows = experiments::converge_grid(&cfg, &kappas, &times)?;
            let dir = ensure_dir(Path::new(&cfg.out))?;
            experiments::write_refinement_table(&dir, &rows)?;
            for r in &rows {
                println!(
                    "kappa={} t={} E_u={:.6e}{}",
                    r.kappa,
                    r.t,
                    r.error_u,
                    r.error_c
                        .map(|e| format!(" E_c={e:.6e}"))
                        .unwrap_or_default()
                );
            }
        }
        Command::ConvergeEps { common, eps_list } => {
            let cfg = load_config(&common)?;
            let rows = experiments::converge_eps(&cfg, &eps_list)?;
            let dir = ensure_dir(Path::new(&cfg.out))?;
            experiments::write_eps_table(&dir, &rows)?;
            for r in &rows {
                println!("eps={:e} E_u={:.6e}", r.eps, r.error_u);
            }
        }
        Command::Barenblatt { common, grids } => {
            let cfg = load_config(&common)?;
            let rows = experiments::barenblatt_validate(&cfg, &grids)?;
            let dir = ensure_dir(Path::new(&cfg.out))?;
            experiments::write_barenblatt_table(&dir, &rows)?;
            for r in &rows {
                println!("n={} error={:.7e} elapsed={:.2}s", r.n, r.error, r.elapsed_s);
            }
        }
        Command::QsSweep { common, l_list } => {
            let cfg = load_config(&common)?;
            let result = experiments::qs_sweep(&cfg, &l_list)?;
            let dir = ensure_dir(Path::new(&cfg.out))?;
            experiments::write_qs_table(&dir, &result)?;
            if result.censored > 0 {
                eprintln!(
                    "warning: {} event(s) not reached before t_end; censored rows excluded from fits",
                    result.censored
                );
            }
            for r in &result.rows {
                println!(
                    "L={} T1={:?} T4={:?} final_mass={:.6}",
                    r.l, r.events.t1, r.events.t4, r.final_mass
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<IntegrationAbort>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
