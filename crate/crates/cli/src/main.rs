use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spiking_reservoir::experiment::{
    cmd_build_net, cmd_gen_series, cmd_metalearn, cmd_run, cmd_sweep, ExperimentConfig, RunError,
};
use spiking_reservoir::readout::Normalization;

/// Spiking LIF reservoir computing: series generation, network building,
/// evaluation, structural meta-learning and seed sweeps.
#[derive(Debug, Parser)]
#[command(name = "snn-reservoir", version)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Existing output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the config normalization.
    #[arg(long, global = true, value_enum)]
    nrmse_norm: Option<NormArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum NormArg {
    Std,
    Range,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured series to series.csv.
    GenSeries,
    /// Write the configured network to network.json.
    BuildNet,
    /// Evaluate the configured network and write the results bundle.
    Run,
    /// Prune internal edges by simulated annealing.
    Metalearn {
        /// Continue from checkpoint.json in the output directory.
        #[arg(long)]
        resume: bool,
        #[arg(long, default_value_t = 10)]
        checkpoint_every: usize,
        /// Stop after this many iterations in this invocation.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Evaluate seeds seed..seed+n_seeds.
    Sweep {
        #[arg(long)]
        n_seeds: usize,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| RunError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(norm) = cli.nrmse_norm {
        cfg.nrmse_norm = match norm {
            NormArg::Std => Normalization::Std,
            NormArg::Range => Normalization::Range,
        };
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let cfg = load(cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::GenSeries => {
            let path = cmd_gen_series(&cfg, out)?;
            println!("wrote {}", path.display());
        }
        Command::BuildNet => {
            let path = cmd_build_net(&cfg, out)?;
            println!("wrote {}", path.display());
        }
        Command::Run => {
            let r = cmd_run(&cfg, out)?;
            println!(
                "nrmse_std={:.6} nrmse_range={:.6} spikes={} silent={}",
                r.score.nrmse_std,
                r.score.nrmse_range,
                r.stats.total_spikes,
                r.stats.silent_neurons
            );
        }
        Command::Metalearn {
            resume,
            checkpoint_every,
            stop_after,
        } => {
            let m = cmd_metalearn(&cfg, out, *resume, *checkpoint_every, *stop_after)?;
            let a = &m.annealer;
            println!(
                "iteration={} current_nrmse={:.6} best_nrmse={:.6} internal_edges={}->{}",
                a.iteration,
                a.current_nrmse,
                a.trace.best_nrmse,
                m.initial_network.internal_edge_count(),
                a.current.internal_edge_count()
            );
        }
        Command::Sweep { n_seeds } => {
            let s = cmd_sweep(&cfg, *n_seeds, out)?;
            println!("mean={:.6} std={:.6} n={}", s.mean, s.std, s.rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
