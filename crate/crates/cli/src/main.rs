use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sorb::harness::{self, RunConfig};
use sorb::Error;

/// Learned-distance planning over the replay buffer in gridworlds.
#[derive(Parser, Debug)]
#[command(name = "sorb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one ensemble per seed and write checkpoints.
    Train(Common),
    /// Success-versus-distance curves for SoRB, greedy-only and random.
    Eval(Common),
    /// Ablation over one axis (set `sweep.axis` in the config or pass --axis).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// buffer_size, maxdist, ensemble, aggregation or distributional.
        #[arg(long)]
        axis: Option<String>,
    },
    /// Evaluate on held-out generated mazes with random-walk search buffers.
    Generalize(Common),
    /// Predicted versus oracle distance calibration.
    Distcheck(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run config; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint file or run directory holding `seed_<n>/`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single seed; overrides the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Custom map file ('#' walls, '.' free).
    #[arg(long)]
    map: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> sorb::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("cannot read config {}: {io}", p.display())),
                e => e,
            })?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(map) = &self.map {
            cfg.map_file = Some(map.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> sorb::Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = c.load()?;
            let outcomes = harness::cmd_train::<f32>(&cfg)?;
            for o in outcomes {
                let last = o.losses.last().map_or(f64::NAN, |r| r.loss);
                println!("seed {}: {} updates, final loss {last:.4}", o.seed, o.losses.len());
            }
        }
        Command::Eval(c) => {
            let cfg = c.load()?;
            let records = harness::cmd_eval::<f32>(&cfg, c.checkpoint.as_deref())?;
            for ((method, d), s) in harness::mean_success(&records) {
                println!("{:<12} distance {d:>3}: success {s:.3}", method.name());
            }
        }
        Command::Sweep { common, axis } => {
            let mut cfg = common.load()?;
            if axis.is_some() {
                cfg.sweep.axis = axis;
            }
            let records = harness::cmd_sweep::<f32>(&cfg, common.checkpoint.as_deref())?;
            println!("{} rows written to {}", records.len(), cfg.output_dir.display());
        }
        Command::Generalize(c) => {
            let cfg = c.load()?;
            let records = harness::cmd_generalize::<f32>(&cfg, c.checkpoint.as_deref())?;
            println!("{} rows written to {}", records.len(), cfg.output_dir.join("generalize.csv").display());
        }
        Command::Distcheck(c) => {
            let cfg = c.load()?;
            let rows = harness::cmd_distcheck::<f32>(&cfg, c.checkpoint.as_deref())?;
            let oracle: Vec<f64> = rows.iter().map(|r| r.oracle as f64).collect();
            let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
            println!("{} pairs, spearman {:.4}", rows.len(), harness::spearman(&oracle, &predicted));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
