use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gridgame_cli::experiment::{self, Controller};
use gridgame_cli::presets::{preset, PRESETS};
use gridgame_cli::{ExperimentConfig, SeedSpec, SnapshotSchedule};

#[derive(Parser, Debug)]
#[command(name = "gridgame", version, about = "Imitation dynamics for 2x2 games on toroidal grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Seeded stochastic runs; writes runs.csv and snapshots.
    Run(Common),
    /// Convergence fraction and median absorption time per parameter.
    Sweep(Common),
    /// Exhaustive support-graph certificate (at most 16 nodes).
    Verify(Common),
    /// Constructive controlled traces.
    Control {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        controller: Option<Controller>,
    },
    /// Runs with pinned nodes.
    Macc(Common),
    /// Prints a preset as TOML.
    Preset { name: String },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// `A..B` (end exclusive) or a comma list.
    #[arg(long)]
    seeds: Option<SeedSpec>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// `every:K`.
    #[arg(long)]
    snapshots: Option<SnapshotSchedule>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(p), None) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            (None, Some(name)) => preset(name)?,
            _ => bail!("pass --config PATH or --preset NAME ({})", PRESETS.join(", ")),
        };
        if let Some(s) = self.seed {
            cfg.seeds = SeedSpec::List(vec![s]);
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(n) = self.max_steps {
            cfg.max_steps = Some(n);
        }
        if let Some(s) = self.snapshots {
            cfg.snapshots = Some(s);
        }
        cfg.validate()?;
        let out = self.out.clone().or_else(|| cfg.out.clone().map(PathBuf::from)).unwrap_or_else(|| "out".into());
        Ok((cfg, out))
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(c) => {
            let (cfg, out) = c.resolve()?;
            let rows = experiment::run(&cfg, &out, c.workers)?;
            let conv = rows.iter().filter(|r| r.converged).count();
            println!("{} runs, {conv} absorbed, config {} -> {}", rows.len(), cfg.hash(), out.display());
        }
        Command::Sweep(c) => {
            let (cfg, out) = c.resolve()?;
            for r in experiment::sweep(&cfg, &out, c.workers)? {
                let med = r.median_steps.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
                println!("{}: {}/{} absorbed within {}, median {med}", r.point, r.converged, r.replications, r.max_steps);
            }
        }
        Command::Verify(c) => {
            let (cfg, out) = c.resolve()?;
            for r in experiment::verify(&cfg, c.out.as_ref().map(|_| out.as_path()))? {
                println!("{}", r.verdict_line());
            }
        }
        Command::Control { common, controller } => {
            let (cfg, out) = common.resolve()?;
            let rows = experiment::control(&cfg, controller, &out, common.workers)?;
            let bad = rows.iter().filter(|r| !r.ok).count();
            println!("{} traces, {bad} with integrity errors -> {}", rows.len(), out.display());
            if bad > 0 {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Macc(c) => {
            let (cfg, out) = c.resolve()?;
            for (p, s) in experiment::macc(&cfg, &out)? {
                println!("{}: {}/{} reached consensus on the pinned strategy", p.label, s.successes(), s.runs());
            }
        }
        Command::Preset { name } => print!("{}", preset(&name)?.to_toml()),
    }
    Ok(ExitCode::SUCCESS)
}
