use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gramsynth::harness::{
    cmd_baseline, cmd_reference, cmd_scale, cmd_synthesize, cmd_underactuated_demo, ExperimentConfig, RunArtifact,
    TelemetryFormat,
};

/// Gramian fixed-point steering experiments.
#[derive(Parser)]
#[command(name = "gramsynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Picard synthesis on one benchmark.
    Synthesize(Common),
    /// Per-iteration timing over surrogate dimensions.
    Scale(Common),
    /// Minimum-energy steering of an underactuated surrogate.
    Underactuated(Common),
    /// Straight-line feedback-linearization baseline.
    Baseline(Common),
    /// Sample and simulate a Chebyshev reference control.
    Reference(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "GRAMSYNTH_OUT")]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "GRAMSYNTH_SEED")]
    seed: Option<u64>,
    /// Telemetry format.
    #[arg(long, value_enum, env = "GRAMSYNTH_FORMAT")]
    format: Option<TelemetryFormat>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "GRAMSYNTH_WORKERS")]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> gramsynth::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(format) = self.format {
            cfg.output.format = format;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(art: &RunArtifact) -> bool {
    let s = &art.summary;
    match &art.status.error {
        Some(e) => eprintln!("{}: {e}", art.command),
        None => println!(
            "{} {}: {:?} n={} err_end={:.3e} energy={:.6}",
            art.command, art.system, art.status.termination, s.iterations, s.err_end, s.energy
        ),
    }
    art.status.success
}

fn run(cli: Cli) -> gramsynth::Result<bool> {
    let common = match &cli.command {
        Command::Synthesize(c)
        | Command::Scale(c)
        | Command::Underactuated(c)
        | Command::Baseline(c)
        | Command::Reference(c) => c,
    };
    let cfg = common.load()?;
    if let Some(n) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| gramsynth::Error::InvalidConfig(e.to_string()))?;
    }
    Ok(match cli.command {
        Command::Synthesize(_) => report(&cmd_synthesize(&cfg)?),
        Command::Baseline(_) => report(&cmd_baseline(&cfg)?),
        Command::Reference(_) => report(&cmd_reference(&cfg)?),
        Command::Underactuated(_) => {
            let r = cmd_underactuated_demo(&cfg)?;
            println!(
                "reference energy {:.6}, synthesized {:.6}, monotone decay {}",
                r.reference_energy, r.synthesized_energy, r.monotone_decay
            );
            report(&r.artifact)
        }
        Command::Scale(_) => {
            let (rows, trials) = cmd_scale(&cfg)?;
            println!("dim samples failures mean_iter_s std_iter_s mean_err_end std_err_end");
            for r in &rows {
                println!(
                    "{} {} {} {:.4} {:.4} {:.3e} {:.3e}",
                    r.dim, r.samples, r.failures, r.mean_iteration_time, r.std_iteration_time, r.mean_err_end, r.std_err_end
                );
            }
            trials.iter().all(|t| t.succeeded())
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
