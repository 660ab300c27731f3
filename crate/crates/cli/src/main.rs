use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use v2x_core::harness::{run_command, ExperimentConfig, RunReport};

#[derive(Parser)]
#[command(name = "v2x", version, about = "V2X spectrum sharing: training, baselines, meta-learning and sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config, or the manifest of an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value`, dotted keys into the config (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Random,
    DqnQuantized,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Vehicles,
    Payload,
}

#[derive(Subcommand)]
enum Command {
    /// Train the DQN/DDPG agents and evaluate them.
    Train(Common),
    /// Evaluate the random policy or train the quantized-power DQN.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<Baseline>,
    },
    /// Meta-train an initialization on a task set.
    MetaTrain(Common),
    /// Adapt a meta-initialization with a few samples and evaluate it.
    AdaptEval {
        #[command(flatten)]
        common: Common,
        /// Meta-train run directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated sample counts.
        #[arg(long, value_delimiter = ',')]
        samples: Vec<u64>,
    },
    /// Evaluate solutions over vehicle counts or payload sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Evaluate stored checkpoints.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn json_path(p: &std::path::Path) -> String {
    format!("{:?}", p.to_string_lossy())
}

fn resolve(common: &Common, mut extra: Vec<String>) -> anyhow::Result<ExperimentConfig> {
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("seeds=[{seed}]"));
    }
    if let Some(out) = &common.out {
        overrides.push(format!("out_dir={}", json_path(out)));
    }
    overrides.append(&mut extra);
    let cfg = ExperimentConfig::resolve(common.config.as_deref(), &overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn csv_list<T: ToString>(v: &[T]) -> String {
    format!("[{}]", v.iter().map(T::to_string).collect::<Vec<_>>().join(","))
}

fn print_report(report: &RunReport) {
    println!("{} -> {}", report.manifest.command, report.manifest.config.out_dir.display());
    for (key, r) in &report.records {
        println!(
            "  {key:>16}  v2i {:8.3} ± {:.3} Mbps   fail {:.4} ± {:.4}   ({} episodes)",
            r.v2i_sum_rate_mbps, r.v2i_half_width, r.v2v_fail_prob, r.v2v_fail_half_width, r.episodes
        );
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (name, cfg) = match &cli.command {
        Command::Train(c) => ("train", resolve(c, vec![])?),
        Command::MetaTrain(c) => ("meta-train", resolve(c, vec![])?),
        Command::Baseline { common, kind } => {
            let extra = kind
                .map(|k| match k {
                    Baseline::Random => "baseline=random",
                    Baseline::DqnQuantized => "baseline=dqn_quantized",
                })
                .into_iter()
                .map(String::from)
                .collect();
            ("baseline", resolve(common, extra)?)
        }
        Command::AdaptEval {
            common,
            checkpoint,
            samples,
        } => {
            let mut extra = Vec::new();
            if let Some(c) = checkpoint {
                extra.push(format!("checkpoint={}", json_path(c)));
            }
            if !samples.is_empty() {
                extra.push(format!("adapt.samples_grid={}", csv_list(samples)));
            }
            ("adapt-eval", resolve(common, extra)?)
        }
        Command::Sweep { common, axis, values } => {
            let mut extra = Vec::new();
            if let Some(a) = axis {
                extra.push(
                    match a {
                        Axis::Vehicles => "sweep.axis=vehicles",
                        Axis::Payload => "sweep.axis=payload",
                    }
                    .to_string(),
                );
            }
            if !values.is_empty() {
                extra.push(format!("sweep.values={}", csv_list(values)));
            }
            ("sweep", resolve(common, extra)?)
        }
        Command::Eval { common, checkpoint } => {
            let extra = checkpoint.iter().map(|c| format!("checkpoint={}", json_path(c))).collect();
            ("eval", resolve(common, extra)?)
        }
    };
    let report = run_command(name, &cfg).with_context(|| format!("{name} failed"))?;
    print_report(&report);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
