//! Experiment configs, checkpoints, run manifests and the commands behind
//! the `v2x` CLI.

mod config;
mod metrics;
mod ops;
mod run;

pub use config::{
    apply_override, config_from_value, AdaptConfig, BaselineKind, ExperimentConfig, Solution, SweepAxis, SweepConfig,
};
pub use metrics::{aggregate_metrics, half_width, seed_metrics, MetricsRecord, SeedMetrics};
pub use ops::{
    cli_adapt_eval, cli_baseline, cli_eval, cli_meta_train, cli_sweep, cli_train, eval_seed, samples_rows, sweep_values,
    RunReport,
};
pub use run::{
    checkpoint_dir, load_checkpoint, save_checkpoint, seed_dir, CheckpointInfo, CheckpointKind, Manifest, Policy,
    RunWriter, ARTIFACT_VERSION, MANIFEST_FILE, META_LOSS_HEADER, TRAIN_HEADER,
};

/// Runs `command` (a CLI subcommand name) with `cfg`.
pub fn run_command(command: &str, cfg: &ExperimentConfig) -> crate::Result<RunReport> {
    match command {
        "train" => cli_train(cfg),
        "baseline" => cli_baseline(cfg),
        "meta-train" => cli_meta_train(cfg),
        "adapt-eval" => cli_adapt_eval(cfg),
        "sweep" => cli_sweep(cfg),
        "eval" => cli_eval(cfg),
        other => Err(crate::Error::Config {
            path: "command".into(),
            message: format!("unknown command `{other}`"),
        }),
    }
}
