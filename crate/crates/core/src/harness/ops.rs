use std::path::Path;

use super::config::{BaselineKind, ExperimentConfig, Solution, SweepAxis};
use super::metrics::{aggregate_metrics, MetricsRecord};
use super::run::{
    checkpoint_dir, load_checkpoint, save_checkpoint, seed_dir, write_per_seed, write_summary, CheckpointInfo,
    CheckpointKind, Manifest, Policy, RunWriter, META_LOSS_HEADER, TRAIN_HEADER,
};
use crate::channel_env::{Environment, ScenarioConfig};
use crate::drl::{evaluate, run_algorithm1, run_training, Actor, AgentNets, QuantizedNets, RandomPolicy};
use crate::error::{Error, Result};
use crate::mdp::{observation_len, V2xMdp};
use crate::meta::{meta_adapt, run_meta_training, task_set};
use crate::rng;

/// What a command produced: the manifest it wrote and its metric rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub manifest: Manifest,
    pub records: Vec<(String, MetricsRecord)>,
}

/// Evaluation seed shared by every solution run under `seed`.
pub fn eval_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, rng::tag::EVAL)
}

fn init_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, rng::tag::INIT)
}

fn check_input(policy: &Policy, scenario: &ScenarioConfig) -> Result<()> {
    let want = observation_len(scenario.num_v2i);
    if policy.input_size() != want {
        return Err(Error::Shape(format!(
            "checkpoint expects observations of length {}, scenario gives {want}",
            policy.input_size()
        )));
    }
    Ok(())
}

fn eval_seeds<A: Actor + Sync + ?Sized>(
    cfg: &ExperimentConfig,
    scenario: &ScenarioConfig,
    mut actor_for: impl FnMut(u64) -> Result<Box<A>>,
) -> Result<MetricsRecord> {
    let mut logs = Vec::with_capacity(cfg.seeds.len());
    for &s in &cfg.seeds {
        let actor = actor_for(s)?;
        logs.push((s, evaluate(&*actor, scenario, cfg.reward, eval_seed(s), cfg.eval_episodes)?));
    }
    Ok(aggregate_metrics(&logs))
}

fn info(cfg: &ExperimentConfig, kind: CheckpointKind, seed: u64, steps: u64, scenario: &ScenarioConfig) -> CheckpointInfo {
    CheckpointInfo {
        kind,
        config_hash: cfg.hash(),
        steps,
        seed,
        scenario: scenario.kind,
        num_v2i: scenario.num_v2i,
        p_max_w: scenario.v2v_max_power_w(),
        task_seeds: Vec::new(),
    }
}

fn finish_metrics(mut w: RunWriter, cfg: &ExperimentConfig, command: &str, label: &str, rec: MetricsRecord) -> Result<RunReport> {
    let rows = [(label.to_string(), &rec)];
    write_summary(&mut w, "metrics.csv", "solution", &rows)?;
    write_per_seed(&mut w, "per_seed.csv", "solution", &rows)?;
    let manifest = w.finish(cfg, command)?;
    Ok(RunReport {
        manifest,
        records: vec![(label.to_string(), rec)],
    })
}

/// Trains the combined DQN/DDPG agent for every seed, writes checkpoints
/// and per-episode logs, then evaluates the greedy policies.
pub fn cli_train(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let scenario = cfg.scenario_config();
    let mut w = RunWriter::create(&cfg.out_dir)?;
    let mut trained = Vec::new();
    for &s in &cfg.seeds {
        let mut nets = AgentNets::new(
            observation_len(cfg.num_v2i),
            cfg.num_v2i,
            &cfg.train.hidden,
            scenario.v2v_max_power_w(),
            init_seed(s),
        );
        let mut mdp = V2xMdp::new(Environment::build(&scenario, s)?, cfg.reward);
        let log = run_algorithm1(&mut mdp, &mut nets, &cfg.train, s)?;
        let dir = seed_dir(s);
        w.write_csv(&format!("{dir}/train.csv"), &log.episodes, &TRAIN_HEADER)?;
        let policy = Policy::Drl(nets);
        save_checkpoint(&mut w, &format!("{dir}/checkpoint"), &info(cfg, CheckpointKind::Drl, s, log.updates, &scenario), &policy)?;
        trained.push((s, policy));
    }
    let mut it = trained.into_iter();
    let rec = eval_seeds(cfg, &scenario, |_| Ok(Box::new(it.next().expect("one policy per seed").1)))?;
    finish_metrics(w, cfg, "train", "drl", rec)
}

/// Random policy (training-free) or the quantized-power DQN baseline.
pub fn cli_baseline(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let scenario = cfg.scenario_config();
    let p_max = scenario.v2v_max_power_w();
    match cfg.baseline {
        BaselineKind::Random => {
            let w = RunWriter::create(&cfg.out_dir)?;
            let policy = RandomPolicy {
                num_subbands: cfg.num_v2i,
                p_max,
            };
            let rec = eval_seeds(cfg, &scenario, |_| Ok(Box::new(policy)))?;
            finish_metrics(w, cfg, "baseline", "random", rec)
        }
        BaselineKind::DqnQuantized => {
            let mut w = RunWriter::create(&cfg.out_dir)?;
            let mut trained = Vec::new();
            for &s in &cfg.seeds {
                let mut nets = QuantizedNets::new(observation_len(cfg.num_v2i), cfg.num_v2i, &cfg.train.hidden, p_max, init_seed(s));
                let mut mdp = V2xMdp::new(Environment::build(&scenario, s)?, cfg.reward);
                let log = run_training(&mut mdp, &mut nets, &cfg.train, s)?;
                let dir = seed_dir(s);
                w.write_csv(&format!("{dir}/train.csv"), &log.episodes, &TRAIN_HEADER)?;
                let policy = Policy::Quantized(nets);
                let meta = info(cfg, CheckpointKind::DqnQuantized, s, log.updates, &scenario);
                save_checkpoint(&mut w, &format!("{dir}/checkpoint"), &meta, &policy)?;
                trained.push(policy);
            }
            let mut it = trained.into_iter();
            let rec = eval_seeds(cfg, &scenario, |_| Ok(Box::new(it.next().expect("one policy per seed"))))?;
            finish_metrics(w, cfg, "baseline", "dqn_quantized", rec)
        }
    }
}

/// Meta-trains an initialization per seed on a task set of
/// `meta.task_kind`.
pub fn cli_meta_train(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut base = ScenarioConfig::preset(cfg.meta.task_kind, cfg.num_v2i, cfg.num_v2v);
    base.payload_bytes = cfg.payload_bytes;
    let mut w = RunWriter::create(&cfg.out_dir)?;
    for &s in &cfg.seeds {
        let tasks = task_set(cfg.meta.task_kind, cfg.meta.task_set_size, rng::derive_seed(s, rng::tag::TASKS));
        let mut nets = AgentNets::new(
            observation_len(cfg.num_v2i),
            cfg.num_v2i,
            &cfg.train.hidden,
            base.v2v_max_power_w(),
            init_seed(s),
        );
        let log = run_meta_training(&mut nets, &tasks, &base, &cfg.meta, &cfg.train, cfg.reward, s)?;
        let dir = seed_dir(s);
        w.write_csv(&format!("{dir}/meta_loss.csv"), &log.batches, &META_LOSS_HEADER)?;
        let mut meta = info(cfg, CheckpointKind::Meta, s, log.outer_steps, &base);
        meta.task_seeds = tasks.iter().map(|t| t.seed).collect();
        save_checkpoint(&mut w, &format!("{dir}/checkpoint"), &meta, &Policy::Drl(nets))?;
    }
    let manifest = w.finish(cfg, "meta-train")?;
    Ok(RunReport {
        manifest,
        records: Vec::new(),
    })
}

fn required_checkpoint(cfg: &ExperimentConfig) -> Result<&Path> {
    let path = cfg.checkpoint.as_deref().ok_or_else(|| Error::Config {
        path: "checkpoint".into(),
        message: "this command needs a checkpoint run directory".into(),
    })?;
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(path)
}

fn load_for(run: &Path, seed: u64, scenario: &ScenarioConfig) -> Result<(CheckpointInfo, Policy)> {
    let (info, policy) = load_checkpoint(&checkpoint_dir(run, seed))?;
    check_input(&policy, scenario)?;
    Ok((info, policy))
}

/// Sample counts in ascending order, always including 0.
pub fn samples_rows(grid: &[u64]) -> Vec<u64> {
    let mut rows: Vec<u64> = std::iter::once(0).chain(grid.iter().copied()).collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

/// Meta-adapts the stored initialization in the configured scenario for
/// each sample count and evaluates the result. The 0 row is the
/// initialization itself.
pub fn cli_adapt_eval(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let run = required_checkpoint(cfg)?;
    let scenario = cfg.scenario_config();
    let mut inits = Vec::new();
    for &s in &cfg.seeds {
        match load_for(run, s, &scenario)? {
            (_, Policy::Drl(nets)) => inits.push((s, nets)),
            _ => return Err(Error::Checkpoint("adaptation needs a DQN/DDPG checkpoint".into())),
        }
    }
    let mut w = RunWriter::create(&cfg.out_dir)?;
    let mut records = Vec::new();
    for n in samples_rows(&cfg.adapt.samples_grid) {
        let mut logs = Vec::new();
        for (s, init) in &inits {
            let nets = if n == 0 {
                init.clone()
            } else {
                let env_seed = rng::derive_seed(*s, rng::tag::ADAPT);
                meta_adapt(init, &scenario, env_seed, n, &cfg.meta, &cfg.train, cfg.reward)?
            };
            logs.push((*s, evaluate(&nets, &scenario, cfg.reward, eval_seed(*s), cfg.eval_episodes)?));
        }
        records.push((n.to_string(), aggregate_metrics(&logs)));
    }
    let rows: Vec<_> = records.iter().map(|(k, r)| (k.clone(), r)).collect();
    write_summary(&mut w, "adapt.csv", "samples", &rows)?;
    write_per_seed(&mut w, "adapt_per_seed.csv", "samples", &rows)?;
    let manifest = w.finish(cfg, "adapt-eval")?;
    Ok(RunReport { manifest, records })
}

fn solution_actor(sol: &Solution, seed: u64, scenario: &ScenarioConfig) -> Result<Box<dyn Actor + Sync>> {
    match &sol.checkpoint {
        None => Ok(Box::new(RandomPolicy {
            num_subbands: scenario.num_v2i,
            p_max: scenario.v2v_max_power_w(),
        })),
        Some(run) => {
            if !run.exists() {
                return Err(Error::MissingFile(run.clone()));
            }
            Ok(Box::new(load_for(run, seed, scenario)?.1))
        }
    }
}

pub fn sweep_values(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.sweep.values.is_empty() {
        cfg.sweep.axis.default_values()
    } else {
        cfg.sweep.values.clone()
    }
}

/// Evaluates every solution along the sweep axis; one CSV per solution.
/// Each point uses the same evaluation seeds.
pub fn cli_sweep(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let values = sweep_values(cfg);
    let mut w = RunWriter::create(&cfg.out_dir)?;
    let mut records = Vec::new();
    for sol in &cfg.sweep.solutions {
        let mut rows = Vec::new();
        for &v in &values {
            let mut point = cfg.clone();
            match cfg.sweep.axis {
                SweepAxis::Vehicles => point.num_v2v = v as usize,
                SweepAxis::Payload => point.payload_bytes = v,
            }
            let scenario = point.scenario_config();
            let rec = eval_seeds(&point, &scenario, |s| solution_actor(sol, s, &scenario))?;
            rows.push((v.to_string(), rec));
        }
        let refs: Vec<_> = rows.iter().map(|(k, r)| (k.clone(), r)).collect();
        let column = cfg.sweep.axis.column();
        write_summary(&mut w, &format!("sweep_{}.csv", sol.label), column, &refs)?;
        write_per_seed(&mut w, &format!("sweep_{}_per_seed.csv", sol.label), column, &refs)?;
        records.extend(rows.into_iter().map(|(k, r)| (format!("{}:{k}", sol.label), r)));
    }
    let manifest = w.finish(cfg, "sweep")?;
    Ok(RunReport { manifest, records })
}

/// Greedy evaluation of stored checkpoints in the configured scenario.
/// Writes metrics only.
pub fn cli_eval(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let run = required_checkpoint(cfg)?.to_path_buf();
    let scenario = cfg.scenario_config();
    let mut label = String::new();
    let rec = eval_seeds(cfg, &scenario, |s| {
        let (info, policy) = load_for(&run, s, &scenario)?;
        label = info.kind.name().to_string();
        Ok(Box::new(policy))
    })?;
    let w = RunWriter::create(&cfg.out_dir)?;
    finish_metrics(w, cfg, "eval", &label, rec)
}
