use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::metrics::MetricsRecord;
use crate::channel_env::ScenarioKind;
use crate::drl::{Actor, AgentAction, AgentNets, QuantizedNets};
use crate::error::{Error, Result};
use crate::mdp::Observation;
use crate::neuralnet::serialize::{from_bytes, to_bytes};
use crate::neuralnet::{Head, ParamSet};
use crate::rng::Rng;

pub const ARTIFACT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub artifact_version: u32,
    pub command: String,
    /// Output path relative to the run directory -> SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Writes files under one run directory and records their hashes.
pub struct RunWriter {
    root: PathBuf,
    outputs: BTreeMap<String, String>,
}

impl RunWriter {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(RunWriter {
            root: root.to_path_buf(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.outputs.insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    /// CSV with a header row from the field names of `T`.
    pub fn write_csv<T: Serialize>(&mut self, rel: &str, rows: &[T], header: &[&str]) -> Result<()> {
        let mut w = csv_writer();
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.write_bytes(rel, &bytes)
    }

    pub fn finish(self, config: &ExperimentConfig, command: &str) -> Result<Manifest> {
        let manifest = Manifest {
            config: config.clone(),
            seed: config.seeds[0],
            artifact_version: ARTIFACT_VERSION,
            command: command.to_string(),
            outputs: self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.root.join(MANIFEST_FILE), bytes)?;
        Ok(manifest)
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

pub const TRAIN_HEADER: [&str; 5] = ["episode", "v2i_sum_rate_mbps", "v2v_fail_prob", "mean_reward", "epsilon"];
pub const META_LOSS_HEADER: [&str; 5] = ["batch", "q_loss", "critic_loss", "actor_loss", "contributions"];

/// Summary rows keyed by `key` (a label, a sample count or a sweep value).
pub fn write_summary(w: &mut RunWriter, rel: &str, key: &str, rows: &[(String, &MetricsRecord)]) -> Result<()> {
    let body: Vec<_> = rows
        .iter()
        .map(|(k, m)| {
            (
                k.as_str(),
                m.per_seed.len(),
                m.episodes,
                m.v2i_sum_rate_mbps,
                m.v2i_half_width,
                m.v2v_fail_prob,
                m.v2v_fail_half_width,
                m.mean_reward,
            )
        })
        .collect();
    w.write_csv(
        rel,
        &body,
        &[
            key,
            "seeds",
            "episodes",
            "v2i_sum_rate_mbps",
            "v2i_ci95",
            "v2v_fail_prob",
            "v2v_fail_ci95",
            "mean_reward",
        ],
    )
}

/// One row per seed and key.
pub fn write_per_seed(w: &mut RunWriter, rel: &str, key: &str, rows: &[(String, &MetricsRecord)]) -> Result<()> {
    let body: Vec<_> = rows
        .iter()
        .flat_map(|(k, m)| {
            m.per_seed
                .iter()
                .map(move |s| (k.as_str(), s.seed, s.episodes, s.v2i_sum_rate_mbps, s.v2v_fail_prob, s.mean_reward))
        })
        .collect();
    w.write_csv(
        rel,
        &body,
        &[key, "seed", "episodes", "v2i_sum_rate_mbps", "v2v_fail_prob", "mean_reward"],
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    Drl,
    DqnQuantized,
    Meta,
}

impl CheckpointKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckpointKind::Drl => "drl",
            CheckpointKind::DqnQuantized => "dqn_quantized",
            CheckpointKind::Meta => "meta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub kind: CheckpointKind,
    pub config_hash: String,
    pub steps: u64,
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub num_v2i: usize,
    pub p_max_w: f64,
    pub task_seeds: Vec<u64>,
}

/// A trained policy as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Drl(AgentNets),
    Quantized(QuantizedNets),
}

impl Actor for Policy {
    fn act(&self, obs: &Observation, epsilon: f64, explore: bool, rng: &mut Rng) -> AgentAction {
        match self {
            Policy::Drl(n) => n.act(obs, epsilon, explore, rng),
            Policy::Quantized(n) => n.act(obs, epsilon, explore, rng),
        }
    }
}

impl Policy {
    pub fn input_size(&self) -> usize {
        match self {
            Policy::Drl(n) => n.q.input_size(),
            Policy::Quantized(n) => n.q.input_size(),
        }
    }
}

const CHECKPOINT_JSON: &str = "checkpoint.json";

fn nets_files(policy: &Policy) -> Vec<(&'static str, &ParamSet)> {
    match policy {
        Policy::Drl(n) => vec![
            ("q", &n.q),
            ("q_target", &n.q_target),
            ("actor", &n.actor),
            ("actor_target", &n.actor_target),
            ("critic", &n.critic),
            ("critic_target", &n.critic_target),
        ],
        Policy::Quantized(n) => vec![("q", &n.q), ("q_target", &n.q_target)],
    }
}

/// Writes `<dir>/checkpoint.json` and one `.bin` per network.
pub fn save_checkpoint(w: &mut RunWriter, dir: &str, info: &CheckpointInfo, policy: &Policy) -> Result<()> {
    for (name, p) in nets_files(policy) {
        w.write_bytes(&format!("{dir}/{name}.bin"), &to_bytes(p))?;
    }
    w.write_json(&format!("{dir}/{CHECKPOINT_JSON}"), info)
}

fn read_params(dir: &Path, name: &str) -> Result<ParamSet> {
    let path = dir.join(format!("{name}.bin"));
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    from_bytes(&fs::read(path)?)
}

pub fn load_checkpoint(dir: &Path) -> Result<(CheckpointInfo, Policy)> {
    let path = dir.join(CHECKPOINT_JSON);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let info: CheckpointInfo = serde_json::from_slice(&fs::read(path)?)?;
    let policy = match info.kind {
        CheckpointKind::Drl | CheckpointKind::Meta => {
            let actor = read_params(dir, "actor")?;
            if actor.head != Head::SigmoidScaled(info.p_max_w) {
                return Err(Error::Checkpoint("actor head does not match p_max_w".into()));
            }
            let mut nets = AgentNets::from_params(read_params(dir, "q")?, actor, read_params(dir, "critic")?, info.p_max_w);
            nets.q_target = read_params(dir, "q_target")?;
            nets.actor_target = read_params(dir, "actor_target")?;
            nets.critic_target = read_params(dir, "critic_target")?;
            nets.steps = info.steps;
            Policy::Drl(nets)
        }
        CheckpointKind::DqnQuantized => {
            let template = QuantizedNets::new(1, 1, &[], info.p_max_w, 0);
            let mut nets = QuantizedNets::from_params(read_params(dir, "q")?, template.levels_w);
            nets.q_target = read_params(dir, "q_target")?;
            nets.steps = info.steps;
            Policy::Quantized(nets)
        }
    };
    Ok((info, policy))
}

/// The checkpoint of `seed` inside a run directory, or the directory
/// itself when it is a checkpoint.
pub fn checkpoint_dir(run: &Path, seed: u64) -> PathBuf {
    if run.join(CHECKPOINT_JSON).exists() {
        run.to_path_buf()
    } else {
        run.join(seed_dir(seed)).join("checkpoint")
    }
}

pub fn seed_dir(seed: u64) -> String {
    format!("seed-{seed}")
}
