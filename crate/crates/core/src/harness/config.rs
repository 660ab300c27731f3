use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel_env::{ScenarioConfig, ScenarioKind};
use crate::drl::TrainConfig;
use crate::error::{Error, Result};
use crate::mdp::RewardWeights;
use crate::meta::MetaConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    DqnQuantized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Number of V2V pairs.
    Vehicles,
    /// V2V payload in bytes.
    Payload,
}

impl SweepAxis {
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Vehicles => vec![4.0, 8.0, 12.0],
            SweepAxis::Payload => vec![1060.0, 2120.0, 4240.0],
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::Vehicles => "num_v2v",
            SweepAxis::Payload => "payload_bytes",
        }
    }
}

/// A policy to evaluate: a trained run directory, or the random policy
/// when `checkpoint` is absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    pub label: String,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Empty means the axis defaults.
    pub values: Vec<f64>,
    pub solutions: Vec<Solution>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            axis: SweepAxis::Vehicles,
            values: Vec::new(),
            solutions: vec![Solution {
                label: "random".into(),
                checkpoint: None,
            }],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub samples_grid: Vec<u64>,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            samples_grid: vec![10, 20, 30, 40, 50],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub num_v2i: usize,
    pub num_v2v: usize,
    pub payload_bytes: f64,
    pub reward: RewardWeights,
    pub train: TrainConfig,
    pub meta: MetaConfig,
    pub adapt: AdaptConfig,
    pub baseline: BaselineKind,
    pub sweep: SweepConfig,
    pub eval_episodes: u64,
    pub seeds: Vec<u64>,
    /// Run directory holding the checkpoints `eval`, `adapt-eval` and
    /// `sweep` read.
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioKind::Urban,
            num_v2i: 4,
            num_v2v: 4,
            payload_bytes: 1060.0,
            reward: RewardWeights::default(),
            train: TrainConfig::default(),
            meta: MetaConfig::default(),
            adapt: AdaptConfig::default(),
            baseline: BaselineKind::Random,
            sweep: SweepConfig::default(),
            eval_episodes: 200,
            seeds: vec![1],
            checkpoint: None,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Deserializes a config, reporting the dotted path of the offending key.
pub fn config_from_value(value: Value) -> Result<ExperimentConfig> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        config_error(path, e.into_inner().to_string())
    })
}

/// Sets `key` (dotted path) to `raw`, parsed as JSON when possible and as a
/// string otherwise. Only keys that already exist can be set.
pub fn apply_override(value: &mut Value, key: &str, raw: &str) -> Result<()> {
    let mut cur = value;
    for part in key.split('.') {
        cur = match cur {
            Value::Object(map) => map
                .get_mut(part)
                .ok_or_else(|| config_error(key, "unknown key"))?,
            _ => return Err(config_error(key, "unknown key")),
        };
    }
    *cur = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

impl ExperimentConfig {
    /// Reads a config file. A run manifest is accepted too, in which case
    /// its `config` entry is used.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut value: Value = serde_json::from_slice(&std::fs::read(path)?)?;
        if let Value::Object(map) = &mut value {
            if map.contains_key("artifact_version") {
                value = map.remove("config").ok_or_else(|| config_error("config", "manifest without config"))?;
            }
        }
        config_from_value(value)
    }

    /// File (or defaults) with `key=value` overrides applied on top.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let base = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if overrides.is_empty() {
            return Ok(base);
        }
        let mut value = serde_json::to_value(&base)?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| config_error(o.as_str(), "override must look like key=value"))?;
            apply_override(&mut value, key.trim(), raw.trim())?;
        }
        config_from_value(value)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_episodes == 0 {
            return Err(config_error("eval_episodes", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(config_error("seeds", "at least one seed is required"));
        }
        if self.num_v2i == 0 {
            return Err(config_error("num_v2i", "must be positive"));
        }
        if self.num_v2v == 0 {
            return Err(config_error("num_v2v", "must be positive"));
        }
        if !(self.payload_bytes > 0.0 && self.payload_bytes.is_finite()) {
            return Err(config_error("payload_bytes", "must be positive"));
        }
        self.train.validate()?;
        self.meta.validate()?;
        for (i, v) in self.sweep.values.iter().enumerate() {
            let ok = match self.sweep.axis {
                SweepAxis::Vehicles => *v >= 1.0 && v.fract() == 0.0,
                SweepAxis::Payload => *v > 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(config_error(format!("sweep.values[{i}]"), format!("{v} is not valid for this axis")));
            }
        }
        Ok(())
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::preset(self.scenario, self.num_v2i, self.num_v2v);
        cfg.payload_bytes = self.payload_bytes;
        cfg
    }

    /// SHA-256 of the canonical JSON encoding, output directory excluded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut value = serde_json::to_value(self).expect("config serializes");
        value["out_dir"] = Value::Null;
        let bytes = serde_json::to_vec(&value).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
