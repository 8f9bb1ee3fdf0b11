//! Experiment configuration: a sectioned TOML file whose every key can be
//! overridden individually, plus a hash identifying the experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::auditor::{Architecture, TrainConfig, DEFAULT_THRESHOLD};
use crate::embeddings::{Aggregation, EmbeddingForm};
use crate::error::{Error, Result};
use crate::evaluation::{EvalSettings, Protocol, DEFAULT_ABLATION_REPEATS, DEFAULT_ABLATION_SIZES};
use crate::synthworld::SuiteParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    pub protocol: Protocol,
    pub encoder_id: String,
    pub aggregation: Aggregation,
    /// Checked against the embedding form when set.
    pub architecture: Option<Architecture>,
    pub threshold: f64,
    /// Generator left out when training a single auditor; none when empty.
    pub holdout: String,
    /// Concurrent protocol cells. Does not affect results.
    pub jobs: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed: 0,
            protocol: Protocol::LeaveOneOut,
            encoder_id: crate::synthworld::SIM_ENCODER_ID.to_string(),
            aggregation: Aggregation::Identity,
            architecture: None,
            threshold: DEFAULT_THRESHOLD,
            holdout: String::new(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// An embedding store, or a directory of stores.
    pub data: PathBuf,
    pub output: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            data: PathBuf::from("data"),
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub weight_decay: f64,
    pub standardize: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            lr: t.lr,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            min_delta: t.min_delta,
            weight_decay: t.weight_decay,
            standardize: t.standardize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    /// Held-out generator; the first generator id when empty.
    pub target: String,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            sizes: DEFAULT_ABLATION_SIZES.to_vec(),
            repeats: DEFAULT_ABLATION_REPEATS,
            target: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    Vector,
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Member pairs per generator; non-member pairs match.
    pub pairs: usize,
    pub form: FormKind,
    pub dim: usize,
    pub rows: usize,
    pub cols: usize,
    pub semantic_dim: usize,
    pub member_noise: f64,
    pub alignment_gap: f64,
    pub style_scale: f64,
    pub short_regime: bool,
}

impl Default for SynthSection {
    fn default() -> Self {
        let p = SuiteParams::default();
        let dim = p.form.len();
        SynthSection {
            pairs: p.n_member,
            form: FormKind::Vector,
            dim,
            rows: 4,
            cols: 8,
            semantic_dim: p.semantic_dim,
            member_noise: p.member_noise,
            alignment_gap: p.alignment_gap,
            style_scale: p.style_scale,
            short_regime: p.with_short_regime,
        }
    }
}

impl SynthSection {
    pub fn form(&self) -> EmbeddingForm {
        match self.form {
            FormKind::Vector => EmbeddingForm::Vector { dim: self.dim },
            FormKind::Map => EmbeddingForm::Map {
                rows: self.rows,
                cols: self.cols,
            },
        }
    }

    pub fn suite_params(&self) -> SuiteParams {
        SuiteParams {
            n_member: self.pairs,
            n_nonmember: self.pairs,
            form: self.form(),
            semantic_dim: self.semantic_dim,
            member_noise: self.member_noise,
            alignment_gap: self.alignment_gap,
            style_scale: self.style_scale,
            with_short_regime: self.short_regime,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub paths: PathsSection,
    pub train: TrainSection,
    pub ablation: AblationSection,
    pub synth: SynthSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {}", e.message())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Every overridable key as `section.key`.
    pub fn keys() -> Vec<String> {
        let table = toml::Value::try_from(ExperimentConfig::default()).expect("config is a table");
        let mut keys = Vec::new();
        for (section, body) in table.as_table().expect("table") {
            for key in body.as_table().expect("sections are tables").keys() {
                keys.push(format!("{section}.{key}"));
            }
        }
        // optional keys left out of the serialized default
        keys.push("experiment.architecture".into());
        keys.sort();
        keys
    }

    /// Resolve `key` (either `section.key` or a bare key that is unique
    /// across sections, with `-` accepted for `_`) to `section.key`.
    pub fn resolve_key(key: &str) -> Result<String> {
        let key = key.replace('-', "_");
        let keys = Self::keys();
        if keys.contains(&key) {
            return Ok(key);
        }
        let matches: Vec<&String> = keys
            .iter()
            .filter(|k| k.rsplit('.').next() == Some(key.as_str()))
            .collect();
        match matches.as_slice() {
            [one] => Ok((*one).clone()),
            [] => Err(Error::Validation(format!("unknown config key '{key}'"))),
            many => Err(Error::Validation(format!(
                "config key '{key}' is ambiguous: {many:?}"
            ))),
        }
    }

    /// Set one key from its text form. The value is read as a TOML literal
    /// and falls back to a plain string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let full = Self::resolve_key(key)?;
        let (section, name) = full.split_once('.').expect("resolved keys are dotted");
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut table = toml::Value::try_from(&*self).expect("config is a table");
        table
            .as_table_mut()
            .and_then(|t| t.get_mut(section))
            .and_then(toml::Value::as_table_mut)
            .expect("resolved section exists")
            .insert(name.to_string(), parsed);
        *self = table.try_into().map_err(|e: toml::de::Error| {
            Error::Validation(format!("invalid value '{value}' for {full}: {}", e.message()))
        })?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            lr: t.lr,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            min_delta: t.min_delta,
            weight_decay: t.weight_decay,
            seed: self.experiment.seed,
            standardize: t.standardize,
        }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            train: self.train_config(),
            threshold: self.experiment.threshold,
            jobs: self.experiment.jobs,
        }
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        let th = self.experiment.threshold;
        if !(th > 0.0 && th < 1.0) {
            return Err(Error::Validation(format!("threshold must lie in (0, 1), got {th}")));
        }
        if self.experiment.jobs == 0 {
            return Err(Error::Validation("jobs must be at least 1".into()));
        }
        let a = &self.ablation;
        if a.repeats == 0 || a.sizes.is_empty() || a.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "ablation needs repeats >= 1 and strictly ascending sizes, got {} and {:?}",
                a.repeats, a.sizes
            )));
        }
        if self.synth.pairs == 0 {
            return Err(Error::Validation("synth.pairs must be at least 1".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form with paths and job count
    /// cleared, so relocating data or changing parallelism keeps the hash.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.paths = PathsSection {
            data: PathBuf::new(),
            output: PathBuf::new(),
        };
        c.experiment.jobs = 0;
        let bytes = serde_json::to_vec(&c).expect("config serializes to JSON");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::default();
        c.experiment.architecture = Some(Architecture::Cnn);
        c.synth.form = FormKind::Map;
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn sections_parse() {
        let c = ExperimentConfig::from_toml(
            "[experiment]\nseed = 9\nprotocol = \"transfer\"\n[train]\nlr = 0.01\n[ablation]\nsizes = [5, 50]\n",
        )
        .unwrap();
        assert_eq!(c.experiment.seed, 9);
        assert_eq!(c.experiment.protocol, Protocol::Transfer);
        assert_eq!(c.train.lr, 0.01);
        assert_eq!(c.ablation.sizes, vec![5, 50]);
        assert!(ExperimentConfig::from_toml("[train]\nlearning_rate = 1\n").is_err());
    }

    #[test]
    fn overrides_by_bare_or_dotted_key() {
        let mut c = ExperimentConfig::default();
        c.set("lr", "0.5").unwrap();
        c.set("train.batch-size", "8").unwrap();
        c.set("protocol", "ablation").unwrap();
        c.set("sizes", "[1, 2, 3]").unwrap();
        c.set("output", "/tmp/x y").unwrap();
        c.set("architecture", "mlp").unwrap();
        assert_eq!(c.train.lr, 0.5);
        assert_eq!(c.train.batch_size, 8);
        assert_eq!(c.experiment.protocol, Protocol::Ablation);
        assert_eq!(c.ablation.sizes, vec![1, 2, 3]);
        assert_eq!(c.paths.output, PathBuf::from("/tmp/x y"));
        assert_eq!(c.experiment.architecture, Some(Architecture::Mlp));
        assert!(c.set("nonsense", "1").is_err());
        assert!(c.set("batch_size", "many").is_err());
    }

    #[test]
    fn every_key_is_reachable() {
        for key in ExperimentConfig::keys() {
            let bare = key.rsplit('.').next().unwrap();
            assert_eq!(ExperimentConfig::resolve_key(bare).unwrap(), key);
        }
    }

    #[test]
    fn hash_ignores_paths_and_jobs() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.paths.output = "elsewhere".into();
        b.experiment.jobs = 8;
        assert_eq!(a.config_hash(), b.config_hash());
        b.experiment.seed = 1;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let mut c = ExperimentConfig::default();
        c.experiment.threshold = 1.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.ablation.sizes = vec![10, 10];
        assert!(c.validate().is_err());
    }
}
