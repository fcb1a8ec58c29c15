//! Engine configuration: every tunable in one TOML-serializable struct, named
//! presets, validation and a provenance digest.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain_builder::PipelineConfig;
use crate::corpus::Tokenizer;
use crate::error::{Error, Result};
use crate::io;
use crate::lexical_index::Bm25Params;
use crate::reencoder::TrainConfig;
use crate::reranker::DatasetConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable naming the default config file for the CLI.
pub const CONFIG_ENV: &str = "HOPCHAIN_CONFIG";

/// Derives the seed for one stochastic stage from the run seed: the first
/// eight bytes (little endian) of SHA-256 over the run seed's little-endian
/// bytes followed by the stage name.
pub fn derive_seed(seed: i64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub questions: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fact_embeddings: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_embeddings: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reencoder: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl Paths {
    fn entries(&self) -> [(&'static str, &Option<String>); 9] {
        [
            ("corpus", &self.corpus),
            ("questions", &self.questions),
            ("stopwords", &self.stopwords),
            ("index", &self.index),
            ("fact_embeddings", &self.fact_embeddings),
            ("query_embeddings", &self.query_embeddings),
            ("reencoder", &self.reencoder),
            ("scores", &self.scores),
            ("output_dir", &self.output_dir),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    /// Plural stemming before overlap tests and indexing.
    pub stem: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub version: u32,
    /// Run seed; stage seeds derive from it with [`derive_seed`].
    pub seed: i64,
    pub paths: Paths,
    pub tokenizer: TokenizerConfig,
    pub bm25: Bm25Params,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    pub dataset: DatasetConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            version: CONFIG_VERSION,
            seed: 0,
            paths: Paths::default(),
            tokenizer: TokenizerConfig::default(),
            bm25: Bm25Params::default(),
            pipeline: PipelineConfig::default(),
            train: TrainConfig::default(),
            dataset: DatasetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Violation {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    EqascBaseline,
    Expanded,
    Semantic,
    Hybrid,
}

impl Preset {
    pub const NAMES: [&'static str; 4] = ["eqasc_baseline", "expanded", "semantic", "hybrid"];

    pub fn name(self) -> &'static str {
        match self {
            Preset::EqascBaseline => "eqasc_baseline",
            Preset::Expanded => "expanded",
            Preset::Semantic => "semantic",
            Preset::Hybrid => "hybrid",
        }
    }

    pub fn config(self) -> EngineConfig {
        let mut cfg = EngineConfig::default();
        let p = &mut cfg.pipeline;
        match self {
            Preset::EqascBaseline => {
                (p.n_first, p.m_second, p.k_chains) = (20, 4, 10);
            }
            Preset::Expanded => {
                (p.n_first, p.m_second, p.k_chains) = (200, 200, 200);
            }
            Preset::Semantic => {
                (p.semantic_n, p.semantic_m, p.k_chains) = (5, 2, 10);
            }
            Preset::Hybrid => {
                (p.n_first, p.m_second, p.k_chains) = (200, 200, 200);
                (p.semantic_n, p.semantic_m) = (5, 2);
                p.merge_fraction = 0.25;
            }
        }
        cfg
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eqasc_baseline" => Ok(Preset::EqascBaseline),
            "expanded" => Ok(Preset::Expanded),
            "semantic" => Ok(Preset::Semantic),
            "hybrid" => Ok(Preset::Hybrid),
            _ => Err(Error::UnknownPreset {
                name: s.to_string(),
                valid: Preset::NAMES.to_vec(),
            }),
        }
    }
}

pub fn presets(name: &str) -> Result<EngineConfig> {
    Ok(name.parse::<Preset>()?.config())
}

impl EngineConfig {
    /// Every violated bound, each naming its field. Empty iff valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.version != CONFIG_VERSION {
            v.push(Violation::new(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        if !(self.bm25.k1.is_finite() && self.bm25.k1 >= 0.0) {
            v.push(Violation::new(
                "bm25.k1",
                format!("must be finite and >= 0, got {}", self.bm25.k1),
            ));
        }
        if !(0.0..=1.0).contains(&self.bm25.b) {
            v.push(Violation::new(
                "bm25.b",
                format!("must be in [0, 1], got {}", self.bm25.b),
            ));
        }
        let p = &self.pipeline;
        for (field, value) in [
            ("pipeline.n_first", p.n_first),
            ("pipeline.m_second", p.m_second),
            ("pipeline.k_chains", p.k_chains),
            ("pipeline.semantic_n", p.semantic_n),
            ("pipeline.semantic_m", p.semantic_m),
            ("train.epochs", self.train.epochs),
            ("train.batch_size", self.train.batch_size),
            ("dataset.negatives_per_positive", self.dataset.negatives_per_positive),
        ] {
            if value < 1 {
                v.push(Violation::new(field, "must be at least 1"));
            }
        }
        if !(0.0..=1.0).contains(&p.merge_fraction) {
            v.push(Violation::new(
                "pipeline.merge_fraction",
                format!("must be in [0, 1], got {}", p.merge_fraction),
            ));
        }
        if !(self.train.learning_rate.is_finite() && self.train.learning_rate > 0.0) {
            v.push(Violation::new(
                "train.learning_rate",
                format!("must be finite and > 0, got {}", self.train.learning_rate),
            ));
        }
        if self.train.hidden == Some(0) {
            v.push(Violation::new("train.hidden", "must be at least 1"));
        }
        for (name, path) in self.paths.entries() {
            if path.as_deref().is_some_and(|p| p.trim().is_empty()) {
                v.push(Violation::new(&format!("paths.{name}"), "must not be empty"));
            }
        }
        v
    }

    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::parse(line, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&io::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_toml().as_bytes())
    }

    /// Hex SHA-256 of the canonical TOML form. Embedded in every output file.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn tokenizer(&self) -> Result<Tokenizer> {
        let base = match &self.paths.stopwords {
            Some(p) => Tokenizer::load_stopwords(Path::new(p))?,
            None => Tokenizer::default(),
        };
        Ok(base.with_stemming(self.tokenizer.stem))
    }

    /// Training settings with the stage seed filled in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, "reencoder.train"),
            ..self.train.clone()
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            seed: derive_seed(self.seed, "rerank.dataset"),
            ..self.dataset.clone()
        }
    }
}
