//! Declarative pipeline configuration (TOML).
//!
//! ```toml
//! seed = 0
//! workers = 0            # 0 = available parallelism
//! constraint = "fst"     # or "levenshtein"
//!
//! [window]
//! size = 40
//! left = 5
//! right = 5
//!
//! [segmenter]
//! kind = "autoregressive"
//! model = "model.bin"
//!
//! [search]
//! kind = "beam"
//! width = 4
//! ```
//!
//! Command-line flags override file values, which override defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::SearchStrategy;
use crate::segmenter::EndpointConfig;
use crate::transcript::{Delimiter, DEFAULT_DELIMITER};
use crate::window::WindowConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Decode under the segmentation automaton.
    #[default]
    Fst,
    /// Generate freely, then project boundaries by Levenshtein alignment.
    Levenshtein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SegmenterKind {
    /// Boundaries every `segment_len` tokens.
    Fixed,
    /// Boundaries from punctuation; input must be punctuated.
    Punctuate,
    /// The trained feature model.
    #[default]
    Autoregressive,
    /// A remote endpoint.
    External,
    /// Feature-model n-best lists rescored by a second scorer.
    Rerank,
    /// Boundaries replayed from a labels file.
    Labels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RerankerKind {
    /// Log-likelihood under `reranker_model`.
    #[default]
    Model,
    /// Agreement with the endpoint's segmentation.
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FallbackKind {
    #[default]
    None,
    Fixed,
    Autoregressive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmenterConfig {
    pub kind: SegmenterKind,
    pub model: Option<PathBuf>,
    pub segment_len: usize,
    pub abbreviations: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub nbest: usize,
    pub reranker: RerankerKind,
    pub reranker_model: Option<PathBuf>,
    /// Local segmenter used when the endpoint keeps failing.
    pub fallback: FallbackKind,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            kind: SegmenterKind::default(),
            model: None,
            segment_len: 17,
            abbreviations: None,
            labels: None,
            nbest: 10,
            reranker: RerankerKind::default(),
            reranker_model: None,
            fallback: FallbackKind::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 means available parallelism.
    pub workers: usize,
    pub delimiter: String,
    /// Lowercase and strip punctuation from input tokens.
    pub normalize: bool,
    pub constraint: ConstraintMode,
    /// Allow a delimiter before the first token in the automaton.
    pub leading_delimiter: bool,
    pub window: WindowConfig,
    pub segmenter: SegmenterConfig,
    pub search: SearchStrategy,
    pub endpoint: EndpointConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            delimiter: DEFAULT_DELIMITER.to_string(),
            normalize: false,
            constraint: ConstraintMode::default(),
            leading_delimiter: false,
            window: WindowConfig::default(),
            segmenter: SegmenterConfig::default(),
            search: SearchStrategy::default(),
            endpoint: EndpointConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(e),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn delimiter(&self) -> Result<Delimiter, ConfigError> {
        Delimiter::new(self.delimiter.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Checks consistency and that referenced files exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.window.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.delimiter()?;
        if let SearchStrategy::Beam(0) = self.search {
            return invalid("search beam width must be at least 1".into());
        }
        let seg = &self.segmenter;
        let require = |field: &str, p: &Option<PathBuf>| -> Result<(), ConfigError> {
            match p {
                None => Err(ConfigError::Invalid(format!(
                    "segmenter kind {:?} requires segmenter.{field}",
                    seg.kind
                ))),
                Some(p) if !p.exists() => Err(ConfigError::Invalid(format!("segmenter.{field}: {} does not exist", p.display()))),
                Some(_) => Ok(()),
            }
        };
        match seg.kind {
            SegmenterKind::Fixed => {
                if seg.segment_len == 0 {
                    return invalid("segmenter.segment_len must be at least 1".into());
                }
            }
            SegmenterKind::Punctuate => {}
            SegmenterKind::Autoregressive => require("model", &seg.model)?,
            SegmenterKind::External => {
                if self.constraint != ConstraintMode::Levenshtein {
                    return invalid("the external segmenter generates free text and requires constraint = \"levenshtein\"".into());
                }
                if self.endpoint.concurrency == 0 {
                    return invalid("endpoint.concurrency must be at least 1".into());
                }
                match seg.fallback {
                    FallbackKind::Autoregressive => require("model", &seg.model)?,
                    FallbackKind::Fixed if seg.segment_len == 0 => {
                        return invalid("segmenter.segment_len must be at least 1".into())
                    }
                    _ => {}
                }
            }
            SegmenterKind::Rerank => {
                require("model", &seg.model)?;
                if seg.nbest == 0 {
                    return invalid("segmenter.nbest must be at least 1".into());
                }
                match seg.reranker {
                    RerankerKind::Model => require("reranker_model", &seg.reranker_model)?,
                    RerankerKind::Endpoint => {
                        if self.endpoint.concurrency == 0 {
                            return invalid("endpoint.concurrency must be at least 1".into());
                        }
                    }
                }
            }
            SegmenterKind::Labels => require("labels", &seg.labels)?,
        }
        if let Some(p) = &seg.abbreviations {
            if !p.exists() {
                return invalid(format!("segmenter.abbreviations: {} does not exist", p.display()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&cfg.to_toml(), Path::new("x")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = PipelineConfig::from_toml(
            "constraint = \"levenshtein\"\n[window]\nsize = 20\n[segmenter]\nkind = \"fixed\"\nsegment_len = 4\n[search]\nkind = \"exact\"\n",
            Path::new("x"),
        )
        .unwrap();
        assert_eq!(cfg.window, WindowConfig { size: 20, left: 5, right: 5 });
        assert_eq!(cfg.segmenter.kind, SegmenterKind::Fixed);
        assert_eq!(cfg.search, SearchStrategy::Exact);
        assert_eq!(cfg.constraint, ConstraintMode::Levenshtein);
        cfg.validate().unwrap();
        let beam = PipelineConfig::from_toml("[search]\nkind = \"beam\"\nwidth = 100\n", Path::new("x")).unwrap();
        assert_eq!(beam.search, SearchStrategy::Beam(100));
    }

    #[test]
    fn validation_failures() {
        assert!(PipelineConfig::from_toml("bogus = 1", Path::new("x")).is_err());
        let mut cfg = PipelineConfig::default();
        assert!(cfg.validate().is_err(), "autoregressive without a model");
        cfg.segmenter.kind = SegmenterKind::External;
        assert!(cfg.validate().is_err(), "external needs levenshtein");
        cfg.constraint = ConstraintMode::Levenshtein;
        cfg.validate().unwrap();
        cfg.window.left = 40;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.segmenter.kind = SegmenterKind::Fixed;
        cfg.segmenter.abbreviations = Some("/nonexistent/abbrev.txt".into());
        assert!(cfg.validate().is_err());
    }
}
