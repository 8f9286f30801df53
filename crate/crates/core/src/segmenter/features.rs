//! Log-linear autoregressive segmentation model.
//!
//! The probability of a boundary before token `t` is a logistic function of
//! hashed features of the tokens within `context_radius` of `t` and of the
//! previous `history` decisions:
//!
//! ```text
//! p(y_t = SPLIT | y_<t, x) = sigmoid(sum_f w[f])
//! p(y | x) = prod_{t >= 1} p(y_t | y_<t, x)
//! ```
//!
//! Position 0 is always a boundary and carries no score.
//!
//! Token features: word identity and character n-grams (with `^`/`$`
//! boundary marks) at every offset in `-radius..=radius`, the word pair
//! around the boundary, and a padding marker for offsets outside the window.
//! History features: each of the last `history` decisions, their joint
//! pattern, and the (capped) distance since the last boundary.

use std::fs::File;
use std::hash::Hasher;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use twox_hash::XxHash64;

use crate::transcript::{Decision, SegmentationLabels, Transcript};
use crate::window::{plan_windows, WindowConfig};

pub const MODEL_MAGIC: &[u8; 8] = b"LSEGMODL";
pub const MODEL_VERSION: u32 = 1;

const DISTANCE_CAP: usize = 32;

const KIND_BIAS: u8 = 0;
const KIND_WORD: u8 = 1;
const KIND_NGRAM: u8 = 2;
const KIND_PAD: u8 = 3;
const KIND_PREV: u8 = 4;
const KIND_PATTERN: u8 = 5;
const KIND_DISTANCE: u8 = 6;
const KIND_PAIR: u8 = 7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub hash_dims: usize,
    pub ngram_orders: Vec<usize>,
    pub context_radius: usize,
    pub history: usize,
    /// Seed for the feature hash.
    pub salt: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            hash_dims: 1 << 20,
            ngram_orders: vec![2, 3, 4],
            context_radius: 5,
            history: 4,
            salt: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("document {source_id:?}: {labels} labels for {tokens} tokens")]
    Misaligned {
        source_id: String,
        tokens: usize,
        labels: usize,
    },
    #[error("non-finite loss in epoch {epoch} at example {example} (document {source_id:?}, position {position}): logit {logit}")]
    NonFinite {
        epoch: usize,
        example: usize,
        source_id: String,
        position: usize,
        logit: f64,
    },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step_size: f64,
    pub seed: u64,
    /// 1 for plain SGD; larger batches average gradients computed in
    /// parallel and apply them in a fixed order.
    pub batch_size: usize,
    /// Train on windows planned with this config instead of whole documents.
    pub windows: Option<WindowConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            step_size: 0.1,
            seed: 0,
            batch_size: 1,
            windows: Some(WindowConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-token negative log-likelihood over each epoch, measured
    /// before each update.
    pub epoch_losses: Vec<f64>,
    pub examples: usize,
}

/// Per-step features that only depend on the window tokens.
#[derive(Debug, Clone)]
pub struct TokenFeatures(Vec<Vec<usize>>);

impl TokenFeatures {
    pub fn at(&self, t: usize) -> &[usize] {
        &self.0[t]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    config: FeatureConfig,
    weights: Vec<f64>,
}

pub(crate) fn ln_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl FeatureModel {
    /// A zero-weight model: every step is 50/50.
    pub fn new(config: FeatureConfig) -> Result<Self, TrainError> {
        if config.hash_dims == 0 {
            return Err(TrainError::InvalidConfig("hash_dims must be at least 1".into()));
        }
        if config.ngram_orders.contains(&0) {
            return Err(TrainError::InvalidConfig("n-gram orders must be at least 1".into()));
        }
        Ok(Self {
            weights: vec![0.0; config.hash_dims],
            config,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn hasher(&self, kind: u8) -> XxHash64 {
        let mut h = XxHash64::with_seed(self.config.salt);
        h.write_u8(kind);
        h
    }

    fn bucket(&self, h: XxHash64) -> usize {
        (h.finish() % self.config.hash_dims as u64) as usize
    }

    /// Token features for every position of a window.
    pub fn token_features(&self, tokens: &[String]) -> TokenFeatures {
        TokenFeatures((0..tokens.len()).map(|t| self.token_features_at(tokens, t)).collect())
    }

    fn token_features_at(&self, tokens: &[String], t: usize) -> Vec<usize> {
        let r = self.config.context_radius as i64;
        let mut out = Vec::with_capacity(64);
        out.push(self.bucket(self.hasher(KIND_BIAS)));
        let mut marked = String::new();
        for d in -r..=r {
            let pos = t as i64 + d;
            let Some(word) = (pos >= 0).then(|| tokens.get(pos as usize)).flatten() else {
                let mut h = self.hasher(KIND_PAD);
                h.write_i64(d);
                out.push(self.bucket(h));
                continue;
            };
            let mut h = self.hasher(KIND_WORD);
            h.write_i64(d);
            h.write(word.as_bytes());
            out.push(self.bucket(h));

            marked.clear();
            marked.push('^');
            marked.push_str(word);
            marked.push('$');
            let chars: Vec<(usize, char)> = marked.char_indices().collect();
            for &order in &self.config.ngram_orders {
                if order > chars.len() {
                    continue;
                }
                for i in 0..=(chars.len() - order) {
                    let from = chars[i].0;
                    let to = chars.get(i + order).map_or(marked.len(), |c| c.0);
                    let mut h = self.hasher(KIND_NGRAM);
                    h.write_i64(d);
                    h.write_u8(order as u8);
                    h.write(marked[from..to].as_bytes());
                    out.push(self.bucket(h));
                }
            }
        }
        if t > 0 && r > 0 {
            let mut h = self.hasher(KIND_PAIR);
            h.write(tokens[t - 1].as_bytes());
            h.write_u8(0xff);
            h.write(tokens[t].as_bytes());
            out.push(self.bucket(h));
        }
        out
    }

    /// History features for the decision at `t` given `prefix[..t]`.
    pub fn history_features(&self, t: usize, prefix: &[Decision]) -> Vec<usize> {
        let c = self.config.history;
        if c == 0 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(c + 2);
        let mut pattern = self.hasher(KIND_PATTERN);
        for k in 1..=c {
            let code = if k <= t { prefix[t - k] as u8 } else { 2 };
            let mut h = self.hasher(KIND_PREV);
            h.write_u8(k as u8);
            h.write_u8(code);
            out.push(self.bucket(h));
            pattern.write_u8(code);
        }
        out.push(self.bucket(pattern));
        let distance = prefix[..t]
            .iter()
            .rev()
            .position(|d| d.is_split())
            .map_or(DISTANCE_CAP, |p| (p + 1).min(DISTANCE_CAP));
        let mut h = self.hasher(KIND_DISTANCE);
        h.write_u8(distance as u8);
        out.push(self.bucket(h));
        out
    }

    fn logit(&self, token_feats: &[usize], history_feats: &[usize]) -> f64 {
        token_feats
            .iter()
            .chain(history_feats)
            .map(|&f| self.weights[f])
            .sum()
    }

    /// `[ln p(SPLIT), ln p(CONTINUE)]` for position `t` of `tokens`, given
    /// the decisions `prefix[..t]`.
    pub fn score_step(&self, tokens: &[String], t: usize, prefix: &[Decision]) -> [f64; 2] {
        let z = self.logit(&self.token_features_at(tokens, t), &self.history_features(t, prefix));
        [ln_sigmoid(z), ln_sigmoid(-z)]
    }

    /// Same as [`score_step`](Self::score_step) with precomputed token features.
    pub fn score_step_cached(&self, feats: &TokenFeatures, t: usize, prefix: &[Decision]) -> [f64; 2] {
        let z = self.logit(feats.at(t), &self.history_features(t, prefix));
        [ln_sigmoid(z), ln_sigmoid(-z)]
    }

    /// `ln p(labels | tokens)`, summed over positions `1..n`.
    pub fn log_likelihood(&self, tokens: &[String], labels: &SegmentationLabels) -> f64 {
        let feats = self.token_features(tokens);
        let d = labels.decisions();
        (1..d.len())
            .map(|t| {
                let s = self.score_step_cached(&feats, t, d);
                if d[t].is_split() {
                    s[0]
                } else {
                    s[1]
                }
            })
            .sum()
    }

    /// Mean per-token negative log-likelihood over whole documents
    /// (positions `1..n`, teacher-forced).
    pub fn average_nll(&self, corpus: &[(Transcript, SegmentationLabels)]) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (t, l) in corpus {
            total -= self.log_likelihood(t.tokens(), l);
            count += l.len().saturating_sub(1);
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    /// Gradient of [`average_nll`](Self::average_nll) with respect to every weight.
    pub fn nll_gradient(&self, corpus: &[(Transcript, SegmentationLabels)]) -> Vec<f64> {
        let mut grad = vec![0.0; self.weights.len()];
        let mut count = 0usize;
        for (t, l) in corpus {
            let feats = self.token_features(t.tokens());
            let d = l.decisions();
            for pos in 1..d.len() {
                let hist = self.history_features(pos, d);
                let z = self.logit(feats.at(pos), &hist);
                let g = sigmoid(z) - if d[pos].is_split() { 1.0 } else { 0.0 };
                for &f in feats.at(pos).iter().chain(&hist) {
                    grad[f] += g;
                }
                count += 1;
            }
        }
        if count > 0 {
            grad.iter_mut().for_each(|g| *g /= count as f64);
        }
        grad
    }

    /// Trains a fresh model.
    pub fn train(
        corpus: &[(Transcript, SegmentationLabels)],
        features: FeatureConfig,
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainReport), TrainError> {
        Self::new(features)?.fine_tune(corpus, cfg)
    }

    /// Continues training from the current weights.
    pub fn fine_tune(
        mut self,
        corpus: &[(Transcript, SegmentationLabels)],
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainReport), TrainError> {
        if corpus.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        for (t, l) in corpus {
            if t.len() != l.len() {
                return Err(TrainError::Misaligned {
                    source_id: t.source_id().to_string(),
                    tokens: t.len(),
                    labels: l.len(),
                });
            }
        }
        let units = training_units(corpus, cfg.windows.as_ref())?;
        let unit_feats: Vec<TokenFeatures> = units.par_iter().map(|u| self.token_features(&u.tokens)).collect();
        let mut index: Vec<(usize, usize)> = units
            .iter()
            .enumerate()
            .flat_map(|(u, unit)| (1..unit.decisions.len()).map(move |t| (u, t)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let batch = cfg.batch_size.max(1);
        let mut report = TrainReport {
            epoch_losses: Vec::with_capacity(cfg.epochs),
            examples: index.len(),
        };
        for epoch in 1..=cfg.epochs {
            index.shuffle(&mut rng);
            let step = cfg.step_size / (epoch as f64).sqrt();
            let mut epoch_loss = 0.0;
            for (b, chunk) in index.chunks(batch).enumerate() {
                let computed: Vec<(f64, f64, Vec<usize>)> = if batch == 1 {
                    chunk.iter().map(|&(u, t)| self.example_gradient(&units[u], &unit_feats[u], t)).collect()
                } else {
                    chunk
                        .par_iter()
                        .map(|&(u, t)| self.example_gradient(&units[u], &unit_feats[u], t))
                        .collect()
                };
                for (k, (z, _, _)) in computed.iter().enumerate() {
                    let (u, t) = chunk[k];
                    if !z.is_finite() {
                        return Err(TrainError::NonFinite {
                            epoch,
                            example: b * batch + k,
                            source_id: units[u].source_id.clone(),
                            position: t,
                            logit: *z,
                        });
                    }
                }
                let scale = step / chunk.len() as f64;
                for (k, (z, g, feats)) in computed.into_iter().enumerate() {
                    let (u, t) = chunk[k];
                    epoch_loss -= if units[u].decisions[t].is_split() {
                        ln_sigmoid(z)
                    } else {
                        ln_sigmoid(-z)
                    };
                    for f in feats {
                        self.weights[f] -= scale * g;
                    }
                }
            }
            let mean = epoch_loss / index.len().max(1) as f64;
            log::info!("epoch {epoch}: mean nll {mean:.6}");
            report.epoch_losses.push(mean);
        }
        Ok((self, report))
    }

    /// (logit, dLoss/dlogit, features) for one teacher-forced example.
    fn example_gradient(&self, unit: &TrainingUnit, feats: &TokenFeatures, t: usize) -> (f64, f64, Vec<usize>) {
        let hist = self.history_features(t, &unit.decisions);
        let z = self.logit(feats.at(t), &hist);
        let g = sigmoid(z) - if unit.decisions[t].is_split() { 1.0 } else { 0.0 };
        let mut all = feats.at(t).to_vec();
        all.extend(hist);
        (z, g, all)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    /// Header (magic, version, hash_dims, salt, orders, radius, history)
    /// followed by the non-zero weights as `(id: u64, weight: f64)` pairs.
    /// Little-endian throughout.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), ModelFileError> {
        w.write_all(MODEL_MAGIC)?;
        w.write_u32::<LittleEndian>(MODEL_VERSION)?;
        w.write_u64::<LittleEndian>(self.config.hash_dims as u64)?;
        w.write_u64::<LittleEndian>(self.config.salt)?;
        w.write_u32::<LittleEndian>(self.config.ngram_orders.len() as u32)?;
        for &o in &self.config.ngram_orders {
            w.write_u32::<LittleEndian>(o as u32)?;
        }
        w.write_u32::<LittleEndian>(self.config.context_radius as u32)?;
        w.write_u32::<LittleEndian>(self.config.history as u32)?;
        let nonzero: Vec<(usize, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        w.write_u64::<LittleEndian>(nonzero.len() as u64)?;
        for (id, v) in nonzero {
            w.write_u64::<LittleEndian>(id as u64)?;
            w.write_f64::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, ModelFileError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(ModelFileError::BadMagic);
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != MODEL_VERSION {
            return Err(ModelFileError::UnsupportedVersion(version));
        }
        let hash_dims = r.read_u64::<LittleEndian>()? as usize;
        if hash_dims == 0 || hash_dims > 1 << 32 {
            return Err(ModelFileError::Corrupt(format!("hash_dims {hash_dims}")));
        }
        let salt = r.read_u64::<LittleEndian>()?;
        let n_orders = r.read_u32::<LittleEndian>()?;
        if n_orders > 64 {
            return Err(ModelFileError::Corrupt(format!("{n_orders} n-gram orders")));
        }
        let ngram_orders = (0..n_orders)
            .map(|_| r.read_u32::<LittleEndian>().map(|o| o as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let context_radius = r.read_u32::<LittleEndian>()? as usize;
        let history = r.read_u32::<LittleEndian>()? as usize;
        let config = FeatureConfig {
            hash_dims,
            ngram_orders,
            context_radius,
            history,
            salt,
        };
        let mut model = Self::new(config).map_err(|e| ModelFileError::Corrupt(e.to_string()))?;
        let count = r.read_u64::<LittleEndian>()?;
        for _ in 0..count {
            let id = r.read_u64::<LittleEndian>()? as usize;
            let v = r.read_f64::<LittleEndian>()?;
            if id >= hash_dims || !v.is_finite() {
                return Err(ModelFileError::Corrupt(format!("weight entry ({id}, {v})")));
            }
            model.weights[id] = v;
        }
        Ok(model)
    }
}

struct TrainingUnit {
    source_id: String,
    tokens: Vec<String>,
    decisions: Vec<Decision>,
}

fn training_units(
    corpus: &[(Transcript, SegmentationLabels)],
    windows: Option<&WindowConfig>,
) -> Result<Vec<TrainingUnit>, TrainError> {
    let mut units = Vec::new();
    for (t, l) in corpus {
        match windows {
            None => units.push(TrainingUnit {
                source_id: t.source_id().to_string(),
                tokens: t.tokens().to_vec(),
                decisions: l.decisions().to_vec(),
            }),
            Some(cfg) => {
                let plan = plan_windows(t.len(), cfg).map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
                for w in plan {
                    let mut decisions = l.decisions()[w.range()].to_vec();
                    decisions[0] = Decision::Split;
                    units.push(TrainingUnit {
                        source_id: t.source_id().to_string(),
                        tokens: t.tokens()[w.range()].to_vec(),
                        decisions,
                    });
                }
            }
        }
    }
    Ok(units)
}
