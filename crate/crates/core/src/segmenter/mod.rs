//! Window-level segmenters.
//!
//! Every segmenter maps one window of tokens to labels for that window.
//! Implementations:
//!
//! - [`FixedLength`]: boundaries at fixed global intervals.
//! - [`RulePunctuation`]: boundaries from sentence-terminal punctuation in
//!   already punctuated text.
//! - [`Autoregressive`]: a trained [`FeatureModel`] decoded under the
//!   segmentation automaton.
//! - [`ExternalClient`]: a remote generative model reached over HTTP, with
//!   strict decoding and Levenshtein projection as fallback.
//! - [`RerankingSegmenter`]: n-best lists of one segmenter rescored by a
//!   [`Reranker`].

pub mod autoregressive;
pub mod external;
pub mod features;
pub mod fixed;
pub mod rerank;
pub mod rules;

use std::ops::Range;

use thiserror::Error;

pub use autoregressive::Autoregressive;
pub use external::{EndpointConfig, ExternalClient};
pub use features::{FeatureConfig, FeatureModel, ModelFileError, TrainConfig, TrainError};
pub use fixed::FixedLength;
pub use rerank::{rerank, ModelReranker, Reranker, RerankingSegmenter};
pub use rules::RulePunctuation;

use crate::automaton::SearchError;
use crate::align::project_boundaries;
use crate::transcript::{encode_delimited, DelimitedText, Delimiter, SegmentationLabels, Transcript, TranscriptError};
use crate::window::WindowError;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("segmenter {segmenter} returned {got} labels for a window of {expected} tokens")]
    WindowLength {
        segmenter: String,
        expected: usize,
        got: usize,
    },
    #[error("endpoint failed after {attempts} attempts: {message}")]
    Endpoint { attempts: usize, message: String },
    #[error("invalid segmenter parameter: {0}")]
    InvalidParameter(String),
    #[error("n-best list is empty")]
    EmptyNBest,
    #[error("n-best list invalid: {0}")]
    InvalidNBest(String),
    #[error("reranker failed: {0}")]
    Reranker(String),
}

/// A window handed to a segmenter. Indices in `adopt` are global.
#[derive(Debug, Clone)]
pub struct WindowView<'a> {
    pub tokens: &'a [String],
    /// Global index of `tokens[0]`.
    pub start: usize,
    /// Global positions whose decisions will be kept.
    pub adopt: Range<usize>,
}

impl<'a> WindowView<'a> {
    /// A window covering a whole transcript.
    pub fn whole(tokens: &'a [String]) -> Self {
        Self {
            tokens,
            start: 0,
            adopt: 0..tokens.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn left_context(&self) -> usize {
        self.adopt.start - self.start
    }

    pub fn right_context(&self) -> usize {
        self.start + self.tokens.len() - self.adopt.end
    }
}

/// Ranked, distinct labelings with non-increasing generator scores.
#[derive(Debug, Clone, PartialEq)]
pub struct NBestList {
    entries: Vec<(SegmentationLabels, f64)>,
    generator: String,
}

impl NBestList {
    pub fn new(generator: impl Into<String>, entries: Vec<(SegmentationLabels, f64)>) -> Result<Self, SegmentError> {
        if entries.windows(2).any(|p| p[0].1 < p[1].1) {
            return Err(SegmentError::InvalidNBest("scores must be non-increasing".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !entries.iter().all(|(l, _)| seen.insert(l)) {
            return Err(SegmentError::InvalidNBest("labelings must be distinct".into()));
        }
        Ok(Self {
            entries,
            generator: generator.into(),
        })
    }

    pub fn entries(&self) -> &[(SegmentationLabels, f64)] {
        &self.entries
    }

    pub fn generator(&self) -> &str {
        &self.generator
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The top `k` entries.
    pub fn truncated(&self, k: usize) -> NBestList {
        NBestList {
            entries: self.entries[..k.min(self.entries.len())].to_vec(),
            generator: self.generator.clone(),
        }
    }
}

pub trait WindowSegmenter: Send + Sync {
    fn segment(&self, window: &WindowView<'_>) -> Result<SegmentationLabels, SegmentError>;

    /// Up to `k` ranked labelings. Segmenters without scores return their
    /// single best labeling with score 0.
    fn nbest(&self, window: &WindowView<'_>, k: usize) -> Result<NBestList, SegmentError> {
        let _ = k;
        NBestList::new(self.name(), vec![(self.segment(window)?, 0.0)])
    }

    fn name(&self) -> &str;
}

impl<S: WindowSegmenter + ?Sized> WindowSegmenter for std::sync::Arc<S> {
    fn segment(&self, window: &WindowView<'_>) -> Result<SegmentationLabels, SegmentError> {
        (**self).segment(window)
    }

    fn nbest(&self, window: &WindowView<'_>, k: usize) -> Result<NBestList, SegmentError> {
        (**self).nbest(window, k)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<S: WindowSegmenter + ?Sized> WindowSegmenter for Box<S> {
    fn segment(&self, window: &WindowView<'_>) -> Result<SegmentationLabels, SegmentError> {
        (**self).segment(window)
    }

    fn nbest(&self, window: &WindowView<'_>, k: usize) -> Result<NBestList, SegmentError> {
        (**self).nbest(window, k)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Runs a segmenter as a free generator: its output is rendered as
/// delimited text and the boundaries are recovered by Levenshtein projection
/// instead of direct decoding. For a segmenter that already reproduces its
/// input this is the identity; it exists so that both constraint modes can be
/// applied to the same decisions.
pub struct Projected<S> {
    inner: S,
    delimiter: Delimiter,
}

impl<S: WindowSegmenter> Projected<S> {
    pub fn new(inner: S, delimiter: Delimiter) -> Self {
        Self { inner, delimiter }
    }
}

impl<S: WindowSegmenter> WindowSegmenter for Projected<S> {
    fn segment(&self, window: &WindowView<'_>) -> Result<SegmentationLabels, SegmentError> {
        let reference = Transcript::with_delimiter("window", window.tokens.to_vec(), &self.delimiter)?;
        let generated = encode_delimited(&reference, &self.inner.segment(window)?)?.render(&self.delimiter);
        Ok(project_boundaries(&reference, &DelimitedText::parse_lenient(&generated, &self.delimiter)))
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nbest_validation() {
        let a = SegmentationLabels::from_splits(3, &[]).unwrap();
        let b = SegmentationLabels::from_splits(3, &[1]).unwrap();
        assert!(NBestList::new("g", vec![(a.clone(), -1.0), (b.clone(), -2.0)]).is_ok());
        assert!(NBestList::new("g", vec![(a.clone(), -2.0), (b, -1.0)]).is_err());
        assert!(NBestList::new("g", vec![(a.clone(), -1.0), (a, -1.0)]).is_err());
        assert!(NBestList::new("g", vec![]).unwrap().is_empty());
    }

    #[test]
    fn window_view_context() {
        let toks: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        let v = WindowView {
            tokens: &toks,
            start: 30,
            adopt: 32..37,
        };
        assert_eq!((v.left_context(), v.right_context()), (2, 3));
        let w = WindowView::whole(&toks);
        assert_eq!((w.left_context(), w.right_context()), (0, 0));
    }
}
