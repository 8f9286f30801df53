//! N-best reranking: a second scorer picks among a generator's hypotheses.

use std::sync::Arc;

use crate::transcript::SegmentationLabels;

use super::features::FeatureModel;
use super::{NBestList, SegmentError, WindowSegmenter, WindowView};

/// Assigns a total score to a complete labeling of a window. Higher is better.
pub trait Reranker: Send + Sync {
    fn score(&self, window: &WindowView<'_>, labels: &SegmentationLabels) -> Result<f64, SegmentError>;
}

impl<R: Reranker + ?Sized> Reranker for Arc<R> {
    fn score(&self, window: &WindowView<'_>, labels: &SegmentationLabels) -> Result<f64, SegmentError> {
        (**self).score(window, labels)
    }
}

/// Sequence log-likelihood under a (usually independently trained) model.
#[derive(Debug, Clone)]
pub struct ModelReranker {
    model: Arc<FeatureModel>,
}

impl ModelReranker {
    pub fn new(model: Arc<FeatureModel>) -> Self {
        Self { model }
    }
}

impl Reranker for ModelReranker {
    fn score(&self, window: &WindowView<'_>, labels: &SegmentationLabels) -> Result<f64, SegmentError> {
        Ok(self.model.log_likelihood(window.tokens, labels))
    }
}

/// Scores by agreement with a reference segmenter: minus the number of
/// positions where the labels differ from its output. Used to rerank with
/// an external endpoint.
pub struct AgreementReranker<S> {
    reference: S,
}

impl<S: WindowSegmenter> AgreementReranker<S> {
    pub fn new(reference: S) -> Self {
        Self { reference }
    }
}

impl<S: WindowSegmenter> Reranker for AgreementReranker<S> {
    fn score(&self, window: &WindowView<'_>, labels: &SegmentationLabels) -> Result<f64, SegmentError> {
        let target = self.reference.segment(window)?;
        let diff = target
            .decisions()
            .iter()
            .zip(labels.decisions())
            .filter(|(a, b)| a != b)
            .count();
        Ok(-(diff as f64))
    }
}

/// The entry with the highest reranker score, with its index and score.
/// Ties go to the better original rank.
pub fn rerank_scored<R: Reranker + ?Sized>(
    window: &WindowView<'_>,
    nbest: &NBestList,
    reranker: &R,
) -> Result<(usize, SegmentationLabels, f64), SegmentError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (labels, _)) in nbest.entries().iter().enumerate() {
        let s = reranker.score(window, labels)?;
        if s.is_nan() {
            return Err(SegmentError::Reranker(format!("NaN score for entry {i}")));
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    let (i, s) = best.ok_or(SegmentError::EmptyNBest)?;
    Ok((i, nbest.entries()[i].0.clone(), s))
}

pub fn rerank<R: Reranker + ?Sized>(
    window: &WindowView<'_>,
    nbest: &NBestList,
    reranker: &R,
) -> Result<SegmentationLabels, SegmentError> {
    rerank_scored(window, nbest, reranker).map(|(_, l, _)| l)
}

/// Generates `k`-best lists with one segmenter and reranks them with another scorer.
pub struct RerankingSegmenter<G, R> {
    generator: G,
    reranker: R,
    k: usize,
}

impl<G: WindowSegmenter, R: Reranker> RerankingSegmenter<G, R> {
    pub fn new(generator: G, reranker: R, k: usize) -> Result<Self, SegmentError> {
        if k == 0 {
            return Err(SegmentError::InvalidParameter("n-best size must be at least 1".into()));
        }
        Ok(Self { generator, reranker, k })
    }
}

impl<G: WindowSegmenter, R: Reranker> WindowSegmenter for RerankingSegmenter<G, R> {
    fn segment(&self, window: &WindowView<'_>) -> Result<SegmentationLabels, SegmentError> {
        if window.is_empty() {
            return Ok(SegmentationLabels::single_segment(0));
        }
        let list = self.generator.nbest(window, self.k)?;
        rerank(window, &list, &self.reranker)
    }

    fn name(&self) -> &str {
        "rerank"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct SplitLover;

    impl Reranker for SplitLover {
        fn score(&self, _: &WindowView<'_>, labels: &SegmentationLabels) -> Result<f64, SegmentError> {
            Ok(labels.split_count() as f64)
        }
    }

    struct Constant;

    impl Reranker for Constant {
        fn score(&self, _: &WindowView<'_>, _: &SegmentationLabels) -> Result<f64, SegmentError> {
            Ok(1.0)
        }
    }

    fn list() -> NBestList {
        NBestList::new(
            "g",
            vec![
                (SegmentationLabels::from_splits(4, &[]).unwrap(), -0.5),
                (SegmentationLabels::from_splits(4, &[1, 3]).unwrap(), -0.9),
            ],
        )
        .unwrap()
    }

    #[test]
    fn prefers_higher_score_and_breaks_ties_by_rank() {
        let toks: Vec<String> = "a b c d".split(' ').map(String::from).collect();
        let w = WindowView::whole(&toks);
        assert_eq!(rerank(&w, &list(), &SplitLover).unwrap().split_positions(), vec![0, 1, 3]);
        assert_eq!(rerank(&w, &list(), &Constant).unwrap().split_positions(), vec![0]);
        let empty = NBestList::new("g", vec![]).unwrap();
        assert!(matches!(rerank(&w, &empty, &Constant), Err(SegmentError::EmptyNBest)));
    }
}
