//! The feature model decoded under the segmentation automaton.
//!
//! A delimiter arc before token `t` carries `ln p(SPLIT at t)`, the plain
//! token arc carries `ln p(CONTINUE at t)`, and the forced arcs (token 0, and
//! the token after a delimiter) carry 0, so a path score is exactly the
//! sequence log-likelihood of its labels.

use std::collections::HashSet;
use std::sync::Arc;

use crate::automaton::{constrained_search, SearchError, SearchStrategy, SegAutomaton, Symbol, SymbolScorer};
use crate::transcript::{Decision, SegmentationLabels};

use super::features::{FeatureModel, TokenFeatures};
use super::{NBestList, SegmentError, WindowSegmenter, WindowView};

/// [`SymbolScorer`] view of a [`FeatureModel`] over one window.
pub struct FeatureScorer<'m> {
    model: &'m FeatureModel,
    features: TokenFeatures,
}

impl<'m> FeatureScorer<'m> {
    pub fn new(model: &'m FeatureModel, tokens: &[String]) -> Self {
        Self {
            model,
            features: model.token_features(tokens),
        }
    }
}

/// Decisions implied by an emitted symbol prefix, one per consumed token.
fn decisions_of(emitted: &[Symbol]) -> Vec<Decision> {
    let mut out = Vec::with_capacity(emitted.len());
    let mut pending = false;
    for s in emitted {
        match s {
            Symbol::Delimiter => pending = true,
            Symbol::Token(_) => {
                out.push(if pending || out.is_empty() {
                    Decision::Split
                } else {
                    Decision::Continue
                });
                pending = false;
            }
        }
    }
    out
}

impl SymbolScorer for FeatureScorer<'_> {
    fn score_next(&self, _tokens: &[String], emitted: &[Symbol], allowed: &[Symbol]) -> Result<Vec<f64>, SearchError> {
        let prefix = decisions_of(emitted);
        let t = prefix.len();
        let after_delimiter = matches!(emitted.last(), Some(Symbol::Delimiter));
        if allowed.len() < 2 || t == 0 || after_delimiter {
            return Ok(vec![0.0; allowed.len()]);
        }
        let [split, cont] = self.model.score_step_cached(&self.features, t, &prefix);
        Ok(allowed
            .iter()
            .map(|s| match s {
                Symbol::Delimiter => split,
                Symbol::Token(_) => cont,
            })
            .collect())
    }

    fn locally_normalized(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct Autoregressive {
    model: Arc<FeatureModel>,
    strategy: SearchStrategy,
    leading_delimiter: bool,
}

impl Autoregressive {
    pub fn new(model: Arc<FeatureModel>, strategy: SearchStrategy) -> Self {
        Self {
            model,
            strategy,
            leading_delimiter: false,
        }
    }

    /// Permits the delimiter before token 0 in the automaton. It is forced
    /// and unscored, so results are unchanged apart from duplicate paths.
    pub fn with_leading_delimiter(mut self, enabled: bool) -> Self {
        self.leading_delimiter = enabled;
        self
    }

    pub fn model(&self) -> &FeatureModel {
        &self.model
    }

    pub fn strategy(&self) -> SearchStrategy {
        self.strategy
    }

    fn search(&self, tokens: &[String], strategy: SearchStrategy) -> Result<Vec<(SegmentationLabels, f64)>, SegmentError> {
        let automaton = SegAutomaton::build(tokens, self.leading_delimiter);
        let scorer = FeatureScorer::new(&self.model, tokens);
        let mut seen = HashSet::new();
        Ok(constrained_search(&automaton, &scorer, strategy)?
            .into_iter()
            .filter(|s| seen.insert(s.labels.clone()))
            .map(|s| (s.labels, s.score))
            .collect())
    }
}

impl WindowSegmenter for Autoregressive {
    fn segment(&self, window: &WindowView<'_>) -> Result<SegmentationLabels, SegmentError> {
        let best = self.search(window.tokens, self.strategy)?;
        Ok(best.into_iter().next().map(|(l, _)| l).unwrap_or_else(|| SegmentationLabels::single_segment(window.len())))
    }

    /// Beam search of width `k`.
    fn nbest(&self, window: &WindowView<'_>, k: usize) -> Result<NBestList, SegmentError> {
        if k == 0 {
            return Err(SegmentError::InvalidParameter("n-best size must be at least 1".into()));
        }
        NBestList::new(self.name(), self.search(window.tokens, SearchStrategy::Beam(k))?)
    }

    fn name(&self) -> &str {
        "autoregressive"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::features::FeatureConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(seed: u64) -> Arc<FeatureModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = FeatureModel::new(FeatureConfig {
            hash_dims: 509,
            ngram_orders: vec![2],
            context_radius: 1,
            history: 2,
            salt: seed,
        })
        .unwrap();
        for w in m.weights_mut() {
            *w = rng.random_range(-1.5..1.5);
        }
        Arc::new(m)
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn path_score_is_log_likelihood() {
        let m = random_model(1);
        let t = toks("a b c a b d e");
        let seg = Autoregressive::new(m.clone(), SearchStrategy::Beam(64));
        let list = seg.nbest(&WindowView::whole(&t), 64).unwrap();
        assert_eq!(list.len(), 64);
        for (labels, score) in list.entries() {
            assert!((m.log_likelihood(&t, labels) - score).abs() < 1e-9);
        }
    }

    #[test]
    fn beam_one_equals_greedy() {
        let m = random_model(2);
        let t = toks("x y z x y z x");
        let g = Autoregressive::new(m.clone(), SearchStrategy::Greedy);
        let b = Autoregressive::new(m, SearchStrategy::Beam(1));
        let w = WindowView::whole(&t);
        assert_eq!(g.segment(&w).unwrap(), b.segment(&w).unwrap());
    }

    #[test]
    fn leading_delimiter_does_not_change_result() {
        let m = random_model(3);
        let t = toks("p q r s t");
        let w = WindowView::whole(&t);
        let plain = Autoregressive::new(m.clone(), SearchStrategy::Exact);
        let lead = plain.clone().with_leading_delimiter(true);
        assert_eq!(plain.segment(&w).unwrap(), lead.segment(&w).unwrap());
        let list = lead.nbest(&w, 32).unwrap();
        assert_eq!(list.len(), 16);
    }

    #[test]
    fn empty_window() {
        let m = random_model(4);
        let seg = Autoregressive::new(m, SearchStrategy::Exact);
        assert!(seg.segment(&WindowView::whole(&[])).unwrap().is_empty());
    }
}
