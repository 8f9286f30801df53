//! Windowed segmentation of whole transcripts.
//!
//! Plan windows, segment each one (in parallel), stitch. Results are
//! collected in window and document order, so the output does not depend on
//! scheduling.

use rayon::prelude::*;

use crate::segmenter::{SegmentError, WindowSegmenter, WindowView};
use crate::transcript::{SegmentationLabels, Transcript};
use crate::window::{plan_windows, stitch, WindowConfig};

pub struct Pipeline {
    window: WindowConfig,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    /// `workers == 0` uses the available parallelism.
    pub fn new(window: WindowConfig, workers: usize) -> Result<Self, SegmentError> {
        window.validate()?;
        if window.left == 0 {
            log::warn!("left context is 0: every window start is forced to be a boundary");
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SegmentError::InvalidParameter(format!("worker pool: {e}")))?;
        Ok(Self { window, pool })
    }

    pub fn window(&self) -> &WindowConfig {
        &self.window
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn segment<S: WindowSegmenter + ?Sized>(&self, tokens: &[String], segmenter: &S) -> Result<SegmentationLabels, SegmentError> {
        self.pool.install(|| segment_windows(tokens, &self.window, segmenter))
    }

    /// Segments every document; output order matches input order.
    pub fn segment_corpus<S: WindowSegmenter + ?Sized>(
        &self,
        docs: &[Transcript],
        segmenter: &S,
    ) -> Result<Vec<SegmentationLabels>, SegmentError> {
        self.pool.install(|| {
            docs.par_iter()
                .map(|d| segment_windows(d.tokens(), &self.window, segmenter))
                .collect()
        })
    }

    /// Runs `f` on the pipeline's worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

/// Windowed segmentation on the current rayon pool.
pub fn segment_windows<S: WindowSegmenter + ?Sized>(
    tokens: &[String],
    cfg: &WindowConfig,
    segmenter: &S,
) -> Result<SegmentationLabels, SegmentError> {
    let plan = plan_windows(tokens.len(), cfg)?;
    let labels = plan
        .par_iter()
        .map(|w| {
            let view = WindowView {
                tokens: &tokens[w.range()],
                start: w.start,
                adopt: w.adopted(),
            };
            let out = segmenter.segment(&view)?;
            if out.len() != view.len() {
                return Err(SegmentError::WindowLength {
                    segmenter: segmenter.name().to_string(),
                    expected: view.len(),
                    got: out.len(),
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(stitch(&plan, &labels)?)
}

/// Replays known global labels for one document, window by window.
#[derive(Debug, Clone)]
pub struct FixedLabels {
    labels: SegmentationLabels,
}

impl FixedLabels {
    pub fn new(labels: SegmentationLabels) -> Self {
        Self { labels }
    }
}

impl WindowSegmenter for FixedLabels {
    fn segment(&self, window: &WindowView<'_>) -> Result<SegmentationLabels, SegmentError> {
        let end = window.start + window.len();
        let slice = self.labels.decisions().get(window.start..end).ok_or_else(|| {
            SegmentError::InvalidParameter(format!(
                "labels cover {} tokens, window needs {}..{end}",
                self.labels.len(),
                window.start
            ))
        })?;
        Ok(SegmentationLabels::from_decisions_forcing_first(slice.to_vec()))
    }

    fn name(&self) -> &str {
        "labels"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::FixedLength;

    fn tokens(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn fixed_labels_round_trip_through_windows() {
        let t = tokens(57);
        let gold = SegmentationLabels::from_splits(57, &[4, 9, 30, 31, 35, 36, 56]).unwrap();
        let p = Pipeline::new(WindowConfig::new(10, 2, 3).unwrap(), 3).unwrap();
        assert_eq!(p.segment(&t, &FixedLabels::new(gold.clone())).unwrap(), gold);
    }

    #[test]
    fn corpus_order_is_preserved() {
        let docs: Vec<Transcript> = (1..30)
            .map(|n| Transcript::new(format!("d{n}"), tokens(n * 7)).unwrap())
            .collect();
        let p = Pipeline::new(WindowConfig::default(), 4).unwrap();
        let out = p.segment_corpus(&docs, &FixedLength::new(6).unwrap()).unwrap();
        for (d, l) in docs.iter().zip(&out) {
            assert_eq!(l.len(), d.len());
            assert!(l.split_positions().iter().all(|p| p % 6 == 0));
        }
    }

    #[test]
    fn empty_transcript() {
        let p = Pipeline::new(WindowConfig::default(), 1).unwrap();
        assert!(p.segment(&[], &FixedLength::new(3).unwrap()).unwrap().is_empty());
    }
}
