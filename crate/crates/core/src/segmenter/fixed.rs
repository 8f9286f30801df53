use crate::segmenter::{SegmentError, WindowSegmenter, WindowView};
use crate::transcript::SegmentationLabels;

/// Disjoint segments of `segment_len` tokens, counted from global position 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedLength {
    segment_len: usize,
}

impl FixedLength {
    pub fn new(segment_len: usize) -> Result<Self, SegmentError> {
        if segment_len == 0 {
            return Err(SegmentError::InvalidParameter("segment_len must be at least 1".into()));
        }
        Ok(Self { segment_len })
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }
}

impl WindowSegmenter for FixedLength {
    fn segment(&self, window: &WindowView<'_>) -> Result<SegmentationLabels, SegmentError> {
        let splits: Vec<usize> = (0..window.len())
            .filter(|i| (window.start + i) % self.segment_len == 0)
            .collect();
        Ok(SegmentationLabels::from_splits(window.len(), &splits)?)
    }

    fn name(&self) -> &str {
        "fixed"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::{plan_windows, stitch, WindowConfig};

    fn toks(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn definition_examples() {
        let t = toks(10);
        let seg = |len| FixedLength::new(len).unwrap().segment(&WindowView::whole(&t)).unwrap();
        assert_eq!(seg(4).split_positions(), vec![0, 4, 8]);
        assert_eq!(seg(10).split_positions(), vec![0]);
        assert_eq!(seg(25).split_positions(), vec![0]);
        assert_eq!(seg(1).split_positions(), (0..10).collect::<Vec<_>>());
        assert!(FixedLength::new(0).is_err());
    }

    #[test]
    fn periodicity_survives_stitching() {
        let t = toks(257);
        let fixed = FixedLength::new(7).unwrap();
        let ws = plan_windows(t.len(), &WindowConfig::default()).unwrap();
        let labels: Vec<_> = ws
            .iter()
            .map(|w| {
                fixed
                    .segment(&WindowView { tokens: &t[w.range()], start: w.start, adopt: w.adopted() })
                    .unwrap()
            })
            .collect();
        let global = stitch(&ws, &labels).unwrap();
        assert_eq!(global.split_positions(), (0..257).step_by(7).collect::<Vec<_>>());
    }
}
