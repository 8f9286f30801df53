//! Overlapping fixed-size windows over a long transcript.
//!
//! Window `k` starts at `k * (size - left - right)`. Only the decisions in a
//! window's adopted span become global decisions; the `left` tokens before it
//! and the `right` tokens after it are context. The first window adopts from
//! token 0 and the last window is truncated at `n` and adopts through `n`.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::{Decision, SegmentationLabels};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WindowError {
    #[error("invalid window config: size={size}, left={left}, right={right} (need size >= 1 and left + right < size)")]
    InvalidConfig { size: usize, left: usize, right: usize },
    #[error("expected labels for {expected} windows, got {got}")]
    WindowCountMismatch { expected: usize, got: usize },
    #[error("window {window} has {tokens} tokens but its labels have length {labels}")]
    LabelLengthMismatch {
        window: usize,
        tokens: usize,
        labels: usize,
    },
    #[error("adopted spans do not partition [0, n): gap or overlap at position {position}")]
    NotAPartition { position: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub size: usize,
    pub left: usize,
    pub right: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            size: 40,
            left: 5,
            right: 5,
        }
    }
}

impl WindowConfig {
    pub fn new(size: usize, left: usize, right: usize) -> Result<Self, WindowError> {
        let cfg = Self { size, left, right };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.size == 0 || self.left + self.right >= self.size {
            return Err(WindowError::InvalidConfig {
                size: self.size,
                left: self.left,
                right: self.right,
            });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.size - self.left - self.right
    }
}

/// Window metadata; all indices are global token positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub adopt_start: usize,
    pub adopt_end: usize,
}

impl Window {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn adopted(&self) -> Range<usize> {
        self.adopt_start..self.adopt_end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Adopted span in window-local coordinates.
    pub fn local_adopted(&self) -> Range<usize> {
        (self.adopt_start - self.start)..(self.adopt_end - self.start)
    }

    pub fn left_context(&self) -> usize {
        self.adopt_start - self.start
    }

    pub fn right_context(&self) -> usize {
        self.end - self.adopt_end
    }
}

pub fn plan_windows(n: usize, cfg: &WindowConfig) -> Result<Vec<Window>, WindowError> {
    cfg.validate()?;
    let mut windows = Vec::new();
    if n == 0 {
        return Ok(windows);
    }
    let stride = cfg.stride();
    loop {
        let index = windows.len();
        let start = index * stride;
        let end = (start + cfg.size).min(n);
        let adopt_start = if index == 0 { 0 } else { start + cfg.left };
        let last = end == n;
        let adopt_end = if last { n } else { start + cfg.size - cfg.right };
        windows.push(Window {
            index,
            start,
            end,
            adopt_start,
            adopt_end,
        });
        if last {
            break;
        }
    }
    Ok(windows)
}

/// Copies each window's adopted decisions into one global labeling.
pub fn stitch(windows: &[Window], window_labels: &[SegmentationLabels]) -> Result<SegmentationLabels, WindowError> {
    if windows.len() != window_labels.len() {
        return Err(WindowError::WindowCountMismatch {
            expected: windows.len(),
            got: window_labels.len(),
        });
    }
    let mut decisions = Vec::with_capacity(windows.last().map_or(0, |w| w.end));
    for (w, labels) in windows.iter().zip(window_labels) {
        if labels.len() != w.len() {
            return Err(WindowError::LabelLengthMismatch {
                window: w.index,
                tokens: w.len(),
                labels: labels.len(),
            });
        }
        if w.adopt_start != decisions.len() || w.adopt_end <= w.adopt_start || w.adopt_end > w.end || w.adopt_start < w.start {
            return Err(WindowError::NotAPartition {
                position: decisions.len(),
            });
        }
        decisions.extend_from_slice(&labels.decisions()[w.local_adopted()]);
    }
    if let Some(last) = windows.last() {
        if decisions.len() != last.end {
            return Err(WindowError::NotAPartition {
                position: decisions.len(),
            });
        }
    }
    if let Some(first) = decisions.first_mut() {
        *first = Decision::Split;
    }
    Ok(SegmentationLabels::from_decisions_forcing_first(decisions))
}
