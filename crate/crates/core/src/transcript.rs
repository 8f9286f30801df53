//! Transcripts, per-token segmentation decisions and the delimiter-insertion
//! encoding used by generative segmenters.
//!
//! A labeling assigns one [`Decision`] to every token. `Split` at position `t`
//! means a new segment starts at token `t`; position 0 is always `Split`.
//! The generative encoding renders a labeling as the token stream with a
//! delimiter symbol in front of every token that starts a segment, except the
//! first one, e.g. `i am hungry ■ i am sleepy`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default sentence delimiter (U+25A0 BLACK SQUARE).
pub const DEFAULT_DELIMITER: &str = "■";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("token {index} is empty")]
    EmptyToken { index: usize },
    #[error("token {index} ({token:?}) contains whitespace")]
    Whitespace { index: usize, token: String },
    #[error("token {index} ({token:?}) contains the delimiter {delimiter:?}")]
    ContainsDelimiter {
        index: usize,
        token: String,
        delimiter: String,
    },
    #[error("labels have length {labels} but transcript has {tokens} tokens")]
    LengthMismatch { labels: usize, tokens: usize },
    #[error("position 0 must be SPLIT")]
    FirstNotSplit,
    #[error("split position {position} out of range for {len} tokens")]
    SplitOutOfRange { position: usize, len: usize },
    #[error("invalid delimiter {0:?}: must be a single non-empty whitespace-free token")]
    BadDelimiter(String),
}

/// The reserved symbol that marks a segment boundary in generated text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Delimiter(String);

impl Delimiter {
    pub fn new(symbol: impl Into<String>) -> Result<Self, TranscriptError> {
        let symbol = symbol.into();
        if symbol.is_empty() || symbol.chars().any(char::is_whitespace) {
            return Err(TranscriptError::BadDelimiter(symbol));
        }
        Ok(Self(symbol))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for Delimiter {
    fn default() -> Self {
        Self(DEFAULT_DELIMITER.to_string())
    }
}

impl TryFrom<String> for Delimiter {
    type Error = TranscriptError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Delimiter::new(value)
    }
}

impl From<Delimiter> for String {
    fn from(d: Delimiter) -> String {
        d.0
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn check_token(index: usize, token: &str, delimiter: &Delimiter) -> Result<(), TranscriptError> {
    if token.is_empty() {
        return Err(TranscriptError::EmptyToken { index });
    }
    if token.chars().any(char::is_whitespace) {
        return Err(TranscriptError::Whitespace {
            index,
            token: token.to_string(),
        });
    }
    if token.contains(delimiter.as_str()) {
        return Err(TranscriptError::ContainsDelimiter {
            index,
            token: token.to_string(),
            delimiter: delimiter.to_string(),
        });
    }
    Ok(())
}

/// An immutable sequence of word tokens with an opaque source identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transcript {
    tokens: Vec<String>,
    source_id: String,
}

impl Transcript {
    /// Validates tokens against the default delimiter.
    pub fn new(source_id: impl Into<String>, tokens: Vec<String>) -> Result<Self, TranscriptError> {
        Self::with_delimiter(source_id, tokens, &Delimiter::default())
    }

    pub fn with_delimiter(
        source_id: impl Into<String>,
        tokens: Vec<String>,
        delimiter: &Delimiter,
    ) -> Result<Self, TranscriptError> {
        for (i, tok) in tokens.iter().enumerate() {
            check_token(i, tok, delimiter)?;
        }
        Ok(Self {
            tokens,
            source_id: source_id.into(),
        })
    }

    /// Whitespace tokenization of `text`.
    pub fn from_text(source_id: impl Into<String>, text: &str) -> Result<Self, TranscriptError> {
        Self::new(source_id, text.split_whitespace().map(str::to_string).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Sub-transcript over `range`, keeping the source id.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Transcript {
        Transcript {
            tokens: self.tokens[range].to_vec(),
            source_id: self.source_id.clone(),
        }
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    Split,
    Continue,
}

impl Decision {
    pub fn is_split(self) -> bool {
        self == Decision::Split
    }
}

/// One decision per token; position 0 is always `Split`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentationLabels {
    decisions: Vec<Decision>,
}

impl SegmentationLabels {
    pub fn new(decisions: Vec<Decision>) -> Result<Self, TranscriptError> {
        if let Some(first) = decisions.first() {
            if *first != Decision::Split {
                return Err(TranscriptError::FirstNotSplit);
            }
        }
        Ok(Self { decisions })
    }

    /// Labels of length `n` with `Split` at position 0 and at every listed
    /// position. Duplicates are allowed.
    pub fn from_splits(n: usize, splits: &[usize]) -> Result<Self, TranscriptError> {
        let mut decisions = vec![Decision::Continue; n];
        if n > 0 {
            decisions[0] = Decision::Split;
        }
        for &p in splits {
            if p >= n {
                return Err(TranscriptError::SplitOutOfRange { position: p, len: n });
            }
            decisions[p] = Decision::Split;
        }
        Ok(Self { decisions })
    }

    /// A single segment spanning `n` tokens.
    pub fn single_segment(n: usize) -> Self {
        Self::from_splits(n, &[]).expect("no split positions")
    }

    /// Forces position 0 to `Split`; every other decision is kept.
    pub fn from_decisions_forcing_first(mut decisions: Vec<Decision>) -> Self {
        if let Some(first) = decisions.first_mut() {
            *first = Decision::Split;
        }
        Self { decisions }
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    /// All `Split` positions, including 0.
    pub fn split_positions(&self) -> Vec<usize> {
        self.decisions
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_split())
            .map(|(i, _)| i)
            .collect()
    }

    /// `Split` positions in `1..n`, i.e. the boundaries between segments.
    pub fn boundaries(&self) -> Vec<usize> {
        self.split_positions().into_iter().filter(|&p| p > 0).collect()
    }

    pub fn split_count(&self) -> usize {
        self.decisions.iter().filter(|d| d.is_split()).count()
    }
}

/// A contiguous half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

pub fn labels_to_segments(labels: &SegmentationLabels) -> Vec<Segment> {
    let n = labels.len();
    let starts = labels.split_positions();
    starts
        .iter()
        .enumerate()
        .map(|(k, &start)| Segment {
            start,
            end: starts.get(k + 1).copied().unwrap_or(n),
        })
        .collect()
}

/// Inverse of [`labels_to_segments`]. Segments must partition `[0, n)`.
pub fn segments_to_labels(n: usize, segments: &[Segment]) -> Result<SegmentationLabels, TranscriptError> {
    let mut expected = 0;
    for seg in segments {
        if seg.start != expected || seg.end <= seg.start {
            return Err(TranscriptError::SplitOutOfRange {
                position: seg.start,
                len: n,
            });
        }
        expected = seg.end;
    }
    if expected != n {
        return Err(TranscriptError::SplitOutOfRange { position: expected, len: n });
    }
    let starts: Vec<usize> = segments.iter().map(|s| s.start).collect();
    SegmentationLabels::from_splits(n, &starts)
}

/// A token stream where each token may be preceded by one delimiter.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DelimitedText {
    items: Vec<(bool, String)>,
}

impl DelimitedText {
    pub fn new(items: Vec<(bool, String)>) -> Self {
        Self { items }
    }

    pub fn items(&self) -> &[(bool, String)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|(_, t)| t.as_str())
    }

    pub fn delimiter_count(&self) -> usize {
        self.items.iter().filter(|(d, _)| *d).count()
    }

    /// Renders with the delimiter before token 0 suppressed.
    pub fn render(&self, delimiter: &Delimiter) -> String {
        let mut out = String::new();
        for (i, (delim, tok)) in self.items.iter().enumerate() {
            if i > 0 {
                out.push(' ');
                if *delim {
                    out.push_str(delimiter.as_str());
                    out.push(' ');
                }
            }
            out.push_str(tok);
        }
        out
    }

    /// Best-effort parse of arbitrary generated text. Delimiters glued to
    /// words are split off, runs of delimiters collapse to one and a trailing
    /// delimiter is dropped. Never fails.
    pub fn parse_lenient(text: &str, delimiter: &Delimiter) -> Self {
        let mut items = Vec::new();
        let mut pending = false;
        for raw in text.split_whitespace() {
            let mut parts = raw.split(delimiter.as_str()).peekable();
            while let Some(part) = parts.next() {
                if !part.is_empty() {
                    items.push((pending, part.to_string()));
                    pending = false;
                }
                if parts.peek().is_some() {
                    pending = true;
                }
            }
        }
        Self { items }
    }
}

pub fn encode_delimited(
    transcript: &Transcript,
    labels: &SegmentationLabels,
) -> Result<DelimitedText, TranscriptError> {
    if transcript.len() != labels.len() {
        return Err(TranscriptError::LengthMismatch {
            labels: labels.len(),
            tokens: transcript.len(),
        });
    }
    let items = transcript
        .tokens()
        .iter()
        .zip(labels.decisions())
        .map(|(tok, d)| (d.is_split(), tok.clone()))
        .collect();
    Ok(DelimitedText { items })
}

/// Why a candidate string is not a well-formed segmentation of its reference.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Malformed {
    #[error("token mismatch at reference position {position}: expected {expected:?}, found {found:?}")]
    TokenMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("adjacent delimiters before reference position {position}")]
    AdjacentDelimiters { position: usize },
    #[error("trailing delimiter after the last token")]
    TrailingDelimiter { position: usize },
    #[error("candidate ends early: {missing} reference tokens missing from position {position}")]
    Truncated { position: usize, missing: usize },
    #[error("candidate has extra token {found:?} after the end of the reference")]
    ExtraToken { position: usize, found: String },
}

impl Malformed {
    /// Reference token index of the first violation.
    pub fn position(&self) -> usize {
        match self {
            Malformed::TokenMismatch { position, .. }
            | Malformed::AdjacentDelimiters { position }
            | Malformed::TrailingDelimiter { position }
            | Malformed::Truncated { position, .. }
            | Malformed::ExtraToken { position, .. } => *position,
        }
    }
}

/// Decodes generated text with the default delimiter.
pub fn decode_delimited(candidate: &str, reference: &Transcript) -> Result<SegmentationLabels, Malformed> {
    decode_delimited_with(candidate, reference, &Delimiter::default())
}

/// Strict decoding: the candidate must reproduce the reference tokens exactly,
/// with at most one delimiter before each token and none after the last one.
/// A delimiter before the first token is accepted and ignored.
pub fn decode_delimited_with(
    candidate: &str,
    reference: &Transcript,
    delimiter: &Delimiter,
) -> Result<SegmentationLabels, Malformed> {
    let expected = reference.tokens();
    let mut decisions = Vec::with_capacity(expected.len());
    let mut pending = false;
    let mut pos = 0;
    for tok in candidate.split_whitespace() {
        if tok == delimiter.as_str() {
            if pending {
                return Err(Malformed::AdjacentDelimiters { position: pos });
            }
            pending = true;
            continue;
        }
        match expected.get(pos) {
            None => {
                return Err(Malformed::ExtraToken {
                    position: pos,
                    found: tok.to_string(),
                })
            }
            Some(exp) if exp != tok => {
                return Err(Malformed::TokenMismatch {
                    position: pos,
                    expected: exp.clone(),
                    found: tok.to_string(),
                })
            }
            Some(_) => {}
        }
        decisions.push(if pending || pos == 0 {
            Decision::Split
        } else {
            Decision::Continue
        });
        pending = false;
        pos += 1;
    }
    if pending {
        return Err(Malformed::TrailingDelimiter { position: pos });
    }
    if pos < expected.len() {
        return Err(Malformed::Truncated {
            position: pos,
            missing: expected.len() - pos,
        });
    }
    Ok(SegmentationLabels { decisions })
}

/// Lowercases and strips punctuation from a raw token. Word-internal
/// apostrophes are kept (curly ones are mapped to `'`). Returns `None` when
/// nothing is left.
pub fn normalize_token(raw: &str) -> Option<String> {
    let chars: Vec<char> = raw
        .chars()
        .map(|c| if c == '\u{2019}' { '\'' } else { c })
        .collect();
    let mut out = String::with_capacity(raw.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == '\'' {
            let inner = i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphanumeric()
                && chars[i + 1].is_alphanumeric();
            if inner {
                out.push(c);
            }
        } else if !is_punctuation(c) {
            out.extend(c.to_lowercase());
        }
    }
    (!out.is_empty()).then_some(out)
}

pub(crate) fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2026}' | '\u{2010}'..='\u{2015}' | '«' | '»' | '¿' | '¡' | '\u{25A0}'
        )
}

/// Lowercases and strips punctuation from whitespace-separated text.
pub fn normalize_text(source_id: impl Into<String>, text: &str) -> Transcript {
    let tokens = text.split_whitespace().filter_map(normalize_token).collect();
    Transcript::new(source_id, tokens).expect("normalized tokens are non-empty and punctuation-free")
}
