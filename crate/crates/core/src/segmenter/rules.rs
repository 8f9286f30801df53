//! Sentence boundaries from punctuated text.
//!
//! A token ending in `.`, `?` or `!` (ignoring closing quotes and brackets)
//! ends a sentence unless it is a known abbreviation such as `St.` or a
//! single letter followed by a period. The output transcript is lowercased
//! with punctuation removed. The same rules derive training supervision from
//! punctuated corpora and oracle boundaries from reference transcripts.

use std::collections::HashSet;
use std::path::Path;

use crate::transcript::{normalize_token, SegmentationLabels, Transcript};

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../assets/abbreviations.txt");

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{2019}', '\u{201D}', '»'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '{', '\u{2018}', '\u{201C}', '«'];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulePunctuation {
    abbreviations: HashSet<String>,
}

impl Default for RulePunctuation {
    fn default() -> Self {
        Self::from_list(DEFAULT_ABBREVIATIONS)
    }
}

impl RulePunctuation {
    /// Parses an abbreviation list: one entry per line, `#` comments.
    pub fn from_list(text: &str) -> Self {
        let abbreviations = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { abbreviations }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::from_list(&std::fs::read_to_string(path)?))
    }

    pub fn abbreviations(&self) -> &HashSet<String> {
        &self.abbreviations
    }

    /// Whether `raw` ends a sentence.
    pub fn is_terminal(&self, raw: &str) -> bool {
        let core = raw.trim_end_matches(CLOSERS);
        let Some(last) = core.chars().last() else {
            return false;
        };
        if !matches!(last, '.' | '?' | '!') {
            return false;
        }
        if last != '.' || core.ends_with("..") {
            return true;
        }
        let word = core.trim_start_matches(OPENERS).to_lowercase();
        if self.abbreviations.contains(&word) {
            return false;
        }
        let mut chars = word.chars();
        let single_letter = matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_alphabetic());
        !single_letter
    }

    pub fn derive_labels(&self, source_id: &str, punctuated_text: &str) -> (Transcript, SegmentationLabels) {
        let mut tokens = Vec::new();
        let mut splits = Vec::new();
        let mut boundary_pending = false;
        for raw in punctuated_text.split_whitespace() {
            let terminal = self.is_terminal(raw);
            if let Some(tok) = normalize_token(raw) {
                if boundary_pending {
                    splits.push(tokens.len());
                    boundary_pending = false;
                }
                tokens.push(tok);
            }
            // a bare "." or "?" token ends the sentence of the preceding word
            boundary_pending |= terminal && !tokens.is_empty();
        }
        let n = tokens.len();
        let transcript = Transcript::new(source_id, tokens).expect("normalized tokens are valid");
        let labels = SegmentationLabels::from_splits(n, &splits).expect("splits are in range");
        (transcript, labels)
    }
}
