//! Seeded synthetic corpora for demos, tests and benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::segmenter::FeatureConfig;
use crate::transcript::{Decision, SegmentationLabels, Transcript};

pub type LabeledDoc = (Transcript, SegmentationLabels);

const FILLER: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "is", "was", "it", "for", "on", "that", "with", "as", "at", "by", "this", "from",
    "but", "not", "we", "they", "you", "have", "had", "one", "all", "were", "when", "there", "can", "more", "if", "some",
    "out", "about", "time", "people", "would", "like", "into", "just", "know", "think", "really", "very", "world",
    "water", "energy", "cells", "brain", "story", "music", "city", "future", "problem", "idea", "design", "children",
];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn doc(id: String, tokens: Vec<String>, splits: &[usize]) -> LabeledDoc {
    let n = tokens.len();
    (
        Transcript::new(id, tokens).expect("synthetic tokens are valid"),
        SegmentationLabels::from_splits(n, splits).expect("synthetic splits are in range"),
    )
}

/// Random filler words where every token following `marker` starts a
/// segment. Roughly one token in `mean_gap` is the marker.
pub fn lexical_rule_corpus(docs: usize, len: std::ops::RangeInclusive<usize>, marker: &str, mean_gap: usize, seed: u64) -> Vec<LabeledDoc> {
    let mut r = rng(seed);
    (0..docs)
        .map(|d| {
            let n = r.random_range(len.clone());
            let mut tokens = Vec::with_capacity(n);
            let mut splits = Vec::new();
            for i in 0..n {
                if i > 0 && tokens[i - 1] == marker {
                    splits.push(i);
                }
                let tok = if r.random_range(0..mean_gap.max(1)) == 0 {
                    marker
                } else {
                    FILLER.choose(&mut r).expect("non-empty")
                };
                tokens.push(tok.to_string());
            }
            doc(format!("rule{d:03}"), tokens, &splits)
        })
        .collect()
}

/// Random filler words with a boundary every `period` tokens.
pub fn periodic_corpus(docs: usize, len: usize, period: usize, seed: u64) -> Vec<LabeledDoc> {
    let mut r = rng(seed);
    (0..docs)
        .map(|d| {
            let tokens = (0..len).map(|_| FILLER.choose(&mut r).expect("non-empty").to_string()).collect();
            let splits: Vec<usize> = (period..len).step_by(period.max(1)).collect();
            doc(format!("periodic{d:03}"), tokens, &splits)
        })
        .collect()
}

const SUBJECTS: &[&[&str]] = &[&["i", "am"], &["we", "are"], &["you", "are"], &["they", "are"], &["she", "is"], &["he", "is"]];
const STATES: &[&str] = &["hungry", "sleepy", "tired", "happy", "late", "ready", "cold", "busy", "bored", "home"];
const TAILS: &[&[&str]] = &[&[], &[], &["now"], &["today"], &["again"], &["very", "much"]];

/// Short sentences such as "i am hungry" and "we are sleepy now",
/// concatenated without punctuation.
pub fn demo_corpus(docs: usize, sentences: std::ops::RangeInclusive<usize>, seed: u64) -> Vec<LabeledDoc> {
    let mut r = rng(seed);
    (0..docs)
        .map(|d| {
            let mut tokens: Vec<String> = Vec::new();
            let mut splits = Vec::new();
            for _ in 0..r.random_range(sentences.clone()) {
                if !tokens.is_empty() {
                    splits.push(tokens.len());
                }
                let subject = SUBJECTS.choose(&mut r).expect("non-empty");
                tokens.extend(subject.iter().map(|s| s.to_string()));
                tokens.push(STATES.choose(&mut r).expect("non-empty").to_string());
                tokens.extend(TAILS.choose(&mut r).expect("non-empty").iter().map(|s| s.to_string()));
            }
            doc(format!("demo{d:03}"), tokens, &splits)
        })
        .collect()
}

/// Feature settings of the shipped demo model.
pub fn demo_features() -> FeatureConfig {
    FeatureConfig {
        hash_dims: 1 << 16,
        ngram_orders: vec![2, 3],
        context_radius: 3,
        history: 2,
        salt: 7,
    }
}

const TITLES: &[&str] = &["Dr.", "Mr.", "Mrs.", "St.", "Prof."];
const NAMES: &[&str] = &["Smith", "John", "Lee", "Garcia", "Brown"];

/// Punctuated, cased reference documents with abbreviations, questions,
/// exclamations and sentence-internal commas.
pub fn punctuated_documents(docs: usize, sentences: std::ops::RangeInclusive<usize>, seed: u64) -> Vec<(String, String)> {
    let mut r = rng(seed);
    (0..docs)
        .map(|d| {
            let mut text = Vec::new();
            for _ in 0..r.random_range(sentences.clone()) {
                let words = r.random_range(4..14);
                let mut sentence: Vec<String> = Vec::with_capacity(words + 2);
                for i in 0..words {
                    let w = if r.random_range(0..10) == 0 {
                        format!("{} {}", TITLES.choose(&mut r).expect("non-empty"), NAMES.choose(&mut r).expect("non-empty"))
                    } else {
                        FILLER.choose(&mut r).expect("non-empty").to_string()
                    };
                    let w = if i == 0 {
                        let mut c = w.chars();
                        c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
                    } else if r.random_range(0..8) == 0 {
                        format!("{w},")
                    } else {
                        w
                    };
                    sentence.push(w);
                }
                let end = ['.', '.', '.', '?', '!'][r.random_range(0..5)];
                let last = sentence.pop().expect("non-empty sentence");
                sentence.push(format!("{}{end}", last.trim_end_matches(',')));
                text.push(sentence.join(" "));
            }
            (format!("ref{d:03}"), text.join(" "))
        })
        .collect()
}

/// Word-level corruption of a labeled transcript at the given rate:
/// substitutions, deletions and insertions in equal proportion. Returns the
/// corrupted transcript and the true boundaries carried over to it (a
/// boundary on a deleted token moves to the next surviving token).
pub fn corrupt(t: &Transcript, labels: &SegmentationLabels, rate: f64, seed: u64) -> LabeledDoc {
    let mut r = rng(seed);
    let mut tokens = Vec::with_capacity(t.len());
    let mut decisions = Vec::with_capacity(t.len());
    let mut carry = false;
    for (tok, d) in t.tokens().iter().zip(labels.decisions()) {
        let split = d.is_split() || carry;
        carry = false;
        let push = |tokens: &mut Vec<String>, decisions: &mut Vec<Decision>, tok: String, split: bool| {
            tokens.push(tok);
            decisions.push(if split { Decision::Split } else { Decision::Continue });
        };
        if !r.random_bool(rate) {
            push(&mut tokens, &mut decisions, tok.clone(), split);
            continue;
        }
        match r.random_range(0..3) {
            0 => push(&mut tokens, &mut decisions, format!("{tok}s"), split),
            1 => carry = split,
            _ => {
                push(&mut tokens, &mut decisions, tok.clone(), split);
                push(&mut tokens, &mut decisions, "uh".to_string(), false);
            }
        }
    }
    (
        Transcript::new(t.source_id(), tokens).expect("corrupted tokens are valid"),
        SegmentationLabels::from_decisions_forcing_first(decisions),
    )
}
