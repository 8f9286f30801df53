//! Sentence segmentation of long, unpunctuated speech transcripts.
//!
//! A transcript is cut into overlapping windows; a window-level segmenter
//! labels each token SPLIT or CONTINUE; decisions from the central part of
//! each window are stitched into a global labeling. Generative segmenters are
//! kept well-formed either by decoding under an automaton that accepts
//! exactly the delimiter insertions of the input, or by projecting their
//! boundaries back onto the input through a Levenshtein alignment.

pub mod align;
pub mod automaton;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod pipeline;
pub mod segmenter;
pub mod synth;
pub mod transcript;
pub mod window;

pub use align::{levenshtein_align, project_boundaries, project_oracle, Alignment, EditOp};
pub use automaton::{build_automaton, constrained_search, SearchStrategy, SegAutomaton, Symbol, SymbolScorer};
pub use eval::{boundary_f1, evaluate_corpus, segment_stats, EvalReport};
pub use pipeline::Pipeline;
pub use segmenter::{NBestList, SegmentError, WindowSegmenter, WindowView};
pub use transcript::{
    decode_delimited, encode_delimited, labels_to_segments, Decision, DelimitedText, Delimiter, Malformed, Segment,
    SegmentationLabels, Transcript,
};
pub use window::{plan_windows, stitch, Window, WindowConfig};
