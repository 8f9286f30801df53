//! Levenshtein alignment of generated text against a reference window and
//! projection of segment boundaries across the alignment.

use serde::{Deserialize, Serialize};

use crate::segmenter::rules::RulePunctuation;
use crate::transcript::{encode_delimited, DelimitedText, SegmentationLabels, Transcript};

/// One alignment link. `i` indexes the reference, `j` the generated side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EditOp {
    Match(usize, usize),
    Subst(usize, usize),
    /// Generated-only token.
    Insert(usize),
    /// Reference-only token.
    Delete(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub links: Vec<EditOp>,
    pub total_cost: usize,
}

impl Alignment {
    /// For every generated position, the reference position it is aligned to
    /// (`None` for insertions).
    pub fn generated_to_reference(&self, generated_len: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; generated_len];
        for op in &self.links {
            match *op {
                EditOp::Match(i, j) | EditOp::Subst(i, j) => map[j] = Some(i),
                EditOp::Insert(_) | EditOp::Delete(_) => {}
            }
        }
        map
    }
}

/// Unit-cost Levenshtein alignment with a full backtrace. Among equal-cost
/// predecessors of a cell the traceback prefers match, then substitution,
/// then deletion, then insertion.
pub fn levenshtein_align<R, G>(reference: &[R], generated: &[G]) -> Alignment
where
    R: AsRef<str>,
    G: AsRef<str>,
{
    let m = reference.len();
    let g = generated.len();
    let cols = g + 1;
    let mut dist = vec![0usize; (m + 1) * cols];
    for i in 0..=m {
        dist[i * cols] = i;
    }
    for j in 0..=g {
        dist[j] = j;
    }
    for i in 1..=m {
        for j in 1..=g {
            let same = reference[i - 1].as_ref() == generated[j - 1].as_ref();
            let diag = dist[(i - 1) * cols + j - 1] + usize::from(!same);
            let up = dist[(i - 1) * cols + j] + 1;
            let left = dist[i * cols + j - 1] + 1;
            dist[i * cols + j] = diag.min(up).min(left);
        }
    }

    let mut links = Vec::with_capacity(m.max(g));
    let (mut i, mut j) = (m, g);
    while i > 0 || j > 0 {
        let here = dist[i * cols + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1].as_ref() == generated[j - 1].as_ref();
            let diag = dist[(i - 1) * cols + j - 1];
            if same && diag == here {
                links.push(EditOp::Match(i - 1, j - 1));
                i -= 1;
                j -= 1;
                continue;
            }
            if !same && diag + 1 == here {
                links.push(EditOp::Subst(i - 1, j - 1));
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dist[(i - 1) * cols + j] + 1 == here {
            links.push(EditOp::Delete(i - 1));
            i -= 1;
        } else {
            links.push(EditOp::Insert(j - 1));
            j -= 1;
        }
    }
    links.reverse();
    Alignment {
        links,
        total_cost: dist[m * cols + g],
    }
}

/// Maps the delimiters of freely generated text onto the reference tokens.
///
/// A delimiter belongs to the generated token that follows it and lands on
/// that token's aligned reference position. Delimiters on inserted tokens
/// move forward to the next generated token that has a reference
/// counterpart, and are dropped if there is none. Total: any input yields
/// valid labels for `reference`.
pub fn project_boundaries(reference: &Transcript, generated: &DelimitedText) -> SegmentationLabels {
    let gen_tokens: Vec<&str> = generated.tokens().collect();
    let alignment = levenshtein_align(reference.tokens(), &gen_tokens);
    let to_ref = alignment.generated_to_reference(gen_tokens.len());
    let mut splits = Vec::new();
    let mut carry = false;
    for ((delim, _), target) in generated.items().iter().zip(&to_ref) {
        carry |= *delim;
        if let Some(i) = target {
            if carry {
                splits.push(*i);
            }
            carry = false;
        }
    }
    SegmentationLabels::from_splits(reference.len(), &splits).expect("aligned positions are in range")
}

/// Oracle labels: sentence boundaries from a punctuated reference transcript,
/// projected onto the (normalized) ASR tokens.
pub fn project_oracle(rules: &RulePunctuation, reference_punctuated: &str, asr: &Transcript) -> SegmentationLabels {
    let (reference, labels) = rules.derive_labels(asr.source_id(), reference_punctuated);
    let delimited = encode_delimited(&reference, &labels).expect("derived labels match their transcript");
    project_boundaries(asr, &delimited)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::{Delimiter, SegmentationLabels};
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    /// Plain recursive edit distance with memoization, independent of the
    /// iterative table above.
    fn oracle_distance(a: &[String], b: &[String]) -> usize {
        fn go(a: &[String], b: &[String], memo: &mut Vec<Vec<Option<usize>>>) -> usize {
            if let Some(v) = memo[a.len()][b.len()] {
                return v;
            }
            let v = match (a.split_last(), b.split_last()) {
                (None, _) => b.len(),
                (_, None) => a.len(),
                (Some((x, ra)), Some((y, rb))) => {
                    let sub = go(ra, rb, memo) + usize::from(x != y);
                    sub.min(go(ra, b, memo) + 1).min(go(a, rb, memo) + 1)
                }
            };
            memo[a.len()][b.len()] = Some(v);
            v
        }
        let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
        go(a, b, &mut memo)
    }

    #[test]
    fn identical_sequences_match() {
        let a = toks("a b c");
        let al = levenshtein_align(&a, &a);
        assert_eq!(al.total_cost, 0);
        assert_eq!(al.links, vec![EditOp::Match(0, 0), EditOp::Match(1, 1), EditOp::Match(2, 2)]);
    }

    #[test]
    fn substitution() {
        let al = levenshtein_align(&toks("a b c"), &toks("a x c"));
        assert_eq!(al.total_cost, 1);
        assert_eq!(al.links, vec![EditOp::Match(0, 0), EditOp::Subst(1, 1), EditOp::Match(2, 2)]);
    }

    #[test]
    fn empty_sides() {
        let al = levenshtein_align::<String, String>(&[], &toks("a b"));
        assert_eq!(al.links, vec![EditOp::Insert(0), EditOp::Insert(1)]);
        assert_eq!(al.total_cost, 2);
        let al = levenshtein_align::<String, String>(&toks("a b"), &[]);
        assert_eq!(al.links, vec![EditOp::Delete(0), EditOp::Delete(1)]);
        let al = levenshtein_align::<String, String>(&[], &[]);
        assert!(al.links.is_empty());
    }

    #[test]
    fn projection_identity_and_substitution() {
        let reference = Transcript::from_text("r", "i am hungry i am sleepy").unwrap();
        let d = Delimiter::default();
        let gen = DelimitedText::parse_lenient("i am hungry ■ i am sleepy", &d);
        assert_eq!(project_boundaries(&reference, &gen).split_positions(), vec![0, 3]);
        let gen = DelimitedText::parse_lenient("i am hungry ■ i m sleepy", &d);
        assert_eq!(project_boundaries(&reference, &gen).split_positions(), vec![0, 3]);
    }

    #[test]
    fn projection_inserted_token_falls_forward() {
        let reference = Transcript::from_text("r", "a b c d").unwrap();
        let d = Delimiter::default();
        // "zz" has no reference counterpart; its delimiter moves to "c"
        let gen = DelimitedText::parse_lenient("a b ■ zz c d", &d);
        let al = levenshtein_align(reference.tokens(), &gen.tokens().collect::<Vec<_>>());
        assert!(al.links.contains(&EditOp::Insert(2)));
        assert_eq!(project_boundaries(&reference, &gen).split_positions(), vec![0, 2]);
        // trailing inserted token with a delimiter: dropped
        let gen = DelimitedText::parse_lenient("a b c d ■ zz", &d);
        assert_eq!(project_boundaries(&reference, &gen).split_positions(), vec![0]);
    }

    #[test]
    fn projection_is_total() {
        let reference = Transcript::from_text("r", "a b c").unwrap();
        let d = Delimiter::default();
        for text in ["", "■", "x y z ■ w", "■ ■ ■ a", "c b a ■ a b c ■ a"] {
            let labels = project_boundaries(&reference, &DelimitedText::parse_lenient(text, &d));
            assert_eq!(labels.len(), 3);
        }
        let empty = Transcript::new("e", vec![]).unwrap();
        assert!(project_boundaries(&empty, &DelimitedText::parse_lenient("a ■ b", &d)).is_empty());
    }

    #[test]
    fn oracle_examples() {
        let rules = RulePunctuation::default();
        let asr = Transcript::from_text("a", "the end next topic").unwrap();
        assert_eq!(project_oracle(&rules, "The end. Next topic.", &asr).split_positions(), vec![0, 2]);
        let noisy = Transcript::from_text("a", "the and next topic").unwrap();
        assert_eq!(project_oracle(&rules, "The end. Next topic.", &noisy).split_positions(), vec![0, 2]);
        let noisy = Transcript::from_text("a", "the end necks topic").unwrap();
        assert_eq!(project_oracle(&rules, "The end. Next topic.", &noisy).split_positions(), vec![0, 2]);
        let empty = Transcript::new("a", vec![]).unwrap();
        assert!(project_oracle(&rules, "The end. Next topic.", &empty).is_empty());
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(str::to_string)
    }

    proptest! {
        #[test]
        fn cost_matches_oracle_and_links_are_consistent(
            r in prop::collection::vec(word(), 0..25),
            g in prop::collection::vec(word(), 0..25),
        ) {
            let al = levenshtein_align(&r, &g);
            prop_assert_eq!(al.total_cost, oracle_distance(&r, &g));
            let (mut ni, mut nj, mut cost) = (0, 0, 0);
            for op in &al.links {
                match *op {
                    EditOp::Match(i, j) => { prop_assert_eq!((i, j), (ni, nj)); prop_assert_eq!(&r[i], &g[j]); ni += 1; nj += 1; }
                    EditOp::Subst(i, j) => { prop_assert_eq!((i, j), (ni, nj)); prop_assert_ne!(&r[i], &g[j]); ni += 1; nj += 1; cost += 1; }
                    EditOp::Delete(i) => { prop_assert_eq!(i, ni); ni += 1; cost += 1; }
                    EditOp::Insert(j) => { prop_assert_eq!(j, nj); nj += 1; cost += 1; }
                }
            }
            prop_assert_eq!((ni, nj, cost), (r.len(), g.len(), al.total_cost));
        }

        #[test]
        fn projection_identity_on_well_formed(
            tokens in prop::collection::vec(word(), 1..30),
            bits in prop::collection::vec(any::<bool>(), 30),
        ) {
            let t = Transcript::new("p", tokens.clone()).unwrap();
            let splits: Vec<usize> = (0..tokens.len()).filter(|&i| bits[i]).collect();
            let labels = SegmentationLabels::from_splits(tokens.len(), &splits).unwrap();
            let enc = encode_delimited(&t, &labels).unwrap();
            prop_assert_eq!(project_boundaries(&t, &enc), labels);
        }

        #[test]
        fn projection_never_adds_boundaries(
            tokens in prop::collection::vec(word(), 0..20),
            text in "[abcd■ ]{0,60}",
        ) {
            let t = Transcript::new("p", tokens).unwrap();
            let gen = DelimitedText::parse_lenient(&text, &Delimiter::default());
            let labels = project_boundaries(&t, &gen);
            prop_assert_eq!(labels.len(), t.len());
            prop_assert!(labels.split_count() <= gen.delimiter_count() + 1);
        }
    }
}
