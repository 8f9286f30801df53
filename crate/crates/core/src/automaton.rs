//! The segmentation automaton and constrained search over it.
//!
//! For a window `x_0 .. x_{w-1}` the automaton accepts every string obtained
//! by inserting at most one delimiter before each token. It has `2w + 1`
//! states: position state `2i` is reached after `i` tokens and delimiter
//! state `2i + 1` after a delimiter in front of token `i`. Arcs:
//!
//! ```text
//! 2i     --x_i-->  2i + 2
//! 2i     --■---->  2i + 1
//! 2i + 1 --x_i-->  2i + 2
//! ```
//!
//! State `2w` is final. The delimiter arc out of state 0 exists only when the
//! leading delimiter is enabled; otherwise state 1 is unreachable.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::{Decision, Delimiter, SegmentationLabels};

pub type StateId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("beam width must be at least 1")]
    ZeroBeam,
    #[error("exact search requires a locally normalized scorer")]
    NotNormalized,
    #[error("scorer returned positive log-score {score} at step {step}; exact search needs scores <= 0")]
    PositiveScore { step: usize, score: f64 },
    #[error("scorer returned {got} scores for {expected} allowed symbols")]
    ScoreArity { expected: usize, got: usize },
    #[error("scorer returned NaN")]
    NaN,
    #[error("scorer failed: {0}")]
    Scorer(String),
}

/// An arc label: the token at a window position, or the delimiter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Token(usize),
    Delimiter,
}

impl Symbol {
    /// Ordering used for tie-breaking: tokens (no delimiter) first.
    fn tie_rank(self) -> u8 {
        match self {
            Symbol::Token(_) => 0,
            Symbol::Delimiter => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arc {
    pub src: StateId,
    pub symbol: Symbol,
    pub dst: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegAutomaton {
    tokens: Vec<String>,
    leading_delimiter: bool,
    num_states: usize,
    /// Outgoing arcs per state, tokens before delimiters.
    out: Vec<Vec<Arc>>,
}

/// Builds the automaton with the leading delimiter suppressed.
pub fn build_automaton(window_tokens: &[String]) -> SegAutomaton {
    SegAutomaton::build(window_tokens, false)
}

impl SegAutomaton {
    pub fn build(window_tokens: &[String], leading_delimiter: bool) -> Self {
        let w = window_tokens.len();
        let num_states = 2 * w + 1;
        let mut out = vec![Vec::new(); num_states];
        for i in 0..w {
            let p = 2 * i;
            out[p].push(Arc {
                src: p,
                symbol: Symbol::Token(i),
                dst: p + 2,
            });
            // with the leading delimiter suppressed, state 1 is isolated
            if i > 0 || leading_delimiter {
                out[p].push(Arc {
                    src: p,
                    symbol: Symbol::Delimiter,
                    dst: p + 1,
                });
                out[p + 1].push(Arc {
                    src: p + 1,
                    symbol: Symbol::Token(i),
                    dst: p + 2,
                });
            }
        }
        Self {
            tokens: window_tokens.to_vec(),
            leading_delimiter,
            num_states,
            out,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn start(&self) -> StateId {
        0
    }

    pub fn final_state(&self) -> StateId {
        self.num_states - 1
    }

    pub fn leading_delimiter(&self) -> bool {
        self.leading_delimiter
    }

    pub fn arcs(&self) -> impl Iterator<Item = &Arc> {
        self.out.iter().flatten()
    }

    pub fn arcs_from(&self, state: StateId) -> Result<&[Arc], SearchError> {
        self.out
            .get(state)
            .map(Vec::as_slice)
            .ok_or(SearchError::UnknownState(state))
    }

    pub fn allowed_symbols(&self, state: StateId) -> Result<Vec<Symbol>, SearchError> {
        Ok(self.arcs_from(state)?.iter().map(|a| a.symbol).collect())
    }

    pub fn symbol_text<'a>(&'a self, symbol: Symbol, delimiter: &'a Delimiter) -> &'a str {
        match symbol {
            Symbol::Token(i) => &self.tokens[i],
            Symbol::Delimiter => delimiter.as_str(),
        }
    }

    /// Every accepted symbol string, in depth-first order (tokens first).
    /// Exponential; intended for small windows.
    pub fn enumerate(&self) -> Vec<Vec<Symbol>> {
        let mut acc = Vec::new();
        let mut path = Vec::new();
        self.enumerate_from(self.start(), &mut path, &mut acc);
        acc
    }

    fn enumerate_from(&self, state: StateId, path: &mut Vec<Symbol>, acc: &mut Vec<Vec<Symbol>>) {
        if state == self.final_state() {
            acc.push(path.clone());
            return;
        }
        for arc in &self.out[state] {
            path.push(arc.symbol);
            self.enumerate_from(arc.dst, path, acc);
            path.pop();
        }
    }

    /// Text arc format, one arc per line: `src dst input output`, followed by
    /// the final state on its own line. Input and output labels are equal
    /// (the automaton is an acceptor).
    pub fn to_arc_text(&self, delimiter: &Delimiter) -> String {
        let mut s = String::new();
        for arc in self.arcs() {
            let label = self.symbol_text(arc.symbol, delimiter);
            let _ = writeln!(s, "{} {} {} {}", arc.src, arc.dst, label, label);
        }
        let _ = writeln!(s, "{}", self.final_state());
        s
    }
}

/// Converts an accepted symbol path to labels for the window.
pub fn path_to_labels(path: &[Symbol], window_len: usize) -> SegmentationLabels {
    let mut decisions = Vec::with_capacity(window_len);
    let mut pending = false;
    for sym in path {
        match sym {
            Symbol::Delimiter => pending = true,
            Symbol::Token(_) => {
                decisions.push(if pending { Decision::Split } else { Decision::Continue });
                pending = false;
            }
        }
    }
    SegmentationLabels::from_decisions_forcing_first(decisions)
}

/// Renders labels as the symbol path the automaton accepts for them.
pub fn labels_to_path(labels: &SegmentationLabels, leading_delimiter: bool) -> Vec<Symbol> {
    let mut path = Vec::with_capacity(labels.len() * 2);
    for (i, d) in labels.decisions().iter().enumerate() {
        if d.is_split() && (i > 0 || leading_delimiter) {
            path.push(Symbol::Delimiter);
        }
        path.push(Symbol::Token(i));
    }
    path
}

/// An autoregressive scorer over automaton symbols.
pub trait SymbolScorer {
    /// Log-scores for each symbol in `allowed`, given the symbols emitted so
    /// far. `tokens` are the window tokens the symbols refer to.
    fn score_next(&self, tokens: &[String], emitted: &[Symbol], allowed: &[Symbol]) -> Result<Vec<f64>, SearchError>;

    /// Whether every per-step score is a log-probability (<= 0).
    fn locally_normalized(&self) -> bool {
        false
    }
}

impl<S: SymbolScorer + ?Sized> SymbolScorer for &S {
    fn score_next(&self, tokens: &[String], emitted: &[Symbol], allowed: &[Symbol]) -> Result<Vec<f64>, SearchError> {
        (**self).score_next(tokens, emitted, allowed)
    }

    fn locally_normalized(&self) -> bool {
        (**self).locally_normalized()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "width")]
pub enum SearchStrategy {
    Greedy,
    Beam(usize),
    Exact,
}

impl Default for SearchStrategy {
    fn default() -> Self {
        SearchStrategy::Beam(4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub state: StateId,
    pub emitted: Vec<Symbol>,
    pub score: f64,
}

/// A complete search result.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub labels: SegmentationLabels,
    pub path: Vec<Symbol>,
    pub score: f64,
}

/// Higher score first; on ties, paths without a delimiter at the first
/// difference come first, then lower state.
fn hyp_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| cmp_paths(&a.emitted, &b.emitted))
        .then_with(|| a.state.cmp(&b.state))
}

fn cmp_paths(a: &[Symbol], b: &[Symbol]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.tie_rank().cmp(&y.tie_rank()) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

fn checked_scores<S: SymbolScorer + ?Sized>(
    scorer: &S,
    a: &SegAutomaton,
    emitted: &[Symbol],
    allowed: &[Symbol],
) -> Result<Vec<f64>, SearchError> {
    let scores = scorer.score_next(a.tokens(), emitted, allowed)?;
    if scores.len() != allowed.len() {
        return Err(SearchError::ScoreArity {
            expected: allowed.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(SearchError::NaN);
    }
    Ok(scores)
}

fn expand<S: SymbolScorer + ?Sized>(
    a: &SegAutomaton,
    scorer: &S,
    hyp: &Hypothesis,
) -> Result<Vec<Hypothesis>, SearchError> {
    let arcs = a.arcs_from(hyp.state)?;
    let allowed: Vec<Symbol> = arcs.iter().map(|a| a.symbol).collect();
    let scores = checked_scores(scorer, a, &hyp.emitted, &allowed)?;
    Ok(arcs
        .iter()
        .zip(scores)
        .map(|(arc, s)| {
            let mut emitted = hyp.emitted.clone();
            emitted.push(arc.symbol);
            Hypothesis {
                state: arc.dst,
                emitted,
                score: hyp.score + s,
            }
        })
        .collect())
}

fn finish(a: &SegAutomaton, hyp: Hypothesis) -> Scored {
    Scored {
        labels: path_to_labels(&hyp.emitted, a.tokens().len()),
        path: hyp.emitted,
        score: hyp.score,
    }
}

fn root() -> Hypothesis {
    Hypothesis {
        state: 0,
        emitted: Vec::new(),
        score: 0.0,
    }
}

/// Runs `strategy` over the automaton. Results are ranked best first.
pub fn constrained_search<S: SymbolScorer + ?Sized>(
    a: &SegAutomaton,
    scorer: &S,
    strategy: SearchStrategy,
) -> Result<Vec<Scored>, SearchError> {
    match strategy {
        SearchStrategy::Greedy => greedy(a, scorer).map(|h| vec![h]),
        SearchStrategy::Beam(k) => beam(a, scorer, k),
        SearchStrategy::Exact => exact(a, scorer).map(|h| vec![h]),
    }
}

fn greedy<S: SymbolScorer + ?Sized>(a: &SegAutomaton, scorer: &S) -> Result<Scored, SearchError> {
    let mut hyp = root();
    while hyp.state != a.final_state() {
        let mut next = expand(a, scorer, &hyp)?;
        next.sort_by(hyp_order);
        hyp = next.into_iter().next().ok_or(SearchError::UnknownState(hyp.state))?;
    }
    Ok(finish(a, hyp))
}

/// Symbol-synchronous beam search: every step extends each live hypothesis by
/// one arc and keeps the best `width`. Hypotheses reaching the final state
/// leave the beam; the best `width` finished ones are returned.
fn beam<S: SymbolScorer + ?Sized>(a: &SegAutomaton, scorer: &S, width: usize) -> Result<Vec<Scored>, SearchError> {
    if width == 0 {
        return Err(SearchError::ZeroBeam);
    }
    if a.final_state() == a.start() {
        return Ok(vec![finish(a, root())]);
    }
    let mut live = vec![root()];
    let mut finished = Vec::new();
    while !live.is_empty() {
        let mut next = Vec::with_capacity(live.len() * 2);
        for hyp in &live {
            if hyp.state == a.final_state() {
                continue;
            }
            next.extend(expand(a, scorer, hyp)?);
        }
        next.sort_by(hyp_order);
        next.truncate(width);
        live = Vec::with_capacity(next.len());
        for hyp in next {
            if hyp.state == a.final_state() {
                finished.push(hyp);
            } else {
                live.push(hyp);
            }
        }
    }
    finished.sort_by(hyp_order);
    finished.truncate(width);
    Ok(finished.into_iter().map(|h| finish(a, h)).collect())
}

/// Depth-first branch and bound. With per-step scores <= 0 a prefix score
/// bounds every completion, so a prefix is pruned as soon as its score is no
/// better than the best complete path found so far.
fn exact<S: SymbolScorer + ?Sized>(a: &SegAutomaton, scorer: &S) -> Result<Scored, SearchError> {
    if !scorer.locally_normalized() {
        return Err(SearchError::NotNormalized);
    }
    let mut best: Option<Hypothesis> = None;
    dfs(a, scorer, root(), &mut best)?;
    Ok(finish(a, best.expect("automaton accepts at least one string")))
}

fn dfs<S: SymbolScorer + ?Sized>(
    a: &SegAutomaton,
    scorer: &S,
    hyp: Hypothesis,
    best: &mut Option<Hypothesis>,
) -> Result<(), SearchError> {
    if let Some(b) = best {
        if hyp.score <= b.score {
            return Ok(());
        }
    }
    if hyp.state == a.final_state() {
        *best = Some(hyp);
        return Ok(());
    }
    let mut children = expand(a, scorer, &hyp)?;
    for child in &children {
        let step = child.score - hyp.score;
        if step > 1e-9 {
            return Err(SearchError::PositiveScore {
                step: hyp.emitted.len(),
                score: step,
            });
        }
    }
    children.sort_by(hyp_order);
    for child in children {
        dfs(a, scorer, child, best)?;
    }
    Ok(())
}

/// Generic transducer machinery used to cross-check the direct construction:
/// an input acceptor composed with the delimiter-insertion transducer and
/// projected to the output tape.
pub mod compose {
    use super::*;

    pub const EPSILON: &str = "";

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct Fst {
        pub num_states: usize,
        pub start: usize,
        pub finals: Vec<usize>,
        /// (src, input, output, dst); empty string is epsilon
        pub arcs: Vec<(usize, String, String, usize)>,
    }

    /// Linear acceptor for the token sequence.
    pub fn linear_acceptor(tokens: &[String]) -> Fst {
        Fst {
            num_states: tokens.len() + 1,
            start: 0,
            finals: vec![tokens.len()],
            arcs: tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (i, t.clone(), t.clone(), i + 1))
                .collect(),
        }
    }

    /// Delimiter-insertion transducer over `vocab`. State 0 is the initial
    /// state (no delimiter allowed when `leading` is false), state 1 is
    /// "after a token", state 2 is "just inserted a delimiter".
    pub fn insertion_transducer(vocab: &[String], delimiter: &str, leading: bool) -> Fst {
        let mut arcs = Vec::new();
        for v in vocab {
            arcs.push((0, v.clone(), v.clone(), 1));
            arcs.push((1, v.clone(), v.clone(), 1));
            arcs.push((2, v.clone(), v.clone(), 1));
        }
        arcs.push((1, EPSILON.to_string(), delimiter.to_string(), 2));
        if leading {
            arcs.push((0, EPSILON.to_string(), delimiter.to_string(), 2));
        }
        Fst {
            num_states: 3,
            start: 0,
            finals: vec![0, 1],
            arcs,
        }
    }

    /// Composition for an epsilon-free-input left operand and a right operand
    /// whose epsilons are on the input side only.
    pub fn compose(left: &Fst, right: &Fst) -> Fst {
        let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut queue = vec![(left.start, right.start)];
        index.insert((left.start, right.start), 0);
        let mut arcs = Vec::new();
        let mut finals = Vec::new();
        while let Some((l, r)) = queue.pop() {
            let src = index[&(l, r)];
            if left.finals.contains(&l) && right.finals.contains(&r) {
                finals.push(src);
            }
            let mut moves = Vec::new();
            for (ls, li, lo, ld) in left.arcs.iter().filter(|a| a.0 == l) {
                let _ = (ls, li);
                for (_, ri, ro, rd) in right.arcs.iter().filter(|a| a.0 == r) {
                    if ri == lo {
                        moves.push((li.clone(), ro.clone(), *ld, *rd));
                    }
                }
            }
            for (_, ri, ro, rd) in right.arcs.iter().filter(|a| a.0 == r) {
                if ri == EPSILON {
                    moves.push((EPSILON.to_string(), ro.clone(), l, *rd));
                }
            }
            for (i, o, nl, nr) in moves {
                let next = index.len();
                let dst = *index.entry((nl, nr)).or_insert_with(|| {
                    queue.push((nl, nr));
                    next
                });
                arcs.push((src, i, o, dst));
            }
        }
        finals.sort_unstable();
        Fst {
            num_states: index.len(),
            start: 0,
            finals,
            arcs,
        }
    }

    /// Keeps the output labels on both tapes.
    pub fn project_output(fst: &Fst) -> Fst {
        Fst {
            arcs: fst
                .arcs
                .iter()
                .map(|(s, _, o, d)| (*s, o.clone(), o.clone(), *d))
                .collect(),
            ..fst.clone()
        }
    }

    /// Removes states that are not both reachable and co-reachable and
    /// renumbers the rest in breadth-first order from the start state,
    /// visiting arcs sorted by label. For deterministic acceptors two
    /// automata are isomorphic iff their canonical forms are equal.
    pub fn canonical(fst: &Fst) -> Fst {
        let mut coreach = vec![false; fst.num_states];
        for &f in &fst.finals {
            coreach[f] = true;
        }
        let mut changed = true;
        while changed {
            changed = false;
            for (s, _, _, d) in &fst.arcs {
                if coreach[*d] && !coreach[*s] {
                    coreach[*s] = true;
                    changed = true;
                }
            }
        }
        let mut order = BTreeMap::new();
        let mut queue = std::collections::VecDeque::new();
        if coreach[fst.start] {
            order.insert(fst.start, 0usize);
            queue.push_back(fst.start);
        }
        let mut arcs = Vec::new();
        while let Some(s) = queue.pop_front() {
            let mut out: Vec<_> = fst
                .arcs
                .iter()
                .filter(|a| a.0 == s && coreach[a.3])
                .collect();
            out.sort_by(|a, b| (&a.1, &a.2).cmp(&(&b.1, &b.2)));
            for (_, i, o, d) in out {
                let next = order.len();
                let nd = *order.entry(*d).or_insert_with(|| {
                    queue.push_back(*d);
                    next
                });
                arcs.push((order[&s], i.clone(), o.clone(), nd));
            }
        }
        let mut finals: Vec<usize> = fst.finals.iter().filter_map(|f| order.get(f).copied()).collect();
        finals.sort_unstable();
        arcs.sort();
        Fst {
            num_states: order.len(),
            start: 0,
            finals,
            arcs,
        }
    }

    /// The direct construction as a generic acceptor.
    pub fn from_automaton(a: &SegAutomaton, delimiter: &Delimiter) -> Fst {
        Fst {
            num_states: a.num_states(),
            start: a.start(),
            finals: vec![a.final_state()],
            arcs: a
                .arcs()
                .map(|arc| {
                    let l = a.symbol_text(arc.symbol, delimiter).to_string();
                    (arc.src, l.clone(), l, arc.dst)
                })
                .collect(),
        }
    }

    pub fn is_deterministic(fst: &Fst) -> bool {
        let mut seen = std::collections::HashSet::new();
        fst.arcs.iter().all(|(s, i, _, _)| i != EPSILON && seen.insert((*s, i.clone())))
    }
}
