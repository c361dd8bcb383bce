//! Subgoal automata: states, edge conditions, stepping and trace verdicts.
//!
//! State indices follow a fixed layout: `u0` is 0, intermediate states are
//! `1..=k`, and the accepting and rejecting states take the two highest
//! indices (`n - 2` and `n - 1`).

mod format;

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::traces::{Alphabet, ObsId, ObservationSet, ObservationTrace};

pub use format::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u8);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Role of a state inside an automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Initial,
    Intermediate,
    Accepting,
    Rejecting,
}

impl StateKind {
    pub fn is_terminal(self) -> bool {
        matches!(self, StateKind::Accepting | StateKind::Rejecting)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("an automaton needs at least 3 states, got {0}")]
    TooFewStates(usize),
    #[error("at most 255 states are supported, got {0}")]
    TooManyStates(usize),
    #[error("max_edges_per_pair must be positive")]
    ZeroEdgesPerPair,
    #[error("edge {0} -> {1} references a state that does not exist")]
    UnknownState(String, String),
    #[error("edge {0} -> {1} leaves a terminal state")]
    EdgeFromTerminal(String, String),
    #[error("self-loop on {0}; self-loops are implicit")]
    SelfLoop(String),
    #[error("edge {0} -> {1} declared twice")]
    DuplicateEdge(String, String),
    #[error("edge {0} -> {1} has {2} disjuncts, the limit is {3}")]
    TooManyDisjuncts(String, String, usize, usize),
    #[error("edge {0} -> {1} has no condition")]
    EmptyEdge(String, String),
    #[error("invalid condition: {0}")]
    Condition(#[from] ConditionError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConditionError {
    #[error("a condition needs at least one literal")]
    Empty,
    #[error("observable appears both positive and negated")]
    Contradictory,
    #[error("literal outside the automaton alphabet")]
    OutsideAlphabet,
}

/// Two or more outgoing edges fired on the same observation set.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("state u{} has {} satisfied outgoing edges", state.0, targets.len())]
pub struct DeterminismViolation {
    pub state: StateId,
    pub obs: ObservationSet,
    pub targets: Vec<StateId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("step {step}: {violation}")]
pub struct RunError {
    pub step: usize,
    pub violation: DeterminismViolation,
}

/// A conjunction of observable literals (a member of `3^O`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Condition {
    positives: ObservationSet,
    negatives: ObservationSet,
}

/// One literal of a condition, ordered by observable id with the positive
/// literal before the negated one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub obs: ObsId,
    pub negated: bool,
}

impl Condition {
    pub fn new(positives: ObservationSet, negatives: ObservationSet) -> Result<Self, ConditionError> {
        if !positives.is_disjoint(negatives) {
            return Err(ConditionError::Contradictory);
        }
        if positives.is_empty() && negatives.is_empty() {
            return Err(ConditionError::Empty);
        }
        Ok(Self {
            positives,
            negatives,
        })
    }

    pub fn from_literals<I: IntoIterator<Item = Literal>>(lits: I) -> Result<Self, ConditionError> {
        let mut pos = ObservationSet::EMPTY;
        let mut neg = ObservationSet::EMPTY;
        for l in lits {
            if l.negated {
                neg.insert(l.obs);
            } else {
                pos.insert(l.obs);
            }
        }
        Self::new(pos, neg)
    }

    pub fn positives(&self) -> ObservationSet {
        self.positives
    }

    pub fn negatives(&self) -> ObservationSet {
        self.negatives
    }

    pub fn literal_count(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn literals(&self) -> Vec<Literal> {
        let mut out: Vec<Literal> = self
            .positives
            .iter()
            .map(|obs| Literal { obs, negated: false })
            .chain(self.negatives.iter().map(|obs| Literal { obs, negated: true }))
            .collect();
        out.sort();
        out
    }

    pub fn satisfied_by(&self, obs: ObservationSet) -> bool {
        self.positives.is_subset(obs) && self.negatives.is_disjoint(obs)
    }

    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> impl fmt::Display + 'a {
        DisplayCondition {
            cond: self,
            alphabet,
        }
    }
}

struct DisplayCondition<'a> {
    cond: &'a Condition,
    alphabet: &'a Alphabet,
}

impl fmt::Display for DisplayCondition<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.cond.literals().iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            if l.negated {
                f.write_str("!")?;
            }
            f.write_str(self.alphabet.symbol(l.obs))?;
        }
        Ok(())
    }
}

/// All transitions from one state to another, as a disjunction of conditions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: StateId,
    pub to: StateId,
    pub disjuncts: Vec<Condition>,
}

impl Edge {
    pub fn satisfied_by(&self, obs: ObservationSet) -> bool {
        self.disjuncts.iter().any(|c| c.satisfied_by(obs))
    }

    pub fn literal_count(&self) -> usize {
        self.disjuncts.iter().map(Condition::literal_count).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Accepted,
    Rejected,
    Neither,
}

/// Result of running a trace: the kind plus the state reached after each
/// consumed observation set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub states: Vec<StateId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubgoalAutomaton {
    alphabet: Alphabet,
    num_states: usize,
    max_edges_per_pair: usize,
    edges: Vec<Edge>,
    // edges[out[u].0..out[u].1] leave state u
    out: Vec<(usize, usize)>,
}

impl SubgoalAutomaton {
    pub fn new(
        alphabet: Alphabet,
        num_states: usize,
        max_edges_per_pair: usize,
        mut edges: Vec<Edge>,
    ) -> Result<Self, AutomatonError> {
        if num_states < 3 {
            return Err(AutomatonError::TooFewStates(num_states));
        }
        if num_states > 255 {
            return Err(AutomatonError::TooManyStates(num_states));
        }
        if max_edges_per_pair == 0 {
            return Err(AutomatonError::ZeroEdgesPerPair);
        }
        let name = |s: StateId| state_name(num_states, s);
        let full = alphabet.full_set();
        for e in &mut edges {
            if e.from.index() >= num_states || e.to.index() >= num_states {
                return Err(AutomatonError::UnknownState(
                    format!("u{}", e.from.0),
                    format!("u{}", e.to.0),
                ));
            }
            if e.from.index() + 2 >= num_states {
                return Err(AutomatonError::EdgeFromTerminal(name(e.from), name(e.to)));
            }
            if e.from == e.to {
                return Err(AutomatonError::SelfLoop(name(e.from)));
            }
            if e.disjuncts.is_empty() {
                return Err(AutomatonError::EmptyEdge(name(e.from), name(e.to)));
            }
            if e.disjuncts.len() > max_edges_per_pair {
                return Err(AutomatonError::TooManyDisjuncts(
                    name(e.from),
                    name(e.to),
                    e.disjuncts.len(),
                    max_edges_per_pair,
                ));
            }
            for c in &e.disjuncts {
                if !c.positives.union(c.negatives).is_subset(full) {
                    return Err(ConditionError::OutsideAlphabet.into());
                }
            }
            e.disjuncts.sort_by_key(|c| c.literals());
            e.disjuncts.dedup();
        }
        edges.sort_by_key(|e| (e.from, e.to));
        for w in edges.windows(2) {
            if (w[0].from, w[0].to) == (w[1].from, w[1].to) {
                return Err(AutomatonError::DuplicateEdge(name(w[0].from), name(w[0].to)));
            }
        }
        let mut out = vec![(0, 0); num_states];
        let mut i = 0;
        for (u, slot) in out.iter_mut().enumerate() {
            let start = i;
            while i < edges.len() && edges[i].from.index() == u {
                i += 1;
            }
            *slot = (start, i);
        }
        Ok(Self {
            alphabet,
            num_states,
            max_edges_per_pair,
            edges,
            out,
        })
    }

    /// The edge-free automaton `{u0, uA, uR}`: accepts and rejects nothing.
    pub fn initial(alphabet: Alphabet) -> Self {
        Self::new(alphabet, 3, 1, Vec::new()).expect("3-state automaton is valid")
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn max_edges_per_pair(&self) -> usize {
        self.max_edges_per_pair
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn outgoing(&self, u: StateId) -> &[Edge] {
        let (a, b) = self.out[u.index()];
        &self.edges[a..b]
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states as u8).map(StateId)
    }

    pub fn non_terminal_states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states as u8 - 2).map(StateId)
    }

    pub fn initial_state(&self) -> StateId {
        StateId(0)
    }

    pub fn accepting(&self) -> StateId {
        StateId(self.num_states as u8 - 2)
    }

    pub fn rejecting(&self) -> StateId {
        StateId(self.num_states as u8 - 1)
    }

    pub fn kind(&self, u: StateId) -> StateKind {
        if u.0 == 0 {
            StateKind::Initial
        } else if u == self.accepting() {
            StateKind::Accepting
        } else if u == self.rejecting() {
            StateKind::Rejecting
        } else {
            StateKind::Intermediate
        }
    }

    pub fn is_terminal(&self, u: StateId) -> bool {
        u.index() + 2 >= self.num_states
    }

    pub fn state_name(&self, u: StateId) -> String {
        state_name(self.num_states, u)
    }

    pub fn literal_count(&self) -> usize {
        self.edges.iter().map(Edge::literal_count).sum()
    }

    /// True when every edge between non-terminal states goes from a lower to
    /// a higher index (the shape the learner produces).
    pub fn is_index_ordered(&self) -> bool {
        self.edges
            .iter()
            .all(|e| self.is_terminal(e.to) || e.from < e.to)
    }

    /// Condition satisfaction for a single edge condition.
    pub fn satisfies(obs: ObservationSet, cond: &Condition) -> bool {
        cond.satisfied_by(obs)
    }

    /// One transition. Terminal states absorb; with no satisfied outgoing
    /// edge the state is kept.
    pub fn step(&self, u: StateId, obs: ObservationSet) -> Result<StateId, DeterminismViolation> {
        if self.is_terminal(u) {
            return Ok(u);
        }
        let mut hit: Option<StateId> = None;
        for e in self.outgoing(u) {
            if e.satisfied_by(obs) {
                if let Some(first) = hit {
                    let targets = self
                        .outgoing(u)
                        .iter()
                        .filter(|e| e.satisfied_by(obs))
                        .map(|e| e.to)
                        .collect();
                    debug_assert_ne!(first, e.to);
                    return Err(DeterminismViolation {
                        state: u,
                        obs,
                        targets,
                    });
                }
                hit = Some(e.to);
            }
        }
        Ok(hit.unwrap_or(u))
    }

    pub fn verdict_kind(&self, u: StateId) -> VerdictKind {
        if u == self.accepting() {
            VerdictKind::Accepted
        } else if u == self.rejecting() {
            VerdictKind::Rejected
        } else {
            VerdictKind::Neither
        }
    }

    pub fn run(&self, steps: &[ObservationSet]) -> Result<Verdict, RunError> {
        let mut states = Vec::with_capacity(steps.len());
        let mut u = self.initial_state();
        for (i, obs) in steps.iter().enumerate() {
            if self.is_terminal(u) {
                states.resize(steps.len(), u);
                break;
            }
            u = self
                .step(u, *obs)
                .map_err(|violation| RunError { step: i, violation })?;
            states.push(u);
        }
        Ok(Verdict {
            kind: self.verdict_kind(u),
            states,
        })
    }

    pub fn run_trace(&self, trace: &ObservationTrace) -> Result<Verdict, RunError> {
        self.run(trace.steps())
    }

    /// Edge-count distance from every state to the accepting state; `None`
    /// when the accepting state is unreachable.
    pub fn distances_to_accepting(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_states];
        let target = self.accepting();
        dist[target.index()] = Some(0);
        let mut queue = VecDeque::from([target]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v.index()].unwrap();
            for e in self.edges.iter().filter(|e| e.to == v) {
                if dist[e.from.index()].is_none() {
                    dist[e.from.index()] = Some(d + 1);
                    queue.push_back(e.from);
                }
            }
        }
        dist
    }

    pub fn distance_to_accepting(&self, u: StateId) -> Option<usize> {
        self.distances_to_accepting()[u.index()]
    }

    /// Compares verdicts on every compressed trace of length `1..=max_len`
    /// over all subsets of the alphabet.
    pub fn equivalent(&self, other: &SubgoalAutomaton, max_len: usize) -> bool {
        self.alphabet == other.alphabet
            && self.equivalent_over(other, &self.alphabet.all_sets(), max_len)
    }

    /// Like [`equivalent`](Self::equivalent) but enumerating traces over the
    /// given observation sets only. A determinism violation counts as its
    /// own outcome and must occur on both sides.
    pub fn equivalent_over(
        &self,
        other: &SubgoalAutomaton,
        domain: &[ObservationSet],
        max_len: usize,
    ) -> bool {
        first_disagreement(self, other, domain, max_len).is_none()
    }

    pub fn to_text(&self) -> String {
        format::to_text(self)
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        format::parse(text)
    }

    pub fn to_dot(&self) -> String {
        format::to_dot(self)
    }
}

pub(crate) fn state_name(num_states: usize, u: StateId) -> String {
    if u.index() + 2 == num_states {
        "uA".to_string()
    } else if u.index() + 1 == num_states {
        "uR".to_string()
    } else {
        format!("u{}", u.0)
    }
}

/// First compressed trace (over `domain`, length at most `max_len`) on which
/// the two automata disagree.
pub fn first_disagreement(
    a: &SubgoalAutomaton,
    b: &SubgoalAutomaton,
    domain: &[ObservationSet],
    max_len: usize,
) -> Option<Vec<ObservationSet>> {
    let outcome = |aut: &SubgoalAutomaton, t: &[ObservationSet]| aut.run(t).map(|v| v.kind).ok();
    let mut found = None;
    for_each_compressed_trace(domain, max_len, |t| {
        if outcome(a, t) != outcome(b, t) {
            found = Some(t.to_vec());
            false
        } else {
            true
        }
    });
    found
}

/// Calls `f` on every compressed sequence over `domain` with length
/// `1..=max_len` in depth-first order; stops early when `f` returns false.
pub fn for_each_compressed_trace<F>(domain: &[ObservationSet], max_len: usize, mut f: F)
where
    F: FnMut(&[ObservationSet]) -> bool,
{
    fn rec<F: FnMut(&[ObservationSet]) -> bool>(
        domain: &[ObservationSet],
        max_len: usize,
        buf: &mut Vec<ObservationSet>,
        f: &mut F,
    ) -> bool {
        for &o in domain {
            if buf.last() == Some(&o) {
                continue;
            }
            buf.push(o);
            let go_on = f(buf) && (buf.len() >= max_len || rec(domain, max_len, buf, f));
            buf.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
    if max_len > 0 {
        rec(domain, max_len, &mut Vec::with_capacity(max_len), &mut f);
    }
}
