//! Exact learner for minimal subgoal automata consistent with labeled,
//! compressed observation traces.
//!
//! The hypothesis space: `n` states, every non-terminal state has at least
//! one outgoing edge, edges between non-terminal states go from a lower to a
//! higher index, each edge carries at most `max_edges_per_pair` disjuncts,
//! and no two edges leaving a state may fire on an observation set occurring
//! in the examples (or on the empty set). Among consistent automata the
//! learner returns one with the fewest states, then the fewest literals, then
//! the smallest [`automaton_sort_key`].

mod conditions;
pub mod reference;
mod search;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::automaton::{Condition, Edge, Literal, StateId, SubgoalAutomaton, VerdictKind};
use crate::traces::{Alphabet, ExampleSet, ObservationSet, ObservationTrace, TraceLabel};

use conditions::ConjTable;
use search::{Search, Trie};

pub const DEFAULT_MAX_STATES: usize = 10;
pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;
/// Largest number of distinct observation sets in one task.
pub const MAX_POOL: usize = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("search budget of {budget} nodes exhausted at {num_states} states")]
    BudgetExceeded { num_states: usize, budget: u64 },
    #[error("invalid learning task: {0}")]
    InvalidTask(String),
}

#[derive(Debug, Clone)]
pub struct AutomatonLearningTask {
    pub alphabet: Alphabet,
    examples: ExampleSet,
    pub max_states: usize,
    pub max_edges_per_pair: usize,
    pub node_budget: u64,
}

impl AutomatonLearningTask {
    /// Compresses every trace on the way in.
    pub fn new(alphabet: Alphabet, examples: &ExampleSet) -> Self {
        let examples = ExampleSet::from_traces(examples.iter().map(ObservationTrace::compress));
        Self {
            alphabet,
            examples,
            max_states: DEFAULT_MAX_STATES,
            max_edges_per_pair: 1,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    pub fn from_traces<I: IntoIterator<Item = ObservationTrace>>(alphabet: Alphabet, traces: I) -> Self {
        Self::new(alphabet, &ExampleSet::from_traces(traces))
    }

    pub fn with_max_states(mut self, n: usize) -> Self {
        self.max_states = n;
        self
    }

    pub fn with_max_edges_per_pair(mut self, k: usize) -> Self {
        self.max_edges_per_pair = k;
        self
    }

    pub fn with_node_budget(mut self, budget: u64) -> Self {
        self.node_budget = budget;
        self
    }

    pub fn examples(&self) -> &ExampleSet {
        &self.examples
    }

    /// Distinct observation sets in the examples, plus the empty set, sorted.
    pub fn pool(&self) -> Vec<ObservationSet> {
        let mut pool: Vec<ObservationSet> = self
            .examples
            .iter()
            .flat_map(|t| t.steps().iter().copied())
            .chain(std::iter::once(ObservationSet::EMPTY))
            .collect();
        pool.sort();
        pool.dedup();
        pool
    }

    fn validate(&self) -> Result<(), SolveError> {
        if self.max_states < 3 {
            return Err(SolveError::InvalidTask(format!(
                "max_states must be at least 3, got {}",
                self.max_states
            )));
        }
        if self.max_states > 255 {
            return Err(SolveError::InvalidTask("max_states above 255".into()));
        }
        if self.max_edges_per_pair == 0 {
            return Err(SolveError::InvalidTask("max_edges_per_pair must be positive".into()));
        }
        let full = self.alphabet.full_set();
        if let Some(o) = self
            .examples
            .iter()
            .flat_map(|t| t.steps())
            .find(|o| !o.is_subset(full))
        {
            return Err(SolveError::InvalidTask(format!(
                "observation set {:#b} lies outside the {}-symbol alphabet",
                o.bits(),
                self.alphabet.len()
            )));
        }
        let pool = self.pool();
        if pool.len() > MAX_POOL {
            return Err(SolveError::InvalidTask(format!(
                "{} distinct observation sets, at most {MAX_POOL} are supported",
                pool.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Solution(SubgoalAutomaton),
    Unsatisfiable { num_states: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub elapsed: Duration,
    /// Search nodes expanded, summed over every state count tried.
    pub nodes: u64,
    /// Complete transition assignments whose conditions were optimised.
    pub candidates: u64,
    pub num_states: usize,
    pub literals: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub result: SolveResult,
    pub stats: SolveStats,
}

impl SolveOutcome {
    pub fn automaton(&self) -> Option<&SubgoalAutomaton> {
        match &self.result {
            SolveResult::Solution(a) => Some(a),
            SolveResult::Unsatisfiable { .. } => None,
        }
    }

    pub fn into_automaton(self) -> Option<SubgoalAutomaton> {
        match self.result {
            SolveResult::Solution(a) => Some(a),
            SolveResult::Unsatisfiable { .. } => None,
        }
    }
}

/// The verdict a label demands.
pub fn expected_verdict(label: TraceLabel) -> VerdictKind {
    match label {
        TraceLabel::Positive => VerdictKind::Accepted,
        TraceLabel::Negative => VerdictKind::Rejected,
        TraceLabel::Incomplete => VerdictKind::Neither,
    }
}

/// Checks every example; returns the first trace that is misclassified or
/// hits a determinism violation.
pub fn check_consistency<'a>(
    a: &SubgoalAutomaton,
    examples: &'a ExampleSet,
) -> Result<(), &'a ObservationTrace> {
    for t in examples.iter() {
        match a.run_trace(t) {
            Ok(v) if v.kind == expected_verdict(t.label()) => {}
            _ => return Err(t),
        }
    }
    Ok(())
}

pub type EdgeKey = (StateId, Vec<Vec<Literal>>);

/// Ordering key used to break ties between automata with equal state and
/// literal counts: total literals, then per source state the list of
/// `(target, disjunct literals)` in target order.
pub fn automaton_sort_key(a: &SubgoalAutomaton) -> (usize, Vec<Vec<EdgeKey>>) {
    let blocks = a
        .non_terminal_states()
        .map(|u| {
            a.outgoing(u)
                .iter()
                .map(|e| (e.to, e.disjuncts.iter().map(Condition::literals).collect()))
                .collect()
        })
        .collect();
    (a.literal_count(), blocks)
}

struct Prepared {
    pool_len: usize,
    trie: Option<Trie>,
    table: ConjTable,
}

fn prepare(task: &AutomatonLearningTask) -> Result<Prepared, SolveError> {
    task.validate()?;
    let pool = task.pool();
    let index: HashMap<ObservationSet, usize> = pool.iter().enumerate().map(|(i, &o)| (o, i)).collect();
    let trie = Trie::build(&task.examples, &index);
    let table = ConjTable::new(&pool, task.alphabet.full_set().bits(), task.max_edges_per_pair)
        .map_err(|m| {
            SolveError::InvalidTask(format!(
                "{m} observables occur in the examples, at most {} are supported",
                conditions::MAX_POOL_OBSERVABLES
            ))
        })?;
    Ok(Prepared {
        pool_len: pool.len(),
        trie,
        table,
    })
}

fn solve_prepared(
    task: &AutomatonLearningTask,
    prep: &mut Prepared,
    n: usize,
    stats: &mut SolveStats,
) -> Result<Option<SubgoalAutomaton>, SolveError> {
    let Some(trie) = &prep.trie else {
        return Ok(None);
    };
    let mut search = Search::new(trie, &mut prep.table, prep.pool_len, n, task.node_budget);
    let r = search.run();
    stats.nodes += search.nodes;
    stats.candidates += search.leaves;
    r.map_err(|_| SolveError::BudgetExceeded {
        num_states: n,
        budget: task.node_budget,
    })?;
    let Some(best) = search.best else {
        return Ok(None);
    };
    let mut edges = Vec::new();
    for (x, block) in best.blocks.iter().enumerate() {
        for (to, dnf) in block {
            let disjuncts = dnf
                .key
                .iter()
                .map(|k| Condition::from_literals(k.iter().copied()).expect("valid conjunction"))
                .collect();
            edges.push(Edge {
                from: StateId(x as u8),
                to: StateId(*to),
                disjuncts,
            });
        }
    }
    let a = SubgoalAutomaton::new(task.alphabet.clone(), n, task.max_edges_per_pair, edges)
        .expect("solver output is well formed");
    debug_assert_eq!(a.literal_count() as u32, best.cost);
    debug_assert!(check_consistency(&a, &task.examples).is_ok());
    Ok(Some(a))
}

fn finish(result: SolveResult, mut stats: SolveStats, start: Instant) -> SolveOutcome {
    stats.elapsed = start.elapsed();
    if let SolveResult::Solution(a) = &result {
        stats.num_states = a.num_states();
        stats.literals = a.literal_count();
    }
    SolveOutcome { result, stats }
}

/// Searches automata with exactly `num_states` states.
pub fn solve_fixed_states(
    task: &AutomatonLearningTask,
    num_states: usize,
) -> Result<SolveOutcome, SolveError> {
    let start = Instant::now();
    if num_states < 3 || num_states > task.max_states {
        return Err(SolveError::InvalidTask(format!(
            "num_states must be in 3..={}, got {num_states}",
            task.max_states
        )));
    }
    let mut prep = prepare(task)?;
    let mut stats = SolveStats {
        num_states,
        ..SolveStats::default()
    };
    let result = match solve_prepared(task, &mut prep, num_states, &mut stats)? {
        Some(a) => SolveResult::Solution(a),
        None => SolveResult::Unsatisfiable { num_states },
    };
    Ok(finish(result, stats, start))
}

/// Iterative deepening over the number of states, from 3 to `max_states`.
pub fn find_minimal_automaton(task: &AutomatonLearningTask) -> Result<SolveOutcome, SolveError> {
    let start = Instant::now();
    let mut prep = prepare(task)?;
    let mut stats = SolveStats::default();
    for n in 3..=task.max_states {
        stats.num_states = n;
        if let Some(a) = solve_prepared(task, &mut prep, n, &mut stats)? {
            return Ok(finish(SolveResult::Solution(a), stats, start));
        }
        if prep.trie.is_none() {
            break;
        }
    }
    Ok(finish(
        SolveResult::Unsatisfiable {
            num_states: task.max_states,
        },
        stats,
        start,
    ))
}
