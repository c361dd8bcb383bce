//! The interleaved loop: episodes of QRM on the current automata, with the
//! automaton of a task re-learned whenever one of its episodes produces a
//! counterexample.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use thiserror::Error;

use crate::automaton::{StateId, SubgoalAutomaton};
use crate::induction::{
    check_consistency, expected_verdict, find_minimal_automaton, AutomatonLearningTask, SolveError,
    SolveResult, SolveStats, DEFAULT_MAX_STATES, DEFAULT_NODE_BUDGET,
};
use crate::officeworld::{env_step, reset, Action, EnvState, GridLayout, Labeler, TaskKind};
use crate::qrm::{QBank, QKey, QParams, ShapingPotential};
use crate::traces::{
    label_from_outcome, Alphabet, EpisodeStatus, ExampleSet, ObservationSet, ObservationTrace, TraceLabel,
};

pub const DEFAULT_EPISODE_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct IsaConfig {
    pub episode_len: usize,
    pub params: QParams,
    pub shaping: bool,
    /// When false the automata stay fixed and counterexamples are only counted.
    pub learn: bool,
    pub max_states: usize,
    pub max_edges_per_pair: usize,
    pub node_budget: u64,
    /// Step the automaton only when the observation set changes.
    pub dedupe_runtime_obs: bool,
    /// Keep negative and incomplete counterexamples found before the first
    /// positive one.
    pub store_before_positive: bool,
}

impl Default for IsaConfig {
    fn default() -> Self {
        Self {
            episode_len: DEFAULT_EPISODE_LEN,
            params: QParams::default(),
            shaping: false,
            learn: true,
            max_states: DEFAULT_MAX_STATES,
            max_edges_per_pair: 1,
            node_budget: DEFAULT_NODE_BUDGET,
            dedupe_runtime_obs: false,
            store_before_positive: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CounterexampleKind {
    DeterminismViolation,
    RecognitionMismatch,
}

#[derive(Debug, Error)]
pub enum IsaError {
    #[error("no automaton with at most {max_states} states is consistent with the {task} examples: {traces:?}")]
    Unsatisfiable {
        task: TaskKind,
        max_states: usize,
        traces: Vec<String>,
    },
    #[error("solver failed on {task}: {source}")]
    Solver {
        task: TaskKind,
        #[source]
        source: SolveError,
    },
    #[error("learned {task} automaton misclassifies stored trace {trace}")]
    CoverageViolated { task: TaskKind, trace: String },
    #[error("learned {task} automaton repeats an earlier hypothesis")]
    RepeatedAutomaton { task: TaskKind },
}

/// Counterexample test for the current automaton state `u` and the status of
/// the MDP state just reached.
pub fn is_counterexample(
    status: EpisodeStatus,
    u: StateId,
    automaton: &SubgoalAutomaton,
    det_violation: bool,
) -> Option<CounterexampleKind> {
    if det_violation {
        return Some(CounterexampleKind::DeterminismViolation);
    }
    let goal_ok = (status == EpisodeStatus::Goal) == (u == automaton.accepting());
    let dead_ok = (status == EpisodeStatus::DeadEnd) == (u == automaton.rejecting());
    if goal_ok && dead_ok {
        None
    } else {
        Some(CounterexampleKind::RecognitionMismatch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelearnEvent {
    pub episode: usize,
    pub task: TaskKind,
    pub kind: CounterexampleKind,
    pub label: TraceLabel,
    pub num_states: usize,
    pub stats: SolveStats,
    pub counts: (usize, usize, usize),
}

/// Per-task learning state.
#[derive(Debug, Clone)]
pub struct TaskRun {
    pub kind: TaskKind,
    pub alphabet: Alphabet,
    pub automaton: SubgoalAutomaton,
    pub potential: ShapingPotential,
    pub examples: ExampleSet,
    pub relearn_count: usize,
    /// Counterexamples whose compressed trace the current automaton already
    /// classifies correctly.
    pub divergences: usize,
    /// Steps where a repeated observation set moved the automaton.
    pub repeat_transitions: usize,
    /// Counterexamples dropped because no positive example existed yet.
    pub skipped_before_positive: usize,
    pub solver_time: Duration,
    labelers: Vec<Labeler>,
    seen: HashSet<String>,
}

impl TaskRun {
    pub fn labeler(&self, grid: usize) -> &Labeler {
        &self.labelers[grid]
    }

    fn set_automaton(&mut self, a: SubgoalAutomaton) {
        self.potential = ShapingPotential::new(&a);
        self.automaton = a;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub steps: usize,
    pub status: EpisodeStatus,
    pub reward: f64,
    pub counterexample: Option<CounterexampleKind>,
    pub relearned: bool,
    pub trace: ObservationTrace,
}

#[derive(Debug, Clone)]
pub struct RunState {
    pub config: IsaConfig,
    pub grids: Arc<Vec<GridLayout>>,
    pub tasks: Vec<TaskRun>,
    pub qbank: QBank,
    pub relearn_log: Vec<RelearnEvent>,
}

impl RunState {
    /// Every task starts from the edge-free three-state automaton.
    pub fn new(config: IsaConfig, grids: Vec<GridLayout>, tasks: Vec<(TaskKind, Alphabet)>) -> Self {
        let initial = tasks
            .iter()
            .map(|(_, al)| SubgoalAutomaton::initial(al.clone()))
            .collect();
        Self::with_automata(config, grids, tasks, initial)
    }

    pub fn with_automata(
        config: IsaConfig,
        grids: Vec<GridLayout>,
        tasks: Vec<(TaskKind, Alphabet)>,
        automata: Vec<SubgoalAutomaton>,
    ) -> Self {
        assert!(!grids.is_empty(), "at least one grid");
        let cells = grids[0].num_cells();
        assert!(grids.iter().all(|g| g.num_cells() == cells), "grids share dimensions");
        let qbank = QBank::new(config.params, tasks.len(), grids.len(), cells);
        let tasks = tasks
            .into_iter()
            .zip(automata)
            .map(|((kind, alphabet), automaton)| {
                assert_eq!(automaton.alphabet(), &alphabet);
                TaskRun {
                    kind,
                    labelers: grids.iter().map(|g| Labeler::new(g, &alphabet)).collect(),
                    alphabet,
                    potential: ShapingPotential::new(&automaton),
                    seen: HashSet::from([automaton.to_text()]),
                    automaton,
                    examples: ExampleSet::new(),
                    relearn_count: 0,
                    divergences: 0,
                    repeat_transitions: 0,
                    skipped_before_positive: 0,
                    solver_time: Duration::ZERO,
                }
            })
            .collect();
        Self {
            config,
            grids: Arc::new(grids),
            tasks,
            qbank,
            relearn_log: Vec::new(),
        }
    }

    /// One training episode of `task` on `grid`.
    pub fn run_episode<R: Rng>(
        &mut self,
        task: usize,
        grid: usize,
        episode: usize,
        rng: &mut R,
    ) -> Result<EpisodeRecord, IsaError> {
        let grids = Arc::clone(&self.grids);
        let layout = &grids[grid];
        let kind = self.tasks[task].kind;
        let mut s = reset(layout, kind);
        let obs0 = self.tasks[task].labeler(grid).label(&s);
        let mut trace = vec![obs0];
        let mut relearned = false;

        let a = &self.tasks[task].automaton;
        let first = a.step(a.initial_state(), obs0);
        let u_first = first.as_ref().copied().unwrap_or(a.initial_state());
        if let Some(kind) = is_counterexample(s.status, u_first, a, first.is_err()) {
            relearned = self.on_counterexample(task, &trace, s.status, kind, episode)?;
            if s.is_terminal() {
                return Ok(self.record(trace, s, 0, 0.0, Some(kind), relearned));
            }
        } else if s.is_terminal() {
            return Ok(self.record(trace, s, 0, 0.0, None, relearned));
        }
        let a = &self.tasks[task].automaton;
        let mut u = match a.step(a.initial_state(), obs0) {
            Ok(u) => u,
            // the learner saw this trace, so only a fixed automaton gets here
            Err(_) => return Ok(self.record(trace, s, 0, 0.0, Some(CounterexampleKind::DeterminismViolation), relearned)),
        };
        let mut total = 0.0;
        let epsilon = self.config.params.epsilon;
        for t in 0..self.config.episode_len {
            let cell = layout.index(s.cell);
            let key = QKey { task, grid, state: u };
            let action = self.qbank.select_action(key, cell, epsilon, rng);
            let (next, r) = env_step(layout, kind, &s, action).expect("episode state is alive");
            total += r;
            let tr = &mut self.tasks[task];
            let obs = tr.labeler(grid).label(&next);
            let repeated = trace.last() == Some(&obs);
            trace.push(obs);
            let stepped = if repeated && self.config.dedupe_runtime_obs {
                Ok(u)
            } else {
                tr.automaton.step(u, obs)
            };
            if repeated && matches!(stepped, Ok(v) if v != u) {
                tr.repeat_transitions += 1;
                log::debug!("{kind}: repeated observation moved the automaton at episode {episode}");
            }
            let u_next = stepped.as_ref().copied().unwrap_or(u);
            if let Some(ce) = is_counterexample(next.status, u_next, &tr.automaton, stepped.is_err()) {
                let relearned = self.on_counterexample(task, &trace, next.status, ce, episode)?;
                return Ok(self.record(trace, next, t + 1, total, Some(ce), relearned));
            }
            self.update_all(grid, cell, action, &next);
            s = next;
            u = u_next;
            if s.is_terminal() {
                return Ok(self.record(trace, s, t + 1, total, None, relearned));
            }
        }
        Ok(self.record(trace, s, self.config.episode_len, total, None, relearned))
    }

    fn record(
        &self,
        steps: Vec<ObservationSet>,
        s: EnvState,
        n: usize,
        reward: f64,
        counterexample: Option<CounterexampleKind>,
        relearned: bool,
    ) -> EpisodeRecord {
        EpisodeRecord {
            steps: n,
            status: s.status,
            reward,
            counterexample,
            relearned,
            trace: ObservationTrace::new(steps, label_from_outcome(s.status)).expect("non-empty trace"),
        }
    }

    /// Replays one experience through every task's automaton; a task whose
    /// automaton is nondeterministic on the observation skips this update.
    fn update_all(&mut self, grid: usize, cell: usize, action: Action, next: &EnvState) {
        let next_cell = self.grids[grid].index(next.cell);
        for (i, tr) in self.tasks.iter().enumerate() {
            let obs = tr.labeler(grid).label(next);
            let pot = self.config.shaping.then_some(&tr.potential);
            let _ = self
                .qbank
                .update_all(i, grid, &tr.automaton, pot, cell, action, next_cell, obs);
        }
    }

    /// Stores the compressed counterexample and, once a positive example
    /// exists, re-learns the task's automaton and clears its Q-tables.
    /// Returns whether the automaton changed.
    pub fn on_counterexample(
        &mut self,
        task: usize,
        raw: &[ObservationSet],
        status: EpisodeStatus,
        kind: CounterexampleKind,
        episode: usize,
    ) -> Result<bool, IsaError> {
        if !self.config.learn {
            return Ok(false);
        }
        let label = label_from_outcome(status);
        let trace = ObservationTrace::new(raw.to_vec(), label)
            .expect("non-empty trace")
            .compress();
        let tr = &mut self.tasks[task];
        let covered = matches!(tr.automaton.run_trace(&trace), Ok(v) if v.kind == expected_verdict(label));
        if covered {
            tr.divergences += 1;
            log::debug!(
                "{}: runtime counterexample {} is already covered",
                tr.kind,
                trace.format(&tr.alphabet)
            );
            return Ok(false);
        }
        if tr.examples.positive().is_empty() && label != TraceLabel::Positive && !self.config.store_before_positive {
            tr.skipped_before_positive += 1;
            return Ok(false);
        }
        tr.examples.insert(trace);
        if tr.examples.positive().is_empty() {
            return Ok(false);
        }
        let learning = AutomatonLearningTask::new(tr.alphabet.clone(), &tr.examples)
            .with_max_states(self.config.max_states)
            .with_max_edges_per_pair(self.config.max_edges_per_pair)
            .with_node_budget(self.config.node_budget);
        let outcome = find_minimal_automaton(&learning).map_err(|source| IsaError::Solver {
            task: tr.kind,
            source,
        })?;
        tr.solver_time += outcome.stats.elapsed;
        let a = match outcome.result {
            SolveResult::Solution(a) => a,
            SolveResult::Unsatisfiable { num_states } => {
                return Err(IsaError::Unsatisfiable {
                    task: tr.kind,
                    max_states: num_states,
                    traces: tr.examples.iter().map(|t| t.format(&tr.alphabet)).collect(),
                })
            }
        };
        if let Err(t) = check_consistency(&a, &tr.examples) {
            return Err(IsaError::CoverageViolated {
                task: tr.kind,
                trace: t.format(&tr.alphabet),
            });
        }
        if !tr.seen.insert(a.to_text()) {
            return Err(IsaError::RepeatedAutomaton { task: tr.kind });
        }
        log::info!(
            "{}: episode {episode}, learned {} states / {} literals in {:?}",
            tr.kind,
            a.num_states(),
            a.literal_count(),
            outcome.stats.elapsed
        );
        let num_states = a.num_states();
        tr.set_automaton(a);
        tr.relearn_count += 1;
        let counts = tr.examples.counts();
        let tkind = tr.kind;
        self.qbank.reset_task(task);
        self.relearn_log.push(RelearnEvent {
            episode,
            task: tkind,
            kind,
            label,
            num_states,
            stats: outcome.stats,
            counts,
        });
        Ok(true)
    }

    /// Greedy rollout without learning. Returns the discounted return and
    /// the number of steps; the rollout fails as soon as the automaton
    /// disagrees with the environment.
    pub fn evaluate<R: Rng>(&self, task: usize, grid: usize, rng: &mut R) -> (f64, usize) {
        let layout = &self.grids[grid];
        let tr = &self.tasks[task];
        let lab = tr.labeler(grid);
        let a = &tr.automaton;
        let gamma = self.config.params.gamma;
        let mut s = reset(layout, tr.kind);
        let Ok(mut u) = a.step(a.initial_state(), lab.label(&s)) else {
            return (0.0, 0);
        };
        let mut prev = lab.label(&s);
        for t in 0..self.config.episode_len {
            if s.is_terminal() || a.is_terminal(u) {
                return (0.0, t);
            }
            let action = self.qbank.select_action(
                QKey { task, grid, state: u },
                layout.index(s.cell),
                0.0,
                rng,
            );
            let (next, r) = env_step(layout, tr.kind, &s, action).expect("alive");
            let obs = lab.label(&next);
            let stepped = if self.config.dedupe_runtime_obs && obs == prev {
                Ok(u)
            } else {
                a.step(u, obs)
            };
            let Ok(v) = stepped else {
                return (0.0, t + 1);
            };
            if r > 0.0 {
                return (gamma.powi(t as i32), t + 1);
            }
            s = next;
            u = v;
            prev = obs;
        }
        (0.0, self.config.episode_len)
    }
}

#[cfg(test)]
mod tests;
