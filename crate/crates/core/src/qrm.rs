//! Tabular Q-learning with one Q-function per automaton state, updated for
//! every state from each experience, plus automaton-potential shaping.

use std::io::{self, Write};

use rand::Rng;

use crate::automaton::{DeterminismViolation, StateId, SubgoalAutomaton};
use crate::officeworld::Action;
use crate::traces::ObservationSet;

pub const DEFAULT_CLAMP: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for QParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.99,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QKey {
    pub task: usize,
    pub grid: usize,
    pub state: StateId,
}

type Row = [f64; 4];

/// Q-tables indexed by task, grid, automaton state and agent cell. Tables
/// are allocated on first write; missing entries read as zero.
#[derive(Debug, Clone)]
pub struct QBank {
    pub params: QParams,
    num_cells: usize,
    tables: Vec<Vec<Vec<Vec<Row>>>>,
}

impl QBank {
    pub fn new(params: QParams, num_tasks: usize, num_grids: usize, num_cells: usize) -> Self {
        Self {
            params,
            num_cells,
            tables: vec![vec![Vec::new(); num_grids]; num_tasks],
        }
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn values(&self, key: QKey, cell: usize) -> Row {
        self.tables[key.task][key.grid]
            .get(key.state.index())
            .and_then(|t| t.get(cell))
            .copied()
            .unwrap_or([0.0; 4])
    }

    pub fn value(&self, key: QKey, cell: usize, a: Action) -> f64 {
        self.values(key, cell)[a.index()]
    }

    pub fn max_value(&self, key: QKey, cell: usize) -> f64 {
        self.values(key, cell).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn row_mut(&mut self, key: QKey, cell: usize) -> &mut Row {
        let states = &mut self.tables[key.task][key.grid];
        let u = key.state.index();
        if states.len() <= u {
            states.resize_with(u + 1, Vec::new);
        }
        let t = &mut states[u];
        if t.is_empty() {
            t.resize(self.num_cells, [0.0; 4]);
        }
        &mut t[cell]
    }

    /// True when some table for this key has been written since the last reset.
    pub fn is_allocated(&self, key: QKey) -> bool {
        self.tables[key.task][key.grid]
            .get(key.state.index())
            .is_some_and(|t| !t.is_empty())
    }

    pub fn reset(&mut self) {
        for task in &mut self.tables {
            for grid in task {
                grid.clear();
            }
        }
    }

    /// Clears every table belonging to one task.
    pub fn reset_task(&mut self, task: usize) {
        for grid in &mut self.tables[task] {
            grid.clear();
        }
    }

    /// Epsilon-greedy; ties between maximal actions are broken uniformly.
    pub fn select_action<R: Rng>(&self, key: QKey, cell: usize, epsilon: f64, rng: &mut R) -> Action {
        if epsilon > 0.0 && rng.gen_bool(epsilon.min(1.0)) {
            return Action::from_index(rng.gen_range(0..4));
        }
        greedy(&self.values(key, cell), rng)
    }

    /// Intra-option update of every non-terminal state of `automaton` from one
    /// experience `(cell, a, next_cell)` where `next_obs` is the label of the
    /// successor. Targets are computed before any value changes.
    #[allow(clippy::too_many_arguments)]
    pub fn update_all(
        &mut self,
        task: usize,
        grid: usize,
        automaton: &SubgoalAutomaton,
        shaping: Option<&ShapingPotential>,
        cell: usize,
        a: Action,
        next_cell: usize,
        next_obs: ObservationSet,
    ) -> Result<(), DeterminismViolation> {
        let gamma = self.params.gamma;
        let mut targets: Vec<(StateId, f64)> = Vec::with_capacity(automaton.num_states());
        for u in automaton.non_terminal_states() {
            let next = automaton.step(u, next_obs)?;
            let mut r = if next == automaton.accepting() { 1.0 } else { 0.0 };
            if let Some(pot) = shaping {
                r += pot.shaping_reward(u, next, gamma);
            }
            let boot = if automaton.is_terminal(next) {
                0.0
            } else {
                self.max_value(QKey { task, grid, state: next }, next_cell)
            };
            targets.push((u, r + gamma * boot));
        }
        let alpha = self.params.alpha;
        for (u, target) in targets {
            let q = &mut self.row_mut(QKey { task, grid, state: u }, cell)[a.index()];
            *q += alpha * (target - *q);
        }
        Ok(())
    }

    /// Writes `task grid state cell action value` lines for every allocated
    /// entry, with cells as row-major indices.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "task\tgrid\tstate\tcell\taction\tvalue")?;
        for (t, grids) in self.tables.iter().enumerate() {
            for (g, states) in grids.iter().enumerate() {
                for (u, cells) in states.iter().enumerate() {
                    for (c, row) in cells.iter().enumerate() {
                        for (a, v) in row.iter().enumerate() {
                            writeln!(out, "{t}\t{g}\t{u}\t{c}\t{a}\t{v}")?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Uniformly random choice among the maximal entries of a row.
pub fn greedy<R: Rng>(row: &Row, rng: &mut R) -> Action {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..4).filter(|&i| row[i] == best).collect();
    let i = if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    };
    Action::from_index(i)
}

/// Potential `|U| - d(u, uA)` of each automaton state; states that cannot
/// reach the accepting state take the clamp value.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingPotential {
    pub phi: Vec<Option<f64>>,
    pub clamp_value: f64,
}

impl ShapingPotential {
    pub fn new(automaton: &SubgoalAutomaton) -> Self {
        Self::with_clamp(automaton, DEFAULT_CLAMP)
    }

    pub fn with_clamp(automaton: &SubgoalAutomaton, clamp_value: f64) -> Self {
        let n = automaton.num_states() as f64;
        let phi = automaton
            .distances_to_accepting()
            .into_iter()
            .map(|d| d.map(|d| n - d as f64))
            .collect();
        Self { phi, clamp_value }
    }

    pub fn potential(&self, u: StateId) -> f64 {
        self.phi[u.index()].unwrap_or(self.clamp_value)
    }

    /// `gamma * phi(next) - phi(u)`; zero from a state that cannot reach
    /// the accepting state, where the potential carries no information.
    pub fn shaping_reward(&self, u: StateId, next: StateId, gamma: f64) -> f64 {
        if self.phi[u.index()].is_none() {
            return 0.0;
        }
        gamma * self.potential(next) - self.potential(u)
    }
}
