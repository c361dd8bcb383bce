//! The OfficeWorld gridworld: an agent moves between rooms, picks up coffee
//! and mail, visits landmarks and must avoid decorations.

mod layout;
mod tasks;

pub use layout::{random_grid, Action, Cell, GridLayout, Item, LayoutError};
pub use tasks::{full_alphabet, TaskKind, UnknownTask};

use thiserror::Error;

use crate::traces::{Alphabet, EpisodeStatus, ObservationSet};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum EnvError {
    #[error("env_step called on a terminal state ({0:?})")]
    SteppingTerminal(EpisodeStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub cell: Cell,
    pub has_coffee: bool,
    pub has_mail: bool,
    /// Landmarks of A, B, C, D visited in order so far.
    pub progress: u8,
    pub status: EpisodeStatus,
}

impl EnvState {
    pub fn is_terminal(&self) -> bool {
        self.status != EpisodeStatus::Alive
    }

    fn enter(&mut self, layout: &GridLayout, task: TaskKind) {
        match layout.item_at(self.cell) {
            Some(Item::Decoration) => {
                self.status = EpisodeStatus::DeadEnd;
                return;
            }
            Some(Item::Coffee) => self.has_coffee = true,
            Some(Item::Mail) => self.has_mail = true,
            Some(l @ (Item::A | Item::B | Item::C | Item::D)) => {
                let next = [Item::A, Item::B, Item::C, Item::D].get(self.progress as usize);
                if next == Some(&l) {
                    self.progress += 1;
                }
            }
            Some(Item::Office) | None => {}
        }
        let at_office = layout.item_at(self.cell) == Some(Item::Office);
        let goal = match task {
            TaskKind::Coffee => at_office && self.has_coffee,
            TaskKind::CoffeeMail => at_office && self.has_coffee && self.has_mail,
            TaskKind::VisitAbcd => self.progress == 4,
        };
        if goal {
            self.status = EpisodeStatus::Goal;
        }
    }
}

/// Initial state; the start cell's item takes effect immediately.
pub fn reset(layout: &GridLayout, task: TaskKind) -> EnvState {
    let mut s = EnvState {
        cell: layout.start(),
        has_coffee: false,
        has_mail: false,
        progress: 0,
        status: EpisodeStatus::Alive,
    };
    s.enter(layout, task);
    s
}

/// Deterministic move; reward 1 exactly on the step that reaches the goal.
pub fn env_step(
    layout: &GridLayout,
    task: TaskKind,
    state: &EnvState,
    action: Action,
) -> Result<(EnvState, f64), EnvError> {
    if state.is_terminal() {
        return Err(EnvError::SteppingTerminal(state.status));
    }
    let mut next = *state;
    next.cell = layout.neighbor(state.cell, action);
    next.enter(layout, task);
    let reward = if next.status == EpisodeStatus::Goal { 1.0 } else { 0.0 };
    Ok((next, reward))
}

/// Labeling function of one layout restricted to an alphabet; items whose
/// symbol is not in the alphabet are invisible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeler {
    cells: Vec<ObservationSet>,
    width: usize,
}

impl Labeler {
    pub fn new(layout: &GridLayout, alphabet: &Alphabet) -> Self {
        let cells = (0..layout.num_cells())
            .map(|i| {
                let mut o = ObservationSet::EMPTY;
                if let Some(id) = layout
                    .item_at(layout.cell_at(i))
                    .and_then(|item| alphabet.id(item.symbol()))
                {
                    o.insert(id);
                }
                o
            })
            .collect();
        Self {
            cells,
            width: layout.width(),
        }
    }

    pub fn label_cell(&self, c: Cell) -> ObservationSet {
        self.cells[c.y as usize * self.width + c.x as usize]
    }

    pub fn label(&self, s: &EnvState) -> ObservationSet {
        self.label_cell(s.cell)
    }
}

#[cfg(test)]
mod tests;
