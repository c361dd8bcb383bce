//! Subgoal automata learned from observation traces, interleaved with
//! tabular Q-learning on the OfficeWorld gridworld.

pub mod automaton;
pub mod harness;
pub mod induction;
pub mod isa;
pub mod officeworld;
pub mod qrm;
pub mod traces;
