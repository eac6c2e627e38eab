//! Temporal-logic guided transfer for tabular reinforcement learning.
//!
//! Formulas in sequential disjunctive normal form are inferred from labeled
//! trajectories, compiled into deterministic tick automata, and used to
//! extend the state space of Q-learning; learned extended Q-functions are
//! transferred between structurally related tasks.

pub mod automata;
pub mod env;
pub mod experiment;
pub mod formula;
pub mod inference;
pub mod infogain;
pub mod pso;
pub mod rl;
pub mod semantics;
pub mod transfer;
