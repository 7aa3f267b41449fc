//! Episodic environments: the 3x3 grid world and the intersection crossing.

pub(crate) mod grid;
mod intersection;

pub use grid::{GridAction, GridState, GridTask, GridWorld, StartMode, GRID_SIZE};
pub use intersection::{
    Intersection, IntersectionAction, IntersectionParams, IntersectionState, GAP_SENTINEL, NUM_FEATURES,
    VISIBLE_ADOS,
};

use rand_chacha::ChaCha8Rng;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("cannot step a terminal state")]
    TerminalState,
    #[error("action {action} out of range for {num_actions} actions")]
    BadAction { action: usize, num_actions: usize },
}

/// How an episode ended (or that it has not).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Ongoing,
    Success,
    UnsafeCross,
    Collision,
    Hazard,
    OutOfBounds,
    Frozen,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Ongoing
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::Ongoing => "ongoing",
            Outcome::Success => "success",
            Outcome::UnsafeCross => "unsafe_cross",
            Outcome::Collision => "collision",
            Outcome::Hazard => "hazard",
            Outcome::OutOfBounds => "out_of_bounds",
            Outcome::Frozen => "frozen",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    pub outcome: Outcome,
}

impl<S> Transition<S> {
    pub fn terminal(&self) -> bool {
        self.outcome.is_terminal()
    }
}

/// Common episodic interface. Randomness used by `step` lives inside the
/// state, so a state plus an action sequence fully determines an episode.
pub trait Environment {
    type State: Clone + PartialEq + fmt::Debug;

    fn num_actions(&self) -> usize;

    /// Draws a start state; any randomness comes from `rng`.
    fn reset(&self, rng: &mut ChaCha8Rng) -> Self::State;

    fn step(&self, state: &Self::State, action: usize) -> Result<Transition<Self::State>, EnvError>;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Human-meaningful state features (cell coordinates, pixels, flags).
    fn features(&self, state: &Self::State) -> Vec<f64>;

    /// What the network actually sees. Defaults to `features`.
    fn network_input(&self, state: &Self::State) -> Vec<f64> {
        self.features(state)
    }

    fn is_success(&self, trajectory: &[Transition<Self::State>]) -> bool;

    /// True when `step` never consumes randomness, so a greedy rollout is a
    /// pure function of its start state.
    fn is_deterministic(&self) -> bool;
}
