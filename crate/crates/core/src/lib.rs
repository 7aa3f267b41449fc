//! Deep Q-learning task-adaptation lab.
//!
//! Two environments, a 3x3 grid world with an exact Q-value oracle and an
//! unprotected intersection crossing, are used to compare how different
//! ways of generating training trajectories shape a DQN's Q-values, and how
//! quickly a trained network adapts when the task changes.

pub mod adapt;
pub mod cli;
pub mod envs;
pub mod metrics;
pub mod nnet;
pub mod oracle;
pub mod qlearn;
