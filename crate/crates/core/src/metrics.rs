//! Task accuracy, Q-value MSE against the grid oracle, and the settle
//! episode.

use crate::envs::{Environment, GridAction, GridState, GridWorld, Transition};
use crate::nnet::{argmax, NetError, Network};
use crate::oracle::{optimal_action, optimal_path, QTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("Q-value MSE is only defined for the grid environment")]
    UnsupportedEnvironment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub episode: usize,
    pub accuracy: f64,
    pub mse_optimal: Option<f64>,
    pub mse_all: Option<f64>,
}

/// Greedy rollout from `start` until termination.
pub fn greedy_rollout<E: Environment>(
    net: &Network,
    env: &E,
    start: E::State,
) -> Result<Vec<Transition<E::State>>, NetError> {
    let mut s = start;
    let mut traj = Vec::new();
    while !env.is_terminal(&s) {
        let a = argmax(&net.forward(&env.network_input(&s))?);
        let t = env.step(&s, a).expect("live state, valid action");
        s = t.next_state.clone();
        traj.push(t);
    }
    Ok(traj)
}

/// Fraction of `n_rollouts` greedy episodes that succeed. Rollout `i` draws
/// its start from a stream seeded by `(seed, i)`.
///
/// For deterministic environments each distinct start state is simulated
/// once and its result reused.
pub fn accuracy<E: Environment>(net: &Network, env: &E, n_rollouts: usize, seed: u64) -> Result<f64, NetError> {
    assert!(n_rollouts >= 1, "need at least one rollout");
    let mut cache: Vec<(E::State, bool)> = Vec::new();
    let mut successes = 0usize;
    for i in 0..n_rollouts {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::qlearn::derive_seed(seed, &[i as u64]));
        let start = env.reset(&mut rng);
        let ok = if env.is_deterministic() {
            match cache.iter().find(|(s, _)| *s == start) {
                Some(&(_, ok)) => ok,
                None => {
                    let ok = env.is_success(&greedy_rollout(net, env, start.clone())?);
                    cache.push((start, ok));
                    ok
                }
            }
        } else {
            env.is_success(&greedy_rollout(net, env, start)?)
        };
        successes += usize::from(ok);
    }
    Ok(successes as f64 / n_rollouts as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseScope {
    OptimalPath,
    All,
}

/// Which pairs make up the optimal-path scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimalSet {
    /// (state, optimal action) along each optimal trajectory.
    PathActions,
    /// Every action at states on an optimal trajectory.
    PathStates,
}

/// One (cell, action) pair and the oracle value it is scored against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePair {
    pub cell: (i32, i32),
    pub action: GridAction,
    pub q: f64,
}

/// The (cell, action, Q) sets of both MSE scopes.
///
/// Optimal-path pairs take the oracle value at the step the pair is reached
/// along the optimal trajectory, which only matters for the step-augmented
/// oracle. Scope `all` uses step 0.
#[derive(Debug, Clone)]
pub struct QProbe {
    pub optimal: Vec<ProbePair>,
    pub all: Vec<ProbePair>,
}

impl QProbe {
    /// Optimal-path pairs are collected from every start state of `env`,
    /// de-duplicated by (cell, action) in discovery order.
    pub fn new(table: &QTable, env: &GridWorld, set: OptimalSet) -> Self {
        let mut optimal: Vec<ProbePair> = Vec::new();
        for start in env.start_states() {
            for (s, a) in optimal_path(table, start) {
                let actions = match set {
                    OptimalSet::PathActions => vec![a],
                    OptimalSet::PathStates => GridAction::ALL.to_vec(),
                };
                for action in actions {
                    if !optimal.iter().any(|p| p.cell == s.cell() && p.action == action) {
                        let q = table.q(s.cell(), s.steps, action).expect("path states are non-terminal");
                        optimal.push(ProbePair { cell: s.cell(), action, q });
                    }
                }
            }
        }
        let all = table
            .cells()
            .into_iter()
            .flat_map(|cell| {
                GridAction::ALL.into_iter().map(move |action| ProbePair {
                    cell,
                    action,
                    q: table.q(cell, 0, action).expect("table cells are non-terminal"),
                })
            })
            .collect();
        Self { optimal, all }
    }

    pub fn pairs(&self, scope: MseScope) -> &[ProbePair] {
        match scope {
            MseScope::OptimalPath => &self.optimal,
            MseScope::All => &self.all,
        }
    }

    pub fn mse(&self, net: &Network, scope: MseScope) -> Result<f64, NetError> {
        let pairs = self.pairs(scope);
        let mut total = 0.0;
        let mut last: Option<((i32, i32), Vec<f64>)> = None;
        for p in pairs {
            if last.as_ref().is_none_or(|(c, _)| *c != p.cell) {
                last = Some((p.cell, net.forward(&[p.cell.0 as f64, p.cell.1 as f64])?));
            }
            let out = &last.as_ref().expect("just filled").1;
            let d = out[p.action as usize] - p.q;
            total += d * d;
        }
        Ok(total / pairs.len() as f64)
    }

    /// (MSE*, MSEq).
    pub fn both(&self, net: &Network) -> Result<(f64, f64), NetError> {
        Ok((self.mse(net, MseScope::OptimalPath)?, self.mse(net, MseScope::All)?))
    }
}

/// Mean squared error between the network's outputs and the oracle over a scope.
pub fn mse_q(net: &Network, probe: &QProbe, scope: MseScope) -> Result<f64, NetError> {
    probe.mse(net, scope)
}

/// Smallest evaluated episode from which accuracy stays at or above `level`
/// for every later evaluation.
pub fn settle_episode(evals: &[EvalPoint], level: f64) -> Option<usize> {
    let mut settle = None;
    for e in evals.iter().rev() {
        if e.accuracy >= level {
            settle = Some(e.episode);
        } else {
            break;
        }
    }
    settle
}

/// Mean accuracy over the final quarter of evaluations (at least one).
pub fn plateau(evals: &[EvalPoint]) -> f64 {
    if evals.is_empty() {
        return 0.0;
    }
    let n = evals.len().div_ceil(4);
    evals[evals.len() - n..].iter().map(|e| e.accuracy).sum::<f64>() / n as f64
}

/// Whether the greedy policy picks the oracle's action at `cell`.
pub fn agrees_with_oracle(net: &Network, table: &QTable, cell: (i32, i32)) -> Result<bool, NetError> {
    let out = net.forward(&[cell.0 as f64, cell.1 as f64])?;
    Ok(optimal_action(table, &GridState::new(cell.0, cell.1, 0)).map(|a| a as usize) == Some(argmax(&out)))
}
