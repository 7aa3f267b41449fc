//! Exact grid Q-values, a brute-force cross-check, and expert policies.
//!
//! Two grid tables are available. The stationary table is per cell: every
//! white-cell entry costs -1 and there is no step cap. The step-augmented
//! table indexes by step count as well and honours the first-step exemption
//! and the freeze after ten steps, so it is exact for the environment as
//! simulated.

use crate::envs::{
    Environment, GridAction, GridState, GridTask, GridWorld, Intersection, IntersectionAction, IntersectionState,
    StartMode,
};
use crate::envs::grid::{moved, FROZEN_REWARD, MAX_STEPS};
use crate::nnet::argmax;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("discount must lie in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("invalid grid task")]
    BadTask,
    #[error("value iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("unknown oracle variant `{0}` (expected stationary or step_augmented)")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleVariant {
    Stationary,
    StepAugmented,
}

impl FromStr for OracleVariant {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stationary" => Ok(Self::Stationary),
            "step_augmented" => Ok(Self::StepAugmented),
            other => Err(OracleError::UnknownVariant(other.to_string())),
        }
    }
}

impl OracleVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stationary => "stationary",
            Self::StepAugmented => "step_augmented",
        }
    }
}

const SWEEP_CAP: usize = 1000;
const TOLERANCE: f64 = 1e-12;

/// Q-values for every non-terminal cell, keyed by `(y, x, step)`. The
/// stationary variant stores step 0 only.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub task: GridTask,
    pub gamma: f64,
    pub variant: OracleVariant,
    values: BTreeMap<(i32, i32, u32), [f64; 4]>,
}

impl QTable {
    /// Values at `(cell, step)`; stationary tables ignore `step`.
    pub fn values(&self, cell: (i32, i32), step: u32) -> Option<&[f64; 4]> {
        let step = match self.variant {
            OracleVariant::Stationary => 0,
            OracleVariant::StepAugmented => step,
        };
        self.values.get(&(cell.0, cell.1, step))
    }

    pub fn q(&self, cell: (i32, i32), step: u32, action: GridAction) -> Option<f64> {
        self.values(cell, step).map(|v| v[action as usize])
    }

    /// Per-cell values used when comparing against a network, which has no
    /// step input: the stationary values, or the step-0 values.
    pub fn cell_values(&self, cell: (i32, i32)) -> Option<&[f64; 4]> {
        self.values(cell, 0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(i32, i32, u32), &[f64; 4])> {
        self.values.iter()
    }

    pub fn cells(&self) -> Vec<(i32, i32)> {
        self.task.non_terminal_cells()
    }

    /// Aligned text table, one row per (cell[, step]).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} oracle, gamma = {}, goal {:?}, hazard {:?}, obstacle {:?}",
            self.variant.as_str(),
            self.gamma,
            self.task.goal,
            self.task.hazard,
            self.task.obstacle
        );
        let step_col = self.variant == OracleVariant::StepAugmented;
        let _ = write!(out, "{:>6}", "cell");
        if step_col {
            let _ = write!(out, " {:>4}", "step");
        }
        for a in GridAction::ALL {
            let _ = write!(out, " {:>9}", a.name());
        }
        let _ = writeln!(out, "  best");
        for (&(y, x, step), v) in &self.values {
            let _ = write!(out, "{:>6}", format!("({y},{x})"));
            if step_col {
                let _ = write!(out, " {step:>4}");
            }
            for q in v {
                let _ = write!(out, " {q:>9.3}");
            }
            let _ = writeln!(out, "  {}", GridAction::ALL[argmax(v)].name());
        }
        out
    }

    /// `y,x,action,q` (stationary) or `y,x,step,action,q` (step-augmented).
    /// The obstacle cell is listed only when asked for.
    pub fn to_csv(&self, include_obstacle: bool) -> String {
        let step_col = self.variant == OracleVariant::StepAugmented;
        let mut out = String::from(if step_col { "y,x,step,action,q\n" } else { "y,x,action,q\n" });
        for (&(y, x, step), v) in &self.values {
            if !include_obstacle && (y, x) == self.task.obstacle {
                continue;
            }
            for a in GridAction::ALL {
                if step_col {
                    let _ = writeln!(out, "{y},{x},{step},{},{}", a.name(), v[a as usize]);
                } else {
                    let _ = writeln!(out, "{y},{x},{},{}", a.name(), v[a as usize]);
                }
            }
        }
        out
    }
}

pub fn solve_grid_q(task: GridTask, gamma: f64, variant: OracleVariant) -> Result<QTable, OracleError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(OracleError::BadGamma(gamma));
    }
    if !task.is_valid() {
        return Err(OracleError::BadTask);
    }
    let values = match variant {
        OracleVariant::Stationary => value_iteration(task, gamma)?,
        OracleVariant::StepAugmented => backward_induction(task, gamma),
    };
    Ok(QTable {
        task,
        gamma,
        variant,
        values,
    })
}

fn value_iteration(task: GridTask, gamma: f64) -> Result<BTreeMap<(i32, i32, u32), [f64; 4]>, OracleError> {
    let cells = task.non_terminal_cells();
    let mut values: BTreeMap<(i32, i32, u32), [f64; 4]> = cells.iter().map(|&(y, x)| ((y, x, 0), [0.0; 4])).collect();
    for _ in 0..SWEEP_CAP {
        let mut change: f64 = 0.0;
        for &cell in &cells {
            for a in GridAction::ALL {
                let next = moved(cell, a);
                let (r, terminal) = task.stationary_entry_reward(next);
                let q = if terminal {
                    r
                } else {
                    let v = values[&(next.0, next.1, 0)];
                    r + gamma * v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                };
                let slot = &mut values.get_mut(&(cell.0, cell.1, 0)).expect("cell present")[a as usize];
                change = change.max((q - *slot).abs());
                *slot = q;
            }
        }
        if change < TOLERANCE {
            return Ok(values);
        }
    }
    Err(OracleError::NoConvergence(SWEEP_CAP))
}

fn backward_induction(task: GridTask, gamma: f64) -> BTreeMap<(i32, i32, u32), [f64; 4]> {
    let cells = task.non_terminal_cells();
    let mut values = BTreeMap::new();
    for step in (0..=MAX_STEPS).rev() {
        for &(y, x) in &cells {
            let mut row = [0.0; 4];
            for a in GridAction::ALL {
                let (r, outcome) = task.entry_reward(moved((y, x), a), step);
                row[a as usize] = if outcome.is_terminal() {
                    r
                } else if step + 1 > MAX_STEPS {
                    FROZEN_REWARD
                } else {
                    let (ny, nx) = moved((y, x), a);
                    let v: &[f64; 4] = &values[&(ny, nx, step + 1)];
                    r + gamma * v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                };
            }
            values.insert((y, x, step), row);
        }
    }
    values
}

/// Exhaustive recursion through the simulator over every continuation,
/// playing optimally after `action`. Independent of the tables above.
pub fn brute_force_q(cell: (i32, i32), step: u32, action: GridAction, task: GridTask, gamma: f64) -> f64 {
    let env = GridWorld::new(task, StartMode::Fixed);
    fn go(env: &GridWorld, s: &GridState, a: usize, gamma: f64) -> f64 {
        let t = env.step(s, a).expect("recursion only visits live states");
        if t.terminal() {
            return t.reward;
        }
        let best = (0..4).map(|b| go(env, &t.next_state, b, gamma)).fold(f64::NEG_INFINITY, f64::max);
        t.reward + gamma * best
    }
    go(&env, &GridState::new(cell.0, cell.1, step), action as usize, gamma)
}

/// Greedy action under `table`; ties go to the earliest of up, down, left, right.
pub fn optimal_action(table: &QTable, state: &GridState) -> Option<GridAction> {
    table.values(state.cell(), state.steps).map(|v| GridAction::ALL[argmax(v)])
}

/// The optimal trajectory's (cell, action) pairs from `start` under `table`.
pub fn optimal_path(table: &QTable, start: GridState) -> Vec<(GridState, GridAction)> {
    let env = GridWorld::new(table.task, StartMode::Fixed);
    let mut s = start;
    let mut out = Vec::new();
    while !env.is_terminal(&s) {
        let Some(a) = optimal_action(table, &s) else { break };
        out.push((s, a));
        s = env.step(&s, a as usize).expect("live state").next_state;
    }
    out
}

/// A policy that can be queried at any non-terminal state.
pub trait Expert<S> {
    fn action(&self, state: &S) -> usize;
}

/// Grid expert: greedy on the stationary oracle.
#[derive(Debug, Clone)]
pub struct GridExpert {
    table: QTable,
}

impl GridExpert {
    pub fn new(task: GridTask) -> Self {
        let table = solve_grid_q(task, 1.0, OracleVariant::Stationary).expect("valid task converges");
        Self { table }
    }

    pub fn from_table(table: QTable) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }
}

impl Expert<GridState> for GridExpert {
    fn action(&self, state: &GridState) -> usize {
        optimal_action(&self.table, state).map_or(0, |a| a as usize)
    }
}

/// Scripted intersection expert.
///
/// Inside the lane it always goes. Before the lane it goes only while the
/// crossing is clear for the task's gap (see [`Intersection::crossing_clear`])
/// and otherwise waits. Ado motion over a crossing is deterministic; cars
/// spawned meanwhile appear at the top of the lane, too far away to matter.
#[derive(Debug, Clone)]
pub struct IntersectionExpert {
    env: Intersection,
}

impl IntersectionExpert {
    pub fn new(env: Intersection) -> Self {
        Self { env }
    }

    pub fn safe_to_enter(&self, state: &IntersectionState) -> bool {
        self.env.crossing_clear(state, self.env.required_gap)
    }
}

impl Expert<IntersectionState> for IntersectionExpert {
    /// Committed once inside the lane; otherwise goes only when holding
    /// `go` from here crosses cleanly through a wide enough gap.
    fn action(&self, state: &IntersectionState) -> usize {
        if self.env.params.in_lane(state.ego_x) || self.safe_to_enter(state) {
            IntersectionAction::Go as usize
        } else {
            IntersectionAction::Stop as usize
        }
    }
}
