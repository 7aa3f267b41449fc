use super::{EnvError, Environment, Outcome, Transition};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const GRID_SIZE: i32 = 3;

const GOAL_REWARD: f64 = 20.0;
const HAZARD_REWARD: f64 = -20.0;
const OBSTACLE_REWARD: f64 = -5.0;
const OUT_OF_BOUNDS_REWARD: f64 = -100.0;
pub(crate) const FROZEN_REWARD: f64 = -100.0;
const LIVING_REWARD: f64 = -1.0;
/// An episode freezes once the step count exceeds this.
pub(crate) const MAX_STEPS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            GridAction::Up => (-1, 0),
            GridAction::Down => (1, 0),
            GridAction::Left => (0, -1),
            GridAction::Right => (0, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridAction::Up => "up",
            GridAction::Down => "down",
            GridAction::Left => "left",
            GridAction::Right => "right",
        }
    }
}

/// Agent position (row `y`, column `x`) and the number of actions taken.
/// Coordinates may leave the grid only in a terminal state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridState {
    pub y: i32,
    pub x: i32,
    pub steps: u32,
}

impl GridState {
    pub fn new(y: i32, x: i32, steps: u32) -> Self {
        Self { y, x, steps }
    }

    pub fn cell(&self) -> (i32, i32) {
        (self.y, self.x)
    }

    pub fn in_bounds(&self) -> bool {
        (0..GRID_SIZE).contains(&self.y) && (0..GRID_SIZE).contains(&self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridTask {
    pub goal: (i32, i32),
    pub hazard: (i32, i32),
    pub obstacle: (i32, i32),
}

impl GridTask {
    pub const ORIGINAL: GridTask = GridTask {
        goal: (0, 0),
        hazard: (1, 2),
        obstacle: (1, 0),
    };

    /// Goal and hazard swapped; the obstacle stays put.
    pub fn adapted(self) -> GridTask {
        GridTask {
            goal: self.hazard,
            hazard: self.goal,
            obstacle: self.obstacle,
        }
    }

    pub fn is_terminal_cell(&self, cell: (i32, i32)) -> bool {
        cell == self.goal || cell == self.hazard
    }

    /// Cells the agent can occupy without the episode ending: the white cells
    /// plus the obstacle, in raster order.
    pub fn non_terminal_cells(&self) -> Vec<(i32, i32)> {
        raster().filter(|&c| !self.is_terminal_cell(c)).collect()
    }

    /// Non-terminal cells other than the obstacle, in raster order.
    pub fn white_cells(&self) -> Vec<(i32, i32)> {
        raster()
            .filter(|&c| !self.is_terminal_cell(c) && c != self.obstacle)
            .collect()
    }

    /// Reward and outcome for moving onto `cell` having already taken
    /// `steps_before` actions, ignoring the step cap.
    pub(crate) fn entry_reward(&self, cell: (i32, i32), steps_before: u32) -> (f64, Outcome) {
        let (y, x) = cell;
        if !((0..GRID_SIZE).contains(&y) && (0..GRID_SIZE).contains(&x)) {
            (OUT_OF_BOUNDS_REWARD, Outcome::OutOfBounds)
        } else if cell == self.goal {
            (GOAL_REWARD, Outcome::Success)
        } else if cell == self.hazard {
            (HAZARD_REWARD, Outcome::Hazard)
        } else if cell == self.obstacle {
            (OBSTACLE_REWARD, Outcome::Ongoing)
        } else if steps_before == 0 {
            (0.0, Outcome::Ongoing)
        } else {
            (LIVING_REWARD, Outcome::Ongoing)
        }
    }

    /// Per-cell reward used by the stationary oracle: no first-step
    /// exemption and no step cap.
    pub(crate) fn stationary_entry_reward(&self, cell: (i32, i32)) -> (f64, bool) {
        let (r, o) = self.entry_reward(cell, 1);
        (r, o.is_terminal())
    }

    pub fn is_valid(&self) -> bool {
        let cells = [self.goal, self.hazard, self.obstacle];
        let in_grid = |(y, x): (i32, i32)| (0..GRID_SIZE).contains(&y) && (0..GRID_SIZE).contains(&x);
        cells.iter().all(|&c| in_grid(c)) && self.goal != self.hazard && self.goal != self.obstacle && self.hazard != self.obstacle
    }
}

fn raster() -> impl Iterator<Item = (i32, i32)> {
    (0..GRID_SIZE).flat_map(|y| (0..GRID_SIZE).map(move |x| (y, x)))
}

pub(crate) fn moved(cell: (i32, i32), action: GridAction) -> (i32, i32) {
    let (dy, dx) = action.delta();
    (cell.0 + dy, cell.1 + dx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    /// Always the far corner (2, 2).
    Fixed,
    /// Uniform over the white cells.
    Random,
    /// Uniform over every non-terminal cell, obstacle included.
    AllCells,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub task: GridTask,
    pub start: StartMode,
}

impl GridWorld {
    pub const FIXED_START: (i32, i32) = (2, 2);

    pub fn new(task: GridTask, start: StartMode) -> Self {
        Self { task, start }
    }

    /// Distinct start states, each equally likely.
    pub fn start_states(&self) -> Vec<GridState> {
        match self.start {
            StartMode::Fixed => vec![GridState::new(Self::FIXED_START.0, Self::FIXED_START.1, 0)],
            StartMode::Random => cells_to_states(self.task.white_cells()),
            StartMode::AllCells => cells_to_states(self.task.non_terminal_cells()),
        }
    }
}

fn cells_to_states(cells: Vec<(i32, i32)>) -> Vec<GridState> {
    cells.into_iter().map(|(y, x)| GridState::new(y, x, 0)).collect()
}

impl Environment for GridWorld {
    type State = GridState;

    fn num_actions(&self) -> usize {
        4
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> GridState {
        let starts = self.start_states();
        if starts.len() == 1 {
            starts[0]
        } else {
            starts[rng.gen_range(0..starts.len())]
        }
    }

    fn step(&self, state: &GridState, action: usize) -> Result<Transition<GridState>, EnvError> {
        if self.is_terminal(state) {
            return Err(EnvError::TerminalState);
        }
        let act = GridAction::from_index(action).ok_or(EnvError::BadAction { action, num_actions: 4 })?;
        let cell = moved(state.cell(), act);
        let steps = state.steps + 1;
        let (mut reward, mut outcome) = self.task.entry_reward(cell, state.steps);
        if !outcome.is_terminal() && steps > MAX_STEPS {
            reward = FROZEN_REWARD;
            outcome = Outcome::Frozen;
        }
        Ok(Transition {
            state: *state,
            action,
            reward,
            next_state: GridState::new(cell.0, cell.1, steps),
            outcome,
        })
    }

    fn is_terminal(&self, state: &GridState) -> bool {
        !state.in_bounds() || self.task.is_terminal_cell(state.cell()) || state.steps > MAX_STEPS
    }

    fn features(&self, state: &GridState) -> Vec<f64> {
        vec![state.y as f64, state.x as f64]
    }

    /// Goal entered without ever moving onto the obstacle. Starting on the
    /// obstacle does not count against the episode.
    fn is_success(&self, trajectory: &[Transition<GridState>]) -> bool {
        let mut reached = false;
        for t in trajectory {
            if t.next_state.cell() == self.task.obstacle {
                return false;
            }
            if t.next_state.cell() == self.task.goal {
                reached = true;
            }
        }
        reached
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
