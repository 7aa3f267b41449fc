//! Unprotected intersection crossing.
//!
//! The ego car drives left-to-right along a horizontal lane; ado cars drive
//! top-to-bottom along a vertical lane and have right of way. Cars are
//! circles. The ego either stops or goes at a fixed velocity.

use super::{EnvError, Environment, Outcome, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VISIBLE_ADOS: usize = 10;
pub const NUM_FEATURES: usize = VISIBLE_ADOS + 6;
/// Feature value for an empty ado slot.
pub const GAP_SENTINEL: f64 = -1000.0;

const SUCCESS_REWARD: f64 = 3000.0;
const UNSAFE_REWARD: f64 = -9500.0;
const COLLISION_REWARD: f64 = -9500.0;
const FROZEN_REWARD: f64 = -20000.0;
const PROGRESS_REWARD: f64 = -1.0;
const NO_PROGRESS_REWARD: f64 = -6.0;

const FLAG_GAPS: [f64; 2] = [80.0, 120.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntersectionAction {
    Stop = 0,
    Go = 1,
}

/// Geometry, velocities (px/step) and spawn process.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionParams {
    pub world_size: f64,
    pub ego_lane_y: f64,
    pub ado_lane_x: f64,
    pub lane_width: f64,
    pub car_radius: f64,
    pub ego_velocity: f64,
    pub ado_velocity: f64,
    pub ego_start_x: f64,
    pub spawn_prob: f64,
    pub min_spawn_gap: f64,
    pub max_steps: u32,
    /// Network input for pixel features is `(v - input_center) / input_scale`.
    pub input_center: f64,
    pub input_scale: f64,
}

impl Default for IntersectionParams {
    fn default() -> Self {
        Self {
            world_size: 600.0,
            ego_lane_y: 300.0,
            ado_lane_x: 300.0,
            lane_width: 60.0,
            car_radius: 15.0,
            ego_velocity: 5.0,
            ado_velocity: 5.0,
            ego_start_x: 225.0,
            spawn_prob: 0.1,
            min_spawn_gap: 40.0,
            max_steps: 500,
            input_center: 0.0,
            input_scale: 600.0,
        }
    }
}

impl IntersectionParams {
    pub fn lane_left(&self) -> f64 {
        self.ado_lane_x - self.lane_width / 2.0
    }

    pub fn lane_right(&self) -> f64 {
        self.ado_lane_x + self.lane_width / 2.0
    }

    pub fn in_lane(&self, ego_x: f64) -> bool {
        ego_x > self.lane_left() && ego_x < self.lane_right()
    }

    pub fn collides(&self, ego_x: f64, ego_y: f64, ado_y: f64) -> bool {
        let (dx, dy) = (ego_x - self.ado_lane_x, ego_y - ado_y);
        (dx * dx + dy * dy).sqrt() < 2.0 * self.car_radius
    }

    /// Vertical distance between the nearest ado below the ego lane (y >= lane)
    /// and the nearest ado above it. Infinite when either side is empty.
    pub fn straddling_gap(&self, ado: &[f64]) -> f64 {
        let lane = self.ego_lane_y;
        let below = ado.iter().copied().filter(|&y| y >= lane).fold(f64::INFINITY, f64::min);
        let above = ado.iter().copied().filter(|&y| y < lane).fold(f64::NEG_INFINITY, f64::max);
        if below.is_finite() && above.is_finite() {
            below - above
        } else {
            f64::INFINITY
        }
    }

    /// Steps of pure ado motion needed to fill the lane at reset.
    fn warmup_steps(&self) -> usize {
        (self.world_size / self.ado_velocity).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionState {
    pub ego_x: f64,
    pub ego_y: f64,
    /// Ado y-coordinates on the vertical lane, oldest (lowest on screen) first,
    /// so strictly decreasing.
    pub ado: Vec<f64>,
    pub steps: u32,
    /// Gap measured when the ego entered the ado lane.
    pub entry_gap: Option<f64>,
    pub outcome: Outcome,
    rng: ChaCha8Rng,
}

impl IntersectionState {
    /// Builds a state from explicit positions; `seed` drives future spawns.
    pub fn from_parts(ego_x: f64, ego_y: f64, ado: Vec<f64>, steps: u32, seed: u64) -> Self {
        Self {
            ego_x,
            ego_y,
            ado,
            steps,
            entry_gap: None,
            outcome: Outcome::Ongoing,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub params: IntersectionParams,
    /// Minimum gap (px) that counts as a safe crossing.
    pub required_gap: f64,
}

impl Intersection {
    pub fn new(params: IntersectionParams, required_gap: f64) -> Self {
        Self { params, required_gap }
    }

    /// Whether holding `go` from `state` crosses through a straddling gap of
    /// at least `threshold` without touching an ado. Ado cars move
    /// deterministically; new spawns enter far above the lane and cannot
    /// matter within one crossing.
    pub fn crossing_clear(&self, state: &IntersectionState, threshold: f64) -> bool {
        let p = &self.params;
        if state.entry_gap.is_some_and(|g| g < threshold) {
            return false;
        }
        let mut x = state.ego_x;
        let mut ado = state.ado.clone();
        let mut entered = state.entry_gap.is_some();
        while x < p.lane_right() {
            x += p.ego_velocity;
            for y in &mut ado {
                *y += p.ado_velocity;
            }
            if !entered && p.in_lane(x) {
                entered = true;
                if p.straddling_gap(&ado) < threshold {
                    return false;
                }
            }
            if ado.iter().any(|&y| p.collides(x, state.ego_y, y)) {
                return false;
            }
        }
        true
    }

    fn advance_ados(&self, ado: &mut Vec<f64>, rng: &mut ChaCha8Rng) {
        let p = &self.params;
        for y in ado.iter_mut() {
            *y += p.ado_velocity;
        }
        let limit = p.world_size + p.car_radius;
        ado.retain(|&y| y <= limit);
        // Draw every step so the stream position does not depend on the lane.
        let spawn = rng.gen::<f64>() < p.spawn_prob;
        let spawn_y = 0.0;
        if spawn && ado.last().is_none_or(|&last| last - spawn_y >= p.min_spawn_gap) {
            ado.push(spawn_y);
        }
    }
}

impl Environment for Intersection {
    type State = IntersectionState;

    fn num_actions(&self) -> usize {
        2
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> IntersectionState {
        let mut inner = ChaCha8Rng::seed_from_u64(rng.gen());
        let mut ado = Vec::new();
        for _ in 0..self.params.warmup_steps() {
            self.advance_ados(&mut ado, &mut inner);
        }
        IntersectionState {
            ego_x: self.params.ego_start_x,
            ego_y: self.params.ego_lane_y,
            ado,
            steps: 0,
            entry_gap: None,
            outcome: Outcome::Ongoing,
            rng: inner,
        }
    }

    fn step(&self, state: &IntersectionState, action: usize) -> Result<Transition<IntersectionState>, EnvError> {
        if state.outcome.is_terminal() {
            return Err(EnvError::TerminalState);
        }
        let go = match action {
            0 => false,
            1 => true,
            _ => return Err(EnvError::BadAction { action, num_actions: 2 }),
        };
        let p = &self.params;
        let mut next = state.clone();
        if go {
            next.ego_x += p.ego_velocity;
        }
        self.advance_ados(&mut next.ado, &mut next.rng);
        next.steps += 1;

        if next.entry_gap.is_none() && p.in_lane(next.ego_x) {
            next.entry_gap = Some(p.straddling_gap(&next.ado));
        }

        let (reward, outcome) = if next.ado.iter().any(|&y| p.collides(next.ego_x, next.ego_y, y)) {
            (COLLISION_REWARD, Outcome::Collision)
        } else if next.ego_x >= p.lane_right() {
            // A crossing always passes through the lane, so the gap is cached.
            let gap = next.entry_gap.unwrap_or(f64::INFINITY);
            if gap >= self.required_gap {
                (SUCCESS_REWARD, Outcome::Success)
            } else {
                (UNSAFE_REWARD, Outcome::UnsafeCross)
            }
        } else if next.steps > p.max_steps {
            (FROZEN_REWARD, Outcome::Frozen)
        } else if go {
            (PROGRESS_REWARD, Outcome::Ongoing)
        } else {
            (NO_PROGRESS_REWARD, Outcome::Ongoing)
        };
        next.outcome = outcome;
        Ok(Transition {
            state: state.clone(),
            action,
            reward,
            next_state: next,
            outcome,
        })
    }

    fn is_terminal(&self, state: &IntersectionState) -> bool {
        state.outcome.is_terminal()
    }

    /// Ten nearest not-yet-passed ado y's (nearest first, padded), ego x, ego y,
    /// distance to the far lane edge, in-lane flag, and one flag per gap
    /// threshold (80, 120) set when going now would cross cleanly through
    /// a gap at least that wide.
    fn features(&self, state: &IntersectionState) -> Vec<f64> {
        let p = &self.params;
        let cleared = state.ego_y + 2.0 * p.car_radius;
        let mut f: Vec<f64> = state
            .ado
            .iter()
            .copied()
            .filter(|&y| y < cleared)
            .take(VISIBLE_ADOS)
            .collect();
        f.resize(VISIBLE_ADOS, GAP_SENTINEL);
        f.push(state.ego_x);
        f.push(state.ego_y);
        f.push((p.lane_right() - state.ego_x).max(0.0));
        f.push(if p.in_lane(state.ego_x) { 1.0 } else { 0.0 });
        for threshold in FLAG_GAPS {
            f.push(if self.crossing_clear(state, threshold) { 1.0 } else { 0.0 });
        }
        f
    }

    /// Pixel features shifted and scaled; flags unchanged.
    fn network_input(&self, state: &IntersectionState) -> Vec<f64> {
        let p = &self.params;
        let mut f = self.features(state);
        for v in &mut f[..VISIBLE_ADOS + 2] {
            *v = (*v - p.input_center) / p.input_scale;
        }
        f[VISIBLE_ADOS + 2] /= p.input_scale;
        f
    }

    fn is_success(&self, trajectory: &[Transition<IntersectionState>]) -> bool {
        trajectory.last().is_some_and(|t| t.outcome == Outcome::Success)
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}
