//! The landmark lattice MDP.
//!
//! States are landmarks on a `cols x rows` lattice, actions are the four
//! cardinal moves, and transitions are deterministic. Moving off the lattice
//! is a collision: the agent stays in place and receives the collision
//! penalty instead of the step penalty.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_EPISODE_STEPS: usize = 200;

/// A position in the world frame, meters. `x` grows east, `y` grows north.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Geometry of the landmark lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cols: usize,
    pub rows: usize,
    pub spacing_x: f64,
    pub spacing_y: f64,
    /// World position of landmark (0, 0).
    pub origin: WorldPoint,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cols: 10,
            rows: 10,
            spacing_x: 40.0,
            spacing_y: 30.0,
            origin: WorldPoint::new(0.0, 0.0),
        }
    }
}

impl GridSpec {
    pub fn new(cols: usize, rows: usize, spacing_x: f64, spacing_y: f64, origin: WorldPoint) -> Result<Self> {
        let grid = Self {
            cols,
            rows,
            spacing_x,
            spacing_y,
            origin,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cols < 2 || self.rows < 2 {
            return Err(Error::Config(format!(
                "grid must be at least 2x2, got {}x{}",
                self.cols, self.rows
            )));
        }
        if !(self.spacing_x > 0.0 && self.spacing_y > 0.0) {
            return Err(Error::Config(format!(
                "grid spacing must be positive, got {} x {}",
                self.spacing_x, self.spacing_y
            )));
        }
        if !(self.origin.x.is_finite() && self.origin.y.is_finite()) {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Metric extent spanned by the landmarks, `(width, height)`.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.cols - 1) as f64 * self.spacing_x,
            (self.rows - 1) as f64 * self.spacing_y,
        )
    }

    pub fn landmark(&self, col: usize, row: usize) -> Result<LandmarkId> {
        LandmarkId::new(self, col, row)
    }

    pub fn contains(&self, id: LandmarkId) -> bool {
        id.col < self.cols && id.row < self.rows
    }

    /// Errors unless `id` lies on the lattice.
    pub fn check(&self, id: LandmarkId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                col: id.col as i64,
                row: id.row as i64,
                cols: self.cols,
                rows: self.rows,
            })
        }
    }

    pub fn index(&self, id: LandmarkId) -> usize {
        id.row * self.cols + id.col
    }

    pub fn from_index(&self, index: usize) -> LandmarkId {
        LandmarkId {
            col: index % self.cols,
            row: index / self.cols,
        }
    }

    /// All landmarks in flat-index order.
    pub fn landmarks(&self) -> impl Iterator<Item = LandmarkId> + '_ {
        (0..self.len()).map(|i| self.from_index(i))
    }

    /// World position of a landmark.
    pub fn landmark_position(&self, id: LandmarkId) -> Result<WorldPoint> {
        self.check(id)?;
        Ok(WorldPoint::new(
            self.origin.x + id.col as f64 * self.spacing_x,
            self.origin.y + id.row as f64 * self.spacing_y,
        ))
    }

    /// The cell reached by applying `action`, or `None` if it leaves the grid.
    pub fn displaced(&self, id: LandmarkId, action: Action) -> Option<LandmarkId> {
        let (dc, dr) = action.displacement();
        let col = id.col as i64 + dc;
        let row = id.row as i64 + dr;
        if col < 0 || row < 0 || col >= self.cols as i64 || row >= self.rows as i64 {
            None
        } else {
            Some(LandmarkId {
                col: col as usize,
                row: row as usize,
            })
        }
    }

    /// The four-neighborhood of `state`, indexed like [`Action::ALL`].
    pub fn neighbors(&self, state: LandmarkId) -> Result<Neighbors> {
        self.check(state)?;
        Ok(Neighbors(Action::ALL.map(|a| self.displaced(state, a))))
    }

    /// Spacing along the axis an action moves on.
    pub fn spacing_along(&self, action: Action) -> f64 {
        match action {
            Action::Forward | Action::Backward => self.spacing_y,
            Action::Left | Action::Right => self.spacing_x,
        }
    }

    /// Applies one MDP transition.
    pub fn step(&self, rewards: &RewardSpec, state: LandmarkId, action: Action, goal: LandmarkId) -> Result<Transition> {
        self.check(state)?;
        self.check(goal)?;
        if state == goal {
            return Err(Error::InvalidCall(format!(
                "step called at the goal {goal}; the episode must be reset"
            )));
        }
        let transition = match self.displaced(state, action) {
            None => Transition {
                state,
                action,
                reward: rewards.collision_penalty,
                next_state: state,
                terminal: false,
            },
            Some(next) if next == goal => Transition {
                state,
                action,
                reward: rewards.goal_reward,
                next_state: next,
                terminal: true,
            },
            Some(next) => Transition {
                state,
                action,
                reward: rewards.step_penalty,
                next_state: next,
                terminal: false,
            },
        };
        Ok(transition)
    }

    /// Draws a uniformly random non-goal start landmark from `seed`.
    pub fn reset(&self, goal: LandmarkId, seed: u64) -> Result<LandmarkId> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.reset_with(goal, &mut rng)
    }

    /// Like [`GridSpec::reset`] but drawing from an existing generator.
    pub fn reset_with<R: Rng + ?Sized>(&self, goal: LandmarkId, rng: &mut R) -> Result<LandmarkId> {
        self.check(goal)?;
        let goal_index = self.index(goal);
        let mut index = rng.random_range(0..self.len() - 1);
        if index >= goal_index {
            index += 1;
        }
        Ok(self.from_index(index))
    }
}

/// A landmark on the lattice. Construct through [`GridSpec::landmark`] to
/// get bounds checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LandmarkId {
    pub col: usize,
    pub row: usize,
}

impl LandmarkId {
    pub fn new(grid: &GridSpec, col: usize, row: usize) -> Result<Self> {
        let id = Self { col, row };
        grid.check(id)?;
        Ok(id)
    }

    /// Grid-step distance `|dcol| + |drow|`.
    pub fn manhattan(&self, other: &LandmarkId) -> usize {
        self.col.abs_diff(other.col) + self.row.abs_diff(other.row)
    }
}

impl fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

/// Cardinal moves, north-up: forward is +row.
///
/// Declaration order is the tie-breaking order for greedy policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Forward,
    Backward,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Forward, Action::Backward, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    /// Grid displacement `(dcol, drow)`.
    pub fn displacement(self) -> (i64, i64) {
        match self {
            Action::Forward => (0, 1),
            Action::Backward => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }

    /// Unit direction in the world frame.
    pub fn direction(self) -> WorldPoint {
        let (dc, dr) = self.displacement();
        WorldPoint::new(dc as f64, dr as f64)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::Backward => "backward",
            Action::Left => "left",
            Action::Right => "right",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Action::Forward),
            "backward" => Ok(Action::Backward),
            "left" => Ok(Action::Left),
            "right" => Ok(Action::Right),
            other => Err(format!("unknown action token '{other}'")),
        }
    }
}

/// Adjacent landmarks of a cell, one slot per [`Action`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbors([Option<LandmarkId>; 4]);

impl Neighbors {
    pub fn get(&self, action: Action) -> Option<LandmarkId> {
        self.0[action.index()]
    }

    /// Present neighbors in action order.
    pub fn iter(&self) -> impl Iterator<Item = (Action, LandmarkId)> + '_ {
        Action::ALL
            .iter()
            .filter_map(move |&a| self.get(a).map(|id| (a, id)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub goal_reward: f64,
    pub collision_penalty: f64,
    pub step_penalty: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            goal_reward: 0.1,
            collision_penalty: -0.001,
            step_penalty: -0.0001,
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.goal_reward > 0.0 && self.collision_penalty < 0.0) {
            return Err(Error::Config(
                "rewards must satisfy goal_reward > 0 > collision_penalty".into(),
            ));
        }
        if !(self.step_penalty > self.collision_penalty) {
            return Err(Error::Config(
                "step_penalty must be less severe than collision_penalty".into(),
            ));
        }
        Ok(())
    }

    /// Undiscounted return of a shortest path `d` steps long.
    pub fn optimal_return(&self, d: usize) -> f64 {
        assert!(d >= 1);
        self.goal_reward + self.step_penalty * (d - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: LandmarkId,
    pub action: Action,
    pub reward: f64,
    pub next_state: LandmarkId,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub start: LandmarkId,
    pub goal: LandmarkId,
    pub transitions: Vec<Transition>,
    pub cumulative_reward: f64,
}

impl EpisodeLog {
    pub fn new(start: LandmarkId, goal: LandmarkId) -> Self {
        Self {
            start,
            goal,
            transitions: Vec::new(),
            cumulative_reward: 0.0,
        }
    }

    pub fn push(&mut self, transition: Transition) {
        self.cumulative_reward += transition.reward;
        self.transitions.push(transition);
    }

    pub fn steps(&self) -> usize {
        self.transitions.len()
    }

    pub fn reached_goal(&self) -> bool {
        self.transitions.last().is_some_and(|t| t.terminal)
    }
}

pub const EPISODE_CSV_HEADER: &str = "episode,step,state_col,state_row,action,reward,next_col,next_row,terminal";

/// Writes transitions of several episodes as CSV.
pub fn write_episodes_csv<W: Write>(mut out: W, episodes: &[EpisodeLog]) -> std::io::Result<()> {
    writeln!(out, "{EPISODE_CSV_HEADER}")?;
    for (e, log) in episodes.iter().enumerate() {
        for (s, t) in log.transitions.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                e,
                s,
                t.state.col,
                t.state.row,
                t.action,
                t.reward,
                t.next_state.col,
                t.next_state.row,
                t.terminal
            )?;
        }
    }
    Ok(())
}

pub fn save_episodes_csv(path: &Path, episodes: &[EpisodeLog]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_episodes_csv(std::io::BufWriter::new(file), episodes).map_err(|e| Error::io(path, e))
}
