use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, LandmarkId};

/// Anything that scores state-action pairs. The tabular [`QTable`] is the
/// reference implementation; a function approximator would plug in here.
pub trait QFunction {
    fn q(&self, state: LandmarkId, action: Action) -> f64;

    /// Greedy action; ties go to the lowest [`Action`] index.
    fn greedy(&self, state: LandmarkId) -> Action {
        let mut best = Action::Forward;
        let mut best_q = self.q(state, best);
        for &a in &Action::ALL[1..] {
            let q = self.q(state, a);
            if q > best_q {
                best = a;
                best_q = q;
            }
        }
        best
    }

    fn max_q(&self, state: LandmarkId) -> f64 {
        Action::ALL
            .iter()
            .map(|&a| self.q(state, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Dense action values, one row of four per landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    grid: GridSpec,
    goal: LandmarkId,
    discount: f64,
    values: Vec<[f64; 4]>,
}

impl QTable {
    pub fn zeros(grid: GridSpec, goal: LandmarkId, discount: f64) -> Self {
        Self {
            values: vec![[0.0; 4]; grid.len()],
            grid,
            goal,
            discount,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn goal(&self) -> LandmarkId {
        self.goal
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn row(&self, state: LandmarkId) -> &[f64; 4] {
        &self.values[self.grid.index(state)]
    }

    pub(crate) fn row_mut(&mut self, state: LandmarkId) -> &mut [f64; 4] {
        let i = self.grid.index(state);
        &mut self.values[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (LandmarkId, &[f64; 4])> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, row)| (self.grid.from_index(i), row))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    pub fn greedy_policy(&self) -> PolicyTable {
        PolicyTable::from_q(&self.grid, self.goal, self)
    }
}

impl QFunction for QTable {
    fn q(&self, state: LandmarkId, action: Action) -> f64 {
        self.values[self.grid.index(state)][action.index()]
    }
}

/// Greedy action per non-goal landmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTable {
    cols: usize,
    rows: usize,
    goal: LandmarkId,
    actions: Vec<Option<Action>>,
}

impl PolicyTable {
    pub fn from_q<Q: QFunction + ?Sized>(grid: &GridSpec, goal: LandmarkId, q: &Q) -> Self {
        let actions = grid
            .landmarks()
            .map(|s| (s != goal).then(|| q.greedy(s)))
            .collect();
        Self {
            cols: grid.cols,
            rows: grid.rows,
            goal,
            actions,
        }
    }

    /// Builds a policy from an explicit assignment; every non-goal landmark
    /// must be covered.
    pub fn from_fn(grid: &GridSpec, goal: LandmarkId, mut f: impl FnMut(LandmarkId) -> Action) -> Self {
        let actions = grid.landmarks().map(|s| (s != goal).then(|| f(s))).collect();
        Self {
            cols: grid.cols,
            rows: grid.rows,
            goal,
            actions,
        }
    }

    pub(crate) fn from_parts(cols: usize, rows: usize, goal: LandmarkId, actions: Vec<Option<Action>>) -> Self {
        Self {
            cols,
            rows,
            goal,
            actions,
        }
    }

    pub fn goal(&self) -> LandmarkId {
        self.goal
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    fn index(&self, state: LandmarkId) -> Option<usize> {
        (state.col < self.cols && state.row < self.rows).then(|| state.row * self.cols + state.col)
    }

    /// Action at `state`; `None` at the goal or off the grid.
    pub fn action(&self, state: LandmarkId) -> Option<Action> {
        self.index(state).and_then(|i| self.actions[i])
    }

    pub fn set(&mut self, state: LandmarkId, action: Action) -> Result<()> {
        if state == self.goal {
            return Err(Error::InvalidCall("the goal has no policy action".into()));
        }
        let i = self.index(state).ok_or(Error::OutOfBounds {
            col: state.col as i64,
            row: state.row as i64,
            cols: self.cols,
            rows: self.rows,
        })?;
        self.actions[i] = Some(action);
        Ok(())
    }

    /// `(landmark, action)` for every non-goal landmark, flat-index order.
    pub fn entries(&self) -> impl Iterator<Item = (LandmarkId, Action)> + '_ {
        self.actions.iter().enumerate().filter_map(move |(i, a)| {
            a.map(|a| {
                (
                    LandmarkId {
                        col: i % self.cols,
                        row: i / self.cols,
                    },
                    a,
                )
            })
        })
    }

    /// True if the policy shape matches `grid`.
    pub fn fits(&self, grid: &GridSpec) -> bool {
        self.cols == grid.cols && self.rows == grid.rows
    }
}
