use crate::error::{Error, Result};
use crate::grid::{Action, LandmarkId};

use super::table::{QFunction, QTable};
use super::Task;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueIterationOptions {
    pub discount: f64,
    /// Sup-norm stopping tolerance on successive sweeps.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for ValueIterationOptions {
    fn default() -> Self {
        Self {
            discount: 0.99,
            tolerance: 1e-12,
            max_sweeps: 100_000,
        }
    }
}

fn backup(task: &Task, q: &QTable, state: LandmarkId, action: Action) -> f64 {
    let t = task
        .grid
        .step(&task.rewards, state, action, task.goal)
        .expect("backup is only taken at in-bounds non-goal states");
    if t.terminal {
        t.reward
    } else {
        t.reward + q.discount() * q.max_q(t.next_state)
    }
}

/// Solves for the optimal action values by synchronous Bellman sweeps.
///
/// Stops once a sweep changes no entry by more than `tolerance`; since the
/// operator is a `discount`-contraction the residual of the returned table
/// is then at most `discount * tolerance`.
pub fn value_iteration(task: &Task, opts: &ValueIterationOptions) -> Result<QTable> {
    task.validate()?;
    if !(opts.tolerance > 0.0) {
        return Err(Error::Config("value iteration tolerance must be positive".into()));
    }
    if !(opts.discount > 0.0 && opts.discount < 1.0) {
        return Err(Error::Config("discount must lie in (0, 1)".into()));
    }

    let mut q = QTable::zeros(task.grid, task.goal, opts.discount);
    let mut delta = f64::INFINITY;
    for _ in 0..opts.max_sweeps {
        let mut next = q.clone();
        delta = 0.0;
        for s in task.grid.landmarks().filter(|&s| s != task.goal) {
            let row = next.row_mut(s);
            for a in Action::ALL {
                let v = backup(task, &q, s, a);
                delta = f64::max(delta, (v - row[a.index()]).abs());
                row[a.index()] = v;
            }
        }
        q = next;
        if delta <= opts.tolerance {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_sweeps,
        residual: delta,
    })
}

/// Largest `|T Q - Q|` over all non-goal state-action pairs.
pub fn bellman_residual(task: &Task, q: &QTable) -> f64 {
    task.grid
        .landmarks()
        .filter(|&s| s != task.goal)
        .flat_map(|s| Action::ALL.map(|a| (s, a)))
        .map(|(s, a)| (backup(task, q, s, a) - q.q(s, a)).abs())
        .fold(0.0, f64::max)
}

/// Actions within `tol` of the best value at `state`.
pub fn optimal_action_set<Q: QFunction + ?Sized>(q: &Q, state: LandmarkId, tol: f64) -> Vec<Action> {
    let best = q.max_q(state);
    Action::ALL
        .into_iter()
        .filter(|&a| q.q(state, a) >= best - tol)
        .collect()
}
