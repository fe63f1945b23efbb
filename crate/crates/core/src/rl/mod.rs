//! Policy learning on the landmark MDP: tabular Q-learning, the exact
//! value-iteration oracle it is checked against, greedy-policy evaluation,
//! and the policy file format.

mod evaluate;
mod policy_io;
mod qlearning;
mod table;
mod value_iteration;

pub use evaluate::{evaluate, evaluation_starts, mean_manhattan_to_goal, optimal_mean_return, rollout, EvalSummary};
pub use policy_io::{load_policy, parse_policy, policy_to_string, save_policy, POLICY_FORMAT_VERSION};
pub use qlearning::{train, write_curve_csv, CurveRecord, EpsilonSchedule, TrainConfig, TrainingCurve};
pub use table::{PolicyTable, QFunction, QTable};
pub use value_iteration::{bellman_residual, optimal_action_set, value_iteration, ValueIterationOptions};

use crate::grid::{GridSpec, LandmarkId, RewardSpec, DEFAULT_MAX_EPISODE_STEPS};

/// The episodic task: a lattice, its rewards, and a fixed goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub grid: GridSpec,
    pub rewards: RewardSpec,
    pub goal: LandmarkId,
    pub max_episode_steps: usize,
}

impl Task {
    pub fn new(grid: GridSpec, rewards: RewardSpec, goal: LandmarkId) -> Self {
        Self {
            grid,
            rewards,
            goal,
            max_episode_steps: DEFAULT_MAX_EPISODE_STEPS,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        self.grid.validate()?;
        self.rewards.validate()?;
        LandmarkId::new(&self.grid, self.goal.col, self.goal.row)?;
        if self.max_episode_steps == 0 {
            return Err(crate::Error::Config("max_episode_steps must be positive".into()));
        }
        Ok(())
    }
}
