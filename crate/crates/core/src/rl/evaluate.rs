use crate::error::{Error, Result};
use crate::grid::{EpisodeLog, GridSpec, LandmarkId};
use crate::seed;

use super::table::PolicyTable;
use super::Task;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_steps: f64,
    pub success_rate: f64,
    pub mean_reward: f64,
    pub timeouts: usize,
    pub logs: Vec<EpisodeLog>,
}

/// Mean undiscounted return of shortest paths over uniform non-goal starts:
/// the best achievable expected episode reward.
pub fn optimal_mean_return(task: &Task) -> f64 {
    let goal = task.goal;
    let total: f64 = task
        .grid
        .landmarks()
        .filter(|&s| s != goal)
        .map(|s| task.rewards.optimal_return(s.manhattan(&goal)))
        .sum();
    total / (task.grid.len() - 1) as f64
}

/// Start states used by [`evaluate`]; episode `i` draws from its own seed.
pub fn evaluation_starts(grid: &GridSpec, goal: LandmarkId, episodes: usize, seed: u64) -> Result<Vec<LandmarkId>> {
    (0..episodes)
        .map(|i| grid.reset(goal, seed::derive(seed, i as u64)))
        .collect()
}

/// Mean grid distance to `goal` over all non-goal landmarks.
pub fn mean_manhattan_to_goal(grid: &GridSpec, goal: LandmarkId) -> f64 {
    let total: usize = grid.landmarks().map(|s| s.manhattan(&goal)).sum();
    total as f64 / (grid.len() - 1) as f64
}

/// Follows `policy` from `start` until the goal or the step limit.
pub fn rollout(task: &Task, policy: &PolicyTable, start: LandmarkId) -> Result<EpisodeLog> {
    if !policy.fits(&task.grid) || policy.goal() != task.goal {
        return Err(Error::InvalidCall("policy does not match the task grid or goal".into()));
    }
    let mut log = EpisodeLog::new(start, task.goal);
    let mut state = start;
    while state != task.goal && log.steps() < task.max_episode_steps {
        let action = policy
            .action(state)
            .ok_or(Error::IncompletePolicy(state))?;
        let t = task.grid.step(&task.rewards, state, action, task.goal)?;
        log.push(t);
        state = t.next_state;
    }
    Ok(log)
}

/// Greedy rollouts from seeded uniform starts. Truncated episodes count as
/// failures but still contribute their steps and reward to the means.
pub fn evaluate(task: &Task, policy: &PolicyTable, episodes: usize, seed: u64) -> Result<EvalSummary> {
    task.validate()?;
    let starts = evaluation_starts(&task.grid, task.goal, episodes, seed)?;
    let logs = starts
        .into_iter()
        .map(|s| rollout(task, policy, s))
        .collect::<Result<Vec<_>>>()?;

    let n = logs.len().max(1) as f64;
    let successes = logs.iter().filter(|l| l.reached_goal()).count();
    Ok(EvalSummary {
        episodes,
        mean_steps: logs.iter().map(|l| l.steps() as f64).sum::<f64>() / n,
        success_rate: successes as f64 / n,
        mean_reward: logs.iter().map(|l| l.cumulative_reward).sum::<f64>() / n,
        timeouts: logs.len() - successes,
        logs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Action, RewardSpec};
    use crate::rl::{value_iteration, ValueIterationOptions};

    fn task() -> Task {
        Task::new(
            GridSpec::default(),
            RewardSpec::default(),
            LandmarkId { col: 5, row: 5 },
        )
    }

    fn optimal(t: &Task) -> PolicyTable {
        value_iteration(t, &ValueIterationOptions::default())
            .unwrap()
            .greedy_policy()
    }

    #[test]
    fn adjacent_start_takes_one_step() {
        let t = task();
        let log = rollout(&t, &optimal(&t), LandmarkId { col: 5, row: 4 }).unwrap();
        assert_eq!(log.steps(), 1);
        assert_eq!(log.cumulative_reward, 0.1);
    }

    #[test]
    fn optimal_rollout_length_is_manhattan_for_all_starts() {
        let t = task();
        let p = optimal(&t);
        for s in t.grid.landmarks().filter(|&s| s != t.goal) {
            let log = rollout(&t, &p, s).unwrap();
            assert_eq!(log.steps(), s.manhattan(&t.goal));
            assert!(log.reached_goal());
        }
    }

    #[test]
    fn enumerated_mean_distance() {
        // 10 * (5+4+3+2+1+0+1+2+3+4) per axis, over 99 starts.
        let grid = GridSpec::default();
        let m = mean_manhattan_to_goal(&grid, LandmarkId { col: 5, row: 5 });
        assert!((m - 500.0 / 99.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_mean_return_averages_rollouts() {
        let t = task();
        let p = optimal(&t);
        let starts: Vec<LandmarkId> = t.grid.landmarks().filter(|&s| s != t.goal).collect();
        let direct: f64 = starts.iter().map(|&s| rollout(&t, &p, s).unwrap().cumulative_reward).sum::<f64>() / 99.0;
        assert!((optimal_mean_return(&t) - direct).abs() < 1e-12);
        assert!((optimal_mean_return(&t) - (0.1 - 0.0001 * (500.0 / 99.0 - 1.0))).abs() < 1e-12);
    }

    #[test]
    fn mean_steps_match_drawn_starts_exactly() {
        let t = task();
        let summary = evaluate(&t, &optimal(&t), 100, 17).unwrap();
        let starts = evaluation_starts(&t.grid, t.goal, 100, 17).unwrap();
        let expected = starts.iter().map(|s| s.manhattan(&t.goal) as f64).sum::<f64>() / 100.0;
        assert_eq!(summary.mean_steps, expected);
        assert_eq!(summary.success_rate, 1.0);
        assert_eq!(summary.timeouts, 0);
    }

    #[test]
    fn cyclic_policy_times_out() {
        let t = task();
        // Ping-pong between columns 0 and 1.
        let p = PolicyTable::from_fn(&t.grid, t.goal, |s| if s.col == 0 { Action::Right } else { Action::Left });
        let summary = evaluate(&t, &p, 20, 3).unwrap();
        assert!(summary.success_rate < 1.0);
        assert!(summary.timeouts > 0);
        assert!(summary.logs.iter().all(|l| l.steps() <= 200));
    }
}
