use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Action;

use super::table::{QFunction, QTable};
use super::Task;

/// Linear decay from `start` to `end` over `decay_episodes`, then flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: usize,
}

impl EpsilonSchedule {
    pub fn at(&self, episode: usize) -> f64 {
        if self.decay_episodes == 0 || episode >= self.decay_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: EpsilonSchedule,
    /// Starting value of every non-goal entry. The default, the goal reward,
    /// bounds every achievable return from above, so untried actions look
    /// attractive until they have been backed up at least once.
    pub initial_q: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            learning_rate: 1.0,
            discount: 0.99,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_episodes: 150,
            },
            initial_q: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::Config(format!(
                "discount must lie in (0, 1), got {}",
                self.discount
            )));
        }
        if !self.initial_q.is_finite() {
            return Err(Error::Config("initial_q must be finite".into()));
        }
        let e = &self.epsilon;
        if !((0.0..=1.0).contains(&e.start) && (0.0..=1.0).contains(&e.end)) {
            return Err(Error::Config("epsilon bounds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRecord {
    pub episode: usize,
    pub reward: f64,
    pub steps: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingCurve {
    pub records: Vec<CurveRecord>,
}

impl TrainingCurve {
    /// Trailing moving average of episode reward; entry `i` averages
    /// episodes `i + 1 - window ..= i` and is `None` until a full window exists.
    pub fn moving_average(&self, window: usize) -> Vec<Option<f64>> {
        assert!(window > 0);
        let mut out = Vec::with_capacity(self.records.len());
        let mut sum = 0.0;
        for (i, r) in self.records.iter().enumerate() {
            sum += r.reward;
            if i >= window {
                sum -= self.records[i - window].reward;
            }
            out.push((i + 1 >= window).then(|| sum / window as f64));
        }
        out
    }
}

pub fn write_curve_csv<W: Write>(mut out: W, curve: &TrainingCurve) -> std::io::Result<()> {
    writeln!(out, "episode,reward,steps,epsilon")?;
    for r in &curve.records {
        writeln!(out, "{},{},{},{}", r.episode, r.reward, r.steps, r.epsilon)?;
    }
    Ok(())
}

/// Epsilon-greedy tabular Q-learning.
///
/// One `ChaCha8` stream seeded from `cfg.seed` drives start states and
/// exploration, so identical configs give bit-identical tables.
pub fn train(task: &Task, cfg: &TrainConfig) -> Result<(QTable, TrainingCurve)> {
    task.validate()?;
    cfg.validate()?;

    let grid = &task.grid;
    let mut q = QTable::zeros(*grid, task.goal, cfg.discount);
    for s in grid.landmarks().filter(|&s| s != task.goal) {
        *q.row_mut(s) = [cfg.initial_q; 4];
    }
    let mut curve = TrainingCurve::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon.at(episode);
        let mut state = grid.reset_with(task.goal, &mut rng)?;
        let mut reward = 0.0;
        let mut steps = 0;

        while steps < task.max_episode_steps {
            let action = if rng.random::<f64>() < epsilon {
                Action::ALL[rng.random_range(0..4)]
            } else {
                q.greedy(state)
            };
            let t = grid.step(&task.rewards, state, action, task.goal)?;
            let target = if t.terminal {
                t.reward
            } else {
                t.reward + cfg.discount * q.max_q(t.next_state)
            };
            let cell = &mut q.row_mut(state)[action.index()];
            *cell += cfg.learning_rate * (target - *cell);

            reward += t.reward;
            steps += 1;
            state = t.next_state;
            if t.terminal {
                break;
            }
        }

        curve.records.push(CurveRecord {
            episode,
            reward,
            steps,
            epsilon,
        });
    }

    Ok((q, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, LandmarkId, RewardSpec};
    use crate::rl::{optimal_action_set, value_iteration, ValueIterationOptions};

    fn task() -> Task {
        Task::new(
            GridSpec::default(),
            RewardSpec::default(),
            LandmarkId { col: 5, row: 5 },
        )
    }

    #[test]
    fn zero_episodes_leaves_table_untouched() {
        let cfg = TrainConfig {
            episodes: 0,
            initial_q: 0.0,
            ..Default::default()
        };
        let (q, curve) = train(&task(), &cfg).unwrap();
        assert!(q.iter().all(|(_, row)| *row == [0.0; 4]));
        assert!(curve.records.is_empty());

        let t = task();
        let (q, _) = train(&t, &TrainConfig { episodes: 0, ..Default::default() }).unwrap();
        for (s, row) in q.iter() {
            let expected = if s == t.goal { 0.0 } else { 0.1 };
            assert_eq!(*row, [expected; 4]);
        }
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let s = TrainConfig::default().epsilon;
        assert_eq!(s.at(0), 1.0);
        assert!((s.at(75) - 0.525).abs() < 1e-12);
        assert_eq!(s.at(150), 0.05);
        assert_eq!(s.at(10_000), 0.05);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            episodes: 300,
            seed: 9,
            ..Default::default()
        };
        let (a, ca) = train(&task(), &cfg).unwrap();
        let (b, cb) = train(&task(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
    }

    #[test]
    fn reference_config_recovers_oracle_policy() {
        let t = task();
        for seed in 0..5 {
            let (q, _) = train(&t, &TrainConfig { seed, ..Default::default() }).unwrap();
            let oracle = value_iteration(&t, &ValueIterationOptions::default()).unwrap();
            let agree = t
                .grid
                .landmarks()
                .filter(|&s| s != t.goal)
                .filter(|&s| optimal_action_set(&oracle, s, 1e-12).contains(&q.greedy(s)))
                .count();
            assert_eq!(agree, 99, "seed {seed}");
        }
        let (q, curve) = train(&t, &TrainConfig::default()).unwrap();
        assert_eq!(curve.records.len(), 2000);
        assert!(q.is_finite());
        assert_eq!(*q.row(t.goal), [0.0; 4]);
        let oracle = value_iteration(&t, &ValueIterationOptions::default()).unwrap();
        for s in t.grid.landmarks().filter(|&s| s != t.goal) {
            assert!(optimal_action_set(&oracle, s, 1e-12).contains(&q.greedy(s)), "state {s}");
        }
    }

    #[test]
    fn curve_bookkeeping() {
        let cfg = TrainConfig {
            episodes: 50,
            ..Default::default()
        };
        let (_, curve) = train(&task(), &cfg).unwrap();
        for (i, r) in curve.records.iter().enumerate() {
            assert_eq!(r.episode, i);
            assert!(r.steps >= 1 && r.steps <= 200);
            assert!((0.0..=1.0).contains(&r.epsilon));
        }
        let ma = curve.moving_average(20);
        assert!(ma[18].is_none());
        let manual: f64 = curve.records[..20].iter().map(|r| r.reward).sum::<f64>() / 20.0;
        assert!((ma[19].unwrap() - manual).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_hyperparameters() {
        let t = task();
        for cfg in [
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { discount: 1.0, ..Default::default() },
            TrainConfig {
                epsilon: EpsilonSchedule { start: 1.5, end: 0.0, decay_episodes: 10 },
                ..Default::default()
            },
        ] {
            assert!(matches!(train(&t, &cfg), Err(Error::Config(_))));
        }
    }
}
