//! Closed-loop mission simulation: fly between landmarks, recognize arrival
//! from rendered observations, and follow the policy to the goal.

mod export;

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, LandmarkId, WorldPoint};
use crate::imagery::{landmark_descriptor_image, render_with, PerturbationSpec, Pose, World};
use crate::matching::{arrival_check, match_sets, rank_described, DescriptorSet, DetectorParams, MatchParams};
use crate::rl::PolicyTable;
use crate::seed;

pub use export::{export_trajectory, read_trajectory_csv, write_trajectory_csv, TrajectoryRow, MISSION_CSV_HEADER};

#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub start: LandmarkId,
    pub goal: LandmarkId,
    pub policy: PolicyTable,
    /// Meters flown per tick.
    pub control_step: f64,
    /// Ticks between match attempts.
    pub observation_period: usize,
    pub max_ticks: usize,
    pub perturbation: PerturbationSpec,
    pub matching: MatchParams,
}

impl MissionConfig {
    /// A mission with the reference kinematics and matching thresholds.
    pub fn new(start: LandmarkId, goal: LandmarkId, policy: PolicyTable) -> Self {
        Self {
            start,
            goal,
            policy,
            control_step: 1.0,
            observation_period: 2,
            max_ticks: 2000,
            perturbation: PerturbationSpec::identity(),
            matching: MatchParams::default(),
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        grid.check(self.start)?;
        grid.check(self.goal)?;
        if self.start == self.goal {
            return Err(Error::Config(format!("mission start and goal are both {}", self.goal)));
        }
        if !(self.control_step > 0.0) {
            return Err(Error::Config("mission.control_step_m must be positive".into()));
        }
        if self.observation_period == 0 {
            return Err(Error::Config("mission.observation_period must be positive".into()));
        }
        let diameter = (grid.cols + grid.rows - 2) as f64;
        let floor = diameter * grid.spacing_x.max(grid.spacing_y) / self.control_step;
        if (self.max_ticks as f64) <= floor {
            return Err(Error::Config(format!(
                "mission.max_ticks must exceed {floor:.0} (grid diameter x spacing / control step)"
            )));
        }
        if !self.policy.fits(grid) || self.policy.goal() != self.goal {
            return Err(Error::Config(format!(
                "policy does not match a {}x{} grid with goal {}",
                grid.cols, grid.rows, self.goal
            )));
        }
        self.perturbation.validate()?;
        self.matching.validate()
    }
}

/// Per-landmark descriptor sets, extracted on first use.
pub struct LandmarkLibrary<'w> {
    world: &'w World,
    grid: GridSpec,
    detector: DetectorParams,
    sets: Vec<OnceLock<DescriptorSet>>,
}

impl<'w> LandmarkLibrary<'w> {
    pub fn new(world: &'w World, grid: &GridSpec, detector: DetectorParams) -> Self {
        Self {
            world,
            grid: *grid,
            detector,
            sets: (0..grid.len()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn get(&self, id: LandmarkId) -> Result<&DescriptorSet> {
        self.grid.check(id)?;
        let slot = &self.sets[self.grid.index(id)];
        if let Some(set) = slot.get() {
            return Ok(set);
        }
        let img = landmark_descriptor_image(self.world, &self.grid, id)?;
        let set = DescriptorSet::extract(&img, &self.detector)?;
        Ok(slot.get_or_init(|| set))
    }
}

/// The neighbor reached by `action`; commanding off the grid is a policy
/// inconsistency.
pub fn expected_landmark(grid: &GridSpec, current: LandmarkId, action: Action) -> Result<LandmarkId> {
    grid.check(current)?;
    grid.displaced(current, action).ok_or(Error::PolicyInconsistency {
        at: current,
        action: action.as_str().to_string(),
    })
}

/// Outcome of one match attempt during transit.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSummary {
    pub target: LandmarkId,
    pub inliers: usize,
    pub matches: usize,
    pub center_distance: Option<f64>,
    /// Measured offset of the vehicle past the target along the leg, meters.
    pub along_track: Option<f64>,
    pub arrived: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    /// True pose after this tick's motion.
    pub pose: Pose,
    pub action: Action,
    pub attempt: Option<MatchSummary>,
    /// Landmark confirmed as reached on this tick.
    pub arrival: Option<LandmarkId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalEvent {
    pub tick: usize,
    pub landmark: LandmarkId,
    pub position: WorldPoint,
    /// Neighbor re-confirmation, best first: (landmark, inliers).
    pub ranking: Vec<(LandmarkId, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    ReachedGoal,
    Timeout,
    /// The vehicle lost the expected landmark; `nearest_miss` is the
    /// closest true approach to it on the failed leg, meters.
    MatchFailure { expected: LandmarkId, nearest_miss: f64 },
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::ReachedGoal => "reached_goal",
            Outcome::Timeout => "timeout",
            Outcome::MatchFailure { .. } => "match_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionLog {
    pub start: LandmarkId,
    pub goal: LandmarkId,
    pub start_position: WorldPoint,
    pub ticks: Vec<TickRecord>,
    pub arrivals: Vec<ArrivalEvent>,
    pub outcome: Outcome,
    pub distance_flown: f64,
}

fn dot(a: WorldPoint, b: WorldPoint) -> f64 {
    a.x * b.x + a.y * b.y
}

/// Flies `cfg` over `world`.
///
/// The platform flies north-up at constant speed along the commanded
/// cardinal direction. Every `observation_period` ticks it renders an
/// observation and matches it against the expected landmark only. Arrival
/// needs [`arrival_check`] to pass and the measured position to have
/// reached the landmark to within half an observation interval, so it fires
/// at the attempt closest to the landmark rather than at the first one
/// inside the distance gate. Each arrival is then re-confirmed by ranking
/// all neighbors of the previous landmark; a different winner, or passing
/// the landmark by more than half the leg spacing, ends the mission with
/// [`Outcome::MatchFailure`].
///
/// Pointing error is drawn once per mission (a fixed boresight offset);
/// sensor noise is drawn per observation.
pub fn run_mission(world: &World, grid: &GridSpec, cfg: &MissionConfig) -> Result<MissionLog> {
    let library = LandmarkLibrary::new(world, grid, cfg.matching.detector);
    run_mission_with(world, grid, cfg, &library)
}

/// As [`run_mission`], reusing descriptor sets across missions.
pub fn run_mission_with(world: &World, grid: &GridSpec, cfg: &MissionConfig, library: &LandmarkLibrary<'_>) -> Result<MissionLog> {
    cfg.validate(grid)?;
    let params = &cfg.matching;
    let jitter = cfg.perturbation.sample_geometry();
    let photometric = cfg.perturbation.photometric();
    let noise_base = cfg.perturbation.noise_seed();
    let catch_window = 0.5 * cfg.observation_period as f64 * cfg.control_step;

    let next_leg = |at: LandmarkId| -> Result<(Action, LandmarkId)> {
        let action = cfg.policy.action(at).ok_or(Error::IncompletePolicy(at))?;
        Ok((action, expected_landmark(grid, at, action)?))
    };

    let start_position = grid.landmark_position(cfg.start)?;
    let mut pos = start_position;
    let mut current = cfg.start;
    let (mut action, mut expected) = next_leg(current)?;
    let mut target = grid.landmark_position(expected)?;
    let mut nearest_miss = f64::INFINITY;

    let mut ticks = Vec::new();
    let mut arrivals = Vec::new();
    let mut outcome = Outcome::Timeout;

    for tick in 0..cfg.max_ticks {
        let dir = action.direction();
        pos = WorldPoint::new(pos.x + dir.x * cfg.control_step, pos.y + dir.y * cfg.control_step);
        nearest_miss = nearest_miss.min(pos.distance(&target));
        let pose = Pose::north_up(pos);
        let mut record = TickRecord {
            tick,
            pose,
            action,
            attempt: None,
            arrival: None,
        };
        let mut done = false;

        if (tick + 1) % cfg.observation_period == 0 {
            let obs = render_with(world, pose, &jitter, &photometric, seed::derive(noise_base, tick as u64))?;
            let obs_set = DescriptorSet::extract(&obs, &params.detector)?;
            let result = match_sets(&obs_set, library.get(expected)?, expected, params)?;
            let along = result.center_offset_world(params.gsd).map(|off| dot(off, dir));
            let arrived = arrival_check(&result, params.distance_threshold_m, params.min_inliers)
                && along.is_some_and(|a| a >= -catch_window);
            record.attempt = Some(MatchSummary {
                target: expected,
                inliers: result.inliers,
                matches: result.matches(),
                center_distance: result.center_distance,
                along_track: along,
                arrived,
            });

            if arrived {
                let neighbors: Vec<LandmarkId> = grid.neighbors(current)?.iter().map(|(_, n)| n).collect();
                let sets = neighbors
                    .iter()
                    .map(|&n| library.get(n).map(|s| (n, s)))
                    .collect::<Result<Vec<_>>>()?;
                let ranked = rank_described(&obs_set, &sets, params)?;
                let ranking: Vec<(LandmarkId, usize)> = ranked.iter().map(|r| (r.target, r.inliers)).collect();
                if ranking[0].0 != expected {
                    outcome = Outcome::MatchFailure { expected, nearest_miss };
                    done = true;
                } else {
                    record.arrival = Some(expected);
                    arrivals.push(ArrivalEvent {
                        tick,
                        landmark: expected,
                        position: pos,
                        ranking,
                    });
                    current = expected;
                    if current == cfg.goal {
                        outcome = Outcome::ReachedGoal;
                        done = true;
                    } else {
                        (action, expected) = next_leg(current)?;
                        target = grid.landmark_position(expected)?;
                        nearest_miss = pos.distance(&target);
                    }
                }
            }
        }

        if !done && record.arrival.is_none() && dot(WorldPoint::new(pos.x - target.x, pos.y - target.y), dir) > 0.5 * grid.spacing_along(action) {
            outcome = Outcome::MatchFailure { expected, nearest_miss };
            done = true;
        }
        ticks.push(record);
        if done {
            break;
        }
    }

    Ok(MissionLog {
        start: cfg.start,
        goal: cfg.goal,
        start_position,
        distance_flown: ticks.len() as f64 * cfg.control_step,
        ticks,
        arrivals,
        outcome,
    })
}
