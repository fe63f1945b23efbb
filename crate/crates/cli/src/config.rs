//! The run configuration: one TOML file with a section per pipeline stage.
//!
//! Every key has a default. Unknown keys are rejected, and keys left at
//! their default are reported as `section.key = value (default)`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use uasnav_core::imagery::SynthesisParams;
use uasnav_core::matching::{DetectorParams, MatchParams, RansacParams};
use uasnav_core::rl::EpsilonSchedule;
use uasnav_core::{Error, GridSpec, LandmarkId, PerturbationSpec, Result, RewardSpec, Task, TrainConfig, WorldPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub grid: GridSection,
    pub rewards: RewardsSection,
    pub train: TrainSection,
    pub imagery: ImagerySection,
    pub matching: MatchingSection,
    pub mission: MissionSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub cols: usize,
    pub rows: usize,
    pub spacing_x_m: f64,
    pub spacing_y_m: f64,
    pub origin_x_m: f64,
    pub origin_y_m: f64,
    pub goal_col: usize,
    pub goal_row: usize,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardsSection {
    pub goal_reward: f64,
    pub collision_penalty: f64,
    pub step_penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub episodes: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_episodes: usize,
    pub initial_q: f64,
    pub seed: u64,
    pub moving_average_window: usize,
    pub eval_episodes: usize,
    pub eval_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImagerySection {
    pub world_seed: u64,
    pub gsd_m_per_px: f64,
    pub extra_margin_m: f64,
    /// Geo-registered raster to ingest instead of synthesizing one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingSection {
    pub max_keypoints: usize,
    pub nms_radius_px: f64,
    pub harris_k: f64,
    pub harris_sigma_px: f64,
    pub relative_threshold: f64,
    pub ratio: f64,
    pub inlier_tol_px: f64,
    pub ransac_iterations: usize,
    pub ransac_seed: u64,
    pub min_inliers: usize,
    pub distance_threshold_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionSection {
    pub start_col: usize,
    pub start_row: usize,
    pub control_step_m: f64,
    pub observation_period: usize,
    pub max_ticks: usize,
    pub gain: f64,
    pub bias: f64,
    pub noise_sigma: f64,
    pub rotation_jitter_deg: f64,
    pub translation_jitter_m: f64,
    pub perturb_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            grid: GridSection::default(),
            rewards: RewardsSection::default(),
            train: TrainSection::default(),
            imagery: ImagerySection::default(),
            matching: MatchingSection::default(),
            mission: MissionSection::default(),
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            cols: g.cols,
            rows: g.rows,
            spacing_x_m: g.spacing_x,
            spacing_y_m: g.spacing_y,
            origin_x_m: g.origin.x,
            origin_y_m: g.origin.y,
            goal_col: 5,
            goal_row: 5,
            max_episode_steps: uasnav_core::grid::DEFAULT_MAX_EPISODE_STEPS,
        }
    }
}

impl Default for RewardsSection {
    fn default() -> Self {
        let r = RewardSpec::default();
        Self {
            goal_reward: r.goal_reward,
            collision_penalty: r.collision_penalty,
            step_penalty: r.step_penalty,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            episodes: t.episodes,
            learning_rate: t.learning_rate,
            discount: t.discount,
            epsilon_start: t.epsilon.start,
            epsilon_end: t.epsilon.end,
            epsilon_decay_episodes: t.epsilon.decay_episodes,
            initial_q: t.initial_q,
            seed: t.seed,
            moving_average_window: 20,
            eval_episodes: 100,
            eval_seed: 0,
        }
    }
}

impl Default for ImagerySection {
    fn default() -> Self {
        let s = SynthesisParams::default();
        Self {
            world_seed: s.seed,
            gsd_m_per_px: s.gsd,
            extra_margin_m: s.extra_margin_m,
            source_path: None,
        }
    }
}

impl Default for MatchingSection {
    fn default() -> Self {
        let m = MatchParams::default();
        Self {
            max_keypoints: m.detector.max_keypoints,
            nms_radius_px: m.detector.nms_radius,
            harris_k: m.detector.harris_k,
            harris_sigma_px: m.detector.sigma,
            relative_threshold: m.detector.relative_threshold,
            ratio: m.ratio,
            inlier_tol_px: m.ransac.inlier_tol,
            ransac_iterations: m.ransac.iterations,
            ransac_seed: m.ransac.seed,
            min_inliers: m.min_inliers,
            distance_threshold_m: m.distance_threshold_m,
        }
    }
}

impl Default for MissionSection {
    fn default() -> Self {
        Self {
            start_col: 0,
            start_row: 0,
            control_step_m: 1.0,
            observation_period: 2,
            max_ticks: 2000,
            gain: 1.0,
            bias: 0.0,
            noise_sigma: 0.0,
            rotation_jitter_deg: 0.0,
            translation_jitter_m: 0.0,
            perturb_seed: 0,
        }
    }
}

/// A parsed configuration together with the keys that took defaults.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub defaulted: Vec<String>,
}

/// Applies `section.key=value` to a raw table. The value is read as a TOML
/// value, falling back to a plain string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| Error::Config(format!("empty key in {assignment:?}")))?;
    let mut node = table;
    for k in keys {
        node = node
            .entry(k.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{k} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn collect_defaulted(defaults: &Table, given: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in defaults {
        let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (v, given.get(k)) {
            (Value::Table(d), Some(Value::Table(g))) => collect_defaulted(d, g, &name, out),
            (Value::Table(d), _) => collect_defaulted(d, &Table::new(), &name, out),
            (_, None) => out.push(format!("{name} = {v} (default)")),
            _ => {}
        }
    }
}

/// Keys that may appear in a file but have no default value.
const OPTIONAL_KEYS: &[&str] = &["imagery.source_path"];

fn check_known(defaults: &Table, given: &Table, prefix: &str) -> Result<()> {
    for (k, v) in given {
        let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (defaults.get(k), v) {
            (Some(Value::Table(d)), Value::Table(g)) => check_known(d, g, &name)?,
            (Some(Value::Table(_)), _) => return Err(Error::Config(format!("{name} must be a section"))),
            (Some(_), _) => {}
            (None, _) if OPTIONAL_KEYS.contains(&name.as_str()) => {}
            (None, _) => return Err(Error::Config(format!("unknown key {name}"))),
        }
    }
    Ok(())
}

/// Parses config text plus overrides; `source` names the text in errors.
pub fn parse(text: &str, source: &str, overrides: &[String]) -> Result<Loaded> {
    let mut table: Table = toml::from_str(text).map_err(|e| Error::Config(format!("{source}: {e}")))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let defaults = Table::try_from(RunConfig::default()).expect("defaults serialize");
    check_known(&defaults, &table, "").map_err(|e| Error::Config(format!("{source}: {e}")))?;
    let config: RunConfig = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{source}: {}", e.message())))?;
    let mut defaulted = Vec::new();
    collect_defaulted(&defaults, &table, "", &mut defaulted);
    config.validate()?;
    Ok(Loaded { config, defaulted })
}

/// Loads `path` (or pure defaults when `None`) and applies overrides.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Loaded> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            parse(&text, &p.display().to_string(), overrides)
        }
        None => parse("", "defaults", overrides),
    }
}

impl RunConfig {
    /// Checks every section; all failures surface as config errors.
    pub fn validate(&self) -> Result<()> {
        let check = || -> Result<()> {
            self.task()?.validate()?;
            self.start()?;
            self.train_config().validate()?;
            self.matching_params().validate()?;
            self.perturbation().validate()?;
            self.synthesis().layout(&self.grid()?)?;
            if self.train.moving_average_window == 0 {
                return Err(Error::Config("train.moving_average_window must be positive".into()));
            }
            Ok(())
        };
        check().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = &self.grid;
        GridSpec::new(g.cols, g.rows, g.spacing_x_m, g.spacing_y_m, WorldPoint::new(g.origin_x_m, g.origin_y_m))
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn goal(&self) -> Result<LandmarkId> {
        self.grid()?
            .landmark(self.grid.goal_col, self.grid.goal_row)
            .map_err(|e| Error::Config(format!("grid.goal_col/goal_row: {e}")))
    }

    pub fn start(&self) -> Result<LandmarkId> {
        self.grid()?
            .landmark(self.mission.start_col, self.mission.start_row)
            .map_err(|e| Error::Config(format!("mission.start_col/start_row: {e}")))
    }

    pub fn rewards(&self) -> RewardSpec {
        RewardSpec {
            goal_reward: self.rewards.goal_reward,
            collision_penalty: self.rewards.collision_penalty,
            step_penalty: self.rewards.step_penalty,
        }
    }

    pub fn task(&self) -> Result<Task> {
        let mut task = Task::new(self.grid()?, self.rewards(), self.goal()?);
        task.max_episode_steps = self.grid.max_episode_steps;
        Ok(task)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            episodes: t.episodes,
            learning_rate: t.learning_rate,
            discount: t.discount,
            epsilon: EpsilonSchedule {
                start: t.epsilon_start,
                end: t.epsilon_end,
                decay_episodes: t.epsilon_decay_episodes,
            },
            initial_q: t.initial_q,
            seed: t.seed,
        }
    }

    pub fn synthesis(&self) -> SynthesisParams {
        SynthesisParams {
            seed: self.imagery.world_seed,
            gsd: self.imagery.gsd_m_per_px,
            extra_margin_m: self.imagery.extra_margin_m,
        }
    }

    pub fn matching_params(&self) -> MatchParams {
        let m = &self.matching;
        MatchParams {
            detector: DetectorParams {
                max_keypoints: m.max_keypoints,
                nms_radius: m.nms_radius_px,
                harris_k: m.harris_k,
                sigma: m.harris_sigma_px,
                relative_threshold: m.relative_threshold,
                ..DetectorParams::default()
            },
            ratio: m.ratio,
            ransac: RansacParams {
                inlier_tol: m.inlier_tol_px,
                iterations: m.ransac_iterations,
                seed: m.ransac_seed,
            },
            min_inliers: m.min_inliers,
            distance_threshold_m: m.distance_threshold_m,
            gsd: self.imagery.gsd_m_per_px,
        }
    }

    pub fn perturbation(&self) -> PerturbationSpec {
        let m = &self.mission;
        PerturbationSpec {
            gain: m.gain,
            bias: m.bias,
            noise_sigma: m.noise_sigma,
            rotation_jitter: m.rotation_jitter_deg.to_radians(),
            translation_jitter: m.translation_jitter_m,
            seed: m.perturb_seed,
        }
    }

    pub fn world_path(&self) -> PathBuf {
        self.output_dir.join("world.ppm")
    }

    pub fn policy_path(&self) -> PathBuf {
        self.output_dir.join("policy.txt")
    }
}
