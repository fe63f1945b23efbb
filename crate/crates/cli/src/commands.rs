//! Subcommand bodies. Each prints its human-readable lines and returns the
//! `key=value` fields for the final status line.

use std::path::Path;

use uasnav_core::imagery::{build_world, landmark_descriptor_image, pnm, WorldSource};
use uasnav_core::matching::{match_sets, DescriptorSet};
use uasnav_core::navigator::{export_trajectory, run_mission};
use uasnav_core::rl::{
    evaluate, load_policy, mean_manhattan_to_goal, optimal_action_set, optimal_mean_return, save_policy, train as train_q,
    value_iteration, write_curve_csv, PolicyTable, QTable, ValueIterationOptions,
};
use uasnav_core::{grid, svg, Error, LandmarkId, MissionConfig, Outcome, Result, World};

use crate::config::RunConfig;

pub struct Report {
    pub fields: Vec<(String, String)>,
    /// The command ran but its domain outcome is a failure.
    pub failed: bool,
}

impl Report {
    fn ok() -> Self {
        Self { fields: Vec::new(), failed: false }
    }

    fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn load_world(cfg: &RunConfig) -> Result<World> {
    let path = cfg.world_path();
    if !path.exists() {
        return Err(Error::InvalidCall(format!(
            "{} not found; run build-env with the same config first",
            path.display()
        )));
    }
    let world = World::load(&path)?;
    world.check_coverage(&cfg.grid()?)?;
    Ok(world)
}

pub fn build_env(cfg: &RunConfig) -> Result<Report> {
    let grid = cfg.grid()?;
    let world = match &cfg.imagery.source_path {
        Some(p) => build_world(&WorldSource::Ingest(p), &grid)?,
        None => build_world(&WorldSource::Synthetic(cfg.synthesis()), &grid)?,
    };
    create_dir(&cfg.output_dir)?;
    let (raster, sidecar) = world.save(&cfg.output_dir, "world")?;
    let lm_dir = cfg.output_dir.join("landmarks");
    create_dir(&lm_dir)?;
    for id in grid.landmarks() {
        let crop = landmark_descriptor_image(&world, &grid, id)?;
        pnm::write(&crop, &lm_dir.join(format!("lm_{}_{}.ppm", id.col, id.row)))?;
    }
    println!("world {} ({}x{} px), sidecar {}", raster.display(), world.raster.width(), world.raster.height(), sidecar.display());
    println!("{} landmark crops in {}", grid.len(), lm_dir.display());
    Ok(Report::ok()
        .field("command", "build-env")
        .field("landmarks", grid.len())
        .field("world", raster.display()))
}

/// Share of non-goal states whose action is in the optimal set.
fn oracle_agreement(policy: &PolicyTable, oracle: &QTable) -> f64 {
    let goal = oracle.goal();
    let states: Vec<LandmarkId> = oracle.grid().landmarks().filter(|&s| s != goal).collect();
    let agree = states
        .iter()
        .filter(|&&s| policy.action(s).is_some_and(|a| optimal_action_set(oracle, s, 1e-12).contains(&a)))
        .count();
    100.0 * agree as f64 / states.len() as f64
}

pub fn train(cfg: &RunConfig) -> Result<Report> {
    let task = cfg.task()?;
    let tc = cfg.train_config();
    let (q, curve) = train_q(&task, &tc)?;
    let policy = q.greedy_policy();
    if tc.episodes == 0 {
        eprintln!("warning: zero training episodes; the policy is the tie-break default everywhere");
    }
    create_dir(&cfg.output_dir)?;
    let policy_path = cfg.policy_path();
    save_policy(&policy, &policy_path)?;
    let csv_path = cfg.output_dir.join("curve.csv");
    let mut csv = Vec::new();
    write_curve_csv(&mut csv, &curve).map_err(|e| Error::io(&csv_path, e))?;
    write_file(&csv_path, csv)?;
    let optimum = optimal_mean_return(&task);
    let window = cfg.train.moving_average_window;
    write_file(&cfg.output_dir.join("curve.svg"), svg::curve_svg(&curve, window, Some(optimum)))?;

    let oracle = value_iteration(&task, &ValueIterationOptions { discount: tc.discount, ..Default::default() })?;
    let agreement = oracle_agreement(&policy, &oracle);
    let reached = curve
        .moving_average(window)
        .iter()
        .position(|m| m.is_some_and(|m| m >= 0.95 * optimum));
    println!("policy {} after {} episodes", policy_path.display(), tc.episodes);
    println!("optimal mean episode reward {optimum:.6}");
    match reached {
        Some(e) => println!("{window}-episode moving average reached 95% of optimum at episode {}", e + 1),
        None => println!("{window}-episode moving average never reached 95% of optimum"),
    }
    println!("oracle agreement {agreement:.1}%");
    Ok(Report::ok()
        .field("command", "train")
        .field("episodes", tc.episodes)
        .field("oracle_agreement", format!("{agreement:.1}%"))
        .field("policy", policy_path.display()))
}

fn policy_for(cfg: &RunConfig, path: Option<&Path>) -> Result<PolicyTable> {
    let default = cfg.policy_path();
    let path = path.unwrap_or(&default);
    let policy = load_policy(path)?;
    let goal = cfg.goal()?;
    if !policy.fits(&cfg.grid()?) || policy.goal() != goal {
        return Err(Error::Config(format!(
            "{} is for goal {} on a {}x{} grid; config has goal {goal} on {}x{}",
            path.display(),
            policy.goal(),
            policy.cols(),
            policy.rows(),
            cfg.grid.cols,
            cfg.grid.rows
        )));
    }
    Ok(policy)
}

pub fn eval(cfg: &RunConfig, policy_path: Option<&Path>) -> Result<Report> {
    let task = cfg.task()?;
    let policy = policy_for(cfg, policy_path)?;
    let summary = evaluate(&task, &policy, cfg.train.eval_episodes, cfg.train.eval_seed)?;
    create_dir(&cfg.output_dir)?;
    let csv = cfg.output_dir.join("eval.csv");
    grid::save_episodes_csv(&csv, &summary.logs)?;
    let expected = mean_manhattan_to_goal(&task.grid, task.goal);
    println!(
        "episodes {} mean steps {:.4} success rate {:.3} mean reward {:.6} timeouts {}",
        summary.episodes, summary.mean_steps, summary.success_rate, summary.mean_reward, summary.timeouts
    );
    println!("enumerated mean manhattan distance to {}: {expected:.4}", task.goal);
    Ok(Report::ok()
        .field("command", "eval")
        .field("mean_steps", format!("{:.4}", summary.mean_steps))
        .field("success_rate", format!("{:.3}", summary.success_rate))
        .field("timeouts", summary.timeouts))
}

pub fn match_pair(cfg: &RunConfig, obs_path: &Path, lm_path: &Path, svg_path: Option<&Path>) -> Result<Report> {
    let params = cfg.matching_params();
    let obs = pnm::read(obs_path)?;
    let lm = pnm::read(lm_path)?;
    let q = DescriptorSet::extract(&obs, &params.detector)?;
    let t = DescriptorSet::extract(&lm, &params.detector)?;
    let result = match_sets(&q, &t, LandmarkId { col: 0, row: 0 }, &params)?;
    let dist = result.center_distance.map_or("nan".to_string(), |d| format!("{d:.3}"));
    let affine = result.affine.map_or("none".to_string(), |a| {
        a.to_array().iter().map(|v| format!("{:.6}", (v * 1e6).round() / 1e6 + 0.0)).collect::<Vec<_>>().join(",")
    });
    println!("inliers={} matches={} center_distance_m={dist} affine={affine}", result.inliers, result.matches());
    if let Some(p) = svg_path {
        write_file(p, svg::match_svg(&obs, &lm, &result)?)?;
    }
    let arrived = uasnav_core::matching::arrival_check(&result, params.distance_threshold_m, params.min_inliers);
    Ok(Report::ok().field("command", "match").field("arrival", arrived))
}

pub fn fly(cfg: &RunConfig, policy_path: Option<&Path>) -> Result<Report> {
    let grid = cfg.grid()?;
    let world = load_world(cfg)?;
    let policy = policy_for(cfg, policy_path)?;
    let mut mission = MissionConfig::new(cfg.start()?, cfg.goal()?, policy);
    mission.control_step = cfg.mission.control_step_m;
    mission.observation_period = cfg.mission.observation_period;
    mission.max_ticks = cfg.mission.max_ticks;
    mission.perturbation = cfg.perturbation();
    mission.matching = cfg.matching_params();
    mission.matching.gsd = world.reg.gsd;
    let log = run_mission(&world, &grid, &mission)?;
    let (csv, svg_path) = export_trajectory(&log, &world, &grid, &cfg.output_dir)?;
    println!(
        "{} -> {}: {} after {} ticks, {} arrivals, {:.1} m flown",
        log.start,
        log.goal,
        log.outcome.as_str(),
        log.ticks.len(),
        log.arrivals.len(),
        log.distance_flown
    );
    if let Outcome::MatchFailure { expected, nearest_miss } = log.outcome {
        println!("lost landmark {expected}; nearest approach {nearest_miss:.2} m");
    }
    println!("trajectory {} and {}", csv.display(), svg_path.display());
    let report = Report::ok()
        .field("command", "fly")
        .field("outcome", log.outcome.as_str())
        .field("arrivals", log.arrivals.len())
        .field("ticks", log.ticks.len());
    Ok(Report {
        failed: log.outcome != Outcome::ReachedGoal,
        ..report
    })
}
