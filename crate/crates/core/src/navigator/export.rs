use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec, LandmarkId};
use crate::imagery::World;
use crate::svg;

use super::MissionLog;

pub const MISSION_CSV_HEADER: &str =
    "tick,x_m,y_m,heading_rad,action,target,inliers,matches,center_distance_m,along_track_m,arrived,arrival";

/// Downsampling factor for the mission figure background.
const SVG_FACTOR: usize = 4;

/// The pose columns of one mission CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub tick: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub action: Action,
    pub arrival: Option<LandmarkId>,
}

fn id_field(id: Option<LandmarkId>) -> String {
    id.map_or(String::new(), |id| format!("{}:{}", id.col, id.row))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.3}"))
}

pub fn write_trajectory_csv<W: Write>(mut out: W, log: &MissionLog) -> std::io::Result<()> {
    writeln!(out, "{MISSION_CSV_HEADER}")?;
    for t in &log.ticks {
        let a = t.attempt.as_ref();
        writeln!(
            out,
            "{},{:.3},{:.3},{:.4},{},{},{},{},{},{},{},{}",
            t.tick,
            t.pose.position.x,
            t.pose.position.y,
            t.pose.heading,
            t.action,
            id_field(a.map(|a| a.target)),
            a.map_or(String::new(), |a| a.inliers.to_string()),
            a.map_or(String::new(), |a| a.matches.to_string()),
            opt(a.and_then(|a| a.center_distance)),
            opt(a.and_then(|a| a.along_track)),
            a.map_or(String::new(), |a| a.arrived.to_string()),
            id_field(t.arrival),
        )?;
    }
    out.flush()
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let n = i + 1;
        if n == 1 {
            if line != MISSION_CSV_HEADER {
                return Err(Error::parse(&name, n, "unexpected header"));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(Error::parse(&name, n, format!("expected 12 fields, found {}", f.len())));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| Error::parse(&name, n, format!("bad number {:?}", f[k])));
        let arrival = match f[11] {
            "" => None,
            s => {
                let (c, r) = s.split_once(':').ok_or_else(|| Error::parse(&name, n, "bad landmark"))?;
                let p = |v: &str| v.parse::<usize>().map_err(|_| Error::parse(&name, n, "bad landmark"));
                Some(LandmarkId { col: p(c)?, row: p(r)? })
            }
        };
        rows.push(TrajectoryRow {
            tick: f[0].parse().map_err(|_| Error::parse(&name, n, "bad tick"))?,
            x: num(1)?,
            y: num(2)?,
            heading: num(3)?,
            action: f[4].parse().map_err(|_| Error::parse(&name, n, format!("bad action {:?}", f[4])))?,
            arrival,
        });
    }
    Ok(rows)
}

/// Writes `mission.csv` and `mission.svg` into `dir`, creating it if needed.
pub fn export_trajectory(log: &MissionLog, world: &World, grid: &GridSpec, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("mission.csv");
    let file = std::fs::File::create(&csv).map_err(|e| Error::io(&csv, e))?;
    write_trajectory_csv(std::io::BufWriter::new(file), log).map_err(|e| Error::io(&csv, e))?;
    let svg_path = dir.join("mission.svg");
    std::fs::write(&svg_path, svg::mission_svg(log, world, grid, SVG_FACTOR)?).map_err(|e| Error::io(&svg_path, e))?;
    Ok((csv, svg_path))
}
