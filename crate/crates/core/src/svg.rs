//! Self-contained SVG figures: raster backgrounds are embedded as PNG data
//! URIs, so the files need no external assets.

use std::fmt::Write as _;

use base64::Engine as _;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, WorldPoint};
use crate::imagery::{RasterImage, World};
use crate::matching::MatchResult;
use crate::navigator::{MissionLog, Outcome};
use crate::rl::TrainingCurve;

/// PNG data URI of `img`.
pub fn png_data_uri(img: &RasterImage) -> Result<String> {
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, img.width() as u32, img.height() as u32);
        enc.set_color(if img.channels() == 3 { png::ColorType::Rgb } else { png::ColorType::Grayscale });
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::InvalidCall(format!("png encode: {e}")))?;
        w.write_image_data(img.data())
            .map_err(|e| Error::InvalidCall(format!("png encode: {e}")))?;
    }
    Ok(format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(bytes)
    ))
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
}

/// Trajectory over a downsampled world with the landmark lattice, the
/// start, and arrival events (drawn at the arrived landmark's position).
pub fn mission_svg(log: &MissionLog, world: &World, grid: &GridSpec, factor: usize) -> Result<String> {
    let factor = factor.max(1);
    let bg = world.raster.downsample(factor);
    let scale = 1.0 / factor as f64;
    let px = |p: WorldPoint| {
        let (x, y) = world.reg.world_to_pixel(p);
        (x * scale, y * scale)
    };
    let (w, h) = (bg.width() as f64, bg.height() as f64);
    let mut out = String::new();
    header(&mut out, w, h + 24.0);
    let _ = writeln!(out, r#"<image x="0" y="0" width="{w:.0}" height="{h:.0}" href="{}"/>"#, png_data_uri(&bg)?);
    for id in grid.landmarks() {
        let (x, y) = px(grid.landmark_position(id)?);
        let _ = writeln!(out, r##"<circle class="landmark" cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#ffffff" stroke="#000000" stroke-width="0.8"/>"##);
    }
    let mut points = vec![px(log.start_position)];
    points.extend(log.ticks.iter().map(|t| px(t.pose.position)));
    let path: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        out,
        r##"<polyline class="trajectory" points="{}" fill="none" stroke="#e4572e" stroke-width="1.5"/>"##,
        path.join(" ")
    );
    let (sx, sy) = points[0];
    let _ = writeln!(out, r##"<rect class="start" x="{:.2}" y="{:.2}" width="8" height="8" fill="#17bebb"/>"##, sx - 4.0, sy - 4.0);
    let (gx, gy) = px(grid.landmark_position(log.goal)?);
    let _ = writeln!(out, r##"<circle class="goal" cx="{gx:.2}" cy="{gy:.2}" r="7" fill="none" stroke="#ffc914" stroke-width="2"/>"##);
    for a in &log.arrivals {
        let (x, y) = px(grid.landmark_position(a.landmark)?);
        let _ = writeln!(
            out,
            r##"<circle class="arrival" data-tick="{}" data-landmark="{}:{}" cx="{x:.2}" cy="{y:.2}" r="4" fill="#76b041"/>"##,
            a.tick, a.landmark.col, a.landmark.row
        );
    }
    let label = match log.outcome {
        Outcome::MatchFailure { expected, nearest_miss } => {
            format!("match failure at {expected}, nearest miss {nearest_miss:.1} m")
        }
        o => o.as_str().replace('_', " "),
    };
    let _ = writeln!(
        out,
        r#"<text x="4" y="{:.0}">{} to {}: {}, {} arrivals, {:.0} m flown</text>"#,
        h + 17.0,
        log.start,
        log.goal,
        label,
        log.arrivals.len(),
        log.distance_flown
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// Episode reward with its moving average and an optional reference line.
pub fn curve_svg(curve: &TrainingCurve, window: usize, reference: Option<f64>) -> String {
    let (w, h, m) = (720.0, 360.0, 48.0);
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(out, r##"<rect width="{w:.0}" height="{h:.0}" fill="#ffffff"/>"##);
    let n = curve.records.len();
    let rewards: Vec<f64> = curve.records.iter().map(|r| r.reward).collect();
    let mut lo = rewards.iter().copied().chain(reference).fold(f64::INFINITY, f64::min);
    let mut hi = rewards.iter().copied().chain(reference).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let sx = |i: f64| m + (w - 2.0 * m) * if n > 1 { i / (n - 1) as f64 } else { 0.0 };
    let sy = |v: f64| h - m - (h - 2.0 * m) * (v - lo) / (hi - lo);
    let _ = writeln!(
        out,
        r##"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="#333333"/>"##,
        b = h - m,
        r = w - m
    );
    let _ = writeln!(out, r#"<text x="{m}" y="{:.0}">episode (0..{n})</text>"#, h - m + 30.0);
    let _ = writeln!(out, r#"<text x="4" y="{:.0}">{hi:.4}</text>"#, m);
    let _ = writeln!(out, r#"<text x="4" y="{:.0}">{lo:.4}</text>"#, h - m);
    let line = |vals: &mut dyn Iterator<Item = (usize, f64)>| {
        vals.map(|(i, v)| format!("{:.2},{:.2}", sx(i as f64), sy(v))).collect::<Vec<_>>().join(" ")
    };
    let raw = line(&mut rewards.iter().copied().enumerate());
    let _ = writeln!(out, r##"<polyline points="{raw}" fill="none" stroke="#9db4c0" stroke-width="1"/>"##);
    let avg = curve.moving_average(window);
    let smooth = line(&mut avg.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))));
    let _ = writeln!(out, r##"<polyline points="{smooth}" fill="none" stroke="#253237" stroke-width="2"/>"##);
    if let Some(r) = reference {
        let _ = writeln!(
            out,
            r##"<line x1="{m}" y1="{y:.2}" x2="{x2}" y2="{y:.2}" stroke="#e4572e" stroke-dasharray="6 4"/>"##,
            y = sy(r),
            x2 = w - m
        );
    }
    let _ = writeln!(out, r#"<text x="{m}" y="20">episode reward and {window}-episode moving average</text>"#);
    out.push_str("</svg>\n");
    out
}

/// Observation and landmark side by side with inlier correspondences.
pub fn match_svg(query: &RasterImage, train: &RasterImage, result: &MatchResult) -> Result<String> {
    let (qw, qh) = (query.width() as f64, query.height() as f64);
    let (tw, th) = (train.width() as f64, train.height() as f64);
    let mut out = String::new();
    header(&mut out, qw + tw, qh.max(th) + 24.0);
    let _ = writeln!(out, r#"<image x="0" y="0" width="{qw:.0}" height="{qh:.0}" href="{}"/>"#, png_data_uri(query)?);
    let _ = writeln!(out, r#"<image x="{qw:.0}" y="0" width="{tw:.0}" height="{th:.0}" href="{}"/>"#, png_data_uri(train)?);
    for (c, &inlier) in result.correspondences.iter().zip(&result.inlier_mask) {
        let colour = if inlier { "#76b041" } else { "#e4572e" };
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="0.8" stroke-opacity="0.7"/>"#,
            c.query_kp.x,
            c.query_kp.y,
            c.train_kp.x + qw,
            c.train_kp.y
        );
    }
    let dist = result.center_distance.map_or("n/a".to_string(), |d| format!("{d:.2} m"));
    let _ = writeln!(
        out,
        r#"<text x="4" y="{:.0}">{} inliers of {} matches, center distance {dist}</text>"#,
        qh.max(th) + 17.0,
        result.inliers,
        result.matches()
    );
    out.push_str("</svg>\n");
    Ok(out)
}
