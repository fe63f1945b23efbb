use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, WorldPoint};
use crate::seed;

use super::geo::RegistrationSidecar;
use super::{pnm, GeoRegistration, RasterImage, OBS_HEIGHT, OBS_WIDTH};

/// An immutable geo-registered world raster.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub raster: RasterImage,
    pub reg: GeoRegistration,
}

impl World {
    /// Fails unless every landmark's descriptor window lies inside the raster.
    pub fn check_coverage(&self, grid: &GridSpec) -> Result<()> {
        let (w, h) = (self.raster.width() as f64, self.raster.height() as f64);
        let hw = (OBS_WIDTH / 2) as f64;
        let hh = (OBS_HEIGHT / 2) as f64;
        for id in grid.landmarks() {
            let (px, py) = self.reg.world_to_pixel(grid.landmark_position(id)?);
            if px - hw < -1e-9 || py - hh < -1e-9 || px + hw - 1.0 > w - 1.0 + 1e-9 || py + hh - 1.0 > h - 1.0 + 1e-9 {
                return Err(Error::Coverage(format!(
                    "landmark {id} window does not fit in the {}x{} world raster",
                    self.raster.width(),
                    self.raster.height()
                )));
            }
        }
        Ok(())
    }

    /// Writes `<stem>.ppm|pgm` and `<stem>.json`. Returns both paths.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let ext = if self.raster.channels() == 1 { "pgm" } else { "ppm" };
        let raster_path = dir.join(format!("{stem}.{ext}"));
        let sidecar_path = dir.join(format!("{stem}.json"));
        pnm::write(&self.raster, &raster_path)?;
        let json = serde_json::to_string_pretty(&self.reg.to_sidecar()).expect("sidecar serializes");
        std::fs::write(&sidecar_path, json + "\n").map_err(|e| Error::io(&sidecar_path, e))?;
        Ok((raster_path, sidecar_path))
    }

    /// Loads a raster and its sidecar (same path with a `.json` extension).
    pub fn load(raster_path: &Path) -> Result<Self> {
        let raster = pnm::read(raster_path)?;
        let sidecar_path = raster_path.with_extension("json");
        let text = std::fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
        let sidecar: RegistrationSidecar = serde_json::from_str(&text).map_err(|e| {
            Error::parse(sidecar_path.display().to_string(), e.line(), e.to_string())
        })?;
        Ok(Self {
            raster,
            reg: GeoRegistration::from_sidecar(&sidecar)?,
        })
    }
}

/// Procedural orthophoto parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisParams {
    pub seed: u64,
    /// Meters per pixel.
    pub gsd: f64,
    /// Extra border beyond the half observation window, meters.
    pub extra_margin_m: f64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            seed: 1,
            gsd: 0.25,
            extra_margin_m: 25.0,
        }
    }
}

pub enum WorldSource<'a> {
    Synthetic(SynthesisParams),
    Ingest(&'a Path),
}

/// Synthesizes or ingests a world and checks it covers the grid.
pub fn build_world(source: &WorldSource<'_>, grid: &GridSpec) -> Result<World> {
    let world = match source {
        WorldSource::Synthetic(params) => params.synthesize(grid)?,
        WorldSource::Ingest(path) => World::load(path)?,
    };
    world.check_coverage(grid)?;
    Ok(world)
}

/// Smooth lattice noise in `[0, 1)`, sampled with smoothstep interpolation.
struct ValueNoise {
    cell: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, width: usize, height: usize, cell: f64) -> Self {
        let cols = (width as f64 / cell).ceil() as usize + 2;
        let rows = (height as f64 / cell).ceil() as usize + 2;
        let lattice = (0..cols * rows).map(|_| rng.random::<f64>()).collect();
        Self { cell, cols, lattice }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        let fx = x as f64 / self.cell;
        let fy = y as f64 / self.cell;
        let (ix, iy) = (fx as usize, fy as usize);
        let s = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (s(fx - ix as f64), s(fy - iy as f64));
        let l = |i: usize, j: usize| self.lattice[j * self.cols + i];
        let top = l(ix, iy) * (1.0 - tx) + l(ix + 1, iy) * tx;
        let bottom = l(ix, iy + 1) * (1.0 - tx) + l(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

struct Canvas {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Canvas {
    fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Fills pixels whose centers fall inside a rectangle of half-extents
    /// `(hw, hh)` centered at `(cx, cy)` and rotated by `angle`.
    fn fill_rotated_rect(&mut self, cx: f64, cy: f64, hw: f64, hh: f64, angle: f64, rgb: [u8; 3]) {
        let (sin, cos) = angle.sin_cos();
        let r = hw.hypot(hh);
        let x0 = (cx - r).floor().max(0.0) as usize;
        let y0 = (cy - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as usize).min(self.width - 1);
        let y1 = ((cy + r).ceil() as usize).min(self.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let u = dx * cos + dy * sin;
                let v = -dx * sin + dy * cos;
                if u.abs() <= hw && v.abs() <= hh {
                    self.put(x, y, rgb);
                }
            }
        }
    }

    fn fill_disk(&mut self, cx: f64, cy: f64, radius: f64, rgb: [u8; 3]) {
        let x0 = (cx - radius).floor().max(0.0) as usize;
        let y0 = (cy - radius).floor().max(0.0) as usize;
        let x1 = ((cx + radius).ceil() as usize).min(self.width - 1);
        let y1 = ((cy + radius).ceil() as usize).min(self.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if (x as f64 - cx).hypot(y as f64 - cy) <= radius {
                    self.put(x, y, rgb);
                }
            }
        }
    }
}

fn jitter_color(rng: &mut ChaCha8Rng, base: [u8; 3], spread: i32) -> [u8; 3] {
    base.map(|c| (c as i32 + rng.random_range(-spread..=spread)).clamp(0, 255) as u8)
}

impl SynthesisParams {
    /// Raster size and registration that cover `grid` plus a half
    /// observation window and `extra_margin_m` on every side.
    pub fn layout(&self, grid: &GridSpec) -> Result<(usize, usize, GeoRegistration)> {
        if !(self.extra_margin_m >= 0.0) {
            return Err(Error::Config("extra_margin_m must be >= 0".into()));
        }
        let margin_x = (OBS_WIDTH / 2) as f64 * self.gsd + self.extra_margin_m;
        let margin_y = (OBS_HEIGHT / 2) as f64 * self.gsd + self.extra_margin_m;
        let (ex, ey) = grid.extent();
        let width = ((ex + 2.0 * margin_x) / self.gsd - 1e-9).ceil() as usize;
        let height = ((ey + 2.0 * margin_y) / self.gsd - 1e-9).ceil() as usize;
        let origin = WorldPoint::new(grid.origin.x - margin_x, grid.origin.y + ey + margin_y);
        Ok((width, height, GeoRegistration::new(self.gsd, origin)?))
    }

    /// Residential-looking procedural texture: smooth ground, a sparse road
    /// network, dense rotated building footprints with roof detail, and trees.
    pub fn synthesize(&self, grid: &GridSpec) -> Result<World> {
        grid.validate()?;
        let (width, height, reg) = self.layout(grid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, 0x5eed));

        let coarse = ValueNoise::new(&mut rng, width, height, 96.0);
        let fine = ValueNoise::new(&mut rng, width, height, 14.0);
        let mut canvas = Canvas {
            width,
            height,
            data: Vec::with_capacity(width * height * 3),
        };
        for y in 0..height {
            for x in 0..width {
                let n = 0.65 * coarse.at(x, y) + 0.35 * fine.at(x, y);
                let g = 70.0 + 90.0 * n;
                canvas.data.extend_from_slice(&[
                    (g * 0.85) as u8,
                    (g * 1.05).min(255.0) as u8,
                    (g * 0.75) as u8,
                ]);
            }
        }

        let area = (width * height) as f64;
        let road_count = (area / 180_000.0).round() as usize;
        for _ in 0..road_count {
            let cx = rng.random_range(0.0..width as f64);
            let cy = rng.random_range(0.0..height as f64);
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let len = rng.random_range(150.0..900.0);
            let half_width = rng.random_range(4.0..8.0);
            let asphalt = jitter_color(&mut rng, [88, 88, 92], 12);
            canvas.fill_rotated_rect(cx, cy, len / 2.0, half_width, angle, asphalt);
        }

        let building_count = (area / 420.0).round() as usize;
        for _ in 0..building_count {
            let cx = rng.random_range(0.0..width as f64);
            let cy = rng.random_range(0.0..height as f64);
            let hw = rng.random_range(3.0..18.0);
            let hh = rng.random_range(3.0..18.0);
            let angle = rng.random_range(-0.6..0.6);
            let roof = [
                rng.random_range(20..=250),
                rng.random_range(20..=250),
                rng.random_range(20..=250),
            ];
            canvas.fill_rotated_rect(cx, cy, hw, hh, angle, roof);
            if rng.random_bool(0.5) && hw > 5.0 && hh > 5.0 {
                let inner = jitter_color(&mut rng, roof, 70);
                let ox = rng.random_range(-hw / 3.0..hw / 3.0);
                let oy = rng.random_range(-hh / 3.0..hh / 3.0);
                canvas.fill_rotated_rect(cx + ox, cy + oy, hw / 2.5, hh / 2.5, angle, inner);
            }
        }

        let tree_count = (area / 1_800.0).round() as usize;
        for _ in 0..tree_count {
            let cx = rng.random_range(0.0..width as f64);
            let cy = rng.random_range(0.0..height as f64);
            let radius = rng.random_range(2.5..7.0);
            let leaf = jitter_color(&mut rng, [40, 85, 38], 18);
            canvas.fill_disk(cx, cy, radius, leaf);
        }

        let raster = RasterImage::new(width, height, 3, canvas.data)?;
        Ok(World { raster, reg })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LandmarkId;
    use crate::imagery::landmark_descriptor_image;

    #[test]
    fn layout_covers_grid_plus_half_window() {
        let grid = GridSpec::default();
        let no_extra = SynthesisParams {
            extra_margin_m: 0.0,
            ..Default::default()
        };
        let (w, h, reg) = no_extra.layout(&grid).unwrap();
        // (360 + 160) m and (270 + 120) m at 0.25 m/px.
        assert_eq!((w, h), (2080, 1560));
        let (px, py) = reg.world_to_pixel(grid.landmark_position(LandmarkId { col: 0, row: 9 }).unwrap());
        assert_eq!((px, py), (320.0, 240.0));

        let (w, h, _) = SynthesisParams::default().layout(&grid).unwrap();
        assert!(w >= 2080 && h >= 1560);
    }

    #[test]
    fn synthesis_is_deterministic_and_seeded() {
        let grid = GridSpec::new(2, 2, 40.0, 30.0, WorldPoint::default()).unwrap();
        let p = SynthesisParams {
            seed: 5,
            ..Default::default()
        };
        let a = p.synthesize(&grid).unwrap();
        let b = p.synthesize(&grid).unwrap();
        assert_eq!(a.raster.data(), b.raster.data());
        let c = SynthesisParams { seed: 6, ..p }.synthesize(&grid).unwrap();
        assert_ne!(a.raster.data(), c.raster.data());
    }

    #[test]
    fn distinct_landmarks_have_distinct_crops() {
        let grid = GridSpec::new(2, 2, 40.0, 30.0, WorldPoint::default()).unwrap();
        let world = build_world(&WorldSource::Synthetic(SynthesisParams::default()), &grid).unwrap();
        let crops: Vec<_> = grid
            .landmarks()
            .map(|id| landmark_descriptor_image(&world, &grid, id).unwrap())
            .collect();
        for i in 0..crops.len() {
            for j in i + 1..crops.len() {
                assert_ne!(crops[i], crops[j]);
            }
        }
    }

    #[test]
    fn save_load_round_trip_is_byte_identical() {
        let grid = GridSpec::new(2, 2, 40.0, 30.0, WorldPoint::new(10.0, 20.0)).unwrap();
        let world = SynthesisParams::default().synthesize(&grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (raster_path, _) = world.save(dir.path(), "world").unwrap();
        let loaded = build_world(&WorldSource::Ingest(&raster_path), &grid).unwrap();
        assert_eq!(loaded, world);
        let out = tempfile::tempdir().unwrap();
        let (again, _) = loaded.save(out.path(), "world").unwrap();
        assert_eq!(std::fs::read(&raster_path).unwrap(), std::fs::read(again).unwrap());
    }

    #[test]
    fn undersized_world_is_rejected() {
        let grid = GridSpec::default();
        let small = RasterImage::filled(1000, 800, 3, 0).unwrap();
        let world = World {
            raster: small,
            reg: GeoRegistration::new(0.25, WorldPoint::new(-80.0, 330.0)).unwrap(),
        };
        assert!(matches!(world.check_coverage(&grid), Err(Error::Coverage(_))));
    }

    #[test]
    fn malformed_sidecar_is_a_parse_error() {
        let grid = GridSpec::new(2, 2, 40.0, 30.0, WorldPoint::default()).unwrap();
        let world = SynthesisParams::default().synthesize(&grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (raster_path, sidecar) = world.save(dir.path(), "world").unwrap();
        std::fs::write(&sidecar, "{\"gsd_m_per_px\": 0.25}").unwrap();
        assert!(matches!(World::load(&raster_path), Err(Error::Parse { .. })));
    }
}
