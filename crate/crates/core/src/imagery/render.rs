use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, LandmarkId, WorldPoint};
use crate::seed;

use super::{Pose, RasterImage, World, OBS_HEIGHT, OBS_WIDTH};

/// Appearance and pointing perturbations applied to a rendered observation.
///
/// `rotation_jitter` and `translation_jitter` are bounds: a render draws a
/// rotation uniformly from `[-rotation_jitter, rotation_jitter]` and a
/// footprint offset uniformly from the disk of radius `translation_jitter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub gain: f64,
    pub bias: f64,
    pub noise_sigma: f64,
    pub rotation_jitter: f64,
    pub translation_jitter: f64,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self::identity()
    }
}

impl PerturbationSpec {
    pub const fn identity() -> Self {
        Self {
            gain: 1.0,
            bias: 0.0,
            noise_sigma: 0.0,
            rotation_jitter: 0.0,
            translation_jitter: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0) {
            return Err(Error::Config(format!("gain must be positive, got {}", self.gain)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if !(self.rotation_jitter >= 0.0 && self.translation_jitter >= 0.0) {
            return Err(Error::Config("jitter bounds must be >= 0".into()));
        }
        Ok(())
    }

    pub fn photometric(&self) -> Photometric {
        Photometric {
            gain: self.gain,
            bias: self.bias,
            noise_sigma: self.noise_sigma,
        }
    }

    /// Draws the pointing error for this spec's seed.
    pub fn sample_geometry(&self) -> GeometricJitter {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, 0));
        let rotation = if self.rotation_jitter > 0.0 {
            rng.random_range(-self.rotation_jitter..=self.rotation_jitter)
        } else {
            0.0
        };
        let (dx, dy) = if self.translation_jitter > 0.0 {
            let r = self.translation_jitter * rng.random::<f64>().sqrt();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            (r * theta.cos(), r * theta.sin())
        } else {
            (0.0, 0.0)
        };
        GeometricJitter { rotation, dx, dy }
    }

    /// Seed for the per-pixel noise field.
    pub fn noise_seed(&self) -> u64 {
        seed::derive(self.seed, 1)
    }
}

/// A concrete pointing error: extra heading (radians) and footprint offset
/// (meters, world frame).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeometricJitter {
    pub rotation: f64,
    pub dx: f64,
    pub dy: f64,
}

/// Pointwise intensity map `gain * v + bias + noise`, rounded and clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photometric {
    pub gain: f64,
    pub bias: f64,
    pub noise_sigma: f64,
}

impl Photometric {
    pub const IDENTITY: Photometric = Photometric {
        gain: 1.0,
        bias: 0.0,
        noise_sigma: 0.0,
    };

    fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    fn apply(&self, img: &mut RasterImage, noise_seed: u64) {
        if self.is_identity() {
            return;
        }
        let mut noise = (self.noise_sigma > 0.0).then(|| {
            (
                ChaCha8Rng::seed_from_u64(noise_seed),
                Normal::new(0.0, self.noise_sigma).expect("sigma validated"),
            )
        });
        for v in img.data_mut() {
            let n = match noise.as_mut() {
                Some((rng, dist)) => dist.sample(rng).round(),
                None => 0.0,
            };
            *v = (self.gain * *v as f64 + self.bias + n).round().clamp(0.0, 255.0) as u8;
        }
    }
}

/// Samples `world` bilinearly on a `OBS_WIDTH x OBS_HEIGHT` grid centered at
/// `center` (world meters), rotated clockwise by `heading`.
fn sample_footprint(world: &World, center: WorldPoint, heading: f64) -> Result<RasterImage> {
    let src = &world.raster;
    let (w, h, ch) = (src.width(), src.height(), src.channels());
    let (cx, cy) = world.reg.world_to_pixel(center);
    let (sin, cos) = heading.sin_cos();
    let half_w = (OBS_WIDTH / 2) as f64;
    let half_h = (OBS_HEIGHT / 2) as f64;
    let map = |u: f64, v: f64| {
        let du = u - half_w;
        let dv = v - half_h;
        (cx + du * cos - dv * sin, cy + du * sin + dv * cos)
    };

    let corners = [
        (0.0, 0.0),
        ((OBS_WIDTH - 1) as f64, 0.0),
        (0.0, (OBS_HEIGHT - 1) as f64),
        ((OBS_WIDTH - 1) as f64, (OBS_HEIGHT - 1) as f64),
    ];
    const EPS: f64 = 1e-9;
    for (u, v) in corners {
        let (x, y) = map(u, v);
        if !(x >= -EPS && y >= -EPS && x <= (w - 1) as f64 + EPS && y <= (h - 1) as f64 + EPS) {
            return Err(Error::Coverage(format!(
                "observation footprint at ({:.2}, {:.2}) m leaves the {w}x{h} world raster",
                center.x, center.y
            )));
        }
    }

    let data = src.data();
    let mut out = Vec::with_capacity(OBS_WIDTH * OBS_HEIGHT * ch);
    for v in 0..OBS_HEIGHT {
        for u in 0..OBS_WIDTH {
            let (x, y) = map(u as f64, v as f64);
            let x = x.clamp(0.0, (w - 1) as f64);
            let y = y.clamp(0.0, (h - 1) as f64);
            let x0 = x.floor() as usize;
            let y0 = y.floor() as usize;
            let fx = x - x0 as f64;
            let fy = y - y0 as f64;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let i00 = (y0 * w + x0) * ch;
            let i10 = (y0 * w + x1) * ch;
            let i01 = (y1 * w + x0) * ch;
            let i11 = (y1 * w + x1) * ch;
            for c in 0..ch {
                let s = (1.0 - fx) * (1.0 - fy) * data[i00 + c] as f64
                    + fx * (1.0 - fy) * data[i10 + c] as f64
                    + (1.0 - fx) * fy * data[i01 + c] as f64
                    + fx * fy * data[i11 + c] as f64;
                out.push(s.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(OBS_WIDTH, OBS_HEIGHT, ch, out)
}

/// The north-up reference crop of a landmark, centered on its position.
pub fn landmark_descriptor_image(world: &World, grid: &GridSpec, id: LandmarkId) -> Result<RasterImage> {
    let center = grid.landmark_position(id)?;
    sample_footprint(world, center, 0.0)
}

/// Renders an observation with an explicit pointing error and noise seed.
pub fn render_with(
    world: &World,
    pose: Pose,
    jitter: &GeometricJitter,
    photometric: &Photometric,
    noise_seed: u64,
) -> Result<RasterImage> {
    let center = WorldPoint::new(pose.position.x + jitter.dx, pose.position.y + jitter.dy);
    let mut img = sample_footprint(world, center, pose.heading + jitter.rotation)?;
    photometric.apply(&mut img, noise_seed);
    Ok(img)
}

/// Simulated nadir camera: jitter and noise are drawn from `perturb.seed`.
pub fn render_observation(world: &World, pose: Pose, perturb: &PerturbationSpec) -> Result<RasterImage> {
    perturb.validate()?;
    render_with(
        world,
        pose,
        &perturb.sample_geometry(),
        &perturb.photometric(),
        perturb.noise_seed(),
    )
}
