//! Gradient-orientation histogram descriptor over a fixed square patch.
//!
//! The patch is `2 * DESCRIPTOR_RADIUS` samples on a side, split into a 4x4
//! grid of cells with 8 orientation bins each. Gradients are differences of
//! intensity, so a bias cancels, and the final normalization removes gain.

use crate::imagery::RasterImage;

use super::gray::GrayImage;
use super::{Descriptor, Keypoint, DESCRIPTOR_LEN, DESCRIPTOR_RADIUS};

const CELLS: usize = 4;
const BINS: usize = 8;
const CLIP: f64 = 0.2;

/// Descriptors for the keypoints whose patch fits the image.
#[derive(Debug, Clone, PartialEq)]
pub struct Described {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    /// Keypoints discarded because their patch left the image or was flat.
    pub dropped: usize,
}

struct Gradients {
    gx: GrayImage,
    gy: GrayImage,
}

impl Gradients {
    fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width, img.height);
        let mut gx = GrayImage::zeros(w, h);
        let mut gy = GrayImage::zeros(w, h);
        for y in 1..h.saturating_sub(1) {
            for x in 1..w.saturating_sub(1) {
                gx.data[y * w + x] = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
                gy.data[y * w + x] = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
            }
        }
        Self { gx, gy }
    }
}

fn patch_fits(kp: &Keypoint, w: usize, h: usize) -> bool {
    let half = DESCRIPTOR_RADIUS as f64 - 0.5;
    kp.x.is_finite()
        && kp.y.is_finite()
        && kp.x - half >= 1.0
        && kp.y - half >= 1.0
        && kp.x + half <= w as f64 - 2.0
        && kp.y + half <= h as f64 - 2.0
}

/// `atan2` to within about 1e-5 rad, which is far below bin resolution.
fn fast_atan2(y: f32, x: f32) -> f32 {
    use std::f32::consts::{FRAC_PI_2, PI};
    let (ax, ay) = (x.abs(), y.abs());
    let (t, swap) = if ay > ax { (ax / ay, true) } else { (ay / ax, false) };
    let t2 = t * t;
    // Minimax polynomial for atan on [0, 1].
    let mut a = t * (0.999_866 + t2 * (-0.330_299_5 + t2 * (0.180_141 + t2 * (-0.085_133 + t2 * 0.020_835_1))));
    if swap {
        a = FRAC_PI_2 - a;
    }
    if x < 0.0 {
        a = PI - a;
    }
    if y < 0.0 { -a } else { a }
}

/// Per-sample Gaussian weight and spatial cell spread; identical for every
/// keypoint because the sample grid is a fixed offset pattern.
struct Layout {
    samples: Vec<Sample>,
}

struct Sample {
    weight: f32,
    cells: [(usize, f32); 4],
}

impl Layout {
    fn new() -> Self {
        let side = 2 * DESCRIPTOR_RADIUS;
        let half = DESCRIPTOR_RADIUS as f64 - 0.5;
        let cell = side as f64 / CELLS as f64;
        let sigma = DESCRIPTOR_RADIUS as f64;
        let mut samples = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                let (du, dv) = (i as f64 - half, j as f64 - half);
                let weight = (-(du * du + dv * dv) / (2.0 * sigma * sigma)).exp() as f32;
                // Cell coordinates relative to cell centers, for bilinear spread.
                let cx = (i as f64 + 0.5) / cell - 0.5;
                let cy = (j as f64 + 0.5) / cell - 0.5;
                let (x0, y0) = (cx.floor(), cy.floor());
                let (fx, fy) = (cx - x0, cy - y0);
                let mut cells = [(0, 0.0f32); 4];
                let mut n = 0;
                for (yy, wy) in [(y0, 1.0 - fy), (y0 + 1.0, fy)] {
                    for (xx, wx) in [(x0, 1.0 - fx), (x0 + 1.0, fx)] {
                        if (0.0..CELLS as f64).contains(&yy) && (0.0..CELLS as f64).contains(&xx) {
                            cells[n] = (((yy as usize) * CELLS + xx as usize) * BINS, (wx * wy) as f32);
                            n += 1;
                        }
                    }
                }
                samples.push(Sample { weight, cells });
            }
        }
        Self { samples }
    }
}

fn describe_one(grad: &Gradients, layout: &Layout, kp: &Keypoint) -> Option<Descriptor> {
    let side = 2 * DESCRIPTOR_RADIUS;
    let half = DESCRIPTOR_RADIUS as f64 - 0.5;
    // Every sample shares the keypoint's sub-pixel phase, so the bilinear
    // weights are fixed and only the integer base moves.
    let (ox, oy) = (kp.x - half, kp.y - half);
    let (bx, by) = (ox.floor() as usize, oy.floor() as usize);
    let (fx, fy) = ((ox - ox.floor()) as f32, (oy - oy.floor()) as f32);
    let w = grad.gx.width;
    let (w00, w10, w01, w11) = ((1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy);
    let bilinear = |img: &GrayImage, i: usize| {
        w00 * img.data[i] + w10 * img.data[i + 1] + w01 * img.data[i + w] + w11 * img.data[i + w + 1]
    };

    let mut hist = [0.0f32; DESCRIPTOR_LEN];
    for j in 0..side {
        let row = (by + j) * w + bx;
        for i in 0..side {
            let gx = bilinear(&grad.gx, row + i);
            let gy = bilinear(&grad.gy, row + i);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let sample = &layout.samples[j * side + i];
            let ob = fast_atan2(gy, gx).rem_euclid(std::f32::consts::TAU) * (BINS as f32 / std::f32::consts::TAU);
            let o0 = ob as usize % BINS;
            let fo = ob - ob.floor();
            let o1 = (o0 + 1) % BINS;
            let m = mag * sample.weight;
            for &(base, cw) in &sample.cells {
                let v = m * cw;
                hist[base + o0] += v * (1.0 - fo);
                hist[base + o1] += v * fo;
            }
        }
    }

    let norm = hist.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
    if !(norm > 1e-9) {
        return None;
    }
    let clipped: Vec<f64> = hist.iter().map(|&v| (v as f64 / norm).min(CLIP)).collect();
    let norm = clipped.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = [0.0f32; DESCRIPTOR_LEN];
    for (o, v) in out.iter_mut().zip(clipped) {
        *o = (v / norm) as f32;
    }
    Some(Descriptor(out))
}

/// Describes each keypoint; keypoints whose patch falls outside the image
/// (or whose patch has no gradient at all) are dropped and counted.
pub fn describe(img: &RasterImage, keypoints: &[Keypoint]) -> Described {
    let gray = GrayImage::from_raster(img);
    let grad = Gradients::new(&gray);
    let layout = Layout::new();
    let mut out = Described {
        keypoints: Vec::with_capacity(keypoints.len()),
        descriptors: Vec::with_capacity(keypoints.len()),
        dropped: 0,
    };
    for kp in keypoints {
        let desc = if patch_fits(kp, gray.width, gray.height) {
            describe_one(&grad, &layout, kp)
        } else {
            None
        };
        match desc {
            Some(d) => {
                out.keypoints.push(*kp);
                out.descriptors.push(d);
            }
            None => out.dropped += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{detect_keypoints, DetectorParams};

    fn texture(w: usize, h: usize, max: u32) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f64, y as f64);
            let v = 0.5 + 0.25 * (fx * 0.31).sin() * (fy * 0.17).cos() + 0.25 * ((fx + 2.0 * fy) * 0.11).sin();
            (v * max as f64).round() as u8
        })
        .unwrap()
    }

    fn kp(x: f64, y: f64) -> Keypoint {
        Keypoint { x, y, response: 1.0, scale: 1.5 }
    }

    #[test]
    fn fast_atan2_tracks_std() {
        for i in 0..3600 {
            let t = (i as f32 / 10.0).to_radians() - std::f32::consts::PI;
            for r in [0.01f32, 1.0, 300.0] {
                let (y, x) = (r * t.sin(), r * t.cos());
                let d = (fast_atan2(y, x) - y.atan2(x)).rem_euclid(std::f32::consts::TAU);
                assert!(d.min(std::f32::consts::TAU - d) < 2e-4, "{t} {r}");
            }
        }
    }

    #[test]
    fn unit_norm_and_finite() {
        let img = texture(128, 128, 255);
        let kps = detect_keypoints(&img, &DetectorParams::default()).unwrap();
        assert!(!kps.is_empty());
        let d = describe(&img, &kps);
        assert_eq!(d.keypoints.len() + d.dropped, kps.len());
        for desc in &d.descriptors {
            assert!(desc.0.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((desc.norm() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn gain_and_bias_leave_descriptor_nearly_unchanged() {
        // Peak 180 keeps 1.3 v + 10 below 255, so no clamping occurs.
        let img = texture(128, 128, 180);
        let bright = RasterImage::from_fn(128, 128, |x, y| {
            (1.3 * img.pixel(x, y)[0] as f64 + 10.0).round().clamp(0.0, 255.0) as u8
        })
        .unwrap();
        let kps: Vec<Keypoint> = (0..5).flat_map(|i| (0..5).map(move |j| kp(30.0 + 15.0 * i as f64, 30.3 + 15.0 * j as f64))).collect();
        let a = describe(&img, &kps);
        let b = describe(&bright, &kps);
        assert_eq!(a.descriptors.len(), kps.len());
        assert_eq!(b.descriptors.len(), kps.len());
        for (da, db) in a.descriptors.iter().zip(&b.descriptors) {
            let dist = da.distance(db);
            assert!(dist < 0.05, "distance {dist}");
        }
    }

    #[test]
    fn identical_patches_give_identical_descriptors() {
        let tile = texture(40, 40, 255);
        let img = RasterImage::from_fn(160, 80, |x, y| {
            if (10..50).contains(&x) && (20..60).contains(&y) {
                tile.pixel(x - 10, y - 20)[0]
            } else if (100..140).contains(&x) && (20..60).contains(&y) {
                tile.pixel(x - 100, y - 20)[0]
            } else {
                0
            }
        })
        .unwrap();
        let d = describe(&img, &[kp(30.0, 40.0), kp(120.0, 40.0)]);
        assert_eq!(d.descriptors.len(), 2);
        assert_eq!(d.descriptors[0], d.descriptors[1]);
    }

    #[test]
    fn out_of_bounds_and_flat_patches_are_dropped() {
        let img = texture(64, 64, 255);
        let d = describe(&img, &[kp(5.0, 32.0), kp(32.0, 32.0), kp(32.0, 62.0), kp(f64::NAN, 1.0)]);
        assert_eq!(d.descriptors.len(), 1);
        assert_eq!(d.dropped, 3);
        assert_eq!(d.keypoints[0], kp(32.0, 32.0));

        let flat = RasterImage::filled(64, 64, 1, 90).unwrap();
        let d = describe(&flat, &[kp(32.0, 32.0)]);
        assert!(d.descriptors.is_empty());
        assert_eq!(d.dropped, 1);
    }
}
