//! Harris corner detector with greedy radius non-maximum suppression.

use crate::error::{Error, Result};
use crate::imagery::RasterImage;

use super::gray::GrayImage;
use super::{Keypoint, DESCRIPTOR_RADIUS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub max_keypoints: usize,
    /// Minimum distance between accepted keypoints, pixels.
    pub nms_radius: f64,
    /// Harris sensitivity `k` in `det - k * trace^2`.
    pub harris_k: f64,
    /// Integration scale of the structure tensor, pixels.
    pub sigma: f64,
    /// Responses below this fraction of the image maximum are discarded.
    pub relative_threshold: f64,
    /// Keypoints closer than this to the image edge are not reported.
    pub border: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            max_keypoints: 600,
            nms_radius: 5.0,
            harris_k: 0.04,
            sigma: 1.5,
            relative_threshold: 0.005,
            border: DESCRIPTOR_RADIUS + 2,
        }
    }
}

/// Harris response map over a Sobel gradient field.
pub(crate) fn harris_response(img: &GrayImage, sigma: f64, k: f64) -> GrayImage {
    let (w, h) = (img.width, img.height);
    let mut ixx = GrayImage::zeros(w, h);
    let mut iyy = GrayImage::zeros(w, h);
    let mut ixy = GrayImage::zeros(w, h);
    for y in 1..h.saturating_sub(1) {
        let up = &img.data[(y - 1) * w..y * w];
        let mid = &img.data[y * w..(y + 1) * w];
        let down = &img.data[(y + 1) * w..(y + 2) * w];
        for x in 1..w - 1 {
            let gx = (up[x + 1] + 2.0 * mid[x + 1] + down[x + 1] - up[x - 1] - 2.0 * mid[x - 1] - down[x - 1]) / 8.0;
            let gy = (down[x - 1] + 2.0 * down[x] + down[x + 1] - up[x - 1] - 2.0 * up[x] - up[x + 1]) / 8.0;
            let i = y * w + x;
            ixx.data[i] = gx * gx;
            iyy.data[i] = gy * gy;
            ixy.data[i] = gx * gy;
        }
    }
    let sxx = ixx.gaussian_blur(sigma);
    let syy = iyy.gaussian_blur(sigma);
    let sxy = ixy.gaussian_blur(sigma);
    let k = k as f32;
    let data = (0..w * h)
        .map(|i| {
            let (a, b, c) = (sxx.data[i], syy.data[i], sxy.data[i]);
            let trace = a + b;
            a * b - c * c - k * trace * trace
        })
        .collect();
    GrayImage { width: w, height: h, data }
}

/// Offset of a parabola's vertex through three equally spaced samples.
fn vertex_offset(left: f32, center: f32, right: f32) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom.abs() < f32::EPSILON {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5) as f64
}

/// Detects up to `max_keypoints` corners, strongest first.
pub fn detect_keypoints(img: &RasterImage, params: &DetectorParams) -> Result<Vec<Keypoint>> {
    if params.max_keypoints == 0 {
        return Err(Error::InvalidCall("max_keypoints must be positive".into()));
    }
    let border = params.border.max(2);
    let min = 2 * border + 1;
    if img.width() < min || img.height() < min {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min,
        });
    }
    let gray = GrayImage::from_raster(img);
    let resp = harris_response(&gray, params.sigma, params.harris_k);
    let (w, h) = (resp.width, resp.height);

    let peak = resp.data.iter().copied().fold(0.0f32, f32::max);
    let threshold = (params.relative_threshold as f32 * peak).max(1e-3);

    let mut candidates = Vec::new();
    for y in border..h - border {
        for x in border..w - border {
            let r = resp.at(x, y);
            if r <= threshold {
                continue;
            }
            // Strict maximum against neighbors earlier in scan order,
            // non-strict against later ones, so plateaus keep one pixel.
            let mut is_max = true;
            'nbhd: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = resp.at((x as isize + dx) as usize, (y as isize + dy) as usize);
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if (earlier && n >= r) || (!earlier && n > r) {
                        is_max = false;
                        break 'nbhd;
                    }
                }
            }
            if is_max {
                candidates.push((r, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));

    let cell = params.nms_radius.max(1.0);
    let gw = (w as f64 / cell).ceil() as usize + 1;
    let gh = (h as f64 / cell).ceil() as usize + 1;
    let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); gw * gh];
    let r2 = params.nms_radius * params.nms_radius;
    let mut out = Vec::new();
    for (r, x, y) in candidates {
        let (fx, fy) = (x as f64, y as f64);
        let (bx, by) = ((fx / cell) as usize, (fy / cell) as usize);
        let crowded = (by.saturating_sub(1)..=(by + 1).min(gh - 1)).any(|yy| {
            (bx.saturating_sub(1)..=(bx + 1).min(gw - 1))
                .any(|xx| buckets[yy * gw + xx].iter().any(|&(px, py)| (px - fx).powi(2) + (py - fy).powi(2) < r2))
        });
        if crowded {
            continue;
        }
        buckets[by * gw + bx].push((fx, fy));
        let ox = vertex_offset(resp.at(x - 1, y), r, resp.at(x + 1, y));
        let oy = vertex_offset(resp.at(x, y - 1), r, resp.at(x, y + 1));
        out.push(Keypoint {
            x: fx + ox,
            y: fy + oy,
            response: r as f64,
            scale: params.sigma,
        });
        if out.len() == params.max_keypoints {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DetectorParams {
        DetectorParams::default()
    }

    /// Structure-tensor response written out directly per pixel: Sobel
    /// gradients, explicit Gaussian-weighted window sums, `det - k tr^2`.
    fn brute_force_response(img: &RasterImage, x: usize, y: usize, sigma: f64, k: f64) -> f64 {
        let v = |x: isize, y: isize| {
            let x = x.clamp(0, img.width() as isize - 1) as usize;
            let y = y.clamp(0, img.height() as isize - 1) as usize;
            img.pixel(x, y)[0] as f64
        };
        let grad = |x: isize, y: isize| {
            if x < 1 || y < 1 || x >= img.width() as isize - 1 || y >= img.height() as isize - 1 {
                return (0.0, 0.0);
            }
            let gx = (v(x + 1, y - 1) + 2.0 * v(x + 1, y) + v(x + 1, y + 1)
                - v(x - 1, y - 1) - 2.0 * v(x - 1, y) - v(x - 1, y + 1)) / 8.0;
            let gy = (v(x - 1, y + 1) + 2.0 * v(x, y + 1) + v(x + 1, y + 1)
                - v(x - 1, y - 1) - 2.0 * v(x, y - 1) - v(x + 1, y - 1)) / 8.0;
            (gx, gy)
        };
        let rad = (3.0 * sigma).ceil() as isize;
        let norm: f64 = (-rad..=rad).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).sum();
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for dy in -rad..=rad {
            for dx in -rad..=rad {
                let wgt = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp() / (norm * norm);
                let (gx, gy) = grad(x as isize + dx, y as isize + dy);
                a += wgt * gx * gx;
                b += wgt * gy * gy;
                c += wgt * gx * gy;
            }
        }
        a * b - c * c - k * (a + b) * (a + b)
    }

    #[test]
    fn constant_image_has_no_corners() {
        let img = RasterImage::filled(80, 80, 1, 128).unwrap();
        assert!(detect_keypoints(&img, &params()).unwrap().is_empty());
    }

    #[test]
    fn single_bright_pixel() {
        let img = RasterImage::from_fn(64, 64, |x, y| if (x, y) == (30, 33) { 255 } else { 0 }).unwrap();
        // Oracle: argmax of the directly evaluated response near the pixel.
        let mut best = (f64::MIN, 0, 0);
        for y in 25..40 {
            for x in 25..40 {
                let r = brute_force_response(&img, x, y, 1.5, 0.04);
                if r > best.0 {
                    best = (r, x, y);
                }
            }
        }
        assert!((best.1 as i64 - 30).abs() <= 1 && (best.2 as i64 - 33).abs() <= 1);

        let kps = detect_keypoints(&img, &params()).unwrap();
        assert!(!kps.is_empty());
        let top = kps[0];
        assert!((top.x - best.1 as f64).abs() <= 1.0 && (top.y - best.2 as f64).abs() <= 1.0);
        assert!((top.x - 30.0).abs() <= 1.0 && (top.y - 33.0).abs() <= 1.0);
    }

    #[test]
    fn response_matches_brute_force() {
        let img = RasterImage::from_fn(48, 48, |x, y| ((x * 37 + y * 91 + x * y) % 200) as u8).unwrap();
        let resp = harris_response(&GrayImage::from_raster(&img), 1.5, 0.04);
        for (x, y) in [(10, 10), (20, 31), (24, 24), (30, 12)] {
            let direct = brute_force_response(&img, x, y, 1.5, 0.04);
            let fast = resp.at(x, y) as f64;
            assert!((direct - fast).abs() <= 1e-3 * direct.abs().max(1.0), "({x},{y}) {direct} vs {fast}");
        }
    }

    #[test]
    fn checkerboard_corners() {
        let square = 16;
        let img = RasterImage::from_fn(128, 128, |x, y| if (x / square + y / square) % 2 == 0 { 30 } else { 220 }).unwrap();
        let p = params();
        let kps = detect_keypoints(&img, &p).unwrap();
        // Intensity steps sit between pixels 16k-1 and 16k.
        let corners: Vec<(f64, f64)> = (1..8)
            .flat_map(|i| (1..8).map(move |j| ((i * square) as f64 - 0.5, (j * square) as f64 - 0.5)))
            .filter(|&(x, y)| {
                let lo = p.border as f64;
                let hi = 128.0 - p.border as f64;
                x >= lo && y >= lo && x < hi && y < hi
            })
            .collect();
        assert_eq!(corners.len(), 25);
        for kp in &kps {
            assert!(
                corners.iter().any(|&(cx, cy)| (kp.x - cx).abs() <= 1.0 && (kp.y - cy).abs() <= 1.0),
                "spurious keypoint {kp:?}"
            );
        }
        for &(cx, cy) in &corners {
            assert!(
                kps.iter().any(|kp| (kp.x - cx).abs() <= 1.0 && (kp.y - cy).abs() <= 1.0),
                "missed corner ({cx}, {cy})"
            );
        }
    }

    #[test]
    fn ordering_limit_and_suppression() {
        let img = RasterImage::from_fn(160, 160, |x, y| ((x * 7919 + y * 104_729) % 251) as u8).unwrap();
        let p = DetectorParams {
            max_keypoints: 50,
            ..params()
        };
        let kps = detect_keypoints(&img, &p).unwrap();
        assert_eq!(kps.len(), 50);
        assert!(kps.windows(2).all(|w| w[0].response >= w[1].response));
        for (i, a) in kps.iter().enumerate() {
            for b in &kps[i + 1..] {
                assert!((a.x - b.x).hypot(a.y - b.y) >= p.nms_radius - 1.0);
            }
        }
        assert_eq!(kps, detect_keypoints(&img, &p).unwrap());
    }

    #[test]
    fn too_small_image() {
        let img = RasterImage::filled(20, 20, 1, 0).unwrap();
        assert!(matches!(detect_keypoints(&img, &params()), Err(Error::ImageTooSmall { .. })));
    }
}
