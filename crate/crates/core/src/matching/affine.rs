//! 2D affine model, minimal and least-squares solves, and RANSAC.

use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Correspondence;

/// Maps query pixel `(x, y)` to train pixel
/// `(m[0][0] x + m[0][1] y + m[0][2], m[1][0] x + m[1][1] y + m[1][2])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub m: [[f64; 3]; 2],
}

/// Largest condition number of the linear part accepted as a valid model.
pub const MAX_CONDITION: f64 = 1e6;

impl AffineTransform {
    pub const IDENTITY: Self = Self {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };

    pub fn new(m: [[f64; 3]; 2]) -> Self {
        Self { m }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::new([[1.0, 0.0, tx], [0.0, 1.0, ty]])
    }

    /// Rotation by `angle` (radians, clockwise in image coordinates with y
    /// down) about `center`, followed by a shift of `(tx, ty)`.
    pub fn rotation_about(center: (f64, f64), angle: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let (cx, cy) = center;
        Self::new([
            [c, -s, cx - c * cx + s * cy + tx],
            [s, c, cy - s * cx - c * cy + ty],
        ])
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        (
            m[0][0] * x + m[0][1] * y + m[0][2],
            m[1][0] * x + m[1][1] * y + m[1][2],
        )
    }

    pub fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Ratio of singular values of the linear part (infinite if singular).
    pub fn condition_number(&self) -> f64 {
        let lin = Matrix2::new(self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]);
        let sv = lin.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if lo > 0.0 { hi / lo } else { f64::INFINITY }
    }

    pub fn is_valid(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
            && self.determinant() != 0.0
            && self.condition_number() < MAX_CONDITION
    }

    /// Rotation angle of the closest similarity, radians.
    pub fn rotation_angle(&self) -> f64 {
        (self.m[1][0] - self.m[0][1]).atan2(self.m[0][0] + self.m[1][1])
    }

    pub fn to_array(&self) -> [f64; 6] {
        let m = &self.m;
        [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2]]
    }

    fn residual(&self, c: &Correspondence) -> f64 {
        let (u, v) = self.apply(c.query_kp.x, c.query_kp.y);
        (u - c.train_kp.x).hypot(v - c.train_kp.y)
    }
}

/// Query point paired with its train point.
pub type PointPair = ((f64, f64), (f64, f64));

/// Exact affine through three point pairs; `None` if the query triple is
/// (nearly) collinear or the result is not a valid model.
pub fn solve_minimal(pairs: [PointPair; 3]) -> Option<AffineTransform> {
    let [(p0, _), (p1, _), (p2, _)] = pairs;
    let area2 = (p1.0 - p0.0) * (p2.1 - p0.1) - (p2.0 - p0.0) * (p1.1 - p0.1);
    if area2.abs() < 1e-6 {
        return None;
    }
    let a = Matrix3::from_fn(|r, c| match c {
        0 => pairs[r].0 .0,
        1 => pairs[r].0 .1,
        _ => 1.0,
    });
    let lu = a.lu();
    let row_u = lu.solve(&Vector3::from_fn(|r, _| pairs[r].1 .0))?;
    let row_v = lu.solve(&Vector3::from_fn(|r, _| pairs[r].1 .1))?;
    let t = AffineTransform::new([[row_u[0], row_u[1], row_u[2]], [row_v[0], row_v[1], row_v[2]]]);
    t.is_valid().then_some(t)
}

/// Least-squares affine over all pairs (centered normal equations).
pub fn fit_least_squares(pairs: &[PointPair]) -> Option<AffineTransform> {
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0 .0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.0 .1).sum::<f64>() / n;
    let mut ata = Matrix3::zeros();
    let mut atu = Vector3::zeros();
    let mut atv = Vector3::zeros();
    for &((x, y), (u, v)) in pairs {
        let row = Vector3::new(x - mx, y - my, 1.0);
        ata += row * row.transpose();
        atu += row * u;
        atv += row * v;
    }
    let chol = ata.cholesky()?;
    let pu = chol.solve(&atu);
    let pv = chol.solve(&atv);
    let t = AffineTransform::new([
        [pu[0], pu[1], pu[2] - pu[0] * mx - pu[1] * my],
        [pv[0], pv[1], pv[2] - pv[0] * mx - pv[1] * my],
    ]);
    t.is_valid().then_some(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Reprojection distance below which a pair is an inlier, pixels.
    pub inlier_tol: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_tol: 3.0,
            iterations: 500,
            seed: 0,
        }
    }
}

fn inlier_mask(model: &AffineTransform, corr: &[Correspondence], tol: f64) -> Vec<bool> {
    corr.iter().map(|c| model.residual(c) <= tol).collect()
}

fn pairs_of(corr: &[Correspondence], mask: &[bool]) -> Vec<PointPair> {
    corr.iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(c, _)| ((c.query_kp.x, c.query_kp.y), (c.train_kp.x, c.train_kp.y)))
        .collect()
}

/// Robust affine estimate from putative correspondences.
///
/// Each iteration solves a random minimal triple; the model with the most
/// inliers wins (the earliest on ties). The winner is refit by least squares
/// on its inliers, repeating while the inlier set keeps growing.
pub fn estimate_affine_ransac(
    corr: &[Correspondence],
    params: &RansacParams,
) -> Result<(AffineTransform, Vec<bool>)> {
    if corr.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: corr.len(),
        });
    }
    if !(params.inlier_tol > 0.0) || params.iterations == 0 {
        return Err(Error::InvalidCall("RANSAC needs inlier_tol > 0 and iterations > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = corr.len();
    let point = |i: usize| {
        let c = &corr[i];
        ((c.query_kp.x, c.query_kp.y), (c.train_kp.x, c.train_kp.y))
    };

    let mut best: Option<(AffineTransform, usize)> = None;
    for _ in 0..params.iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..n - 2);
        for lo in [i.min(j), i.max(j)] {
            if k >= lo {
                k += 1;
            }
        }
        let Some(model) = solve_minimal([point(i), point(j), point(k)]) else {
            continue;
        };
        let count = corr.iter().filter(|c| model.residual(c) <= params.inlier_tol).count();
        if best.is_none_or(|(_, b)| count > b) {
            best = Some((model, count));
        }
    }
    let Some((mut model, _)) = best else {
        return Err(Error::Degenerate(format!(
            "all {} sampled triples were collinear",
            params.iterations
        )));
    };

    let mut mask = inlier_mask(&model, corr, params.inlier_tol);
    let mut count = mask.iter().filter(|&&m| m).count();
    for _ in 0..10 {
        let Some(refit) = fit_least_squares(&pairs_of(corr, &mask)) else {
            break;
        };
        let new_mask = inlier_mask(&refit, corr, params.inlier_tol);
        let new_count = new_mask.iter().filter(|&&m| m).count();
        if new_count < count {
            break;
        }
        let settled = new_mask == mask;
        model = refit;
        mask = new_mask;
        count = new_count;
        if settled {
            break;
        }
    }
    Ok((model, mask))
}

/// Pixel offset from the train center to the query center mapped through
/// `affine`.
pub fn center_offset(affine: &AffineTransform, query_size: (usize, usize), train_size: (usize, usize)) -> (f64, f64) {
    let (u, v) = affine.apply(query_size.0 as f64 / 2.0, query_size.1 as f64 / 2.0);
    (u - train_size.0 as f64 / 2.0, v - train_size.1 as f64 / 2.0)
}

/// Distance in meters between the mapped query center and the train center.
pub fn center_distance(affine: &AffineTransform, query_size: (usize, usize), train_size: (usize, usize), gsd: f64) -> f64 {
    let (dx, dy) = center_offset(affine, query_size, train_size);
    dx.hypot(dy) * gsd
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::Keypoint;
    use rand_distr::{Distribution, Normal};

    fn corr(q: (f64, f64), t: (f64, f64)) -> Correspondence {
        let kp = |(x, y): (f64, f64)| Keypoint { x, y, response: 1.0, scale: 1.5 };
        Correspondence {
            query_kp: kp(q),
            train_kp: kp(t),
            query_index: 0,
            train_index: 0,
            distance: 0.0,
            passed_ratio_test: true,
        }
    }

    fn assert_close(a: &AffineTransform, b: &AffineTransform, tol: f64) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn exact_affine_recovered() {
        let truth = AffineTransform::new([[1.02, -0.15, 12.5], [0.12, 0.97, -33.25]]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c: Vec<Correspondence> = (0..80)
            .map(|_| {
                let q = (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
                corr(q, truth.apply(q.0, q.1))
            })
            .collect();
        let (est, mask) = estimate_affine_ransac(&c, &RansacParams::default()).unwrap();
        assert!(mask.iter().all(|&m| m));
        assert_close(&est, &truth, 1e-6);
    }

    #[test]
    fn three_identity_pairs() {
        let c = vec![corr((0.0, 0.0), (0.0, 0.0)), corr((10.0, 0.0), (10.0, 0.0)), corr((0.0, 7.0), (0.0, 7.0))];
        let (est, mask) = estimate_affine_ransac(&c, &RansacParams::default()).unwrap();
        assert_eq!(mask, vec![true; 3]);
        assert_close(&est, &AffineTransform::IDENTITY, 1e-12);
    }

    #[test]
    fn error_paths() {
        let c = vec![corr((0.0, 0.0), (0.0, 0.0)), corr((1.0, 1.0), (1.0, 1.0))];
        assert!(matches!(
            estimate_affine_ransac(&c, &RansacParams::default()),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
        let line: Vec<Correspondence> = (0..10).map(|i| corr((i as f64, 2.0 * i as f64), (i as f64, 0.0))).collect();
        assert!(matches!(
            estimate_affine_ransac(&line, &RansacParams::default()),
            Err(Error::Degenerate(_))
        ));
    }

    /// Synthetic ground-truth trial: rotation up to 10 degrees, translation up
    /// to 40 px, 0.3 px inlier noise, the given fraction of uniform outliers.
    pub(crate) fn recovery_trial(seed: u64, outlier_fraction: f64, params: &RansacParams) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angle = rng.random_range(-10.0f64..=10.0).to_radians();
        let r = 40.0 * rng.random_range(0.0f64..=1.0).sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let truth = AffineTransform::rotation_about((320.0, 240.0), angle, r * phi.cos(), r * phi.sin());
        let noise = Normal::new(0.0, 0.3).unwrap();
        let n = 150;
        let outliers = (outlier_fraction * n as f64).round() as usize;
        let c: Vec<Correspondence> = (0..n)
            .map(|i| {
                let q = (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
                if i < outliers {
                    corr(q, (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)))
                } else {
                    let (u, v) = truth.apply(q.0, q.1);
                    corr(q, (u + noise.sample(&mut rng), v + noise.sample(&mut rng)))
                }
            })
            .collect();
        let (est, _) = estimate_affine_ransac(&c, &RansacParams { seed, ..*params }).unwrap();
        let (tu, tv) = truth.apply(320.0, 240.0);
        let (eu, ev) = est.apply(320.0, 240.0);
        ((tu - eu).hypot(tv - ev), (truth.rotation_angle() - est.rotation_angle()).abs().to_degrees())
    }

    #[test]
    fn recovery_with_sixty_percent_outliers() {
        let params = RansacParams { inlier_tol: 2.0, iterations: 200, seed: 0 };
        let ok = (0..100)
            .filter(|&s| {
                let (t, r) = recovery_trial(s, 0.6, &params);
                t < 0.5 && r < 0.5
            })
            .count();
        assert!(ok >= 99, "{ok}/100");
    }

    #[test]
    fn deterministic_given_seed() {
        let p = RansacParams::default();
        assert_eq!(recovery_trial(7, 0.5, &p), recovery_trial(7, 0.5, &p));
    }

    #[test]
    fn center_distance_examples() {
        assert_eq!(center_distance(&AffineTransform::IDENTITY, (640, 480), (640, 480), 0.25), 0.0);
        let shifted = AffineTransform::translation(40.0, 0.0);
        assert!((center_distance(&shifted, (640, 480), (640, 480), 0.25) - 10.0).abs() < 1e-12);
        let rot = AffineTransform::rotation_about((320.0, 240.0), 0.3, 0.0, 0.0);
        assert!(center_distance(&rot, (640, 480), (640, 480), 0.25) < 1e-9);
        assert_eq!(center_offset(&shifted, (640, 480), (640, 480)), (40.0, 0.0));
    }

    #[test]
    fn validity() {
        assert!(AffineTransform::IDENTITY.is_valid());
        assert!(!AffineTransform::new([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]]).is_valid());
        assert!(!AffineTransform::new([[1.0, 0.0, 0.0], [0.0, 1e-9, 0.0]]).is_valid());
        let r = AffineTransform::rotation_about((0.0, 0.0), 0.2, 0.0, 0.0);
        assert!((r.rotation_angle() - 0.2).abs() < 1e-12);
        assert!((r.condition_number() - 1.0).abs() < 1e-9);
    }
}
