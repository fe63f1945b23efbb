//! Landmark recognition: corners, patch descriptors, matching, robust affine
//! fitting, and the center-distance arrival test.

mod affine;
mod descriptor;
mod gray;
mod harris;
mod matcher;


use crate::error::{Error, Result};
use crate::grid::{LandmarkId, WorldPoint};
use crate::imagery::RasterImage;

pub use affine::{
    center_distance, center_offset, estimate_affine_ransac, fit_least_squares, solve_minimal, AffineTransform,
    RansacParams, MAX_CONDITION,
};
pub use descriptor::{describe, Described};
pub use harris::{detect_keypoints, DetectorParams};
pub use matcher::match_descriptors;

/// Half the side of the square descriptor patch, pixels.
pub const DESCRIPTOR_RADIUS: usize = 16;
pub const DESCRIPTOR_LEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub response: f64,
    pub scale: f64,
}

/// Unit-norm gradient histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptor(pub [f32; DESCRIPTOR_LEN]);

impl Descriptor {
    pub fn distance_squared(&self, other: &Descriptor) -> f32 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn distance(&self, other: &Descriptor) -> f32 {
        self.distance_squared(other).sqrt()
    }

    pub fn norm(&self) -> f32 {
        self.0.iter().map(|v| v * v).sum::<f32>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub query_kp: Keypoint,
    pub train_kp: Keypoint,
    pub query_index: usize,
    pub train_index: usize,
    pub distance: f64,
    /// False only on the degenerate path where the train side had fewer than
    /// two descriptors and no ratio could be formed.
    pub passed_ratio_test: bool,
}

/// Keypoints and descriptors of one image, plus its size.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub width: usize,
    pub height: usize,
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    pub dropped: usize,
}

impl DescriptorSet {
    pub fn extract(img: &RasterImage, params: &DetectorParams) -> Result<Self> {
        let kps = detect_keypoints(img, params)?;
        let d = describe(img, &kps);
        Ok(Self {
            width: img.width(),
            height: img.height(),
            keypoints: d.keypoints,
            descriptors: d.descriptors,
            dropped: d.dropped,
        })
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub detector: DetectorParams,
    pub ratio: f64,
    pub ransac: RansacParams,
    pub min_inliers: usize,
    pub distance_threshold_m: f64,
    /// Ground sample distance of both images, meters per pixel.
    pub gsd: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            detector: DetectorParams::default(),
            ratio: 0.8,
            ransac: RansacParams::default(),
            min_inliers: 30,
            distance_threshold_m: 5.0,
            gsd: 0.25,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.detector.max_keypoints == 0 {
            return bad("matching.max_keypoints must be positive");
        }
        if !(self.detector.nms_radius >= 0.0) || !(self.detector.sigma > 0.0) {
            return bad("matching.nms_radius must be >= 0 and sigma > 0");
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return bad("matching.ratio must be in (0, 1]");
        }
        if !(self.ransac.inlier_tol > 0.0) || self.ransac.iterations == 0 {
            return bad("matching.inlier_tol and matching.ransac_iterations must be positive");
        }
        if !(self.distance_threshold_m >= 0.0) || !(self.gsd > 0.0) {
            return bad("matching.distance_threshold_m must be >= 0 and gsd > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub target: LandmarkId,
    pub correspondences: Vec<Correspondence>,
    pub inlier_mask: Vec<bool>,
    pub inliers: usize,
    pub affine: Option<AffineTransform>,
    /// Meters; present exactly when `affine` is.
    pub center_distance: Option<f64>,
    /// Train-image pixel offset of the mapped query center from the train
    /// center; present exactly when `affine` is.
    pub center_offset_px: Option<(f64, f64)>,
}

impl MatchResult {
    fn unmatched(target: LandmarkId, correspondences: Vec<Correspondence>) -> Self {
        let n = correspondences.len();
        Self {
            target,
            correspondences,
            inlier_mask: vec![false; n],
            inliers: 0,
            affine: None,
            center_distance: None,
            center_offset_px: None,
        }
    }

    /// Raw correspondence count, before RANSAC.
    pub fn matches(&self) -> usize {
        self.correspondences.len()
    }

    /// Offset of the query center from the train center in world axes
    /// (east, north), assuming a north-up train image.
    pub fn center_offset_world(&self, gsd: f64) -> Option<WorldPoint> {
        self.center_offset_px.map(|(dx, dy)| WorldPoint::new(dx * gsd, -dy * gsd))
    }
}

/// Matches a described query image against one candidate.
pub fn match_sets(query: &DescriptorSet, train: &DescriptorSet, target: LandmarkId, params: &MatchParams) -> Result<MatchResult> {
    let corr = match_descriptors(&query.keypoints, &query.descriptors, &train.keypoints, &train.descriptors, params.ratio)?;
    let (affine, mask) = match estimate_affine_ransac(&corr, &params.ransac) {
        Ok(fit) => fit,
        Err(Error::InsufficientData { .. } | Error::Degenerate(_)) => return Ok(MatchResult::unmatched(target, corr)),
        Err(e) => return Err(e),
    };
    let offset = center_offset(&affine, query.size(), train.size());
    Ok(MatchResult {
        target,
        inliers: mask.iter().filter(|&&m| m).count(),
        inlier_mask: mask,
        affine: Some(affine),
        center_distance: Some(offset.0.hypot(offset.1) * params.gsd),
        center_offset_px: Some(offset),
        correspondences: corr,
    })
}

/// Orders results: models before failures, then more inliers, then smaller
/// center distance, then the original candidate order.
pub fn sort_results(results: &mut [MatchResult]) {
    results.sort_by(|a, b| {
        b.affine
            .is_some()
            .cmp(&a.affine.is_some())
            .then(b.inliers.cmp(&a.inliers))
            .then_with(|| {
                let da = a.center_distance.unwrap_or(f64::INFINITY);
                let db = b.center_distance.unwrap_or(f64::INFINITY);
                da.total_cmp(&db)
            })
    });
}

/// Ranks candidates against an already described observation.
pub fn rank_described(observation: &DescriptorSet, candidates: &[(LandmarkId, &DescriptorSet)], params: &MatchParams) -> Result<Vec<MatchResult>> {
    if candidates.is_empty() {
        return Err(Error::InvalidCall("rank_neighbors needs at least one candidate".into()));
    }
    let mut results = candidates
        .iter()
        .map(|(id, set)| match_sets(observation, set, *id, params))
        .collect::<Result<Vec<_>>>()?;
    sort_results(&mut results);
    Ok(results)
}

/// Runs the full pipeline of the observation against each candidate and
/// returns the results best first.
pub fn rank_neighbors(observation: &RasterImage, candidates: &[(LandmarkId, &DescriptorSet)], params: &MatchParams) -> Result<Vec<MatchResult>> {
    if candidates.is_empty() {
        return Err(Error::InvalidCall("rank_neighbors needs at least one candidate".into()));
    }
    let obs = DescriptorSet::extract(observation, &params.detector)?;
    rank_described(&obs, candidates, params)
}

/// True when the result has a model with enough inliers whose mapped
/// center lies within `distance_threshold` meters.
pub fn arrival_check(result: &MatchResult, distance_threshold: f64, min_inliers: usize) -> bool {
    match (result.affine, result.center_distance) {
        (Some(_), Some(d)) => result.inliers >= min_inliers && d <= distance_threshold,
        _ => false,
    }
}
