//! Shared fixtures for the benchmarks.

use uasnav_core::imagery::{landmark_descriptor_image, SynthesisParams};
use uasnav_core::matching::{Correspondence, Keypoint};
use uasnav_core::{GridSpec, LandmarkId, RasterImage, RewardSpec, Task, World};

pub fn reference_task() -> Task {
    Task::new(GridSpec::default(), RewardSpec::default(), LandmarkId { col: 5, row: 5 })
}

pub fn world() -> (GridSpec, World) {
    let grid = GridSpec::default();
    let world = SynthesisParams::default().synthesize(&grid).expect("default world");
    (grid, world)
}

pub fn landmark_crop(world: &World, grid: &GridSpec, col: usize, row: usize) -> RasterImage {
    landmark_descriptor_image(world, grid, LandmarkId { col, row }).expect("crop inside world")
}

/// `n` correspondences under a fixed rotation and shift, the first
/// `outliers` of them scrambled deterministically.
pub fn synthetic_correspondences(n: usize, outliers: usize) -> Vec<Correspondence> {
    let (s, c) = 0.1f64.sin_cos();
    (0..n)
        .map(|i| {
            let x = (i * 97 % 640) as f64 + 0.25;
            let y = (i * 61 % 480) as f64 + 0.5;
            let (u, v) = if i < outliers {
                ((i * 389 % 640) as f64, (i * 211 % 480) as f64)
            } else {
                (c * x - s * y + 12.0, s * x + c * y - 7.0)
            };
            let kp = |x, y| Keypoint { x, y, response: 1.0, scale: 1.5 };
            Correspondence {
                query_kp: kp(x, y),
                train_kp: kp(u, v),
                query_index: i,
                train_index: i,
                distance: 0.0,
                passed_ratio_test: true,
            }
        })
        .collect()
}
