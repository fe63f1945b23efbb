use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use uasnav_bench::{landmark_crop, reference_task, synthetic_correspondences, world};
use uasnav_core::matching::{detect_keypoints, estimate_affine_ransac, match_sets, DescriptorSet, RansacParams};
use uasnav_core::rl::{train, value_iteration, ValueIterationOptions};
use uasnav_core::{LandmarkId, MatchParams, TrainConfig};

fn rl(c: &mut Criterion) {
    let task = reference_task();
    c.bench_function("value_iteration", |b| {
        b.iter(|| value_iteration(black_box(&task), &ValueIterationOptions::default()).unwrap())
    });
    c.bench_function("q_learning_2000_episodes", |b| {
        b.iter(|| train(black_box(&task), &TrainConfig::default()).unwrap())
    });
}

fn matching(c: &mut Criterion) {
    let (grid, world) = world();
    let a = landmark_crop(&world, &grid, 4, 4);
    let b_img = landmark_crop(&world, &grid, 5, 4);
    let params = MatchParams::default();
    c.bench_function("detect_keypoints", |b| {
        b.iter(|| detect_keypoints(black_box(&a), &params.detector).unwrap())
    });
    c.bench_function("extract_descriptor_set", |b| {
        b.iter(|| DescriptorSet::extract(black_box(&a), &params.detector).unwrap())
    });
    let sa = DescriptorSet::extract(&a, &params.detector).unwrap();
    let sb = DescriptorSet::extract(&b_img, &params.detector).unwrap();
    c.bench_function("match_and_ransac_neighbors", |b| {
        b.iter(|| match_sets(black_box(&sa), black_box(&sb), LandmarkId { col: 5, row: 4 }, &params).unwrap())
    });
    let corr = synthetic_correspondences(300, 180);
    c.bench_function("ransac_300_pairs_60pct_outliers", |b| {
        b.iter(|| estimate_affine_ransac(black_box(&corr), &RansacParams::default()).unwrap())
    });
}

criterion_group!(benches, rl, matching);
criterion_main!(benches);
