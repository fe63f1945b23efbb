//! Landmark-based aerial navigation at desk scale.
//!
//! Two phases share this crate. Policy learning treats a lattice of
//! landmarks as a small deterministic MDP and learns a goal-reaching policy
//! with tabular Q-learning, checked against exact value iteration. Flight
//! then replays that policy over a simulated orthophoto: the camera renders
//! nadir observations, keypoint matching with a RANSAC affine fit decides
//! when a landmark has been reached, and the policy picks the next move.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod imagery;
pub mod matching;
pub mod navigator;
pub mod rl;
pub mod seed;
pub mod svg;

pub use error::{Error, Result};
pub use grid::{Action, EpisodeLog, GridSpec, LandmarkId, RewardSpec, Transition, WorldPoint};
pub use imagery::{GeoRegistration, PerturbationSpec, Pose, RasterImage, World};
pub use matching::{AffineTransform, Correspondence, Descriptor, DescriptorSet, Keypoint, MatchParams, MatchResult};
pub use navigator::{MissionConfig, MissionLog, Outcome};
pub use rl::{PolicyTable, QFunction, QTable, Task, TrainConfig, TrainingCurve};
