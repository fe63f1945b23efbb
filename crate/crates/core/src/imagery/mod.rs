//! Raster world model: a geo-registered orthophoto, landmark descriptor
//! crops, and perturbed nadir observations rendered from arbitrary poses.

mod geo;
pub mod pnm;
mod raster;
mod render;
mod world;

pub use geo::{GeoRegistration, Pose, RegistrationSidecar};
pub use raster::RasterImage;
pub use render::{
    landmark_descriptor_image, render_observation, render_with, GeometricJitter, PerturbationSpec, Photometric,
};
pub use world::{build_world, SynthesisParams, World, WorldSource};

/// Width of descriptor crops and observations, pixels.
pub const OBS_WIDTH: usize = 640;
/// Height of descriptor crops and observations, pixels.
pub const OBS_HEIGHT: usize = 480;
