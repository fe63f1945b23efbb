use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::WorldPoint;

/// Maps world meters to raster pixels. Pixels are square, columns grow east
/// and rows grow south; `origin` is the world position of pixel (0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoRegistration {
    pub gsd: f64,
    pub origin: WorldPoint,
}

/// JSON sidecar written next to a world raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrationSidecar {
    pub gsd_m_per_px: f64,
    pub origin_x_m: f64,
    pub origin_y_m: f64,
}

impl GeoRegistration {
    pub fn new(gsd: f64, origin: WorldPoint) -> Result<Self> {
        if !(gsd > 0.0 && gsd.is_finite()) {
            return Err(Error::Config(format!("gsd must be positive, got {gsd}")));
        }
        Ok(Self { gsd, origin })
    }

    /// Sub-pixel raster coordinates `(column, row)` of a world point.
    pub fn world_to_pixel(&self, p: WorldPoint) -> (f64, f64) {
        ((p.x - self.origin.x) / self.gsd, (self.origin.y - p.y) / self.gsd)
    }

    pub fn pixel_to_world(&self, px: f64, py: f64) -> WorldPoint {
        WorldPoint::new(self.origin.x + px * self.gsd, self.origin.y - py * self.gsd)
    }

    pub fn to_sidecar(&self) -> RegistrationSidecar {
        RegistrationSidecar {
            gsd_m_per_px: self.gsd,
            origin_x_m: self.origin.x,
            origin_y_m: self.origin.y,
        }
    }

    pub fn from_sidecar(s: &RegistrationSidecar) -> Result<Self> {
        Self::new(s.gsd_m_per_px, WorldPoint::new(s.origin_x_m, s.origin_y_m))
    }
}

/// Camera pose: nadir view centered at `position`, `heading` clockwise from
/// north in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: WorldPoint,
    pub heading: f64,
}

impl Pose {
    pub fn north_up(position: WorldPoint) -> Self {
        Self {
            position,
            heading: 0.0,
        }
    }

    /// Wraps `heading` into `[-pi, pi)`.
    pub fn new(position: WorldPoint, heading: f64) -> Self {
        use std::f64::consts::{PI, TAU};
        let h = (heading + PI).rem_euclid(TAU) - PI;
        Self { position, heading: h }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn axis_conventions() {
        let reg = GeoRegistration::new(0.25, WorldPoint::new(-80.0, 330.0)).unwrap();
        assert_eq!(reg.world_to_pixel(WorldPoint::new(-80.0, 330.0)), (0.0, 0.0));
        // East is +column, north is -row.
        assert_eq!(reg.world_to_pixel(WorldPoint::new(-79.0, 329.0)), (4.0, 4.0));
        assert!(GeoRegistration::new(0.0, WorldPoint::default()).is_err());
    }

    #[test]
    fn heading_wraps() {
        use std::f64::consts::PI;
        assert!((Pose::new(WorldPoint::default(), PI).heading + PI).abs() < 1e-12);
        assert!((Pose::new(WorldPoint::default(), 3.0 * PI / 2.0).heading + PI / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn world_pixel_round_trip(x in -1e4f64..1e4, y in -1e4f64..1e4, gsd in 0.05f64..2.0, ox in -500f64..500.0, oy in -500f64..500.0) {
            let reg = GeoRegistration::new(gsd, WorldPoint::new(ox, oy)).unwrap();
            let (px, py) = reg.world_to_pixel(WorldPoint::new(x, y));
            let back = reg.pixel_to_world(px, py);
            prop_assert!((back.x - x).abs() < 1e-9 && (back.y - y).abs() < 1e-9);
        }
    }
}
