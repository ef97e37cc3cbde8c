//! Planar aircraft state.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Position in meters and heading in radians of one aircraft.
///
/// Headings are allowed to accumulate past ±π; anything that compares
/// headings goes through [`wrap_angle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }

    /// Horizontal distance, heading ignored.
    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Heading difference `self - other` wrapped into (-π, π].
    pub fn heading_error(&self, other: &Pose) -> f64 {
        wrap_angle(self.heading - other.heading)
    }

    /// Reflection across the x-axis.
    pub fn mirrored(&self) -> Pose {
        Pose::new(self.x, -self.y, -self.heading)
    }

    /// Rigid transform: rotate about the origin by `angle`, then translate.
    pub fn transformed(&self, angle: f64, dx: f64, dy: f64) -> Pose {
        let (s, c) = angle.sin_cos();
        Pose::new(
            c * self.x - s * self.y + dx,
            s * self.x + c * self.y + dy,
            self.heading + angle,
        )
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Wraps an angle into [0, 2π).
pub(crate) fn mod_two_pi(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}
