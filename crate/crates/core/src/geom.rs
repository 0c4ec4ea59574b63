//! 2D positions and angles on the simulation plane (meters, degrees).

use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: Scalar,
    pub y: Scalar,
}

impl Vec2 {
    pub fn new(x: Scalar, y: Scalar) -> Self {
        Vec2 { x, y }
    }

    pub fn distance(self, other: Vec2) -> Scalar {
        (self - other).length()
    }

    pub fn length(self) -> Scalar {
        self.x.hypot(self.y)
    }

    /// Bearing of `other` as seen from `self`, in degrees, measured
    /// counter-clockwise from the +x axis, in (-180, 180].
    pub fn bearing_deg(self, other: Vec2) -> Scalar {
        let d = other - self;
        d.y.atan2(d.x).to_degrees()
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Mul<Scalar> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: Scalar) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Normalizes an angular difference in degrees to [-180, 180].
pub fn wrap_angle_deg(angle: Scalar) -> Scalar {
    let mut a = angle % 360.0;
    if a > 180.0 {
        a -= 360.0;
    } else if a < -180.0 {
        a += 360.0;
    }
    a
}

/// Axis-aligned rectangle; `min`/`max` are opposite corners.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn centered_square(half_width: Scalar) -> Self {
        Bounds {
            min: Vec2::new(-half_width, -half_width),
            max: Vec2::new(half_width, half_width),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_stays_in_half_open_range() {
        assert_eq!(wrap_angle_deg(190.0), -170.0);
        assert_eq!(wrap_angle_deg(-190.0), 170.0);
        assert_eq!(wrap_angle_deg(360.0), 0.0);
        assert_eq!(wrap_angle_deg(45.0), 45.0);
    }

    #[test]
    fn bearing_points_along_axes() {
        let o = Vec2::new(0.0, 0.0);
        assert_eq!(o.bearing_deg(Vec2::new(10.0, 0.0)), 0.0);
        assert_eq!(o.bearing_deg(Vec2::new(0.0, 10.0)), 90.0);
    }
}
