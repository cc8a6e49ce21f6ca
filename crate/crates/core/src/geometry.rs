//! Planar/3-D geometry helpers shared by the trajectory, drop and evolution code.
//!
//! Conventions: the base station sits at the origin of a horizontal x/y plane,
//! azimuths are measured counter-clockwise from +x and zenith angles from +z.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A point or vector in the horizontal plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `heading` (radians from +x).
    pub fn from_heading(heading: f64) -> Self {
        Self::new(heading.cos(), heading.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Direction of this vector, radians in (-π, π].
    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Base-station/user-terminal link geometry at one UT position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub bs_position: Vec2,
    pub ut_position: Vec2,
    pub bs_height: f64,
    pub ut_height: f64,
}

impl LinkGeometry {
    pub fn d_2d(&self) -> f64 {
        self.ut_position.distance(self.bs_position)
    }

    pub fn d_3d(&self) -> f64 {
        self.d_2d().hypot(self.bs_height - self.ut_height)
    }

    /// Azimuth of departure of the direct path (BS toward UT).
    pub fn los_aod(&self) -> f64 {
        (self.ut_position - self.bs_position).heading()
    }

    /// Azimuth of arrival of the direct path (UT toward BS).
    pub fn los_aoa(&self) -> f64 {
        (self.bs_position - self.ut_position).heading()
    }

    /// Zenith of departure of the direct path, in (0, π).
    pub fn los_zod(&self) -> f64 {
        self.d_2d().atan2(self.ut_height - self.bs_height)
    }

    /// Zenith of arrival of the direct path, in (0, π).
    pub fn los_zoa(&self) -> f64 {
        self.d_2d().atan2(self.bs_height - self.ut_height)
    }
}

/// Unit vector for an (azimuth, zenith) direction.
pub fn direction_vector(azimuth: f64, zenith: f64) -> [f64; 3] {
    let (sz, cz) = zenith.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    [sz * ca, sz * sa, cz]
}

/// Wraps an angle into (-π, π].
pub fn wrap_pi(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Wraps an angle into [0, 2π).
pub fn wrap_two_pi(angle: f64) -> f64 {
    if (0.0..TAU).contains(&angle) {
        return angle;
    }
    let a = angle.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if a >= TAU {
        0.0
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_pi_range() {
        assert_eq!(wrap_pi(PI), PI);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-15);
        assert!((wrap_pi(PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_pi(7.0 * PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_pi(0.3), 0.3);
    }

    #[test]
    fn wrap_two_pi_range() {
        assert_eq!(wrap_two_pi(0.0), 0.0);
        assert!((wrap_two_pi(-0.5) - (TAU - 0.5)).abs() < 1e-12);
        assert!(wrap_two_pi(-1e-300) < TAU);
    }

    #[test]
    fn los_angles_are_reciprocal() {
        let g = LinkGeometry {
            bs_position: Vec2::ZERO,
            ut_position: Vec2::new(30.0, 40.0),
            bs_height: 10.0,
            ut_height: 1.5,
        };
        assert_eq!(g.d_2d(), 50.0);
        assert!((wrap_pi(g.los_aoa() - g.los_aod()) - PI).abs() < 1e-12);
        assert!((g.los_zod() + g.los_zoa() - PI).abs() < 1e-12);
        assert!(g.los_zod() > PI / 2.0);
    }

    #[test]
    fn direction_vector_is_unit() {
        let v = direction_vector(1.1, 0.7);
        let n = v.iter().map(|c| c * c).sum::<f64>();
        assert!((n - 1.0).abs() < 1e-12);
    }
}
