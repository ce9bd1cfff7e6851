//! Minimal 2D vector plus periodic-box helpers.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Signed angle (radians, counter-clockwise positive) rotating `self` onto `other`.
    pub fn signed_angle_to(self, other: Vec2) -> f64 {
        self.cross(other).atan2(self.dot(other))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap a coordinate into `[0, box_l)`.
pub fn wrap_coord(x: f64, box_l: f64) -> f64 {
    let w = x - box_l * (x / box_l).floor();
    // floor can leave w == box_l for tiny negative x
    if w >= box_l || w < 0.0 {
        0.0
    } else {
        w
    }
}

pub fn wrap(p: Vec2, box_l: f64) -> Vec2 {
    Vec2::new(wrap_coord(p.x, box_l), wrap_coord(p.y, box_l))
}

/// Minimum-image reduction of one separation component.
///
/// Symmetric under negation bit for bit (`min_image_coord(-d) == -min_image_coord(d)`);
/// pair forces rely on that.
pub fn min_image_coord(d: f64, box_l: f64) -> f64 {
    let half = 0.5 * box_l;
    if d > half {
        if d - box_l > half || d - box_l < -half {
            return d - box_l * (d / box_l).round();
        }
        d - box_l
    } else if d < -half {
        if d + box_l < -half || d + box_l > half {
            return d - box_l * (d / box_l).round();
        }
        d + box_l
    } else {
        d
    }
}

/// Minimum-image separation `a - b`.
pub fn min_image(a: Vec2, b: Vec2, box_l: f64) -> Vec2 {
    Vec2::new(
        min_image_coord(a.x - b.x, box_l),
        min_image_coord(a.y - b.y, box_l),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_box() {
        for x in [-36.0, -1e-18, -0.5, 0.0, 35.999, 36.0, 71.9, 1e6] {
            let w = wrap_coord(x, 36.0);
            assert!((0.0..36.0).contains(&w), "{x} -> {w}");
        }
        assert_eq!(wrap_coord(36.5, 36.0), 0.5);
    }

    #[test]
    fn min_image_is_antisymmetric() {
        let l = 36.0;
        let a = Vec2::new(35.2, 0.3);
        let b = Vec2::new(0.7, 18.0);
        let d1 = min_image(a, b, l);
        let d2 = min_image(b, a, l);
        assert_eq!(d1, -d2);
        assert!(d1.x.abs() <= l / 2.0 && d1.y.abs() <= l / 2.0);
        for d in [-100.0, -53.9, -18.0, -17.9, 0.0, 17.9, 18.0, 18.1, 35.9, 71.0, 100.0] {
            let m = min_image_coord(d, l);
            assert!(m.abs() <= l / 2.0, "{d} -> {m}");
            assert_eq!(min_image_coord(-d, l), -m);
            assert!(((d - m) / l - ((d - m) / l).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn signed_angle() {
        let a = Vec2::new(1.0, 0.0);
        assert!((a.signed_angle_to(Vec2::new(0.0, 1.0)) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((a.signed_angle_to(Vec2::new(0.0, -1.0)) + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
