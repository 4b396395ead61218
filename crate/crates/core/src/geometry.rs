//! Small 2-D helpers shared by the annotation, phraselet and inference code.
//!
//! Image coordinates throughout: `x` grows to the right, `y` grows downward,
//! and an angle `θ` names the direction `(cos θ, sin θ)` in those coordinates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        self.sub(other).norm()
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    /// Angle of this vector, in `(-π, π]`.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotates the vector by `theta` (the matrix `R_θ`).
    pub fn rotate(self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Rotates the point by `theta` about `center`.
    pub fn rotate_about(self, center: Point, theta: f64) -> Point {
        center.add(self.sub(center).rotate(theta))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Angle of orientation bin `bin` out of `count` uniform bins over the full circle.
pub fn bin_angle(bin: usize, count: usize) -> f64 {
    if count <= 1 {
        0.0
    } else {
        2.0 * PI * bin as f64 / count as f64
    }
}

/// Nearest of `count` uniform orientation bins to `theta`.
pub fn quantize_angle(theta: f64, count: usize) -> usize {
    if count <= 1 {
        return 0;
    }
    let step = 2.0 * PI / count as f64;
    let k = (theta.rem_euclid(2.0 * PI) / step).round() as usize;
    k % count
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}
