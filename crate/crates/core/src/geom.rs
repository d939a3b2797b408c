//! Planar geometry shared by the simulator, hazard model and HUD.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

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

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular (points to the left of `self`).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    pub fn lerp(self, o: Vec2, u: f64) -> Vec2 {
        self + (o - self) * u
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Oriented rectangle footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Self {
            center,
            heading,
            half_length: 0.5 * length,
            half_width: 0.5 * width,
        }
    }

    fn axes(&self) -> (Vec2, Vec2) {
        let fwd = Vec2::from_angle(self.heading);
        (fwd, fwd.perp())
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let (f, l) = self.axes();
        let a = f * self.half_length;
        let b = l * self.half_width;
        [
            self.center + a + b,
            self.center + a - b,
            self.center - a - b,
            self.center - a + b,
        ]
    }

    fn project_radius(&self, axis: Vec2) -> f64 {
        let (f, l) = self.axes();
        self.half_length * f.dot(axis).abs() + self.half_width * l.dot(axis).abs()
    }

    /// Separating-axis overlap test (touching counts as overlap).
    pub fn intersects(&self, other: &Obb) -> bool {
        let d = other.center - self.center;
        if d.norm() > self.bounding_radius() + other.bounding_radius() {
            return false;
        }
        let (f1, l1) = self.axes();
        let (f2, l2) = other.axes();
        [f1, l1, f2, l2].iter().all(|&axis| {
            d.dot(axis).abs() <= self.project_radius(axis) + other.project_radius(axis)
        })
    }

    /// Earliest `u` in `[0, 1]` at which `other`, translated by `u * shift`
    /// relative to `self`, overlaps `self`. Orientations stay fixed.
    pub fn first_contact(&self, other: &Obb, shift: Vec2) -> Option<f64> {
        let d0 = other.center - self.center;
        let reach = self.bounding_radius() + other.bounding_radius();
        let closest = d0 + shift * project_on_segment(Vec2::ZERO, d0, d0 + shift);
        if closest.norm() > reach {
            return None;
        }
        let (f1, l1) = self.axes();
        let (f2, l2) = other.axes();
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for axis in [f1, l1, f2, l2] {
            let r = self.project_radius(axis) + other.project_radius(axis);
            let p = d0.dot(axis);
            let v = shift.dot(axis);
            if v.abs() < 1e-15 {
                if p.abs() > r {
                    return None;
                }
                continue;
            }
            let (a, b) = ((-r - p) / v, (r - p) / v);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
            if lo > hi {
                return None;
            }
        }
        Some(lo)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (f, l) = self.axes();
        let d = p - self.center;
        d.dot(f).abs() <= self.half_length + 1e-12 && d.dot(l).abs() <= self.half_width + 1e-12
    }
}

/// Closest point on segment `a-b` to `p`, returned as the segment parameter in `[0, 1]`.
pub fn project_on_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return 0.0;
    }
    ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
}

/// Proper or touching intersection of segments `p1-p2` and `q1-q2`.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = (q2 - q1).cross(p1 - q1);
    let d2 = (q2 - q1).cross(p2 - q1);
    let d3 = (p2 - p1).cross(q1 - p1);
    let d4 = (p2 - p1).cross(q2 - p1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_seg = |a: Vec2, b: Vec2, c: Vec2, d: f64| {
        d == 0.0
            && c.x >= a.x.min(b.x)
            && c.x <= a.x.max(b.x)
            && c.y >= a.y.min(b.y)
            && c.y <= a.y.max(b.y)
    };
    on_seg(q1, q2, p1, d1)
        || on_seg(q1, q2, p2, d2)
        || on_seg(p1, p2, q1, d3)
        || on_seg(p1, p2, q2, d4)
}

pub fn polylines_intersect(a: &[Vec2], b: &[Vec2]) -> bool {
    a.windows(2).any(|s| {
        b.windows(2)
            .any(|t| segments_intersect(s[0], s[1], t[0], t[1]))
    })
}
