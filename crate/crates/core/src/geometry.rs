//! Planar geometry: vectors, oriented rectangles and the separating-axis overlap test.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Closed-overlap tolerance, in metres.
pub const CONTACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Expresses a world-frame vector in a frame rotated by `heading`.
    pub fn to_frame(self, heading: f64) -> Vec2 {
        let (s, c) = heading.sin_cos();
        Vec2::new(c * self.x + s * self.y, -s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
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
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a >= PI {
        a -= 2.0 * PI;
    }
    a
}

/// A rectangle of `length` along `heading` and `width` across it, centred on `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedRect {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Self {
            center,
            heading,
            length,
            width,
        }
    }

    pub fn axes(&self) -> [Vec2; 2] {
        let fwd = Vec2::from_angle(self.heading);
        [fwd, fwd.perp()]
    }

    /// Corners in counter-clockwise order starting front-right.
    pub fn corners(&self) -> [Vec2; 4] {
        let [fwd, left] = self.axes();
        let hl = fwd * (self.length / 2.0);
        let hw = left * (self.width / 2.0);
        [
            self.center + hl - hw,
            self.center + hl + hw,
            self.center - hl + hw,
            self.center - hl - hw,
        ]
    }

    fn half_extent_on(&self, axis: Vec2) -> f64 {
        let [fwd, left] = self.axes();
        (self.length / 2.0) * fwd.dot(axis).abs() + (self.width / 2.0) * left.dot(axis).abs()
    }

    pub fn half_diagonal(&self) -> f64 {
        (self.length / 2.0).hypot(self.width / 2.0)
    }

    /// True when `p` lies inside or on the boundary (within `tol`).
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        let local = (p - self.center).to_frame(self.heading);
        local.x.abs() <= self.length / 2.0 + tol && local.y.abs() <= self.width / 2.0 + tol
    }
}

/// Result of an overlap query between two rectangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    /// Centroid of the overlap region.
    pub point: Vec2,
    /// Axis of least penetration, oriented from the first rectangle towards the second.
    pub normal: Vec2,
    /// Penetration depth along `normal` (zero for touching contact).
    pub depth: f64,
}

/// Separating-axis test on the four face normals. Touching counts as overlap.
pub fn rect_overlap(a: &OrientedRect, b: &OrientedRect) -> Option<Overlap> {
    let d = b.center - a.center;
    if d.norm() > a.half_diagonal() + b.half_diagonal() + CONTACT_TOLERANCE {
        return None;
    }
    let mut best_axis = Vec2::new(1.0, 0.0);
    let mut best_depth = f64::INFINITY;
    for axis in a.axes().into_iter().chain(b.axes()) {
        let dist = d.dot(axis);
        let depth = a.half_extent_on(axis) + b.half_extent_on(axis) - dist.abs();
        if depth < -CONTACT_TOLERANCE {
            return None;
        }
        if depth < best_depth {
            best_depth = depth;
            best_axis = if dist >= 0.0 { axis } else { -axis };
        }
    }
    let polygon = clip_convex(&a.corners(), &b.corners());
    let point = polygon_centroid(&polygon).unwrap_or_else(|| {
        // Degenerate touch with no surviving clip vertex: nearest corners.
        let inside: Vec<Vec2> = a
            .corners()
            .into_iter()
            .filter(|p| b.contains(*p, 1e-6))
            .chain(b.corners().into_iter().filter(|p| a.contains(*p, 1e-6)))
            .collect();
        if inside.is_empty() {
            (a.center + b.center) * 0.5
        } else {
            mean(&inside)
        }
    });
    Some(Overlap {
        point,
        normal: best_axis,
        depth: best_depth.max(0.0),
    })
}

fn mean(points: &[Vec2]) -> Vec2 {
    let sum = points.iter().fold(Vec2::ZERO, |acc, p| acc + *p);
    sum * (1.0 / points.len() as f64)
}

/// Sutherland-Hodgman clipping of `subject` by a convex counter-clockwise `clip` polygon.
/// Points within `CONTACT_TOLERANCE` outside an edge are kept, so touching yields a
/// degenerate polygon rather than nothing.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b - a;
        let edge_len = edge.norm();
        let side = |p: Vec2| edge.cross(p - a) / edge_len;
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            let cur_in = sc >= -CONTACT_TOLERANCE;
            let prev_in = sp >= -CONTACT_TOLERANCE;
            if cur_in {
                if !prev_in {
                    output.push(intersect(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if prev_in {
                output.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(p: Vec2, q: Vec2, sp: f64, sq: f64) -> Vec2 {
    let t = sp / (sp - sq);
    p + (q - p) * t
}

/// Area centroid; falls back to the vertex mean for (near) zero-area polygons.
pub fn polygon_centroid(poly: &[Vec2]) -> Option<Vec2> {
    if poly.is_empty() {
        return None;
    }
    let mut area2 = 0.0;
    let mut c = Vec2::ZERO;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let w = p.cross(q);
        area2 += w;
        c = c + (p + q) * w;
    }
    if area2.abs() < 1e-12 {
        return Some(mean(poly));
    }
    Some(c * (1.0 / (3.0 * area2)))
}

/// Shortest distance between segments `p0-p1` and `q0-q1`.
pub fn segment_distance(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let denom = d1.cross(d2);
    if denom.abs() > 1e-12 {
        let t = (q0 - p0).cross(d2) / denom;
        let u = (q0 - p0).cross(d1) / denom;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            return 0.0;
        }
    }
    point_segment_distance(p0, q0, q1)
        .min(point_segment_distance(p1, q0, q1))
        .min(point_segment_distance(q0, p0, p1))
        .min(point_segment_distance(q1, p0, p1))
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x: f64, y: f64, h: f64, l: f64, w: f64) -> OrientedRect {
        OrientedRect::new(Vec2::new(x, y), h, l, w)
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.7);
            assert!((-PI..PI).contains(&a));
        }
    }

    #[test]
    fn coincident_rectangles_overlap_at_center() {
        let a = rect(1.0, 2.0, 0.3, 4.0, 2.0);
        let o = rect_overlap(&a, &a).unwrap();
        assert!((o.point - a.center).norm() < 1e-9);
    }

    #[test]
    fn far_apart_rectangles_do_not_overlap() {
        let a = rect(0.0, 0.0, 0.0, 4.0, 2.0);
        let b = rect(10.0, 0.0, 1.0, 4.0, 2.0);
        assert!(rect_overlap(&a, &b).is_none());
    }

    #[test]
    fn corner_touch_is_contact() {
        let a = rect(0.0, 0.0, 0.0, 2.0, 2.0);
        let b = rect(2.0, 2.0, 0.0, 2.0, 2.0);
        let o = rect_overlap(&a, &b).expect("touching corners count as contact");
        assert!((o.point - Vec2::new(1.0, 1.0)).norm() < 1e-6);
        let c = rect(2.0 + 1e-6, 2.0, 0.0, 2.0, 2.0);
        assert!(rect_overlap(&a, &c).is_none());
    }

    #[test]
    fn overlap_centroid_of_half_overlap() {
        let a = rect(0.0, 0.0, 0.0, 2.0, 2.0);
        let b = rect(1.0, 0.0, 0.0, 2.0, 2.0);
        let o = rect_overlap(&a, &b).unwrap();
        assert!((o.point - Vec2::new(0.5, 0.0)).norm() < 1e-12);
        assert!((o.normal - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert!((o.depth - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_distance_cases() {
        let d = segment_distance(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, -1.0),
            Vec2::new(0.5, 1.0),
        );
        assert_eq!(d, 0.0);
        let d = segment_distance(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(1.0, 2.0),
        );
        assert!((d - 2.0).abs() < 1e-12);
    }
}
