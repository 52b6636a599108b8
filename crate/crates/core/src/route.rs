//! Piecewise-constant-curvature paths used for ego routes and actor path templates.

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Advances along a constant-curvature arc of length `ds`.
    pub fn advance(&self, ds: f64, curvature: f64) -> Pose {
        let dtheta = curvature * ds;
        let (x, y) = if dtheta.abs() < 1e-9 {
            let mid = self.heading + 0.5 * dtheta;
            (self.x + ds * mid.cos(), self.y + ds * mid.sin())
        } else {
            let h1 = self.heading + dtheta;
            (
                self.x + (h1.sin() - self.heading.sin()) / curvature,
                self.y - (h1.cos() - self.heading.cos()) / curvature,
            )
        };
        Pose::new(x, y, self.heading + dtheta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteSegment {
    pub length: f64,
    pub curvature: f64,
}

impl RouteSegment {
    pub fn straight(length: f64) -> Self {
        Self {
            length,
            curvature: 0.0,
        }
    }

    /// Arc turning by `angle` radians (positive = left) at `radius`.
    pub fn arc(radius: f64, angle: f64) -> Self {
        Self {
            length: radius * angle.abs(),
            curvature: angle.signum() / radius,
        }
    }
}

/// A path starting at `start`, built from consecutive constant-curvature segments.
/// Outside `[0, length]` the path extends as straight lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub start: Pose,
    pub segments: Vec<RouteSegment>,
}

impl Route {
    pub fn new(start: Pose, segments: Vec<RouteSegment>) -> Self {
        Self { start, segments }
    }

    pub fn straight(start: Pose) -> Self {
        Self::new(start, Vec::new())
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn pose_at(&self, s: f64) -> Pose {
        if s <= 0.0 {
            return self.start.advance(s, 0.0);
        }
        let mut pose = self.start;
        let mut remaining = s;
        for seg in &self.segments {
            if remaining <= seg.length {
                let p = pose.advance(remaining, seg.curvature);
                return Pose::new(p.x, p.y, wrap_angle(p.heading));
            }
            pose = pose.advance(seg.length, seg.curvature);
            remaining -= seg.length;
        }
        let p = pose.advance(remaining, 0.0);
        Pose::new(p.x, p.y, wrap_angle(p.heading))
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for seg in &self.segments {
            acc += seg.length;
            if s < acc {
                return seg.curvature;
            }
        }
        0.0
    }

    /// Route whose arc length 0 corresponds to arc length `offset` of this one.
    pub fn rebased(&self, offset: f64) -> Route {
        if offset <= 0.0 {
            let start = self.start.advance(offset, 0.0);
            let mut segments = vec![RouteSegment::straight(-offset)];
            segments.extend(self.segments.iter().copied());
            return Route::new(start, segments);
        }
        let start = self.pose_at(offset);
        let mut acc = 0.0;
        let mut segments = Vec::new();
        for seg in &self.segments {
            let end = acc + seg.length;
            if end > offset {
                let len = end - offset.max(acc);
                segments.push(RouteSegment {
                    length: len,
                    curvature: seg.curvature,
                });
            }
            acc = end;
        }
        Route::new(start, segments)
    }

    /// Points every `spacing` metres over `[from, to]` (both ends included).
    pub fn sample(&self, from: f64, to: f64, spacing: f64) -> Vec<(f64, Vec2)> {
        let n = ((to - from) / spacing).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| {
                let s = (from + i as f64 * spacing).min(to);
                (s, self.pose_at(s).position())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn quarter_turn_left_ends_where_expected() {
        let r = Route::new(
            Pose::new(0.0, 0.0, 0.0),
            vec![RouteSegment::arc(5.0, FRAC_PI_2)],
        );
        let end = r.pose_at(r.length());
        assert!((end.x - 5.0).abs() < 1e-9);
        assert!((end.y - 5.0).abs() < 1e-9);
        assert!((end.heading - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn extends_straight_beyond_ends() {
        let r = Route::new(
            Pose::new(0.0, 0.0, 0.0),
            vec![
                RouteSegment::straight(10.0),
                RouteSegment::arc(5.0, -FRAC_PI_2),
            ],
        );
        let before = r.pose_at(-3.0);
        assert!((before.x + 3.0).abs() < 1e-12 && before.y.abs() < 1e-12);
        let end = r.pose_at(r.length());
        let beyond = r.pose_at(r.length() + 2.0);
        assert!((beyond.x - end.x).abs() < 1e-9);
        assert!((beyond.y - (end.y - 2.0)).abs() < 1e-9);
    }

    #[test]
    fn rebased_route_matches_original() {
        let r = Route::new(
            Pose::new(-50.0, 0.0, 0.0),
            vec![
                RouteSegment::straight(40.0),
                RouteSegment::arc(10.0, 1.2),
                RouteSegment::straight(30.0),
            ],
        );
        for offset in [-12.0, 0.0, 17.5, 45.0, 70.0] {
            let rb = r.rebased(offset);
            for s in [0.0, 3.0, 20.0, 33.3, 60.0] {
                let a = r.pose_at(offset + s);
                let b = rb.pose_at(s);
                assert!(
                    (a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9,
                    "{offset} {s}"
                );
                assert_eq!(r.curvature_at(offset + s + 1e-7), rb.curvature_at(s + 1e-7));
            }
        }
    }
}
