//! Lane-level layout library: lane geometry and path templates for each layout class.
//!
//! All layouts share one frame. The ego drives east (+x) in the rightmost lane, whose
//! centre line is `y = 0`. Further same-direction lanes lie at `y = w, 2w, ...` and the
//! opposing lanes follow them. Intersections centre the crossing road on `x = 0`, with
//! the northbound lane at `x = +w/2` and the southbound lane at `x = -w/2`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::route::{Pose, Route, RouteSegment};
use crate::scenario::{LaneGeometry, Maneuver, Placement};

pub const LANE_WIDTH: f64 = 3.5;
const HALF_LANE: f64 = LANE_WIDTH / 2.0;
const APPROACH: f64 = 150.0;
const RIGHT_TURN_RADIUS: f64 = 6.0;
const LEFT_TURN_RADIUS: f64 = 3.0 * LANE_WIDTH;
const CROSSWALK_OFFSET: f64 = LANE_WIDTH + 2.0;
const CURB_STANDOFF: f64 = 3.0;
const LANE_CHANGE_LENGTH: f64 = 30.0;
const PULL_OUT_RADIUS: f64 = 6.0;
const DRIVEWAY_LENGTH: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrafficControl {
    None,
    Signal,
    StopSign,
    Yield,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    Segment { driveway: bool, rail_crossing: bool },
    Intersection { roundabout: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub class: String,
    pub topology: Topology,
    pub same_direction_lanes: u8,
    pub opposing_lanes: u8,
    pub traffic_control: TrafficControl,
    pub lane: LaneGeometry,
}

impl Layout {
    fn is_intersection(&self) -> bool {
        matches!(self.topology, Topology::Intersection { .. })
    }

    fn is_roundabout(&self) -> bool {
        matches!(self.topology, Topology::Intersection { roundabout: true })
    }

    /// Lateral position of the far road edge.
    fn top_edge(&self) -> f64 {
        (self.same_direction_lanes + self.opposing_lanes) as f64 * LANE_WIDTH - HALF_LANE
    }

    fn crosswalk_x(&self) -> f64 {
        if self.is_intersection() {
            -CROSSWALK_OFFSET
        } else {
            0.0
        }
    }

    /// Nominal ego route for a maneuver, or `None` when the layout cannot host it.
    pub fn ego_route(&self, maneuver: Maneuver) -> Option<Route> {
        let start = Pose::new(-APPROACH, 0.0, 0.0);
        match maneuver {
            Maneuver::GoStraight => Some(Route::new(
                start,
                vec![RouteSegment::straight(2.0 * APPROACH)],
            )),
            Maneuver::TurnRight if self.is_intersection() && !self.is_roundabout() => {
                Some(Route::new(
                    start,
                    vec![
                        RouteSegment::straight(APPROACH - HALF_LANE - RIGHT_TURN_RADIUS),
                        RouteSegment::arc(RIGHT_TURN_RADIUS, -FRAC_PI_2),
                        RouteSegment::straight(APPROACH),
                    ],
                ))
            }
            Maneuver::TurnLeft if self.is_intersection() && !self.is_roundabout() => {
                Some(Route::new(
                    start,
                    vec![
                        RouteSegment::straight(APPROACH + HALF_LANE - LEFT_TURN_RADIUS),
                        RouteSegment::arc(LEFT_TURN_RADIUS, FRAC_PI_2),
                        RouteSegment::straight(APPROACH),
                    ],
                ))
            }
            _ => None,
        }
    }

    /// Path template for an actor maneuver from a placement, or `None` when unsupported.
    pub fn actor_route(&self, maneuver: Maneuver, placement: Placement) -> Option<Route> {
        use Maneuver as M;
        use Placement as P;
        let w = LANE_WIDTH;
        let h = HALF_LANE;
        let straight = |x: f64, y: f64, heading: f64| {
            Some(Route::new(
                Pose::new(x, y, heading),
                vec![RouteSegment::straight(2.0 * APPROACH)],
            ))
        };
        let same = self.same_direction_lanes as f64;
        let signalized = self.traffic_control == TrafficControl::Signal;
        let turning = self.is_intersection() && !self.is_roundabout();
        let rail = matches!(
            self.topology,
            Topology::Segment {
                rail_crossing: true,
                ..
            }
        );
        let driveway = matches!(self.topology, Topology::Segment { driveway: true, .. });
        let crossing_length = self.top_edge() + CURB_STANDOFF + h + CURB_STANDOFF;

        match (placement, maneuver) {
            (P::SameLane, M::GoStraight | M::SuddenStop) => straight(-APPROACH, 0.0, 0.0),
            (P::SameLane, M::WrongWay) if !self.is_intersection() => straight(APPROACH, 0.0, PI),

            (P::AdjacentLeft, M::GoStraight) if self.same_direction_lanes >= 2 => {
                straight(-APPROACH, w, 0.0)
            }
            (P::AdjacentLeft, M::CutIn) if self.same_direction_lanes >= 2 => {
                Some(lane_change(w, 0.0))
            }
            (P::NonAdjacentLeft, M::GoStraight) if self.same_direction_lanes >= 3 => {
                straight(-APPROACH, 2.0 * w, 0.0)
            }
            (P::NonAdjacentLeft, M::CutIn) if self.same_direction_lanes >= 3 => {
                Some(lane_change(2.0 * w, w))
            }

            (P::Opposing, M::GoStraight) if self.opposing_lanes >= 1 => {
                straight(APPROACH, same * w, PI)
            }
            (P::Opposing, M::TurnRight) if turning => Some(Route::new(
                Pose::new(APPROACH, w, PI),
                vec![
                    RouteSegment::straight(APPROACH - h - RIGHT_TURN_RADIUS),
                    RouteSegment::arc(RIGHT_TURN_RADIUS, -FRAC_PI_2),
                    RouteSegment::straight(APPROACH),
                ],
            )),
            (P::Opposing, M::TurnLeft) if turning => Some(Route::new(
                Pose::new(APPROACH, w, PI),
                vec![
                    RouteSegment::straight(APPROACH + h - LEFT_TURN_RADIUS),
                    RouteSegment::arc(LEFT_TURN_RADIUS, FRAC_PI_2),
                    RouteSegment::straight(APPROACH),
                ],
            )),

            (P::FromRight, M::CrossPath) => Some(Route::new(
                Pose::new(self.crosswalk_x(), -h - CURB_STANDOFF, FRAC_PI_2),
                vec![RouteSegment::straight(crossing_length)],
            )),
            (P::FromLeft, M::CrossPath) => Some(Route::new(
                Pose::new(
                    self.crosswalk_x(),
                    self.top_edge() + CURB_STANDOFF,
                    -FRAC_PI_2,
                ),
                vec![RouteSegment::straight(crossing_length)],
            )),
            (P::FromRight, M::PullOut) if driveway => Some(Route::new(
                Pose::new(0.0, -PULL_OUT_RADIUS - DRIVEWAY_LENGTH, FRAC_PI_2),
                vec![
                    RouteSegment::straight(DRIVEWAY_LENGTH),
                    RouteSegment::arc(PULL_OUT_RADIUS, -FRAC_PI_2),
                    RouteSegment::straight(APPROACH),
                ],
            )),

            (P::FromRight, M::GoStraight) if self.is_intersection() || rail => {
                straight(if rail { 0.0 } else { h }, -APPROACH, FRAC_PI_2)
            }
            (P::FromLeft, M::GoStraight) if self.is_intersection() || rail => {
                straight(if rail { 0.0 } else { -h }, APPROACH, -FRAC_PI_2)
            }
            (P::FromRight, M::RunRedLight) if signalized && turning => {
                straight(h, -APPROACH, FRAC_PI_2)
            }
            (P::FromLeft, M::RunRedLight) if signalized && turning => {
                straight(-h, APPROACH, -FRAC_PI_2)
            }
            (P::FromRight, M::TurnRight) if turning => Some(Route::new(
                Pose::new(h, -APPROACH, FRAC_PI_2),
                vec![
                    RouteSegment::straight(APPROACH - RIGHT_TURN_RADIUS),
                    RouteSegment::arc(RIGHT_TURN_RADIUS, -FRAC_PI_2),
                    RouteSegment::straight(APPROACH),
                ],
            )),
            (P::FromRight, M::TurnLeft) if turning => Some(Route::new(
                Pose::new(h, -APPROACH, FRAC_PI_2),
                vec![
                    RouteSegment::straight(APPROACH + w - LEFT_TURN_RADIUS),
                    RouteSegment::arc(LEFT_TURN_RADIUS, FRAC_PI_2),
                    RouteSegment::straight(APPROACH),
                ],
            )),
            (P::FromLeft, M::TurnRight) if turning => Some(Route::new(
                Pose::new(-h, APPROACH, -FRAC_PI_2),
                vec![
                    RouteSegment::straight(APPROACH - w - RIGHT_TURN_RADIUS),
                    RouteSegment::arc(RIGHT_TURN_RADIUS, -FRAC_PI_2),
                    RouteSegment::straight(APPROACH),
                ],
            )),
            (P::FromLeft, M::TurnLeft) if turning => Some(Route::new(
                Pose::new(-h, APPROACH, -FRAC_PI_2),
                vec![
                    RouteSegment::straight(APPROACH - LEFT_TURN_RADIUS),
                    RouteSegment::arc(LEFT_TURN_RADIUS, FRAC_PI_2),
                    RouteSegment::straight(APPROACH),
                ],
            )),
            _ => None,
        }
    }
}

/// Same-direction lane change from lateral position `from_y` to `to_y` (an S-curve of
/// two equal arcs).
fn lane_change(from_y: f64, to_y: f64) -> Route {
    let d = to_y - from_y;
    let phi = 2.0 * (d.abs() / LANE_CHANGE_LENGTH).atan();
    let radius = LANE_CHANGE_LENGTH / (2.0 * phi.sin());
    let dir = d.signum();
    Route::new(
        Pose::new(-APPROACH, from_y, 0.0),
        vec![
            RouteSegment::straight(APPROACH - LANE_CHANGE_LENGTH),
            RouteSegment::arc(radius, dir * phi),
            RouteSegment::arc(radius, -dir * phi),
            RouteSegment::straight(APPROACH),
        ],
    )
}

/// Registered layouts keyed by class token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutLibrary {
    layouts: BTreeMap<String, Layout>,
}

impl LayoutLibrary {
    pub fn empty() -> Self {
        Self {
            layouts: BTreeMap::new(),
        }
    }

    pub fn bundled() -> Self {
        let mut lib = Self::empty();
        let segment = |class: &str, same: u8, opp: u8, driveway: bool, rail: bool| Layout {
            class: class.into(),
            topology: Topology::Segment {
                driveway,
                rail_crossing: rail,
            },
            same_direction_lanes: same,
            opposing_lanes: opp,
            traffic_control: TrafficControl::None,
            lane: LaneGeometry {
                left_room: LANE_WIDTH,
                right_room: 2.0,
            },
        };
        let intersection = |class: &str, control: TrafficControl, roundabout: bool| Layout {
            class: class.into(),
            topology: Topology::Intersection { roundabout },
            same_direction_lanes: 1,
            opposing_lanes: 1,
            traffic_control: control,
            lane: LaneGeometry {
                left_room: LANE_WIDTH,
                right_room: 1.5,
            },
        };
        lib.register(segment("straight_two_lane", 1, 1, false, false));
        lib.register(segment("multi_lane_arterial", 3, 2, false, false));
        lib.register(segment("driveway_segment", 1, 1, true, false));
        lib.register(segment("light_rail_crossing", 1, 1, false, true));
        lib.register(intersection(
            "signalized_intersection",
            TrafficControl::Signal,
            false,
        ));
        lib.register(intersection(
            "unprotected_intersection",
            TrafficControl::None,
            false,
        ));
        lib.register(intersection(
            "all_way_stop",
            TrafficControl::StopSign,
            false,
        ));
        lib.register(intersection("roundabout", TrafficControl::Yield, true));
        lib
    }

    pub fn register(&mut self, layout: Layout) {
        self.layouts.insert(layout.class.clone(), layout);
    }

    pub fn get(&self, class: &str) -> Option<&Layout> {
        self.layouts.get(class)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.layouts.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Layout> {
        self.layouts.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turn_templates_end_in_the_intended_lanes() {
        let lib = LayoutLibrary::bundled();
        let l = lib.get("signalized_intersection").unwrap();
        let right = l.ego_route(Maneuver::TurnRight).unwrap();
        let end = right.pose_at(right.length());
        assert!((end.x + HALF_LANE).abs() < 1e-9, "southbound lane");
        assert!((end.heading + FRAC_PI_2).abs() < 1e-9);
        let left = l.ego_route(Maneuver::TurnLeft).unwrap();
        let end = left.pose_at(left.length());
        assert!((end.x - HALF_LANE).abs() < 1e-9, "northbound lane");

        let r = l
            .actor_route(Maneuver::TurnLeft, Placement::FromLeft)
            .unwrap();
        let end = r.pose_at(r.length());
        assert!(
            end.y.abs() < 1e-9 && end.heading.abs() < 1e-9,
            "merges into ego lane"
        );
        let r = l
            .actor_route(Maneuver::TurnRight, Placement::FromLeft)
            .unwrap();
        let end = r.pose_at(r.length());
        assert!((end.y - LANE_WIDTH).abs() < 1e-9, "westbound lane");
    }

    #[test]
    fn lane_change_reaches_target_lane() {
        let r = lane_change(LANE_WIDTH, 0.0);
        let end = r.pose_at(r.length());
        assert!(end.y.abs() < 1e-9);
        assert!(end.heading.abs() < 1e-9);
    }

    #[test]
    fn segment_layouts_reject_turns() {
        let lib = LayoutLibrary::bundled();
        let l = lib.get("straight_two_lane").unwrap();
        assert!(l.ego_route(Maneuver::TurnLeft).is_none());
        assert!(l
            .actor_route(Maneuver::CutIn, Placement::AdjacentLeft)
            .is_none());
        let l = lib.get("multi_lane_arterial").unwrap();
        assert!(l
            .actor_route(Maneuver::CutIn, Placement::AdjacentLeft)
            .is_some());
    }
}
