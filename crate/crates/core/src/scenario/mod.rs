//! Scenario domain types at the functional, logical and concrete levels.

mod groups;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};
use crate::route::Route;

pub use groups::{
    assign_safety_group, GroupError, GroupRule, GroupRules, SafetyGroup, SafetyGroupRegistry,
};
pub use validate::{validate_concrete, ValidationReport, Violation};

/// Declares a closed vocabulary enum with its snake_case DSL token.
macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            pub fn from_token(token: &str) -> Option<Self> {
                match token {
                    $($token => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }
    };
}

token_enum!(ActorKind {
    PassengerVehicle => "passenger_vehicle",
    HeavyVehicle => "heavy_vehicle",
    Motorcyclist => "motorcyclist",
    Cyclist => "cyclist",
    Pedestrian => "pedestrian",
    PedestrianChild => "pedestrian_child",
    ScooterRider => "scooter_rider",
});

token_enum!(Maneuver {
    GoStraight => "go_straight",
    TurnLeft => "turn_left",
    TurnRight => "turn_right",
    CutIn => "cut_in",
    PullOut => "pull_out",
    CrossPath => "cross_path",
    RunRedLight => "run_red_light",
    SuddenStop => "sudden_stop",
    WrongWay => "wrong_way",
});

token_enum!(Location {
    WithinLane => "within_lane",
    AcrossLane => "across_lane",
    OffRoad => "off_road",
    Driveway => "driveway",
    Crosswalk => "crosswalk",
    Curbside => "curbside",
});

token_enum!(SalientFactor {
    Occlusion => "occlusion",
    HighGrade => "high_grade",
    LowSunAngle => "low_sun_angle",
    DoubleParkedVehicle => "double_parked_vehicle",
    Crowd => "crowd",
    LightRail => "light_rail",
    NightLighting => "night_lighting",
});

token_enum!(
    /// Where an actor starts relative to the ego lane (ego drives in the rightmost lane).
    Placement {
        SameLane => "same_lane",
        AdjacentLeft => "adjacent_left",
        NonAdjacentLeft => "non_adjacent_left",
        Opposing => "opposing",
        FromRight => "from_right",
        FromLeft => "from_left",
    }
);

/// Conflict-partner class used by the safety-group taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartnerClass {
    Vehicle,
    Motorcyclist,
    Cyclist,
    Pedestrian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoadUserGroup {
    Vehicle,
    #[serde(rename = "VRU")]
    Vru,
}

impl RoadUserGroup {
    pub const ALL: [RoadUserGroup; 2] = [RoadUserGroup::Vehicle, RoadUserGroup::Vru];

    pub fn label(self) -> &'static str {
        match self {
            RoadUserGroup::Vehicle => "Vehicle",
            RoadUserGroup::Vru => "VRU",
        }
    }
}

impl fmt::Display for RoadUserGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl ActorKind {
    /// Kinds whose injury risk is a function of impact speed rather than delta-v.
    pub fn uses_impact_speed_risk(self) -> bool {
        !matches!(self, ActorKind::PassengerVehicle | ActorKind::HeavyVehicle)
    }

    pub fn partner_class(self) -> PartnerClass {
        match self {
            ActorKind::PassengerVehicle | ActorKind::HeavyVehicle => PartnerClass::Vehicle,
            ActorKind::Motorcyclist => PartnerClass::Motorcyclist,
            ActorKind::Cyclist => PartnerClass::Cyclist,
            ActorKind::Pedestrian | ActorKind::PedestrianChild | ActorKind::ScooterRider => {
                PartnerClass::Pedestrian
            }
        }
    }

    pub fn default_footprint(self) -> Footprint {
        let (length, width) = match self {
            ActorKind::PassengerVehicle => (4.8, 1.9),
            ActorKind::HeavyVehicle => (10.0, 2.5),
            ActorKind::Motorcyclist => (2.2, 0.8),
            ActorKind::Cyclist => (1.8, 0.6),
            ActorKind::Pedestrian => (0.5, 0.5),
            ActorKind::PedestrianChild => (0.4, 0.4),
            ActorKind::ScooterRider => (1.2, 0.6),
        };
        Footprint { length, width }
    }

    /// Moves on foot or a light device and starts from rest when triggered.
    pub fn is_pedestrian_like(self) -> bool {
        matches!(
            self,
            ActorKind::Pedestrian | ActorKind::PedestrianChild | ActorKind::ScooterRider
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub const EGO_DEFAULT: Footprint = Footprint {
        length: 4.7,
        width: 2.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManeuverSpec {
    pub maneuver: Maneuver,
    pub start_location: Location,
    pub end_location: Location,
}

impl ManeuverSpec {
    pub fn new(maneuver: Maneuver, start_location: Location, end_location: Location) -> Self {
        Self {
            maneuver,
            start_location,
            end_location,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActorSpec {
    pub kind: ActorKind,
    pub maneuver: ManeuverSpec,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalScenario {
    pub id: String,
    pub ego_maneuver: ManeuverSpec,
    pub actors: Vec<ActorSpec>,
    pub layout_class: String,
    pub salient_factors: BTreeSet<SalientFactor>,
    /// Conflict type that, with the first actor's class, resolves the safety group.
    pub conflict_type: String,
    pub test_request: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "m/s")]
    MetersPerSecond,
    #[serde(rename = "m/s^2")]
    MetersPerSecondSquared,
    #[serde(rename = "s")]
    Seconds,
    #[serde(rename = "m")]
    Meters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub unit: Unit,
}

impl ParamRange {
    pub fn point(value: f64, unit: Unit) -> Self {
        Self {
            min: value,
            max: value,
            step: 1.0,
            unit,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.step.is_finite()
            && self.min <= self.max
            && self.step > 0.0
    }

    /// Number of grid points, `ceil((max - min) / step + 1)`, robust to rounding.
    pub fn grid_len(&self) -> usize {
        ((self.max - self.min) / self.step + 1.0 - 1e-9)
            .ceil()
            .max(1.0) as usize
    }

    /// Grid values `min, min + step, ...`, with the final point clamped to `max`.
    pub fn grid_values(&self) -> Vec<f64> {
        let n = self.grid_len();
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.max
                } else {
                    (self.min + i as f64 * self.step).min(self.max)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalScenario {
    pub functional: FunctionalScenario,
    pub parameter_ranges: BTreeMap<String, ParamRange>,
}

impl LogicalScenario {
    /// Parameter names the trajectory templates need.
    pub fn required_parameters(&self) -> Vec<String> {
        let mut names = vec!["ego.speed".to_string(), "stimulus.trigger_ttc".to_string()];
        for i in 0..self.functional.actors.len() {
            names.push(format!("actor{i}.speed"));
        }
        names
    }

    /// Ill-formed ranges and missing required parameters, as human-readable strings.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, range) in &self.parameter_ranges {
            if !range.is_well_formed() {
                out.push(format!(
                    "range {name}: requires min <= max and step > 0 (got {}, {}, {})",
                    range.min, range.max, range.step
                ));
            }
        }
        for name in self.required_parameters() {
            if !self.parameter_ranges.contains_key(&name) {
                out.push(format!("missing parameter {name}"));
            }
        }
        if self.functional.actors.is_empty() {
            out.push("at least one actor is required".into());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub curvature: f64,
}

impl VehicleState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorTrajectory {
    pub kind: ActorKind,
    pub samples: Vec<TrajectorySample>,
}

impl ActorTrajectory {
    /// Linear interpolation between samples; clamps outside the sampled span.
    pub fn sample_at(&self, t: f64) -> TrajectorySample {
        let s = &self.samples;
        if t <= s[0].t {
            return TrajectorySample { t, ..s[0] };
        }
        let last = s[s.len() - 1];
        if t >= last.t {
            return TrajectorySample { t, ..last };
        }
        let idx = s.partition_point(|p| p.t <= t);
        let (a, b) = (s[idx - 1], s[idx]);
        let w = (t - a.t) / (b.t - a.t);
        let dh = wrap_angle(b.heading - a.heading);
        TrajectorySample {
            t,
            x: a.x + w * (b.x - a.x),
            y: a.y + w * (b.y - a.y),
            heading: wrap_angle(a.heading + w * dh),
            speed: a.speed + w * (b.speed - a.speed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusAnnotation {
    pub onset_time: f64,
    pub end_time: f64,
}

/// Lateral room available to the ego for evasive offsets, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneGeometry {
    pub left_room: f64,
    pub right_room: f64,
}

impl Default for LaneGeometry {
    fn default() -> Self {
        Self {
            left_room: 3.5,
            right_room: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteScenario {
    pub id: String,
    pub logical_parent: String,
    pub test_request: String,
    pub ego_start: VehicleState,
    pub ego_footprint: Footprint,
    /// Nominal ego path; arc length 0 is the ego start position.
    pub ego_route: Route,
    pub lane: LaneGeometry,
    pub actor_trajectories: Vec<ActorTrajectory>,
    pub footprints: Vec<Footprint>,
    pub stimulus: StimulusAnnotation,
    pub safety_group: String,
    pub conflict_type: String,
    pub layout_class: String,
    pub ego_maneuver: Maneuver,
    pub salient_factors: BTreeSet<SalientFactor>,
    /// Parameter valuation this scenario was instantiated from.
    pub parameters: BTreeMap<String, f64>,
    pub duration: f64,
}

impl ConcreteScenario {
    /// The actor whose initiating action defines the conflict (listed first).
    pub fn conflict_partner(&self) -> Option<ActorKind> {
        self.actor_trajectories.first().map(|a| a.kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_round_trip() {
        for m in Maneuver::ALL {
            assert_eq!(Maneuver::from_token(m.token()), Some(*m));
        }
        for k in ActorKind::ALL {
            assert_eq!(ActorKind::from_token(k.token()), Some(*k));
        }
        assert_eq!(Maneuver::from_token("teleport"), None);
    }

    #[test]
    fn grid_counts() {
        let r = ParamRange {
            min: 8.0,
            max: 12.0,
            step: 2.0,
            unit: Unit::MetersPerSecond,
        };
        assert_eq!(r.grid_values(), vec![8.0, 10.0, 12.0]);
        let r = ParamRange {
            min: 0.6,
            max: 1.2,
            step: 0.3,
            unit: Unit::Seconds,
        };
        assert_eq!(r.grid_len(), 3);
        let r = ParamRange {
            min: 0.0,
            max: 1.0,
            step: 0.3,
            unit: Unit::Seconds,
        };
        assert_eq!(r.grid_values().len(), 5);
        assert_eq!(*r.grid_values().last().unwrap(), 1.0);
        assert_eq!(
            ParamRange::point(3.0, Unit::Meters).grid_values(),
            vec![3.0]
        );
    }

    #[test]
    fn road_user_group_serializes_as_label() {
        assert_eq!(
            serde_json::to_string(&RoadUserGroup::Vru).unwrap(),
            "\"VRU\""
        );
    }

    #[test]
    fn interpolation_between_samples() {
        let traj = ActorTrajectory {
            kind: ActorKind::Pedestrian,
            samples: vec![
                TrajectorySample {
                    t: 0.0,
                    x: 0.0,
                    y: 0.0,
                    heading: 3.0,
                    speed: 1.0,
                },
                TrajectorySample {
                    t: 1.0,
                    x: 2.0,
                    y: 4.0,
                    heading: -3.0,
                    speed: 2.0,
                },
            ],
        };
        let mid = traj.sample_at(0.5);
        assert!((mid.x - 1.0).abs() < 1e-12 && (mid.y - 2.0).abs() < 1e-12);
        // Heading interpolates through ±π, not through zero.
        assert!(mid.heading.abs() > 3.0);
        assert_eq!(traj.sample_at(5.0).x, 2.0);
    }
}
