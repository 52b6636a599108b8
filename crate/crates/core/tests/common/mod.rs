#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use cat_core::config::HarnessConfig;
use cat_core::demo::demo_suite;
use cat_core::layout::LayoutLibrary;
use cat_core::route::{Pose, Route};
use cat_core::scenario::{
    ActorKind, ActorTrajectory, ConcreteScenario, Footprint, LaneGeometry, Maneuver,
    SafetyGroupRegistry, StimulusAnnotation, TrajectorySample, VehicleState,
};
use cat_core::sim::{ControlCommand, EgoPolicy, ObservedWorld};

pub struct Demo {
    pub config: HarnessConfig,
    pub registry: SafetyGroupRegistry,
    pub layouts: LayoutLibrary,
    pub scenarios: Vec<ConcreteScenario>,
}

pub fn demo() -> &'static Demo {
    static DEMO: OnceLock<Demo> = OnceLock::new();
    DEMO.get_or_init(|| {
        let config = HarnessConfig::default();
        let registry = config.registry();
        let layouts = LayoutLibrary::bundled();
        let (scenarios, _) = demo_suite(&layouts, &registry).expect("demo suite builds");
        Demo {
            config,
            registry,
            layouts,
            scenarios,
        }
    })
}

/// Ego on a straight road at `speed`, with a single parked pedestrian far off the road.
pub fn brake_test_scenario(speed: f64, duration: f64) -> ConcreteScenario {
    let n = (duration / 0.05).round() as usize;
    let samples = (0..=n)
        .map(|i| TrajectorySample {
            t: i as f64 * 0.05,
            x: 500.0,
            y: 40.0,
            heading: 0.0,
            speed: 0.0,
        })
        .collect();
    ConcreteScenario {
        id: "brake_test".into(),
        logical_parent: "brake_test".into(),
        test_request: "tr_brake_test".into(),
        ego_start: VehicleState {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            speed,
            accel: 0.0,
            curvature: 0.0,
        },
        ego_footprint: Footprint::EGO_DEFAULT,
        ego_route: Route::straight(Pose::new(0.0, 0.0, 0.0)),
        lane: LaneGeometry::default(),
        actor_trajectories: vec![ActorTrajectory {
            kind: ActorKind::Pedestrian,
            samples,
        }],
        footprints: vec![ActorKind::Pedestrian.default_footprint()],
        stimulus: StimulusAnnotation {
            onset_time: 0.0,
            end_time: 0.0,
        },
        safety_group: "ped_crossing_midblock".into(),
        conflict_type: "crossing_pedestrian_midblock".into(),
        layout_class: "straight_two_lane".into(),
        ego_maneuver: Maneuver::GoStraight,
        salient_factors: BTreeSet::new(),
        parameters: BTreeMap::new(),
        duration,
    }
}

/// Full braking once the observed world reaches `trigger` seconds.
pub struct BrakeAt {
    pub trigger: f64,
}

impl EgoPolicy for BrakeAt {
    fn step(&mut self, world: &ObservedWorld<'_>) -> ControlCommand {
        let braking = world.observed_time >= self.trigger - 1e-9;
        ControlCommand {
            longitudinal_accel: if braking {
                -world.limits.max_brake
            } else {
                0.0
            },
            curvature: 0.0,
        }
    }
}

/// Two-sided normal tail probability by composite Simpson integration of the density
/// on `[0, |z|]`.
pub fn two_sided_p_oracle(z: f64) -> f64 {
    let z = z.abs();
    if z == 0.0 {
        return 1.0;
    }
    let n = 200_000;
    let h = z / n as f64;
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut sum = pdf(0.0) + pdf(z);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * pdf(i as f64 * h);
    }
    1.0 - 2.0 * (sum * h / 3.0)
}

/// Pooled two-proportion z written out term by term.
pub fn pooled_z_oracle(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let p = (x1 + x2) as f64 / (n1 + n2) as f64;
    let var = p * (1.0 - p) * ((n1 + n2) as f64 / (n1 * n2) as f64);
    (x2 as f64 / n2 as f64 - x1 as f64 / n1 as f64) / var.sqrt()
}

/// Minimum distance between two routes sampled every 0.25 m.
pub fn min_path_distance(a: &Route, b: &Route) -> f64 {
    let pa = a.sample(0.0, a.length(), 0.25);
    let pb = b.sample(0.0, b.length(), 0.25);
    let mut d = f64::INFINITY;
    for (_, p) in &pa {
        for (_, q) in &pb {
            d = d.min((*p - *q).norm());
        }
    }
    d
}

pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (tol {tol})"
    );
}
