mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cat_core::evaluation::evaluate_scenario;
use cat_core::geometry::{rect_overlap, OrientedRect, Vec2};
use cat_core::nieon::{
    plan_swerve, stringency_variants, ManeuverLimits, NieonError, ResponseTimeModel,
    SwerveDirection,
};
use cat_core::policies::{Aeb, AebConfig, PolicyContext, PolicyFactory};
use cat_core::scenario::{ActorKind, LaneGeometry, VehicleState};
use cat_core::severity::{
    assess_contact, compute_delta_v, p_mais3_vehicle, p_mais3_vru, ImpactConfig, RiskCurveParams,
    SeverityConfig, SeverityError,
};
use cat_core::sim::{
    classify_impact_zone, run_scenario, ControlCommand, EgoPolicy, ImpactZone, LatencyConfig,
    ObservedWorld, SimConfig, SimError,
};

use common::{brake_test_scenario, demo, BrakeAt};

/// Holds speed along the route, like the no-reaction baseline.
struct Cruise;

impl EgoPolicy for Cruise {
    fn step(&mut self, world: &ObservedWorld<'_>) -> ControlCommand {
        ControlCommand {
            longitudinal_accel: 0.0,
            curvature: world.route.curvature_at(
                world.ego_odometer + world.ego.speed * (world.time - world.observed_time),
            ),
        }
    }
}

#[test]
fn repeated_runs_are_identical() {
    let demo = demo();
    let sim = SimConfig {
        jitter_steps: 2,
        ..demo.config.sim_config()
    };
    for s in demo.scenarios.iter().step_by(9) {
        let run = || {
            let mut p = Aeb::new(AebConfig::default(), demo.config.latency.actuation_delay);
            run_scenario(s, &mut p, &demo.config.latency, &sim, 42).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap(),
            "{}",
            s.id
        );
    }
}

#[test]
fn halving_the_step_converges() {
    let demo = demo();
    let coarse = demo.config.sim_config();
    let fine = SimConfig {
        step: coarse.step / 2.0,
        ..coarse
    };
    let mut contacts = 0;
    for s in &demo.scenarios {
        let a = run_scenario(s, &mut Cruise, &demo.config.latency, &coarse, 0).unwrap();
        let b = run_scenario(s, &mut Cruise, &demo.config.latency, &fine, 0).unwrap();
        match (a.contact, b.contact) {
            (Some(ca), Some(cb)) => {
                contacts += 1;
                assert!(
                    (ca.time - cb.time).abs() < coarse.step,
                    "{}: {} vs {}",
                    s.id,
                    ca.time,
                    cb.time
                );
            }
            (None, None) => {}
            (ca, cb) => panic!(
                "{}: contact {:?} vs {:?}",
                s.id,
                ca.map(|c| c.time),
                cb.map(|c| c.time)
            ),
        }
    }
    assert!(contacts > 100, "{contacts}");
}

/// Overlap by dense sampling of both rectangles, including their boundaries.
fn sampled_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    let n = 40;
    let inside = |r: &OrientedRect, other: &OrientedRect| {
        let [u, v] = r.axes();
        (0..=n).any(|i| {
            (0..=n).any(|j| {
                let p = r.center
                    + u * ((i as f64 / n as f64 - 0.5) * r.length)
                    + v * ((j as f64 / n as f64 - 0.5) * r.width);
                other.contains(p, 1e-9)
            })
        })
    };
    inside(a, b) || inside(b, a)
}

fn scaled(r: &OrientedRect, margin: f64) -> OrientedRect {
    OrientedRect::new(
        r.center,
        r.heading,
        r.length + 2.0 * margin,
        r.width + 2.0 * margin,
    )
}

#[test]
fn contact_matches_point_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut hits, mut misses) = (0, 0);
    for _ in 0..10_000 {
        let rect = |rng: &mut ChaCha8Rng| {
            OrientedRect::new(
                Vec2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)),
                rng.gen_range(-PI..PI),
                rng.gen_range(0.4..6.0),
                rng.gen_range(0.4..3.0),
            )
        };
        let (a, b) = (rect(&mut rng), rect(&mut rng));
        let sat = rect_overlap(&a, &b).is_some();
        let sampled = sampled_overlap(&a, &b);
        if sat == sampled {
            if sat {
                hits += 1;
            } else {
                misses += 1;
            }
            continue;
        }
        // Disagreement is only allowed within sampling resolution of touching.
        let res = 6.0 / 40.0;
        assert!(
            sat && !sampled,
            "sampling found an overlap SAT missed: {a:?} {b:?}"
        );
        assert!(
            rect_overlap(&scaled(&a, -res), &scaled(&b, -res)).is_none(),
            "deep overlap missed by sampling: {a:?} {b:?}"
        );
    }
    assert!(hits > 1000 && misses > 1000, "{hits} {misses}");
}

#[test]
fn more_latency_never_shortens_stopping() {
    let s = brake_test_scenario(15.0, 6.0);
    let stop = |latency: LatencyConfig| {
        let trace = run_scenario(
            &s,
            &mut BrakeAt { trigger: 1.0 },
            &latency,
            &SimConfig::default(),
            0,
        )
        .unwrap();
        assert_eq!(trace.ego.last().unwrap().speed, 0.0);
        *trace.odometer.last().unwrap()
    };
    let base = stop(LatencyConfig::ZERO);
    assert!((base - (15.0 + 225.0 / 16.0)).abs() < 1e-9, "{base}");
    let delays = [0.0, 0.05, 0.1, 0.2, 0.4];
    for component in 0..3 {
        let mut last = base;
        for d in delays {
            let mut l = LatencyConfig::ZERO;
            match component {
                0 => l.perception_delay = d,
                1 => l.planning_delay = d,
                _ => l.actuation_delay = d,
            }
            let dist = stop(l);
            assert!(
                dist >= last - 1e-12,
                "component {component}, delay {d}: {dist} < {last}"
            );
            last = dist;
        }
        assert!((last - (base + 15.0 * 0.4)).abs() < 1e-6, "{last}");
    }
}

#[test]
fn invalid_step_and_latency_are_rejected() {
    let s = brake_test_scenario(10.0, 2.0);
    let cfg = SimConfig {
        step: 0.1,
        ..SimConfig::default()
    };
    assert_eq!(
        run_scenario(&s, &mut Cruise, &LatencyConfig::ZERO, &cfg, 0).unwrap_err(),
        SimError::InvalidStep(0.1)
    );
    let odd = LatencyConfig {
        planning_delay: 0.013,
        ..LatencyConfig::ZERO
    };
    assert!(matches!(
        run_scenario(&s, &mut Cruise, &odd, &SimConfig::default(), 0),
        Err(SimError::InvalidLatency { .. })
    ));
}

struct Broken;

impl EgoPolicy for Broken {
    fn step(&mut self, world: &ObservedWorld<'_>) -> ControlCommand {
        ControlCommand {
            longitudinal_accel: if world.time > 0.5 { f64::NAN } else { 0.0 },
            curvature: 0.0,
        }
    }
}

struct BrokenFactory;

impl PolicyFactory for BrokenFactory {
    fn name(&self) -> &str {
        "broken"
    }

    fn build(&self, _: &PolicyContext<'_>) -> Box<dyn EgoPolicy> {
        Box::new(Broken)
    }
}

#[test]
fn non_finite_commands_make_the_run_inconclusive() {
    let demo = demo();
    let s = &demo.scenarios[0];
    let trace = run_scenario(
        s,
        &mut Broken,
        &demo.config.latency,
        &demo.config.sim_config(),
        0,
    )
    .unwrap();
    assert!(!trace.is_valid());
    let r = evaluate_scenario(s, &BrokenFactory, &demo.config, &demo.registry).unwrap();
    assert!(r.inconclusive.is_some());
    assert!(!r.ads.collided);
}

#[test]
fn impact_zone_splits_at_front_third() {
    let fp = cat_core::scenario::Footprint::EGO_DEFAULT;
    let edge = fp.length / 6.0;
    let zone = |x: f64| classify_impact_zone(Vec2::new(x, 0.3), &fp).unwrap();
    assert_eq!(zone(edge), ImpactZone::Frontal);
    assert_eq!(zone(fp.length / 2.0), ImpactZone::Frontal);
    assert_eq!(zone(edge - 1e-9), ImpactZone::RearTwoThirds);
    assert_eq!(zone(-fp.length / 2.0), ImpactZone::RearTwoThirds);
    assert!(classify_impact_zone(Vec2::new(0.0, fp.width), &fp).is_err());
}

#[test]
fn swerve_timing_and_degenerate_speed() {
    let limits = ManeuverLimits::default();
    let mut state = VehicleState {
        x: 0.0,
        y: 0.0,
        heading: 0.0,
        speed: 10.0,
        accel: 0.0,
        curvature: 0.0,
    };
    let lane = LaneGeometry {
        left_room: 3.5,
        right_room: 1.0,
    };
    let left = plan_swerve(SwerveDirection::Left, &state, 0.0, &limits, &lane).unwrap();
    assert!((left.duration() - 2.0 * (3.5f64 / 5.0).sqrt()).abs() < 1e-12);
    let right = plan_swerve(SwerveDirection::Right, &state, 0.0, &limits, &lane).unwrap();
    assert_eq!(right.offset(), 1.0);
    state.speed = 0.0;
    assert_eq!(
        plan_swerve(SwerveDirection::Left, &state, 0.0, &limits, &lane).unwrap_err(),
        NieonError::DegenerateSpeed
    );
}

#[test]
fn stringency_rejects_non_positive_intercepts() {
    let m = ResponseTimeModel {
        intercept: 0.3,
        slope: 0.5,
        floor: 0.2,
    };
    let v = stringency_variants(&m, &[-0.2, 0.0, 0.5]).unwrap();
    assert_eq!(v.iter().map(|m| m.intercept).collect::<Vec<_>>().len(), 3);
    assert!((v[0].intercept - 0.1).abs() < 1e-12);
    assert!(matches!(
        stringency_variants(&m, &[-0.3]),
        Err(NieonError::NonPositiveIntercept(_))
    ));
}

#[test]
fn separating_bodies_have_no_delta_v() {
    let impact = ImpactConfig {
        mass_ego: 2000.0,
        mass_partner: 1500.0,
        velocity_ego: Vec2::new(-1.0, 0.0),
        velocity_partner: Vec2::new(5.0, 0.0),
        restitution: 0.1,
        contact_normal: Vec2::new(1.0, 0.0),
        heading_ego: 0.0,
        heading_partner: 0.0,
    };
    assert!(matches!(
        compute_delta_v(&impact),
        Err(SeverityError::SeparatingBodies(_))
    ));
}

#[test]
fn head_on_pdof_is_zero_for_both() {
    let impact = ImpactConfig {
        mass_ego: 2000.0,
        mass_partner: 1500.0,
        velocity_ego: Vec2::new(10.0, 0.0),
        velocity_partner: Vec2::new(-10.0, 0.0),
        restitution: 0.1,
        contact_normal: Vec2::new(1.0, 0.0),
        heading_ego: 0.0,
        heading_partner: std::f64::consts::PI,
    };
    let dv = compute_delta_v(&impact).unwrap();
    assert!(dv.pdof_ego.abs() < 1e-12, "{}", dv.pdof_ego);
    assert!(dv.pdof_partner.abs() < 1e-12, "{}", dv.pdof_partner);
    assert!(dv.dv_partner > dv.dv_ego);
}

#[test]
fn demo_contacts_have_bounded_risk() {
    let demo = demo();
    let cfg = SeverityConfig::default();
    let mut seen = 0;
    for s in &demo.scenarios {
        let t = run_scenario(
            s,
            &mut Cruise,
            &demo.config.latency,
            &demo.config.sim_config(),
            0,
        )
        .unwrap();
        if let Some(c) = t.contact {
            let out = assess_contact(&c, s.actor_trajectories.len(), &cfg);
            assert!(out.per_actor.iter().all(|p| (0.0..=1.0).contains(p)));
            assert_eq!(out.per_actor.len(), s.actor_trajectories.len());
            seen += 1;
        }
    }
    assert!(seen > 0);
}

proptest! {
    #[test]
    fn vru_risk_is_monotone(a in 0.0f64..40.0, b in 0.0f64..40.0,
                            kind in proptest::sample::select(&[
                                ActorKind::Pedestrian, ActorKind::PedestrianChild,
                                ActorKind::Cyclist, ActorKind::Motorcyclist, ActorKind::ScooterRider,
                            ][..])) {
        let p = RiskCurveParams::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let rl = p_mais3_vru(lo, kind, &p).unwrap().p_mais3plus;
        let rh = p_mais3_vru(hi, kind, &p).unwrap().p_mais3plus;
        prop_assert!((0.0..=1.0).contains(&rl) && (0.0..=1.0).contains(&rh));
        prop_assert!(rl <= rh);
    }

    #[test]
    fn vehicle_risk_is_monotone_in_delta_v(a in 0.0f64..40.0, b in 0.0f64..40.0, pdof in -PI..PI) {
        let p = RiskCurveParams::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let rl = p_mais3_vehicle(lo, pdof, &p).p_mais3plus;
        let rh = p_mais3_vehicle(hi, pdof, &p).p_mais3plus;
        prop_assert!((0.0..=1.0).contains(&rl) && (0.0..=1.0).contains(&rh));
        prop_assert!(rl <= rh);
    }

    #[test]
    fn vehicles_have_no_impact_speed_curve(v in 0.0f64..30.0) {
        let p = RiskCurveParams::default();
        prop_assert!(p_mais3_vru(v, ActorKind::PassengerVehicle, &p).is_err());
        prop_assert!(p_mais3_vru(v, ActorKind::HeavyVehicle, &p).is_err());
    }
}
