//! Expansion of logical scenarios into concrete, simulatable scenarios.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Vec2};
use crate::layout::LayoutLibrary;
use crate::route::Route;
use crate::scenario::{
    assign_safety_group, ActorSpec, ActorTrajectory, ConcreteScenario, Footprint, GroupError,
    GroupRules, LogicalScenario, Maneuver, Placement, StimulusAnnotation, TrajectorySample,
    VehicleState,
};

/// Time from scenario start to stimulus onset, s.
pub const LEAD_IN: f64 = 1.0;
/// Spacing of actor trajectory samples, s.
pub const SAMPLE_INTERVAL: f64 = 0.05;
const POST_CONFLICT: f64 = 4.0;
const DEFAULT_RAMP_UP: f64 = 0.5;
const DEFAULT_DECEL: f64 = 6.0;
/// Ego arc length on its template where same-lane conflicts are anchored.
const SAME_LANE_ANCHOR: f64 = 130.0;
const PATH_SPACING: f64 = 0.5;
const CONFLICT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingMode {
    Grid,
    LatinHypercube { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstantiateOptions {
    pub mode: SamplingMode,
    pub ego_footprint: Footprint,
}

impl Default for InstantiateOptions {
    fn default() -> Self {
        Self {
            mode: SamplingMode::Grid,
            ego_footprint: Footprint::EGO_DEFAULT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstantiateError {
    #[error("parameter `{param}` has an empty range (requires min <= max and step > 0)")]
    EmptyRange { param: String },
    #[error("missing required parameter `{param}`")]
    MissingParameter { param: String },
    #[error("unknown layout class `{0}`")]
    UnknownLayout(String),
    #[error("layout `{layout}` cannot host {maneuver}{}", placement.map(|p| format!(" from {p}")).unwrap_or_default())]
    LayoutUnavailable {
        layout: String,
        maneuver: Maneuver,
        placement: Option<Placement>,
    },
    #[error("actor {actor} never comes within reach of the ego path")]
    NoConflictPoint { actor: usize },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Parameter valuations for a logical scenario, in deterministic order.
pub fn valuations(
    logical: &LogicalScenario,
    mode: SamplingMode,
) -> Result<Vec<BTreeMap<String, f64>>, InstantiateError> {
    for (name, range) in &logical.parameter_ranges {
        if !range.is_well_formed() {
            return Err(InstantiateError::EmptyRange {
                param: name.clone(),
            });
        }
    }
    for param in logical.required_parameters() {
        if !logical.parameter_ranges.contains_key(&param) {
            return Err(InstantiateError::MissingParameter { param });
        }
    }
    let names: Vec<&String> = logical.parameter_ranges.keys().collect();
    match mode {
        SamplingMode::Grid => {
            let axes: Vec<Vec<f64>> = logical
                .parameter_ranges
                .values()
                .map(|r| r.grid_values())
                .collect();
            let mut out = vec![BTreeMap::new()];
            for (name, values) in names.iter().zip(&axes) {
                let mut next = Vec::with_capacity(out.len() * values.len());
                for partial in &out {
                    for v in values {
                        let mut m = partial.clone();
                        m.insert((*name).clone(), *v);
                        next.push(m);
                    }
                }
                out = next;
            }
            Ok(out)
        }
        SamplingMode::LatinHypercube { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = vec![BTreeMap::new(); samples];
            for (name, range) in &logical.parameter_ranges {
                let mut strata: Vec<usize> = (0..samples).collect();
                strata.shuffle(&mut rng);
                for (k, m) in out.iter_mut().enumerate() {
                    let u: f64 = rng.gen();
                    let v = if range.max > range.min {
                        range.min
                            + (strata[k] as f64 + u) / samples as f64 * (range.max - range.min)
                    } else {
                        range.min
                    };
                    m.insert(name.clone(), v);
                }
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Motion {
    Constant,
    /// Waits at its start until stimulus onset, then moves.
    Triggered,
    /// Leads the ego and brakes to a stop from stimulus onset.
    SuddenStop,
}

fn motion_for(m: Maneuver) -> Motion {
    match m {
        Maneuver::CrossPath | Maneuver::PullOut => Motion::Triggered,
        Maneuver::SuddenStop => Motion::SuddenStop,
        _ => Motion::Constant,
    }
}

/// Where the ego and actor paths meet: ego and actor arc lengths on their templates.
#[derive(Debug, Clone, Copy)]
struct Anchor {
    ego_s: f64,
    actor_s: f64,
}

fn closest_params(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> (f64, f64) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let denom = d1.cross(d2);
    if denom.abs() > 1e-12 {
        let t = (q0 - p0).cross(d2) / denom;
        let u = (q0 - p0).cross(d1) / denom;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            return (t, u);
        }
    }
    let project = |p: Vec2, a: Vec2, ab: Vec2| {
        let len2 = ab.dot(ab);
        if len2 > 0.0 {
            ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    let candidates = [
        (0.0, project(p0, q0, d2)),
        (1.0, project(p1, q0, d2)),
        (project(q0, p0, d1), 0.0),
        (project(q1, p0, d1), 1.0),
    ];
    candidates
        .into_iter()
        .min_by(|a, b| {
            let da = (p0 + d1 * a.0 - (q0 + d2 * a.1)).norm();
            let db = (p0 + d1 * b.0 - (q0 + d2 * b.1)).norm();
            da.total_cmp(&db)
        })
        .unwrap_or((0.0, 0.0))
}

/// First point along the ego path that comes within tolerance of the actor path.
fn crossing_anchor(ego: &Route, actor: &Route) -> Option<Anchor> {
    let e = ego.sample(0.0, ego.length(), PATH_SPACING);
    let a = actor.sample(0.0, actor.length(), PATH_SPACING);
    for ew in e.windows(2) {
        let mut best: Option<(f64, Anchor)> = None;
        for aw in a.windows(2) {
            let (t, u) = closest_params(ew[0].1, ew[1].1, aw[0].1, aw[1].1);
            let pe = ew[0].1 + (ew[1].1 - ew[0].1) * t;
            let pa = aw[0].1 + (aw[1].1 - aw[0].1) * u;
            let d = (pe - pa).norm();
            if d < CONFLICT_TOLERANCE && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((
                    d,
                    Anchor {
                        ego_s: ew[0].0 + (ew[1].0 - ew[0].0) * t,
                        actor_s: aw[0].0 + (aw[1].0 - aw[0].0) * u,
                    },
                ));
            }
        }
        if let Some((_, anchor)) = best {
            return Some(anchor);
        }
    }
    None
}

/// Same-lane conflicts: the actor centre sits one half-length sum ahead of
/// (or, head-on, facing) the ego centre.
fn same_lane_anchor(ego: &Route, actor: &Route, half_lengths: f64) -> Anchor {
    let pose = ego.pose_at(SAME_LANE_ANCHOR);
    let front = pose.position() + Vec2::from_angle(pose.heading) * half_lengths;
    let dir = Vec2::from_angle(actor.start.heading);
    Anchor {
        ego_s: SAME_LANE_ANCHOR,
        actor_s: (front - actor.start.position()).dot(dir),
    }
}

struct ActorPlan {
    spec: ActorSpec,
    route: Route,
    anchor: Anchor,
    footprint: Footprint,
}

fn sample_times(duration: f64) -> Vec<f64> {
    let n = (duration / SAMPLE_INTERVAL + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * SAMPLE_INTERVAL).collect();
    if duration - times[times.len() - 1] > 1e-9 {
        times.push(duration);
    }
    times
}

/// Expands a logical scenario into concrete scenarios, sorted by id.
pub fn instantiate(
    logical: &LogicalScenario,
    layouts: &LayoutLibrary,
    rules: &GroupRules,
    options: &InstantiateOptions,
) -> Result<Vec<ConcreteScenario>, InstantiateError> {
    let f = &logical.functional;
    let points = valuations(logical, options.mode)?;
    let layout = layouts
        .get(&f.layout_class)
        .ok_or_else(|| InstantiateError::UnknownLayout(f.layout_class.clone()))?;
    let ego_template = layout.ego_route(f.ego_maneuver.maneuver).ok_or_else(|| {
        InstantiateError::LayoutUnavailable {
            layout: f.layout_class.clone(),
            maneuver: f.ego_maneuver.maneuver,
            placement: None,
        }
    })?;

    let mut plans = Vec::new();
    for (i, spec) in f.actors.iter().enumerate() {
        let route = layout
            .actor_route(spec.maneuver.maneuver, spec.placement)
            .ok_or_else(|| InstantiateError::LayoutUnavailable {
                layout: f.layout_class.clone(),
                maneuver: spec.maneuver.maneuver,
                placement: Some(spec.placement),
            })?;
        let footprint = spec.kind.default_footprint();
        let anchor = if spec.placement == Placement::SameLane {
            let half = (options.ego_footprint.length + footprint.length) / 2.0;
            same_lane_anchor(&ego_template, &route, half)
        } else {
            crossing_anchor(&ego_template, &route)
                .ok_or(InstantiateError::NoConflictPoint { actor: i })?
        };
        plans.push(ActorPlan {
            spec: *spec,
            route,
            anchor,
            footprint,
        });
    }

    let width = points.len().to_string().len().max(4);
    let prefix = match options.mode {
        SamplingMode::Grid => "g",
        SamplingMode::LatinHypercube { .. } => "l",
    };
    let mut out = Vec::with_capacity(points.len());
    for (idx, params) in points.into_iter().enumerate() {
        let get = |name: &str, default: f64| params.get(name).copied().unwrap_or(default);
        let ego_speed = params["ego.speed"];
        let ttc = params["stimulus.trigger_ttc"];
        let ramp_up = get("stimulus.ramp_up", DEFAULT_RAMP_UP);
        let onset = LEAD_IN;
        let t_conflict = onset + ttc;
        let ego_offset = plans[0].anchor.ego_s - ego_speed * t_conflict;
        let ego_route = ego_template.rebased(ego_offset);
        let start = ego_route.pose_at(0.0);

        let mut duration = t_conflict + POST_CONFLICT;
        for (i, plan) in plans.iter().enumerate() {
            if motion_for(plan.spec.maneuver.maneuver) == Motion::SuddenStop {
                let v = get(&format!("actor{i}.speed"), 0.0);
                let decel = get(&format!("actor{i}.decel"), DEFAULT_DECEL);
                duration = duration.max(t_conflict + POST_CONFLICT + v / decel);
            }
        }
        let times = sample_times(duration);

        let mut trajectories = Vec::with_capacity(plans.len());
        for (i, plan) in plans.iter().enumerate() {
            let v = params[&format!("actor{i}.speed")];
            let offset = get(&format!("actor{i}.time_offset"), 0.0);
            let decel = get(&format!("actor{i}.decel"), DEFAULT_DECEL).max(1e-6);
            // Ego reaches this actor's anchor at `arrival`.
            let arrival = if ego_speed > 0.0 {
                (plan.anchor.ego_s - ego_offset) / ego_speed
            } else {
                t_conflict
            } + offset;
            let motion = motion_for(plan.spec.maneuver.maneuver);
            let samples = times
                .iter()
                .map(|&t| {
                    let (s, speed) = match motion {
                        Motion::Constant => (plan.anchor.actor_s + v * (t - arrival), v),
                        Motion::Triggered => {
                            let s0 = plan.anchor.actor_s - v * (arrival - onset);
                            if t < onset {
                                (s0, 0.0)
                            } else {
                                (s0 + v * (t - onset), v)
                            }
                        }
                        Motion::SuddenStop => {
                            let tau = t - onset;
                            if tau < 0.0 {
                                (plan.anchor.actor_s + v * tau, v)
                            } else {
                                let tau = tau.min(v / decel);
                                (
                                    plan.anchor.actor_s + v * tau - 0.5 * decel * tau * tau,
                                    (v - decel * tau).max(0.0),
                                )
                            }
                        }
                    };
                    let pose = plan.route.pose_at(s);
                    TrajectorySample {
                        t,
                        x: pose.x,
                        y: pose.y,
                        heading: wrap_angle(pose.heading),
                        speed,
                    }
                })
                .collect();
            trajectories.push(ActorTrajectory {
                kind: plan.spec.kind,
                samples,
            });
        }

        let mut scenario = ConcreteScenario {
            id: format!("{}__{prefix}{idx:0width$}", f.id),
            logical_parent: f.id.clone(),
            test_request: f.test_request.clone().unwrap_or_else(|| f.id.clone()),
            ego_start: VehicleState {
                x: start.x,
                y: start.y,
                heading: wrap_angle(start.heading),
                speed: ego_speed,
                accel: 0.0,
                curvature: ego_route.curvature_at(0.0),
            },
            ego_footprint: options.ego_footprint,
            ego_route,
            lane: layout.lane,
            actor_trajectories: trajectories,
            footprints: plans.iter().map(|p| p.footprint).collect(),
            stimulus: StimulusAnnotation {
                onset_time: onset,
                end_time: (onset + ramp_up).min(duration),
            },
            safety_group: String::new(),
            conflict_type: f.conflict_type.clone(),
            layout_class: f.layout_class.clone(),
            ego_maneuver: f.ego_maneuver.maneuver,
            salient_factors: f.salient_factors.iter().copied().collect::<BTreeSet<_>>(),
            parameters: params.clone(),
            duration,
        };
        scenario.safety_group = assign_safety_group(&scenario, rules)?;
        out.push(scenario);
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::parse_functional;
    use crate::scenario::{RoadUserGroup, SafetyGroupRegistry};

    const SRC: &str = r#"
scenario "ped" {
  ego { maneuver go_straight speed: range(8, 12, step 2) }
  actor pedestrian { maneuver cross_path speed: 1.5 }
  layout straight_two_lane
  stimulus { trigger_ttc: range(1.5, 2.5, step 0.5) }
  group crossing_pedestrian_midblock
}
"#;

    fn setup() -> (LayoutLibrary, GroupRules) {
        let reg = SafetyGroupRegistry::bundled(RoadUserGroup::Vehicle);
        (LayoutLibrary::bundled(), reg.rules().unwrap())
    }

    #[test]
    fn grid_expansion_and_conflict_timing() {
        let (lib, rules) = setup();
        let logical = parse_functional(SRC).unwrap().logical;
        let out = instantiate(&logical, &lib, &rules, &InstantiateOptions::default()).unwrap();
        assert_eq!(out.len(), 9);
        for s in &out {
            assert_eq!(s.safety_group, "ped_crossing_midblock");
            let t_c = LEAD_IN + s.parameters["stimulus.trigger_ttc"];
            let ego_at = s.ego_route.pose_at(s.ego_start.speed * t_c);
            let ped = s.actor_trajectories[0].sample_at(t_c);
            let d = ((ego_at.x - ped.x).powi(2) + (ego_at.y - ped.y).powi(2)).sqrt();
            assert!(d < 0.05, "{}: {d}", s.id);
            assert_eq!(s.actor_trajectories[0].sample_at(0.5).speed, 0.0);
            let last = s.actor_trajectories[0].samples.last().unwrap().t;
            assert!((last - s.duration).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_range_is_rejected() {
        let (lib, rules) = setup();
        let src = SRC.replace("range(8, 12, step 2)", "range(12, 8, step 2)");
        let logical = parse_functional(&src).unwrap().logical;
        assert!(matches!(
            instantiate(&logical, &lib, &rules, &InstantiateOptions::default()),
            Err(InstantiateError::EmptyRange { .. })
        ));
    }

    #[test]
    fn unavailable_layout_is_reported() {
        let (lib, rules) = setup();
        let src = SRC.replace("maneuver go_straight", "maneuver turn_left");
        let logical = parse_functional(&src).unwrap().logical;
        assert!(matches!(
            instantiate(&logical, &lib, &rules, &InstantiateOptions::default()),
            Err(InstantiateError::LayoutUnavailable { .. })
        ));
    }

    #[test]
    fn latin_hypercube_is_stratified_and_seeded() {
        let logical = parse_functional(SRC).unwrap().logical;
        let mode = SamplingMode::LatinHypercube {
            samples: 10,
            seed: 7,
        };
        let a = valuations(&logical, mode).unwrap();
        assert_eq!(a, valuations(&logical, mode).unwrap());
        let mut bins: Vec<usize> = a
            .iter()
            .map(|m| ((m["ego.speed"] - 8.0) / 4.0 * 10.0).floor() as usize)
            .collect();
        bins.sort();
        assert_eq!(bins, (0..10).collect::<Vec<_>>());
    }
}
