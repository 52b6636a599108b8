//! Fixed-step kinematic simulation of one concrete scenario under an ego policy.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rect_overlap, wrap_angle, OrientedRect, Vec2};
use crate::route::{Pose, Route};
use crate::scenario::{ActorKind, ConcreteScenario, Footprint, VehicleState};

/// Ego speeds below this count as stationary, m/s.
pub const STATIONARY_SPEED: f64 = 0.1;
pub const DEFAULT_STEP: f64 = 0.01;
pub const MAX_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation step {0} s is outside (0, {MAX_STEP}]")]
    InvalidStep(f64),
    #[error("{name} delay {value} s must be non-negative and a multiple of the {step} s step")]
    InvalidLatency {
        name: &'static str,
        value: f64,
        step: f64,
    },
    #[error("contact point ({x}, {y}) lies outside the ego footprint")]
    PointOutsideFootprint { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub longitudinal_accel: f64,
    pub curvature: f64,
}

impl ControlCommand {
    pub fn is_finite(&self) -> bool {
        self.longitudinal_accel.is_finite() && self.curvature.is_finite()
    }
}

/// Ego actuation limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleLimits {
    pub max_brake: f64,
    pub max_accel: f64,
}

impl Default for VehicleLimits {
    fn default() -> Self {
        Self {
            max_brake: 8.0,
            max_accel: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyConfig {
    pub perception_delay: f64,
    pub planning_delay: f64,
    pub actuation_delay: f64,
}

impl LatencyConfig {
    pub const ZERO: LatencyConfig = LatencyConfig {
        perception_delay: 0.0,
        planning_delay: 0.0,
        actuation_delay: 0.0,
    };

    fn delay_steps(name: &'static str, value: f64, step: f64) -> Result<usize, SimError> {
        let n = (value / step).round();
        if !(value >= 0.0) || (n * step - value).abs() > 1e-6 * step {
            return Err(SimError::InvalidLatency { name, value, step });
        }
        Ok(n as usize)
    }

    /// Observation delay and actuation delay, in whole steps.
    pub fn steps(&self, step: f64) -> Result<(usize, usize), SimError> {
        let p = Self::delay_steps("perception", self.perception_delay, step)?;
        let q = Self::delay_steps("planning", self.planning_delay, step)?;
        let a = Self::delay_steps("actuation", self.actuation_delay, step)?;
        Ok((p + q, a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step: f64,
    pub limits: VehicleLimits,
    /// Per-step observation delay perturbation of up to this many steps either way.
    pub jitter_steps: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            limits: VehicleLimits::default(),
            jitter_steps: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub kind: ActorKind,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl ActorState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedActor {
    pub state: ActorState,
    pub footprint: Footprint,
}

/// What a policy sees: the world as it was `observed_time`, plus its route and limits.
#[derive(Debug, Clone)]
pub struct ObservedWorld<'a> {
    /// Current simulation time.
    pub time: f64,
    /// Time of the ground-truth snapshot being observed.
    pub observed_time: f64,
    pub step: f64,
    pub ego: VehicleState,
    /// Ego arc length travelled along its route at `observed_time`.
    pub ego_odometer: f64,
    pub ego_footprint: Footprint,
    pub actors: Vec<ObservedActor>,
    pub route: &'a Route,
    pub limits: VehicleLimits,
}

/// Decides the ego control command each step. Must only use the observation.
pub trait EgoPolicy {
    fn step(&mut self, world: &ObservedWorld<'_>) -> ControlCommand;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImpactZone {
    Frontal,
    RearTwoThirds,
}

/// Frontal iff the point lies in the front third of the ego length. The boundary
/// `length / 6` ahead of centre is frontal.
pub fn classify_impact_zone(local: Vec2, footprint: &Footprint) -> Result<ImpactZone, SimError> {
    let tol = 1e-9;
    if !(local.x.abs() <= footprint.length / 2.0 + tol
        && local.y.abs() <= footprint.width / 2.0 + tol)
    {
        return Err(SimError::PointOutsideFootprint {
            x: local.x,
            y: local.y,
        });
    }
    if local.x >= footprint.length / 6.0 {
        Ok(ImpactZone::Frontal)
    } else {
        Ok(ImpactZone::RearTwoThirds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactGeometry {
    pub point: Vec2,
    /// Unit normal from the ego towards the partner.
    pub normal: Vec2,
}

fn ego_rect(ego: &VehicleState, fp: &Footprint) -> OrientedRect {
    OrientedRect::new(ego.position(), ego.heading, fp.length, fp.width)
}

fn actor_rect(actor: &ActorState, fp: &Footprint) -> OrientedRect {
    OrientedRect::new(actor.position(), actor.heading, fp.length, fp.width)
}

/// Oriented-rectangle overlap between the ego and one actor.
pub fn detect_contact(
    ego: &VehicleState,
    ego_footprint: &Footprint,
    actor: &ActorState,
    actor_footprint: &Footprint,
) -> Option<ContactGeometry> {
    rect_overlap(
        &ego_rect(ego, ego_footprint),
        &actor_rect(actor, actor_footprint),
    )
    .map(|o| ContactGeometry {
        point: o.point,
        normal: o.normal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub time: f64,
    pub point: Vec2,
    pub normal: Vec2,
    pub ego_zone: ImpactZone,
    pub relative_speed_at_impact: f64,
    pub ego_stationary: bool,
    pub partner: usize,
    pub ego_state: VehicleState,
    pub partner_state: ActorState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub scenario_id: String,
    pub seed: u64,
    pub step: f64,
    pub ego: Vec<VehicleState>,
    pub odometer: Vec<f64>,
    /// Actor states per step, indexed `[step][actor]`.
    pub actors: Vec<Vec<ActorState>>,
    /// Command in effect over each step interval.
    pub commands: Vec<ControlCommand>,
    pub contact: Option<Contact>,
    /// Set when the policy returned a non-finite command; the trace is then invalid.
    pub fault: Option<String>,
}

impl SimTrace {
    pub fn time_at(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn is_valid(&self) -> bool {
        self.fault.is_none()
    }

    /// One row per step: time, ego pose and speed, then each actor's position.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n_actors = self.actors.first().map_or(0, Vec::len);
        let mut header = String::from("t,ego_x,ego_y,ego_heading,ego_speed");
        for i in 0..n_actors {
            header.push_str(&format!(",actor{i}_x,actor{i}_y"));
        }
        writeln!(out, "{header}")?;
        for (k, ego) in self.ego.iter().enumerate() {
            write!(
                out,
                "{:.4},{:.6},{:.6},{:.6},{:.6}",
                self.time_at(k),
                ego.x,
                ego.y,
                ego.heading,
                ego.speed
            )?;
            for a in &self.actors[k] {
                write!(out, ",{:.6},{:.6}", a.x, a.y)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub(crate) fn actor_states(scenario: &ConcreteScenario, t: f64) -> Vec<ActorState> {
    scenario
        .actor_trajectories
        .iter()
        .map(|traj| {
            let s = traj.sample_at(t);
            ActorState {
                kind: traj.kind,
                x: s.x,
                y: s.y,
                heading: s.heading,
                speed: s.speed,
            }
        })
        .collect()
}

fn observe<'a>(
    scenario: &'a ConcreteScenario,
    trace: &SimTrace,
    idx: usize,
    time: f64,
    limits: VehicleLimits,
) -> ObservedWorld<'a> {
    ObservedWorld {
        time,
        observed_time: trace.time_at(idx),
        step: trace.step,
        ego: trace.ego[idx],
        ego_odometer: trace.odometer[idx],
        ego_footprint: scenario.ego_footprint,
        actors: trace.actors[idx]
            .iter()
            .zip(&scenario.footprints)
            .map(|(s, fp)| ObservedActor {
                state: *s,
                footprint: *fp,
            })
            .collect(),
        route: &scenario.ego_route,
        limits,
    }
}

/// The world as observed at time `t` under `latency`: the recorded ground truth at
/// `max(0, t - perception - planning)`.
pub fn delayed_observation<'a>(
    scenario: &'a ConcreteScenario,
    trace: &SimTrace,
    latency: &LatencyConfig,
    t: f64,
    limits: VehicleLimits,
) -> ObservedWorld<'a> {
    let observed = (t - latency.perception_delay - latency.planning_delay).max(0.0);
    let idx = ((observed / trace.step + 1e-9).floor() as usize).min(trace.ego.len() - 1);
    observe(scenario, trace, idx, t, limits)
}

/// Exact constant-acceleration update over `dt`, stopping at zero speed.
pub(crate) fn integrate(state: &VehicleState, cmd: ControlCommand, dt: f64) -> (VehicleState, f64) {
    let v = state.speed;
    let a = cmd.longitudinal_accel;
    let (ds, v1, a_rec) = if v + a * dt < 0.0 {
        let ts = v / -a;
        (
            v * ts + 0.5 * a * ts * ts,
            0.0,
            if v > 0.0 { a } else { 0.0 },
        )
    } else {
        (v * dt + 0.5 * a * dt * dt, v + a * dt, a)
    };
    let pose = Pose::new(state.x, state.y, state.heading).advance(ds, cmd.curvature);
    (
        VehicleState {
            x: pose.x,
            y: pose.y,
            heading: wrap_angle(pose.heading),
            speed: v1,
            accel: a_rec,
            curvature: cmd.curvature,
        },
        ds,
    )
}

fn clamp_command(cmd: ControlCommand, limits: &VehicleLimits, fp: &Footprint) -> ControlCommand {
    let k = fp.max_curvature();
    ControlCommand {
        longitudinal_accel: cmd
            .longitudinal_accel
            .clamp(-limits.max_brake, limits.max_accel),
        curvature: cmd.curvature.clamp(-k, k),
    }
}

fn make_contact(
    scenario: &ConcreteScenario,
    ego: &VehicleState,
    actors: &[ActorState],
    time: f64,
) -> Option<Contact> {
    let fp = &scenario.ego_footprint;
    actors.iter().enumerate().find_map(|(i, a)| {
        let geom = detect_contact(ego, fp, a, &scenario.footprints[i])?;
        let local = (geom.point - ego.position()).to_frame(ego.heading);
        let clamped = Vec2::new(
            local.x.clamp(-fp.length / 2.0, fp.length / 2.0),
            local.y.clamp(-fp.width / 2.0, fp.width / 2.0),
        );
        let zone = classify_impact_zone(clamped, fp).unwrap_or(ImpactZone::RearTwoThirds);
        Some(Contact {
            time,
            point: geom.point,
            normal: geom.normal,
            ego_zone: zone,
            relative_speed_at_impact: (ego.velocity() - a.velocity()).norm(),
            ego_stationary: ego.speed < STATIONARY_SPEED,
            partner: i,
            ego_state: *ego,
            partner_state: *a,
        })
    })
}

/// Runs one scenario to first contact or to its duration.
pub fn run_scenario(
    scenario: &ConcreteScenario,
    policy: &mut dyn EgoPolicy,
    latency: &LatencyConfig,
    config: &SimConfig,
    seed: u64,
) -> Result<SimTrace, SimError> {
    let step = config.step;
    if !(step > 0.0 && step <= MAX_STEP) {
        return Err(SimError::InvalidStep(step));
    }
    let (obs_delay, act_delay) = latency.steps(step)?;
    let n = (scenario.duration / step).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = config.jitter_steps as i64;

    let mut trace = SimTrace {
        scenario_id: scenario.id.clone(),
        seed,
        step,
        ego: Vec::with_capacity(n + 1),
        odometer: Vec::with_capacity(n + 1),
        actors: Vec::with_capacity(n + 1),
        commands: Vec::with_capacity(n),
        contact: None,
        fault: None,
    };
    // `None` entries stand for the nominal command issued before the run began.
    let mut pending: VecDeque<Option<ControlCommand>> = (0..act_delay).map(|_| None).collect();
    let mut ego = scenario.ego_start;
    let mut odometer = 0.0;

    for k in 0..=n {
        let t = k as f64 * step;
        let actors = actor_states(scenario, t);
        if let Some(c) = make_contact(scenario, &ego, &actors, t) {
            trace.contact = Some(c);
        }
        trace.ego.push(ego);
        trace.odometer.push(odometer);
        trace.actors.push(actors);
        if trace.contact.is_some() || k == n {
            break;
        }

        let mut delay = obs_delay as i64;
        if jitter > 0 {
            delay += rng.gen_range(-jitter..=jitter);
        }
        let idx = (k as i64 - delay).clamp(0, k as i64) as usize;
        let world = observe(scenario, &trace, idx, t, config.limits);
        let cmd = policy.step(&world);
        if !cmd.is_finite() {
            trace.fault = Some(format!(
                "non-finite command at t={t:.3}: accel {}, curvature {}",
                cmd.longitudinal_accel, cmd.curvature
            ));
            break;
        }
        pending.push_back(Some(clamp_command(
            cmd,
            &config.limits,
            &scenario.ego_footprint,
        )));
        let effective = pending
            .pop_front()
            .flatten()
            .unwrap_or_else(|| ControlCommand {
                longitudinal_accel: scenario.ego_start.accel,
                curvature: scenario.ego_route.curvature_at(odometer),
            });
        trace.commands.push(effective);
        let (next, ds) = integrate(&ego, effective, step);
        ego = next;
        odometer += ds;
    }
    Ok(trace)
}
