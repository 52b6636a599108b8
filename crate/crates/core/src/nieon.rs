//! The NIEON reference driver: response time from stimulus ramp-up, then the best of
//! braking, swerving left and swerving right.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::wrap_angle;
use crate::scenario::{ConcreteScenario, LaneGeometry, StimulusAnnotation, VehicleState};
use crate::severity::{assess_contact, SeverityConfig, SeverityOutcome};
use crate::sim::{
    run_scenario, Contact, ControlCommand, EgoPolicy, LatencyConfig, ObservedWorld, SimConfig,
    SimError, SimTrace, VehicleLimits,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NieonError {
    #[error("response-time intercept must be positive (got {0} s)")]
    NonPositiveIntercept(f64),
    #[error("invalid response-time model: {0}")]
    InvalidModel(String),
    #[error("invalid maneuver limits: {0}")]
    InvalidLimits(String),
    #[error("cannot swerve at zero speed")]
    DegenerateSpeed,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("reference simulation of {scenario} faulted: {message}")]
    Fault { scenario: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseTimeModel {
    pub intercept: f64,
    pub slope: f64,
    pub floor: f64,
}

impl ResponseTimeModel {
    pub fn validate(&self) -> Result<(), NieonError> {
        if !(self.intercept > 0.0) {
            return Err(NieonError::NonPositiveIntercept(self.intercept));
        }
        if !(self.floor >= 0.0
            && self.slope >= 0.0
            && self.floor.is_finite()
            && self.slope.is_finite())
        {
            return Err(NieonError::InvalidModel(format!(
                "slope {} and floor {} must be finite and non-negative",
                self.slope, self.floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManeuverLimits {
    pub max_decel: f64,
    /// m/s³; `inf` applies full deceleration at once.
    pub jerk_limit: f64,
    pub max_lateral_accel: f64,
    pub swerve_offset: f64,
    /// Whether swerves brake at the same time.
    pub swerve_brakes: bool,
}

impl Default for ManeuverLimits {
    fn default() -> Self {
        Self {
            max_decel: 8.0,
            jerk_limit: 30.0,
            max_lateral_accel: 5.0,
            swerve_offset: 3.5,
            swerve_brakes: true,
        }
    }
}

impl ManeuverLimits {
    pub fn validate(&self) -> Result<(), NieonError> {
        for (name, v) in [
            ("max_decel", self.max_decel),
            ("jerk_limit", self.jerk_limit),
            ("max_lateral_accel", self.max_lateral_accel),
            ("swerve_offset", self.swerve_offset),
        ] {
            if !(v > 0.0) || v.is_nan() {
                return Err(NieonError::InvalidLimits(format!(
                    "{name} must be positive"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NieonManeuver {
    BrakeOnly,
    SwerveLeft,
    SwerveRight,
}

impl NieonManeuver {
    pub const ALL: [NieonManeuver; 3] = [
        NieonManeuver::BrakeOnly,
        NieonManeuver::SwerveLeft,
        NieonManeuver::SwerveRight,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwerveDirection {
    Left,
    Right,
}

impl SwerveDirection {
    fn sign(self) -> f64 {
        match self {
            SwerveDirection::Left => 1.0,
            SwerveDirection::Right => -1.0,
        }
    }
}

pub fn ramp_up_time(stimulus: &StimulusAnnotation) -> f64 {
    stimulus.end_time - stimulus.onset_time
}

pub fn response_time(model: &ResponseTimeModel, ramp_up: f64) -> f64 {
    model.floor.max(model.intercept + model.slope * ramp_up)
}

/// One model per delta, with the intercept shifted by that delta.
pub fn stringency_variants(
    model: &ResponseTimeModel,
    deltas: &[f64],
) -> Result<Vec<ResponseTimeModel>, NieonError> {
    deltas
        .iter()
        .map(|d| {
            let intercept = model.intercept + d;
            if !(intercept > 0.0) {
                return Err(NieonError::NonPositiveIntercept(intercept));
            }
            Ok(ResponseTimeModel {
                intercept,
                ..*model
            })
        })
        .collect()
}

/// Jerk-limited deceleration from the accel held at the reaction instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakeSchedule {
    a0: f64,
    target: f64,
    jerk: f64,
    curvature: f64,
    stopped: bool,
}

impl BrakeSchedule {
    /// Continuous commanded acceleration `tau` seconds after the reaction.
    pub fn accel_at(&self, tau: f64) -> f64 {
        if self.stopped {
            return 0.0;
        }
        (self.a0 - self.jerk * tau).max(self.target)
    }

    /// Mean of `accel_at` over `[tau, tau + dt]`, so that exact per-step integration
    /// reproduces the continuous velocity profile.
    pub fn mean_accel(&self, tau: f64, dt: f64) -> f64 {
        if self.stopped {
            return 0.0;
        }
        let t_full = if self.jerk.is_infinite() {
            0.0
        } else {
            ((self.a0 - self.target) / self.jerk).max(0.0)
        };
        let t1 = tau + dt;
        if t1 <= t_full {
            self.a0 - self.jerk * (tau + 0.5 * dt)
        } else if tau >= t_full {
            self.target
        } else {
            let ramp = (t_full - tau) * (self.a0 - self.jerk * 0.5 * (tau + t_full));
            (ramp + self.target * (t1 - t_full)) / dt
        }
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }
}

pub fn plan_brake(state: &VehicleState, limits: &ManeuverLimits) -> BrakeSchedule {
    BrakeSchedule {
        a0: state.accel.max(-limits.max_decel),
        target: -limits.max_decel,
        jerk: limits.jerk_limit,
        curvature: state.curvature,
        stopped: state.speed <= 0.0,
    }
}

/// Bang-bang lateral-acceleration lane offset, optionally with braking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwerveSchedule {
    sign: f64,
    lateral_accel: f64,
    offset: f64,
    half_time: f64,
    heading0: f64,
    odometer0: f64,
    base_curvature: f64,
    brake: Option<BrakeSchedule>,
    hold_accel: f64,
    returning: bool,
    done: bool,
}

impl SwerveSchedule {
    /// Minimum duration of the offset manoeuvre, `2 sqrt(offset / a_lat)`.
    pub fn duration(&self) -> f64 {
        2.0 * self.half_time
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn heading_deviation(&self, state: &VehicleState, odometer: f64) -> f64 {
        let nominal = self.heading0 + self.base_curvature * (odometer - self.odometer0);
        wrap_angle(state.heading - nominal)
    }

    /// Command for the step starting `tau` seconds after the reaction.
    pub fn command(
        &mut self,
        state: &VehicleState,
        odometer: f64,
        tau: f64,
        dt: f64,
    ) -> ControlCommand {
        let accel = match &self.brake {
            Some(b) => b.mean_accel(tau, dt),
            None => self.hold_accel,
        };
        let v = state.speed.max(1e-3);
        let bend = self.lateral_accel / (v * v);
        let curvature = if self.done || self.offset <= 0.0 {
            self.base_curvature
        } else if tau + 1e-9 < self.half_time && !self.returning {
            self.base_curvature + self.sign * bend
        } else {
            self.returning = true;
            let dev = self.heading_deviation(state, odometer);
            let step_turn = bend * state.speed * dt;
            if dev * self.sign <= 0.0 {
                self.done = true;
                self.base_curvature
            } else if dev.abs() <= step_turn {
                self.done = true;
                self.base_curvature - dev / (state.speed * dt).max(1e-9)
            } else {
                self.base_curvature - self.sign * bend
            }
        };
        ControlCommand {
            longitudinal_accel: accel,
            curvature,
        }
    }
}

pub fn plan_swerve(
    direction: SwerveDirection,
    state: &VehicleState,
    odometer: f64,
    limits: &ManeuverLimits,
    lane: &LaneGeometry,
) -> Result<SwerveSchedule, NieonError> {
    if state.speed <= 0.0 {
        return Err(NieonError::DegenerateSpeed);
    }
    let room = match direction {
        SwerveDirection::Left => lane.left_room,
        SwerveDirection::Right => lane.right_room,
    };
    let offset = limits.swerve_offset.min(room).max(0.0);
    Ok(SwerveSchedule {
        sign: direction.sign(),
        lateral_accel: limits.max_lateral_accel,
        offset,
        half_time: (offset / limits.max_lateral_accel).sqrt(),
        heading0: state.heading,
        odometer0: odometer,
        base_curvature: state.curvature,
        brake: limits.swerve_brakes.then(|| plan_brake(state, limits)),
        hold_accel: state.accel,
        returning: false,
        done: false,
    })
}

enum Plan {
    Brake(BrakeSchedule),
    Swerve(SwerveSchedule),
}

/// Follows the nominal route until the reaction step, then runs one candidate schedule.
pub struct NieonPolicy {
    maneuver: NieonManeuver,
    reaction_step: usize,
    limits: ManeuverLimits,
    lane: LaneGeometry,
    nominal_accel: f64,
    plan: Option<Plan>,
}

impl NieonPolicy {
    pub fn new(
        scenario: &ConcreteScenario,
        maneuver: NieonManeuver,
        reaction_time: f64,
        step: f64,
        limits: ManeuverLimits,
    ) -> Self {
        Self {
            maneuver,
            reaction_step: (reaction_time / step - 1e-9).ceil().max(0.0) as usize,
            limits,
            lane: scenario.lane,
            nominal_accel: scenario.ego_start.accel,
            plan: None,
        }
    }
}

impl EgoPolicy for NieonPolicy {
    fn step(&mut self, world: &ObservedWorld<'_>) -> ControlCommand {
        let k = (world.time / world.step).round() as usize;
        if k < self.reaction_step {
            return ControlCommand {
                longitudinal_accel: self.nominal_accel,
                curvature: world.route.curvature_at(world.ego_odometer),
            };
        }
        let tau = (k - self.reaction_step) as f64 * world.step;
        let plan = self.plan.get_or_insert_with(|| {
            let dir = match self.maneuver {
                NieonManeuver::BrakeOnly => None,
                NieonManeuver::SwerveLeft => Some(SwerveDirection::Left),
                NieonManeuver::SwerveRight => Some(SwerveDirection::Right),
            };
            dir.and_then(|d| {
                plan_swerve(d, &world.ego, world.ego_odometer, &self.limits, &self.lane).ok()
            })
            .map(Plan::Swerve)
            .unwrap_or_else(|| Plan::Brake(plan_brake(&world.ego, &self.limits)))
        });
        match plan {
            Plan::Brake(b) => ControlCommand {
                longitudinal_accel: b.mean_accel(tau, world.step),
                curvature: b.curvature(),
            },
            Plan::Swerve(s) => s.command(&world.ego, world.ego_odometer, tau, world.step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NieonOutcome {
    pub chosen_maneuver: NieonManeuver,
    pub collided: bool,
    pub contact: Option<Contact>,
    /// p(MAIS3+) per actor.
    pub severity: Vec<f64>,
    pub serious_injury: bool,
    pub response_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub maneuver: NieonManeuver,
    pub trace: SimTrace,
    pub severity: SeverityOutcome,
}

impl CandidateResult {
    /// `(collided, serious injury, max risk, relative impact speed)`, compared lexicographically.
    pub fn key(&self) -> (bool, bool, f64, f64) {
        (
            self.trace.contact.is_some(),
            self.severity.serious_injury,
            self.severity.max_risk(),
            self.trace
                .contact
                .map_or(0.0, |c| c.relative_speed_at_impact),
        )
    }
}

pub fn compare_keys(a: (bool, bool, f64, f64), b: (bool, bool, f64, f64)) -> Ordering {
    a.0.cmp(&b.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.total_cmp(&b.2))
        .then(a.3.total_cmp(&b.3))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NieonEvaluation {
    pub outcome: NieonOutcome,
    /// All three candidates in fixed order.
    pub candidates: Vec<CandidateResult>,
}

impl NieonEvaluation {
    pub fn chosen(&self) -> &CandidateResult {
        self.candidates
            .iter()
            .find(|c| c.maneuver == self.outcome.chosen_maneuver)
            .expect("chosen candidate is among the candidates")
    }
}

/// Simulates every candidate and keeps the one with the smallest outcome key; ties
/// go to the earlier of BrakeOnly, SwerveLeft, SwerveRight.
pub fn evaluate_nieon(
    scenario: &ConcreteScenario,
    rt_model: &ResponseTimeModel,
    limits: &ManeuverLimits,
    sim: &SimConfig,
    severity: &SeverityConfig,
) -> Result<NieonEvaluation, NieonError> {
    let rt = response_time(rt_model, ramp_up_time(&scenario.stimulus));
    let reaction_time = scenario.stimulus.onset_time + rt;
    let config = SimConfig {
        step: sim.step,
        limits: VehicleLimits {
            max_brake: limits.max_decel.max(sim.limits.max_brake),
            max_accel: sim.limits.max_accel,
        },
        jitter_steps: 0,
    };
    let n_actors = scenario.actor_trajectories.len();
    let mut candidates = Vec::with_capacity(3);
    for maneuver in NieonManeuver::ALL {
        let mut policy = NieonPolicy::new(scenario, maneuver, reaction_time, sim.step, *limits);
        let trace = run_scenario(scenario, &mut policy, &LatencyConfig::ZERO, &config, 0)?;
        if let Some(message) = &trace.fault {
            return Err(NieonError::Fault {
                scenario: scenario.id.clone(),
                message: message.clone(),
            });
        }
        let sev = match &trace.contact {
            Some(c) => assess_contact(c, n_actors, severity),
            None => SeverityOutcome::none(n_actors),
        };
        candidates.push(CandidateResult {
            maneuver,
            trace,
            severity: sev,
        });
    }
    let mut best = 0;
    for i in 1..candidates.len() {
        if compare_keys(candidates[i].key(), candidates[best].key()) == Ordering::Less {
            best = i;
        }
    }
    let chosen = &candidates[best];
    let outcome = NieonOutcome {
        chosen_maneuver: chosen.maneuver,
        collided: chosen.trace.contact.is_some(),
        contact: chosen.trace.contact,
        severity: chosen.severity.per_actor.clone(),
        serious_injury: chosen.severity.serious_injury,
        response_time: rt,
    };
    Ok(NieonEvaluation {
        outcome,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(intercept: f64, slope: f64, floor: f64) -> ResponseTimeModel {
        ResponseTimeModel {
            intercept,
            slope,
            floor,
        }
    }

    #[test]
    fn response_time_examples() {
        assert!((response_time(&model(0.5, 0.3, 0.0), 1.5) - 0.95).abs() < 1e-12);
        assert_eq!(response_time(&model(0.2, 0.1, 0.3), 0.0), 0.3);
        assert_eq!(response_time(&model(0.7, 0.0, 0.0), 3.0), 0.7);
    }

    #[test]
    fn stringency_shifts_intercept() {
        let v = stringency_variants(&model(0.5, 0.6, 0.25), &[-0.2, 0.0, 0.2]).unwrap();
        let i: Vec<f64> = v.iter().map(|m| m.intercept).collect();
        assert!((i[0] - 0.3).abs() < 1e-12 && i[1] == 0.5 && (i[2] - 0.7).abs() < 1e-12);
        assert!(matches!(
            stringency_variants(&model(0.5, 0.6, 0.25), &[-0.5]),
            Err(NieonError::NonPositiveIntercept(_))
        ));
        assert!(stringency_variants(&model(0.5, 0.6, 0.25), &[])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn mean_accel_integrates_ramp() {
        let b = BrakeSchedule {
            a0: 0.0,
            target: -8.0,
            jerk: 30.0,
            curvature: 0.0,
            stopped: false,
        };
        // Integrate the mean over uneven steps and compare with the exact integral.
        let dt = 0.07;
        let mut tau = 0.0;
        let mut dv = 0.0;
        while tau < 1.0 {
            dv += b.mean_accel(tau, dt) * dt;
            tau += dt;
        }
        let t_full = 8.0 / 30.0;
        let exact = -0.5 * 8.0 * t_full - 8.0 * (tau - t_full);
        assert!((dv - exact).abs() < 1e-9);
    }

    #[test]
    fn swerve_needs_speed() {
        let s = VehicleState {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            speed: 0.0,
            accel: 0.0,
            curvature: 0.0,
        };
        assert!(matches!(
            plan_swerve(
                SwerveDirection::Left,
                &s,
                0.0,
                &ManeuverLimits::default(),
                &LaneGeometry::default()
            ),
            Err(NieonError::DegenerateSpeed)
        ));
    }
}
