//! Built-in ego policies.

use serde::{Deserialize, Serialize};

use crate::geometry::{rect_overlap, wrap_angle, OrientedRect, Vec2};
use crate::nieon::{plan_brake, BrakeSchedule, ManeuverLimits, NieonEvaluation};
use crate::scenario::{ConcreteScenario, VehicleState};
use crate::sim::{ActorState, ControlCommand, EgoPolicy, LatencyConfig, ObservedWorld};

/// What a factory may use when building a policy for one scenario.
pub struct PolicyContext<'a> {
    pub scenario: &'a ConcreteScenario,
    pub latency: &'a LatencyConfig,
    pub nieon: &'a NieonEvaluation,
}

pub trait PolicyFactory: Sync {
    fn name(&self) -> &str;
    fn build(&self, ctx: &PolicyContext<'_>) -> Box<dyn EgoPolicy>;
}

/// Route curvature where the ego will be when a command issued now takes effect.
fn route_curvature(world: &ObservedWorld<'_>, preview: f64) -> f64 {
    let age = world.time - world.observed_time;
    world
        .route
        .curvature_at(world.ego_odometer + world.ego.speed * (age + preview))
}

/// Holds speed and follows the route; never reacts.
pub struct NoReaction {
    preview: f64,
}

impl EgoPolicy for NoReaction {
    fn step(&mut self, world: &ObservedWorld<'_>) -> ControlCommand {
        ControlCommand {
            longitudinal_accel: 0.0,
            curvature: route_curvature(world, self.preview),
        }
    }
}

pub struct NoReactionFactory;

impl PolicyFactory for NoReactionFactory {
    fn name(&self) -> &str {
        "no_reaction"
    }

    fn build(&self, ctx: &PolicyContext<'_>) -> Box<dyn EgoPolicy> {
        Box::new(NoReaction {
            preview: ctx.latency.actuation_delay,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AebConfig {
    /// Brake once a predicted collision is at most this far ahead, s.
    pub ttc_threshold: f64,
    /// Safety margin added around every footprint, m.
    pub margin: f64,
    pub jerk_limit: f64,
    /// Prediction sample spacing, s.
    pub horizon_step: f64,
}

impl Default for AebConfig {
    fn default() -> Self {
        Self {
            ttc_threshold: 4.0,
            margin: 0.3,
            jerk_limit: 30.0,
            horizon_step: 0.05,
        }
    }
}

/// Threshold-triggered emergency braking. Predicts each actor with constant
/// acceleration and turn rate (estimated from consecutive observations) and the ego
/// along its route at constant speed; brakes, latched, when the two footprints are
/// predicted to overlap within the threshold.
pub struct Aeb {
    config: AebConfig,
    preview: f64,
    previous: Option<(f64, Vec<ActorState>)>,
    brake: Option<(f64, BrakeSchedule)>,
}

impl Aeb {
    pub fn new(config: AebConfig, preview: f64) -> Self {
        Self {
            config,
            preview,
            previous: None,
            brake: None,
        }
    }

    fn threat(&self, world: &ObservedWorld<'_>) -> bool {
        let c = &self.config;
        let age = world.time - world.observed_time;
        let horizon = c.ttc_threshold + age;
        let fp = world.ego_footprint;
        let m = 2.0 * c.margin;
        for (i, actor) in world.actors.iter().enumerate() {
            let s = actor.state;
            let (accel, yaw_rate) = match &self.previous {
                Some((t0, prev)) if world.observed_time > *t0 && i < prev.len() => {
                    let dt = world.observed_time - t0;
                    (
                        (s.speed - prev[i].speed) / dt,
                        wrap_angle(s.heading - prev[i].heading) / dt,
                    )
                }
                _ => (0.0, 0.0),
            };
            let mut pos = s.position();
            let mut heading = s.heading;
            let mut speed = s.speed;
            let mut tau = 0.0;
            while tau <= horizon + 1e-9 {
                let ego = world
                    .route
                    .pose_at(world.ego_odometer + world.ego.speed * tau);
                let a = OrientedRect::new(ego.position(), ego.heading, fp.length + m, fp.width + m);
                let b = OrientedRect::new(
                    pos,
                    heading,
                    actor.footprint.length + m,
                    actor.footprint.width + m,
                );
                if rect_overlap(&a, &b).is_some() {
                    return true;
                }
                let dt = c.horizon_step;
                let next_speed = (speed + accel * dt).max(0.0);
                let mid = heading + 0.5 * yaw_rate * dt;
                pos = pos + Vec2::from_angle(mid) * (0.5 * (speed + next_speed) * dt);
                heading += yaw_rate * dt;
                speed = next_speed;
                tau += dt;
            }
        }
        false
    }
}

impl EgoPolicy for Aeb {
    fn step(&mut self, world: &ObservedWorld<'_>) -> ControlCommand {
        let curvature = route_curvature(world, self.preview);
        if self.brake.is_none() && self.threat(world) {
            let limits = ManeuverLimits {
                max_decel: world.limits.max_brake,
                jerk_limit: self.config.jerk_limit,
                ..ManeuverLimits::default()
            };
            let start = VehicleState {
                accel: 0.0,
                ..world.ego
            };
            self.brake = Some((world.time, plan_brake(&start, &limits)));
        }
        let is_new = self
            .previous
            .as_ref()
            .is_none_or(|(t, _)| world.observed_time > *t);
        if is_new {
            self.previous = Some((
                world.observed_time,
                world.actors.iter().map(|a| a.state).collect(),
            ));
        }
        match &self.brake {
            Some((t0, schedule)) => ControlCommand {
                longitudinal_accel: schedule.mean_accel(world.time - t0, world.step),
                curvature,
            },
            None => ControlCommand {
                longitudinal_accel: 0.0,
                curvature,
            },
        }
    }
}

pub struct AebFactory(pub AebConfig);

impl PolicyFactory for AebFactory {
    fn name(&self) -> &str {
        "aeb"
    }

    fn build(&self, ctx: &PolicyContext<'_>) -> Box<dyn EgoPolicy> {
        Box::new(Aeb::new(self.0, ctx.latency.actuation_delay))
    }
}

/// Replays the reference driver's chosen commands, issued early by the actuation
/// delay so they take effect on the same steps.
pub struct NieonReplay {
    commands: Vec<ControlCommand>,
    lead_steps: usize,
}

impl EgoPolicy for NieonReplay {
    fn step(&mut self, world: &ObservedWorld<'_>) -> ControlCommand {
        let k = (world.time / world.step).round() as usize + self.lead_steps;
        match self.commands.get(k).or(self.commands.last()) {
            Some(c) => *c,
            None => ControlCommand {
                longitudinal_accel: 0.0,
                curvature: world.route.curvature_at(world.ego_odometer),
            },
        }
    }
}

pub struct NieonAsPolicyFactory;

impl PolicyFactory for NieonAsPolicyFactory {
    fn name(&self) -> &str {
        "nieon_as_policy"
    }

    fn build(&self, ctx: &PolicyContext<'_>) -> Box<dyn EgoPolicy> {
        let chosen = ctx.nieon.chosen();
        let lead_steps = (ctx.latency.actuation_delay / chosen.trace.step).round() as usize;
        Box::new(NieonReplay {
            commands: chosen.trace.commands.clone(),
            lead_steps,
        })
    }
}

pub const POLICY_NAMES: [&str; 3] = ["no_reaction", "aeb", "nieon_as_policy"];

/// Looks up a built-in policy by name.
pub fn builtin_policy(name: &str, aeb: AebConfig) -> Option<Box<dyn PolicyFactory>> {
    match name {
        "no_reaction" => Some(Box::new(NoReactionFactory)),
        "aeb" => Some(Box::new(AebFactory(aeb))),
        "nieon_as_policy" => Some(Box::new(NieonAsPolicyFactory)),
        _ => None,
    }
}
