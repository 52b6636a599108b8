//! Collision severity: impulse-momentum delta-v, injury-risk curves and the
//! serious-injury thresholds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Vec2};
use crate::scenario::ActorKind;
use crate::sim::Contact;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeverityError {
    #[error("bodies are separating (closing speed {0} m/s)")]
    SeparatingBodies(f64),
    #[error("{0} has no impact-speed risk curve")]
    NotVruClass(ActorKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactConfig {
    pub mass_ego: f64,
    pub mass_partner: f64,
    pub velocity_ego: Vec2,
    pub velocity_partner: Vec2,
    pub restitution: f64,
    /// Unit normal pointing from the ego towards the partner.
    pub contact_normal: Vec2,
    pub heading_ego: f64,
    pub heading_partner: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaV {
    pub dv_ego: f64,
    pub dv_partner: f64,
    /// Direction each body's impulse comes from, in that body's frame (0 = head-on).
    pub pdof_ego: f64,
    pub pdof_partner: f64,
    /// Velocity change vectors in the world frame.
    pub dv_ego_vec: Vec2,
    pub dv_partner_vec: Vec2,
}

/// Central impulse `J = (1 + e) mu (v_rel . n)` with reduced mass `mu`.
pub fn compute_delta_v(impact: &ImpactConfig) -> Result<DeltaV, SeverityError> {
    let n = impact.contact_normal;
    let closing = (impact.velocity_ego - impact.velocity_partner).dot(n);
    if !(closing > 0.0) {
        return Err(SeverityError::SeparatingBodies(closing));
    }
    let (m1, m2) = (impact.mass_ego, impact.mass_partner);
    let mu = m1 * m2 / (m1 + m2);
    let j = (1.0 + impact.restitution) * mu * closing;
    let dv_ego_vec = n * (-j / m1);
    let dv_partner_vec = n * (j / m2);
    Ok(DeltaV {
        dv_ego: j / m1,
        dv_partner: j / m2,
        pdof_ego: wrap_angle(n.angle() - impact.heading_ego),
        pdof_partner: wrap_angle((-n).angle() - impact.heading_partner),
        dv_ego_vec,
        dv_partner_vec,
    })
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticCurve {
    pub intercept: f64,
    pub slope: f64,
}

impl LogisticCurve {
    pub fn eval(&self, x: f64) -> f64 {
        logistic(self.intercept + self.slope * x)
    }
}

/// `logistic(intercept + dv_slope * dv + cos_pdof * cos(pdof) + sin_pdof * sin(pdof))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleRiskCurve {
    pub intercept: f64,
    pub dv_slope: f64,
    pub cos_pdof: f64,
    pub sin_pdof: f64,
}

/// Injury-risk curves. The defaults are illustrative placeholders: monotone and near
/// zero at zero exposure, not fitted to crash data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskCurveParams {
    pub vehicle: VehicleRiskCurve,
    /// Also used for child pedestrians and scooter riders.
    pub pedestrian: LogisticCurve,
    pub cyclist: LogisticCurve,
    pub motorcyclist: LogisticCurve,
}

impl Default for RiskCurveParams {
    fn default() -> Self {
        Self {
            vehicle: VehicleRiskCurve {
                intercept: -7.0,
                dv_slope: 0.45,
                cos_pdof: -0.3,
                sin_pdof: 0.4,
            },
            pedestrian: LogisticCurve {
                intercept: -5.0,
                slope: 0.42,
            },
            cyclist: LogisticCurve {
                intercept: -5.5,
                slope: 0.40,
            },
            motorcyclist: LogisticCurve {
                intercept: -4.5,
                slope: 0.35,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjuryRisk {
    pub p_mais3plus: f64,
}

pub fn p_mais3_vehicle(dv: f64, pdof: f64, params: &RiskCurveParams) -> InjuryRisk {
    let c = &params.vehicle;
    let x = c.intercept + c.dv_slope * dv + c.cos_pdof * pdof.cos() + c.sin_pdof * pdof.sin();
    InjuryRisk {
        p_mais3plus: logistic(x),
    }
}

pub fn p_mais3_vru(
    impact_speed: f64,
    kind: ActorKind,
    params: &RiskCurveParams,
) -> Result<InjuryRisk, SeverityError> {
    let curve = match kind {
        ActorKind::Pedestrian | ActorKind::PedestrianChild | ActorKind::ScooterRider => {
            &params.pedestrian
        }
        ActorKind::Cyclist => &params.cyclist,
        ActorKind::Motorcyclist => &params.motorcyclist,
        ActorKind::PassengerVehicle | ActorKind::HeavyVehicle => {
            return Err(SeverityError::NotVruClass(kind))
        }
    };
    Ok(InjuryRisk {
        p_mais3plus: curve.eval(impact_speed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriousInjuryThresholds {
    pub vehicle_to_vehicle: f64,
    pub child_pedestrian: f64,
    pub other_vru: f64,
}

impl Default for SeriousInjuryThresholds {
    fn default() -> Self {
        Self {
            vehicle_to_vehicle: 0.05,
            child_pedestrian: 0.015,
            other_vru: 0.10,
        }
    }
}

impl SeriousInjuryThresholds {
    pub fn for_kind(&self, kind: ActorKind) -> f64 {
        match kind {
            ActorKind::PassengerVehicle | ActorKind::HeavyVehicle => self.vehicle_to_vehicle,
            ActorKind::PedestrianChild => self.child_pedestrian,
            _ => self.other_vru,
        }
    }

    pub fn is_valid(&self) -> bool {
        let unit = |p: f64| p > 0.0 && p < 1.0;
        unit(self.vehicle_to_vehicle)
            && unit(self.child_pedestrian)
            && unit(self.other_vru)
            && self.child_pedestrian < self.other_vru
    }
}

/// Inclusive comparison against the kind's threshold.
pub fn is_serious_injury(
    risk: InjuryRisk,
    kind: ActorKind,
    thresholds: &SeriousInjuryThresholds,
) -> bool {
    risk.p_mais3plus >= thresholds.for_kind(kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Masses {
    pub ego: f64,
    pub passenger_vehicle: f64,
    pub heavy_vehicle: f64,
}

impl Default for Masses {
    fn default() -> Self {
        Self {
            ego: 2300.0,
            passenger_vehicle: 1800.0,
            heavy_vehicle: 12000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityConfig {
    pub restitution: f64,
    pub masses: Masses,
    pub risk: RiskCurveParams,
    pub thresholds: SeriousInjuryThresholds,
}

impl Default for SeverityConfig {
    fn default() -> Self {
        Self {
            restitution: 0.1,
            masses: Masses::default(),
            risk: RiskCurveParams::default(),
            thresholds: SeriousInjuryThresholds::default(),
        }
    }
}

/// Severity of one simulated outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityOutcome {
    /// p(MAIS3+) per actor; zero for actors not in contact.
    pub per_actor: Vec<f64>,
    pub serious_injury: bool,
    pub delta_v: Option<DeltaV>,
}

impl SeverityOutcome {
    pub fn none(n_actors: usize) -> Self {
        Self {
            per_actor: vec![0.0; n_actors],
            serious_injury: false,
            delta_v: None,
        }
    }

    pub fn max_risk(&self) -> f64 {
        self.per_actor.iter().copied().fold(0.0, f64::max)
    }
}

/// Scores a contact. Vehicle partners use delta-v along the contact normal, falling
/// back to the relative-velocity direction when the normal is not closing; VRU
/// partners use the ego's speed at impact.
pub fn assess_contact(contact: &Contact, n_actors: usize, cfg: &SeverityConfig) -> SeverityOutcome {
    let mut out = SeverityOutcome::none(n_actors);
    let partner = contact.partner_state;
    let kind = partner.kind;
    let risk = match kind {
        ActorKind::PassengerVehicle | ActorKind::HeavyVehicle => {
            let mass_partner = if kind == ActorKind::HeavyVehicle {
                cfg.masses.heavy_vehicle
            } else {
                cfg.masses.passenger_vehicle
            };
            let v_e = contact.ego_state.velocity();
            let v_p = partner.velocity();
            let mut impact = ImpactConfig {
                mass_ego: cfg.masses.ego,
                mass_partner,
                velocity_ego: v_e,
                velocity_partner: v_p,
                restitution: cfg.restitution,
                contact_normal: contact.normal,
                heading_ego: contact.ego_state.heading,
                heading_partner: partner.heading,
            };
            let dv = compute_delta_v(&impact).or_else(|_| {
                impact.contact_normal = (v_e - v_p).normalized();
                compute_delta_v(&impact)
            });
            match dv {
                Ok(dv) => {
                    out.delta_v = Some(dv);
                    p_mais3_vehicle(dv.dv_ego, dv.pdof_ego, &cfg.risk)
                }
                Err(_) => InjuryRisk { p_mais3plus: 0.0 },
            }
        }
        _ => p_mais3_vru(contact.ego_state.speed, kind, &cfg.risk)
            .unwrap_or(InjuryRisk { p_mais3plus: 0.0 }),
    };
    out.per_actor[contact.partner] = risk.p_mais3plus;
    out.serious_injury = is_serious_injury(risk, kind, &cfg.thresholds);
    out
}
