use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ConcreteScenario, Footprint, SafetyGroupRegistry};

const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: String,
    pub path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, invariant: &str) -> bool {
        self.violations.iter().any(|v| v.invariant == invariant)
    }

    pub(crate) fn push(&mut self, invariant: &str, path: impl Into<String>) {
        self.violations.push(Violation {
            invariant: invariant.into(),
            path: path.into(),
        });
    }
}

impl Footprint {
    /// Tightest turn the footprint can make, as a curvature bound.
    pub fn max_curvature(&self) -> f64 {
        1.0 / (1.1 * self.length)
    }

    fn is_valid(&self) -> bool {
        self.length.is_finite() && self.width.is_finite() && self.length > 0.0 && self.width > 0.0
    }
}

fn heading_in_range(h: f64) -> bool {
    h.is_finite() && (-PI..PI).contains(&h)
}

/// Checks every structural invariant of a concrete scenario. Violations are data.
pub fn validate_concrete(
    scenario: &ConcreteScenario,
    registry: &SafetyGroupRegistry,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let s = scenario;

    if s.id.trim().is_empty() {
        report.push("empty token", "id");
    }
    if s.test_request.trim().is_empty() {
        report.push("empty token", "test_request");
    }
    if !(s.duration.is_finite() && s.duration > 0.0) {
        report.push("positive duration", "duration");
    }

    let ego = &s.ego_start;
    if ![ego.x, ego.y, ego.speed, ego.accel, ego.curvature]
        .iter()
        .all(|v| v.is_finite())
    {
        report.push("non-finite value", "ego_start");
    }
    if ego.speed < 0.0 {
        report.push("negative speed", "ego_start.speed");
    }
    if !heading_in_range(ego.heading) {
        report.push("heading range", "ego_start.heading");
    }
    if !s.ego_footprint.is_valid() {
        report.push("positive footprint", "ego_footprint");
    } else if ego.curvature.abs() > s.ego_footprint.max_curvature() {
        report.push("curvature limit", "ego_start.curvature");
    }
    if !(s.lane.left_room >= 0.0 && s.lane.right_room >= 0.0) {
        report.push("non-negative lateral room", "lane");
    }

    if s.actor_trajectories.is_empty() {
        report.push("at least one actor", "actor_trajectories");
    }
    if s.footprints.len() != s.actor_trajectories.len() {
        report.push("footprint count", "footprints");
    }
    for (i, fp) in s.footprints.iter().enumerate() {
        if !fp.is_valid() {
            report.push("positive footprint", format!("footprints[{i}]"));
        }
    }

    for (i, traj) in s.actor_trajectories.iter().enumerate() {
        let base = format!("actor_trajectories[{i}].samples");
        if traj.samples.is_empty() {
            report.push("trajectory coverage", base);
            continue;
        }
        for (j, p) in traj.samples.iter().enumerate() {
            if ![p.t, p.x, p.y, p.speed].iter().all(|v| v.is_finite()) {
                report.push("non-finite value", format!("{base}[{j}]"));
            }
            if p.speed < 0.0 {
                report.push("negative speed", format!("{base}[{j}].speed"));
            }
            if !heading_in_range(p.heading) {
                report.push("heading range", format!("{base}[{j}].heading"));
            }
            if j > 0 && p.t <= traj.samples[j - 1].t {
                report.push("non-monotone time", format!("{base}[{j}].t"));
            }
        }
        let first = traj.samples[0].t;
        let last = traj.samples[traj.samples.len() - 1].t;
        if first > TIME_TOL || last < s.duration - TIME_TOL {
            report.push("trajectory coverage", base);
        }
    }

    let st = &s.stimulus;
    if !(st.onset_time.is_finite() && st.end_time.is_finite()) || st.onset_time < 0.0 {
        report.push("stimulus within duration", "stimulus.onset_time");
    }
    if st.end_time < st.onset_time {
        report.push("stimulus ordering", "stimulus.end_time");
    }
    if st.end_time > s.duration + TIME_TOL || st.onset_time > s.duration + TIME_TOL {
        report.push("stimulus within duration", "stimulus.end_time");
    }

    if !registry.contains(&s.safety_group) {
        report.push("unregistered safety group", "safety_group");
    }
    report
}
