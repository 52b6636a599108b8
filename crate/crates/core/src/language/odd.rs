//! Operational design domain profiles and coverage diffs between two of them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::enumerate::{enumerate_functional, EnumerationOptions, Vocabulary};
use crate::layout::LayoutLibrary;
use crate::scenario::{ConcreteScenario, FunctionalScenario, Maneuver, SalientFactor};

const MPH: f64 = 0.44704;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddProfile {
    pub name: String,
    pub allowed_layouts: BTreeSet<String>,
    /// Ego maneuvers the domain rules out: `maneuver` (everywhere) or `maneuver@layout`.
    #[serde(default)]
    pub excluded_maneuvers: Vec<String>,
    /// Salient factors that occur in this domain.
    pub salient_factors: BTreeSet<SalientFactor>,
    /// Highest posted speed limit, m/s.
    pub max_speed_limit: f64,
}

impl OddProfile {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Suburban domain: arterials up to 45 mph with roundabouts, no light rail.
    pub fn chd() -> Self {
        Self {
            name: "chd".into(),
            allowed_layouts: [
                "straight_two_lane",
                "multi_lane_arterial",
                "driveway_segment",
                "signalized_intersection",
                "unprotected_intersection",
                "all_way_stop",
                "roundabout",
            ]
            .map(String::from)
            .into(),
            excluded_maneuvers: vec![],
            salient_factors: [
                SalientFactor::Occlusion,
                SalientFactor::LowSunAngle,
                SalientFactor::DoubleParkedVehicle,
                SalientFactor::NightLighting,
            ]
            .into(),
            max_speed_limit: 45.0 * MPH,
        }
    }

    /// Dense urban domain: streets up to 30 mph with light rail, no roundabouts.
    pub fn sf_phx() -> Self {
        Self {
            name: "sf_phx".into(),
            allowed_layouts: [
                "straight_two_lane",
                "multi_lane_arterial",
                "driveway_segment",
                "light_rail_crossing",
                "signalized_intersection",
                "unprotected_intersection",
                "all_way_stop",
            ]
            .map(String::from)
            .into(),
            excluded_maneuvers: vec![],
            salient_factors: SalientFactor::ALL.iter().copied().collect(),
            max_speed_limit: 30.0 * MPH,
        }
    }

    fn maneuver_excluded(&self, maneuver: Maneuver, layout: &str) -> bool {
        self.excluded_maneuvers
            .iter()
            .any(|entry| match entry.split_once('@') {
                Some((m, l)) => m == maneuver.token() && l == layout,
                None => entry == maneuver.token(),
            })
    }

    fn salient_present(&self, factors: &BTreeSet<SalientFactor>) -> bool {
        factors.is_subset(&self.salient_factors)
    }

    /// True when the domain rules out this functional scenario.
    pub fn excludes_functional(&self, s: &FunctionalScenario) -> bool {
        !self.allowed_layouts.contains(&s.layout_class)
            || self.maneuver_excluded(s.ego_maneuver.maneuver, &s.layout_class)
            || !self.salient_present(&s.salient_factors)
    }

    /// True when a concrete scenario lies inside this domain.
    pub fn covers_concrete(&self, s: &ConcreteScenario) -> bool {
        self.allowed_layouts.contains(&s.layout_class)
            && !self.maneuver_excluded(s.ego_maneuver, &s.layout_class)
            && self.salient_present(&s.salient_factors)
            && s.ego_start.speed <= self.max_speed_limit + 1e-9
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageDiff {
    /// Database scenarios that remain inside the new domain.
    pub carried_over: Vec<String>,
    /// Database scenarios outside the new domain.
    pub excluded: Vec<String>,
    /// Feasible functional categories new to the target domain that no database
    /// scenario covers.
    pub gap_categories: Vec<String>,
}

fn covers(c: &ConcreteScenario, f: &FunctionalScenario) -> bool {
    c.ego_maneuver == f.ego_maneuver.maneuver
        && c.layout_class == f.layout_class
        && c.salient_factors == f.salient_factors
        && c.conflict_partner() == f.actors.first().map(|a| a.kind)
}

/// Splits a database by whether each scenario transfers from `from` to `to`, and lists
/// categories the new domain introduces without coverage.
pub fn diff_odd_coverage(
    from: &OddProfile,
    to: &OddProfile,
    database: &[ConcreteScenario],
    vocab: &Vocabulary,
    layouts: &LayoutLibrary,
) -> CoverageDiff {
    let mut diff = CoverageDiff::default();
    for s in database {
        if to.covers_concrete(s) {
            diff.carried_over.push(s.id.clone());
        } else {
            diff.excluded.push(s.id.clone());
        }
    }
    diff.carried_over.sort();
    diff.excluded.sort();

    let opts = EnumerationOptions {
        feasible_only: true,
        ..EnumerationOptions::default()
    };
    let old: BTreeSet<String> = enumerate_functional(vocab, Some(from), layouts, &opts)
        .into_iter()
        .map(|f| f.id)
        .collect();
    diff.gap_categories = enumerate_functional(vocab, Some(to), layouts, &opts)
        .into_iter()
        .filter(|f| !old.contains(&f.id))
        .filter(|f| !database.iter().any(|c| covers(c, f)))
        .map(|f| f.id)
        .collect();
    diff
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speed_limits_in_metres_per_second() {
        assert!((OddProfile::chd().max_speed_limit - 20.1168).abs() < 1e-9);
        assert!((OddProfile::sf_phx().max_speed_limit - 13.4112).abs() < 1e-9);
    }

    #[test]
    fn maneuver_exclusions() {
        let mut p = OddProfile::chd();
        p.excluded_maneuvers = vec!["turn_left@roundabout".into(), "wrong_way".into()];
        assert!(p.maneuver_excluded(Maneuver::TurnLeft, "roundabout"));
        assert!(!p.maneuver_excluded(Maneuver::TurnLeft, "all_way_stop"));
        assert!(p.maneuver_excluded(Maneuver::WrongWay, "straight_two_lane"));
    }

    #[test]
    fn toml_round_trip() {
        let p = OddProfile::sf_phx();
        let text = toml::to_string(&p).unwrap();
        assert_eq!(OddProfile::from_toml(&text).unwrap(), p);
    }
}
