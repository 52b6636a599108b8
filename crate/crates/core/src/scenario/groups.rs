use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ActorKind, ConcreteScenario, PartnerClass, RoadUserGroup};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyGroup {
    pub id: String,
    pub conflict_type: String,
    pub conflict_partner: PartnerClass,
    pub road_user_group: RoadUserGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("no safety-group rule for conflict type `{conflict_type}` with partner {partner:?}")]
    UnmappedConflict {
        conflict_type: String,
        partner: Option<ActorKind>,
    },
    #[error("duplicate safety group id `{0}`")]
    DuplicateId(String),
    #[error("conflict type `{0}` with partner {1:?} maps to more than one group")]
    AmbiguousRule(String, PartnerClass),
}

/// Registered safety groups, keyed by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyGroupRegistry {
    groups: BTreeMap<String, SafetyGroup>,
}

impl SafetyGroupRegistry {
    pub fn new(groups: impl IntoIterator<Item = SafetyGroup>) -> Result<Self, GroupError> {
        let mut map = BTreeMap::new();
        for g in groups {
            if map.contains_key(&g.id) {
                return Err(GroupError::DuplicateId(g.id));
            }
            map.insert(g.id.clone(), g);
        }
        Ok(Self { groups: map })
    }

    /// The bundled taxonomy. Motorcyclist groups score under `motorcyclist_group`.
    pub fn bundled(motorcyclist_group: RoadUserGroup) -> Self {
        use PartnerClass::*;
        let g = |id: &str, conflict: &str, partner: PartnerClass, rug: RoadUserGroup| SafetyGroup {
            id: id.into(),
            conflict_type: conflict.into(),
            conflict_partner: partner,
            road_user_group: rug,
        };
        let v = RoadUserGroup::Vehicle;
        let vru = RoadUserGroup::Vru;
        let m = motorcyclist_group;
        Self::new([
            g(
                "veh_cut_across_perp",
                "cutting_across_perpendicular",
                Vehicle,
                v,
            ),
            g(
                "veh_left_turn_opposite",
                "left_turn_across_opposite",
                Vehicle,
                v,
            ),
            g("veh_lead_braking", "lead_vehicle_braking", Vehicle, v),
            g("veh_cut_in", "cut_in_same_direction", Vehicle, v),
            g("veh_pull_out", "pull_out_into_lane", Vehicle, v),
            g("veh_head_on", "wrong_way_head_on", Vehicle, v),
            g(
                "moto_cut_across_perp",
                "cutting_across_perpendicular",
                Motorcyclist,
                m,
            ),
            g(
                "moto_left_turn_opposite",
                "left_turn_across_opposite",
                Motorcyclist,
                m,
            ),
            g("moto_lead_braking", "lead_vehicle_braking", Motorcyclist, m),
            g(
                "ped_crossing_midblock",
                "crossing_pedestrian_midblock",
                Pedestrian,
                vru,
            ),
            g(
                "ped_crossing_intersection",
                "crossing_pedestrian_intersection",
                Pedestrian,
                vru,
            ),
            g("cyc_crossing", "crossing_cyclist", Cyclist, vru),
            g(
                "cyc_cut_across_perp",
                "cutting_across_perpendicular",
                Cyclist,
                vru,
            ),
        ])
        .expect("bundled taxonomy has unique ids")
    }

    pub fn get(&self, id: &str) -> Option<&SafetyGroup> {
        self.groups.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.groups.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SafetyGroup> {
        self.groups.values()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Rule table derived from each group's (conflict type, partner class).
    pub fn rules(&self) -> Result<GroupRules, GroupError> {
        GroupRules::new(self.groups.values().map(|g| GroupRule {
            conflict_type: g.conflict_type.clone(),
            partner: g.conflict_partner,
            group_id: g.id.clone(),
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRule {
    pub conflict_type: String,
    pub partner: PartnerClass,
    pub group_id: String,
}

/// Mapping from (conflict type, partner class) to safety group id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupRules {
    table: BTreeMap<(String, PartnerClass), String>,
}

impl GroupRules {
    pub fn new(rules: impl IntoIterator<Item = GroupRule>) -> Result<Self, GroupError> {
        let mut table = BTreeMap::new();
        for r in rules {
            let key = (r.conflict_type, r.partner);
            if table.contains_key(&key) {
                return Err(GroupError::AmbiguousRule(key.0, key.1));
            }
            table.insert(key, r.group_id);
        }
        Ok(Self { table })
    }

    pub fn lookup(&self, conflict_type: &str, partner: ActorKind) -> Result<&str, GroupError> {
        self.table
            .get(&(conflict_type.to_string(), partner.partner_class()))
            .map(String::as_str)
            .ok_or_else(|| GroupError::UnmappedConflict {
                conflict_type: conflict_type.into(),
                partner: Some(partner),
            })
    }
}

/// Resolves the scenario's safety group from its conflict type and first actor.
pub fn assign_safety_group(
    scenario: &ConcreteScenario,
    rules: &GroupRules,
) -> Result<String, GroupError> {
    let partner = scenario
        .conflict_partner()
        .ok_or_else(|| GroupError::UnmappedConflict {
            conflict_type: scenario.conflict_type.clone(),
            partner: None,
        })?;
    rules
        .lookup(&scenario.conflict_type, partner)
        .map(str::to_string)
}
