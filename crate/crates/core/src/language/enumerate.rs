use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::default_locations;
use super::feasibility::{is_feasible, realizable, RULE_TABLE};
use super::odd::OddProfile;
use crate::layout::{LayoutLibrary, Topology};
use crate::scenario::{
    ActorKind, ActorSpec, FunctionalScenario, Location, Maneuver, ManeuverSpec, Placement,
    SalientFactor,
};

/// The closed vocabularies that enumeration ranges over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub ego_maneuvers: Vec<Maneuver>,
    pub actor_kinds: Vec<ActorKind>,
    /// Actor maneuver with the placement it starts from.
    pub actor_behaviors: Vec<(Maneuver, Placement)>,
    pub layouts: Vec<String>,
    pub salient_factors: Vec<SalientFactor>,
}

impl Vocabulary {
    /// Every vocabulary entry, with actor behaviors taken from the feasibility rules.
    pub fn bundled(layouts: &LayoutLibrary) -> Self {
        let behaviors: BTreeSet<(Maneuver, Placement)> =
            RULE_TABLE.iter().map(|(_, m, p, _)| (*m, *p)).collect();
        Self {
            ego_maneuvers: vec![
                Maneuver::GoStraight,
                Maneuver::TurnLeft,
                Maneuver::TurnRight,
            ],
            actor_kinds: ActorKind::ALL.to_vec(),
            actor_behaviors: behaviors.into_iter().collect(),
            layouts: layouts.classes().map(str::to_string).collect(),
            salient_factors: SalientFactor::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnumerationOptions {
    pub max_salient: usize,
    /// Keep only combinations the rules deem feasible and the layout can realize.
    pub feasible_only: bool,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            max_salient: 2,
            feasible_only: false,
        }
    }
}

fn salient_subsets(factors: &[SalientFactor], max: usize) -> Vec<BTreeSet<SalientFactor>> {
    let mut uniq: Vec<SalientFactor> = factors.to_vec();
    uniq.sort();
    uniq.dedup();
    let mut out = vec![BTreeSet::new()];
    let mut frontier = vec![(BTreeSet::new(), 0usize)];
    for _ in 0..max {
        let mut next = Vec::new();
        for (set, from) in &frontier {
            for (i, f) in uniq.iter().enumerate().skip(*from) {
                let mut s: BTreeSet<SalientFactor> = set.clone();
                s.insert(*f);
                out.push(s.clone());
                next.push((s, i + 1));
            }
        }
        frontier = next;
    }
    out
}

/// Conflict type implied by an ego maneuver, actor and layout.
pub(crate) fn conflict_type_for(
    ego: Maneuver,
    actor: &ActorSpec,
    layouts: &LayoutLibrary,
    layout: &str,
) -> &'static str {
    use Maneuver as M;
    let at_intersection = matches!(
        layouts.get(layout).map(|l| l.topology),
        Some(Topology::Intersection { .. })
    );
    match actor.maneuver.maneuver {
        M::CrossPath if actor.kind == ActorKind::Cyclist => "crossing_cyclist",
        M::CrossPath if at_intersection => "crossing_pedestrian_intersection",
        M::CrossPath => "crossing_pedestrian_midblock",
        M::SuddenStop => "lead_vehicle_braking",
        M::CutIn => "cut_in_same_direction",
        M::PullOut => "pull_out_into_lane",
        M::WrongWay => "wrong_way_head_on",
        M::GoStraight if actor.placement == Placement::SameLane => "lead_vehicle_braking",
        M::TurnLeft if actor.placement == Placement::Opposing => "left_turn_across_opposite",
        M::GoStraight if actor.placement == Placement::Opposing && ego == M::TurnLeft => {
            "left_turn_across_opposite"
        }
        _ => "cutting_across_perpendicular",
    }
}

fn functional_id(
    ego: Maneuver,
    actor: &ActorSpec,
    layout: &str,
    salient: &BTreeSet<SalientFactor>,
) -> String {
    let salient = if salient.is_empty() {
        "none".to_string()
    } else {
        salient
            .iter()
            .map(|s| s.token())
            .collect::<Vec<_>>()
            .join("+")
    };
    format!(
        "{ego}-{}-{}-{}-{layout}-{salient}",
        actor.kind, actor.maneuver.maneuver, actor.placement
    )
}

/// Every single-actor functional scenario in the cartesian product of the
/// vocabularies, minus combinations the ODD excludes. Output is sorted by id and
/// free of duplicates.
pub fn enumerate_functional(
    vocab: &Vocabulary,
    odd: Option<&OddProfile>,
    layouts: &LayoutLibrary,
    options: &EnumerationOptions,
) -> Vec<FunctionalScenario> {
    let salient = salient_subsets(&vocab.salient_factors, options.max_salient);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for &ego in &vocab.ego_maneuvers {
        for &kind in &vocab.actor_kinds {
            for &(maneuver, placement) in &vocab.actor_behaviors {
                let (start, end) = default_locations(maneuver);
                let actor = ActorSpec {
                    kind,
                    maneuver: ManeuverSpec::new(maneuver, start, end),
                    placement,
                };
                for layout in &vocab.layouts {
                    for factors in &salient {
                        let id = functional_id(ego, &actor, layout, factors);
                        if seen.contains(&id) {
                            continue;
                        }
                        let scenario = FunctionalScenario {
                            id: id.clone(),
                            ego_maneuver: ManeuverSpec::new(
                                ego,
                                Location::WithinLane,
                                Location::WithinLane,
                            ),
                            actors: vec![actor],
                            layout_class: layout.clone(),
                            salient_factors: factors.clone(),
                            conflict_type: conflict_type_for(ego, &actor, layouts, layout)
                                .to_string(),
                            test_request: None,
                        };
                        if odd.is_some_and(|o| o.excludes_functional(&scenario)) {
                            continue;
                        }
                        if options.feasible_only {
                            let hosted = layouts
                                .get(layout)
                                .is_some_and(|l| realizable(l, ego, &actor));
                            if !hosted || !is_feasible(&scenario) {
                                continue;
                            }
                        }
                        seen.insert(id);
                        out.push(scenario);
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::default_placement;

    #[test]
    fn subsets_up_to_two() {
        let s = salient_subsets(SalientFactor::ALL, 2);
        let n = SalientFactor::ALL.len();
        assert_eq!(s.len(), 1 + n + n * (n - 1) / 2);
        let uniq: BTreeSet<_> = s.iter().cloned().collect();
        assert_eq!(uniq.len(), s.len());
    }

    #[test]
    fn bundled_behaviors_include_defaults() {
        let v = Vocabulary::bundled(&LayoutLibrary::bundled());
        for m in Maneuver::ALL {
            assert!(
                v.actor_behaviors.contains(&(*m, default_placement(*m))),
                "{m}"
            );
        }
    }
}
