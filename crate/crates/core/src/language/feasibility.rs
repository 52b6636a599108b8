//! Hand-authored feasibility rules: can an actor maneuver from a placement put the
//! actor on a collision course with the ego maneuver?

use thiserror::Error;

use crate::layout::Layout;
use crate::scenario::{ActorSpec, FunctionalScenario, Maneuver, Placement};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeasibilityError {
    #[error("no feasibility rule for ego {ego} against {actor} from {placement}")]
    UnmappedPair {
        ego: Maneuver,
        actor: Maneuver,
        placement: Placement,
    },
}

/// `(ego maneuver, actor maneuver, actor placement, paths can conflict)`.
pub const RULE_TABLE: &[(Maneuver, Maneuver, Placement, bool)] = {
    use Maneuver::*;
    use Placement::*;
    &[
        (GoStraight, GoStraight, SameLane, true),
        (GoStraight, SuddenStop, SameLane, true),
        (GoStraight, WrongWay, SameLane, true),
        (GoStraight, GoStraight, AdjacentLeft, false),
        (GoStraight, CutIn, AdjacentLeft, true),
        (GoStraight, GoStraight, NonAdjacentLeft, false),
        (GoStraight, CutIn, NonAdjacentLeft, false),
        (GoStraight, GoStraight, Opposing, false),
        (GoStraight, TurnLeft, Opposing, true),
        (GoStraight, TurnRight, Opposing, false),
        (GoStraight, GoStraight, FromRight, true),
        (GoStraight, TurnLeft, FromRight, true),
        (GoStraight, TurnRight, FromRight, true),
        (GoStraight, CrossPath, FromRight, true),
        (GoStraight, PullOut, FromRight, true),
        (GoStraight, RunRedLight, FromRight, true),
        (GoStraight, GoStraight, FromLeft, true),
        (GoStraight, TurnLeft, FromLeft, true),
        (GoStraight, TurnRight, FromLeft, false),
        (GoStraight, CrossPath, FromLeft, true),
        (GoStraight, RunRedLight, FromLeft, true),
        (TurnRight, GoStraight, SameLane, true),
        (TurnRight, SuddenStop, SameLane, true),
        (TurnRight, GoStraight, Opposing, false),
        (TurnRight, TurnLeft, Opposing, true),
        (TurnRight, TurnRight, Opposing, false),
        (TurnRight, GoStraight, FromRight, false),
        (TurnRight, TurnLeft, FromRight, false),
        (TurnRight, TurnRight, FromRight, false),
        (TurnRight, CrossPath, FromRight, true),
        (TurnRight, RunRedLight, FromRight, false),
        (TurnRight, GoStraight, FromLeft, true),
        (TurnRight, TurnLeft, FromLeft, false),
        (TurnRight, TurnRight, FromLeft, false),
        (TurnRight, CrossPath, FromLeft, true),
        (TurnRight, RunRedLight, FromLeft, true),
        (TurnLeft, GoStraight, SameLane, true),
        (TurnLeft, SuddenStop, SameLane, true),
        (TurnLeft, GoStraight, Opposing, true),
        (TurnLeft, TurnLeft, Opposing, false),
        (TurnLeft, TurnRight, Opposing, true),
        (TurnLeft, GoStraight, FromRight, true),
        (TurnLeft, TurnLeft, FromRight, true),
        (TurnLeft, TurnRight, FromRight, false),
        (TurnLeft, CrossPath, FromRight, true),
        (TurnLeft, RunRedLight, FromRight, true),
        (TurnLeft, GoStraight, FromLeft, true),
        (TurnLeft, TurnLeft, FromLeft, true),
        (TurnLeft, TurnRight, FromLeft, false),
        (TurnLeft, CrossPath, FromLeft, true),
        (TurnLeft, RunRedLight, FromLeft, true),
    ]
};

/// Looks up the rule for one actor against the ego maneuver.
pub fn rule_feasible(ego: Maneuver, actor: &ActorSpec) -> Result<bool, FeasibilityError> {
    RULE_TABLE
        .iter()
        .find(|(e, a, p, _)| *e == ego && *a == actor.maneuver.maneuver && *p == actor.placement)
        .map(|r| r.3)
        .ok_or(FeasibilityError::UnmappedPair {
            ego,
            actor: actor.maneuver.maneuver,
            placement: actor.placement,
        })
}

/// Feasibility of a functional scenario, judged on its first actor. Pairs without a
/// rule are kept (and logged) so that coverage is never silently dropped.
pub fn is_feasible(scenario: &FunctionalScenario) -> bool {
    let Some(actor) = scenario.actors.first() else {
        return false;
    };
    match rule_feasible(scenario.ego_maneuver.maneuver, actor) {
        Ok(f) => f,
        Err(e) => {
            log::warn!("{}: {e}; treating as feasible", scenario.id);
            true
        }
    }
}

/// Whether the layout provides path templates for both the ego and the actor.
pub fn realizable(layout: &Layout, ego: Maneuver, actor: &ActorSpec) -> bool {
    layout.ego_route(ego).is_some()
        && layout
            .actor_route(actor.maneuver.maneuver, actor.placement)
            .is_some()
}
