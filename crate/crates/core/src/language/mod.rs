//! The `.scn` scenario language: parsing, canonical serialization, enumeration
//! of functional scenarios, and instantiation into concrete scenarios.

mod enumerate;
mod feasibility;
mod instantiate;
mod lexer;
mod odd;
mod parser;

use std::fmt::Write as _;

use thiserror::Error;

use crate::scenario::{Location, LogicalScenario, Maneuver, ParamRange, Placement};

pub use enumerate::{enumerate_functional, EnumerationOptions, Vocabulary};
pub use feasibility::{is_feasible, realizable, rule_feasible, FeasibilityError, RULE_TABLE};
pub use instantiate::{
    instantiate, valuations, InstantiateError, InstantiateOptions, SamplingMode, LEAD_IN,
    SAMPLE_INTERVAL,
};
pub use odd::{diff_odd_coverage, CoverageDiff, OddProfile};
pub use parser::{parse_functional, ParsedScenario};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct SourcePos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: unknown {category} `{token}`")]
    UnknownToken {
        line: usize,
        col: usize,
        category: &'static str,
        token: String,
    },
}

impl ParseError {
    pub(crate) fn syntax(pos: SourcePos, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }

    pub fn position(&self) -> Option<SourcePos> {
        match self {
            ParseError::Syntax { line, col, .. } | ParseError::UnknownToken { line, col, .. } => {
                Some(SourcePos {
                    line: *line,
                    col: *col,
                })
            }
        }
    }
}

/// Start and end locations implied by an actor maneuver when the source omits them.
pub fn default_locations(maneuver: Maneuver) -> (Location, Location) {
    match maneuver {
        Maneuver::CrossPath => (Location::Curbside, Location::AcrossLane),
        Maneuver::PullOut => (Location::Driveway, Location::WithinLane),
        _ => (Location::WithinLane, Location::WithinLane),
    }
}

/// Placement implied by an actor maneuver when the source omits it.
pub fn default_placement(maneuver: Maneuver) -> Placement {
    match maneuver {
        Maneuver::CrossPath | Maneuver::PullOut | Maneuver::RunRedLight => Placement::FromRight,
        Maneuver::CutIn => Placement::AdjacentLeft,
        Maneuver::TurnLeft | Maneuver::TurnRight => Placement::Opposing,
        Maneuver::GoStraight | Maneuver::SuddenStop | Maneuver::WrongWay => Placement::SameLane,
    }
}

fn write_value(out: &mut String, r: &ParamRange) {
    if r.min == r.max && r.step == 1.0 {
        let _ = write!(out, "{}", r.min);
    } else {
        let _ = write!(out, "range({}, {}, step {})", r.min, r.max, r.step);
    }
}

fn write_params(out: &mut String, logical: &LogicalScenario, prefix: &str, indent: &str) {
    let dotted = format!("{prefix}.");
    for (key, range) in &logical.parameter_ranges {
        if let Some(name) = key.strip_prefix(&dotted) {
            let _ = write!(out, "{indent}{name}: ");
            write_value(out, range);
            out.push('\n');
        }
    }
}

/// Canonical source text for a logical scenario. Parsing the output yields an
/// equal scenario.
pub fn to_source(logical: &LogicalScenario) -> String {
    let f = &logical.functional;
    let mut out = String::new();
    let _ = writeln!(out, "scenario \"{}\" {{", f.id);

    let _ = writeln!(out, "  ego {{");
    let _ = writeln!(out, "    maneuver {}", f.ego_maneuver.maneuver);
    let _ = writeln!(
        out,
        "    from {} to {}",
        f.ego_maneuver.start_location, f.ego_maneuver.end_location
    );
    write_params(&mut out, logical, "ego", "    ");
    let _ = writeln!(out, "  }}");

    for (i, a) in f.actors.iter().enumerate() {
        let _ = writeln!(out, "  actor {} {{", a.kind);
        let _ = writeln!(out, "    maneuver {}", a.maneuver.maneuver);
        let _ = writeln!(
            out,
            "    from {} to {}",
            a.maneuver.start_location, a.maneuver.end_location
        );
        let _ = writeln!(out, "    placement {}", a.placement);
        write_params(&mut out, logical, &format!("actor{i}"), "    ");
        let _ = writeln!(out, "  }}");
    }

    let _ = writeln!(out, "  layout {}", f.layout_class);
    if !f.salient_factors.is_empty() {
        let names: Vec<&str> = f.salient_factors.iter().map(|s| s.token()).collect();
        let _ = writeln!(out, "  salient {{ {} }}", names.join(", "));
    }
    let _ = writeln!(out, "  stimulus {{");
    write_params(&mut out, logical, "stimulus", "    ");
    let _ = writeln!(out, "  }}");
    let _ = writeln!(out, "  group {}", f.conflict_type);
    if let Some(req) = &f.test_request {
        let _ = writeln!(out, "  request \"{req}\"");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ActorKind, SalientFactor};

    const PED: &str = r#"
# pedestrian steps out from behind a parked van
scenario "ped_midblock" {
  ego {
    maneuver go_straight
    speed: range(6, 14, step 2)
  }
  actor pedestrian {
    maneuver cross_path
    speed: 1.4
  }
  layout straight_two_lane
  salient { occlusion }
  stimulus {
    trigger_ttc: range(1.0, 3.0, step 0.5)
    ramp_up: 0.4
  }
  group crossing_pedestrian_midblock
  request "demo"
}
"#;

    #[test]
    fn parses_example() {
        let parsed = parse_functional(PED).unwrap();
        let f = parsed.functional();
        assert_eq!(f.id, "ped_midblock");
        assert_eq!(f.actors[0].kind, ActorKind::Pedestrian);
        assert_eq!(f.actors[0].placement, Placement::FromRight);
        assert_eq!(f.actors[0].maneuver.start_location, Location::Curbside);
        assert!(f.salient_factors.contains(&SalientFactor::Occlusion));
        assert_eq!(f.test_request.as_deref(), Some("demo"));
        let speed = parsed.logical.parameter_ranges["ego.speed"];
        assert_eq!(speed.grid_len(), 5);
        assert_eq!(parsed.positions["ego.speed"], SourcePos { line: 6, col: 5 });
    }

    #[test]
    fn round_trips_canonical_form() {
        let parsed = parse_functional(PED).unwrap();
        let text = to_source(&parsed.logical);
        let again = parse_functional(&text).unwrap();
        assert_eq!(again.logical, parsed.logical);
    }

    #[test]
    fn unknown_maneuver_is_reported_with_position() {
        let src = PED.replace("maneuver cross_path", "maneuver teleport");
        match parse_functional(&src).unwrap_err() {
            ParseError::UnknownToken {
                line,
                category,
                token,
                ..
            } => {
                assert_eq!(line, 9);
                assert_eq!(category, "maneuver");
                assert_eq!(token, "teleport");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_parameter_is_reported() {
        let src = PED.replace("ramp_up: 0.4", "wobble: 0.4");
        let err = parse_functional(&src).unwrap_err();
        assert!(matches!(
            err,
            ParseError::UnknownToken {
                category: "parameter",
                ..
            }
        ));
    }

    #[test]
    fn missing_brace_is_syntax_error() {
        let src = PED.replace("request \"demo\"\n}", "request \"demo\"\n");
        let err = parse_functional(&src).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
        assert!(err.position().is_some());
    }

    #[test]
    fn actor_is_required() {
        let src = r#"scenario "x" { ego { maneuver go_straight } layout a stimulus { } group g }"#;
        assert!(parse_functional(src).is_err());
    }
}
