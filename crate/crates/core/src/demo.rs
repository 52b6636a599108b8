//! The bundled 200-scenario demo suite: eight logical scenarios of 25 grid points each.

use thiserror::Error;

use crate::database::{TestRequest, TestRequestStatus};
use crate::language::{
    instantiate, parse_functional, InstantiateError, InstantiateOptions, ParseError,
};
use crate::layout::LayoutLibrary;
use crate::scenario::{ConcreteScenario, GroupError, SafetyGroupRegistry};

pub const DEMO_SOURCES: [(&str, &str); 8] = [
    (
        "child_midblock.scn",
        include_str!("../../../suites/demo/child_midblock.scn"),
    ),
    (
        "cyclist_crossing.scn",
        include_str!("../../../suites/demo/cyclist_crossing.scn"),
    ),
    (
        "driveway_pull_out.scn",
        include_str!("../../../suites/demo/driveway_pull_out.scn"),
    ),
    (
        "lead_sudden_stop.scn",
        include_str!("../../../suites/demo/lead_sudden_stop.scn"),
    ),
    (
        "left_turn_opposite.scn",
        include_str!("../../../suites/demo/left_turn_opposite.scn"),
    ),
    (
        "ped_midblock.scn",
        include_str!("../../../suites/demo/ped_midblock.scn"),
    ),
    (
        "red_light_runner.scn",
        include_str!("../../../suites/demo/red_light_runner.scn"),
    ),
    (
        "scooter_signalized.scn",
        include_str!("../../../suites/demo/scooter_signalized.scn"),
    ),
];

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("{file}: {source}")]
    Parse { file: String, source: ParseError },
    #[error("{file}: {source}")]
    Instantiate {
        file: String,
        source: InstantiateError,
    },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Parses and instantiates `.scn` sources, returning scenarios sorted by id and
/// one test request per logical scenario.
pub fn build_suite<'a>(
    sources: impl IntoIterator<Item = (&'a str, &'a str)>,
    layouts: &LayoutLibrary,
    registry: &SafetyGroupRegistry,
    author: &str,
    options: &InstantiateOptions,
) -> Result<(Vec<ConcreteScenario>, Vec<TestRequest>), SuiteError> {
    let rules = registry.rules()?;
    let mut scenarios = Vec::new();
    let mut requests = Vec::new();
    for (file, text) in sources {
        let parsed = parse_functional(text).map_err(|source| SuiteError::Parse {
            file: file.to_string(),
            source,
        })?;
        let batch = instantiate(&parsed.logical, layouts, &rules, options).map_err(|source| {
            SuiteError::Instantiate {
                file: file.to_string(),
                source,
            }
        })?;
        if let Some(first) = batch.first() {
            if !requests
                .iter()
                .any(|r: &TestRequest| r.id == first.test_request)
            {
                requests.push(TestRequest {
                    id: first.test_request.clone(),
                    parent_safety_group: first.safety_group.clone(),
                    specification: format!(
                        "{file}: {}",
                        text.lines().next().unwrap_or("").trim_start_matches("# ")
                    ),
                    author: author.to_string(),
                    status: TestRequestStatus::Complete,
                });
            }
        }
        scenarios.extend(batch);
    }
    scenarios.sort_by(|a, b| a.id.cmp(&b.id));
    requests.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((scenarios, requests))
}

pub fn demo_suite(
    layouts: &LayoutLibrary,
    registry: &SafetyGroupRegistry,
) -> Result<(Vec<ConcreteScenario>, Vec<TestRequest>), SuiteError> {
    build_suite(
        DEMO_SOURCES,
        layouts,
        registry,
        "cat-harness demo",
        &InstantiateOptions::default(),
    )
}
