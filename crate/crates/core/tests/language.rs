mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use cat_core::demo::DEMO_SOURCES;
use cat_core::language::{
    diff_odd_coverage, instantiate, parse_functional, to_source, valuations, InstantiateError,
    InstantiateOptions, OddProfile, ParseError, SamplingMode, Vocabulary,
};
use cat_core::scenario::{
    assign_safety_group, validate_concrete, ActorKind, ActorSpec, FunctionalScenario, Location,
    LogicalScenario, Maneuver, ManeuverSpec, ParamRange, Placement, SalientFactor, Unit,
};

use common::demo;

fn pick<T: Copy + std::fmt::Debug + 'static>(all: &'static [T]) -> impl Strategy<Value = T> {
    proptest::sample::select(all)
}

fn value() -> impl Strategy<Value = ParamRange> {
    prop_oneof![
        (-50.0f64..50.0).prop_map(|v| ParamRange::point(v, Unit::Seconds)),
        (-20.0f64..20.0, 0.0f64..10.0, 0.01f64..5.0).prop_map(|(min, span, step)| ParamRange {
            min,
            max: min + span,
            step,
            unit: Unit::Seconds,
        }),
    ]
}

fn with_unit(mut r: ParamRange, unit: Unit) -> ParamRange {
    r.unit = unit;
    r
}

prop_compose! {
    fn actor()(kind in pick(ActorKind::ALL), m in pick(Maneuver::ALL),
               from in pick(Location::ALL), to in pick(Location::ALL),
               placement in pick(Placement::ALL)) -> ActorSpec {
        ActorSpec { kind, maneuver: ManeuverSpec::new(m, from, to), placement }
    }
}

prop_compose! {
    fn logical()(
        id in "[a-z][a-z0-9_]{0,12}",
        ego in pick(&[Maneuver::GoStraight, Maneuver::TurnLeft, Maneuver::TurnRight]),
        actors in proptest::collection::vec(actor(), 1..3),
        layout in pick(&["straight_two_lane", "roundabout", "all_way_stop", "driveway_segment"]),
        salient in proptest::collection::btree_set(pick(SalientFactor::ALL), 0..3),
        conflict in pick(&["crossing_cyclist", "lead_vehicle_braking", "pull_out_into_lane"]),
        request in proptest::option::of("[a-z0-9_]{1,8}"),
        values in proptest::collection::vec(value(), 12),
        optional in proptest::collection::vec(any::<bool>(), 6),
    ) -> LogicalScenario {
        let mut ranges = BTreeMap::new();
        ranges.insert("ego.speed".to_string(), with_unit(values[0], Unit::MetersPerSecond));
        ranges.insert("stimulus.trigger_ttc".to_string(), with_unit(values[1], Unit::Seconds));
        if optional[0] {
            ranges.insert("stimulus.ramp_up".to_string(), with_unit(values[2], Unit::Seconds));
        }
        for i in 0..actors.len() {
            ranges.insert(format!("actor{i}.speed"), with_unit(values[3 + i], Unit::MetersPerSecond));
            if optional[1 + i] {
                ranges.insert(format!("actor{i}.time_offset"), with_unit(values[6 + i], Unit::Seconds));
            }
            if optional[3 + i] {
                ranges.insert(format!("actor{i}.decel"), with_unit(values[9 + i], Unit::MetersPerSecondSquared));
            }
        }
        LogicalScenario {
            functional: FunctionalScenario {
                id,
                ego_maneuver: ManeuverSpec::new(ego, Location::WithinLane, Location::WithinLane),
                actors,
                layout_class: layout.to_string(),
                salient_factors: salient,
                conflict_type: conflict.to_string(),
                test_request: request,
            },
            parameter_ranges: ranges,
        }
    }
}

proptest! {
    #[test]
    fn canonical_source_round_trips(l in logical()) {
        let text = to_source(&l);
        let parsed = parse_functional(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(parsed.logical, l);
    }

    #[test]
    fn grid_cardinality_is_product(counts in proptest::collection::vec(1usize..6, 1..4),
                                   step in 0.05f64..2.0) {
        let mut ranges = BTreeMap::new();
        for (i, c) in counts.iter().enumerate() {
            ranges.insert(format!("p{i}"), ParamRange {
                min: 1.0,
                max: 1.0 + (*c - 1) as f64 * step,
                step,
                unit: Unit::Seconds,
            });
        }
        ranges.insert("ego.speed".into(), ParamRange::point(8.0, Unit::MetersPerSecond));
        ranges.insert("stimulus.trigger_ttc".into(), ParamRange::point(2.0, Unit::Seconds));
        ranges.insert("actor0.speed".into(), ParamRange::point(1.4, Unit::MetersPerSecond));
        let mut l = parse_functional(DEMO_SOURCES[5].1).unwrap().logical;
        l.parameter_ranges = ranges;
        let v = valuations(&l, SamplingMode::Grid).unwrap();
        prop_assert_eq!(v.len(), counts.iter().product::<usize>());
        let distinct: BTreeSet<String> = v.iter().map(|m| format!("{m:?}")).collect();
        prop_assert_eq!(distinct.len(), v.len());
    }
}

#[test]
fn demo_sources_round_trip() {
    for (file, text) in DEMO_SOURCES {
        let parsed = parse_functional(text).unwrap_or_else(|e| panic!("{file}: {e}"));
        let again = parse_functional(&to_source(&parsed.logical)).unwrap();
        assert_eq!(again.logical, parsed.logical, "{file}");
    }
}

#[test]
fn errors_carry_positions() {
    let src = DEMO_SOURCES[5].1;
    let bad = src.replace("actor pedestrian", "actor unicorn");
    let err = parse_functional(&bad).unwrap_err();
    assert!(
        matches!(
            err,
            ParseError::UnknownToken {
                category: "actor kind",
                ..
            }
        ),
        "{err:?}"
    );
    let line = src
        .lines()
        .position(|l| l.contains("actor pedestrian"))
        .unwrap()
        + 1;
    assert_eq!(err.position().unwrap().line, line);

    let bad = src.replacen('{', "", 1);
    let err = parse_functional(&bad).unwrap_err();
    assert!(matches!(err, ParseError::Syntax { .. }));

    for junk in [
        "",
        "scenario",
        "scenario \"\" { }",
        "scenario \"x\" { ego { } }",
    ] {
        assert!(parse_functional(junk).is_err(), "{junk:?}");
    }
}

#[test]
fn empty_range_is_rejected_before_instantiation() {
    let demo = demo();
    let mut l = parse_functional(DEMO_SOURCES[5].1).unwrap().logical;
    l.parameter_ranges.get_mut("ego.speed").unwrap().min = 20.0;
    let err = instantiate(
        &l,
        &demo.layouts,
        &demo.registry.rules().unwrap(),
        &InstantiateOptions::default(),
    )
    .unwrap_err();
    assert_eq!(
        err,
        InstantiateError::EmptyRange {
            param: "ego.speed".into()
        }
    );
    l.parameter_ranges.remove("ego.speed");
    let err = valuations(&l, SamplingMode::Grid).unwrap_err();
    assert_eq!(
        err,
        InstantiateError::MissingParameter {
            param: "ego.speed".into()
        }
    );
}

#[test]
fn unknown_layout_is_rejected() {
    let demo = demo();
    let mut l = parse_functional(DEMO_SOURCES[5].1).unwrap().logical;
    l.functional.layout_class = "moon_base".into();
    let err = instantiate(
        &l,
        &demo.layouts,
        &demo.registry.rules().unwrap(),
        &InstantiateOptions::default(),
    )
    .unwrap_err();
    assert_eq!(err, InstantiateError::UnknownLayout("moon_base".into()));
}

#[test]
fn instantiated_scenarios_validate_and_partition() {
    let demo = demo();
    let rules = demo.registry.rules().unwrap();
    let ids: BTreeSet<&str> = demo.scenarios.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids.len(), demo.scenarios.len());
    for s in &demo.scenarios {
        let report = validate_concrete(s, &demo.registry);
        assert!(report.is_empty(), "{}: {:?}", s.id, report.violations);
        let g1 = assign_safety_group(s, &rules).unwrap();
        let g2 = assign_safety_group(s, &rules).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1, s.safety_group);
        let matching = demo.registry.iter().filter(|g| g.id == g1).count();
        assert_eq!(matching, 1);
    }
}

#[test]
fn latin_hypercube_samples_validate() {
    let demo = demo();
    let rules = demo.registry.rules().unwrap();
    for (file, text) in DEMO_SOURCES {
        let l = parse_functional(text).unwrap().logical;
        let opts = InstantiateOptions {
            mode: SamplingMode::LatinHypercube {
                samples: 7,
                seed: 3,
            },
            ..InstantiateOptions::default()
        };
        let out = instantiate(&l, &demo.layouts, &rules, &opts).unwrap();
        assert_eq!(out.len(), 7, "{file}");
        for s in &out {
            assert!(validate_concrete(s, &demo.registry).is_empty(), "{}", s.id);
            for (name, v) in &s.parameters {
                let r = l.parameter_ranges[name];
                assert!(*v >= r.min && *v <= r.max, "{name} = {v}");
            }
        }
        let again = instantiate(&l, &demo.layouts, &rules, &opts).unwrap();
        assert_eq!(out, again);
    }
}

#[test]
fn odd_diff_partitions_database() {
    let demo = demo();
    let vocab = Vocabulary::bundled(&demo.layouts);
    let all: BTreeSet<String> = demo.scenarios.iter().map(|s| s.id.clone()).collect();
    for (from, to) in [
        (OddProfile::chd(), OddProfile::sf_phx()),
        (OddProfile::sf_phx(), OddProfile::chd()),
    ] {
        let d = diff_odd_coverage(&from, &to, &demo.scenarios, &vocab, &demo.layouts);
        let carried: BTreeSet<String> = d.carried_over.iter().cloned().collect();
        let excluded: BTreeSet<String> = d.excluded.iter().cloned().collect();
        assert!(carried.is_disjoint(&excluded));
        assert_eq!(&carried | &excluded, all);
    }
    let p = OddProfile::sf_phx();
    let same = diff_odd_coverage(&p, &p, &demo.scenarios, &vocab, &demo.layouts);
    assert!(same.gap_categories.is_empty());
    let chd = OddProfile::chd();
    let d = diff_odd_coverage(&chd, &p, &demo.scenarios, &vocab, &demo.layouts);
    assert!(d.gap_categories.iter().any(|id| id.contains("light_rail")));
    assert!(d.excluded.iter().all(|id| {
        let s = demo.scenarios.iter().find(|s| &s.id == id).unwrap();
        !p.covers_concrete(s)
    }));
}
