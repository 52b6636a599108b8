mod common;

use cat_core::config::{ConfigError, HarnessConfig};
use cat_core::database::{Database, DatabaseError, TEST_REQUESTS_FILE};
use cat_core::demo::demo_suite;
use cat_core::evaluation::{run_evaluation, EvaluationError};
use cat_core::policies::builtin_policy;
use cat_core::report::{
    emit_report, load_json, render_csv, render_json, render_svg, ReportFormat, CSV_FILE, JSON_FILE,
    SVG_FILE,
};

use common::demo;

fn demo_db() -> (tempfile::TempDir, Database) {
    let demo = demo();
    let dir = tempfile::tempdir().unwrap();
    let (scenarios, requests) = demo_suite(&demo.layouts, &demo.registry).unwrap();
    Database::write(dir.path(), &scenarios, &requests).unwrap();
    let db = Database::load(dir.path()).unwrap();
    (dir, db)
}

#[test]
fn database_round_trips_and_hashes_content() {
    let demo = demo();
    let (dir, db) = demo_db();
    assert_eq!(db.scenarios, demo.scenarios);
    assert_eq!(db.test_requests.len(), 8);
    assert!(db.validate(&demo.registry).is_empty());
    assert_eq!(db.content_hash.len(), 64);

    let again = Database::load(dir.path()).unwrap();
    assert_eq!(again.content_hash, db.content_hash);

    let other = tempfile::tempdir().unwrap();
    Database::write(other.path(), &db.scenarios, &db.test_requests).unwrap();
    assert_eq!(
        Database::load(other.path()).unwrap().content_hash,
        db.content_hash
    );

    let s = &db.scenarios[0];
    let path = dir
        .path()
        .join(&s.safety_group)
        .join(format!("{}.json", s.id));
    let mut edited = s.clone();
    edited.duration += 1.0;
    std::fs::write(&path, serde_json::to_string_pretty(&edited).unwrap()).unwrap();
    assert_ne!(
        Database::load(dir.path()).unwrap().content_hash,
        db.content_hash
    );
}

#[test]
fn database_validation_reports_problems() {
    let demo = demo();
    let empty = tempfile::tempdir().unwrap();
    let db = Database::load(empty.path()).unwrap();
    let problems = db.validate(&demo.registry);
    assert!(problems[""].has("non-empty database"));

    let (dir, db) = demo_db();
    let mut orphan = db.scenarios[0].clone();
    orphan.id = "orphan".into();
    orphan.test_request = "nobody_asked".into();
    let mut dup = db.scenarios[1].clone();
    dup.safety_group = "veh_pull_out".into();
    Database::write(dir.path(), &[orphan], &[]).unwrap();
    Database::write(&dir.path().join("copies"), &[dup.clone()], &[]).unwrap();
    let db = Database::load(dir.path()).unwrap();
    let problems = db.validate(&demo.registry);
    assert!(problems["orphan"].has("known test request"));
    assert!(problems[&dup.id].has("unique scenario id"));

    std::fs::write(dir.path().join(TEST_REQUESTS_FILE), "not json").unwrap();
    assert!(matches!(
        Database::load(dir.path()),
        Err(DatabaseError::Json { .. })
    ));
    assert!(matches!(
        Database::load(&dir.path().join("absent")),
        Err(DatabaseError::Io { .. })
    ));
}

#[test]
fn reports_are_deterministic_and_self_describing() {
    let demo = demo();
    let policy = builtin_policy("aeb", demo.config.aeb).unwrap();
    let run = || {
        run_evaluation(
            &demo.config,
            &demo.scenarios,
            "abc123",
            &demo.registry,
            policy.as_ref(),
        )
        .unwrap()
        .0
    };
    let (a, b) = (run(), run());
    assert_eq!(render_csv(&a), render_csv(&b));
    assert_eq!(render_json(&a), render_json(&b));
    assert_eq!(render_svg(&a), render_svg(&b));

    let csv = render_csv(&a);
    assert!(csv.contains("# database_sha256: abc123"));
    assert!(csv.contains("# policy: aeb"));
    for line in demo.config.to_toml().lines().filter(|l| !l.is_empty()) {
        assert!(
            csv.contains(&format!("#   {line}")),
            "config line {line:?} missing"
        );
    }
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("group_id,road_user_group,n,"));
    assert!(rows[rows.len() - 2].starts_with("road_user:Vehicle,"));
    assert!(rows[rows.len() - 1].starts_with("road_user:VRU,"));
    assert_eq!(rows.len(), 1 + a.scores.groups.len() + 2);

    assert!(render_svg(&a).contains("database_sha256: abc123"));
    let restored = load_json(&render_json(&a)).unwrap();
    assert_eq!(restored, a);
}

#[test]
fn emit_writes_each_requested_format_once() {
    let demo = demo();
    let policy = builtin_policy("no_reaction", demo.config.aeb).unwrap();
    let (report, timing) = run_evaluation(
        &demo.config,
        &demo.scenarios[..20],
        "h",
        &demo.registry,
        policy.as_ref(),
    )
    .unwrap();
    assert_eq!(timing.scenario_count, 20);
    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(
        &report,
        &[
            ReportFormat::Svg,
            ReportFormat::Csv,
            ReportFormat::Json,
            ReportFormat::Csv,
        ],
        dir.path(),
    )
    .unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec![CSV_FILE, JSON_FILE, SVG_FILE]);

    let none = tempfile::tempdir().unwrap();
    let target = none.path().join("out");
    assert!(emit_report(&report, &[], &target).unwrap().is_empty());
    assert!(!target.exists());
    assert_eq!("svg".parse::<ReportFormat>().unwrap(), ReportFormat::Svg);
    assert!("pdf".parse::<ReportFormat>().is_err());
}

#[test]
fn unregistered_groups_stop_the_run() {
    let demo = demo();
    let mut s = demo.scenarios[0].clone();
    s.safety_group = "made_up".into();
    let policy = builtin_policy("aeb", demo.config.aeb).unwrap();
    let err = run_evaluation(&demo.config, &[s], "h", &demo.registry, policy.as_ref()).unwrap_err();
    assert!(matches!(err, EvaluationError::UnknownGroup { .. }));
}

#[test]
fn config_files_load_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("harness.toml");
    let mut cfg = HarnessConfig::default();
    cfg.run.seed = 99;
    cfg.ztest.deltas = vec![-0.1, 0.3];
    std::fs::write(&path, cfg.to_toml()).unwrap();
    assert_eq!(HarnessConfig::load(&path).unwrap(), cfg);
    assert!(matches!(
        HarnessConfig::load(&dir.path().join("nope.toml")),
        Err(ConfigError::Io { .. })
    ));
    for bad in [
        "[sim]\nstep = 0.2\n",
        "[ztest]\nalpha = 1.5\n",
        "[severity.thresholds]\nvehicle_to_vehicle = 0.0\nchild_pedestrian = 0.015\nother_vru = 0.1\n",
        "[nieon.vehicle]\nintercept = 0.0\nslope = 0.6\nfloor = 0.25\n",
    ] {
        assert!(matches!(HarnessConfig::from_toml(bad), Err(ConfigError::Invalid(_))), "{bad}");
    }
}
