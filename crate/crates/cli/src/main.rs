//! `cat-harness`: generate scenario databases, evaluate ego policies against the
//! NIEON reference driver, and write reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use cat_core::config::HarnessConfig;
use cat_core::database::Database;
use cat_core::demo::{build_suite, DEMO_SOURCES};
use cat_core::evaluation::{
    policy_trace, run_evaluation, run_repeatability, run_ztest, EvaluationReport,
};
use cat_core::language::{InstantiateOptions, SamplingMode};
use cat_core::layout::LayoutLibrary;
use cat_core::policies::{builtin_policy, PolicyFactory, POLICY_NAMES};
use cat_core::report::{emit_report, load_json, ReportFormat};
use cat_core::scenario::ConcreteScenario;
use cat_core::scoring::{load_track_records, release_diff, track_comparison, RunRecord};

const THREADS_ENV: &str = "CAT_HARNESS_THREADS";

#[derive(Parser)]
#[command(
    name = "cat-harness",
    version,
    about = "Scenario-based collision avoidance test harness"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Harness config (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Scenario database directory.
    #[arg(long, global = true, value_name = "PATH")]
    db: Option<PathBuf>,
    /// Ego policy: no_reaction, aeb or nieon_as_policy.
    #[arg(long, global = true, value_name = "NAME")]
    policy: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides CAT_HARNESS_THREADS.
    #[arg(long, global = true, value_name = "N")]
    parallelism: Option<usize>,
    /// Report format; repeatable. Defaults to csv and json.
    #[arg(long, global = true, value_name = "csv|json|svg")]
    format: Vec<ReportFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Check every scenario in a database.
    Validate,
    /// Instantiate `.scn` sources into a database under --out.
    Generate {
        /// `.scn` files or directories containing them.
        sources: Vec<PathBuf>,
        /// Include the bundled demo suite.
        #[arg(long)]
        demo: bool,
        /// Latin-hypercube samples per logical scenario instead of the full grid.
        #[arg(long, value_name = "N")]
        lhs: Option<usize>,
    },
    /// Evaluate a policy and write reports.
    Run,
    /// Check whether each safety group separates reference-driver stringency levels.
    Ztest,
    /// Re-run the evaluation with latency jitter and report score variation.
    Repeat {
        #[arg(long, value_name = "K")]
        runs: Option<usize>,
        /// Jitter amplitude in steps.
        #[arg(long, value_name = "N")]
        jitter: Option<u32>,
    },
    /// Compare two JSON reports from different releases.
    Diff { before: PathBuf, after: PathBuf },
    /// Compare simulated runs against test-track records.
    TrackCompare {
        /// CSV index with scenario_id,collided,trajectory columns.
        #[arg(long, value_name = "PATH")]
        track: PathBuf,
    },
    /// Re-emit reports from a saved JSON report.
    Report {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
}

/// Failure classes and their exit codes.
enum Failure {
    Acceptance,
    Config(anyhow::Error),
    Database(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Acceptance => 1,
            Failure::Config(_) => 2,
            Failure::Database(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn runtime<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

struct Session {
    config: HarnessConfig,
    common: Common,
}

impl Session {
    fn new(common: Common) -> std::result::Result<Self, Failure> {
        let mut config = match &common.config {
            Some(path) => HarnessConfig::load(path).map_err(|e| Failure::Config(e.into()))?,
            None => HarnessConfig::default(),
        };
        if let Ok(v) = std::env::var(THREADS_ENV) {
            config.run.parallelism = v
                .trim()
                .parse()
                .map_err(|_| Failure::Config(anyhow!("{THREADS_ENV}={v} is not a thread count")))?;
        }
        if let Some(p) = common.parallelism {
            config.run.parallelism = p;
        }
        if let Some(seed) = common.seed {
            config.run.seed = seed;
        }
        if let Some(policy) = &common.policy {
            config.run.policy = policy.clone();
        }
        if let Some(db) = &common.db {
            config.run.database = Some(db.clone());
        }
        Ok(Self { config, common })
    }

    fn out_dir(&self) -> std::result::Result<&Path, Failure> {
        self.common
            .out
            .as_deref()
            .ok_or_else(|| Failure::Config(anyhow!("--out is required")))
    }

    fn policy(&self) -> std::result::Result<Box<dyn PolicyFactory>, Failure> {
        builtin_policy(&self.config.run.policy, self.config.aeb).ok_or_else(|| {
            Failure::Config(anyhow!(
                "unknown policy `{}` (available: {})",
                self.config.run.policy,
                POLICY_NAMES.join(", ")
            ))
        })
    }

    /// Loads the database and rejects it unless every scenario validates.
    fn database(&self) -> std::result::Result<Database, Failure> {
        let path = self.config.run.database.as_deref().ok_or_else(|| {
            Failure::Config(anyhow!("no database: pass --db or set run.database"))
        })?;
        let db = Database::load(path).map_err(|e| Failure::Database(e.into()))?;
        let problems = db.validate(&self.config.registry());
        if !problems.is_empty() {
            for (id, report) in &problems {
                for v in &report.violations {
                    let id = if id.is_empty() { "<database>" } else { id };
                    eprintln!("{id}: {} ({})", v.invariant, v.path);
                }
            }
            return Err(Failure::Database(anyhow!("database failed validation")));
        }
        Ok(db)
    }

    fn formats(&self) -> Vec<ReportFormat> {
        if self.common.format.is_empty() {
            vec![ReportFormat::Csv, ReportFormat::Json]
        } else {
            self.common.format.clone()
        }
    }
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn print_scores(report: &EvaluationReport) {
    println!(
        "{:<30} {:>5} {:>13} {:>13}  verdict",
        "group", "n", "collisions", "serious"
    );
    let verdicts = report
        .acceptance
        .groups
        .iter()
        .chain(report.acceptance.road_user_groups.iter());
    for (g, v) in report.scores.all().zip(verdicts) {
        println!(
            "{:<30} {:>5} {:>6} / {:<4} {:>6} / {:<4}  {}",
            g.group_id,
            g.n_scenarios,
            g.ads_collisions,
            g.nieon_collisions,
            g.ads_serious,
            g.nieon_serious,
            if v.pass { "pass" } else { "FAIL" }
        );
    }
}

fn cmd_validate(ctx: &Session) -> Outcome {
    let db = ctx.database()?;
    println!(
        "{}: {} scenarios, {} test requests, sha256 {}",
        db.root.display(),
        db.scenarios.len(),
        db.test_requests.len(),
        db.content_hash
    );
    Ok(())
}

fn scn_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for e in entries {
            if e.is_dir() || e.extension().is_some_and(|x| x == "scn") {
                scn_files(&e, out)?;
            }
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

fn cmd_generate(ctx: &Session, sources: &[PathBuf], demo: bool, lhs: Option<usize>) -> Outcome {
    let out = ctx.out_dir()?;
    let mut files = Vec::new();
    for s in sources {
        runtime(scn_files(s, &mut files))?;
    }
    let mut texts: Vec<(String, String)> = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f)
            .with_context(|| format!("reading {}", f.display()))
            .map_err(Failure::Runtime)?;
        let name = f.file_name().map_or_else(
            || f.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        texts.push((name, text));
    }
    if demo {
        texts.extend(
            DEMO_SOURCES
                .iter()
                .map(|(n, t)| (n.to_string(), t.to_string())),
        );
    }
    if texts.is_empty() {
        return Err(Failure::Config(anyhow!(
            "no sources given (pass .scn files or --demo)"
        )));
    }
    let options = InstantiateOptions {
        mode: match lhs {
            Some(samples) => SamplingMode::LatinHypercube {
                samples,
                seed: ctx.config.run.seed,
            },
            None => SamplingMode::Grid,
        },
        ..InstantiateOptions::default()
    };
    let (scenarios, requests) = build_suite(
        texts.iter().map(|(n, t)| (n.as_str(), t.as_str())),
        &LayoutLibrary::bundled(),
        &ctx.config.registry(),
        "cat-harness",
        &options,
    )
    .map_err(|e| Failure::Config(e.into()))?;
    runtime(Database::write(out, &scenarios, &requests).map_err(Into::into))?;
    println!(
        "wrote {} scenarios and {} test requests to {}",
        scenarios.len(),
        requests.len(),
        out.display()
    );
    Ok(())
}

fn cmd_run(ctx: &Session) -> Outcome {
    let db = ctx.database()?;
    let policy = ctx.policy()?;
    let out = ctx.out_dir()?;
    let (report, timing) = runtime(
        run_evaluation(
            &ctx.config,
            &db.scenarios,
            &db.content_hash,
            &ctx.config.registry(),
            policy.as_ref(),
        )
        .map_err(Into::into),
    )?;
    let formats = ctx.formats();
    let written = runtime(emit_report(&report, &formats, out).map_err(Into::into))?;
    if !formats.is_empty() {
        runtime(write_json(out, "timing.json", &timing))?;
    }
    print_scores(&report);
    for path in &written {
        println!("wrote {}", path.display());
    }
    println!(
        "{} scenarios in {:.2} s on {} threads; overall {}",
        report.scenario_count,
        timing.wall_clock_seconds,
        timing.threads,
        if report.acceptance.overall_pass {
            "PASS"
        } else {
            "FAIL"
        }
    );
    for id in &report.acceptance.inconclusive {
        println!("inconclusive: {id}");
    }
    if report.acceptance.overall_pass {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

fn cmd_ztest(ctx: &Session) -> Outcome {
    let db = ctx.database()?;
    let rows =
        runtime(run_ztest(&ctx.config, &db.scenarios, &ctx.config.registry()).map_err(Into::into))?;
    println!(
        "{:<30} {:>5} {:>14} {:>9} {:>11}  verdict",
        "group", "n", "failures", "z", "p"
    );
    for r in &rows {
        let fmt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$}"));
        println!(
            "{:<30} {:>5} {:>14} {:>9} {:>11}  {}",
            r.group_id,
            r.n,
            r.failures
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join("/"),
            fmt(r.z, 3),
            fmt(r.p_value, 6),
            if r.degenerate {
                "degenerate; collect more scenarios"
            } else if r.discriminative {
                "discriminative"
            } else {
                "collect more scenarios"
            }
        );
    }
    if let Some(out) = &ctx.common.out {
        let path = runtime(write_json(out, "ztest.json", &rows))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_repeat(ctx: &Session, runs: Option<usize>, jitter: Option<u32>) -> Outcome {
    let db = ctx.database()?;
    let policy = ctx.policy()?;
    let runs = runs.unwrap_or(ctx.config.run.repeat_runs);
    let jitter = jitter.unwrap_or(ctx.config.run.repeat_jitter_steps);
    let report = runtime(
        run_repeatability(
            &ctx.config,
            &db.scenarios,
            &db.content_hash,
            &ctx.config.registry(),
            policy.as_ref(),
            runs,
            jitter,
        )
        .map_err(Into::into),
    )?;
    println!(
        "{:<30} {:>5} {:>16} {:>16}",
        "group", "n", "p95 collision %", "p95 serious %"
    );
    for g in &report.groups {
        println!(
            "{:<30} {:>5} {:>16.3} {:>16.3}",
            g.group_id, g.n, g.p95_collision, g.p95_serious
        );
    }
    println!(
        "all groups, {runs} runs, jitter {jitter} step(s): p95 change {:.3}% collision, {:.3}% serious injury",
        report.p95_collision, report.p95_serious
    );
    println!("published reference for context only: 1.5% collision, 0.6% serious injury");
    if let Some(out) = &ctx.common.out {
        let path = runtime(write_json(out, "repeatability.json", &report))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn read_report(path: &Path) -> Result<EvaluationReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_diff(ctx: &Session, before: &Path, after: &Path) -> Outcome {
    let a = runtime(read_report(before))?;
    let b = runtime(read_report(after))?;
    let deltas = release_diff(&a.database_hash, &a.scores, &b.database_hash, &b.scores)
        .map_err(|e| Failure::Database(e.into()))?;
    println!(
        "{:<30} {:>8} {:>8} {:>8} {:>8}",
        "group", "ads_col", "ref_col", "ads_ser", "ref_ser"
    );
    for d in &deltas {
        println!(
            "{:<30} {:>+8} {:>+8} {:>+8} {:>+8}{}",
            d.group_id,
            d.ads_collisions,
            d.nieon_collisions,
            d.ads_serious,
            d.nieon_serious,
            if d.regression { "  regression" } else { "" }
        );
    }
    if let Some(out) = &ctx.common.out {
        let path = runtime(write_json(out, "diff.json", &deltas))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn sim_record(
    scenario: &ConcreteScenario,
    ctx: &Session,
    policy: &dyn PolicyFactory,
) -> Result<RunRecord> {
    let (trace, _, _) = policy_trace(scenario, policy, &ctx.config, &ctx.config.registry())?;
    let onset = scenario.stimulus.onset_time;
    Ok(RunRecord {
        scenario_id: scenario.id.clone(),
        collided: trace.contact.is_some(),
        trajectory: trace
            .odometer
            .iter()
            .enumerate()
            .map(|(k, s)| (trace.time_at(k) - onset, *s))
            .collect(),
    })
}

fn cmd_track_compare(ctx: &Session, track: &Path) -> Outcome {
    let db = ctx.database()?;
    let policy = ctx.policy()?;
    let records = load_track_records(track).map_err(|e| Failure::Database(e.into()))?;
    let mut sims = Vec::new();
    for r in &records {
        let scenario = db
            .scenarios
            .iter()
            .find(|s| s.id == r.scenario_id)
            .ok_or_else(|| {
                Failure::Database(anyhow!("scenario {} has no matching record", r.scenario_id))
            })?;
        sims.push(runtime(sim_record(scenario, ctx, policy.as_ref()))?);
    }
    let cmp = track_comparison(&sims, &records).map_err(|e| Failure::Database(e.into()))?;
    println!(
        "matched {}: sim {} vs track {} collisions ({}); {:.1}% even with or ahead ({})",
        cmp.matched,
        cmp.sim_collisions,
        cmp.track_collisions,
        if cmp.conservative {
            "conservative"
        } else {
            "NOT conservative"
        },
        cmp.ahead_fraction * 100.0,
        if cmp.majority_ahead {
            "majority"
        } else {
            "NOT a majority"
        }
    );
    if let Some(out) = &ctx.common.out {
        let path = runtime(write_json(out, "track_comparison.json", &cmp))?;
        println!("wrote {}", path.display());
    }
    if cmp.conservative && cmp.majority_ahead {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

fn cmd_report(ctx: &Session, input: &Path) -> Outcome {
    let report = runtime(read_report(input))?;
    let out = ctx.out_dir()?;
    let written = runtime(emit_report(&report, &ctx.formats(), out).map_err(Into::into))?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let ctx = Session::new(cli.common)?;
    match &cli.command {
        Command::Validate => cmd_validate(&ctx),
        Command::Generate { sources, demo, lhs } => cmd_generate(&ctx, sources, *demo, *lhs),
        Command::Run => cmd_run(&ctx),
        Command::Ztest => cmd_ztest(&ctx),
        Command::Repeat { runs, jitter } => cmd_repeat(&ctx, *runs, *jitter),
        Command::Diff { before, after } => cmd_diff(&ctx, before, after),
        Command::TrackCompare { track } => cmd_track_compare(&ctx, track),
        Command::Report { input } => cmd_report(&ctx, input),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Acceptance => {}
                Failure::Config(e) | Failure::Database(e) | Failure::Runtime(e) => {
                    eprintln!("error: {e:#}");
                }
            }
            ExitCode::from(failure.code())
        }
    }
}
