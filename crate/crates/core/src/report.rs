//! Report artifacts: the score table as CSV, the acceptance document as JSON and a
//! per-group bar chart as SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::evaluation::EvaluationReport;
use crate::scoring::{GroupScore, GroupVerdict};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    IoFailure {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(format!(
                "unknown format `{other}` (expected csv, json or svg)"
            )),
        }
    }
}

pub const CSV_FILE: &str = "scores.csv";
pub const JSON_FILE: &str = "acceptance.json";
pub const SVG_FILE: &str = "scores.svg";

fn header_lines(report: &EvaluationReport) -> Vec<String> {
    let mut lines = vec![
        format!("policy: {}", report.policy),
        format!("seed: {}", report.seed),
        format!("database_sha256: {}", report.database_hash),
        format!("scenarios: {}", report.scenario_count),
        "config:".to_string(),
    ];
    lines.extend(report.config.to_toml().lines().map(|l| format!("  {l}")));
    lines
}

fn verdict_for<'a>(report: &'a EvaluationReport, id: &str) -> Option<&'a GroupVerdict> {
    let a = &report.acceptance;
    a.groups
        .iter()
        .chain(a.road_user_groups.iter())
        .find(|v| v.group_id == id)
}

/// Score table with one row per safety group and one per road-user group. Leading
/// `#` lines carry the config echo and database hash.
pub fn render_csv(report: &EvaluationReport) -> String {
    let mut out = String::new();
    for line in header_lines(report) {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("group_id,road_user_group,n,ads_collisions,nieon_collisions,ads_serious,nieon_serious,pass\n");
    let row = |out: &mut String, g: &GroupScore| {
        let pass = verdict_for(report, &g.group_id).is_some_and(|v| v.pass);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            g.group_id,
            g.road_user_group.map_or("", |r| r.label()),
            g.n_scenarios,
            g.ads_collisions,
            g.nieon_collisions,
            g.ads_serious,
            g.nieon_serious,
            pass
        );
    };
    for g in report.scores.all() {
        row(&mut out, g);
    }
    out
}

/// The full evaluation report; `load_json` reads it back.
pub fn render_json(report: &EvaluationReport) -> String {
    let mut doc = report.clone();
    doc.acceptance.config = None;
    serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
}

pub fn load_json(text: &str) -> Result<EvaluationReport, serde_json::Error> {
    let mut report: EvaluationReport = serde_json::from_str(text)?;
    report.acceptance.config = Some(report.config.clone());
    Ok(report)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Grouped bars of ADS and reference counts for both metrics, one cluster per group.
pub fn render_svg(report: &EvaluationReport) -> String {
    let rows: Vec<&GroupScore> = report.scores.all().collect();
    let max = rows
        .iter()
        .flat_map(|g| {
            [
                g.ads_collisions,
                g.nieon_collisions,
                g.ads_serious,
                g.nieon_serious,
            ]
        })
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let (left, top, row_h, bar_w) = (230.0, 50.0, 56.0, 420.0);
    let height = top + row_h * rows.len() as f64 + 40.0;
    let width = left + bar_w + 80.0;
    let series = [
        ("ADS collisions", "#c0392b"),
        ("NIEON collisions", "#e6a19a"),
        ("ADS serious", "#1f4e79"),
        ("NIEON serious", "#9dbad6"),
    ];
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, "<!--");
    for line in header_lines(report) {
        let _ = writeln!(out, "{}", escape(&line).replace("--", "- -"));
    }
    let _ = writeln!(out, "-->");
    let _ = writeln!(
        out,
        r#"<text x="10" y="20" font-size="14">{} vs NIEON ({} scenarios)</text>"#,
        escape(&report.policy),
        report.scenario_count
    );
    for (i, (name, color)) in series.iter().enumerate() {
        let x = left + i as f64 * 110.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="28" width="10" height="10" fill="{color}"/><text x="{}" y="37">{name}</text>"#,
            x + 14.0
        );
    }
    for (r, g) in rows.iter().enumerate() {
        let y = top + r as f64 * row_h;
        let pass = verdict_for(report, &g.group_id).is_some_and(|v| v.pass);
        let _ = writeln!(
            out,
            r#"<text x="10" y="{}" fill="{}">{} (n={})</text>"#,
            y + 26.0,
            if pass { "#000" } else { "#c0392b" },
            escape(&g.group_id),
            g.n_scenarios
        );
        let values = [
            g.ads_collisions,
            g.nieon_collisions,
            g.ads_serious,
            g.nieon_serious,
        ];
        for (k, (v, (_, color))) in values.iter().zip(series.iter()).enumerate() {
            let w = *v as f64 / max * bar_w;
            let by = y + 4.0 + k as f64 * 12.0;
            let _ = writeln!(
                out,
                r#"<rect x="{left}" y="{by}" width="{w:.2}" height="10" fill="{color}"/><text x="{:.2}" y="{}">{v}</text>"#,
                left + w + 4.0,
                by + 9.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, ReportError> {
    fs::write(&path, text).map_err(|source| ReportError::IoFailure {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes one file per requested format; duplicate formats are written once.
pub fn emit_report(
    report: &EvaluationReport,
    formats: &[ReportFormat],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    if formats.is_empty() {
        return Ok(vec![]);
    }
    fs::create_dir_all(out_dir).map_err(|source| ReportError::IoFailure {
        path: out_dir.to_path_buf(),
        source,
    })?;
    formats
        .iter()
        .map(|f| match f {
            ReportFormat::Csv => write(out_dir.join(CSV_FILE), &render_csv(report)),
            ReportFormat::Json => write(out_dir.join(JSON_FILE), &render_json(report)),
            ReportFormat::Svg => write(out_dir.join(SVG_FILE), &render_svg(report)),
        })
        .collect()
}
