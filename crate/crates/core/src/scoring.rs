//! Metric predicates, aggregation, the acceptance check and the statistical
//! diagnostics built on top of them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::config::HarnessConfig;
use crate::nieon::NieonOutcome;
use crate::scenario::RoadUserGroup;
use crate::sim::{Contact, ImpactZone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Ads,
    Nieon,
}

/// Outcome of the policy under test in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdsOutcome {
    pub collided: bool,
    pub contact: Option<Contact>,
    /// p(MAIS3+) per actor.
    pub severity: Vec<f64>,
    pub serious_injury: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario_id: String,
    pub safety_group: String,
    pub road_user_group: RoadUserGroup,
    pub ads: AdsOutcome,
    pub nieon: NieonOutcome,
    /// Set when the policy faulted; the scenario then counts towards neither metric
    /// and the overall verdict fails.
    pub inconclusive: Option<String>,
}

impl ScenarioResult {
    fn party(&self, party: Party) -> (Option<&Contact>, bool) {
        match party {
            Party::Ads => (self.ads.contact.as_ref(), self.ads.serious_injury),
            Party::Nieon => (self.nieon.contact.as_ref(), self.nieon.serious_injury),
        }
    }
}

/// Contacts count only when frontal and while the ego is moving.
pub fn collision_metric_counts(result: &ScenarioResult, party: Party) -> bool {
    if party == Party::Ads && result.inconclusive.is_some() {
        return false;
    }
    matches!(
        result.party(party).0,
        Some(c) if c.ego_zone == ImpactZone::Frontal && !c.ego_stationary
    )
}

/// Any serious injury counts, wherever the contact was.
pub fn injury_metric_counts(result: &ScenarioResult, party: Party) -> bool {
    if party == Party::Ads && result.inconclusive.is_some() {
        return false;
    }
    result.party(party).1
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupScore {
    pub group_id: String,
    pub road_user_group: Option<RoadUserGroup>,
    pub n_scenarios: usize,
    pub ads_collisions: usize,
    pub nieon_collisions: usize,
    pub ads_serious: usize,
    pub nieon_serious: usize,
}

impl GroupScore {
    fn add(&mut self, other: &GroupScore) {
        self.n_scenarios += other.n_scenarios;
        self.ads_collisions += other.ads_collisions;
        self.nieon_collisions += other.nieon_collisions;
        self.ads_serious += other.ads_serious;
        self.nieon_serious += other.nieon_serious;
    }
}

pub fn rollup_id(group: RoadUserGroup) -> String {
    format!("road_user:{}", group.label())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scores {
    /// Per safety group, sorted by id.
    pub groups: Vec<GroupScore>,
    /// One rollup per road-user group, Vehicle first.
    pub road_user: Vec<GroupScore>,
}

impl Scores {
    pub fn all(&self) -> impl Iterator<Item = &GroupScore> {
        self.groups.iter().chain(self.road_user.iter())
    }
}

pub fn aggregate_groups(results: &[ScenarioResult]) -> Scores {
    let mut groups: BTreeMap<&str, GroupScore> = BTreeMap::new();
    for r in results {
        let g = groups
            .entry(r.safety_group.as_str())
            .or_insert_with(|| GroupScore {
                group_id: r.safety_group.clone(),
                road_user_group: Some(r.road_user_group),
                ..GroupScore::default()
            });
        g.n_scenarios += 1;
        g.ads_collisions += collision_metric_counts(r, Party::Ads) as usize;
        g.nieon_collisions += collision_metric_counts(r, Party::Nieon) as usize;
        g.ads_serious += injury_metric_counts(r, Party::Ads) as usize;
        g.nieon_serious += injury_metric_counts(r, Party::Nieon) as usize;
    }
    let groups: Vec<GroupScore> = groups.into_values().collect();
    let road_user = RoadUserGroup::ALL
        .iter()
        .map(|&rug| {
            let mut total = GroupScore {
                group_id: rollup_id(rug),
                road_user_group: Some(rug),
                ..GroupScore::default()
            };
            for g in groups.iter().filter(|g| g.road_user_group == Some(rug)) {
                total.add(g);
            }
            total
        })
        .collect();
    Scores { groups, road_user }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupVerdict {
    pub group_id: String,
    pub collisions_pass: bool,
    pub serious_pass: bool,
    pub pass: bool,
}

impl GroupVerdict {
    fn of(score: &GroupScore, slack: usize) -> Self {
        let collisions_pass = score.ads_collisions <= score.nieon_collisions + slack;
        let serious_pass = score.ads_serious <= score.nieon_serious + slack;
        Self {
            group_id: score.group_id.clone(),
            collisions_pass,
            serious_pass,
            pass: collisions_pass && serious_pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub groups: Vec<GroupVerdict>,
    pub road_user_groups: Vec<GroupVerdict>,
    /// Scenarios whose policy run faulted.
    pub inconclusive: Vec<String>,
    pub overall_pass: bool,
    pub config: Option<HarnessConfig>,
}

impl AcceptanceReport {
    pub fn failing_groups(&self) -> impl Iterator<Item = &GroupVerdict> {
        self.groups.iter().filter(|v| !v.pass)
    }
}

/// Every safety group and both road-user groups must pass both metrics.
pub fn acceptance_check(
    scores: &Scores,
    slack: u32,
    inconclusive: Vec<String>,
) -> AcceptanceReport {
    let slack = slack as usize;
    let groups: Vec<GroupVerdict> = scores
        .groups
        .iter()
        .map(|g| GroupVerdict::of(g, slack))
        .collect();
    let road_user_groups: Vec<GroupVerdict> = scores
        .road_user
        .iter()
        .map(|g| GroupVerdict::of(g, slack))
        .collect();
    let overall_pass =
        inconclusive.is_empty() && groups.iter().chain(road_user_groups.iter()).all(|v| v.pass);
    AcceptanceReport {
        groups,
        road_user_groups,
        inconclusive,
        overall_pass,
        config: None,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("z undefined: n1={n1}, n2={n2}, pooled proportion {pooled}")]
    DegenerateGroup { n1: usize, n2: usize, pooled: f64 },
    #[error("at least two stringency levels are required")]
    TooFewLevels,
    #[error("repeatability needs at least two runs")]
    TooFewRuns,
}

/// `(p2 - p1) / sqrt(p(1 - p)(1/n1 + 1/n2))` with the pooled proportion `p`.
pub fn pooled_z(x1: usize, n1: usize, x2: usize, n2: usize) -> Result<f64, StatsError> {
    let pooled = if n1 + n2 == 0 {
        f64::NAN
    } else {
        (x1 + x2) as f64 / (n1 + n2) as f64
    };
    if n1 < 2 || n2 < 2 || !(pooled > 0.0 && pooled < 1.0) {
        return Err(StatsError::DegenerateGroup { n1, n2, pooled });
    }
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    Ok((p2 - p1) / se)
}

pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDiscriminability {
    pub group_id: String,
    pub n: usize,
    /// Stringency deltas, ascending.
    pub deltas: Vec<f64>,
    /// Reference-model failures at each delta.
    pub failures: Vec<usize>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub discriminative: bool,
    pub degenerate: bool,
    /// Non-discriminative groups need more scenarios.
    pub collect_more: bool,
}

/// Compares the extreme stringency levels of one group. `levels` pairs each delta
/// with its failure count out of `n`.
pub fn discriminability_from_counts(
    group_id: &str,
    n: usize,
    levels: &[(f64, usize)],
    alpha: f64,
) -> Result<GroupDiscriminability, StatsError> {
    if levels.len() < 2 {
        return Err(StatsError::TooFewLevels);
    }
    let mut levels = levels.to_vec();
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (first, last) = (levels[0].1, levels[levels.len() - 1].1);
    let (z, p, degenerate) = match pooled_z(first, n, last, n) {
        Ok(z) => (Some(z), Some(two_sided_p(z)), false),
        Err(_) => (None, None, true),
    };
    let discriminative = p.is_some_and(|p| p < alpha);
    Ok(GroupDiscriminability {
        group_id: group_id.to_string(),
        n,
        deltas: levels.iter().map(|l| l.0).collect(),
        failures: levels.iter().map(|l| l.1).collect(),
        z,
        p_value: p,
        discriminative,
        degenerate,
        collect_more: !discriminative,
    })
}

/// Nearest-rank percentile of unsorted values; 0 for an empty slice.
pub fn percentile_nearest_rank(values: &[f64], pct: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRepeatability {
    pub group_id: String,
    pub n: usize,
    /// Percent change of each later run against the first.
    pub collision_changes: Vec<f64>,
    pub serious_changes: Vec<f64>,
    pub p95_collision: f64,
    pub p95_serious: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityReport {
    pub runs: usize,
    pub groups: Vec<GroupRepeatability>,
    /// Over every group and run.
    pub p95_collision: f64,
    pub p95_serious: f64,
}

/// Percent change `|c_i - c_1| / n * 100` of ADS counts per group across runs.
pub fn repeatability(runs: &[Scores]) -> Result<RepeatabilityReport, StatsError> {
    if runs.len() < 2 {
        return Err(StatsError::TooFewRuns);
    }
    let pct = |a: usize, b: usize, n: usize| {
        if n == 0 {
            0.0
        } else {
            a.abs_diff(b) as f64 / n as f64 * 100.0
        }
    };
    let mut groups = Vec::new();
    let (mut all_c, mut all_s) = (Vec::new(), Vec::new());
    for base in &runs[0].groups {
        let mut collision_changes = Vec::new();
        let mut serious_changes = Vec::new();
        for run in &runs[1..] {
            let other = run
                .groups
                .iter()
                .find(|g| g.group_id == base.group_id)
                .cloned()
                .unwrap_or_default();
            collision_changes.push(pct(
                other.ads_collisions,
                base.ads_collisions,
                base.n_scenarios,
            ));
            serious_changes.push(pct(other.ads_serious, base.ads_serious, base.n_scenarios));
        }
        all_c.extend_from_slice(&collision_changes);
        all_s.extend_from_slice(&serious_changes);
        groups.push(GroupRepeatability {
            group_id: base.group_id.clone(),
            n: base.n_scenarios,
            p95_collision: percentile_nearest_rank(&collision_changes, 95.0),
            p95_serious: percentile_nearest_rank(&serious_changes, 95.0),
            collision_changes,
            serious_changes,
        });
    }
    Ok(RepeatabilityReport {
        runs: runs.len(),
        groups,
        p95_collision: percentile_nearest_rank(&all_c, 95.0),
        p95_serious: percentile_nearest_rank(&all_s, 95.0),
    })
}

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("scenario {0} has no matching record")]
    UnmatchedScenario(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// One run of a scenario: whether it collided and the ego's arc length over time,
/// with time measured from stimulus onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_id: String,
    pub collided: bool,
    pub trajectory: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackComparison {
    pub matched: usize,
    pub sim_collisions: usize,
    pub track_collisions: usize,
    /// Simulation collides at least as often as the track.
    pub conservative: bool,
    pub ahead: Vec<(String, bool)>,
    pub ahead_fraction: f64,
    /// More than half of the simulated runs are even with or ahead of the track.
    pub majority_ahead: bool,
}

fn interpolate(traj: &[(f64, f64)], t: f64) -> Option<f64> {
    let first = traj.first()?;
    let last = traj.last()?;
    if t < first.0 - 1e-9 || t > last.0 + 1e-9 {
        return None;
    }
    let i = traj.partition_point(|p| p.0 < t);
    if i == 0 {
        return Some(first.1);
    }
    if i == traj.len() {
        return Some(last.1);
    }
    let (a, b) = (traj[i - 1], traj[i]);
    let w = if b.0 > a.0 {
        (t - a.0) / (b.0 - a.0)
    } else {
        1.0
    };
    Some(a.1 + w * (b.1 - a.1))
}

/// True when the simulated arc length is at least the track's at every track sample
/// time the two trajectories share.
fn is_ahead(sim: &[(f64, f64)], track: &[(f64, f64)]) -> bool {
    let mut any = false;
    for &(t, s_track) in track {
        if let Some(s_sim) = interpolate(sim, t) {
            any = true;
            if s_sim < s_track - 1e-9 {
                return false;
            }
        }
    }
    any
}

pub fn track_comparison(
    sim: &[RunRecord],
    track: &[RunRecord],
) -> Result<TrackComparison, TrackError> {
    let track_by_id: BTreeMap<&str, &RunRecord> =
        track.iter().map(|r| (r.scenario_id.as_str(), r)).collect();
    let sim_ids: std::collections::BTreeSet<&str> =
        sim.iter().map(|r| r.scenario_id.as_str()).collect();
    if let Some(t) = track
        .iter()
        .find(|t| !sim_ids.contains(t.scenario_id.as_str()))
    {
        return Err(TrackError::UnmatchedScenario(t.scenario_id.clone()));
    }
    let mut out = TrackComparison {
        matched: 0,
        sim_collisions: 0,
        track_collisions: 0,
        conservative: true,
        ahead: Vec::new(),
        ahead_fraction: 0.0,
        majority_ahead: false,
    };
    for s in sim {
        let t = track_by_id
            .get(s.scenario_id.as_str())
            .ok_or_else(|| TrackError::UnmatchedScenario(s.scenario_id.clone()))?;
        out.matched += 1;
        out.sim_collisions += s.collided as usize;
        out.track_collisions += t.collided as usize;
        out.ahead.push((
            s.scenario_id.clone(),
            is_ahead(&s.trajectory, &t.trajectory),
        ));
    }
    out.ahead.sort();
    out.conservative = out.sim_collisions >= out.track_collisions;
    if out.matched > 0 {
        out.ahead_fraction = out.ahead.iter().filter(|a| a.1).count() as f64 / out.matched as f64;
    }
    out.majority_ahead = out.ahead_fraction > 0.5;
    Ok(out)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn read(path: &Path) -> Result<String, TrackError> {
    std::fs::read_to_string(path).map_err(|source| TrackError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads `time,arc_length` rows (header optional).
pub fn load_trajectory_csv(path: &Path) -> Result<Vec<(f64, f64)>, TrackError> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        let parse_err = |message: String| TrackError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let mut cols = line.split(',');
        let (Some(t), Some(s)) = (cols.next(), cols.next()) else {
            return Err(parse_err("expected time,arc_length".into()));
        };
        let t: f64 = t.trim().parse().map_err(|e| parse_err(format!("{e}")))?;
        let s: f64 = s.trim().parse().map_err(|e| parse_err(format!("{e}")))?;
        out.push((t, s));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Reads a `scenario_id,collided,trajectory` index; trajectory paths are relative to
/// the index file.
pub fn load_track_records(path: &Path) -> Result<Vec<RunRecord>, TrackError> {
    let text = read(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("scenario_id")) {
            continue;
        }
        let parse_err = |message: &str| TrackError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: message.to_string(),
        };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(parse_err("expected scenario_id,collided,trajectory"));
        }
        let collided =
            parse_bool(cols[1]).ok_or_else(|| parse_err("collided must be true or false"))?;
        out.push(RunRecord {
            scenario_id: cols[0].to_string(),
            collided,
            trajectory: load_trajectory_csv(&dir.join(cols[2]))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("reports were produced from different databases ({0} vs {1})")]
    DatabaseMismatch(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDelta {
    pub group_id: String,
    pub ads_collisions: i64,
    pub nieon_collisions: i64,
    pub ads_serious: i64,
    pub nieon_serious: i64,
    /// ADS counts went up.
    pub regression: bool,
}

/// Count changes from release `a` to release `b`, including rollups.
pub fn release_diff(
    hash_a: &str,
    a: &Scores,
    hash_b: &str,
    b: &Scores,
) -> Result<Vec<GroupDelta>, DiffError> {
    if hash_a != hash_b {
        return Err(DiffError::DatabaseMismatch(hash_a.into(), hash_b.into()));
    }
    let index = |s: &Scores| -> BTreeMap<String, GroupScore> {
        s.all().map(|g| (g.group_id.clone(), g.clone())).collect()
    };
    let (ia, ib) = (index(a), index(b));
    let mut ids: Vec<&String> = ia.keys().chain(ib.keys()).collect();
    ids.sort();
    ids.dedup();
    Ok(ids
        .into_iter()
        .map(|id| {
            let ga = ia.get(id).cloned().unwrap_or_default();
            let gb = ib.get(id).cloned().unwrap_or_default();
            let d = |x: usize, y: usize| y as i64 - x as i64;
            let ads_collisions = d(ga.ads_collisions, gb.ads_collisions);
            let ads_serious = d(ga.ads_serious, gb.ads_serious);
            GroupDelta {
                group_id: id.clone(),
                ads_collisions,
                nieon_collisions: d(ga.nieon_collisions, gb.nieon_collisions),
                ads_serious,
                nieon_serious: d(ga.nieon_serious, gb.nieon_serious),
                regression: ads_collisions > 0 || ads_serious > 0,
            }
        })
        .collect())
}
