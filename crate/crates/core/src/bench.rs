//! Benchmark runner and analysis: termination predicates, evaluation
//! accounting, log-ratio profiles, and the CSV/SVG artifacts.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fdiff::DifferenceScheme;
use crate::lbfgs::{minimize_monitored, LbfgsConfig, LipschitzMode};
use crate::leastsq::{lm_minimize_monitored, LipschitzPolicy, LmConfig};
use crate::noise::{NoiseModel, NoisyOracle, ResidualOracle};
use crate::problem::{lookup_residual, lookup_smooth};
use crate::solver::{GapMonitor, SolverResult, Termination};

/// Evaluation count assigned to a run that never reaches its target (2⁴⁰).
pub const SENTINEL: f64 = 1_099_511_627_776.0;

/// Plotted ratios are clipped to `±PLOT_CAP`.
pub const PLOT_CAP: f64 = 20.0;

/// Smallest optimality gap that enters a logarithm.
pub const GAP_FLOOR: f64 = 1e-16;

/// `φ_k − φ* ≤ τ·max(1, |φ*|)`.
pub fn gap_target(phi_k: f64, phi_star: f64, tau: f64) -> bool {
    phi_k - phi_star <= tau * phi_star.abs().max(1.0)
}

/// `φ_k − φ_b ≤ τ·(φ_0 − φ_b)` where `φ_b` is a baseline such as the best
/// value any solver reached.
pub fn relative_target(phi_k: f64, phi_baseline: f64, phi_0: f64, tau: f64) -> Result<bool> {
    if !(phi_0 > phi_baseline) {
        return invalid(format!(
            "degenerate run: starting value {phi_0} does not exceed the baseline {phi_baseline}"
        ));
    }
    Ok(phi_k - phi_baseline <= tau * (phi_0 - phi_baseline))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Cumulative evaluation units.
    pub evals: f64,
    pub noisy_f: f64,
    pub true_phi: f64,
}

/// One solver run on one problem, reduced to what the analysis needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub solver_id: String,
    pub problem_id: String,
    pub sigma_f: f64,
    pub seed: u64,
    pub trace: Vec<TracePoint>,
    pub reason: Termination,
}

impl RunRecord {
    /// Builds a record from a monitored run. Every trace row must carry the
    /// true objective.
    pub fn from_result(
        solver_id: &str,
        problem_id: &str,
        sigma_f: f64,
        seed: u64,
        result: &SolverResult,
    ) -> Result<Self> {
        let trace = result
            .trace
            .iter()
            .map(|row| {
                let true_phi = row.true_phi.ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "{solver_id} on {problem_id}: row {} has no true objective",
                        row.iteration
                    ))
                })?;
                Ok(TracePoint {
                    evals: row.evals,
                    noisy_f: row.noisy_f,
                    true_phi,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let record = Self {
            solver_id: solver_id.to_string(),
            problem_id: problem_id.to_string(),
            sigma_f,
            seed,
            trace,
            reason: result.termination,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trace.is_empty() {
            return invalid(format!("{}: empty trace", self.label()));
        }
        for w in self.trace.windows(2) {
            if !(w[1].evals > w[0].evals) {
                return invalid(format!(
                    "{}: evaluation counts not increasing ({} then {})",
                    self.label(),
                    w[0].evals,
                    w[1].evals
                ));
            }
        }
        Ok(())
    }

    pub fn initial_phi(&self) -> f64 {
        self.trace.first().map_or(f64::NAN, |t| t.true_phi)
    }

    /// Lowest true objective over the trace.
    pub fn best_phi(&self) -> f64 {
        self.trace.iter().map(|t| t.true_phi).fold(f64::INFINITY, f64::min)
    }

    fn label(&self) -> String {
        format!("{}/{}/{}/{}", self.solver_id, self.problem_id, self.sigma_f, self.seed)
    }
}

/// Evaluations at the first row satisfying `pred`, or [`SENTINEL`].
pub fn evals_to_target(record: &RunRecord, pred: impl Fn(&TracePoint) -> bool) -> f64 {
    record
        .trace
        .iter()
        .find(|t| pred(t))
        .map_or(SENTINEL, |t| t.evals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEntry {
    pub problem_id: String,
    pub ratio: f64,
    pub failed_a: bool,
    pub failed_b: bool,
}

/// Sorted log₂ ratios of A against B, one entry per paired run.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub entries: Vec<ProfileEntry>,
    pub sentinel: f64,
}

impl Profile {
    fn new(mut entries: Vec<ProfileEntry>) -> Self {
        entries.sort_by(|a, b| {
            a.ratio
                .total_cmp(&b.ratio)
                .then_with(|| a.problem_id.cmp(&b.problem_id))
        });
        Self {
            entries,
            sentinel: SENTINEL,
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ratio).collect()
    }

    /// Whether either side failed, in profile order.
    pub fn failure_mask(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.failed_a || e.failed_b).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// `log₂(a/b)`, computed with the larger value on top so that swapping the
/// arguments negates the result exactly.
pub fn log2_ratio(a: f64, b: f64) -> f64 {
    if a >= b {
        (a / b).log2()
    } else {
        -(b / a).log2()
    }
}

type PairKey = (String, u64, u64);

fn pair_key(r: &RunRecord) -> PairKey {
    (r.problem_id.clone(), r.sigma_f.to_bits(), r.seed)
}

/// Pairs records by (problem, σ_f, seed). Entries are labeled by the
/// problem alone when that is unambiguous.
fn pair_records<'a>(
    a: &'a [RunRecord],
    b: &'a [RunRecord],
) -> Result<Vec<(String, &'a RunRecord, &'a RunRecord)>> {
    if a.len() != b.len() {
        return invalid(format!("record sets differ in size: {} vs {}", a.len(), b.len()));
    }
    let mut index: HashMap<PairKey, &RunRecord> = HashMap::new();
    for r in b {
        if index.insert(pair_key(r), r).is_some() {
            return invalid(format!("duplicate run for {} in second set", r.problem_id));
        }
    }
    let mut per_problem: HashMap<&str, usize> = HashMap::new();
    for r in a {
        *per_problem.entry(&r.problem_id).or_default() += 1;
    }
    let mut seen = std::collections::HashSet::new();
    let mut pairs = Vec::with_capacity(a.len());
    for ra in a {
        let key = pair_key(ra);
        if !seen.insert(key.clone()) {
            return invalid(format!("duplicate run for {} in first set", ra.problem_id));
        }
        let rb = index.get(&key).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unpaired run: {} (sigma_f = {}, seed = {})",
                ra.problem_id, ra.sigma_f, ra.seed
            ))
        })?;
        let label = if per_problem[ra.problem_id.as_str()] == 1 {
            ra.problem_id.clone()
        } else {
            format!("{}[sigma_f={},seed={}]", ra.problem_id, ra.sigma_f, ra.seed)
        };
        pairs.push((label, ra, *rb));
    }
    Ok(pairs)
}

/// Efficiency profile: `log₂(evals_A / evals_B)` to the first row meeting
/// `pred`, with [`SENTINEL`] for runs that never meet it.
pub fn log_ratio_profile(
    records_a: &[RunRecord],
    records_b: &[RunRecord],
    pred: impl Fn(&RunRecord, &TracePoint) -> bool,
) -> Result<Profile> {
    let entries = pair_records(records_a, records_b)?
        .into_iter()
        .map(|(label, ra, rb)| {
            let ea = evals_to_target(ra, |t| pred(ra, t));
            let eb = evals_to_target(rb, |t| pred(rb, t));
            ProfileEntry {
                problem_id: label,
                ratio: log2_ratio(ea, eb),
                failed_a: ea >= SENTINEL,
                failed_b: eb >= SENTINEL,
            }
        })
        .collect();
    Ok(Profile::new(entries))
}

/// Accuracy profile: `log₂` of the ratio of best optimality gaps, each
/// clamped below at [`GAP_FLOOR`]. A side is marked failed when its run
/// ended in [`Termination::Failure`].
pub fn accuracy_profile(
    records_a: &[RunRecord],
    records_b: &[RunRecord],
    phi_star: &HashMap<String, f64>,
) -> Result<Profile> {
    let gap = |r: &RunRecord| -> Result<f64> {
        let star = phi_star.get(&r.problem_id).ok_or_else(|| {
            Error::InvalidArgument(format!("no optimal value for {}", r.problem_id))
        })?;
        Ok(clamped_gap(r.best_phi(), *star))
    };
    let entries = pair_records(records_a, records_b)?
        .into_iter()
        .map(|(label, ra, rb)| {
            Ok(ProfileEntry {
                problem_id: label,
                ratio: log2_ratio(gap(ra)?, gap(rb)?),
                failed_a: ra.reason == Termination::Failure,
                failed_b: rb.reason == Termination::Failure,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Profile::new(entries))
}

/// `max(φ − φ*, GAP_FLOOR)`; NaN gaps also map to the floor.
pub fn clamped_gap(phi: f64, phi_star: f64) -> f64 {
    (phi - phi_star).max(GAP_FLOOR)
}

// CSV

const RUNS_HEADER: [&str; 8] = [
    "solver_id",
    "problem_id",
    "sigma_f",
    "seed",
    "evals",
    "noisy_f",
    "true_phi",
    "reason",
];

const PROFILE_HEADER: [&str; 4] = ["problem_id", "ratio", "failed_A", "failed_B"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Serializes records as `runs.csv`, one row per trace point. Floats use
/// the shortest representation that reads back to the same value.
pub fn runs_to_csv(records: &[RunRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RUNS_HEADER).expect("in-memory write");
    for r in records {
        let sigma = r.sigma_f.to_string();
        let seed = r.seed.to_string();
        for t in &r.trace {
            w.write_record([
                r.solver_id.as_str(),
                r.problem_id.as_str(),
                &sigma,
                &seed,
                &t.evals.to_string(),
                &t.noisy_f.to_string(),
                &t.true_phi.to_string(),
                r.reason.as_str(),
            ])
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_runs_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    fs::write(path, runs_to_csv(records)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| format_err(path, format!("line {line}: bad {name} `{s}`")))
}

/// Reads `runs.csv`; consecutive rows with the same run key form a record.
pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(RUNS_HEADER) {
        return Err(format_err(path, format!("unexpected header {:?}", header)));
    }
    let mut records: Vec<RunRecord> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let solver_id = &row[0];
        let problem_id = &row[1];
        let sigma_f: f64 = parse_field(path, line, "sigma_f", &row[2])?;
        let seed: u64 = parse_field(path, line, "seed", &row[3])?;
        let point = TracePoint {
            evals: parse_field(path, line, "evals", &row[4])?,
            noisy_f: parse_field(path, line, "noisy_f", &row[5])?,
            true_phi: parse_field(path, line, "true_phi", &row[6])?,
        };
        let reason = Termination::parse(&row[7])
            .ok_or_else(|| format_err(path, format!("line {line}: bad reason `{}`", &row[7])))?;
        let same_run = records.last().is_some_and(|r| {
            r.solver_id == solver_id
                && r.problem_id == problem_id
                && r.sigma_f.to_bits() == sigma_f.to_bits()
                && r.seed == seed
                && r.trace.last().is_some_and(|t| t.evals < point.evals)
        });
        if same_run {
            records.last_mut().unwrap().trace.push(point);
        } else {
            records.push(RunRecord {
                solver_id: solver_id.to_string(),
                problem_id: problem_id.to_string(),
                sigma_f,
                seed,
                trace: vec![point],
                reason,
            });
        }
    }
    Ok(records)
}

pub fn profile_to_csv(profile: &Profile) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PROFILE_HEADER).expect("in-memory write");
    for e in &profile.entries {
        w.write_record([
            e.problem_id.as_str(),
            &e.ratio.to_string(),
            if e.failed_a { "1" } else { "0" },
            if e.failed_b { "1" } else { "0" },
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_profile_csv(profile: &Profile, path: &Path) -> Result<()> {
    fs::write(path, profile_to_csv(profile)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_profile_csv(path: &Path) -> Result<Profile> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(PROFILE_HEADER) {
        return Err(format_err(path, format!("unexpected header {:?}", header)));
    }
    let flag = |line: u64, s: &str| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format_err(path, format!("line {line}: bad flag `{s}`"))),
    };
    let mut entries = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        entries.push(ProfileEntry {
            problem_id: row[0].to_string(),
            ratio: parse_field(path, line, "ratio", &row[1])?,
            failed_a: flag(line, &row[2])?,
            failed_b: flag(line, &row[3])?,
        });
    }
    Ok(Profile {
        entries,
        sentinel: SENTINEL,
    })
}

// SVG

/// Plot geometry. Entry `i` of `k` occupies the column
/// `[left + i·w/k, left + (i+1)·w/k]`; a ratio `r` is drawn as a bar from
/// the zero line at `top + h/2` to `top + h/2 − r·(h/2)/Y`, where the
/// half-range `Y` is the smallest integer ≥ 1 covering every plotted value,
/// capped at [`PLOT_CAP`]. Failed entries are drawn at `±PLOT_CAP` (clipped
/// to the axis) with a circle marker at the bar end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgLayout {
    pub width: f64,
    pub height: f64,
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
}

impl Default for SvgLayout {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 400.0,
            left: 60.0,
            right: 20.0,
            top: 20.0,
            bottom: 40.0,
        }
    }
}

impl SvgLayout {
    pub fn plot_width(&self) -> f64 {
        self.width - self.left - self.right
    }

    pub fn plot_height(&self) -> f64 {
        self.height - self.top - self.bottom
    }

    pub fn zero_y(&self) -> f64 {
        self.top + self.plot_height() / 2.0
    }
}

/// Value drawn for an entry: failures snap to the cap, everything is
/// clipped to `±PLOT_CAP`.
pub fn plotted_value(e: &ProfileEntry) -> f64 {
    let failed = e.failed_a || e.failed_b;
    let v = if failed && e.ratio != 0.0 {
        PLOT_CAP.copysign(e.ratio)
    } else {
        e.ratio
    };
    v.clamp(-PLOT_CAP, PLOT_CAP)
}

/// Half-range of the vertical axis for `profile`.
pub fn axis_range(profile: &Profile) -> f64 {
    let m = profile
        .entries
        .iter()
        .map(|e| plotted_value(e).abs())
        .fold(0.0, f64::max);
    m.ceil().clamp(1.0, PLOT_CAP)
}

pub fn profile_to_svg(profile: &Profile, title: &str) -> String {
    let lay = SvgLayout::default();
    let (pw, ph) = (lay.plot_width(), lay.plot_height());
    let y0 = lay.zero_y();
    let range = axis_range(profile);
    let scale = (ph / 2.0) / range;
    let k = profile.len();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        lay.width, lay.height, lay.width, lay.height
    );
    let _ = writeln!(s, "<title>{}</title>", xml_escape(title));
    let _ = writeln!(
        s,
        r#"<rect class="background" x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        lay.width, lay.height
    );
    if k > 0 {
        let col = pw / k as f64;
        let mut points = Vec::with_capacity(k);
        for (i, e) in profile.entries.iter().enumerate() {
            let v = plotted_value(e);
            let x = lay.left + i as f64 * col;
            let yv = y0 - v * scale;
            let class = if e.failed_a || e.failed_b { "bar failed" } else { "bar" };
            let _ = writeln!(
                s,
                r#"<rect class="{class}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="steelblue" fill-opacity="0.5"><title>{} {}</title></rect>"#,
                x,
                yv.min(y0),
                col,
                (yv - y0).abs(),
                xml_escape(&e.problem_id),
                e.ratio
            );
            points.push(format!("{:.3},{:.3}", x + col / 2.0, yv));
            if e.failed_a || e.failed_b {
                let _ = writeln!(
                    s,
                    r#"<circle class="failure" cx="{:.3}" cy="{:.3}" r="4" fill="firebrick"/>"#,
                    x + col / 2.0,
                    yv
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline class="profile" points="{}" fill="none" stroke="navy"/>"#,
            points.join(" ")
        );
    }
    // Axes last so they sit on top of the bars.
    let _ = writeln!(
        s,
        r#"<line class="axis zero" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black"/>"#,
        lay.left,
        y0,
        lay.left + pw,
        y0
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black"/>"#,
        lay.left,
        lay.top,
        lay.left,
        lay.top + ph
    );
    for v in [range, 0.0, -range] {
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{:.3}" y="{:.3}" text-anchor="end" font-size="12">{}</text>"#,
            lay.left - 6.0,
            y0 - v * scale + 4.0,
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="label" x="{:.3}" y="{:.3}" text-anchor="middle" font-size="12">problems, sorted by log2 ratio</text>"#,
        lay.left + pw / 2.0,
        lay.height - 12.0
    );
    s.push_str("</svg>\n");
    s
}

pub fn write_profile_svg(profile: &Profile, title: &str, path: &Path) -> Result<()> {
    fs::write(path, profile_to_svg(profile, title)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// Experiment grid

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    /// L-BFGS with forward differences.
    LbfgsFd,
    /// L-BFGS with central differences.
    LbfgsCd,
    /// Levenberg–Marquardt with a forward-difference Jacobian.
    LmFd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::LbfgsFd, SolverKind::LbfgsCd, SolverKind::LmFd];

    pub fn id(self) -> &'static str {
        match self {
            SolverKind::LbfgsFd => "lbfgs-fd",
            SolverKind::LbfgsCd => "lbfgs-cd",
            SolverKind::LmFd => "lm-fd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == s)
    }

    /// Whether the solver runs on the least-squares catalog.
    pub fn is_least_squares(self) -> bool {
        self == SolverKind::LmFd
    }

    /// Whether `problem` exists in the catalog this solver draws from.
    pub fn knows_problem(self, problem: &str) -> bool {
        if self.is_least_squares() {
            lookup_residual(problem).is_some()
        } else {
            lookup_smooth(problem).is_some()
        }
    }
}

/// Curvature handling for a grid cell; each solver maps it onto its own
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurvatureMode {
    /// Moré–Wild estimates (adaptive for L-BFGS, once at `x0` for LM).
    Mw,
    /// Noise-free per-iteration estimates: Hessian scheme `k` for L-BFGS,
    /// idealized second differences for LM (which ignores `k`).
    Idealized(u8),
    /// A constant curvature for every coordinate.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub solver: SolverKind,
    pub problem: String,
    pub sigma_f: f64,
    pub seed: u64,
    pub budget_multiplier: f64,
    pub curvature: CurvatureMode,
    /// Stop at `φ − φ* ≤ τ·max(1, |φ*|)` when given.
    pub gap_tau: Option<f64>,
}

/// Runs one grid cell with its own oracle and records the noise-free trace.
pub fn run_cell(cell: &Cell) -> Result<RunRecord> {
    if !(cell.budget_multiplier >= 1.0) {
        return invalid(format!("budget multiplier must be >= 1, got {}", cell.budget_multiplier));
    }
    let noise = NoiseModel::uniform(cell.sigma_f, cell.seed);
    let result = if cell.solver.is_least_squares() {
        let problem = lookup_residual(&cell.problem)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown problem {}", cell.problem)))?;
        let n = problem.n();
        let oracle = ResidualOracle::new(problem.clone(), noise);
        let config = LmConfig {
            sigma_f: cell.sigma_f,
            max_evals: Some(cell.budget_multiplier * n as f64),
            lipschitz_policy: match cell.curvature {
                CurvatureMode::Mw => LipschitzPolicy::InitialOnly,
                CurvatureMode::Idealized(_) => LipschitzPolicy::IdealizedPerIteration,
                CurvatureMode::Fixed(_) => LipschitzPolicy::Unit,
            },
            ..LmConfig::default()
        };
        let mut monitor = GapMonitor::residual(&oracle, cell.gap_tau);
        lm_minimize_monitored(&oracle, &problem.x0, &config, &mut monitor)?
    } else {
        let problem = lookup_smooth(&cell.problem)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown problem {}", cell.problem)))?;
        let n = problem.n();
        let oracle = NoisyOracle::new(problem.clone(), noise);
        let config = LbfgsConfig {
            scheme: if cell.solver == SolverKind::LbfgsCd {
                DifferenceScheme::Central
            } else {
                DifferenceScheme::Forward
            },
            sigma_f: cell.sigma_f,
            max_evals: Some((cell.budget_multiplier * n as f64).floor() as u64),
            lipschitz: match cell.curvature {
                CurvatureMode::Mw => LipschitzMode::MwComponent,
                CurvatureMode::Idealized(k) => LipschitzMode::Scheme(k),
                CurvatureMode::Fixed(v) => LipschitzMode::Fixed(v),
            },
            ..LbfgsConfig::default()
        };
        let mut monitor = GapMonitor::smooth(&oracle, cell.gap_tau);
        minimize_monitored(&oracle, &problem.x0, &config, &mut monitor)?
    };
    RunRecord::from_result(cell.solver.id(), &cell.problem, cell.sigma_f, cell.seed, &result)
}

/// Runs every cell on up to `jobs` threads. Results come back in cell
/// order regardless of scheduling.
pub fn run_grid(cells: &[Cell], jobs: usize) -> Result<Vec<Result<RunRecord>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(run_cell).collect()))
}

/// Optimal values of every catalog problem that has one, keyed by name.
/// Least-squares entries are keyed by the `lm-fd` view (½‖γ‖²).
pub fn phi_star_map(least_squares: bool) -> HashMap<String, f64> {
    use crate::problem::{catalog, CatalogEntry};
    let mut map = BTreeMap::new();
    for entry in catalog() {
        match entry {
            CatalogEntry::Smooth(p, _) if !least_squares => {
                if let Some(s) = p.phi_star {
                    map.insert(p.name.clone(), s);
                }
            }
            CatalogEntry::Residual(p, _) if least_squares => {
                if let Some(s) = p.phi_star {
                    map.insert(p.name.clone(), s);
                }
            }
            _ => {}
        }
    }
    map.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(problem: &str, evals: &[f64], phis: &[f64]) -> RunRecord {
        RunRecord {
            solver_id: "s".into(),
            problem_id: problem.into(),
            sigma_f: 0.0,
            seed: 0,
            trace: evals
                .iter()
                .zip(phis)
                .map(|(&e, &p)| TracePoint {
                    evals: e,
                    noisy_f: p,
                    true_phi: p,
                })
                .collect(),
            reason: Termination::Budget,
        }
    }

    #[test]
    fn gap_target_examples() {
        assert!(gap_target(3.0, 3.0, 1e-12));
        assert!(!gap_target(2e-6, 0.0, 1e-6));
        assert!(gap_target(-10.0 + 5e-6, -10.0, 1e-6));
    }

    #[test]
    fn relative_target_examples() {
        assert!(!relative_target(10.0, 0.0, 10.0, 0.5).unwrap());
        assert!(relative_target(1.0, 1.0, 10.0, 1e-9).unwrap());
        assert!(relative_target(0.05, 0.0, 10.0, 1e-2).unwrap());
        assert!(relative_target(1.0, 2.0, 2.0, 0.1).is_err());
    }

    #[test]
    fn evals_to_target_examples() {
        let r = rec("P", &[10.0, 20.0, 30.0, 40.0], &[5.0, 4.0, 1.0, 0.5]);
        assert_eq!(evals_to_target(&r, |_| true), 10.0);
        assert_eq!(evals_to_target(&r, |_| false), SENTINEL);
        assert_eq!(evals_to_target(&r, |t| t.true_phi <= 1.0), 30.0);
        assert_eq!(SENTINEL, 2f64.powi(40));
    }

    #[test]
    fn identical_and_doubled_profiles() {
        let a = vec![rec("P", &[1.0, 4.0], &[1.0, 0.0]), rec("Q", &[2.0, 6.0], &[1.0, 0.0])];
        let p = log_ratio_profile(&a, &a, |_, t| t.true_phi <= 0.0).unwrap();
        assert_eq!(p.ratios(), vec![0.0, 0.0]);
        let b: Vec<_> = a
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.trace.iter_mut().for_each(|t| t.evals *= 2.0);
                r
            })
            .collect();
        let p = log_ratio_profile(&b, &a, |_, t| t.true_phi <= 0.0).unwrap();
        assert_eq!(p.ratios(), vec![1.0, 1.0]);
    }

    #[test]
    fn unpaired_records_are_rejected() {
        let a = vec![rec("P", &[1.0], &[0.0])];
        let b = vec![rec("Q", &[1.0], &[0.0])];
        assert!(log_ratio_profile(&a, &b, |_, _| true).is_err());
        assert!(log_ratio_profile(&a, &[], |_, _| true).is_err());
    }

    #[test]
    fn failures_are_masked() {
        let a = vec![rec("P", &[1.0, 2.0], &[1.0, 1.0])];
        let b = vec![rec("P", &[1.0, 8.0], &[1.0, 0.0])];
        let p = log_ratio_profile(&a, &b, |_, t| t.true_phi <= 0.0).unwrap();
        assert_eq!(p.ratios(), vec![(SENTINEL / 8.0).log2()]);
        assert_eq!(p.failure_mask(), vec![true]);
        assert!(p.entries[0].failed_a && !p.entries[0].failed_b);
    }

    #[test]
    fn accuracy_profile_examples() {
        let stars: HashMap<String, f64> = [("P".to_string(), 1.0), ("Q".to_string(), 0.0)].into();
        let a = vec![rec("P", &[1.0], &[1.0]), rec("Q", &[1.0], &[1e-2])];
        let b = vec![rec("P", &[1.0], &[1.0]), rec("Q", &[1.0], &[1e-6])];
        let p = accuracy_profile(&a, &b, &stars).unwrap();
        assert_eq!(p.entries[0].problem_id, "P");
        assert_eq!(p.entries[0].ratio, 0.0);
        assert!((p.entries[1].ratio - 1e4f64.log2()).abs() < 1e-12);
        assert!((p.entries[1].ratio - 13.2877).abs() < 1e-4);
        // Undershoot below φ* clamps to the floor.
        let c = vec![rec("P", &[1.0], &[1.0 - 1e-3]), rec("Q", &[1.0], &[1e-16])];
        let p = accuracy_profile(&c, &b, &stars).unwrap();
        let q = p.entries.iter().find(|e| e.problem_id == "Q").unwrap();
        assert!((q.ratio - (1e-16f64 / 1e-6).log2()).abs() < 1e-12);
        let pp = p.entries.iter().find(|e| e.problem_id == "P").unwrap();
        assert_eq!(pp.ratio, 0.0);
        assert!(accuracy_profile(&a, &b, &HashMap::new()).is_err());
    }

    #[test]
    fn multi_seed_pairs_get_distinct_labels() {
        let mut a1 = rec("P", &[1.0], &[0.0]);
        let mut a2 = rec("P", &[2.0], &[0.0]);
        a1.seed = 1;
        a2.seed = 2;
        let p = log_ratio_profile(&[a1.clone(), a2.clone()], &[a2.clone(), a1.clone()], |_, _| true);
        // Seeds pair with seeds, so each run meets itself.
        let p = p.unwrap();
        assert_eq!(p.ratios(), vec![0.0, 0.0]);
        assert_ne!(p.entries[0].problem_id, p.entries[1].problem_id);
    }

    #[test]
    fn empty_runs_csv_is_header_only() {
        let bytes = runs_to_csv(&[]);
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "solver_id,problem_id,sigma_f,seed,evals,noisy_f,true_phi,reason\n"
        );
        assert_eq!(
            String::from_utf8(profile_to_csv(&Profile::new(vec![]))).unwrap(),
            "problem_id,ratio,failed_A,failed_B\n"
        );
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut r1 = rec("P", &[1.0, 2.5, 7.0], &[0.1 + 0.2, 1e-300, -3.0]);
        r1.sigma_f = 1e-5;
        r1.seed = 42;
        let r2 = rec("P", &[1.0, 3.0], &[f64::MAX, 0.0]);
        let records = vec![r1, r2];
        let path = dir.path().join("runs.csv");
        write_runs_csv(&records, &path).unwrap();
        assert_eq!(read_runs_csv(&path).unwrap(), records);

        let p = log_ratio_profile(&records[..1], &records[..1], |_, _| true).unwrap();
        let path = dir.path().join("profile.csv");
        write_profile_csv(&p, &path).unwrap();
        assert_eq!(read_profile_csv(&path).unwrap(), p);
    }

    #[test]
    fn reading_a_missing_file_names_the_path() {
        let err = read_runs_csv(Path::new("/nonexistent/runs.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/runs.csv"));
    }

    #[test]
    fn svg_of_empty_profile_has_axes_only() {
        let s = profile_to_svg(&Profile::new(vec![]), "empty");
        assert_eq!(s.matches("<line").count(), 2);
        assert!(!s.contains("class=\"bar"));
        assert!(!s.contains("<polyline"));
    }

    #[test]
    fn svg_of_zero_profile_is_flat() {
        let entries = (0..3)
            .map(|i| ProfileEntry {
                problem_id: format!("P{i}"),
                ratio: 0.0,
                failed_a: false,
                failed_b: false,
            })
            .collect();
        let s = profile_to_svg(&Profile::new(entries), "zeros");
        let lay = SvgLayout::default();
        let y0 = format!("{:.3}", lay.zero_y());
        let poly = s.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = poly.split('"').nth(3).unwrap();
        assert!(pts.split(' ').all(|p| p.ends_with(&format!(",{y0}"))));
    }

    #[test]
    fn record_validation() {
        assert!(rec("P", &[1.0, 2.0], &[0.0, 0.0]).validate().is_ok());
        assert!(rec("P", &[2.0, 2.0], &[0.0, 0.0]).validate().is_err());
        assert!(rec("P", &[], &[]).validate().is_err());
    }

    #[test]
    fn noiseless_cell_reaches_gap() {
        let cell = Cell {
            solver: SolverKind::LbfgsFd,
            problem: "ROSENBR".into(),
            sigma_f: 0.0,
            seed: 0,
            budget_multiplier: 500.0,
            curvature: CurvatureMode::Mw,
            gap_tau: Some(1e-6),
        };
        let r = run_cell(&cell).unwrap();
        assert_eq!(r.reason, Termination::Gap);
        let lm = Cell {
            solver: SolverKind::LmFd,
            ..cell
        };
        assert_eq!(run_cell(&lm).unwrap().reason, Termination::Gap);
    }
}
