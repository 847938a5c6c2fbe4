//! Command implementations behind the `fdnoise` binary.

pub mod spec;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fdnoise::bench::{
    accuracy_profile, gap_target, log_ratio_profile, phi_star_map, read_runs_csv, relative_target, run_grid,
    write_profile_csv, write_profile_svg, write_runs_csv, Profile, RunRecord, SolverKind,
};
use fdnoise::fdiff::{
    fd_gradient, full_gradient_noise_level, gradient_noise_level, interval, DifferenceScheme, IntervalRule,
};
use fdnoise::lipschitz::{estimate_component_lipschitz, MwParams};
use fdnoise::noise::{NoiseModel, NoisyOracle};
use fdnoise::problem::{catalog, lookup_residual, lookup_smooth, CatalogEntry, SmoothProblem};
use thiserror::Error;

pub use spec::ExperimentSpec;

/// Default root for timestamped output directories.
pub const DEFAULT_OUT_ROOT: &str = "fdnoise-out";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or spec; exit status 2.
    #[error("{0}")]
    Usage(String),
    /// Anything else that went wrong; exit status 1.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<fdnoise::Error> for CliError {
    fn from(e: fdnoise::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

/// Where a command writes its artifacts.
#[derive(Debug, Clone, Default)]
pub struct OutputOptions {
    /// Write into exactly this directory.
    pub out: Option<PathBuf>,
    /// Parent of a fresh timestamped directory when `out` is not given.
    pub out_root: Option<PathBuf>,
    /// Allow overwriting artifacts in `out`.
    pub force: bool,
}

/// Resolves and creates the output directory. An explicit directory that
/// already holds any of `artifacts` is refused unless `force` is set;
/// otherwise a new `<prefix>-<UTC timestamp>` directory is created.
pub fn prepare_output(opts: &OutputOptions, prefix: &str, artifacts: &[&str]) -> Result<PathBuf, CliError> {
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        if !opts.force {
            if let Some(existing) = artifacts.iter().map(|a| dir.join(a)).find(|p| p.exists()) {
                return Err(CliError::Usage(format!(
                    "{} already exists; pass --force to overwrite",
                    existing.display()
                )));
            }
        }
        return Ok(dir.clone());
    }
    let root = opts.out_root.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
    fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{prefix}-{stamp}");
    let mut dir = root.join(&base);
    let mut k = 2;
    // create_dir fails on an existing directory, so concurrent runs never share one
    loop {
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                dir = root.join(format!("{base}-{k}"));
                k += 1;
            }
            Err(e) => return Err(io_err(&dir, e)),
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub records: Vec<RunRecord>,
    /// One message per grid cell that raised an error.
    pub errors: Vec<String>,
}

pub fn read_spec(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    ExperimentSpec::parse(&text)
}

/// Executes the grid of `spec` and writes `runs.csv` (plus a copy of the
/// spec text when given). Cells that error are reported in the summary;
/// their records are omitted.
pub fn cmd_run(
    spec: &ExperimentSpec,
    spec_text: Option<&str>,
    jobs: usize,
    output: &OutputOptions,
) -> Result<RunSummary, CliError> {
    let mut output = output.clone();
    if output.out.is_none() {
        output.out = spec.output.clone();
    }
    let dir = prepare_output(&output, "run", &["runs.csv"])?;
    let cells = spec.cells();
    let results = run_grid(&cells, jobs)?;
    let mut records = Vec::with_capacity(cells.len());
    let mut errors = Vec::new();
    for (cell, r) in cells.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => errors.push(format!(
                "{} on {} (sigma_f = {}, seed = {}): {e}",
                cell.solver.id(),
                cell.problem,
                cell.sigma_f,
                cell.seed
            )),
        }
    }
    write_runs_csv(&records, &dir.join("runs.csv"))?;
    if let Some(text) = spec_text {
        let path = dir.join("spec.txt");
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }
    Ok(RunSummary { dir, records, errors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMode {
    /// Evaluations needed to reach the target.
    Evals,
    /// Best optimality gap reached.
    Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `φ − φ* ≤ τ·max(1, |φ*|)` with the catalog optimum.
    Gap,
    /// `φ − φ_b ≤ τ·(φ_0 − φ_b)` with `φ_b` the best value either run reached.
    Relative,
}

#[derive(Debug, Clone)]
pub struct ProfileRequest {
    pub runs_a: PathBuf,
    pub runs_b: PathBuf,
    pub solver_a: Option<String>,
    pub solver_b: Option<String>,
    pub mode: ProfileMode,
    pub target: Target,
    pub tau: f64,
}

fn runs_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("runs.csv")
    } else {
        p.to_path_buf()
    }
}

fn load_side(path: &Path, solver: Option<&str>, flag: &str) -> Result<Vec<RunRecord>, CliError> {
    let path = runs_path(path);
    if !path.exists() {
        return Err(CliError::Usage(format!("{}: no such file", path.display())));
    }
    let records = read_runs_csv(&path).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut ids: Vec<&str> = records.iter().map(|r| r.solver_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let chosen = match solver {
        Some(s) => s.to_string(),
        None if ids.len() <= 1 => return Ok(records),
        None => {
            return Err(CliError::Usage(format!(
                "{} holds runs of several solvers ({}); pick one with {flag}",
                path.display(),
                ids.join(", ")
            )))
        }
    };
    let picked: Vec<RunRecord> = records.into_iter().filter(|r| r.solver_id == chosen).collect();
    if picked.is_empty() {
        return Err(CliError::Usage(format!("{}: no runs of solver `{chosen}`", path.display())));
    }
    Ok(picked)
}

/// Catalog optima keyed by problem, looked up in the catalog the run's
/// solver draws from.
struct Optima {
    smooth: HashMap<String, f64>,
    least_squares: HashMap<String, f64>,
}

impl Optima {
    fn new() -> Self {
        Self {
            smooth: phi_star_map(false),
            least_squares: phi_star_map(true),
        }
    }

    fn get(&self, r: &RunRecord) -> Option<f64> {
        let ls = SolverKind::parse(&r.solver_id).is_some_and(SolverKind::is_least_squares);
        let map = if ls { &self.least_squares } else { &self.smooth };
        map.get(&r.problem_id).copied()
    }
}

fn key(r: &RunRecord) -> (String, u64, u64) {
    (r.problem_id.clone(), r.sigma_f.to_bits(), r.seed)
}

/// Computes the profile of A against B.
pub fn compute_profile(req: &ProfileRequest) -> Result<Profile, CliError> {
    if req.tau.is_nan() || req.tau <= 0.0 {
        return Err(CliError::Usage(format!("--tau must be positive, got {}", req.tau)));
    }
    let a = load_side(&req.runs_a, req.solver_a.as_deref(), "--solver-a")?;
    let b = load_side(&req.runs_b, req.solver_b.as_deref(), "--solver-b")?;
    if a.len() != b.len() {
        return Err(CliError::Usage(format!(
            "run sets do not pair: {} runs in A, {} in B",
            a.len(),
            b.len()
        )));
    }
    let optima = Optima::new();
    let mut stars: HashMap<(String, u64, u64), f64> = HashMap::new();
    for r in a.iter().chain(&b) {
        let star = optima
            .get(r)
            .ok_or_else(|| CliError::Usage(format!("no optimal value known for {}", r.problem_id)))?;
        stars.insert(key(r), star);
    }
    let usage = |e: fdnoise::Error| CliError::Usage(e.to_string());
    match (req.mode, req.target) {
        (ProfileMode::Accuracy, _) => {
            let by_problem: HashMap<String, f64> =
                stars.iter().map(|((p, _, _), v)| (p.clone(), *v)).collect();
            accuracy_profile(&a, &b, &by_problem).map_err(usage)
        }
        (ProfileMode::Evals, Target::Gap) => {
            log_ratio_profile(&a, &b, |r, t| gap_target(t.true_phi, stars[&key(r)], req.tau)).map_err(usage)
        }
        (ProfileMode::Evals, Target::Relative) => {
            let mut baseline: HashMap<(String, u64, u64), f64> = HashMap::new();
            for r in a.iter().chain(&b) {
                let e = baseline.entry(key(r)).or_insert(f64::INFINITY);
                *e = e.min(r.best_phi());
            }
            log_ratio_profile(&a, &b, |r, t| {
                // A run that starts at the baseline has nothing left to do.
                relative_target(t.true_phi, baseline[&key(r)], r.initial_phi(), req.tau).unwrap_or(true)
            })
            .map_err(usage)
        }
    }
}

/// Computes the profile and writes `profile.csv` and `profile.svg`.
pub fn cmd_profile(req: &ProfileRequest, output: &OutputOptions) -> Result<(PathBuf, Profile), CliError> {
    let profile = compute_profile(req)?;
    let dir = prepare_output(output, "profile", &["profile.csv", "profile.svg"])?;
    write_profile_csv(&profile, &dir.join("profile.csv"))?;
    let title = format!(
        "{} profile: {} vs {}",
        match req.mode {
            ProfileMode::Evals => "evaluations",
            ProfileMode::Accuracy => "accuracy",
        },
        req.solver_a.as_deref().unwrap_or("A"),
        req.solver_b.as_deref().unwrap_or("B"),
    );
    write_profile_svg(&profile, &title, &dir.join("profile.svg"))?;
    Ok((dir, profile))
}

/// Lists catalog problems, one per line.
pub fn cmd_problems_list() -> String {
    let mut s = String::new();
    for e in catalog() {
        let (kind, n, star) = match &e {
            CatalogEntry::Smooth(p, _) => ("smooth", p.n(), p.phi_star),
            CatalogEntry::Residual(p, _) => ("least-squares", p.n(), p.phi_star),
        };
        let star = star.map_or_else(|| "unknown".to_string(), |v| format!("{v:e}"));
        let _ = writeln!(s, "{:<10} {:<14} n={:<3} phi*={star}", e.name(), kind, n);
    }
    s
}

fn probe_problem(name: &str) -> Option<SmoothProblem> {
    lookup_smooth(name).or_else(|| {
        lookup_residual(name).map(|p| {
            let star = p.phi_star.map(|s| 2.0 * s);
            p.to_sum_of_squares(star)
        })
    })
}

/// Per-coordinate diagnostics at `x` (default `x0`): Moré–Wild curvature
/// estimates, the analytic curvature when available, the chosen forward
/// intervals, the predicted gradient error, and the actual error of the
/// difference gradient against the analytic one.
pub fn cmd_probe(name: &str, x: Option<&[f64]>, sigma_f: f64, seed: u64) -> Result<String, CliError> {
    let problem = probe_problem(name).ok_or_else(|| CliError::Usage(format!("unknown problem `{name}`")))?;
    if !(sigma_f >= 0.0 && sigma_f.is_finite()) {
        return Err(CliError::Usage(format!("--sigma must be finite and >= 0, got {sigma_f}")));
    }
    let x = x.map_or_else(|| problem.x0.clone(), <[f64]>::to_vec);
    if x.len() != problem.n() {
        return Err(CliError::Usage(format!(
            "--x has {} entries, {} needs {}",
            x.len(),
            problem.name,
            problem.n()
        )));
    }
    let n = x.len();
    let oracle = NoisyOracle::new(problem.clone(), NoiseModel::uniform(sigma_f, seed));
    let scheme = DifferenceScheme::Forward;
    let mw = estimate_component_lipschitz(&oracle, &x, None, sigma_f, &MwParams::default())?;
    let rule = if sigma_f > 0.0 {
        IntervalRule::NoiseOptimal {
            sigma_f,
            curvature: mw.values.clone(),
        }
    } else {
        IntervalRule::MachineEps
    };

    let mut out = String::new();
    let _ = writeln!(out, "problem {}  n = {n}  sigma_f = {sigma_f:e}  seed = {seed}", problem.name);
    let _ = writeln!(out, "f(x) = {:.6e}", problem.evaluate(&x)?);
    let _ = writeln!(
        out,
        "interval rule: {}",
        if sigma_f > 0.0 { "noise-optimal from MW estimates" } else { "machine precision" }
    );
    let _ = writeln!(
        out,
        "{:>5} {:>13} {:>12} {:>7} {:>13} {:>12} {:>12} {:>12}",
        "coord", "x_i", "L_mw", "mw", "L_analytic", "h_analytic", "h_i", "sigma_g_i"
    );
    let mut levels = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let analytic = problem.hessian_quadform(&x, &e)?;
        let h_analytic = match (analytic, sigma_f > 0.0) {
            (Some(l), true) if l != 0.0 => fdnoise::fdiff::noise_optimal_interval(sigma_f, l.abs(), scheme)
                .map_or_else(|_| "-".to_string(), |h| format!("{h:.5e}")),
            _ => "-".to_string(),
        };
        let h = interval(x[i], &rule, scheme, i)?;
        let level = if sigma_f > 0.0 {
            gradient_noise_level(sigma_f, mw.values[i], scheme)
        } else {
            0.0
        };
        levels.push(level);
        let _ = writeln!(
            out,
            "{:>5} {:>13.6e} {:>12.5e} {:>7} {:>13} {:>12} {:>12.5e} {:>12.5e}",
            i + 1,
            x[i],
            mw.values[i],
            if mw.floor_applied[i] { "failed" } else { "ok" },
            analytic.map_or_else(|| "-".to_string(), |l| format!("{l:.5e}")),
            h_analytic,
            h,
            level
        );
    }
    let _ = writeln!(out, "MW evaluations: {}", mw.evals_spent);
    let _ = writeln!(out, "predicted sigma_g = {:.5e}", full_gradient_noise_level(&levels));

    let fd = fd_gradient(&oracle, &x, scheme, &rule)?;
    match problem.gradient(&x)? {
        Some(g) => {
            let _ = writeln!(out, "{:>5} {:>14} {:>14} {:>12}", "coord", "g_fd", "g_analytic", "abs_error");
            let mut worst: f64 = 0.0;
            for (i, (gf, ga)) in fd.g.iter().zip(&g).enumerate() {
                let err = (gf - ga).abs();
                worst = worst.max(err);
                let _ = writeln!(out, "{:>5} {:>14.6e} {:>14.6e} {:>12.4e}", i + 1, gf, ga, err);
            }
            let _ = writeln!(out, "max gradient error = {worst:.4e}");
        }
        None => {
            let _ = writeln!(out, "no analytic gradient; fd gradient = {:?}", fd.g);
        }
    }
    Ok(out)
}
