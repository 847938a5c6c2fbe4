//! Curvature bounds for choosing differencing intervals.
//!
//! Second-derivative bounds `L` come from the Moré–Wild heuristic applied to
//! second differences `Δ(t) = f(x+tp) − 2f(x) + f(x−tp)`, or from one of the
//! Hessian-based schemes 1–9 when the problem exposes `pᵀ∇²φ(x)p`. Every
//! estimate is floored at [`FLOOR`].

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{dot, norm};
use crate::noise::NoisyOracle;
use crate::problem::{ResidualProblem, SmoothProblem};
use crate::EPS_M;

/// Lower bound applied to every curvature estimate.
pub const FLOOR: f64 = 0.1;

/// Step length below which Procedure I re-estimates `L`.
pub const REESTIMATE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwParams {
    pub tau1: f64,
    pub tau2: f64,
    /// Maximum number of probe pairs `f(x ± tp)`.
    pub max_iters: usize,
    /// Factor applied to `t` while no bracket is known.
    pub growth: f64,
}

impl Default for MwParams {
    fn default() -> Self {
        Self {
            tau1: 100.0,
            tau2: 0.1,
            max_iters: 11,
            growth: 10.0,
        }
    }
}

impl MwParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 1.0) || !(self.tau2 > 0.0 && self.tau2 < 1.0) {
            return invalid(format!(
                "need tau1 > 1 and 0 < tau2 < 1, got tau1 = {}, tau2 = {}",
                self.tau1, self.tau2
            ));
        }
        if self.max_iters == 0 || !(self.growth > 1.0) {
            return invalid("need max_iters >= 1 and growth > 1");
        }
        Ok(())
    }

    /// Worst-case oracle calls for one componentwise estimate in dimension `n`.
    pub fn component_cost_bound(&self, n: usize) -> u64 {
        (2 * self.max_iters * n + 1) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureOrder {
    Second,
    Third,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    MwComponent,
    /// Hessian-based scheme 1–9.
    Scheme(u8),
    Fixed,
    /// Changes in the second derivative, for central differences.
    ThirdDerivative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimate {
    pub values: Vec<f64>,
    pub order: CurvatureOrder,
    pub method: EstimateMethod,
    /// Oracle calls spent producing the estimate.
    pub evals_spent: u64,
    pub floor_applied: Vec<bool>,
}

impl LipschitzEstimate {
    /// A constant vector, floored.
    pub fn fixed(n: usize, value: f64) -> Self {
        let v = value.max(FLOOR);
        Self {
            values: vec![v; n],
            order: CurvatureOrder::Second,
            method: EstimateMethod::Fixed,
            evals_spent: 0,
            floor_applied: vec![value < FLOOR; n],
        }
    }

    fn from_raw(raw: &[f64], order: CurvatureOrder, method: EstimateMethod, evals: u64) -> Self {
        Self {
            values: raw.iter().map(|v| v.max(FLOOR)).collect(),
            order,
            method,
            evals_spent: evals,
            floor_applied: raw.iter().map(|v| !(*v >= FLOOR)).collect(),
        }
    }
}

/// `‖L‖₂/√n`, the curvature used along line-search directions.
pub fn directional_curvature(est: &LipschitzEstimate) -> f64 {
    norm(&est.values) / (est.values.len() as f64).sqrt()
}

/// `f(x+tp) − 2f(x) + f(x−tp)`; three oracle calls.
pub fn second_difference(oracle: &NoisyOracle, x: &[f64], p: &[f64], t: f64) -> Result<f64> {
    check_dim(oracle.n(), x.len())?;
    check_dim(oracle.n(), p.len())?;
    if !(t > 0.0) {
        return invalid(format!("probe width must be positive, got {t}"));
    }
    if (norm(p) - 1.0).abs() > 1e-12 {
        return invalid("probe direction must have unit length");
    }
    let pts = [shift(x, p, t), x.to_vec(), shift(x, p, -t)];
    let v = oracle.noisy_values(&pts)?;
    Ok(v[0] - 2.0 * v[1] + v[2])
}

fn shift(x: &[f64], p: &[f64], t: f64) -> Vec<f64> {
    crate::linalg::step(x, t, p)
}

/// Values observed at one probe width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwProbe {
    pub t: f64,
    pub f0: f64,
    pub f_plus: f64,
    pub f_minus: f64,
}

impl MwProbe {
    pub fn delta(&self) -> f64 {
        self.f_plus - 2.0 * self.f0 + self.f_minus
    }

    /// `|Δ(t)| ≥ τ₁·ε_f`: the difference is not dominated by noise.
    pub fn large_enough(&self, eps_f: f64, tau1: f64) -> bool {
        self.delta().abs() >= tau1 * eps_f
    }

    /// `|f(x ± tp) − f(x)| ≤ τ₂·max(|f(x)|, |f(x ± tp)|)` for both signs.
    pub fn small_enough(&self, tau2: f64) -> bool {
        [self.f_plus, self.f_minus]
            .iter()
            .all(|&f| (f - self.f0).abs() <= tau2 * self.f0.abs().max(f.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MwOutcome {
    /// Both conditions hold at `probe.t`; `estimate = max(0.1, |Δ|/t²)`.
    Success { estimate: f64, probe: MwProbe },
    Failure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwResult {
    pub outcome: MwOutcome,
    /// Every probe in the order taken.
    pub probes: Vec<MwProbe>,
    pub eps_f: f64,
    pub evals: u64,
}

impl MwResult {
    pub fn estimate(&self) -> Option<f64> {
        match self.outcome {
            MwOutcome::Success { estimate, .. } => Some(estimate),
            MwOutcome::Failure => None,
        }
    }
}

/// Error scale of the function values in the first condition.
pub fn error_scale(sigma_f: f64, f0: f64) -> f64 {
    if sigma_f > 0.0 {
        sigma_f
    } else {
        EPS_M * f0.abs().max(1.0)
    }
}

/// Initial probe width.
pub fn initial_width(sigma_f: f64, x: &[f64], p: &[f64]) -> f64 {
    if sigma_f > 0.0 {
        sigma_f.powf(0.25) * dot(x, p).abs().max(1.0)
    } else {
        EPS_M.powf(0.25)
    }
}

/// Moré–Wild search for a width `t` with a trustworthy second difference.
///
/// `eval_pair` evaluates the (noisy) function at `x + tp` and `x − tp`;
/// `f0` is the function at `x`. The width grows while `Δ(t)` is too small
/// and shrinks while the values change too much; once both failure kinds have
/// been seen the search bisects geometrically between them. A width failing
/// both conditions ends the search.
pub fn mw_search(
    mut eval_pair: impl FnMut(&[Vec<f64>; 2]) -> Result<[f64; 2]>,
    x: &[f64],
    p: &[f64],
    f0: f64,
    sigma_f: f64,
    params: &MwParams,
) -> Result<(MwOutcome, Vec<MwProbe>)> {
    params.validate()?;
    let eps_f = error_scale(sigma_f, f0);
    let mut t = initial_width(sigma_f, x, p);
    let (mut too_small, mut too_large): (Option<f64>, Option<f64>) = (None, None);
    let mut probes = Vec::new();
    for _ in 0..params.max_iters {
        let [f_plus, f_minus] = eval_pair(&[shift(x, p, t), shift(x, p, -t)])?;
        let probe = MwProbe {
            t,
            f0,
            f_plus,
            f_minus,
        };
        probes.push(probe);
        let big = probe.large_enough(eps_f, params.tau1);
        let small = probe.small_enough(params.tau2);
        match (big, small) {
            (true, true) => {
                let estimate = (probe.delta().abs() / (t * t)).max(FLOOR);
                return Ok((MwOutcome::Success { estimate, probe }, probes));
            }
            (false, false) => break,
            (false, true) => {
                too_small = Some(t);
                t = match too_large {
                    Some(hi) => (t * hi).sqrt(),
                    None => t * params.growth,
                };
            }
            (true, false) => {
                too_large = Some(t);
                t = match too_small {
                    Some(lo) => (t * lo).sqrt(),
                    None => t / params.growth,
                };
            }
        }
        if !t.is_finite() || t <= 0.0 {
            break;
        }
    }
    Ok((MwOutcome::Failure, probes))
}

/// Moré–Wild estimate of the second derivative of `f` along unit `p`.
pub fn mw_estimate(
    oracle: &NoisyOracle,
    x: &[f64],
    p: &[f64],
    sigma_f: f64,
    params: &MwParams,
) -> Result<MwResult> {
    check_dim(oracle.n(), x.len())?;
    check_dim(oracle.n(), p.len())?;
    let f0 = oracle.noisy_value(x)?;
    let mut result = mw_estimate_with_base(oracle, x, f0, p, sigma_f, params)?;
    result.evals += 1;
    Ok(result)
}

fn mw_estimate_with_base(
    oracle: &NoisyOracle,
    x: &[f64],
    f0: f64,
    p: &[f64],
    sigma_f: f64,
    params: &MwParams,
) -> Result<MwResult> {
    let pair = |pts: &[Vec<f64>; 2]| -> Result<[f64; 2]> {
        let v = oracle.noisy_values(pts)?;
        Ok([v[0], v[1]])
    };
    let (outcome, probes) = mw_search(pair, x, p, f0, sigma_f, params)?;
    Ok(MwResult {
        outcome,
        evals: 2 * probes.len() as u64,
        probes,
        eps_f: error_scale(sigma_f, f0),
    })
}

/// Moré–Wild estimate along every coordinate direction, floored at 0.1 on
/// failure. `f_x`, when given, is reused as the base value.
pub fn estimate_component_lipschitz(
    oracle: &NoisyOracle,
    x: &[f64],
    f_x: Option<f64>,
    sigma_f: f64,
    params: &MwParams,
) -> Result<LipschitzEstimate> {
    check_dim(oracle.n(), x.len())?;
    let (f0, mut evals) = match f_x {
        Some(f) => (f, 0),
        None => (oracle.noisy_value(x)?, 1),
    };
    let n = x.len();
    let mut raw = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let r = mw_estimate_with_base(oracle, x, f0, &e, sigma_f, params)?;
        evals += r.evals;
        // failure enters as 0 and is floored below
        raw.push(r.estimate().unwrap_or(0.0));
    }
    let mut est = LipschitzEstimate::from_raw(&raw, CurvatureOrder::Second, EstimateMethod::MwComponent, evals);
    // a successful estimate clipped at the floor is not a failure
    for (flag, r) in est.floor_applied.iter_mut().zip(&raw) {
        *flag = *r == 0.0;
    }
    Ok(est)
}

/// What re-estimation does with coordinates where the heuristic fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReestimateFailure {
    /// Store the floor, as on the first estimate.
    #[default]
    Floor,
    /// Keep the coordinate's previous estimate.
    KeepPrevious,
}

/// Curvature state owned by a line-search solver.
#[derive(Debug, Clone)]
pub struct AdaptiveState {
    pub current: Option<LipschitzEstimate>,
    /// Step length of the most recent line search (0 after a failure).
    pub last_alpha: f64,
    pub reestimate_threshold: f64,
    pub on_failure: ReestimateFailure,
}

impl Default for AdaptiveState {
    fn default() -> Self {
        Self {
            current: None,
            last_alpha: 1.0,
            reestimate_threshold: REESTIMATE_THRESHOLD,
            on_failure: ReestimateFailure::Floor,
        }
    }
}

impl AdaptiveState {
    pub fn with_policy(on_failure: ReestimateFailure) -> Self {
        Self {
            on_failure,
            ..Self::default()
        }
    }

    /// True when the next call to [`AdaptiveState::maybe_reestimate`] would
    /// estimate.
    pub fn due(&self) -> bool {
        self.current.is_none() || self.last_alpha < self.reestimate_threshold
    }

    pub fn record_alpha(&mut self, alpha: f64) {
        self.last_alpha = alpha;
    }

    /// Estimates on first use and whenever the last step was shorter than
    /// the threshold. Returns the oracle calls spent (0 when unchanged).
    pub fn maybe_reestimate(
        &mut self,
        oracle: &NoisyOracle,
        x: &[f64],
        f_x: Option<f64>,
        sigma_f: f64,
        params: &MwParams,
    ) -> Result<u64> {
        if !self.due() {
            return Ok(0);
        }
        let mut est = estimate_component_lipschitz(oracle, x, f_x, sigma_f, params)?;
        if let (ReestimateFailure::KeepPrevious, Some(prev)) = (self.on_failure, &self.current) {
            for i in 0..est.values.len() {
                if est.floor_applied[i] {
                    est.values[i] = prev.values[i];
                    est.floor_applied[i] = prev.floor_applied[i];
                }
            }
        }
        let spent = est.evals_spent;
        self.current = Some(est);
        // the trigger is consumed until the next short step
        self.last_alpha = 1.0;
        Ok(spent)
    }
}

/// Whether scheme `k` is recomputed at every differencing point.
pub fn scheme_is_dynamic(k: u8) -> bool {
    k >= 6
}

fn require_hessian(problem: &SmoothProblem) -> Result<()> {
    if problem.has_hessian() {
        Ok(())
    } else {
        Err(Error::MissingCapability {
            problem: problem.name.clone(),
            capability: "hessian_quadform",
        })
    }
}

fn quadform(problem: &SmoothProblem, x: &[f64], p: &[f64]) -> Result<f64> {
    problem.hessian_quadform(x, p)?.ok_or_else(|| Error::MissingCapability {
        problem: problem.name.clone(),
        capability: "hessian_quadform",
    })
}

/// Diagonal of `∇²φ(x)` through the quadratic-form hook.
pub fn hessian_diagonal(problem: &SmoothProblem, x: &[f64]) -> Result<Vec<f64>> {
    let n = problem.n();
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            quadform(problem, x, &e)
        })
        .collect()
}

/// `‖∇²φ(x)‖₂` by 30 power-iteration steps from `(1, …, 1)/√n`. Products
/// `∇²φ·v` are recovered from quadratic forms by polarization.
pub fn hessian_spectral_norm(problem: &SmoothProblem, x: &[f64]) -> Result<f64> {
    let n = problem.n();
    let diag = hessian_diagonal(problem, x)?;
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut estimate = 0.0;
    for _ in 0..30 {
        let qv = quadform(problem, x, &v)?;
        let mut hv = vec![0.0; n];
        for i in 0..n {
            let mut w = v.clone();
            w[i] += 1.0;
            hv[i] = 0.5 * (quadform(problem, x, &w)? - qv - diag[i]);
        }
        estimate = norm(&hv);
        if estimate == 0.0 || !estimate.is_finite() {
            break;
        }
        v = hv.iter().map(|c| c / estimate).collect();
    }
    Ok(estimate)
}

pub fn mean_abs(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64
}

pub fn root_mean_square(values: &[f64]) -> f64 {
    norm(values) / (values.len() as f64).sqrt()
}

/// Hessian-based scheme `k ∈ 1..=9` evaluated at `x`.
///
/// Schemes 1–5 are meant to be evaluated once at the starting point and 6–9
/// at every differencing point; the caller decides where to evaluate.
pub fn estimate_scheme(scheme: u8, problem: &SmoothProblem, x: &[f64]) -> Result<LipschitzEstimate> {
    check_dim(problem.n(), x.len())?;
    let n = problem.n();
    let method = EstimateMethod::Scheme(scheme);
    let uniform = |v: f64| LipschitzEstimate::from_raw(&vec![v; n], CurvatureOrder::Second, method, 0);
    match scheme {
        1 => Ok(uniform(1.0)),
        2 | 6 => {
            require_hessian(problem)?;
            Ok(uniform(hessian_spectral_norm(problem, x)?))
        }
        3 | 7 => Ok(uniform(mean_abs(&hessian_diagonal(problem, x)?))),
        4 | 8 => Ok(uniform(root_mean_square(&hessian_diagonal(problem, x)?))),
        5 | 9 => {
            let d: Vec<f64> = hessian_diagonal(problem, x)?.iter().map(|v| v.abs()).collect();
            Ok(LipschitzEstimate::from_raw(&d, CurvatureOrder::Second, method, 0))
        }
        _ => invalid(format!("scheme must be in 1..=9, got {scheme}")),
    }
}

/// Curvature for a directional derivative along `p` at `x` under scheme `k`.
/// Scheme 9 uses `|pᵀ∇²φ(x)p|/‖p‖²`; the others use `‖L‖₂/√n` of `est`.
pub fn scheme_directional(
    scheme: u8,
    problem: &SmoothProblem,
    x: &[f64],
    p: &[f64],
    est: &LipschitzEstimate,
) -> Result<f64> {
    if scheme == 9 {
        let pp = dot(p, p);
        if !(pp > 0.0) {
            return invalid("direction must be nonzero");
        }
        Ok((quadform(problem, x, p)?.abs() / pp).max(FLOOR))
    } else {
        Ok(directional_curvature(est))
    }
}

/// Third-derivative bound along `p` from a forward difference of Hessian
/// quadratic forms with step `√ε_M`; floored at 0.1. Not charged to any
/// oracle.
pub fn third_derivative_estimate(problem: &SmoothProblem, x: &[f64], p: &[f64]) -> Result<f64> {
    check_dim(problem.n(), p.len())?;
    let pn = norm(p);
    if !(pn > 0.0) {
        return invalid("direction must be nonzero");
    }
    let hh = EPS_M.sqrt();
    let xs: Vec<f64> = x.iter().zip(p).map(|(a, b)| a + hh * b / pn).collect();
    let diff = quadform(problem, &xs, p)? - quadform(problem, x, p)?;
    Ok((diff.abs() / (hh * pn * pn)).max(FLOOR))
}

/// Third-derivative bounds along each coordinate.
pub fn third_derivative_components(problem: &SmoothProblem, x: &[f64]) -> Result<LipschitzEstimate> {
    let n = problem.n();
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        values.push(third_derivative_estimate(problem, x, &e)?);
    }
    let floor_applied = values.iter().map(|v| *v == FLOOR).collect();
    Ok(LipschitzEstimate {
        values,
        order: CurvatureOrder::Third,
        method: EstimateMethod::ThirdDerivative,
        evals_spent: 0,
        floor_applied,
    })
}

/// Per-entry curvature `|γ_i(x+he_j) + γ_i(x−he_j) − 2γ_i(x)|/h²` with
/// `h = ε_M^{1/4}`, from noise-free residuals. Unfloored.
pub fn idealized_residual_lipschitz(problem: &ResidualProblem, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_dim(problem.n(), x.len())?;
    let h = EPS_M.powf(0.25);
    let gamma = problem.residuals();
    let n = problem.n();
    Ok((0..problem.m())
        .map(|i| {
            let g0 = gamma.component(x, i);
            (0..n)
                .map(|j| {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[j] += h;
                    xm[j] -= h;
                    (gamma.component(&xp, i) + gamma.component(&xm, i) - 2.0 * g0).abs() / (h * h)
                })
                .collect()
        })
        .collect())
}

/// Applies [`FLOOR`] entrywise.
pub fn floor_matrix(l: &mut [Vec<f64>]) {
    for v in l.iter_mut().flatten() {
        *v = v.max(FLOOR);
    }
}
