//! Levenberg–Marquardt trust-region method for `min ½‖r(x)‖²`.
//!
//! The Jacobian is differenced entry by entry, `Ĵ_ij = (r_i(x + H_ij e_j) −
//! r_i(x))/H_ij`, with `H_ij = 8^{1/4}·√(σ_f/L_ij)` under noise and
//! `max(1, |x_j|)·√ε_M` otherwise. Each step minimizes the Gauss–Newton model
//! `gᵀs + ½sᵀHs` (`g = Ĵᵀr`, `H = ĴᵀĴ`) over `‖s‖ ≤ Δ`.
//!
//! Evaluation units follow the least-squares convention: `m` component
//! evaluations make one unit.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{check_dim, invalid, Result};
use crate::fdiff::{fd_jacobian_with_base, machine_eps_interval, noise_optimal_interval, DifferenceScheme};
use crate::linalg::{dot, norm};
use crate::lipschitz::{idealized_residual_lipschitz, mw_search, MwOutcome, MwParams};
use crate::noise::ResidualOracle;
use crate::solver::{record_iterate, IterationRecord, Monitor, NullMonitor, SolverResult, Termination};
use crate::EPS_M;

/// Where the per-entry curvature `L_ij` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzPolicy {
    /// Moré–Wild for every pair `(i, j)` at the starting point, charged to
    /// the budget; failures store 1.
    InitialOnly,
    /// Second differences of the noise-free residuals at every iterate,
    /// uncharged.
    IdealizedPerIteration,
    /// `L_ij = 1`.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmConfig {
    pub delta0: f64,
    pub eta: f64,
    pub expand: f64,
    pub shrink: f64,
    /// Budget in evaluation units; `None` means 500·n.
    pub max_evals: Option<f64>,
    pub lipschitz_policy: LipschitzPolicy,
    pub sigma_f: f64,
    pub min_radius: f64,
    pub mw: MwParams,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            eta: 1e-4,
            expand: 2.0,
            shrink: 0.25,
            max_evals: None,
            lipschitz_policy: LipschitzPolicy::InitialOnly,
            sigma_f: 0.0,
            min_radius: 1e-8,
            mw: MwParams::default(),
        }
    }
}

impl LmConfig {
    pub fn budget(&self, n: usize) -> f64 {
        self.max_evals.unwrap_or(500.0 * n as f64)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return invalid(format!("need 0 < eta < 1, got {}", self.eta));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0 && self.expand > 1.0) {
            return invalid("need 0 < shrink < 1 < expand");
        }
        if !(self.delta0 > 0.0) || !(self.min_radius > 0.0) {
            return invalid("trust radii must be positive");
        }
        if !(self.sigma_f >= 0.0) {
            return invalid(format!("noise level must be nonnegative, got {}", self.sigma_f));
        }
        if self.budget(n) < (n + 1) as f64 {
            return invalid(format!("budget {} cannot cover one Jacobian ({} units)", self.budget(n), n + 1));
        }
        self.mw.validate()
    }
}

/// Gauss–Newton model `gᵀs + ½sᵀHs`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussNewtonModel {
    pub g: Vec<f64>,
    /// Row-major `n×n`.
    pub h: Vec<Vec<f64>>,
}

impl GaussNewtonModel {
    /// Model change `gᵀs + ½sᵀHs`.
    pub fn change(&self, s: &[f64]) -> f64 {
        let hs: Vec<f64> = self.h.iter().map(|row| dot(row, s)).collect();
        dot(&self.g, s) + 0.5 * dot(s, &hs)
    }

    fn matrices(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.g.len();
        (
            DMatrix::from_fn(n, n, |i, j| self.h[i][j]),
            DVector::from_column_slice(&self.g),
        )
    }
}

/// `g = Ĵᵀr`, `H = ĴᵀĴ`.
pub fn build_model(jac: &[Vec<f64>], r: &[f64]) -> Result<GaussNewtonModel> {
    check_dim(jac.len(), r.len())?;
    let n = jac.first().map_or(0, Vec::len);
    if n == 0 {
        return invalid("Jacobian has no columns");
    }
    for row in jac {
        check_dim(n, row.len())?;
    }
    let j = DMatrix::from_fn(jac.len(), n, |i, k| jac[i][k]);
    let g = j.transpose() * DVector::from_column_slice(r);
    let h = j.transpose() * &j;
    Ok(GaussNewtonModel {
        g: g.iter().copied().collect(),
        h: (0..n).map(|i| (0..n).map(|k| h[(i, k)]).collect()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrStep {
    pub s: Vec<f64>,
    /// Damping of the boundary solution, 0 for an interior step.
    pub lambda: f64,
    pub iterations: usize,
}

/// Approximate minimizer of the model over `‖s‖ ≤ Δ`.
///
/// Returns the Gauss–Newton step when it fits. Otherwise solves
/// `(H + λI)s = −g` for `λ > 0` with `‖s‖ ∈ [0.9Δ, 1.1Δ]`, using Newton's
/// method on `1/‖s(λ)‖ − 1/Δ` safeguarded by bisection on
/// `[max(0, ‖g‖/Δ − ‖H‖₁), ‖g‖/Δ + ‖H‖₁]`, at most 50 iterations.
/// Definiteness is ensured by adding at least `10⁻¹²·tr(H)/n` to the
/// diagonal.
pub fn tr_step(model: &GaussNewtonModel, delta: f64) -> Result<TrStep> {
    if !(delta > 0.0) {
        return invalid(format!("trust radius must be positive, got {delta}"));
    }
    let n = model.g.len();
    let (h, g) = model.matrices();
    let g_norm = g.norm();
    if g_norm == 0.0 {
        return Ok(TrStep {
            s: vec![0.0; n],
            lambda: 0.0,
            iterations: 0,
        });
    }
    let floor = (1e-12 * h.trace() / n as f64).max(f64::MIN_POSITIVE);
    let solve = |lambda: f64| -> Option<(DVector<f64>, Cholesky<f64, nalgebra::Dyn>)> {
        let mut a = h.clone();
        for i in 0..n {
            a[(i, i)] += lambda.max(floor);
        }
        let chol = Cholesky::new(a)?;
        let s = -chol.solve(&g);
        s.iter().all(|v| v.is_finite()).then_some((s, chol))
    };

    if let Some((s, _)) = solve(0.0) {
        if s.norm() <= delta {
            return Ok(TrStep {
                s: s.iter().copied().collect(),
                lambda: 0.0,
                iterations: 0,
            });
        }
    }

    let h_one = (0..n)
        .map(|j| (0..n).map(|i| h[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut lo = (g_norm / delta - h_one).max(0.0);
    let mut hi = g_norm / delta + h_one;
    let mut lambda = if lo > 0.0 { (lo * hi).sqrt() } else { 1e-3 * hi };
    let mut best: Option<(DVector<f64>, f64)> = None;
    for it in 1..=50 {
        let Some((s, chol)) = solve(lambda) else {
            lo = lambda;
            lambda = 0.5 * (lo + hi);
            continue;
        };
        let sn = s.norm();
        if (sn - delta).abs() <= 0.1 * delta {
            return Ok(TrStep {
                s: s.iter().copied().collect(),
                lambda,
                iterations: it,
            });
        }
        if sn > delta {
            lo = lambda;
        } else {
            hi = lambda;
        }
        // q = L⁻¹s, Newton step on the secular equation
        let q = chol.l().solve_lower_triangular(&s).unwrap_or_else(|| s.clone());
        let qn2 = q.norm_squared();
        let mut next = lambda + (sn * sn / qn2) * (sn - delta) / delta;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if lo > 0.0 { (lo * hi).sqrt().max(0.5 * (lo + hi) * 1e-3) } else { 0.5 * (lo + hi) };
        }
        best = Some((s, lambda));
        lambda = next;
    }
    // no iterate landed in the window; scale the last step onto the boundary
    let (s, lambda) = best.unwrap_or_else(|| (-g.clone() * (delta / g_norm), hi));
    let scale = (delta / s.norm()).min(1.0);
    Ok(TrStep {
        s: s.iter().map(|v| v * scale).collect(),
        lambda,
        iterations: 50,
    })
}

/// Curvature matrix for the initial-only policy: Moré–Wild on every pair
/// `(i, j)` at `x`, reusing the noisy base residuals `r`. Returns the matrix
/// and the component evaluations spent.
pub fn initial_residual_lipschitz(
    oracle: &ResidualOracle,
    x: &[f64],
    r: &[f64],
    sigma_f: f64,
    params: &MwParams,
) -> Result<(Vec<Vec<f64>>, u64)> {
    let (n, m) = (oracle.n(), oracle.m());
    check_dim(m, r.len())?;
    let mut spent = 0u64;
    let mut l = vec![vec![1.0; n]; m];
    for (i, row) in l.iter_mut().enumerate() {
        for (j, lij) in row.iter_mut().enumerate() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let pair = |pts: &[Vec<f64>; 2]| -> Result<[f64; 2]> {
                let v = oracle.noisy_components(&[(pts[0].clone(), i), (pts[1].clone(), i)])?;
                Ok([v[0], v[1]])
            };
            let (outcome, probes) = mw_search(pair, x, &e, r[i], sigma_f, params)?;
            spent += 2 * probes.len() as u64;
            if let MwOutcome::Success { estimate, .. } = outcome {
                *lij = estimate;
            }
        }
    }
    Ok((l, spent))
}

fn interval_matrix(x: &[f64], l: Option<&[Vec<f64>]>, m: usize, sigma_f: f64) -> Result<Vec<Vec<f64>>> {
    match l {
        Some(l) if sigma_f > 0.0 => l
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&lij| noise_optimal_interval(sigma_f, lij, DifferenceScheme::Forward))
                    .collect()
            })
            .collect(),
        _ => {
            let row: Vec<f64> = x.iter().map(|&v| machine_eps_interval(v, DifferenceScheme::Forward)).collect();
            Ok(vec![row; m])
        }
    }
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * dot(r, r)
}

pub fn lm_minimize(oracle: &ResidualOracle, x0: &[f64], config: &LmConfig) -> Result<SolverResult> {
    lm_minimize_monitored(oracle, x0, config, &mut NullMonitor)
}

/// Runs the trust-region loop, reporting every accepted iterate to `monitor`.
pub fn lm_minimize_monitored(
    oracle: &ResidualOracle,
    x0: &[f64],
    config: &LmConfig,
    monitor: &mut dyn Monitor,
) -> Result<SolverResult> {
    let (n, m) = (oracle.n(), oracle.m());
    check_dim(n, x0.len())?;
    config.validate(n)?;
    let budget = config.budget(n);
    let start = oracle.residual_eval_count();
    let units = || (oracle.residual_eval_count() - start) as f64 / m as f64;
    let noisy = config.sigma_f > 0.0;

    let mut x = x0.to_vec();
    let mut r = oracle.noisy_residuals(&x)?;
    let mut f = half_sq(&r);
    let mut best = f;
    let mut delta = config.delta0;
    let mut trace = Vec::new();
    let finish = |x: Vec<f64>, f: f64, best: f64, trace: Vec<IterationRecord>, termination: Termination| {
        let iterations = trace.last().map_or(0, |r: &IterationRecord| r.iteration);
        SolverResult {
            x,
            f,
            best_noisy_f: best,
            trace,
            termination,
            evals: units(),
            iterations,
        }
    };
    let row = |iteration: usize, f: f64, grad_norm: f64, delta: f64, lambda: f64, reestimated: bool| IterationRecord {
        iteration,
        evals: units(),
        noisy_f: f,
        true_phi: None,
        alpha: if iteration == 0 { 0.0 } else { 1.0 },
        grad_norm,
        reestimated,
        radius: Some(delta),
        lambda: Some(lambda),
    };

    if !f.is_finite() {
        let r0 = row(0, f, f64::NAN, delta, 0.0, false);
        record_iterate(&mut trace, monitor, &x, r0);
        return Ok(finish(x, f, best, trace, Termination::Failure));
    }

    let mut lip: Option<Vec<Vec<f64>>> = None;
    let mut reestimated = false;
    if noisy {
        match config.lipschitz_policy {
            LipschitzPolicy::InitialOnly => {
                lip = Some(initial_residual_lipschitz(oracle, &x, &r, config.sigma_f, &config.mw)?.0);
                reestimated = true;
            }
            LipschitzPolicy::Unit => lip = Some(vec![vec![1.0; n]; m]),
            LipschitzPolicy::IdealizedPerIteration => {}
        }
    }
    if record_iterate(&mut trace, monitor, &x, row(0, f, f64::NAN, delta, 0.0, reestimated)) {
        return Ok(finish(x, f, best, trace, Termination::Gap));
    }

    let mut iteration = 0;
    loop {
        // Jacobian at the current iterate
        if units() + n as f64 > budget {
            return Ok(finish(x, f, best, trace, Termination::Budget));
        }
        reestimated = false;
        if noisy && config.lipschitz_policy == LipschitzPolicy::IdealizedPerIteration {
            let mut l = idealized_residual_lipschitz(oracle.problem(), &x)?;
            // Only exact zeros (linear directions) are lifted, to keep h finite.
            for v in l.iter_mut().flatten() {
                *v = v.max(EPS_M);
            }
            lip = Some(l);
            reestimated = true;
        }
        let hmat = interval_matrix(&x, lip.as_deref(), m, config.sigma_f)?;
        let jac = fd_jacobian_with_base(oracle, &x, Some(&r), &hmat)?;
        if jac.jac.iter().flatten().any(|v| !v.is_finite()) {
            return Ok(finish(x, f, best, trace, Termination::Failure));
        }
        let model = build_model(&jac.jac, &r)?;
        let g_norm = norm(&model.g);
        if g_norm == 0.0 {
            return Ok(finish(x, f, best, trace, Termination::Stagnation));
        }

        // trial steps until one is accepted
        loop {
            if delta < config.min_radius {
                return Ok(finish(x, f, best, trace, Termination::Radius));
            }
            if units() + 1.0 > budget {
                return Ok(finish(x, f, best, trace, Termination::Budget));
            }
            let st = tr_step(&model, delta)?;
            let s_norm = norm(&st.s);
            let predicted = -model.change(&st.s);
            let x_trial: Vec<f64> = x.iter().zip(&st.s).map(|(a, b)| a + b).collect();
            let r_trial = oracle.noisy_residuals(&x_trial)?;
            let f_trial = half_sq(&r_trial);
            let rho = if predicted > 0.0 && f_trial.is_finite() {
                (f - f_trial) / predicted
            } else {
                f64::NEG_INFINITY
            };
            if rho < 0.25 {
                delta *= config.shrink;
            } else if rho > 0.75 && s_norm >= 0.9 * delta {
                delta *= config.expand;
            }
            if rho >= config.eta {
                iteration += 1;
                x = x_trial;
                r = r_trial;
                f = f_trial;
                best = best.min(f);
                let rec = row(iteration, f, g_norm, delta, st.lambda, reestimated);
                if record_iterate(&mut trace, monitor, &x, rec) {
                    return Ok(finish(x, f, best, trace, Termination::Gap));
                }
                break;
            }
        }
    }
}
