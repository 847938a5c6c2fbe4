//! Finite-difference gradients, directional derivatives and Jacobians.
//!
//! Two interval rules are available. The machine-precision rule scales a
//! fixed interval by `max(1, |x_i|)`; the noise-optimal rule minimizes the
//! mean-squared error bound
//!
//! * forward: `L²h²/4 + 2σ²/h²`, minimized at `h = 8^{1/4}·√(σ/L)`,
//! * central: `M²h⁴/36 + σ²/(2h²)`, minimized at `h = (3σ/M)^{1/3}`,
//!
//! where `L` and `M` bound the second and third derivatives along the
//! differencing direction. The noise-optimal rule is never scaled by `|x_i|`.

use crate::error::{check_dim, invalid, Result};
use crate::noise::{NoisyOracle, ResidualOracle};
use crate::EPS_M;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceScheme {
    Forward,
    Central,
}

impl DifferenceScheme {
    /// Oracle calls for one full gradient in dimension `n`.
    pub fn gradient_cost(self, n: usize) -> u64 {
        match self {
            DifferenceScheme::Forward => n as u64 + 1,
            DifferenceScheme::Central => 2 * n as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntervalRule {
    MachineEps,
    /// Per-coordinate curvature: `L` for forward, `M` for central.
    NoiseOptimal { sigma_f: f64, curvature: Vec<f64> },
}

/// `max(1, |x_i|)·√ε_M` (forward) or `max(1, |x_i|)·ε_M^{1/3}` (central).
pub fn machine_eps_interval(x_i: f64, scheme: DifferenceScheme) -> f64 {
    let base = match scheme {
        DifferenceScheme::Forward => EPS_M.sqrt(),
        DifferenceScheme::Central => EPS_M.cbrt(),
    };
    x_i.abs().max(1.0) * base
}

/// Interval minimizing the MSE bound for the given noise level and curvature.
pub fn noise_optimal_interval(sigma_f: f64, curvature: f64, scheme: DifferenceScheme) -> Result<f64> {
    if !(curvature > 0.0) || !curvature.is_finite() {
        return invalid(format!("curvature must be positive and finite, got {curvature}"));
    }
    if !(sigma_f > 0.0) || !sigma_f.is_finite() {
        return invalid(format!(
            "noise-optimal intervals need a positive noise level, got {sigma_f}"
        ));
    }
    Ok(match scheme {
        DifferenceScheme::Forward => 8f64.powf(0.25) * (sigma_f / curvature).sqrt(),
        DifferenceScheme::Central => (3.0 * sigma_f / curvature).cbrt(),
    })
}

/// Interval for coordinate `coord` at value `x_i`.
pub fn interval(x_i: f64, rule: &IntervalRule, scheme: DifferenceScheme, coord: usize) -> Result<f64> {
    match rule {
        IntervalRule::MachineEps => Ok(machine_eps_interval(x_i, scheme)),
        IntervalRule::NoiseOptimal { sigma_f, curvature } => {
            let Some(&c) = curvature.get(coord) else {
                return invalid(format!(
                    "no curvature entry for coordinate {coord} (have {})",
                    curvature.len()
                ));
            };
            noise_optimal_interval(*sigma_f, c, scheme)
        }
    }
}

fn intervals(x: &[f64], rule: &IntervalRule, scheme: DifferenceScheme) -> Result<Vec<f64>> {
    if let IntervalRule::NoiseOptimal { curvature, .. } = rule {
        check_dim(x.len(), curvature.len())?;
    }
    x.iter()
        .enumerate()
        .map(|(i, &xi)| interval(xi, rule, scheme, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    /// Oracle calls made by this computation.
    pub evals: u64,
}

/// Finite-difference gradient; forward costs `n + 1` calls, central `2n`.
pub fn fd_gradient(
    oracle: &NoisyOracle,
    x: &[f64],
    scheme: DifferenceScheme,
    rule: &IntervalRule,
) -> Result<FdGradient> {
    fd_gradient_with_base(oracle, x, None, scheme, rule)
}

/// As [`fd_gradient`], reusing a known noisy `f(x)` for the forward scheme
/// (cost `n` instead of `n + 1`). `f_x` is ignored for central differences.
pub fn fd_gradient_with_base(
    oracle: &NoisyOracle,
    x: &[f64],
    f_x: Option<f64>,
    scheme: DifferenceScheme,
    rule: &IntervalRule,
) -> Result<FdGradient> {
    check_dim(oracle.n(), x.len())?;
    let h = intervals(x, rule, scheme)?;
    let n = x.len();
    let shifted = |i: usize, s: f64| {
        let mut p = x.to_vec();
        p[i] += s * h[i];
        p
    };
    match scheme {
        DifferenceScheme::Forward => {
            let mut points: Vec<Vec<f64>> = (0..n).map(|i| shifted(i, 1.0)).collect();
            if f_x.is_none() {
                points.push(x.to_vec());
            }
            let values = oracle.noisy_values(&points)?;
            let f0 = f_x.unwrap_or_else(|| values[n]);
            let g = (0..n).map(|i| (values[i] - f0) / h[i]).collect();
            Ok(FdGradient {
                g,
                h,
                evals: points.len() as u64,
            })
        }
        DifferenceScheme::Central => {
            let points: Vec<Vec<f64>> = (0..n)
                .flat_map(|i| [shifted(i, 1.0), shifted(i, -1.0)])
                .collect();
            let values = oracle.noisy_values(&points)?;
            let g = (0..n)
                .map(|i| (values[2 * i] - values[2 * i + 1]) / (2.0 * h[i]))
                .collect();
            Ok(FdGradient {
                g,
                h,
                evals: 2 * n as u64,
            })
        }
    }
}

fn unit_direction(p: &[f64]) -> Result<(Vec<f64>, f64)> {
    let norm = crate::linalg::norm(p);
    if !(norm > 0.0) || !norm.is_finite() {
        return invalid("direction must be nonzero and finite");
    }
    Ok((p.iter().map(|v| v / norm).collect(), norm))
}

fn along(x: &[f64], u: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(u).map(|(a, b)| a + t * b).collect()
}

/// Directional derivative estimate along `p`, differencing with step `h`
/// along `p/‖p‖` and scaling back by `‖p‖`.
pub fn fd_directional(
    oracle: &NoisyOracle,
    x: &[f64],
    p: &[f64],
    scheme: DifferenceScheme,
    h: f64,
) -> Result<f64> {
    Ok(fd_directional_with_base(oracle, x, None, p, scheme, h)?.0)
}

/// As [`fd_directional`], reusing a known noisy `f(x)` for the forward
/// scheme. Returns the estimate and the number of oracle calls made.
pub fn fd_directional_with_base(
    oracle: &NoisyOracle,
    x: &[f64],
    f_x: Option<f64>,
    p: &[f64],
    scheme: DifferenceScheme,
    h: f64,
) -> Result<(f64, u64)> {
    check_dim(oracle.n(), x.len())?;
    check_dim(oracle.n(), p.len())?;
    if !(h > 0.0) {
        return invalid(format!("differencing interval must be positive, got {h}"));
    }
    let (u, norm) = unit_direction(p)?;
    match scheme {
        DifferenceScheme::Forward => {
            let mut points = vec![along(x, &u, h)];
            if f_x.is_none() {
                points.push(x.to_vec());
            }
            let values = oracle.noisy_values(&points)?;
            let f0 = f_x.unwrap_or_else(|| values[1]);
            Ok(((values[0] - f0) / h * norm, points.len() as u64))
        }
        DifferenceScheme::Central => {
            let values = oracle.noisy_values(&[along(x, &u, h), along(x, &u, -h)])?;
            Ok(((values[0] - values[1]) / (2.0 * h) * norm, 2))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdJacobian {
    /// Rows of Ĵ, `jac[i][j] ≈ ∂r_i/∂x_j`.
    pub jac: Vec<Vec<f64>>,
    /// Noisy residuals at the base point.
    pub r: Vec<f64>,
    /// Component evaluations made by this computation.
    pub component_evals: u64,
}

/// Forward-difference Jacobian with a per-entry interval matrix `h[i][j]`.
pub fn fd_jacobian(oracle: &ResidualOracle, x: &[f64], h: &[Vec<f64>]) -> Result<FdJacobian> {
    fd_jacobian_with_base(oracle, x, None, h)
}

/// As [`fd_jacobian`], reusing known noisy base residuals `r(x)`.
pub fn fd_jacobian_with_base(
    oracle: &ResidualOracle,
    x: &[f64],
    r_x: Option<&[f64]>,
    h: &[Vec<f64>],
) -> Result<FdJacobian> {
    let (n, m) = (oracle.n(), oracle.m());
    check_dim(n, x.len())?;
    check_dim(m, h.len())?;
    for row in h {
        check_dim(n, row.len())?;
        if let Some(bad) = row.iter().find(|v| !(**v > 0.0)) {
            return invalid(format!("interval matrix entries must be positive, got {bad}"));
        }
    }
    if let Some(r) = r_x {
        check_dim(m, r.len())?;
    }

    let mut requests = Vec::with_capacity(m * (n + 1));
    for (i, row) in h.iter().enumerate() {
        for (j, hij) in row.iter().enumerate() {
            let mut p = x.to_vec();
            p[j] += hij;
            requests.push((p, i));
        }
    }
    if r_x.is_none() {
        requests.extend((0..m).map(|i| (x.to_vec(), i)));
    }
    let values = oracle.noisy_components(&requests)?;
    let r = match r_x {
        Some(r) => r.to_vec(),
        None => values[m * n..].to_vec(),
    };
    let jac = (0..m)
        .map(|i| (0..n).map(|j| (values[i * n + j] - r[i]) / h[i][j]).collect())
        .collect();
    Ok(FdJacobian {
        jac,
        r,
        component_evals: requests.len() as u64,
    })
}

/// Upper bound on the mean-squared error of a one-dimensional difference
/// quotient with interval `h`.
pub fn mse_bound(h: f64, curvature: f64, sigma_f: f64, scheme: DifferenceScheme) -> Result<f64> {
    if !(h > 0.0) {
        return invalid(format!("interval must be positive, got {h}"));
    }
    Ok(match scheme {
        DifferenceScheme::Forward => {
            curvature * curvature * h * h / 4.0 + 2.0 * sigma_f * sigma_f / (h * h)
        }
        DifferenceScheme::Central => {
            curvature * curvature * h.powi(4) / 36.0 + sigma_f * sigma_f / (2.0 * h * h)
        }
    })
}

/// Predicted error level of a difference quotient taken at the optimal
/// interval: `2^{1/4}√(Lσ)` forward, `3^{1/6}/2·M^{1/3}σ^{2/3}` central.
pub fn gradient_noise_level(sigma_f: f64, curvature: f64, scheme: DifferenceScheme) -> f64 {
    match scheme {
        DifferenceScheme::Forward => 2f64.powf(0.25) * (curvature * sigma_f).sqrt(),
        DifferenceScheme::Central => {
            3f64.powf(1.0 / 6.0) / 2.0 * curvature.cbrt() * sigma_f.powf(2.0 / 3.0)
        }
    }
}

/// Error level of the full gradient from per-coordinate levels.
pub fn full_gradient_noise_level(per_coordinate: &[f64]) -> f64 {
    crate::linalg::norm(per_coordinate)
}
