//! Algebraic definitions of the catalog functions.
//!
//! Least-squares style problems are written once as [`Residuals`] and reused
//! both as residual problems and, through [`SumOfSquares`], as smooth
//! unconstrained problems φ = Σγ_i².

use std::f64::consts::PI;
use std::sync::Arc;

use super::{Objective, Residuals};

/// φ(x) = Σ γ_i(x)², with derivatives assembled from the residual hooks.
pub struct SumOfSquares {
    residuals: Arc<dyn Residuals>,
}

impl SumOfSquares {
    pub fn new(residuals: Arc<dyn Residuals>) -> Self {
        Self { residuals }
    }
}

impl Objective for SumOfSquares {
    fn value(&self, x: &[f64]) -> f64 {
        (0..self.residuals.m())
            .map(|i| {
                let r = self.residuals.component(x, i);
                r * r
            })
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        for i in 0..self.residuals.m() {
            let r = self.residuals.component(x, i);
            let row = self.residuals.jacobian_row(x, i)?;
            for (gj, dj) in g.iter_mut().zip(&row) {
                *gj += 2.0 * r * dj;
            }
        }
        Some(g)
    }

    fn hessian_quadform(&self, x: &[f64], p: &[f64]) -> Option<f64> {
        let mut q = 0.0;
        for i in 0..self.residuals.m() {
            let r = self.residuals.component(x, i);
            let row = self.residuals.jacobian_row(x, i)?;
            let jp: f64 = row.iter().zip(p).map(|(a, b)| a * b).sum();
            let curv = self.residuals.component_curvature(x, i, p)?;
            q += 2.0 * (jp * jp + r * curv);
        }
        Some(q)
    }
}

/// φ(x) = ½ Σ a_i x_i².
pub struct DiagonalQuadratic {
    diag: Vec<f64>,
}

/// Builds the separable quadratic ½Σa_i x_i² (minimum 0 at the origin).
pub fn diagonal_quadratic(diag: Vec<f64>) -> Arc<dyn Objective> {
    Arc::new(DiagonalQuadratic { diag })
}

impl Objective for DiagonalQuadratic {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.diag.iter().zip(x).map(|(a, v)| a * v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.diag.iter().zip(x).map(|(a, v)| a * v).collect())
    }

    fn hessian_quadform(&self, _x: &[f64], p: &[f64]) -> Option<f64> {
        Some(self.diag.iter().zip(p).map(|(a, v)| a * v * v).sum())
    }
}

pub(super) struct Rosenbrock;

impl Residuals for Rosenbrock {
    fn m(&self) -> usize {
        2
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        match i {
            0 => 10.0 * (x[1] - x[0] * x[0]),
            _ => 1.0 - x[0],
        }
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        Some(match i {
            0 => vec![-20.0 * x[0], 10.0],
            _ => vec![-1.0, 0.0],
        })
    }
    fn component_curvature(&self, _x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        Some(if i == 0 { -20.0 * p[0] * p[0] } else { 0.0 })
    }
}

pub(super) struct Cube;

impl Residuals for Cube {
    fn m(&self) -> usize {
        2
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        match i {
            0 => x[0] - 1.0,
            _ => 10.0 * (x[1] - x[0].powi(3)),
        }
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        Some(match i {
            0 => vec![1.0, 0.0],
            _ => vec![-30.0 * x[0] * x[0], 10.0],
        })
    }
    fn component_curvature(&self, x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        Some(if i == 0 { 0.0 } else { -60.0 * x[0] * p[0] * p[0] })
    }
}

/// x1² + (x2 + x2²)² + (e^{x3} − 1)².
pub(super) struct Denschne;

impl Residuals for Denschne {
    fn m(&self) -> usize {
        3
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        match i {
            0 => x[0],
            1 => x[1] + x[1] * x[1],
            _ => x[2].exp() - 1.0,
        }
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        Some(match i {
            0 => vec![1.0, 0.0, 0.0],
            1 => vec![0.0, 1.0 + 2.0 * x[1], 0.0],
            _ => vec![0.0, 0.0, x[2].exp()],
        })
    }
    fn component_curvature(&self, x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        Some(match i {
            0 => 0.0,
            1 => 2.0 * p[1] * p[1],
            _ => x[2].exp() * p[2] * p[2],
        })
    }
}

/// Helical valley.
pub(super) struct Helix;

impl Helix {
    fn theta(x: &[f64]) -> f64 {
        if x[0] == 0.0 {
            return 0.25f64.copysign(x[1]);
        }
        let base = (x[1] / x[0]).atan() / (2.0 * PI);
        if x[0] < 0.0 {
            base + 0.5
        } else {
            base
        }
    }
}

impl Residuals for Helix {
    fn m(&self) -> usize {
        3
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        match i {
            0 => 10.0 * (x[2] - 10.0 * Self::theta(x)),
            1 => 10.0 * ((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0),
            _ => x[2],
        }
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let r = r2.sqrt();
        Some(match i {
            0 => {
                let c = 100.0 / (2.0 * PI * r2);
                vec![c * x[1], -c * x[0], 10.0]
            }
            1 => vec![10.0 * x[0] / r, 10.0 * x[1] / r, 0.0],
            _ => vec![0.0, 0.0, 1.0],
        })
    }
    fn component_curvature(&self, x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        let r2 = x[0] * x[0] + x[1] * x[1];
        Some(match i {
            0 => {
                let r4 = r2 * r2;
                let (a, b) = (x[0], x[1]);
                let theta_q = (2.0 * a * b * p[0] * p[0] + 2.0 * (b * b - a * a) * p[0] * p[1]
                    - 2.0 * a * b * p[1] * p[1])
                    / (2.0 * PI * r4);
                -100.0 * theta_q
            }
            1 => {
                let r = r2.sqrt();
                let up = (x[0] * p[0] + x[1] * p[1]) / r;
                10.0 * (p[0] * p[0] + p[1] * p[1] - up * up) / r
            }
            _ => 0.0,
        })
    }
}

const BARD_Y: [f64; 15] = [
    0.14, 0.18, 0.22, 0.25, 0.29, 0.32, 0.35, 0.39, 0.37, 0.58, 0.73, 0.96, 1.34, 2.10, 4.39,
];

pub(super) struct Bard;

impl Bard {
    fn uvw(i: usize) -> (f64, f64, f64) {
        let u = (i + 1) as f64;
        let v = 16.0 - u;
        (u, v, u.min(v))
    }
}

impl Residuals for Bard {
    fn m(&self) -> usize {
        15
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        let (u, v, w) = Self::uvw(i);
        BARD_Y[i] - (x[0] + u / (v * x[1] + w * x[2]))
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        let (u, v, w) = Self::uvw(i);
        let d = v * x[1] + w * x[2];
        let d2 = d * d;
        Some(vec![-1.0, u * v / d2, u * w / d2])
    }
    fn component_curvature(&self, x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        let (u, v, w) = Self::uvw(i);
        let d = v * x[1] + w * x[2];
        let dp = v * p[1] + w * p[2];
        Some(-2.0 * u * dp * dp / (d * d * d))
    }
}

/// Box three-dimensional function with m = 10.
pub(super) struct Box3d;

impl Box3d {
    fn t(i: usize) -> f64 {
        0.1 * (i + 1) as f64
    }
}

impl Residuals for Box3d {
    fn m(&self) -> usize {
        10
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        let t = Self::t(i);
        (-t * x[0]).exp() - (-t * x[1]).exp() - x[2] * ((-t).exp() - (-10.0 * t).exp())
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        let t = Self::t(i);
        Some(vec![
            -t * (-t * x[0]).exp(),
            t * (-t * x[1]).exp(),
            -((-t).exp() - (-10.0 * t).exp()),
        ])
    }
    fn component_curvature(&self, x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        let t = Self::t(i);
        Some(t * t * ((-t * x[0]).exp() * p[0] * p[0] - (-t * x[1]).exp() * p[1] * p[1]))
    }
}

/// Powell singular function.
pub(super) struct PowellSingular;

impl Residuals for PowellSingular {
    fn m(&self) -> usize {
        4
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        match i {
            0 => x[0] + 10.0 * x[1],
            1 => 5f64.sqrt() * (x[2] - x[3]),
            2 => (x[1] - 2.0 * x[2]).powi(2),
            _ => 10f64.sqrt() * (x[0] - x[3]).powi(2),
        }
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        let s5 = 5f64.sqrt();
        let s10 = 10f64.sqrt();
        Some(match i {
            0 => vec![1.0, 10.0, 0.0, 0.0],
            1 => vec![0.0, 0.0, s5, -s5],
            2 => {
                let d = x[1] - 2.0 * x[2];
                vec![0.0, 2.0 * d, -4.0 * d, 0.0]
            }
            _ => {
                let d = x[0] - x[3];
                vec![2.0 * s10 * d, 0.0, 0.0, -2.0 * s10 * d]
            }
        })
    }
    fn component_curvature(&self, _x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        Some(match i {
            0 | 1 => 0.0,
            2 => 2.0 * (p[1] - 2.0 * p[2]).powi(2),
            _ => 2.0 * 10f64.sqrt() * (p[0] - p[3]).powi(2),
        })
    }
}

/// Freudenstein and Roth function, n = 2.
pub(super) struct Freudenstein;

impl Residuals for Freudenstein {
    fn m(&self) -> usize {
        2
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        let y = x[1];
        match i {
            0 => -13.0 + x[0] + ((5.0 - y) * y - 2.0) * y,
            _ => -29.0 + x[0] + ((y + 1.0) * y - 14.0) * y,
        }
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        let y = x[1];
        Some(match i {
            0 => vec![1.0, 10.0 * y - 3.0 * y * y - 2.0],
            _ => vec![1.0, 3.0 * y * y + 2.0 * y - 14.0],
        })
    }
    fn component_curvature(&self, x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        let y = x[1];
        Some(match i {
            0 => (10.0 - 6.0 * y) * p[1] * p[1],
            _ => (6.0 * y + 2.0) * p[1] * p[1],
        })
    }
}

/// Shanno's tridiagonal quadratic (α = 2, β = γ = δ = 1).
pub(super) struct Tridia {
    pub n: usize,
}

impl Residuals for Tridia {
    fn m(&self) -> usize {
        self.n
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        if i == 0 {
            x[0] - 1.0
        } else {
            ((i + 1) as f64).sqrt() * (2.0 * x[i] - x[i - 1])
        }
    }
    fn jacobian_row(&self, _x: &[f64], i: usize) -> Option<Vec<f64>> {
        let mut row = vec![0.0; self.n];
        if i == 0 {
            row[0] = 1.0;
        } else {
            let w = ((i + 1) as f64).sqrt();
            row[i] = 2.0 * w;
            row[i - 1] = -w;
        }
        Some(row)
    }
    fn component_curvature(&self, _x: &[f64], _i: usize, _p: &[f64]) -> Option<f64> {
        Some(0.0)
    }
}

/// Σ (x_i − i)⁴ written as squares of (x_i − i)².
pub(super) struct Dqrtic {
    pub n: usize,
}

impl Residuals for Dqrtic {
    fn m(&self) -> usize {
        self.n
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        (x[i] - (i + 1) as f64).powi(2)
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        let mut row = vec![0.0; self.n];
        row[i] = 2.0 * (x[i] - (i + 1) as f64);
        Some(row)
    }
    fn component_curvature(&self, _x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        Some(2.0 * p[i] * p[i])
    }
}

/// (x_1 − 1)² + Σ_{i≥2} 100 (x_1 − x_{i−1}²)².
pub(super) struct Nondia {
    pub n: usize,
}

impl Residuals for Nondia {
    fn m(&self) -> usize {
        self.n
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        if i == 0 {
            x[0] - 1.0
        } else {
            10.0 * (x[0] - x[i - 1] * x[i - 1])
        }
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        let mut row = vec![0.0; self.n];
        if i == 0 {
            row[0] = 1.0;
        } else {
            row[0] += 10.0;
            row[i - 1] -= 20.0 * x[i - 1];
        }
        Some(row)
    }
    fn component_curvature(&self, _x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        Some(if i == 0 { 0.0 } else { -20.0 * p[i - 1] * p[i - 1] })
    }
}

/// 10⁴ (x2 − sin x1)² + x1²/4.
pub(super) struct Sineval;

impl Residuals for Sineval {
    fn m(&self) -> usize {
        2
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        match i {
            0 => 100.0 * (x[1] - x[0].sin()),
            _ => 0.5 * x[0],
        }
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        Some(match i {
            0 => vec![-100.0 * x[0].cos(), 100.0],
            _ => vec![0.5, 0.0],
        })
    }
    fn component_curvature(&self, x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        Some(if i == 0 { 100.0 * x[0].sin() * p[0] * p[0] } else { 0.0 })
    }
}

/// Brown and Dennis function, m = 20.
pub(super) struct BrownDennis;

impl Residuals for BrownDennis {
    fn m(&self) -> usize {
        20
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        let t = (i + 1) as f64 / 5.0;
        let a = x[0] + t * x[1] - t.exp();
        let b = x[2] + x[3] * t.sin() - t.cos();
        a * a + b * b
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        let t = (i + 1) as f64 / 5.0;
        let a = x[0] + t * x[1] - t.exp();
        let b = x[2] + x[3] * t.sin() - t.cos();
        Some(vec![2.0 * a, 2.0 * a * t, 2.0 * b, 2.0 * b * t.sin()])
    }
    fn component_curvature(&self, _x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        let t = (i + 1) as f64 / 5.0;
        Some(2.0 * (p[0] + t * p[1]).powi(2) + 2.0 * (p[2] + t.sin() * p[3]).powi(2))
    }
}

const KOWOSB_Y: [f64; 11] = [
    0.1957, 0.1947, 0.1735, 0.1600, 0.0844, 0.0627, 0.0456, 0.0342, 0.0323, 0.0235, 0.0246,
];
const KOWOSB_U: [f64; 11] = [
    4.0, 2.0, 1.0, 0.5, 0.25, 0.167, 0.125, 0.1, 0.0833, 0.0714, 0.0625,
];

/// Kowalik and Osborne function.
pub(super) struct KowalikOsborne;

impl Residuals for KowalikOsborne {
    fn m(&self) -> usize {
        11
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        let u = KOWOSB_U[i];
        KOWOSB_Y[i] - x[0] * (u * u + u * x[1]) / (u * u + u * x[2] + x[3])
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        let u = KOWOSB_U[i];
        let num = u * u + u * x[1];
        let den = u * u + u * x[2] + x[3];
        let d2 = den * den;
        Some(vec![
            -num / den,
            -x[0] * u / den,
            x[0] * num * u / d2,
            x[0] * num / d2,
        ])
    }
    fn component_curvature(&self, x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        let u = KOWOSB_U[i];
        let num = u * u + u * x[1];
        let den = u * u + u * x[2] + x[3];
        let dnum = u * p[1];
        let dden = u * p[2] + p[3];
        // Second directional derivative of x0·num/den; γ carries the minus sign.
        let model = 2.0 * x[0] * num * dden * dden / den.powi(3)
            + 2.0
                * (p[0] * dnum / den
                    - p[0] * num * dden / (den * den)
                    - x[0] * dnum * dden / (den * den));
        Some(-model)
    }
}

/// Brown almost-linear function.
pub(super) struct BrownAlmostLinear {
    pub n: usize,
}

impl Residuals for BrownAlmostLinear {
    fn m(&self) -> usize {
        self.n
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        if i + 1 < self.n {
            x[i] + x.iter().sum::<f64>() - (self.n + 1) as f64
        } else {
            x.iter().product::<f64>() - 1.0
        }
    }
    fn jacobian_row(&self, x: &[f64], i: usize) -> Option<Vec<f64>> {
        if i + 1 < self.n {
            let mut row = vec![1.0; self.n];
            row[i] = 2.0;
            Some(row)
        } else {
            Some(
                (0..self.n)
                    .map(|j| {
                        x.iter()
                            .enumerate()
                            .filter(|&(k, _)| k != j)
                            .map(|(_, v)| v)
                            .product()
                    })
                    .collect(),
            )
        }
    }
    fn component_curvature(&self, x: &[f64], i: usize, p: &[f64]) -> Option<f64> {
        if i + 1 < self.n {
            return Some(0.0);
        }
        let mut q = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                if j == k {
                    continue;
                }
                let rest: f64 = x
                    .iter()
                    .enumerate()
                    .filter(|&(l, _)| l != j && l != k)
                    .map(|(_, v)| v)
                    .product();
                q += p[j] * p[k] * rest;
            }
        }
        Some(q)
    }
}

/// Linear function, full rank.
pub(super) struct LinearFullRank {
    pub n: usize,
    pub m: usize,
}

impl Residuals for LinearFullRank {
    fn m(&self) -> usize {
        self.m
    }
    fn component(&self, x: &[f64], i: usize) -> f64 {
        let s = 2.0 * x.iter().sum::<f64>() / self.m as f64;
        if i < self.n {
            x[i] - s - 1.0
        } else {
            -s - 1.0
        }
    }
    fn jacobian_row(&self, _x: &[f64], i: usize) -> Option<Vec<f64>> {
        let mut row = vec![-2.0 / self.m as f64; self.n];
        if i < self.n {
            row[i] += 1.0;
        }
        Some(row)
    }
    fn component_curvature(&self, _x: &[f64], _i: usize, _p: &[f64]) -> Option<f64> {
        Some(0.0)
    }
}

/// Σ over index pairs (a, b) of (x_a² + x_b²)² − 4x_a + 3. Covers ARWHEAD
/// (pairs (i, n)) and ENGVAL1 (pairs (i, i+1)).
pub(super) struct QuarticPairs {
    pairs: Vec<(usize, usize)>,
}

impl QuarticPairs {
    pub fn arrowhead(n: usize) -> Self {
        Self {
            pairs: (0..n - 1).map(|i| (i, n - 1)).collect(),
        }
    }

    pub fn chained(n: usize) -> Self {
        Self {
            pairs: (0..n - 1).map(|i| (i, i + 1)).collect(),
        }
    }
}

impl Objective for QuarticPairs {
    fn value(&self, x: &[f64]) -> f64 {
        self.pairs
            .iter()
            .map(|&(a, b)| {
                let s = x[a] * x[a] + x[b] * x[b];
                s * s - 4.0 * x[a] + 3.0
            })
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        for &(a, b) in &self.pairs {
            let s = x[a] * x[a] + x[b] * x[b];
            g[a] += 4.0 * s * x[a] - 4.0;
            g[b] += 4.0 * s * x[b];
        }
        Some(g)
    }

    fn hessian_quadform(&self, x: &[f64], p: &[f64]) -> Option<f64> {
        let mut q = 0.0;
        for &(a, b) in &self.pairs {
            let s = x[a] * x[a] + x[b] * x[b];
            let ds = 2.0 * x[a] * p[a] + 2.0 * x[b] * p[b];
            q += 2.0 * ds * ds + 2.0 * s * (2.0 * p[a] * p[a] + 2.0 * p[b] * p[b]);
        }
        Some(q)
    }
}

/// Brent's penalty problem:
/// (x1−2)² + (x2−1)² + 0.04/g + 5h², g = 1 − x1²/4 − x2², h = x1 − 2x2 + 1.
pub(super) struct Brkmcc;

impl Brkmcc {
    fn parts(x: &[f64]) -> (f64, f64) {
        let g = 1.0 - 0.25 * x[0] * x[0] - x[1] * x[1];
        let h = x[0] - 2.0 * x[1] + 1.0;
        (g, h)
    }
}

impl Objective for Brkmcc {
    fn value(&self, x: &[f64]) -> f64 {
        let (g, h) = Self::parts(x);
        (x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2) + 0.04 / g + 5.0 * h * h
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let (g, h) = Self::parts(x);
        let dg = [-0.5 * x[0], -2.0 * x[1]];
        let c = -0.04 / (g * g);
        Some(vec![
            2.0 * (x[0] - 2.0) + c * dg[0] + 10.0 * h,
            2.0 * (x[1] - 1.0) + c * dg[1] - 20.0 * h,
        ])
    }

    fn hessian_quadform(&self, x: &[f64], p: &[f64]) -> Option<f64> {
        let (g, _) = Self::parts(x);
        let dgp = -0.5 * x[0] * p[0] - 2.0 * x[1] * p[1];
        let d2gp = -0.5 * p[0] * p[0] - 2.0 * p[1] * p[1];
        let barrier = 0.04 * (2.0 * dgp * dgp / g.powi(3) - d2gp / (g * g));
        Some(2.0 * p[0] * p[0] + 2.0 * p[1] * p[1] + barrier + 10.0 * (p[0] - 2.0 * p[1]).powi(2))
    }
}
