//! Seeded additive noise and evaluation counting.
//!
//! Every noisy evaluation consumes one draw from a counter-based ChaCha8
//! stream: draw `k` of stream `s` under seed `seed` is the 64-bit word pair at
//! word position `2k` of `ChaCha8Rng::seed_from_u64(seed)` with stream `s`,
//! mapped to `[0, 1)` with 53 bits and then to `σ_f·U(−√3, √3)`. Because a
//! draw depends only on its index, batches of evaluations can reserve a block
//! of indices and run in parallel while producing the same values as a
//! sequential run.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_dim, invalid, Result};
use crate::problem::{ResidualProblem, SmoothProblem};

/// Batches at least this large are evaluated on the rayon pool.
const PARALLEL_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Standard deviation of the injected error.
    pub sigma_f: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma_f: 0.0,
            seed: 0,
        }
    }

    /// Uniform noise with standard deviation `sigma_f`; `sigma_f = 0` is
    /// equivalent to [`NoiseModel::none`].
    pub fn uniform(sigma_f: f64, seed: u64) -> Self {
        assert!(sigma_f >= 0.0, "noise level must be nonnegative");
        let kind = if sigma_f > 0.0 {
            NoiseKind::Uniform
        } else {
            NoiseKind::None
        };
        Self {
            kind,
            sigma_f,
            seed,
        }
    }

    /// The noise level the model actually injects.
    pub fn effective_sigma(&self) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform => self.sigma_f,
        }
    }
}

/// Indexed access to the draws of one ChaCha8 stream.
#[derive(Debug)]
struct DrawStream {
    model: NoiseModel,
    base: ChaCha8Rng,
    next: AtomicU64,
}

impl DrawStream {
    fn new(model: NoiseModel, stream: u64) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(model.seed);
        base.set_stream(stream);
        Self {
            model,
            base,
            next: AtomicU64::new(0),
        }
    }

    fn reserve(&self, count: u64) -> u64 {
        self.next.fetch_add(count, Ordering::Relaxed)
    }

    fn draw(&self, index: u64) -> f64 {
        match self.model.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform => {
                let mut rng = self.base.clone();
                rng.set_word_pos(2 * index as u128);
                let u: f64 = rng.random();
                self.model.sigma_f * 3f64.sqrt() * (2.0 * u - 1.0)
            }
        }
    }
}

/// The only path through which solvers read a smooth objective.
#[derive(Debug)]
pub struct NoisyOracle {
    problem: SmoothProblem,
    stream: DrawStream,
    evals: AtomicU64,
    truth_reads: AtomicU64,
}

impl NoisyOracle {
    pub fn new(problem: SmoothProblem, model: NoiseModel) -> Self {
        Self::with_stream(problem, model, 0)
    }

    /// Uses an independent substream of the model's seed.
    pub fn with_stream(problem: SmoothProblem, model: NoiseModel, stream: u64) -> Self {
        Self {
            problem,
            stream: DrawStream::new(model, stream),
            evals: AtomicU64::new(0),
            truth_reads: AtomicU64::new(0),
        }
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn problem(&self) -> &SmoothProblem {
        &self.problem
    }

    pub fn model(&self) -> NoiseModel {
        self.stream.model
    }

    pub fn sigma_f(&self) -> f64 {
        self.stream.model.effective_sigma()
    }

    /// f(x) = φ(x) + ε with a fresh ε. Counts one evaluation.
    pub fn noisy_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n(), x.len())?;
        let index = self.stream.reserve(1);
        self.evals.fetch_add(1, Ordering::Relaxed);
        Ok(self.problem.objective().value(x) + self.stream.draw(index))
    }

    /// Evaluates a batch of points; point `j` receives draw `base + j` so the
    /// result is independent of how the batch is scheduled.
    pub fn noisy_values(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        for p in points {
            check_dim(self.n(), p.len())?;
        }
        let base = self.stream.reserve(points.len() as u64);
        self.evals.fetch_add(points.len() as u64, Ordering::Relaxed);
        let objective = self.problem.objective();
        let eval = |(j, p): (usize, &Vec<f64>)| objective.value(p) + self.stream.draw(base + j as u64);
        Ok(if points.len() >= PARALLEL_BATCH {
            points.par_iter().enumerate().map(eval).collect()
        } else {
            points.iter().enumerate().map(eval).collect()
        })
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Noise-free φ(x) for reporting. Never charged to the budget; solvers
    /// do not call it.
    pub fn true_value(&self, x: &[f64]) -> Result<f64> {
        self.truth_reads.fetch_add(1, Ordering::Relaxed);
        self.problem.evaluate(x)
    }

    /// Number of reads through [`NoisyOracle::true_value`].
    pub fn truth_reads(&self) -> u64 {
        self.truth_reads.load(Ordering::Relaxed)
    }
}

/// Oracle for residual problems: r_i(x) = γ_i(x) + ε_i.
///
/// Counts individual component evaluations; `m` of them make up one
/// objective evaluation unit.
#[derive(Debug)]
pub struct ResidualOracle {
    problem: ResidualProblem,
    stream: DrawStream,
    component_evals: AtomicU64,
    truth_reads: AtomicU64,
}

impl ResidualOracle {
    pub fn new(problem: ResidualProblem, model: NoiseModel) -> Self {
        Self::with_stream(problem, model, 0)
    }

    pub fn with_stream(problem: ResidualProblem, model: NoiseModel, stream: u64) -> Self {
        Self {
            problem,
            stream: DrawStream::new(model, stream),
            component_evals: AtomicU64::new(0),
            truth_reads: AtomicU64::new(0),
        }
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn m(&self) -> usize {
        self.problem.m()
    }

    pub fn problem(&self) -> &ResidualProblem {
        &self.problem
    }

    pub fn model(&self) -> NoiseModel {
        self.stream.model
    }

    pub fn sigma_f(&self) -> f64 {
        self.stream.model.effective_sigma()
    }

    /// r_i(x) with a fresh ε_i (zero-based `i`).
    pub fn noisy_residual(&self, x: &[f64], i: usize) -> Result<f64> {
        check_dim(self.n(), x.len())?;
        if i >= self.m() {
            return invalid(format!("residual index {i} out of range for m = {}", self.m()));
        }
        let index = self.stream.reserve(1);
        self.component_evals.fetch_add(1, Ordering::Relaxed);
        Ok(self.problem.residuals().component(x, i) + self.stream.draw(index))
    }

    /// Evaluates `(point, component)` requests as one indexed batch.
    pub fn noisy_components(&self, requests: &[(Vec<f64>, usize)]) -> Result<Vec<f64>> {
        for (p, i) in requests {
            check_dim(self.n(), p.len())?;
            if *i >= self.m() {
                return invalid(format!("residual index {i} out of range for m = {}", self.m()));
            }
        }
        let base = self.stream.reserve(requests.len() as u64);
        self.component_evals
            .fetch_add(requests.len() as u64, Ordering::Relaxed);
        let residuals = self.problem.residuals();
        let eval = |(j, (p, i)): (usize, &(Vec<f64>, usize))| {
            residuals.component(p, *i) + self.stream.draw(base + j as u64)
        };
        Ok(if requests.len() >= PARALLEL_BATCH {
            requests.par_iter().enumerate().map(eval).collect()
        } else {
            requests.iter().enumerate().map(eval).collect()
        })
    }

    /// All m components at x (one evaluation unit).
    pub fn noisy_residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), x.len())?;
        let base = self.stream.reserve(self.m() as u64);
        self.component_evals
            .fetch_add(self.m() as u64, Ordering::Relaxed);
        let residuals = self.problem.residuals();
        Ok((0..self.m())
            .map(|i| residuals.component(x, i) + self.stream.draw(base + i as u64))
            .collect())
    }

    pub fn residual_eval_count(&self) -> u64 {
        self.component_evals.load(Ordering::Relaxed)
    }

    /// Fractional evaluation units, component evaluations / m.
    pub fn eval_units(&self) -> f64 {
        self.residual_eval_count() as f64 / self.m() as f64
    }

    /// Evaluation units rounded up, as reported.
    pub fn eval_count(&self) -> u64 {
        self.residual_eval_count().div_ceil(self.m() as u64)
    }

    /// Noise-free ½‖γ(x)‖² for reporting; never charged.
    pub fn true_objective(&self, x: &[f64]) -> Result<f64> {
        self.truth_reads.fetch_add(1, Ordering::Relaxed);
        self.problem.residual_objective(x)
    }

    pub fn truth_reads(&self) -> u64 {
        self.truth_reads.load(Ordering::Relaxed)
    }
}

/// Sample standard deviation of `k` repeated noisy evaluations at `x`.
pub fn estimate_noise_level(oracle: &NoisyOracle, x: &[f64], k: usize) -> Result<f64> {
    if k < 2 {
        return invalid(format!("noise estimation needs at least 2 samples, got {k}"));
    }
    let values = oracle.noisy_values(&vec![x.to_vec(); k])?;
    // Welford's update keeps identical samples at exactly zero spread
    let (mut mean, mut ss) = (0.0, 0.0);
    for (j, v) in values.iter().enumerate() {
        let d = v - mean;
        mean += d / (j + 1) as f64;
        ss += d * (v - mean);
    }
    Ok((ss / (k - 1) as f64).sqrt())
}
