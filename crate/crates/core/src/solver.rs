//! Types shared by the solvers: iteration records, results, and the
//! monitoring hook through which a harness observes noise-free progress.

use serde::Serialize;

use crate::bench::gap_target;
use crate::noise::{NoisyOracle, ResidualOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Budget,
    Stagnation,
    Gap,
    Radius,
    Failure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Budget => "budget",
            Termination::Stagnation => "stagnation",
            Termination::Gap => "gap",
            Termination::Radius => "radius",
            Termination::Failure => "failure",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "budget" => Termination::Budget,
            "stagnation" => Termination::Stagnation,
            "gap" => Termination::Gap,
            "radius" => Termination::Radius,
            "failure" => Termination::Failure,
            _ => return None,
        })
    }
}

/// One row of a solver trace. Row 0 describes the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Cumulative evaluation units, including Lipschitz estimation.
    pub evals: f64,
    /// Noisy objective at the current iterate as seen by the solver.
    pub noisy_f: f64,
    /// Noise-free objective, filled in by the monitor when it reads it.
    pub true_phi: Option<f64>,
    /// Step length of the line search that produced this iterate.
    pub alpha: f64,
    pub grad_norm: f64,
    /// Whether curvature estimates were recomputed during this iteration.
    pub reestimated: bool,
    /// Trust radius after the iteration (least squares only).
    pub radius: Option<f64>,
    /// Damping used for the step (least squares only).
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x: Vec<f64>,
    /// Noisy objective at `x` as last observed.
    pub f: f64,
    /// Lowest noisy objective observed at an accepted iterate.
    pub best_noisy_f: f64,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    /// Total evaluation units consumed.
    pub evals: f64,
    pub iterations: usize,
}

/// What a monitor reports back after seeing an iterate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Observation {
    pub true_phi: Option<f64>,
    /// Request termination with [`Termination::Gap`].
    pub stop: bool,
}

/// Harness-side observer called once per accepted iterate.
///
/// Solvers never read the noise-free objective themselves; anything the
/// monitor learns is only written into the trace.
pub trait Monitor {
    fn observe(&mut self, x: &[f64], record: &IterationRecord) -> Observation;
}

/// Observes nothing and never stops the run.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullMonitor;

impl Monitor for NullMonitor {
    fn observe(&mut self, _x: &[f64], _record: &IterationRecord) -> Observation {
        Observation::default()
    }
}

type TruthFn<'a> = Box<dyn Fn(&[f64]) -> Option<f64> + 'a>;

/// Records the true objective and optionally stops once
/// `φ(x) − φ* ≤ τ·max(1, |φ*|)`.
pub struct GapMonitor<'a> {
    truth: TruthFn<'a>,
    target: Option<(f64, f64)>,
}

impl<'a> GapMonitor<'a> {
    /// `target` is `(φ*, τ)`; `None` records the true objective only.
    pub fn new(truth: impl Fn(&[f64]) -> Option<f64> + 'a, target: Option<(f64, f64)>) -> Self {
        Self {
            truth: Box::new(truth),
            target,
        }
    }

    /// Reads φ through the oracle's reporting channel; stops at the gap
    /// target when `tau` is given and the problem has a known φ*.
    pub fn smooth(oracle: &'a NoisyOracle, tau: Option<f64>) -> Self {
        let target = oracle.problem().phi_star.zip(tau);
        Self::new(move |x| oracle.true_value(x).ok(), target)
    }

    /// Same as [`GapMonitor::smooth`] for ½‖γ‖².
    pub fn residual(oracle: &'a ResidualOracle, tau: Option<f64>) -> Self {
        let target = oracle.problem().phi_star.zip(tau);
        Self::new(move |x| oracle.true_objective(x).ok(), target)
    }
}

impl Monitor for GapMonitor<'_> {
    fn observe(&mut self, x: &[f64], _record: &IterationRecord) -> Observation {
        let true_phi = (self.truth)(x);
        let stop = match (true_phi, self.target) {
            (Some(phi), Some((star, tau))) => gap_target(phi, star, tau),
            _ => false,
        };
        Observation { true_phi, stop }
    }
}

/// Pushes `record` after letting the monitor fill in the true objective.
/// Returns whether the monitor asked to stop.
pub(crate) fn record_iterate(
    trace: &mut Vec<IterationRecord>,
    monitor: &mut dyn Monitor,
    x: &[f64],
    mut record: IterationRecord,
) -> bool {
    let obs = monitor.observe(x, &record);
    record.true_phi = obs.true_phi;
    trace.push(record);
    obs.stop
}
