//! Built-in desk-scale test set.
//!
//! The smooth entries use the sum-of-squares convention φ = Σγ_i² of the
//! unconstrained literature; the residual entries use ½‖γ‖². Optimal values
//! were obtained by running exact-gradient L-BFGS to stagnation from `x0`
//! (cross-checked against published values where they exist) and are frozen
//! here.

use std::sync::Arc;

use super::models::*;
use super::{Objective, ResidualProblem, Residuals, SmoothProblem};

#[derive(Debug, Clone)]
pub struct Metadata {
    /// Where the algebraic definition comes from.
    pub provenance: &'static str,
    /// Notes on the starting point choice.
    pub x0_note: &'static str,
}

#[derive(Debug, Clone)]
pub enum CatalogEntry {
    Smooth(SmoothProblem, Metadata),
    Residual(ResidualProblem, Metadata),
}

impl CatalogEntry {
    pub fn name(&self) -> &str {
        match self {
            CatalogEntry::Smooth(p, _) => &p.name,
            CatalogEntry::Residual(p, _) => &p.name,
        }
    }

    pub fn metadata(&self) -> &Metadata {
        match self {
            CatalogEntry::Smooth(_, m) | CatalogEntry::Residual(_, m) => m,
        }
    }
}

const MGH: &str = "More, Garbow & Hillstrom (1981) test set";
const CUTE: &str = "CUTE/CUTEst collection, algebraic form";
const STANDARD_X0: &str = "standard starting point of the source collection";

struct SmoothSpec {
    name: &'static str,
    x0: Vec<f64>,
    phi_star: f64,
    objective: Arc<dyn Objective>,
    provenance: &'static str,
    x0_note: &'static str,
}

fn sos(r: impl Residuals + 'static) -> Arc<dyn Objective> {
    Arc::new(SumOfSquares::new(Arc::new(r)))
}

fn smooth_specs() -> Vec<SmoothSpec> {
    vec![
        SmoothSpec {
            name: "ROSENBR",
            x0: vec![-1.2, 1.0],
            phi_star: 0.0,
            objective: sos(Rosenbrock),
            provenance: MGH,
            x0_note: STANDARD_X0,
        },
        SmoothSpec {
            name: "CUBE",
            x0: vec![-1.2, 1.0],
            phi_star: 0.0,
            objective: sos(Cube),
            provenance: CUTE,
            x0_note: STANDARD_X0,
        },
        SmoothSpec {
            name: "DENSCHNE",
            x0: vec![2.0, 3.0, -8.0],
            phi_star: 0.0,
            objective: sos(Denschne),
            provenance: CUTE,
            x0_note: STANDARD_X0,
        },
        SmoothSpec {
            name: "HELIX",
            x0: vec![-1.0, 0.0, 0.0],
            phi_star: 0.0,
            objective: sos(Helix),
            provenance: MGH,
            x0_note: STANDARD_X0,
        },
        SmoothSpec {
            name: "BARD",
            x0: vec![1.0, 1.0, 1.0],
            phi_star: BARD_SOS_STAR,
            objective: sos(Bard),
            provenance: MGH,
            x0_note: STANDARD_X0,
        },
        SmoothSpec {
            name: "BOX3D",
            x0: vec![0.0, 10.0, 20.0],
            phi_star: 0.0,
            objective: sos(Box3d),
            provenance: MGH,
            x0_note: "standard starting point; m = 10 residuals",
        },
        SmoothSpec {
            name: "POWELLSG",
            x0: vec![3.0, -1.0, 0.0, 1.0],
            phi_star: 0.0,
            objective: sos(PowellSingular),
            provenance: MGH,
            x0_note: STANDARD_X0,
        },
        SmoothSpec {
            name: "FREUROTH",
            x0: vec![0.5, -2.0],
            phi_star: FREUROTH_STAR,
            objective: sos(Freudenstein),
            provenance: MGH,
            x0_note: "standard starting point; the run from x0 reaches the local minimizer near (11.41, -0.8968)",
        },
        SmoothSpec {
            name: "TRIDIA",
            x0: vec![1.0; 10],
            phi_star: 0.0,
            objective: sos(Tridia { n: 10 }),
            provenance: CUTE,
            x0_note: "n = 10, all ones",
        },
        SmoothSpec {
            name: "DQRTIC",
            x0: vec![2.0; 10],
            phi_star: 0.0,
            objective: sos(Dqrtic { n: 10 }),
            provenance: CUTE,
            x0_note: "n = 10, all twos",
        },
        SmoothSpec {
            name: "ARWHEAD",
            x0: vec![1.0; 100],
            phi_star: 0.0,
            objective: Arc::new(QuarticPairs::arrowhead(100)),
            provenance: CUTE,
            x0_note: "n = 100, all ones",
        },
        SmoothSpec {
            name: "NONDIA",
            x0: vec![-1.0; 10],
            phi_star: 0.0,
            objective: sos(Nondia { n: 10 }),
            provenance: CUTE,
            x0_note: "n = 10, all minus ones",
        },
        SmoothSpec {
            name: "ENGVAL1",
            x0: vec![2.0, 2.0],
            phi_star: ENGVAL1_STAR,
            objective: Arc::new(QuarticPairs::chained(2)),
            provenance: CUTE,
            x0_note: "n = 2, all twos",
        },
        SmoothSpec {
            name: "SINEVAL",
            x0: vec![4.712389, -1.0],
            phi_star: 0.0,
            objective: sos(Sineval),
            provenance: CUTE,
            x0_note: STANDARD_X0,
        },
        SmoothSpec {
            name: "BRKMCC",
            x0: vec![2.0, 2.0],
            phi_star: BRKMCC_STAR,
            objective: Arc::new(Brkmcc),
            provenance: CUTE,
            x0_note: STANDARD_X0,
        },
    ]
}

struct ResidualSpec {
    name: &'static str,
    x0: Vec<f64>,
    phi_star: f64,
    residuals: Arc<dyn Residuals>,
    x0_note: &'static str,
}

fn residual_specs() -> Vec<ResidualSpec> {
    vec![
        ResidualSpec {
            name: "ROSENBR",
            x0: vec![-1.2, 1.0],
            phi_star: 0.0,
            residuals: Arc::new(Rosenbrock),
            x0_note: STANDARD_X0,
        },
        ResidualSpec {
            name: "HELIX",
            x0: vec![-1.0, 0.0, 0.0],
            phi_star: 0.0,
            residuals: Arc::new(Helix),
            x0_note: STANDARD_X0,
        },
        ResidualSpec {
            name: "BARD",
            x0: vec![1.0, 1.0, 1.0],
            phi_star: 0.5 * BARD_SOS_STAR,
            residuals: Arc::new(Bard),
            x0_note: STANDARD_X0,
        },
        ResidualSpec {
            name: "BOX3D",
            x0: vec![0.0, 10.0, 20.0],
            phi_star: 0.0,
            residuals: Arc::new(Box3d),
            x0_note: "standard starting point; m = 10",
        },
        ResidualSpec {
            name: "POWELLSG",
            x0: vec![3.0, -1.0, 0.0, 1.0],
            phi_star: 0.0,
            residuals: Arc::new(PowellSingular),
            x0_note: STANDARD_X0,
        },
        ResidualSpec {
            name: "BROWNDEN",
            x0: vec![25.0, 5.0, -5.0, -1.0],
            phi_star: BROWNDEN_HALF_STAR,
            residuals: Arc::new(BrownDennis),
            x0_note: STANDARD_X0,
        },
        ResidualSpec {
            name: "KOWOSB",
            x0: vec![0.25, 0.39, 0.415, 0.39],
            phi_star: KOWOSB_HALF_STAR,
            residuals: Arc::new(KowalikOsborne),
            x0_note: STANDARD_X0,
        },
        ResidualSpec {
            name: "BROWNAL",
            x0: vec![0.5; 10],
            phi_star: 0.0,
            residuals: Arc::new(BrownAlmostLinear { n: 10 }),
            x0_note: "n = m = 10, all one-half",
        },
        ResidualSpec {
            name: "LINFULL",
            x0: vec![1.0; 9],
            phi_star: 18.0,
            residuals: Arc::new(LinearFullRank { n: 9, m: 45 }),
            x0_note: "n = 9, m = 45, all ones",
        },
    ]
}

// Frozen optimal values (see module docs).
const BARD_SOS_STAR: f64 = 8.214877306578963e-3;
const FREUROTH_STAR: f64 = 48.98425367923999;
const ENGVAL1_STAR: f64 = 0.0;
const BRKMCC_STAR: f64 = 0.1690426791964503;
const BROWNDEN_HALF_STAR: f64 = 42911.10081317813;
const KOWOSB_HALF_STAR: f64 = 1.537528019246186e-4;

/// Every catalog problem, smooth entries first.
pub fn catalog() -> Vec<CatalogEntry> {
    let smooth = smooth_specs().into_iter().map(|s| {
        CatalogEntry::Smooth(
            SmoothProblem::new(s.name, s.x0, Some(s.phi_star), s.objective),
            Metadata {
                provenance: s.provenance,
                x0_note: s.x0_note,
            },
        )
    });
    let residual = residual_specs().into_iter().map(|s| {
        CatalogEntry::Residual(
            ResidualProblem::new(s.name, s.x0, Some(s.phi_star), s.residuals),
            Metadata {
                provenance: MGH,
                x0_note: s.x0_note,
            },
        )
    });
    smooth.chain(residual).collect()
}

pub fn lookup_smooth(name: &str) -> Option<SmoothProblem> {
    smooth_specs()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .map(|s| SmoothProblem::new(s.name, s.x0, Some(s.phi_star), s.objective))
}

pub fn lookup_residual(name: &str) -> Option<ResidualProblem> {
    residual_specs()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .map(|s| ResidualProblem::new(s.name, s.x0, Some(s.phi_star), s.residuals))
}
