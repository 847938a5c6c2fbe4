//! Experiment spec files.
//!
//! A spec is a flat list of `key = value` lines. Lists are comma separated,
//! `#` starts a comment, and blank lines are ignored. Keys:
//!
//! ```text
//! problems  = ROSENBR, CUBE        # or `all`
//! solvers   = lbfgs-fd, lbfgs-cd   # lbfgs-fd | lbfgs-cd | lm-fd
//! sigma_f   = 0, 1e-5
//! seeds     = 0, 1, 2              # `a..b` expands to a, a+1, ..., b-1
//! budget    = 500                  # evaluations per unknown, optional
//! lipschitz = mw                   # mw | idealized[:k] | fixed:<value>, optional
//! gap_tau   = 1e-6                 # noiseless runs stop at this gap; `none` disables
//! exclude   = BROWNDEN             # optional, removed after `all` expansion
//! output    = results/run1         # optional output directory
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use fdnoise::bench::{Cell, CurvatureMode, SolverKind};
use fdnoise::problem::{catalog, CatalogEntry};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub problems: Vec<String>,
    pub solvers: Vec<SolverKind>,
    pub sigma_f: Vec<f64>,
    pub seeds: Vec<u64>,
    pub budget_multiplier: f64,
    pub lipschitz: CurvatureMode,
    /// Gap tolerance used to stop noiseless runs.
    pub gap_tau: Option<f64>,
    pub output: Option<PathBuf>,
}

const KEYS: [&str; 9] = [
    "problems", "solvers", "sigma_f", "seeds", "budget", "lipschitz", "gap_tau", "exclude", "output",
];

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("spec field `{field}`: {msg}"))
}

fn list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_seeds(value: &str) -> Result<Vec<u64>, CliError> {
    let mut seeds = Vec::new();
    for item in list(value) {
        if let Some((a, b)) = item.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad("seeds", format!("bad range `{item}`")))?;
            let b: u64 = b.trim().parse().map_err(|_| bad("seeds", format!("bad range `{item}`")))?;
            seeds.extend(a..b);
        } else {
            seeds.push(item.parse().map_err(|_| bad("seeds", format!("bad seed `{item}`")))?);
        }
    }
    Ok(seeds)
}

fn parse_lipschitz(value: &str) -> Result<CurvatureMode, CliError> {
    let (head, arg) = match value.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (value.trim(), None),
    };
    match (head, arg) {
        ("mw", None) => Ok(CurvatureMode::Mw),
        ("idealized", None) => Ok(CurvatureMode::Idealized(9)),
        ("idealized", Some(k)) => match k.parse::<u8>() {
            Ok(k @ 1..=9) => Ok(CurvatureMode::Idealized(k)),
            _ => Err(bad("lipschitz", format!("scheme must be 1..9, got `{k}`"))),
        },
        ("fixed", Some(v)) => match v.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(CurvatureMode::Fixed(v)),
            _ => Err(bad("lipschitz", format!("fixed value must be positive, got `{v}`"))),
        },
        _ => Err(bad("lipschitz", format!("unknown mode `{value}`"))),
    }
}

fn catalog_names(least_squares: bool) -> Vec<String> {
    catalog()
        .into_iter()
        .filter(|e| matches!(e, CatalogEntry::Residual(..)) == least_squares)
        .map(|e| e.name().to_string())
        .collect()
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("spec line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(bad(key, "unknown key"));
            }
            if fields.insert(key, value.trim()).is_some() {
                return Err(bad(key, "given more than once"));
            }
        }
        let required = |k: &str| fields.get(k).copied().ok_or_else(|| bad(k, "missing"));

        let mut solvers = Vec::new();
        for s in list(required("solvers")?) {
            let kind = SolverKind::parse(s).ok_or_else(|| bad("solvers", format!("unknown solver `{s}`")))?;
            if !solvers.contains(&kind) {
                solvers.push(kind);
            }
        }
        if solvers.is_empty() {
            return Err(bad("solvers", "empty list"));
        }

        let exclude: Vec<String> = fields
            .get("exclude")
            .map(|v| list(v).into_iter().map(str::to_ascii_uppercase).collect())
            .unwrap_or_default();
        let problems_field = required("problems")?;
        let mut problems: Vec<String> = if problems_field.eq_ignore_ascii_case("all") {
            let mut names = Vec::new();
            for kind in &solvers {
                for name in catalog_names(kind.is_least_squares()) {
                    if !names.contains(&name) {
                        names.push(name);
                    }
                }
            }
            names
        } else {
            list(problems_field).into_iter().map(str::to_ascii_uppercase).collect()
        };
        problems.retain(|p| !exclude.contains(p));
        if problems.is_empty() {
            return Err(bad("problems", "empty list"));
        }
        if !problems_field.eq_ignore_ascii_case("all") {
            for p in &problems {
                for kind in &solvers {
                    if !kind.knows_problem(p) {
                        return Err(bad(
                            "problems",
                            format!("unknown problem `{p}` for solver {}", kind.id()),
                        ));
                    }
                }
            }
        }

        let mut sigma_f = Vec::new();
        for s in list(required("sigma_f")?) {
            let v: f64 = s.parse().map_err(|_| bad("sigma_f", format!("bad value `{s}`")))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad("sigma_f", format!("must be finite and >= 0, got `{s}`")));
            }
            sigma_f.push(v);
        }
        if sigma_f.is_empty() {
            return Err(bad("sigma_f", "empty list"));
        }

        let seeds = parse_seeds(required("seeds")?)?;
        if seeds.is_empty() {
            return Err(bad("seeds", "empty list"));
        }

        let budget_multiplier = match fields.get("budget") {
            Some(v) => v.parse::<f64>().map_err(|_| bad("budget", format!("bad value `{v}`")))?,
            None => 500.0,
        };
        if !(budget_multiplier >= 1.0 && budget_multiplier.is_finite()) {
            return Err(bad("budget", format!("must be >= 1, got {budget_multiplier}")));
        }

        let lipschitz = match fields.get("lipschitz") {
            Some(v) => parse_lipschitz(v)?,
            None => CurvatureMode::Mw,
        };

        let gap_tau = match fields.get("gap_tau") {
            None => Some(1e-6),
            Some(v) if v.eq_ignore_ascii_case("none") => None,
            Some(v) => match v.parse::<f64>() {
                Ok(t) if t > 0.0 => Some(t),
                _ => return Err(bad("gap_tau", format!("must be positive or `none`, got `{v}`"))),
            },
        };

        Ok(Self {
            problems,
            solvers,
            sigma_f,
            seeds,
            budget_multiplier,
            lipschitz,
            gap_tau,
            output: fields.get("output").map(PathBuf::from),
        })
    }

    /// Grid cells in a fixed order: solver, problem, σ_f, seed. With `all`,
    /// each solver only gets the problems of its own catalog.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &solver in &self.solvers {
            for problem in &self.problems {
                if !solver.knows_problem(problem) {
                    continue;
                }
                for &sigma_f in &self.sigma_f {
                    for &seed in &self.seeds {
                        cells.push(Cell {
                            solver,
                            problem: problem.clone(),
                            sigma_f,
                            seed,
                            budget_multiplier: self.budget_multiplier,
                            curvature: self.lipschitz,
                            // Noisy runs go until the solver itself stops.
                            gap_tau: if sigma_f == 0.0 { self.gap_tau } else { None },
                        });
                    }
                }
            }
        }
        cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "problems = rosenbr\nsolvers = lbfgs-fd\nsigma_f = 0\nseeds = 0\n";

    #[test]
    fn minimal_spec() {
        let s = ExperimentSpec::parse(BASIC).unwrap();
        assert_eq!(s.problems, vec!["ROSENBR"]);
        assert_eq!(s.budget_multiplier, 500.0);
        assert_eq!(s.lipschitz, CurvatureMode::Mw);
        assert_eq!(s.gap_tau, Some(1e-6));
        assert_eq!(s.cells().len(), 1);
    }

    #[test]
    fn lists_ranges_and_comments() {
        let text = "# grid\nproblems = ROSENBR, CUBE # two\nsolvers = lbfgs-fd, lbfgs-cd\n\
                    sigma_f = 0, 1e-3\nseeds = 0..3, 10\nlipschitz = fixed:2.5\ngap_tau = none\n";
        let s = ExperimentSpec::parse(text).unwrap();
        assert_eq!(s.seeds, vec![0, 1, 2, 10]);
        assert_eq!(s.lipschitz, CurvatureMode::Fixed(2.5));
        assert_eq!(s.gap_tau, None);
        assert_eq!(s.cells().len(), 2 * 2 * 2 * 4);
    }

    #[test]
    fn all_follows_each_solver_catalog() {
        let s = ExperimentSpec::parse("problems = all\nsolvers = lm-fd\nsigma_f = 0\nseeds = 0\nexclude = LINFULL\n").unwrap();
        assert_eq!(s.problems.len(), 8);
        let s = ExperimentSpec::parse("problems = all\nsolvers = lbfgs-fd, lm-fd\nsigma_f = 0\nseeds = 0\n").unwrap();
        let cells = s.cells();
        assert_eq!(cells.iter().filter(|c| c.solver == SolverKind::LmFd).count(), 9);
        assert_eq!(cells.iter().filter(|c| c.solver == SolverKind::LbfgsFd).count(), 15);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("problems = NOPE\nsolvers = lbfgs-fd\nsigma_f = 0\nseeds = 0\n", "NOPE"),
            ("problems = CUBE\nsolvers = lm-fd\nsigma_f = 0\nseeds = 0\n", "CUBE"),
            ("problems = CUBE\nsolvers = newton\nsigma_f = 0\nseeds = 0\n", "solvers"),
            ("problems = CUBE\nsolvers = lbfgs-fd\nsigma_f = -1\nseeds = 0\n", "sigma_f"),
            ("problems = CUBE\nsolvers = lbfgs-fd\nsigma_f = 0\nseeds = x\n", "seeds"),
            ("problems = CUBE\nsolvers = lbfgs-fd\nsigma_f = 0\nseeds = 0\nbudget = 0.5\n", "budget"),
            ("problems = CUBE\nsolvers = lbfgs-fd\nsigma_f = 0\nseeds = 0\nlipschitz = magic\n", "lipschitz"),
            ("problems = CUBE\nsolvers = lbfgs-fd\nsigma_f = 0\n", "seeds"),
            ("problems = CUBE\nsolvers = lbfgs-fd\nsigma_f = 0\nseeds = 0\ncolour = red\n", "colour"),
            ("problems = CUBE\nproblems = CUBE\n", "problems"),
        ];
        for (text, needle) in cases {
            let err = ExperimentSpec::parse(text).unwrap_err();
            assert!(err.to_string().contains(needle), "{err} should mention {needle}");
            assert_eq!(err.exit_code(), 2);
        }
    }
}
