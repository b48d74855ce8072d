//! Solver parameters and their admissibility checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{operator_norm, NormEstimate};
use crate::problem::SplitProblem;

/// Multiplier applied to the power-iteration estimate before the step-size
/// bound is evaluated. The estimate approaches the true norm from below, so
/// the bound is checked against a slightly inflated value.
pub const NORM_SAFETY: f64 = 1.01;

const NORM_TOL: f64 = 1e-10;
const NORM_MAX_ITER: usize = 10_000;

/// Regularization radii for the image-side resolvents, one per iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RSchedule {
    Constant { r: f64 },
    /// Explicit per-iteration values; the last one persists once exhausted.
    PerIteration { values: Vec<f64> },
}

impl RSchedule {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            RSchedule::Constant { r } => *r,
            RSchedule::PerIteration { values } => {
                let last = values.len().saturating_sub(1);
                values.get(n.min(last)).copied().unwrap_or(f64::NAN)
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            RSchedule::Constant { r } => *r,
            RSchedule::PerIteration { values } => {
                values.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }
}

fn default_r_schedule() -> RSchedule {
    RSchedule::Constant { r: 1.0 }
}

fn default_r_min() -> f64 {
    1e-3
}

fn default_max_iter() -> usize {
    10_000
}

fn default_tol_residual() -> f64 {
    1e-6
}

fn default_inner_tol() -> f64 {
    1e-10
}

fn default_inner_max_iter() -> usize {
    50_000
}

fn default_projection_tol() -> f64 {
    1e-12
}

fn default_projection_max_sweeps() -> usize {
    20_000
}

/// All tunable solver parameters. `lambda` and `mu` have no defaults; the
/// remaining knobs fall back to conservative values when absent from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Extragradient step for the source-side prox subproblems.
    pub lambda: f64,
    /// Step along the adjoint correction; admissible iff mu < 2 / ||A||^2.
    pub mu: f64,
    #[serde(default = "default_r_schedule")]
    pub r_schedule: RSchedule,
    /// Hard floor for every resolvent radius.
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Outer stop: the step residual must fall to or below this.
    #[serde(default = "default_tol_residual")]
    pub tol_residual: f64,
    /// Target accuracy for prox subproblems and resolvents.
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_inner_max_iter")]
    pub inner_max_iter: usize,
    /// Rayon pool size; None uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_projection_tol")]
    pub projection_tol: f64,
    #[serde(default = "default_projection_max_sweeps")]
    pub projection_max_sweeps: usize,
    /// Drop provably redundant accumulated halfspaces in the hybrid loop.
    #[serde(default)]
    pub prune_cuts: bool,
}

impl SolverConfig {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            r_schedule: default_r_schedule(),
            r_min: default_r_min(),
            max_iter: default_max_iter(),
            tol_residual: default_tol_residual(),
            inner_tol: default_inner_tol(),
            inner_max_iter: default_inner_max_iter(),
            workers: None,
            projection_tol: default_projection_tol(),
            projection_max_sweeps: default_projection_max_sweeps(),
            prune_cuts: false,
        }
    }

    /// Steps sized at 90% of their admissible bounds. Fails when a source
    /// bifunction declares no Lipschitz-type constants.
    pub fn recommended(prob: &SplitProblem) -> Result<Self> {
        let (c1, c2) = prob.max_lipschitz_constants().ok_or_else(|| {
            Error::ConfigRejected(
                "cannot derive a step size: a source bifunction declares no Lipschitz-type constants"
                    .into(),
            )
        })?;
        let cmax = c1.max(c2);
        let lambda = if cmax > 0.0 { 0.45 / cmax } else { 1.0 };
        let est = operator_norm(prob.a(), NORM_TOL, NORM_MAX_ITER);
        let sigma = est.value * NORM_SAFETY;
        let mu = if sigma > 0.0 { 0.9 * 2.0 / (sigma * sigma) } else { 1.0 };
        Ok(Self::new(lambda, mu))
    }
}

/// Outcome of checking a config against a problem. `issues` is empty iff
/// every bound holds; each entry is a self-contained violation description.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub issues: Vec<String>,
    pub lambda: f64,
    /// min over i of min{1/(2 c1_i), 1/(2 c2_i)}; None when constants are missing.
    pub lambda_bound: Option<f64>,
    pub mu: f64,
    /// 2 / (NORM_SAFETY * estimate)^2, infinite for a zero operator.
    pub mu_bound: f64,
    pub r_min: f64,
    pub norm_estimate: NormEstimate,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            write!(
                f,
                "config ok: lambda = {} (bound {}), mu = {} (bound {}), r_min = {}",
                self.lambda,
                match self.lambda_bound {
                    Some(b) => b.to_string(),
                    None => "unknown".into(),
                },
                self.mu,
                self.mu_bound,
                self.r_min
            )
        } else {
            write!(f, "config rejected:")?;
            for issue in &self.issues {
                write!(f, "\n  - {issue}")?;
            }
            Ok(())
        }
    }
}

/// Checks every admissibility bound and reports all violations at once:
/// 0 < lambda strictly below the Lipschitz bound, 0 < mu strictly below
/// 2/||A||^2, r_min positive, schedule values at or above r_min, and sane
/// auxiliary knobs. Missing constants on a source bifunction are reported
/// by index.
pub fn validate_config(prob: &SplitProblem, cfg: &SolverConfig) -> ValidationReport {
    let mut issues = Vec::new();

    let mut cmax = 0.0_f64;
    let mut constants_ok = true;
    for (i, f) in prob.f_c().iter().enumerate() {
        match f.lipschitz_constants() {
            Some((c1, c2)) => {
                if !(c1.is_finite() && c2.is_finite()) || c1 < 0.0 || c2 < 0.0 {
                    issues.push(format!(
                        "source bifunction {i}: Lipschitz-type constants ({c1}, {c2}) must be finite and nonnegative"
                    ));
                    constants_ok = false;
                } else {
                    cmax = cmax.max(c1).max(c2);
                }
            }
            None => {
                issues.push(format!(
                    "source bifunction {i}: missing Lipschitz-type constants"
                ));
                constants_ok = false;
            }
        }
    }

    let lambda_bound = if constants_ok {
        Some(if cmax > 0.0 { 1.0 / (2.0 * cmax) } else { f64::INFINITY })
    } else {
        None
    };

    if !(cfg.lambda.is_finite() && cfg.lambda > 0.0) {
        issues.push(format!("lambda = {} must be positive and finite", cfg.lambda));
    } else if let Some(bound) = lambda_bound {
        if cfg.lambda >= bound {
            issues.push(format!(
                "lambda = {} violates the strict bound lambda < {bound} from the Lipschitz-type constants",
                cfg.lambda
            ));
        }
    }

    let norm_estimate = operator_norm(prob.a(), NORM_TOL, NORM_MAX_ITER);
    if !norm_estimate.converged {
        issues.push(format!(
            "operator norm estimate did not converge after {} iterations",
            norm_estimate.iterations
        ));
    }
    let sigma = norm_estimate.value * NORM_SAFETY;
    let mu_bound = if sigma > 0.0 { 2.0 / (sigma * sigma) } else { f64::INFINITY };
    if !(cfg.mu.is_finite() && cfg.mu > 0.0) {
        issues.push(format!("mu = {} must be positive and finite", cfg.mu));
    } else if cfg.mu >= mu_bound {
        issues.push(format!(
            "mu = {} violates the strict bound mu < {mu_bound} (operator norm estimate {})",
            cfg.mu, norm_estimate.value
        ));
    }

    if !(cfg.r_min.is_finite() && cfg.r_min > 0.0) {
        issues.push(format!("r_min = {} must be positive and finite", cfg.r_min));
    }
    match &cfg.r_schedule {
        RSchedule::Constant { r } => {
            if !r.is_finite() || *r < cfg.r_min {
                issues.push(format!(
                    "resolvent radius {} is below r_min = {}",
                    r, cfg.r_min
                ));
            }
        }
        RSchedule::PerIteration { values } => {
            if values.is_empty() {
                issues.push("resolvent schedule has no values".into());
            }
            for (n, r) in values.iter().enumerate() {
                if !r.is_finite() || *r < cfg.r_min {
                    issues.push(format!(
                        "resolvent schedule value {} at position {} is below r_min = {}",
                        r, n, cfg.r_min
                    ));
                }
            }
        }
    }

    if cfg.max_iter == 0 {
        issues.push("max_iter must be at least 1".into());
    }
    if !(cfg.tol_residual.is_finite() && cfg.tol_residual > 0.0) {
        issues.push(format!(
            "tol_residual = {} must be positive and finite",
            cfg.tol_residual
        ));
    }
    if !(cfg.inner_tol.is_finite() && cfg.inner_tol > 0.0) {
        issues.push(format!("inner_tol = {} must be positive and finite", cfg.inner_tol));
    }
    if cfg.inner_max_iter == 0 {
        issues.push("inner_max_iter must be at least 1".into());
    }
    if !(cfg.projection_tol.is_finite() && cfg.projection_tol > 0.0) {
        issues.push(format!(
            "projection_tol = {} must be positive and finite",
            cfg.projection_tol
        ));
    }
    if cfg.projection_max_sweeps == 0 {
        issues.push("projection_max_sweeps must be at least 1".into());
    }
    if cfg.workers == Some(0) {
        issues.push("workers must be at least 1 when given".into());
    }

    ValidationReport {
        issues,
        lambda: cfg.lambda,
        lambda_bound,
        mu: cfg.mu,
        mu_bound,
        r_min: cfg.r_min,
        norm_estimate,
    }
}
