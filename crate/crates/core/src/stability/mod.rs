//! Constraint qualifications and second-order tilt-stability conditions at
//! a stationary point `x̄` of `min g(x) s.t. q(x) ≤ 0`.

mod cq;
mod delta;
mod graph_deriv;
mod rusosc;
mod second_order;

pub use cq::{
    check_crcq, check_licq, check_mfcq, distance_to_feasible, estimate_bepp, estimate_mscq,
    shells_diverge, BeppReport, BeppShell, BeppWitness, CrcqReport, CrcqWitness, LicqReport,
    MfcqReport, MscqEstimate, ShellRatio, DIVERGENCE_FACTOR, MAX_CRCQ_ACTIVE, SHELLS,
};
pub use delta::{build_delta, build_delta_extreme, sample_cone_directions, ConeSample, DeltaSet};
pub use graph_deriv::{graphical_derivative, GraphDerivSet};
pub use rusosc::{check_rusosc_sampled, RusoscConfig, RusoscReport, RusoscWitness};
pub use second_order::{
    check_extreme_point_variant, check_kappa_free, check_pointbased, check_ssosc,
    delta_spectrum, recheck_witness, tilt_bound, DeltaEntry, SsoscReport, MAX_SSOSC_ACTIVE,
};

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::nlp::{ConeRep, MultiplierSet, NlpError, PointEvaluation, Problem, Stationarity};
use crate::polyhedra::PolyError;

/// `‖∇g(x̄) + ∇q(x̄)ᵀλ‖∞` above this means `x̄` is not stationary.
pub const STATIONARY_TOL: f64 = 1e-8;
/// Slack for strict eigenvalue comparisons.
pub const EIG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Nlp(#[from] NlpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("point is not stationary (residual {residual:e})")]
    NotStationary { residual: f64 },
    #[error("{size} active constraints exceed the limit of {limit}")]
    ActiveSetTooLarge { size: usize, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<PolyError> for AnalysisError {
    fn from(e: PolyError) -> Self {
        AnalysisError::Nlp(NlpError::Poly(e))
    }
}

impl From<crate::expr::ExprError> for AnalysisError {
    fn from(e: crate::expr::ExprError) -> Self {
        AnalysisError::Nlp(NlpError::Expr(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "Holds",
            Verdict::Fails => "Fails",
            Verdict::NotApplicable => "NotApplicable",
        }
    }
}

/// `(λ, w)` violating a second-order inequality: `w` satisfies
/// `⟨∇q_i, w⟩ = 0` for `i ∈ I⁺(λ)` and `⟨∇²L(λ)w, w⟩ ≤ threshold·‖w‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderWitness {
    pub lambda: Vec<f64>,
    pub w: Vec<f64>,
    /// `⟨∇²L(λ)w, w⟩ / ‖w‖²`.
    pub value: f64,
    pub threshold: f64,
}

/// Outcome of one pointbased second-order condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub verdict: Verdict,
    /// Strength of the verdict: `exact`, `on sampled Δ`, `vacuous`.
    pub qualifier: Option<String>,
    /// Why the condition was not evaluated.
    pub reason: Option<String>,
    pub witness: Option<SecondOrderWitness>,
    /// Smallest reduced eigenvalue seen, if any reduced space was
    /// nontrivial.
    pub min_form: Option<f64>,
    /// Required lower bound on the reduced eigenvalues.
    pub threshold: f64,
    /// Modulus implied by the condition, when it holds.
    pub modulus: Option<f64>,
}

impl ConditionReport {
    pub fn not_applicable(reason: &str) -> Self {
        ConditionReport {
            verdict: Verdict::NotApplicable,
            qualifier: None,
            reason: Some(reason.to_string()),
            witness: None,
            min_form: None,
            threshold: f64::NAN,
            modulus: None,
        }
    }
}

/// Everything the second-order checks need at `x̄`: derivative data,
/// `x̄* = -∇g(x̄)`, the multiplier set `Λ(x̄, x̄*)` and the critical cone.
#[derive(Debug, Clone)]
pub struct StationaryPoint {
    pub ev: PointEvaluation,
    pub xstar: Vec<f64>,
    pub stationarity: Stationarity,
    pub multipliers: MultiplierSet,
    pub critical_cone: ConeRep,
}

impl StationaryPoint {
    pub fn new(problem: &Problem) -> Result<Self, AnalysisError> {
        let ev = problem.evaluate(problem.point())?;
        let stationarity = ev.stationarity()?;
        if stationarity.residual > STATIONARY_TOL {
            return Err(AnalysisError::NotStationary {
                residual: stationarity.residual,
            });
        }
        let xstar: Vec<f64> = ev.grad_g.iter().map(|v| -v).collect();
        let multipliers = ev.multiplier_set(&xstar)?;
        let lambda_ref = multipliers
            .vertices()
            .first()
            .cloned()
            .unwrap_or_else(|| stationarity.multiplier.clone());
        let critical_cone = match ev.critical_cone(&xstar, &lambda_ref) {
            Ok(k) => k,
            Err(NlpError::NotAMultiplier { .. }) => {
                ev.critical_cone(&xstar, &stationarity.multiplier)?
            }
            Err(e) => return Err(e.into()),
        };
        Ok(StationaryPoint {
            ev,
            xstar,
            stationarity,
            multipliers,
            critical_cone,
        })
    }

    pub fn n(&self) -> usize {
        self.ev.n()
    }

    pub fn m(&self) -> usize {
        self.ev.m()
    }
}

#[cfg(test)]
pub(crate) mod test_problems {
    use crate::expr::parse_expr;
    use crate::nlp::Problem;

    pub fn problem(vars: &[&str], obj: &str, cons: &[&str], point: &[f64]) -> Problem {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let g = parse_expr(obj, &vars).unwrap();
        let q = cons.iter().map(|c| parse_expr(c, &vars).unwrap()).collect();
        Problem::new(vars, g, q, point.to_vec()).unwrap()
    }

    /// Two opposite affine constraints pinning `x1 = x2`.
    pub fn twin() -> Problem {
        problem(&["x1", "x2"], "x1^2+x2^2", &["x1-x2", "x2-x1"], &[0.0, 0.0])
    }

    /// Nonconvex objective with the feasible set `{0} × R`.
    pub fn nonconvex() -> Problem {
        problem(&["x1", "x2"], "x2^2+x1*x2-x1", &["-x1", "x1", "x1*x2^2"], &[0.0, 0.0])
    }

    /// Feasible set made of the two coordinate axes.
    pub fn cross() -> Problem {
        problem(&["x1", "x2"], "x1^2+x2^2", &["x1*x2", "-x1*x2"], &[0.0, 0.0])
    }

    pub fn halfplane() -> Problem {
        problem(&["x1", "x2"], "x1^2+x2^2", &["x1"], &[0.0, 0.0])
    }

    pub fn bowl() -> Problem {
        problem(&["x1", "x2"], "x1^2+x2^2", &[], &[0.0, 0.0])
    }
}
