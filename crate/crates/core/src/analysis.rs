//! End-to-end analysis of a stationary point: constraint qualifications,
//! the multiplier subset `Δ(x̄)`, every second-order condition, the
//! tilt-modulus bound and (for `n ≤ 3`) the brute-force oracle.

use crate::nlp::Problem;
use crate::oracle::{
    empirical_modulus_consistency, verify_growth, verify_tilt_stability, ConsistencyRecord,
    GrowthReport, OracleConfig, OracleError, OracleReport, MAX_ORACLE_DIM,
};
use crate::stability::{
    build_delta, check_crcq, check_extreme_point_variant, check_kappa_free, check_licq,
    check_mfcq, check_pointbased, check_rusosc_sampled, check_ssosc, delta_spectrum,
    estimate_bepp, estimate_mscq, tilt_bound, AnalysisError, BeppReport, ConditionReport,
    CrcqReport, DeltaEntry, DeltaSet, LicqReport, MfcqReport, MscqEstimate, RusoscConfig,
    RusoscReport, StationaryPoint, MAX_CRCQ_ACTIVE, MAX_SSOSC_ACTIVE,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    /// Ball factor for `Δ(x̄)`; `None` derives it from the MSCQ estimate.
    pub gamma: Option<f64>,
    /// Modulus tested by the pointbased conditions; `None` derives it from
    /// the tilt bound.
    pub kappa: Option<f64>,
    /// RUSOSC level `ℓ`; `None` uses `1/κ`.
    pub ell: Option<f64>,
    pub eta: f64,
    /// Critical-cone directions for `Δ(x̄)`.
    pub directions: usize,
    pub mscq_radius: f64,
    pub mscq_samples: usize,
    pub crcq_radius: f64,
    pub crcq_samples: usize,
    pub bepp_radius: f64,
    pub bepp_points: usize,
    pub bepp_directions: usize,
    pub rusosc_points: usize,
    pub rusosc_directions: usize,
    pub rusosc_enforce_ball: bool,
    /// `None` skips the oracle.
    pub oracle: Option<OracleConfig>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            gamma: None,
            kappa: None,
            ell: None,
            eta: 1e-2,
            directions: 500,
            mscq_radius: 0.1,
            mscq_samples: 2000,
            crcq_radius: 1e-2,
            crcq_samples: 200,
            bepp_radius: 0.5,
            bepp_points: 100,
            bepp_directions: 50,
            rusosc_points: 200,
            rusosc_directions: 100,
            rusosc_enforce_ball: true,
            oracle: Some(OracleConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqReport {
    pub licq: LicqReport,
    pub mfcq: MfcqReport,
    /// `None` when the active set is too large to enumerate subsets.
    pub crcq: Option<CrcqReport>,
    pub mscq: MscqEstimate,
    pub bepp: BeppReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderReport {
    pub ssosc: ConditionReport,
    pub ssosc_faces: usize,
    pub pointbased: ConditionReport,
    pub kappa_free: ConditionReport,
    pub extreme_point: ConditionReport,
    pub rusosc: Option<RusoscReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Skipped(String),
    Ran {
        report: Box<OracleReport>,
        growth: Option<GrowthReport>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub config: AnalysisConfig,
    pub residual: f64,
    pub multiplier: Vec<f64>,
    pub multiplier_vertices: Vec<Vec<f64>>,
    pub multiplier_rays: Vec<Vec<f64>>,
    pub active: Vec<usize>,
    pub cq: CqReport,
    pub gamma: f64,
    pub gamma_source: &'static str,
    pub kappa: f64,
    pub kappa_source: &'static str,
    pub delta: Option<DeltaSet>,
    pub spectrum: Vec<DeltaEntry>,
    pub second_order: SecondOrderReport,
    /// `None` when the second-order analysis was not applicable.
    pub tilt_bound: Option<f64>,
    pub oracle: OracleOutcome,
    pub consistency: Option<ConsistencyRecord>,
}

impl AnalysisReport {
    /// `L̂` exceeds the bound beyond the grid slack.
    pub fn inconsistent(&self) -> bool {
        self.consistency.is_some_and(|c| !c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub fn analyze(problem: &Problem, cfg: &AnalysisConfig) -> Result<AnalysisReport, PipelineError> {
    let sp = StationaryPoint::new(problem)?;
    let ev = &sp.ev;

    let licq = check_licq(ev)?;
    let mfcq = check_mfcq(ev)?;
    let crcq = if ev.active.len() <= MAX_CRCQ_ACTIVE {
        Some(check_crcq(problem, ev, cfg.crcq_radius, cfg.crcq_samples)?)
    } else {
        None
    };
    let mscq = estimate_mscq(problem, cfg.mscq_radius, cfg.mscq_samples)?;
    let bepp = estimate_bepp(problem, cfg.bepp_radius, cfg.bepp_points, cfg.bepp_directions)?;

    let (gamma, gamma_source) = match cfg.gamma {
        Some(g) => (g, "flag"),
        None if mscq.kappa_hat > 0.0 && mscq.kappa_hat.is_finite() => {
            (1.5 * mscq.kappa_hat, "1.5*mscq")
        }
        None => (1.0, "fallback"),
    };

    let mut delta = None;
    let mut spectrum = Vec::new();
    let mut bound = None;
    let (kappa, kappa_source, second_order) = if mscq.diverging {
        let na = ConditionReport::not_applicable("mscq");
        let kappa = cfg.kappa.unwrap_or(1.0);
        let src = if cfg.kappa.is_some() { "flag" } else { "fallback" };
        (
            kappa,
            src,
            SecondOrderReport {
                ssosc: na.clone(),
                ssosc_faces: 0,
                pointbased: na.clone(),
                kappa_free: na.clone(),
                extreme_point: na,
                rusosc: None,
            },
        )
    } else {
        let d = build_delta(&sp, gamma, cfg.directions)?;
        spectrum = delta_spectrum(&sp, &d);
        let b = tilt_bound(&spectrum);
        bound = Some(b);
        let (kappa, src) = match cfg.kappa {
            Some(k) => (k, "flag"),
            None if b.is_finite() && b > 0.0 => (1.05 * b, "1.05*bound"),
            None => (1.0, "fallback"),
        };
        let pointbased = check_pointbased(&spectrum, &d, kappa)?;
        let kappa_free = check_kappa_free(&spectrum, &d);
        let (ssosc, ssosc_faces) = if ev.active.len() <= MAX_SSOSC_ACTIVE {
            let r = check_ssosc(&sp)?;
            (r.condition, r.faces)
        } else {
            (ConditionReport::not_applicable("active set too large"), 0)
        };
        let (extreme_point, _) =
            check_extreme_point_variant(&sp, mfcq.holds, kappa, cfg.directions)?;
        let rusosc = check_rusosc_sampled(
            problem,
            RusoscConfig {
                eta: cfg.eta,
                ell: cfg.ell.unwrap_or(1.0 / kappa),
                points: cfg.rusosc_points,
                directions: cfg.rusosc_directions,
                enforce_ball: cfg.rusosc_enforce_ball,
                gamma,
            },
        )?;
        delta = Some(d);
        (
            kappa,
            src,
            SecondOrderReport {
                ssosc,
                ssosc_faces,
                pointbased,
                kappa_free,
                extreme_point,
                rusosc: Some(rusosc),
            },
        )
    };

    let (oracle, consistency) = match &cfg.oracle {
        None => (OracleOutcome::Skipped("disabled".into()), None),
        Some(_) if problem.n() > MAX_ORACLE_DIM => (
            OracleOutcome::Skipped(format!("n = {} > {MAX_ORACLE_DIM}", problem.n())),
            None,
        ),
        Some(ocfg) => {
            let report = verify_tilt_stability(problem, ocfg)?;
            let growth = if report.single_valued {
                Some(verify_growth(problem, kappa, &report)?)
            } else {
                None
            };
            let consistency = bound.map(|b| empirical_modulus_consistency(&report, b));
            (
                OracleOutcome::Ran {
                    report: Box::new(report),
                    growth,
                },
                consistency,
            )
        }
    };

    Ok(AnalysisReport {
        config: *cfg,
        residual: sp.stationarity.residual,
        multiplier: sp.stationarity.multiplier.clone(),
        multiplier_vertices: sp.multipliers.vertices().to_vec(),
        multiplier_rays: sp.multipliers.rays().to_vec(),
        active: ev.active.clone(),
        cq: CqReport {
            licq,
            mfcq,
            crcq,
            mscq,
            bepp,
        },
        gamma,
        gamma_source,
        kappa,
        kappa_source,
        delta,
        spectrum,
        second_order,
        tilt_bound: bound,
        oracle,
        consistency,
    })
}
