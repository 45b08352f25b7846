//! Sampled refutation probe for the relaxed uniform second-order sufficient
//! condition: `⟨∇²L(x, λ)w, w⟩ ≥ ℓ‖w‖²` for subgradient-graph points
//! `(x, v)` near `(x̄, 0)`, `λ ∈ Λ(x, v - ∇g(x); w)` and `w` with
//! `⟨∇q_i(x), w⟩ = 0` on `I⁺(λ)` and `≥ 0` on `I(x) \ I⁺(λ)`.

use rayon::prelude::*;

use super::{AnalysisError, Verdict, EIG_TOL};
use crate::linalg::{dot, norm2, nullspace, Mat, RANK_TOL};
use crate::nlp::{MultiplierSet, PointEvaluation, Problem};
use crate::polyhedra::{dedup_sorted, truncate_ball, BallNorm, LpStatus};
use crate::sampling::{ball_points, sphere_directions};
use crate::search::generating_set;

/// Multipliers `λ0` tried per sampled point.
const MAX_BASE_MULTIPLIERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RusoscConfig {
    /// Radius of the neighborhood of `(x̄, 0)`.
    pub eta: f64,
    /// Required modulus `ℓ`.
    pub ell: f64,
    /// Sampled points `x`.
    pub points: usize,
    /// Directions `w` per point.
    pub directions: usize,
    /// Restrict `λ` to `‖λ‖∞ ≤ γ‖v - ∇g(x)‖₂`.
    pub enforce_ball: bool,
    pub gamma: f64,
}

impl Default for RusoscConfig {
    fn default() -> Self {
        RusoscConfig {
            eta: 1e-2,
            ell: 1.0,
            points: 200,
            directions: 100,
            enforce_ball: true,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RusoscWitness {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    pub w: Vec<f64>,
    /// `⟨∇²L(x, λ)w, w⟩ / ‖w‖²`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RusoscReport {
    /// `Holds` means holds on the samples; `Fails` carries a witness.
    pub verdict: Verdict,
    pub config: RusoscConfig,
    /// Graph points `(x, v)` examined.
    pub graph_points: usize,
    /// Triples `(x, λ, w)` satisfying the direction condition.
    pub checks: usize,
    /// Smallest normalized form seen.
    pub min_value: Option<f64>,
    pub witness: Option<RusoscWitness>,
}

/// Runs the probe around `problem.point()`.
pub fn check_rusosc_sampled(
    problem: &Problem,
    config: RusoscConfig,
) -> Result<RusoscReport, AnalysisError> {
    if !(config.eta > 0.0 && config.ell > 0.0) {
        return Err(AnalysisError::InvalidParameter(
            "η and ℓ must be positive".into(),
        ));
    }
    if config.enforce_ball && !(config.gamma > 0.0) {
        return Err(AnalysisError::InvalidParameter("γ must be positive".into()));
    }
    let xbar = problem.point().to_vec();
    let base = problem.evaluate(&xbar)?;
    let base_set = base.multiplier_set(&base.grad_g.iter().map(|g| -g).collect::<Vec<_>>())?;
    let xs = sample_points(problem, &base, &xbar, config);
    let per_point: Vec<PointOutcome> = xs
        .par_iter()
        .map(|x| probe_point(problem, &base_set, &xbar, x, config))
        .collect();
    let mut report = RusoscReport {
        verdict: Verdict::Holds,
        config,
        graph_points: 0,
        checks: 0,
        min_value: None,
        witness: None,
    };
    for o in per_point {
        report.graph_points += o.graph_points;
        report.checks += o.checks;
        if let Some(mv) = o.min_value {
            report.min_value = Some(report.min_value.map_or(mv, |r| r.min(mv)));
        }
        if let Some(w) = o.witness {
            if report.witness.as_ref().is_none_or(|b| w.value < b.value) {
                report.witness = Some(w);
            }
        }
    }
    if report.witness.is_some() {
        report.verdict = Verdict::Fails;
    }
    Ok(report)
}

/// `x̄`, points along the boundary directions at `x̄` at geometrically
/// shrinking distances, then uniform ball points; all feasible.
fn sample_points(
    problem: &Problem,
    base: &PointEvaluation,
    xbar: &[f64],
    config: RusoscConfig,
) -> Vec<Vec<f64>> {
    let n = problem.n();
    let mut out = vec![xbar.to_vec()];
    let active: Vec<Vec<f64>> = base
        .active
        .iter()
        .map(|&i| base.jacobian.row(i).to_vec())
        .collect();
    let dirs = generating_set(n, &active);
    'outer: for k in 1..=6 {
        let t = config.eta / f64::from(1u32 << k);
        for d in &dirs {
            if out.len() >= config.points {
                break 'outer;
            }
            let x: Vec<f64> = xbar.iter().zip(d).map(|(a, b)| a + t * b).collect();
            if problem.is_feasible(&x) {
                out.push(x);
            }
        }
    }
    let rest = config.points.saturating_sub(out.len());
    out.extend(
        ball_points(xbar, config.eta, rest)
            .into_iter()
            .filter(|x| problem.is_feasible(x)),
    );
    out.truncate(config.points.max(1));
    out
}

#[derive(Default)]
struct PointOutcome {
    graph_points: usize,
    checks: usize,
    min_value: Option<f64>,
    witness: Option<RusoscWitness>,
}

fn probe_point(
    problem: &Problem,
    base_set: &MultiplierSet,
    xbar: &[f64],
    x: &[f64],
    config: RusoscConfig,
) -> PointOutcome {
    let mut out = PointOutcome::default();
    let Ok(ev) = problem.evaluate(x) else {
        return out;
    };
    let dx2: f64 = x.iter().zip(xbar).map(|(a, b)| (a - b).powi(2)).sum();
    for lambda0 in base_multipliers(&ev, base_set) {
        let xstar = ev.jacobian_t_times(&lambda0);
        let v: Vec<f64> = ev.grad_g.iter().zip(&xstar).map(|(g, s)| g + s).collect();
        if (dx2 + dot(&v, &v)).sqrt() > config.eta {
            continue;
        }
        out.graph_points += 1;
        let Ok(set) = ev.multiplier_set(&xstar) else {
            continue;
        };
        if set.is_empty() && ev.m() > 0 {
            continue;
        }
        let radius = config.gamma * norm2(&xstar);
        for w in direction_candidates(&ev, &set, config.directions) {
            for lambda in face_multipliers(&ev, &set, &w, config, radius) {
                if !direction_condition(&ev, &lambda, &w) {
                    continue;
                }
                out.checks += 1;
                let value = ev.lagrangian_hessian(&lambda).quad_form(&w) / dot(&w, &w);
                out.min_value = Some(out.min_value.map_or(value, |m| m.min(value)));
                if value < config.ell - EIG_TOL
                    && out.witness.as_ref().is_none_or(|b| value < b.value)
                {
                    out.witness = Some(RusoscWitness {
                        x: x.to_vec(),
                        v: v.clone(),
                        lambda,
                        w: w.clone(),
                        value,
                    });
                }
            }
        }
    }
    out
}

/// Candidates `λ0 ≥ 0` supported on `I(x)`: the least-residual multiplier
/// at `x`, then vertices of `Λ(x̄, x̄*)` and vertex-plus-ray combinations
/// whose supports fit `I(x)`.
fn base_multipliers(ev: &PointEvaluation, base_set: &MultiplierSet) -> Vec<Vec<f64>> {
    let m = ev.m();
    if m == 0 {
        return vec![Vec::new()];
    }
    let mut cands = Vec::new();
    if let Ok(st) = ev.stationarity() {
        cands.push(st.multiplier);
    }
    for v in base_set.vertices() {
        cands.push(v.clone());
        for r in base_set.rays() {
            cands.push(v.iter().zip(r).map(|(a, b)| a + b).collect());
        }
    }
    let fits = |l: &Vec<f64>| (0..m).all(|i| l[i] <= 0.0 || ev.is_active(i));
    let mut cands: Vec<Vec<f64>> = dedup_sorted(cands.into_iter().filter(fits).collect());
    cands.truncate(MAX_BASE_MULTIPLIERS);
    cands
}

/// Sphere directions plus, for each vertex of `Λ(x, x*)`, their
/// projections onto `{w : ⟨∇q_i(x), w⟩ = 0, i ∈ I⁺(λ)}` and a basis of that
/// subspace, so that the equality part of the direction condition is met.
fn direction_candidates(ev: &PointEvaluation, set: &MultiplierSet, count: usize) -> Vec<Vec<f64>> {
    let n = ev.n();
    let sphere = sphere_directions(n, count);
    let mut out = sphere.clone();
    let mut supports: Vec<Vec<usize>> = set
        .vertices()
        .iter()
        .map(|l| PointEvaluation::positive_support(l))
        .collect();
    supports.sort();
    supports.dedup();
    for s in supports.iter().filter(|s| !s.is_empty()) {
        let z = nullspace(&ev.gradient_rows(s), RANK_TOL);
        if z.cols() == 0 {
            continue;
        }
        for k in 0..z.cols() {
            let c = z.col(k);
            out.push(c.iter().map(|t| -t).collect());
            out.push(c);
        }
        for d in &sphere {
            let p = project(&z, d);
            let np = norm2(&p);
            if np > 1e-9 {
                out.push(p.iter().map(|t| t / np).collect());
            }
        }
    }
    out
}

fn project(z: &Mat, v: &[f64]) -> Vec<f64> {
    let coeffs: Vec<f64> = (0..z.cols()).map(|k| dot(&z.col(k), v)).collect();
    z.matvec(&coeffs)
}

/// Vertices of `Λ(x, x*; w)`, truncated to the `γ`-ball when configured.
fn face_multipliers(
    ev: &PointEvaluation,
    set: &MultiplierSet,
    w: &[f64],
    config: RusoscConfig,
    radius: f64,
) -> Vec<Vec<f64>> {
    let m = ev.m();
    if m == 0 {
        return vec![Vec::new()];
    }
    let Ok(lp) = ev.directional_multipliers(set, w) else {
        return Vec::new();
    };
    if lp.status != LpStatus::Optimal {
        return Vec::new();
    }
    if !config.enforce_ball {
        return lp.face_vertices;
    }
    let support: Vec<usize> = (0..m)
        .filter(|&i| {
            lp.face_vertices
                .iter()
                .chain(&lp.face_rays)
                .any(|p| p[i] > 0.0)
        })
        .collect();
    let mut poly = set.poly.clone();
    for i in (0..m).filter(|i| !support.contains(i)) {
        let mut row = vec![0.0; m];
        row[i] = 1.0;
        poly = poly.with_equality(&row, 0.0);
    }
    truncate_ball(&poly, radius, BallNorm::Inf)
        .map(|d| d.vertices)
        .unwrap_or_default()
}

/// `⟨∇q_i(x), w⟩ = 0` on `I⁺(λ)` and `≥ 0` on the other active indices.
fn direction_condition(ev: &PointEvaluation, lambda: &[f64], w: &[f64]) -> bool {
    let tol = 1e-9 * norm2(w).max(1.0);
    let positive = PointEvaluation::positive_support(lambda);
    ev.active.iter().all(|&i| {
        let s = dot(ev.jacobian.row(i), w);
        if positive.contains(&i) {
            s.abs() <= tol
        } else {
            s >= -tol
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::test_problems::*;

    fn cfg(ell: f64) -> RusoscConfig {
        RusoscConfig {
            eta: 0.05,
            ell,
            points: 60,
            directions: 40,
            enforce_ball: true,
            gamma: 2.0,
        }
    }

    #[test]
    fn nonconvex_example_holds_below_two() {
        let r = check_rusosc_sampled(&nonconvex(), cfg(1.9)).unwrap();
        assert_eq!(r.verdict, Verdict::Holds, "{:?}", r.witness);
        assert!(r.checks > 0 && r.graph_points > 1);
        assert!((r.min_value.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn nonconvex_example_fails_above_two() {
        let r = check_rusosc_sampled(&nonconvex(), cfg(2.5)).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        let w = r.witness.unwrap();
        assert!(w.value < 2.5);
    }

    #[test]
    fn unconstrained_holds_with_equality() {
        let r = check_rusosc_sampled(&bowl(), cfg(2.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!((r.min_value.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut c = cfg(1.0);
        c.eta = 0.0;
        assert!(check_rusosc_sampled(&bowl(), c).is_err());
    }
}
