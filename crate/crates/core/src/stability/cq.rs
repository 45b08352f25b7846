//! Constraint-qualification probes: LICQ and MFCQ exactly, CRCQ, metric
//! subregularity and the bounded extreme point property on deterministic
//! samples.

use rayon::prelude::*;

use super::AnalysisError;
use crate::linalg::{norm2, rank, Mat, RANK_TOL};
use crate::nlp::{PointEvaluation, Problem};
use crate::polyhedra::{simplex, Combinations, LpStatus};
use crate::sampling::{ball_points, shell_points, sphere_directions};
use crate::search::{feasible_directions, generating_set, pattern_search, SearchOptions};

/// Subset enumeration in CRCQ is exponential in `|I(x̄)|`.
pub const MAX_CRCQ_ACTIVE: usize = 12;
/// Growth factor between consecutive dyadic shells that counts as blow-up.
pub const DIVERGENCE_FACTOR: f64 = 1.5;
/// Number of dyadic shells `(r/2^(k+1), r/2^k]` probed by the sampled
/// estimators.
pub const SHELLS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LicqReport {
    pub holds: bool,
    pub rank: usize,
    pub active: usize,
}

/// Active gradients are linearly independent.
pub fn check_licq(ev: &PointEvaluation) -> Result<LicqReport, AnalysisError> {
    require_feasible(ev)?;
    let r = rank(&ev.gradient_rows(&ev.active), RANK_TOL);
    Ok(LicqReport {
        holds: r == ev.active.len(),
        rank: r,
        active: ev.active.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfcqReport {
    pub holds: bool,
    /// Optimal `t` of `max t s.t. ⟨∇q_i, d⟩ + t ≤ 0, ‖d‖∞ ≤ 1, t ≤ 1`.
    pub t_star: f64,
    pub direction: Vec<f64>,
}

/// Solves `max t s.t. ⟨∇q_i(x̄), d⟩ + t ≤ 0 (i ∈ I), -1 ≤ d ≤ 1, t ≤ 1`;
/// MFCQ holds iff `t* > 1e-9`.
pub fn check_mfcq(ev: &PointEvaluation) -> Result<MfcqReport, AnalysisError> {
    require_feasible(ev)?;
    let n = ev.n();
    let act = &ev.active;
    let k = act.len();
    // d = u - 1 with u ∈ [0, 2]; t = 1 - τ with τ ≥ 0.
    // Columns: u (n), box slacks (n), τ (1), constraint slacks (k).
    let cols = 2 * n + 1 + k;
    let mut rows = Vec::with_capacity(n + k);
    let mut b = Vec::with_capacity(n + k);
    for j in 0..n {
        let mut r = vec![0.0; cols];
        r[j] = 1.0;
        r[n + j] = 1.0;
        rows.push(r);
        b.push(2.0);
    }
    for (c, &i) in act.iter().enumerate() {
        let g = ev.jacobian.row(i);
        let mut r = vec![0.0; cols];
        r[..n].copy_from_slice(g);
        r[2 * n] = -1.0;
        r[2 * n + 1 + c] = 1.0;
        rows.push(r);
        b.push(g.iter().sum::<f64>() - 1.0);
    }
    let mut cost = vec![0.0; cols];
    cost[2 * n] = 1.0;
    let res = simplex(&Mat::from_rows_with_cols(&rows, cols), &b, &cost);
    if res.status != LpStatus::Optimal {
        return Err(AnalysisError::Internal(format!(
            "MFCQ program reported {}",
            res.status.as_str()
        )));
    }
    let t_star = 1.0 - res.x[2 * n];
    let direction = res.x[..n].iter().map(|u| u - 1.0).collect();
    Ok(MfcqReport {
        holds: t_star > 1e-9,
        t_star,
        direction,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrcqWitness {
    /// Constraint indices `J ⊆ I(x̄)`.
    pub subset: Vec<usize>,
    pub x: Vec<f64>,
    pub rank_at_point: usize,
    pub rank_at_sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrcqReport {
    pub holds_on_samples: bool,
    pub witness: Option<CrcqWitness>,
    pub radius: f64,
    pub samples: usize,
}

/// Compares `rank{∇q_i(x)}_{i∈J}` with its value at `x̄` for every nonempty
/// `J ⊆ I(x̄)` on Halton points of `B_radius(x̄)`.
pub fn check_crcq(
    problem: &Problem,
    ev: &PointEvaluation,
    radius: f64,
    samples: usize,
) -> Result<CrcqReport, AnalysisError> {
    require_feasible(ev)?;
    positive("CRCQ radius", radius)?;
    let act = &ev.active;
    if act.len() > MAX_CRCQ_ACTIVE {
        return Err(AnalysisError::ActiveSetTooLarge {
            size: act.len(),
            limit: MAX_CRCQ_ACTIVE,
        });
    }
    let subsets: Vec<Vec<usize>> = (1..=act.len())
        .flat_map(|k| Combinations::new(act.len(), k))
        .map(|s| s.iter().map(|&c| act[c]).collect())
        .collect();
    let base: Vec<usize> = subsets
        .iter()
        .map(|j| rank(&ev.gradient_rows(j), RANK_TOL))
        .collect();
    let points = ball_points(&ev.x, radius, samples);
    let found = points
        .par_iter()
        .map(|x| -> Result<Option<CrcqWitness>, AnalysisError> {
            let jac = problem.jacobian(x)?;
            for (j, &r0) in subsets.iter().zip(&base) {
                let rows: Vec<Vec<f64>> = j.iter().map(|&i| jac.row(i).to_vec()).collect();
                let r = rank(&Mat::from_rows_with_cols(&rows, ev.n()), RANK_TOL);
                if r != r0 {
                    return Ok(Some(CrcqWitness {
                        subset: j.clone(),
                        x: x.clone(),
                        rank_at_point: r0,
                        rank_at_sample: r,
                    }));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let witness = found.into_iter().flatten().next();
    Ok(CrcqReport {
        holds_on_samples: witness.is_none(),
        witness,
        radius,
        samples: points.len(),
    })
}

/// Largest ratio seen on one dyadic shell.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellRatio {
    pub r_inner: f64,
    pub r_outer: f64,
    /// `0` when no sample contributed.
    pub ratio: f64,
    pub contributing: usize,
    pub worst_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MscqEstimate {
    /// `max d̂(x; Γ) / ‖q(x)₊‖₂` over the samples.
    pub kappa_hat: f64,
    pub diverging: bool,
    pub radius: f64,
    pub samples: usize,
    pub shells: Vec<ShellRatio>,
}

/// True when each shell ratio exceeds the next outer one by
/// [`DIVERGENCE_FACTOR`].
pub fn shells_diverge(shells: &[ShellRatio]) -> bool {
    shells.len() >= 2
        && shells
            .windows(2)
            .all(|w| w[0].ratio > 0.0 && w[1].ratio >= DIVERGENCE_FACTOR * w[0].ratio)
}

/// Estimates the subregularity modulus `κ` in `d(x; Γ) ≤ κ d(q(x); R^m_-)`
/// on three dyadic shells of `B_radius(x̄)`. `d(x; Γ)` is approximated by
/// the best of `x̄`, a feasible grid around `x` and a feasible pattern
/// search minimizing `‖y - x‖`.
pub fn estimate_mscq(
    problem: &Problem,
    radius: f64,
    samples: usize,
) -> Result<MscqEstimate, AnalysisError> {
    positive("MSCQ radius", radius)?;
    let xbar = problem.point().to_vec();
    let per_shell = samples.div_ceil(SHELLS).max(1);
    let mut shells = Vec::with_capacity(SHELLS);
    for k in 0..SHELLS {
        let r_outer = radius / f64::powi(2.0, k as i32);
        let r_inner = r_outer / 2.0;
        let pts = shell_points(&xbar, r_inner, r_outer, per_shell);
        let ratios = pts
            .par_iter()
            .map(|x| -> Result<Option<f64>, AnalysisError> {
                let q = problem.constraint_values(x)?;
                let viol = norm2(&q.iter().map(|v| v.max(0.0)).collect::<Vec<_>>());
                if viol <= 1e-12 {
                    return Ok(None);
                }
                Ok(Some(distance_to_feasible(problem, x, &xbar) / viol))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut shell = ShellRatio {
            r_inner,
            r_outer,
            ratio: 0.0,
            contributing: 0,
            worst_point: None,
        };
        for (x, r) in pts.iter().zip(ratios) {
            if let Some(r) = r {
                shell.contributing += 1;
                if r > shell.ratio {
                    shell.ratio = r;
                    shell.worst_point = Some(x.clone());
                }
            }
        }
        shells.push(shell);
    }
    Ok(MscqEstimate {
        kappa_hat: shells.iter().map(|s| s.ratio).fold(0.0, f64::max),
        diverging: shells_diverge(&shells),
        radius,
        samples: per_shell * SHELLS,
        shells,
    })
}

/// Upper estimate of `d(x; Γ)` from a feasible anchor `xbar`.
pub fn distance_to_feasible(problem: &Problem, x: &[f64], xbar: &[f64]) -> f64 {
    let n = x.len();
    let dist = |y: &[f64]| norm2(&y.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>());
    let mut best = xbar.to_vec();
    let mut best_d = dist(xbar);
    if n <= 3 && best_d > 0.0 {
        const PER_AXIS: usize = 17;
        let h = 2.0 * best_d / (PER_AXIS - 1) as f64;
        let total = PER_AXIS.pow(n as u32);
        let mut y = vec![0.0; n];
        for idx in 0..total {
            let mut rest = idx;
            for yi in y.iter_mut().zip(x) {
                *yi.0 = yi.1 - best_d + h * (rest % PER_AXIS) as f64;
                rest /= PER_AXIS;
            }
            let d = dist(&y);
            if d < best_d && problem.is_feasible(&y) {
                best_d = d;
                best.clone_from(&y);
            }
        }
    }
    if best_d == 0.0 {
        return 0.0;
    }
    // Grid points can sit in tolerance pockets off the feasible set, so the
    // search also starts from the anchor.
    let mut starts = vec![(best, best_d)];
    if starts[0].0 != xbar {
        starts.push((xbar.to_vec(), dist(xbar)));
    }
    starts
        .into_iter()
        .map(|(y0, d0)| {
            let opts = SearchOptions {
                initial_step: d0 / 4.0,
                min_step: 1e-10 * (1.0 + d0),
                max_polls: 200,
            };
            pattern_search(
                y0,
                d0,
                opts,
                |y| problem.is_feasible(y).then(|| dist(y)),
                |y, step| feasible_directions(problem, y, step, &[]),
            )
            .1
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeppWitness {
    pub x: Vec<f64>,
    pub xstar: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `‖λ‖₂ / ‖x*‖₂`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeppShell {
    pub r_inner: f64,
    pub r_outer: f64,
    pub ratio: f64,
    pub points: usize,
    pub witness: Option<BeppWitness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeppReport {
    pub bounded_on_samples: bool,
    /// Largest `‖vertex‖ / ‖x*‖` seen.
    pub kappa_hat: f64,
    pub radius: f64,
    pub points: usize,
    pub directions: usize,
    pub shells: Vec<BeppShell>,
}

impl BeppReport {
    /// Per-shell witnesses, outermost first, when the ratios blow up.
    pub fn witnesses(&self) -> Vec<&BeppWitness> {
        if self.bounded_on_samples {
            return Vec::new();
        }
        self.shells.iter().filter_map(|s| s.witness.as_ref()).collect()
    }
}

/// Samples feasible points on three dyadic shells of `B_radius(x̄)` (the
/// points `x̄ ± r/2^k d` for coordinate and active-boundary directions `d`
/// first, then Halton points) and unit `x*`
/// directions, and records the largest vertex norm of `Λ(x, x*)` relative
/// to `‖x*‖`. Unbounded growth across the shells is reported as a failure.
pub fn estimate_bepp(
    problem: &Problem,
    radius: f64,
    points: usize,
    directions: usize,
) -> Result<BeppReport, AnalysisError> {
    positive("BEPP radius", radius)?;
    let n = problem.n();
    let xbar = problem.point().to_vec();
    let per_shell = points.div_ceil(SHELLS).max(1);
    let halton_dirs = sphere_directions(n, directions);
    // Coordinate axes first, then directions along the active boundary.
    let ev0 = problem.evaluate(&xbar)?;
    let axes = generating_set(n, &ev0.gradient_rows(&ev0.active).row_vecs());
    let mut shells = Vec::with_capacity(SHELLS);
    let mut total_points = 0;
    for k in 0..SHELLS {
        let r_outer = radius / f64::powi(2.0, k as i32);
        let r_inner = r_outer / 2.0;
        let mut cands: Vec<Vec<f64>> = axes
            .iter()
            .map(|d| xbar.iter().zip(d).map(|(a, b)| a + r_outer * b).collect())
            .collect();
        cands.extend(shell_points(&xbar, r_inner, r_outer, per_shell * 4));
        let feasible: Vec<Vec<f64>> = cands
            .into_iter()
            .filter(|x| problem.is_feasible(x))
            .take(per_shell)
            .collect();
        total_points += feasible.len();
        let results = feasible
            .par_iter()
            .map(|x| bepp_at_point(problem, x, &halton_dirs, directions))
            .collect::<Result<Vec<_>, _>>()?;
        let mut shell = BeppShell {
            r_inner,
            r_outer,
            ratio: 0.0,
            points: feasible.len(),
            witness: None,
        };
        for w in results.into_iter().flatten() {
            if w.ratio > shell.ratio {
                shell.ratio = w.ratio;
                shell.witness = Some(w);
            }
        }
        shells.push(shell);
    }
    let ratios: Vec<ShellRatio> = shells
        .iter()
        .map(|s| ShellRatio {
            r_inner: s.r_inner,
            r_outer: s.r_outer,
            ratio: s.ratio,
            contributing: s.points,
            worst_point: None,
        })
        .collect();
    Ok(BeppReport {
        bounded_on_samples: !shells_diverge(&ratios),
        kappa_hat: shells.iter().map(|s| s.ratio).fold(0.0, f64::max),
        radius,
        points: total_points,
        directions,
        shells,
    })
}

/// Worst vertex ratio at one point over the `x*` directions `±e_j`, the
/// normalized active gradients and the given sphere directions.
fn bepp_at_point(
    problem: &Problem,
    x: &[f64],
    sphere: &[Vec<f64>],
    budget: usize,
) -> Result<Option<BeppWitness>, AnalysisError> {
    let n = x.len();
    let ev = problem.evaluate(x)?;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[j] = s;
            dirs.push(e);
        }
    }
    for &i in &ev.active {
        let g = ev.jacobian.row(i);
        let ng = norm2(g);
        if ng > 1e-12 {
            dirs.push(g.iter().map(|v| v / ng).collect());
            dirs.push(g.iter().map(|v| -v / ng).collect());
        }
    }
    dirs.extend(sphere.iter().cloned());
    dirs.truncate(budget.max(2 * n));
    let mut best: Option<BeppWitness> = None;
    for xstar in dirs {
        let ms = ev.multiplier_set(&xstar)?;
        let scale = norm2(&xstar);
        for v in ms.vertices() {
            let ratio = norm2(v) / scale;
            if best.as_ref().is_none_or(|b| ratio > b.ratio) {
                best = Some(BeppWitness {
                    x: x.to_vec(),
                    xstar: xstar.clone(),
                    lambda: v.clone(),
                    ratio,
                });
            }
        }
    }
    Ok(best)
}

fn require_feasible(ev: &PointEvaluation) -> Result<(), AnalysisError> {
    if ev.feasible {
        Ok(())
    } else {
        Err(AnalysisError::Nlp(crate::nlp::NlpError::InfeasiblePoint {
            max_violation: ev.max_violation(),
        }))
    }
}

fn positive(what: &str, v: f64) -> Result<(), AnalysisError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AnalysisError::InvalidParameter(format!("{what} must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::test_problems::*;

    #[test]
    fn licq_examples() {
        let ev = twin().evaluate(&[0.0, 0.0]).unwrap();
        assert!(!check_licq(&ev).unwrap().holds);
        let ev = nonconvex().evaluate(&[0.0, 0.0]).unwrap();
        let r = check_licq(&ev).unwrap();
        assert!(!r.holds && r.rank == 1 && r.active == 3);
        let ev = halfplane().evaluate(&[0.0, 0.0]).unwrap();
        assert!(check_licq(&ev).unwrap().holds);
    }

    #[test]
    fn mfcq_examples() {
        assert!(!check_mfcq(&twin().evaluate(&[0.0, 0.0]).unwrap()).unwrap().holds);
        assert!(!check_mfcq(&nonconvex().evaluate(&[0.0, 0.0]).unwrap()).unwrap().holds);
        let r = check_mfcq(&halfplane().evaluate(&[0.0, 0.0]).unwrap()).unwrap();
        assert!(r.holds && (r.t_star - 1.0).abs() < 1e-12);
        assert_eq!(r.direction[0], -1.0);
    }

    #[test]
    fn crcq_examples() {
        let p = twin();
        let ev = p.evaluate(&[0.0, 0.0]).unwrap();
        assert!(check_crcq(&p, &ev, 1e-2, 200).unwrap().holds_on_samples);
        let p = nonconvex();
        let ev = p.evaluate(&[0.0, 0.0]).unwrap();
        let r = check_crcq(&p, &ev, 1e-2, 200).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(w.subset, vec![2]);
        assert_eq!((w.rank_at_point, w.rank_at_sample), (0, 1));
    }

    #[test]
    fn mscq_examples() {
        let e = estimate_mscq(&nonconvex(), 0.1, 600).unwrap();
        assert!(!e.diverging && (0.95..=1.05).contains(&e.kappa_hat), "{e:?}");
        let e = estimate_mscq(&cross(), 0.1, 600).unwrap();
        assert!(e.diverging && e.kappa_hat >= 5.0, "{e:?}");
        let e = estimate_mscq(&halfplane(), 0.1, 600).unwrap();
        assert!(!e.diverging && (0.99..=1.01).contains(&e.kappa_hat), "{e:?}");
    }

    #[test]
    fn bepp_examples() {
        let r = estimate_bepp(&nonconvex(), 0.5, 100, 50).unwrap();
        assert!(!r.bounded_on_samples);
        let norms: Vec<f64> = r.witnesses().iter().map(|w| w.ratio).collect();
        assert_eq!(norms.len(), 3);
        for (got, want) in norms.iter().zip([4.0, 16.0, 64.0]) {
            assert!(*got >= want - 1e-9, "{norms:?}");
        }
        for (w, shell) in r.witnesses().iter().zip(&r.shells) {
            assert!(w.x[0].abs() < 1e-12);
            assert!(w.x[1].abs() > shell.r_inner && w.x[1].abs() <= shell.r_outer + 1e-12);
        }

        let r = estimate_bepp(&twin(), 0.5, 100, 50).unwrap();
        assert!(r.bounded_on_samples, "{r:?}");
        let r = estimate_bepp(&halfplane(), 0.5, 100, 50).unwrap();
        assert!(r.bounded_on_samples && (r.kappa_hat - 1.0).abs() < 1e-12, "{r:?}");
    }
}
