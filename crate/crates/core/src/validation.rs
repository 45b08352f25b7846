//! Seeded property suites that check the numerical kernels against
//! independent references: the simplex against vertex enumeration, symbolic
//! derivatives against central differences, the tilt bound against the
//! brute-force oracle, and the structure of the graphical derivative.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{analyze, AnalysisConfig, OracleOutcome};
use crate::expr::{grad, hessian, parse_expr, Expr};
use crate::linalg::{dot, norm_inf, Mat};
use crate::nlp::Problem;
use crate::polyhedra::{
    enumerate_vertices_rays, optimal_face, simplex, FaceResult, LpStatus, PolyError,
    StdPolyhedron,
};
use crate::problem_file::ProblemFile;
use crate::stability::{graphical_derivative, sample_cone_directions, Verdict};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
    /// Largest observed error in the suite's own metric.
    pub max_error: f64,
    pub elapsed: Duration,
    /// Case counts by category (suite specific).
    pub tally: Vec<(&'static str, usize)>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport {
            name,
            cases: 0,
            failures: Vec::new(),
            max_error: 0.0,
            elapsed: Duration::ZERO,
            tally: Vec::new(),
        }
    }

    fn count(&mut self, key: &'static str) {
        match self.tally.iter_mut().find(|(k, _)| *k == key) {
            Some((_, c)) => *c += 1,
            None => self.tally.push((key, 1)),
        }
    }

    fn error(&mut self, e: f64) {
        if e.is_nan() || e > self.max_error {
            self.max_error = e;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} cases, {} failures, max error {:.3e}, {:.2?}",
            self.name,
            self.cases,
            self.failures.len(),
            self.max_error,
            self.elapsed
        )?;
        for (k, c) in &self.tally {
            write!(f, ", {k} {c}")?;
        }
        for msg in self.failures.iter().take(5) {
            write!(f, "\n  {msg}")?;
        }
        Ok(())
    }
}

/// Tolerance on the optimal value in the LP suite.
pub const LP_VALUE_TOL: f64 = 1e-8;

fn random_entry(rng: &mut ChaCha8Rng, integer: bool) -> f64 {
    if integer {
        rng.gen_range(-3i32..=3) as f64
    } else {
        rng.gen_range(-1.0..1.0)
    }
}

/// A random standard-form polyhedron `{λ ≥ 0, Aλ = b}` with `m ≤ 6` and a
/// cost vector. Integer data exercises degeneracy; three quarters of the
/// right-hand sides come from a nonnegative point so the set is nonempty.
pub fn random_lp(rng: &mut ChaCha8Rng) -> (Mat, Vec<f64>, Vec<f64>) {
    let m = rng.gen_range(2..=6usize);
    let k = rng.gen_range(1..=m.min(4));
    let integer = rng.gen_bool(0.5);
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..m).map(|_| random_entry(rng, integer)).collect())
        .collect();
    let a = Mat::from_rows_with_cols(&rows, m);
    let b = if rng.gen_bool(0.75) {
        let l0: Vec<f64> = (0..m)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    0.0
                } else if integer {
                    rng.gen_range(1i32..=2) as f64
                } else {
                    rng.gen_range(0.0..2.0)
                }
            })
            .collect();
        a.matvec(&l0)
    } else {
        (0..k).map(|_| random_entry(rng, integer)).collect()
    };
    let nonneg_cost = rng.gen_bool(0.25);
    let c = (0..m)
        .map(|_| {
            let v = random_entry(rng, integer);
            if nonneg_cost {
                v.abs()
            } else {
                v
            }
        })
        .collect();
    (a, b, c)
}

/// Simplex versus enumeration on `count` polyhedra seeded from `seed`.
pub fn lp_suite(seed: u64, count: usize) -> SuiteReport {
    let start = Instant::now();
    let mut rep = SuiteReport::new("lp-vs-enumeration");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..count {
        let (a, b, c) = random_lp(&mut rng);
        rep.cases += 1;
        let poly = StdPolyhedron::new(a.clone(), b.clone()).expect("shapes agree");
        let reference = match enumerate_vertices_rays(&poly) {
            Ok(dec) => optimal_face(&dec, &c),
            Err(PolyError::EmptyPolyhedron) => FaceResult::Infeasible,
            Err(e) => {
                rep.failures.push(format!("case {case}: enumeration failed: {e}"));
                continue;
            }
        };
        let res = simplex(&a, &b, &c);
        let expected = match &reference {
            FaceResult::Optimal { .. } => LpStatus::Optimal,
            FaceResult::Unbounded => LpStatus::Unbounded,
            FaceResult::Infeasible => LpStatus::Infeasible,
        };
        rep.count(expected.as_str());
        if res.status != expected {
            rep.failures.push(format!(
                "case {case}: simplex {} but enumeration {}",
                res.status.as_str(),
                expected.as_str()
            ));
            continue;
        }
        if let FaceResult::Optimal { value, .. } = reference {
            let err = (res.value - value).abs();
            rep.error(err);
            let resid = norm_inf(
                &a.matvec(&res.x)
                    .iter()
                    .zip(&b)
                    .map(|(l, r)| l - r)
                    .collect::<Vec<_>>(),
            );
            let neg = res.x.iter().copied().fold(0.0, f64::min);
            let cost_gap = (dot(&c, &res.x) - res.value).abs();
            if err > LP_VALUE_TOL || resid > 1e-8 || neg < -1e-9 || cost_gap > 1e-8 {
                rep.failures.push(format!(
                    "case {case}: simplex {} vs enumeration {value} (residual {resid:e}, min entry {neg:e})",
                    res.value
                ));
            }
        }
    }
    rep.elapsed = start.elapsed();
    rep
}

/// Step of the central differences in the derivative suite.
pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance `|d − fd| ≤ tol·(1 + |d|)`.
pub const FD_TOL: f64 = 1e-6;
/// Pairs whose function values exceed this are redrawn: cancellation in
/// the difference quotient would dominate the tolerance.
pub const FD_MAX_VALUE: f64 = 1e4;

/// Random expression text over `x1..xn` from the problem-file grammar.
/// Denominators have the form `c + (e)^2` with `c ≥ 0.5` so every drawn
/// expression is smooth.
pub fn random_expr_text(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            format!("x{}", rng.gen_range(1..=n))
        } else {
            format!("{:.3}", rng.gen_range(0.0..3.0))
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..7) {
        0 => format!("{} + {}", random_expr_text(rng, n, d), random_expr_text(rng, n, d)),
        1 => format!("{} - ({})", random_expr_text(rng, n, d), random_expr_text(rng, n, d)),
        2 | 3 => format!(
            "({})*({})",
            random_expr_text(rng, n, d),
            random_expr_text(rng, n, d)
        ),
        4 => format!(
            "({}) / ({:.3} + ({})^2)",
            random_expr_text(rng, n, d),
            rng.gen_range(0.5..2.0),
            random_expr_text(rng, n, d)
        ),
        5 => format!("({})^{}", random_expr_text(rng, n, d), rng.gen_range(0..=3)),
        _ => format!("-({})", random_expr_text(rng, n, d)),
    }
}

fn var_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn central_difference(e: &Expr, x: &[f64], i: usize) -> Option<(f64, f64)> {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += FD_STEP;
    xm[i] -= FD_STEP;
    let fp = e.eval(&xp).ok()?;
    let fm = e.eval(&xm).ok()?;
    Some(((fp - fm) / (2.0 * FD_STEP), fp.abs().max(fm.abs())))
}

/// Symbolic gradients and Hessians against central differences on `count`
/// random (expression, point) pairs. Hessian entries are compared with
/// differences of the symbolic gradient.
pub fn derivative_suite(seed: u64, count: usize) -> SuiteReport {
    let start = Instant::now();
    let mut rep = SuiteReport::new("derivatives-vs-differences");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut redrawn = 0usize;
    while rep.cases < count {
        let n = rng.gen_range(1..=3usize);
        let depth = rng.gen_range(1..=4);
        let text = random_expr_text(&mut rng, n, depth);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let e = match parse_expr(&text, &var_names(n)) {
            Ok(e) => e,
            Err(err) => {
                rep.cases += 1;
                rep.failures.push(format!("`{text}` does not parse: {err}"));
                continue;
            }
        };
        let g = grad(&e, n);
        let h = hessian(&e, n);
        let mut pair = Vec::new();
        let mut scale: f64 = 0.0;
        let mut ok = true;
        for i in 0..n {
            match central_difference(&e, &x, i) {
                Some((fd, s)) => {
                    scale = scale.max(s);
                    pair.push(("grad", i, i, &g[i], fd));
                }
                None => ok = false,
            }
            for j in 0..n {
                match central_difference(&g[j], &x, i) {
                    Some((fd, s)) => {
                        scale = scale.max(s);
                        pair.push(("hess", i, j, &h[i][j], fd));
                    }
                    None => ok = false,
                }
            }
        }
        if !ok || scale > FD_MAX_VALUE {
            redrawn += 1;
            continue;
        }
        rep.cases += 1;
        for (kind, i, j, d, fd) in pair {
            let Ok(dv) = d.eval(&x) else {
                rep.failures.push(format!("{kind}[{i},{j}] of `{text}` fails at {x:?}"));
                continue;
            };
            let err = (dv - fd).abs() / (1.0 + dv.abs());
            rep.error(err);
            if err > FD_TOL {
                rep.failures.push(format!(
                    "{kind}[{i},{j}] of `{text}` at {x:?}: symbolic {dv}, difference {fd}"
                ));
            }
        }
    }
    rep.tally.push(("redrawn", redrawn));
    rep.elapsed = start.elapsed();
    rep
}

/// Allowed excess of the empirical modulus over the tilt bound.
pub const CONSISTENCY_FACTOR: f64 = 1.15;
pub const CONSISTENCY_OFFSET: f64 = 0.02;

fn coef(v: f64) -> String {
    if v < 0.0 {
        format!("({:.6})", v)
    } else {
        format!("{:.6}", v)
    }
}

/// A strictly convex QP `½xᵀQx + cᵀx` with affine constraints `aᵢᵀx ≤ bᵢ`
/// (`n ≤ 3`, `m ≤ 4`) whose stationary point is the origin: some constraints
/// are active there and `c = −Σλᵢaᵢ` for a random `λ ≥ 0` on them. Data are
/// multiples of `0.01` so the printed coefficients are exact.
pub fn random_convex_qp(rng: &mut ChaCha8Rng) -> ProblemFile {
    let n = rng.gen_range(1..=3usize);
    let m = rng.gen_range(1..=4usize);
    let r2 = |rng: &mut ChaCha8Rng| (rng.gen_range(-1.0f64..1.0) * 100.0).round() / 100.0;
    let mrows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| r2(rng)).collect()).collect();
    let mu = (rng.gen_range(0.5f64..2.0) * 100.0).round() / 100.0;
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            q[i][j] = (0..n).map(|k| mrows[k][i] * mrows[k][j]).sum::<f64>();
        }
        q[i][i] += mu;
    }
    let mut cvec = vec![0.0; n];
    let mut cons = Vec::new();
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| r2(rng)).collect();
        let active = rng.gen_bool(0.7);
        let b = if active {
            0.0
        } else {
            rng.gen_range(0.05..1.0)
        };
        if active && rng.gen_bool(0.6) {
            let l = (rng.gen_range(0.1f64..1.5) * 100.0).round() / 100.0;
            for j in 0..n {
                cvec[j] -= l * a[j];
            }
        }
        let lhs: Vec<String> = (0..n)
            .filter(|&j| a[j] != 0.0)
            .map(|j| format!("{}*x{}", coef(a[j]), j + 1))
            .collect();
        let lhs = if lhs.is_empty() { "0".to_string() } else { lhs.join(" + ") };
        cons.push(format!("st {lhs} <= {b:.6}"));
    }
    let mut terms = Vec::new();
    for i in 0..n {
        terms.push(format!("{}*x{}^2", coef(0.5 * q[i][i]), i + 1));
        for j in i + 1..n {
            terms.push(format!("{}*x{}*x{}", coef(q[i][j]), i + 1, j + 1));
        }
        terms.push(format!("{}*x{}", coef(cvec[i]), i + 1));
    }
    let text = format!(
        "vars {}\nminimize {}\n{}\npoint {}\n",
        var_names(n).join(" "),
        terms.join(" + "),
        cons.join("\n"),
        vec!["0"; n].join(" ")
    );
    ProblemFile::parse(&text).expect("generated QP text parses")
}

/// Empirical modulus against the tilt bound on `count` random convex QPs.
pub fn qp_consistency_suite(seed: u64, count: usize) -> SuiteReport {
    let start = Instant::now();
    let mut rep = SuiteReport::new("qp-bound-vs-oracle");
    // Largest excess `L̂ − bound`; negative when every case is below its bound.
    rep.max_error = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..count {
        let file = random_convex_qp(&mut rng);
        rep.cases += 1;
        rep.count(["n=1", "n=2", "n=3"][file.vars.len() - 1]);
        let text = file.to_text().replace('\n', "; ");
        let problem = match file.to_problem() {
            Ok(p) => p,
            Err(e) => {
                rep.failures.push(format!("case {case}: {e} [{text}]"));
                continue;
            }
        };
        let report = match analyze(&problem, &AnalysisConfig::default()) {
            Ok(r) => r,
            Err(e) => {
                rep.failures.push(format!("case {case}: {e} [{text}]"));
                continue;
            }
        };
        if report.second_order.ssosc.verdict != Verdict::Holds {
            rep.failures
                .push(format!("case {case}: SSOSC does not hold [{text}]"));
            continue;
        }
        let Some(bound) = report.tilt_bound else {
            rep.failures.push(format!("case {case}: no tilt bound [{text}]"));
            continue;
        };
        let OracleOutcome::Ran { report: oracle, .. } = &report.oracle else {
            rep.failures.push(format!("case {case}: oracle skipped [{text}]"));
            continue;
        };
        let Some(l) = oracle.lipschitz.filter(|_| oracle.single_valued) else {
            rep.failures
                .push(format!("case {case}: oracle not single-valued [{text}]"));
            continue;
        };
        let limit = CONSISTENCY_FACTOR * bound + CONSISTENCY_OFFSET;
        rep.error(l - bound);
        if l > limit {
            rep.failures.push(format!(
                "case {case}: L̂ = {l} exceeds {limit} (bound {bound}) [{text}]"
            ));
        }
    }
    rep.elapsed = start.elapsed();
    rep
}

/// Agreement of the base-vector quadratic forms.
pub const GD_VALUE_TOL: f64 = 1e-7;
/// Orthogonality of the normal-cone generators to `w`.
pub const GD_ORTHO_TOL: f64 = 1e-9;

/// A feasible point near the fixture's point: the point itself half the
/// time, otherwise a step along a tangent direction that stays feasible.
fn sample_base_point(problem: &Problem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let xbar = problem.point().to_vec();
    if rng.gen_bool(0.5) {
        return xbar;
    }
    let Ok(ev) = problem.evaluate(&xbar) else {
        return xbar;
    };
    let Ok(tangent) = ev.tangent_cone() else {
        return xbar;
    };
    let dirs = sample_cone_directions(&tangent, 16).directions;
    if dirs.is_empty() {
        return xbar;
    }
    let d = &dirs[rng.gen_range(0..dirs.len())];
    let t = rng.gen_range(1e-3..0.2);
    let x: Vec<f64> = xbar.iter().zip(d).map(|(a, b)| a + t * b).collect();
    if problem.is_feasible(&x) {
        x
    } else {
        xbar
    }
}

/// Structure of `D(∂φ)(x|v)(w)` on random samples over the given problems:
/// `v = ∇g(x) + ∇q(x)ᵀλ` for a random `λ ≥ 0` on the active set and `w`
/// drawn from the critical cone. The quadratic forms `⟨z, w⟩` of all base
/// vectors must agree and every normal-cone generator must be orthogonal
/// to `w`. An empty set must come with an unbounded LP(w).
pub fn graph_derivative_suite(
    problems: &[(String, Problem)],
    seed: u64,
    count: usize,
) -> SuiteReport {
    let start = Instant::now();
    let mut rep = SuiteReport::new("graphical-derivative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if problems.is_empty() {
        rep.failures.push("no problems given".into());
        return rep;
    }
    for case in 0..count {
        // Every problem is visited before random draws begin.
        let (name, problem) = if case < problems.len() {
            &problems[case]
        } else {
            &problems[rng.gen_range(0..problems.len())]
        };
        rep.cases += 1;
        let x = sample_base_point(problem, &mut rng);
        let ev = match problem.evaluate(&x) {
            Ok(ev) => ev,
            Err(e) => {
                rep.failures.push(format!("{name} case {case}: {e}"));
                continue;
            }
        };
        let mut lambda = vec![0.0; problem.m()];
        for &i in &ev.active {
            if rng.gen_bool(0.6) {
                lambda[i] = rng.gen_range(0.0..2.0);
            }
        }
        let xstar = ev.jacobian_t_times(&lambda);
        let v: Vec<f64> = xstar.iter().zip(&ev.grad_g).map(|(a, b)| a + b).collect();
        let cone = match ev.critical_cone(&xstar, &lambda) {
            Ok(c) => c,
            Err(e) => {
                rep.failures.push(format!("{name} case {case}: {e}"));
                continue;
            }
        };
        let dirs = sample_cone_directions(&cone, 32).directions;
        let w: Vec<f64> = if dirs.is_empty() {
            vec![0.0; problem.n()]
        } else {
            let s = rng.gen_range(0.1..2.0);
            dirs[rng.gen_range(0..dirs.len())].iter().map(|t| s * t).collect()
        };
        let set = match graphical_derivative(problem, &x, &v, &w) {
            Ok(s) => s,
            Err(e) => {
                rep.failures.push(format!("{name} case {case}: {e}"));
                continue;
            }
        };
        if set.empty {
            // With `w ∈ K` the set is empty only when LP(w) is unbounded,
            // which needs a multiplier ray of negative cost.
            let cost = ev.directional_cost(&w);
            let unbounded = ev
                .multiplier_set(&xstar)
                .is_ok_and(|ms| ms.rays().iter().any(|r| dot(&cost, r) < -1e-9));
            rep.count("empty (LP unbounded)");
            if !unbounded {
                rep.failures.push(format!(
                    "{name} case {case}: empty at x = {x:?}, v = {v:?}, w = {w:?}"
                ));
            }
            continue;
        }
        rep.count(if set.base_vectors.len() > 1 { "multi-vertex" } else { "single-vertex" });
        for (z, val) in set.base_vectors.iter().zip(&set.values) {
            let err = (dot(z, &w) - set.value).abs().max((val - set.value).abs());
            rep.error(err);
            if err > GD_VALUE_TOL {
                rep.failures.push(format!(
                    "{name} case {case}: form {val} differs from {} at w = {w:?}",
                    set.value
                ));
            }
        }
        for g in &set.cone_generators {
            let err = dot(g, &w).abs();
            rep.error(err);
            if err > GD_ORTHO_TOL {
                rep.failures.push(format!(
                    "{name} case {case}: generator {g:?} has ⟨g, w⟩ = {err:e}"
                ));
            }
        }
    }
    rep.elapsed = start.elapsed();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_expressions_parse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = random_expr_text(&mut rng, 3, 4);
            assert!(parse_expr(&t, &var_names(3)).is_ok(), "{t}");
        }
    }

    #[test]
    fn generated_qp_is_stationary_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = random_convex_qp(&mut rng).to_problem().unwrap();
            let ev = p.evaluate(p.point()).unwrap();
            assert!(ev.stationarity().unwrap().residual < 1e-9);
        }
    }

    #[test]
    fn small_suites_pass() {
        assert!(lp_suite(1, 40).passed());
        assert!(derivative_suite(1, 40).passed());
    }
}
