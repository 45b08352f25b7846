//! Derivative-free local refinement over a feasible set given only by a
//! membership oracle: generating-set pattern search whose poll directions
//! follow the nearly active constraints.

use crate::linalg::{dot, norm2, nullspace, Mat, RANK_TOL};
use crate::nlp::{Problem, ACTIVE_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub initial_step: f64,
    pub min_step: f64,
    /// Number of polls, successful or not.
    pub max_polls: usize,
}

/// Minimizes `objective` from the feasible start `x0` (value `f0`).
/// `objective` returns `None` outside the feasible set, so every accepted
/// iterate stays feasible. Each poll takes the best of the candidate steps
/// `x + step·d`; the step halves after a poll without improvement.
pub fn pattern_search<F, D>(
    x0: Vec<f64>,
    f0: f64,
    opts: SearchOptions,
    mut objective: F,
    directions: D,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> Option<f64>,
    D: Fn(&[f64], f64) -> Vec<Vec<f64>>,
{
    let mut x = x0;
    let mut fx = f0;
    let mut step = opts.initial_step;
    let mut trial = vec![0.0; x.len()];
    for _ in 0..opts.max_polls {
        if step < opts.min_step {
            break;
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for d in directions(&x, step) {
            for (t, (xi, di)) in trial.iter_mut().zip(x.iter().zip(&d)) {
                *t = xi + step * di;
            }
            if let Some(ft) = objective(&trial) {
                let bar = best.as_ref().map_or(fx, |b| b.1);
                if ft < bar {
                    best = Some((trial.clone(), ft));
                }
            }
        }
        match best {
            Some((xn, fnew)) => {
                x = xn;
                fx = fnew;
            }
            None => step *= 0.5,
        }
    }
    (x, fx)
}

/// Poll set for points near the boundary described by `active` gradients:
/// coordinate directions, a basis of their common nullspace (both signs),
/// for each `j` the direction that decreases `q_j` while keeping the other
/// constraints level, and coordinate directions projected onto the
/// nullspace.
pub fn generating_set(n: usize, active: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let push = |v: Vec<f64>, out: &mut Vec<Vec<f64>>| {
        let nv = norm2(&v);
        if nv <= 1e-12 {
            return;
        }
        let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
        if !out.iter().any(|u| dot(u, &v) > 1.0 - 1e-12) {
            out.push(v);
        }
    };
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        push(e.clone(), &mut out);
        e[i] = -1.0;
        push(e, &mut out);
    }
    if active.is_empty() {
        return out;
    }
    let g = Mat::from_rows_with_cols(active, n);
    let z = nullspace(&g, RANK_TOL);
    for k in 0..z.cols() {
        let c = z.col(k);
        push(c.clone(), &mut out);
        push(c.iter().map(|v| -v).collect(), &mut out);
    }
    for j in 0..active.len() {
        let others: Vec<Vec<f64>> = active
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, r)| r.clone())
            .collect();
        let zj = nullspace(&Mat::from_rows_with_cols(&others, n), RANK_TOL);
        let down: Vec<f64> = active[j].iter().map(|v| -v).collect();
        push(project(&zj, &down), &mut out);
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let p = project(&z, &e);
        push(p.clone(), &mut out);
        push(p.iter().map(|v| -v).collect(), &mut out);
    }
    out
}

/// `Z Zᵀ v` for orthonormal columns `Z`.
fn project(z: &Mat, v: &[f64]) -> Vec<f64> {
    let coeffs: Vec<f64> = (0..z.cols()).map(|k| dot(&z.col(k), v)).collect();
    z.matvec(&coeffs)
}

/// Poll set at `x` for the feasible region of `problem`, treating as
/// nearly active the constraints with `q_i(x) ≥ -(step·‖∇q_i(x)‖ + tol)`.
/// `extra` holds gradients of additional nearly active constraints (such as
/// a ball boundary).
pub fn feasible_directions(
    problem: &Problem,
    x: &[f64],
    step: f64,
    extra: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = problem.n();
    let (Ok(q), Ok(jac)) = (problem.constraint_values(x), problem.jacobian(x)) else {
        return generating_set(n, &[]);
    };
    let mut active: Vec<Vec<f64>> = Vec::new();
    for (i, &qi) in q.iter().enumerate() {
        let gi = jac.row(i);
        let ng = norm2(gi);
        if ng > 0.0 && qi >= -(step * ng + ACTIVE_TOL) {
            active.push(gi.to_vec());
        }
    }
    active.extend(extra.iter().cloned());
    generating_set(n, &active)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SearchOptions {
        SearchOptions {
            initial_step: 0.25,
            min_step: 1e-10,
            max_polls: 400,
        }
    }

    #[test]
    fn unconstrained_quadratic() {
        let f = |x: &[f64]| Some((x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2));
        let (x, fx) = pattern_search(vec![0.0, 0.0], f(&[0.0, 0.0]).unwrap(), opts(), f, |_, _| {
            generating_set(2, &[])
        });
        assert!((x[0] - 0.3).abs() < 1e-8 && (x[1] + 0.1).abs() < 1e-8, "{x:?}");
        assert!(fx < 1e-15);
    }

    #[test]
    fn slides_along_a_slanted_boundary() {
        // min -x2 on {x2 - 0.5 x1 ≤ 0, x1 ≤ 1}: optimum (1, 0.5).
        let feas = |x: &[f64]| x[1] - 0.5 * x[0] <= 1e-12 && x[0] <= 1.0 + 1e-12;
        let f = |x: &[f64]| feas(x).then(|| -x[1]);
        let dirs = |x: &[f64], s: f64| {
            let mut a = Vec::new();
            if x[1] - 0.5 * x[0] > -1.2 * s {
                a.push(vec![-0.5, 1.0]);
            }
            if x[0] > 1.0 - s {
                a.push(vec![1.0, 0.0]);
            }
            generating_set(2, &a)
        };
        let (x, _) = pattern_search(vec![0.0, -0.2], 0.2, opts(), f, dirs);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 0.5).abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn generating_set_contains_nullspace() {
        let dirs = generating_set(2, &[vec![1.0, -1.0]]);
        let s = 0.5f64.sqrt();
        assert!(dirs.iter().any(|d| (d[0] - s).abs() < 1e-12 && (d[1] - s).abs() < 1e-12));
        assert!(dirs.iter().any(|d| (d[0] + s).abs() < 1e-12 && (d[1] + s).abs() < 1e-12));
    }
}
