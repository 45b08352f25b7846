use super::Expr;

/// Symbolic partial derivative with respect to variable `var`.
///
/// Terms whose derivative factor is the literal zero are dropped while the
/// rule is applied; no other rewriting happens.
pub fn derivative(e: &Expr, var: usize) -> Expr {
    match e {
        Expr::Constant(_) => Expr::constant(0.0),
        Expr::Variable(j) => Expr::constant(if *j == var { 1.0 } else { 0.0 }),
        Expr::Add(l, r) => {
            let (dl, dr) = (derivative(l, var), derivative(r, var));
            match (dl.is_zero(), dr.is_zero()) {
                (true, _) => dr,
                (_, true) => dl,
                _ => Expr::add(dl, dr),
            }
        }
        Expr::Sub(l, r) => {
            let (dl, dr) = (derivative(l, var), derivative(r, var));
            match (dl.is_zero(), dr.is_zero()) {
                (true, _) => Expr::neg(dr),
                (_, true) => dl,
                _ => Expr::sub(dl, dr),
            }
        }
        Expr::Mul(l, r) => {
            let (dl, dr) = (derivative(l, var), derivative(r, var));
            let left = (!dl.is_zero()).then(|| Expr::mul(dl, (**r).clone()));
            let right = (!dr.is_zero()).then(|| Expr::mul((**l).clone(), dr));
            match (left, right) {
                (None, None) => Expr::constant(0.0),
                (Some(a), None) | (None, Some(a)) => a,
                (Some(a), Some(b)) => Expr::add(a, b),
            }
        }
        Expr::Div(l, r) => {
            let (dl, dr) = (derivative(l, var), derivative(r, var));
            if dr.is_zero() {
                if dl.is_zero() {
                    return Expr::constant(0.0);
                }
                return Expr::div(dl, (**r).clone());
            }
            let num = if dl.is_zero() {
                Expr::neg(Expr::mul((**l).clone(), dr))
            } else {
                Expr::sub(
                    Expr::mul(dl, (**r).clone()),
                    Expr::mul((**l).clone(), dr),
                )
            };
            Expr::div(num, Expr::pow((**r).clone(), 2))
        }
        Expr::Pow(b, k) => {
            let db = derivative(b, var);
            if *k == 0 || db.is_zero() {
                return Expr::constant(0.0);
            }
            let outer = if *k == 1 {
                Expr::constant(1.0)
            } else {
                Expr::mul(Expr::constant(*k as f64), Expr::pow((**b).clone(), k - 1))
            };
            if matches!(outer, Expr::Constant(c) if c == 1.0) {
                db
            } else {
                Expr::mul(outer, db)
            }
        }
        Expr::Neg(c) => {
            let dc = derivative(c, var);
            if dc.is_zero() {
                dc
            } else {
                Expr::neg(dc)
            }
        }
    }
}

/// Gradient `(∂e/∂x_0, …, ∂e/∂x_{n-1})`.
pub fn grad(e: &Expr, n: usize) -> Vec<Expr> {
    (0..n).map(|i| derivative(e, i)).collect()
}

/// Hessian as a row-major `n × n` table. Entry `(i, j)` for `j ≥ i` is
/// `∂/∂x_j` of gradient entry `i`, and the lower triangle is a copy, so the
/// matrix is symmetric by construction.
pub fn hessian(e: &Expr, n: usize) -> Vec<Vec<Expr>> {
    let g = grad(e, n);
    let mut h = vec![vec![Expr::constant(0.0); n]; n];
    for i in 0..n {
        for j in i..n {
            let d = derivative(&g[i], j);
            h[j][i] = d.clone();
            h[i][j] = d;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::super::{eval_vec, parse_expr};
    use super::*;

    fn vars() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    fn eval_h(h: &[Vec<Expr>], x: &[f64]) -> Vec<Vec<f64>> {
        h.iter().map(|row| eval_vec(row, x).unwrap()).collect()
    }

    #[test]
    fn gradient_of_product() {
        let e = parse_expr("x1*x2^2", &vars()).unwrap();
        let g = grad(&e, 2);
        for x in [[0.3, -1.2], [2.0, 0.5]] {
            let v = eval_vec(&g, &x).unwrap();
            assert_eq!(v, vec![x[1] * x[1], 2.0 * x[0] * x[1]]);
        }
    }

    #[test]
    fn gradient_of_nonconvex_objective_at_origin() {
        let e = parse_expr("x2^2+x1*x2-x1", &vars()).unwrap();
        assert_eq!(eval_vec(&grad(&e, 2), &[0.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn gradient_of_difference() {
        let e = parse_expr("x1-x2", &vars()).unwrap();
        assert_eq!(grad(&e, 2), vec![Expr::constant(1.0), Expr::constant(-1.0)]);
    }

    #[test]
    fn hessians() {
        let e = parse_expr("x1*x2^2", &vars()).unwrap();
        assert_eq!(eval_h(&hessian(&e, 2), &[0.0, 0.0]), vec![vec![0.0; 2]; 2]);

        let e = parse_expr("x2^2+x1*x2-x1", &vars()).unwrap();
        for x in [[0.0, 0.0], [1.5, -3.0]] {
            assert_eq!(eval_h(&hessian(&e, 2), &x), vec![vec![0.0, 1.0], vec![1.0, 2.0]]);
        }

        let e = parse_expr("x1^2+x2^2", &vars()).unwrap();
        assert_eq!(eval_h(&hessian(&e, 2), &[7.0, 7.0]), vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
    }

    #[test]
    fn quotient_rule() {
        let e = parse_expr("x1/(x2+2)", &vars()).unwrap();
        let g = eval_vec(&grad(&e, 2), &[3.0, 1.0]).unwrap();
        assert!((g[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((g[1] + 3.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn extra_dimensions_are_zero() {
        let e = parse_expr("x1^3", &vars()).unwrap();
        let g = grad(&e, 3);
        assert!(g[1].is_zero() && g[2].is_zero());
    }
}
