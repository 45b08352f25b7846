//! The program `min g(x) s.t. q_i(x) ≤ 0`: pointwise derivative data,
//! active sets, stationarity, multiplier polyhedra and the tangent and
//! critical cones.

use thiserror::Error;

use crate::expr::{eval_vec, grad, hessian, Expr, ExprError};
use crate::linalg::{dot, norm_inf, Mat};
use crate::polyhedra::{
    enumerate_vertices_rays, lp_solve_with, simplex, LpOutcome, LpStatus, PolyError,
    StdPolyhedron, VertexRayDecomposition,
};

/// `q_i(x) ≥ -ACTIVE_TOL` marks constraint `i` active; `max q ≤ ACTIVE_TOL`
/// marks `x` feasible.
pub const ACTIVE_TOL: f64 = 1e-8;
/// Multiplier entries above this count as strictly positive.
pub const POSITIVE_TOL: f64 = 1e-8;
/// Residual of `∇q(x)ᵀλ = x*` accepted for a multiplier.
pub const MULTIPLIER_TOL: f64 = 1e-8;
/// Membership tolerance for [`ConeRep::contains`].
pub const CONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NlpError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("point is infeasible (max constraint value {max_violation:e})")]
    InfeasiblePoint { max_violation: f64 },
    #[error("λ is not a multiplier: ‖∇q(x)ᵀλ - x*‖∞ = {residual:e}")]
    NotAMultiplier { residual: f64 },
    #[error("multiplier set is empty")]
    EmptyMultiplierSet,
}

/// Parsed program with precompiled symbolic derivatives.
#[derive(Debug, Clone)]
pub struct Problem {
    vars: Vec<String>,
    objective: Expr,
    constraints: Vec<Expr>,
    point: Vec<f64>,
    grad_g: Vec<Expr>,
    hess_g: Vec<Vec<Expr>>,
    grad_q: Vec<Vec<Expr>>,
    hess_q: Vec<Vec<Vec<Expr>>>,
}

impl Problem {
    pub fn new(
        vars: Vec<String>,
        objective: Expr,
        constraints: Vec<Expr>,
        point: Vec<f64>,
    ) -> Result<Self, NlpError> {
        let n = vars.len();
        if point.len() != n {
            return Err(NlpError::DimensionMismatch(format!(
                "point has {} coordinates, {} variables declared",
                point.len(),
                n
            )));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(NlpError::DimensionMismatch("point is not finite".into()));
        }
        for e in std::iter::once(&objective).chain(&constraints) {
            if e.arity() > n {
                return Err(NlpError::DimensionMismatch(format!(
                    "expression references variable {} of {}",
                    e.arity(),
                    n
                )));
            }
        }
        let grad_g = grad(&objective, n);
        let hess_g = hessian(&objective, n);
        let grad_q = constraints.iter().map(|q| grad(q, n)).collect();
        let hess_q = constraints.iter().map(|q| hessian(q, n)).collect();
        Ok(Problem {
            vars,
            objective,
            constraints,
            point,
            grad_g,
            hess_g,
            grad_q,
            hess_q,
        })
    }

    pub fn n(&self) -> usize {
        self.vars.len()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    /// Candidate point `x̄`.
    pub fn point(&self) -> &[f64] {
        &self.point
    }

    /// Same program with another candidate point.
    pub fn with_point(&self, point: Vec<f64>) -> Result<Self, NlpError> {
        if point.len() != self.n() {
            return Err(NlpError::DimensionMismatch(format!(
                "point has {} coordinates, {} variables declared",
                point.len(),
                self.n()
            )));
        }
        let mut p = self.clone();
        p.point = point;
        Ok(p)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), NlpError> {
        if x.len() != self.n() {
            return Err(NlpError::DimensionMismatch(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.n()
            )));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> Result<f64, NlpError> {
        self.check_dim(x)?;
        Ok(self.objective.eval(x)?)
    }

    pub fn constraint_values(&self, x: &[f64]) -> Result<Vec<f64>, NlpError> {
        self.check_dim(x)?;
        Ok(eval_vec(&self.constraints, x)?)
    }

    /// `max_i q_i(x) ≤ ACTIVE_TOL`; points where evaluation fails are
    /// infeasible.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.constraints
            .iter()
            .all(|q| matches!(q.eval(x), Ok(v) if v <= ACTIVE_TOL))
    }

    /// Constraint Jacobian `∇q(x)` (`m × n`).
    pub fn jacobian(&self, x: &[f64]) -> Result<Mat, NlpError> {
        self.check_dim(x)?;
        let rows = self
            .grad_q
            .iter()
            .map(|g| eval_vec(g, x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Mat::from_rows_with_cols(&rows, self.n()))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<PointEvaluation, NlpError> {
        self.check_dim(x)?;
        let n = self.n();
        let g = self.objective.eval(x)?;
        let grad_g = eval_vec(&self.grad_g, x)?;
        let hess_g = eval_table(&self.hess_g, x)?;
        let q = eval_vec(&self.constraints, x)?;
        let jacobian = self.jacobian(x)?;
        let hess_q = self
            .hess_q
            .iter()
            .map(|h| eval_table(h, x))
            .collect::<Result<Vec<_>, _>>()?;
        let active = (0..q.len()).filter(|&i| q[i] >= -ACTIVE_TOL).collect();
        let feasible = q.iter().all(|&v| v <= ACTIVE_TOL);
        debug_assert_eq!(hess_g.rows(), n);
        Ok(PointEvaluation {
            x: x.to_vec(),
            g,
            grad_g,
            hess_g,
            q,
            jacobian,
            hess_q,
            active,
            feasible,
        })
    }
}

fn eval_table(h: &[Vec<Expr>], x: &[f64]) -> Result<Mat, ExprError> {
    let rows = h
        .iter()
        .map(|row| eval_vec(row, x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Mat::from_rows_with_cols(&rows, h.len()))
}

/// First- and second-order data of `g` and `q` at one point.
#[derive(Debug, Clone)]
pub struct PointEvaluation {
    pub x: Vec<f64>,
    pub g: f64,
    pub grad_g: Vec<f64>,
    pub hess_g: Mat,
    pub q: Vec<f64>,
    /// `∇q(x)`, one row per constraint.
    pub jacobian: Mat,
    pub hess_q: Vec<Mat>,
    /// `I(x)`, ascending.
    pub active: Vec<usize>,
    pub feasible: bool,
}

impl PointEvaluation {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active.binary_search(&i).is_ok()
    }

    pub fn max_violation(&self) -> f64 {
        self.q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn require_feasible(&self) -> Result<(), NlpError> {
        if self.feasible {
            Ok(())
        } else {
            Err(NlpError::InfeasiblePoint {
                max_violation: self.max_violation(),
            })
        }
    }

    /// Rows `∇q_i(x)` for `i` in `idx`.
    pub fn gradient_rows(&self, idx: &[usize]) -> Mat {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| self.jacobian.row(i).to_vec()).collect();
        Mat::from_rows_with_cols(&rows, self.n())
    }

    /// `∇q(x)ᵀλ`.
    pub fn jacobian_t_times(&self, lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (i, &l) in lambda.iter().enumerate() {
            if l != 0.0 {
                for (o, a) in out.iter_mut().zip(self.jacobian.row(i)) {
                    *o += l * a;
                }
            }
        }
        out
    }

    /// `∇²(λᵀq)(x)`.
    pub fn constraint_hessian(&self, lambda: &[f64]) -> Mat {
        let n = self.n();
        let mut h = Mat::zeros(n, n);
        for (i, &l) in lambda.iter().enumerate() {
            if l != 0.0 {
                h.add_scaled(&self.hess_q[i], l);
            }
        }
        h
    }

    /// `∇²_{xx}L(x, λ) = ∇²g(x) + ∇²(λᵀq)(x)`.
    pub fn lagrangian_hessian(&self, lambda: &[f64]) -> Mat {
        let mut h = self.hess_g.clone();
        h.add_scaled(&self.constraint_hessian(lambda), 1.0);
        h
    }

    /// `I⁺(λ) = {i : λ_i > POSITIVE_TOL}`.
    pub fn positive_support(lambda: &[f64]) -> Vec<usize> {
        (0..lambda.len()).filter(|&i| lambda[i] > POSITIVE_TOL).collect()
    }

    /// `min_λ ‖∇g(x) + ∇q(x)ᵀλ‖∞` over `λ ≥ 0` supported on `I(x)`, with a
    /// minimizing `λ`.
    pub fn stationarity(&self) -> Result<Stationarity, NlpError> {
        self.require_feasible()?;
        let n = self.n();
        let act = &self.active;
        let k = act.len();
        // Columns: λ_I (k), p (n), r (n), s (n), t (1);
        // rows: ∇q_Iᵀλ - p + r = -∇g,  p + r + s - t = 0.
        let cols = k + 3 * n + 1;
        let mut rows = vec![vec![0.0; cols]; 2 * n];
        let mut b = vec![0.0; 2 * n];
        for j in 0..n {
            for (c, &i) in act.iter().enumerate() {
                rows[j][c] = self.jacobian[(i, j)];
            }
            rows[j][k + j] = -1.0;
            rows[j][k + n + j] = 1.0;
            b[j] = -self.grad_g[j];
            rows[n + j][k + j] = 1.0;
            rows[n + j][k + n + j] = 1.0;
            rows[n + j][k + 2 * n + j] = 1.0;
            rows[n + j][cols - 1] = -1.0;
        }
        let mut cost = vec![0.0; cols];
        cost[cols - 1] = 1.0;
        let res = simplex(&Mat::from_rows_with_cols(&rows, cols), &b, &cost);
        let mut lambda = vec![0.0; self.m()];
        if res.status == LpStatus::Optimal {
            for (c, &i) in act.iter().enumerate() {
                lambda[i] = res.x[c];
            }
        }
        let mut r = self.jacobian_t_times(&lambda);
        for (ri, gi) in r.iter_mut().zip(&self.grad_g) {
            *ri += gi;
        }
        Ok(Stationarity {
            residual: norm_inf(&r),
            multiplier: lambda,
        })
    }

    /// `Λ(x, x*) = {λ ≥ 0 : ∇q(x)ᵀλ = x*, λ_i = 0 for i ∉ I(x)}` with its
    /// vertex/ray decomposition.
    pub fn multiplier_set(&self, xstar: &[f64]) -> Result<MultiplierSet, NlpError> {
        self.require_feasible()?;
        if xstar.len() != self.n() {
            return Err(NlpError::DimensionMismatch(format!(
                "x* has {} entries, expected {}",
                xstar.len(),
                self.n()
            )));
        }
        let m = self.m();
        let mut rows = self.jacobian.transpose().row_vecs();
        let mut b = xstar.to_vec();
        for i in (0..m).filter(|&i| !self.is_active(i)) {
            let mut r = vec![0.0; m];
            r[i] = 1.0;
            rows.push(r);
            b.push(0.0);
        }
        let poly = StdPolyhedron::new(Mat::from_rows_with_cols(&rows, m), b)?;
        let decomposition = match enumerate_vertices_rays(&poly) {
            Ok(d) => d,
            Err(PolyError::EmptyPolyhedron) => VertexRayDecomposition::default(),
            Err(e) => return Err(e.into()),
        };
        Ok(MultiplierSet {
            poly,
            decomposition,
            x: self.x.clone(),
            xstar: xstar.to_vec(),
        })
    }

    /// `T_Γ(x) = {u : ⟨∇q_i(x), u⟩ ≤ 0, i ∈ I(x)}`.
    pub fn tangent_cone(&self) -> Result<ConeRep, NlpError> {
        self.require_feasible()?;
        Ok(ConeRep::new(
            self.gradient_rows(&self.active),
            Mat::zeros(0, self.n()),
        ))
    }

    /// `K(x, x*)` from any multiplier `λref ∈ Λ(x, x*)`: equalities on
    /// `I⁺(λref)`, inequalities on the rest of `I(x)`.
    pub fn critical_cone(&self, xstar: &[f64], lambda_ref: &[f64]) -> Result<ConeRep, NlpError> {
        self.require_feasible()?;
        if lambda_ref.len() != self.m() || xstar.len() != self.n() {
            return Err(NlpError::DimensionMismatch(
                "multiplier or x* has the wrong length".into(),
            ));
        }
        let r = self.jacobian_t_times(lambda_ref);
        let residual = r
            .iter()
            .zip(xstar)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let bad_sign = lambda_ref.iter().any(|&l| l < -MULTIPLIER_TOL);
        let bad_support = (0..self.m()).any(|i| !self.is_active(i) && lambda_ref[i] > POSITIVE_TOL);
        if residual > MULTIPLIER_TOL || bad_sign || bad_support {
            return Err(NlpError::NotAMultiplier { residual });
        }
        let (eq, ineq): (Vec<usize>, Vec<usize>) = self
            .active
            .iter()
            .partition(|&&i| lambda_ref[i] > POSITIVE_TOL);
        Ok(ConeRep::new(self.gradient_rows(&ineq), self.gradient_rows(&eq)))
    }

    /// LP cost `c_i = -vᵀ∇²q_i(x)v` on active indices, `0` elsewhere.
    pub fn directional_cost(&self, v: &[f64]) -> Vec<f64> {
        (0..self.m())
            .map(|i| {
                if self.is_active(i) {
                    -self.hess_q[i].quad_form(v)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `LP(v)` over `Λ(x, x*)`; its optimal face is `Λ(x, x*; v)`.
    pub fn directional_multipliers(
        &self,
        set: &MultiplierSet,
        v: &[f64],
    ) -> Result<LpOutcome, NlpError> {
        if set.is_empty() {
            return Err(NlpError::EmptyMultiplierSet);
        }
        if v.len() != self.n() {
            return Err(NlpError::DimensionMismatch(format!(
                "direction has {} entries, expected {}",
                v.len(),
                self.n()
            )));
        }
        let c = self.directional_cost(v);
        Ok(lp_solve_with(&set.poly, Some(&set.decomposition), &c)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationarity {
    /// `‖∇g(x) + ∇q(x)ᵀλ‖∞` at the returned multiplier.
    pub residual: f64,
    pub multiplier: Vec<f64>,
}

/// `Λ(x, x*)` together with its enumeration.
#[derive(Debug, Clone)]
pub struct MultiplierSet {
    pub poly: StdPolyhedron,
    pub decomposition: VertexRayDecomposition,
    pub x: Vec<f64>,
    pub xstar: Vec<f64>,
}

impl MultiplierSet {
    pub fn is_empty(&self) -> bool {
        self.decomposition.is_empty()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.decomposition.vertices
    }

    pub fn rays(&self) -> &[Vec<f64>] {
        &self.decomposition.rays
    }

    pub fn contains(&self, lambda: &[f64], tol: f64) -> bool {
        self.poly.contains(lambda, tol)
    }
}

/// `{w : Bw ≤ 0, Cw = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRep {
    pub b: Mat,
    pub c: Mat,
}

impl ConeRep {
    pub fn new(b: Mat, c: Mat) -> Self {
        assert_eq!(b.cols(), c.cols(), "cone rows live in different spaces");
        ConeRep { b, c }
    }

    /// The whole space `R^n`.
    pub fn full(n: usize) -> Self {
        ConeRep::new(Mat::zeros(0, n), Mat::zeros(0, n))
    }

    pub fn dim(&self) -> usize {
        self.b.cols()
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        self.contains_tol(w, CONE_TOL)
    }

    pub fn contains_tol(&self, w: &[f64], tol: f64) -> bool {
        (0..self.b.rows()).all(|i| dot(self.b.row(i), w) <= tol)
            && (0..self.c.rows()).all(|i| dot(self.c.row(i), w).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    pub(crate) fn problem(vars: &[&str], obj: &str, cons: &[&str], point: &[f64]) -> Problem {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let g = parse_expr(obj, &vars).unwrap();
        let q = cons.iter().map(|c| parse_expr(c, &vars).unwrap()).collect();
        Problem::new(vars, g, q, point.to_vec()).unwrap()
    }

    fn nonconvex() -> Problem {
        problem(&["x1", "x2"], "x2^2+x1*x2-x1", &["-x1", "x1", "x1*x2^2"], &[0.0, 0.0])
    }

    fn twin() -> Problem {
        problem(&["x1", "x2"], "x1^2+x2^2", &["x1-x2", "x2-x1"], &[0.0, 0.0])
    }

    #[test]
    fn evaluate_examples() {
        let ev = nonconvex().evaluate(&[0.0, 0.0]).unwrap();
        assert_eq!(ev.grad_g, vec![-1.0, 0.0]);
        assert_eq!(ev.jacobian.row_vecs(), vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(ev.active, vec![0, 1, 2]);
        assert!(ev.feasible);

        let ev = twin().evaluate(&[0.0, 0.0]).unwrap();
        assert_eq!(ev.active, vec![0, 1]);
        assert_eq!(ev.grad_g, vec![0.0, 0.0]);

        let ev = nonconvex().evaluate(&[1.0, 0.0]).unwrap();
        assert!(!ev.feasible);
    }

    #[test]
    fn stationarity_examples() {
        let s = nonconvex().evaluate(&[0.0, 0.0]).unwrap().stationarity().unwrap();
        assert!(s.residual <= 1e-12);
        let s = twin().evaluate(&[0.0, 0.0]).unwrap().stationarity().unwrap();
        assert!(s.residual <= 1e-12);
        let p = problem(&["x1"], "x1", &[], &[0.0]);
        let s = p.evaluate(&[0.0]).unwrap().stationarity().unwrap();
        assert!((s.residual - 1.0).abs() < 1e-12);
        let ev = nonconvex().evaluate(&[1.0, 0.0]).unwrap();
        assert!(matches!(ev.stationarity(), Err(NlpError::InfeasiblePoint { .. })));
    }

    #[test]
    fn multiplier_set_examples() {
        let ev = nonconvex().evaluate(&[0.0, 0.0]).unwrap();
        let ms = ev.multiplier_set(&[1.0, 0.0]).unwrap();
        assert_eq!(ms.vertices(), &[vec![0.0, 1.0, 0.0]]);
        assert_eq!(ms.rays(), &[vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]);

        let ev = nonconvex().evaluate(&[0.0, 1.0 / 3.0]).unwrap();
        let ms = ev.multiplier_set(&[1.0, 0.0]).unwrap();
        assert!(ms
            .vertices()
            .iter()
            .any(|v| (v[2] - 9.0).abs() < 1e-9 && v[0] == 0.0 && v[1] == 0.0));

        let p = problem(&["x1", "x2"], "x1^2+x2^2", &["x1", "x2"], &[0.0, 0.0]);
        let ms = p.evaluate(&[0.0, 0.0]).unwrap().multiplier_set(&[0.0, 0.0]).unwrap();
        assert_eq!(ms.vertices(), &[vec![0.0, 0.0]]);
        assert!(ms.rays().is_empty());
    }

    #[test]
    fn tangent_cone_examples() {
        let t = twin().evaluate(&[0.0, 0.0]).unwrap().tangent_cone().unwrap();
        assert!(t.contains(&[1.0, 1.0]) && !t.contains(&[1.0, 0.0]));
        let t = nonconvex().evaluate(&[0.0, 0.0]).unwrap().tangent_cone().unwrap();
        assert!(t.contains(&[0.0, -3.0]) && !t.contains(&[0.1, 0.0]));
        let p = problem(&["x1"], "x1^2", &[], &[0.0]);
        assert!(p.evaluate(&[0.0]).unwrap().tangent_cone().unwrap().contains(&[5.0]));
    }

    #[test]
    fn critical_cone_examples() {
        let ev = nonconvex().evaluate(&[0.0, 0.0]).unwrap();
        let k = ev.critical_cone(&[1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!(k.contains(&[0.0, 1.0]) && k.contains(&[0.0, -1.0]) && !k.contains(&[-1.0, 0.0]));
        assert!(matches!(
            ev.critical_cone(&[1.0, 0.0], &[1.0, 0.0, 0.0]),
            Err(NlpError::NotAMultiplier { .. })
        ));

        let ev = twin().evaluate(&[0.0, 0.0]).unwrap();
        let k = ev.critical_cone(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(k.contains(&[1.0, 1.0]) && !k.contains(&[1.0, -1.0]));

        let p = problem(&["x1", "x2"], "x1^2", &[], &[0.0, 0.0]);
        let k = p.evaluate(&[0.0, 0.0]).unwrap().critical_cone(&[0.0, 0.0], &[]).unwrap();
        assert!(k.contains(&[3.0, -4.0]));
    }

    #[test]
    fn directional_multipliers_examples() {
        let ev = nonconvex().evaluate(&[0.0, 0.0]).unwrap();
        let ms = ev.multiplier_set(&[1.0, 0.0]).unwrap();
        let out = ev.directional_multipliers(&ms, &[0.0, 1.0]).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.face_vertices, ms.vertices());
        assert_eq!(out.face_rays, ms.rays());

        let ev = twin().evaluate(&[0.0, 0.0]).unwrap();
        let ms = ev.multiplier_set(&[0.0, 0.0]).unwrap();
        for v in [[1.0, 0.0], [0.3, -2.0]] {
            let out = ev.directional_multipliers(&ms, &v).unwrap();
            assert_eq!(out.face_vertices, ms.vertices());
            assert_eq!(out.face_rays, ms.rays());
        }

        let p = problem(&["x1", "x2"], "x1^2+x2^2", &["x1^2+x2-1", "x2"], &[0.0, 0.0]);
        let ev = p.evaluate(&[0.0, 0.0]).unwrap();
        let ms = ev.multiplier_set(&[0.0, 0.0]).unwrap();
        let a = ev.directional_multipliers(&ms, &[1.0, 0.5]).unwrap();
        let b = ev.directional_multipliers(&ms, &[2.0, 1.0]).unwrap();
        assert_eq!(a.face_vertices, b.face_vertices);
    }

    #[test]
    fn lagrangian_hessian_of_nonconvex_example() {
        let ev = nonconvex().evaluate(&[0.0, 0.0]).unwrap();
        let h = ev.lagrangian_hessian(&[3.0, 4.0, 5.0]);
        assert_eq!(h.row_vecs(), vec![vec![0.0, 1.0], vec![1.0, 2.0]]);
    }
}
