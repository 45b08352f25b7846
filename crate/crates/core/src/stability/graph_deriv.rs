//! Graphical derivative of the subgradient mapping of `g + δ_Γ`:
//! `D(∂φ)(x|v)(w) = {∇²L(x, λ)w : λ ∈ Λ(x, x*; w)} + N_K(w)` for `w` in the
//! critical cone `K = K(x, x*)`, `x* = v - ∇g(x)`, and empty otherwise.

use super::AnalysisError;
use crate::linalg::{dot, Mat};
use crate::nlp::{NlpError, Problem, CONE_TOL};
use crate::polyhedra::{simplex, LpStatus};

/// `conv(base_vectors) + cone(cone_generators ∪ ray_directions)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDerivSet {
    /// `∇²L(x, λ)w` at the vertices of `Λ(x, x*; w)`.
    pub base_vectors: Vec<Vec<f64>>,
    /// `⟨∇²L(x, λ)w, w⟩` at those vertices.
    pub values: Vec<f64>,
    /// Generators of `N_K(w)`.
    pub cone_generators: Vec<Vec<f64>>,
    /// `∇²(rᵀq)(x)w` for the extreme rays `r` of `Λ(x, x*; w)`.
    pub ray_directions: Vec<Vec<f64>>,
    /// `⟨z, w⟩`, the same for every element `z` of the set.
    pub value: f64,
    pub empty: bool,
}

impl GraphDerivSet {
    fn empty() -> Self {
        GraphDerivSet {
            base_vectors: Vec::new(),
            values: Vec::new(),
            cone_generators: Vec::new(),
            ray_directions: Vec::new(),
            value: f64::NAN,
            empty: true,
        }
    }

    /// Membership of `z` up to `tol` in the ∞-norm residual.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        if self.empty {
            return false;
        }
        let n = z.len();
        let gens: Vec<&Vec<f64>> = self
            .cone_generators
            .iter()
            .chain(&self.ray_directions)
            .collect();
        let nb = self.base_vectors.len();
        // Columns: α (base), β (generators), s⁺, s⁻, e; minimize e with
        // |Σα b + Σβ g - z| ≤ e componentwise.
        let cols = nb + gens.len() + 2 * n + 1;
        let e = cols - 1;
        let mut a = Mat::zeros(2 * n + 1, cols);
        let mut b = vec![0.0; 2 * n + 1];
        for i in 0..n {
            for (k, bv) in self.base_vectors.iter().enumerate() {
                a[(2 * i, k)] = bv[i];
                a[(2 * i + 1, k)] = bv[i];
            }
            for (k, g) in gens.iter().enumerate() {
                a[(2 * i, nb + k)] = g[i];
                a[(2 * i + 1, nb + k)] = g[i];
            }
            // row 2i:   Σ ... - z_i - e + s⁺ = 0  (≤ e)
            // row 2i+1: Σ ... - z_i + e - s⁻ = 0  (≥ -e)
            a[(2 * i, e)] = -1.0;
            a[(2 * i, nb + gens.len() + i)] = 1.0;
            a[(2 * i + 1, e)] = 1.0;
            a[(2 * i + 1, nb + gens.len() + n + i)] = -1.0;
            b[2 * i] = z[i];
            b[2 * i + 1] = z[i];
        }
        for k in 0..nb {
            a[(2 * n, k)] = 1.0;
        }
        b[2 * n] = 1.0;
        let mut c = vec![0.0; cols];
        c[e] = 1.0;
        let res = simplex(&a, &b, &c);
        res.status == LpStatus::Optimal && res.value <= tol
    }
}

/// `D(∂φ)(x|v)(w)`. Fails when `x` is infeasible or `v ∉ ∂φ(x)`.
pub fn graphical_derivative(
    problem: &Problem,
    x: &[f64],
    v: &[f64],
    w: &[f64],
) -> Result<GraphDerivSet, AnalysisError> {
    let n = problem.n();
    if v.len() != n || w.len() != n {
        return Err(AnalysisError::InvalidParameter(format!(
            "v and w must have {n} entries"
        )));
    }
    let ev = problem.evaluate(x)?;
    let xstar: Vec<f64> = v.iter().zip(&ev.grad_g).map(|(a, b)| a - b).collect();
    let set = ev.multiplier_set(&xstar)?;
    let Some(lambda_ref) = set.vertices().first() else {
        return Err(NlpError::EmptyMultiplierSet.into());
    };
    let cone = ev.critical_cone(&xstar, lambda_ref)?;
    if !cone.contains(w) {
        return Ok(GraphDerivSet::empty());
    }
    let lp = ev.directional_multipliers(&set, w)?;
    if lp.status != LpStatus::Optimal {
        return Ok(GraphDerivSet::empty());
    }
    let base_vectors: Vec<Vec<f64>> = lp
        .face_vertices
        .iter()
        .map(|l| ev.lagrangian_hessian(l).matvec(w))
        .collect();
    let values = base_vectors.iter().map(|z| dot(z, w)).collect();
    let mut cone_generators = Vec::new();
    for i in 0..cone.b.rows() {
        let r = cone.b.row(i);
        if dot(r, w) >= -CONE_TOL {
            cone_generators.push(r.to_vec());
        }
    }
    for i in 0..cone.c.rows() {
        let r = cone.c.row(i);
        cone_generators.push(r.to_vec());
        cone_generators.push(r.iter().map(|t| -t).collect());
    }
    let ray_directions = lp
        .face_rays
        .iter()
        .map(|r| ev.constraint_hessian(r).matvec(w))
        .collect();
    Ok(GraphDerivSet {
        base_vectors,
        values,
        cone_generators,
        ray_directions,
        value: ev.hess_g.quad_form(w) - lp.value,
        empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::test_problems::*;

    #[test]
    fn halfplane_derivative() {
        // ∂φ(0) = 2·0 + R₊e1 at v = 0; K = {w1 ≤ 0}.
        let p = halfplane();
        let d = graphical_derivative(&p, &[0.0, 0.0], &[0.0, 0.0], &[-1.0, 0.5]).unwrap();
        assert!(!d.empty);
        assert_eq!(d.base_vectors, vec![vec![-2.0, 1.0]]);
        assert!(d.cone_generators.is_empty());
        assert!((d.value - 2.5).abs() < 1e-12);
        let d = graphical_derivative(&p, &[0.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(d.contains(&[0.0, 2.0], 1e-9));
        assert!(d.contains(&[3.0, 2.0], 1e-9));
        assert!(!d.contains(&[-1.0, 2.0], 1e-9));
        let d = graphical_derivative(&p, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(d.empty);
    }

    #[test]
    fn nonconvex_example_derivative() {
        // v = 0 at the origin; K = {w1 = 0}; ∇²q3 vanishes so LP(w) is constant.
        let p = nonconvex();
        let w = [0.0, 1.0];
        let d = graphical_derivative(&p, &[0.0, 0.0], &[0.0, 0.0], &w).unwrap();
        assert!(!d.empty);
        assert!((d.value - 2.0).abs() < 1e-12);
        for (z, val) in d.base_vectors.iter().zip(&d.values) {
            assert!((dot(z, &w) - val).abs() < 1e-12);
            assert!(d.contains(z, 1e-9));
        }
    }

    #[test]
    fn rejects_non_subgradient() {
        let p = halfplane();
        assert!(graphical_derivative(&p, &[0.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]).is_err());
    }
}
