//! The multiplier subset
//! `Δ(x̄) = ⋃_{0≠v∈K} Λ(x̄, x̄*; v) ∩ γ‖∇g(x̄)‖B` and the direction sampling
//! of the critical cone `K` behind it.

use super::{AnalysisError, StationaryPoint};
use crate::linalg::{dot, norm2, nullspace, Mat, RANK_TOL};
use crate::nlp::ConeRep;
use crate::polyhedra::{
    dedup_sorted, optimal_face, simplex, truncate_ball, BallNorm, Combinations, FaceResult,
    LpStatus, StdPolyhedron,
};
use crate::sampling::sphere_directions;

/// Cap on the row subsets tried when collecting extreme rays of a cone.
const MAX_RAY_SUBSETS: usize = 4096;

/// Unit directions of a polyhedral cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSample {
    pub directions: Vec<Vec<f64>>,
    /// Dimension of the linear hull of the cone.
    pub hull_dim: usize,
    /// How many of the directions are extreme rays or lineality vectors.
    pub extreme: usize,
}

/// Deterministic unit directions of `K = {Bw ≤ 0, Cw = 0}`.
///
/// Rows of `B` that vanish on all of `K` are found by linear programming
/// and moved to the equalities, which fixes the linear hull `span(Z)` of
/// `K`. Sphere points of the hull (in `Z` coordinates) are filtered by
/// membership and supplemented with the extreme rays (from every set of
/// `dim - 1` hull constraints) and with `±` a basis of the lineality space.
pub fn sample_cone_directions(cone: &ConeRep, count: usize) -> ConeSample {
    let n = cone.dim();
    let rows_b = cone.b.row_vecs();
    let implicit: Vec<bool> = rows_b
        .iter()
        .map(|r| max_over_cone(cone, &r.iter().map(|v| -v).collect::<Vec<_>>()) <= 1e-9)
        .collect();
    let mut eq = cone.c.row_vecs();
    eq.extend(
        rows_b
            .iter()
            .zip(&implicit)
            .filter(|(_, &imp)| imp)
            .map(|(r, _)| r.clone()),
    );
    let z = nullspace(&Mat::from_rows_with_cols(&eq, n), RANK_TOL);
    let d = z.cols();
    if d == 0 {
        return ConeSample {
            directions: Vec::new(),
            hull_dim: 0,
            extreme: 0,
        };
    }
    let rest: Vec<Vec<f64>> = rows_b
        .iter()
        .zip(&implicit)
        .filter(|(_, &imp)| !imp)
        .map(|(r, _)| r.clone())
        .collect();
    let bh = if rest.is_empty() {
        Mat::zeros(0, d)
    } else {
        Mat::from_rows_with_cols(&rest, n).matmul(&z)
    };
    let inside = |y: &[f64]| (0..bh.rows()).all(|i| dot(bh.row(i), y) <= 1e-9 * norm2(y));

    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut push = |w: Vec<f64>| {
        let nw = norm2(&w);
        if nw <= 1e-12 {
            return false;
        }
        let w: Vec<f64> = w.iter().map(|v| v / nw).collect();
        if out.iter().any(|u| dot(u, &w) > 1.0 - 1e-12) {
            return false;
        }
        out.push(w);
        true
    };

    let mut extreme = 0;
    // Lineality space {B w = 0, C w = 0}.
    let mut all = cone.c.row_vecs();
    all.extend(rows_b.iter().cloned());
    let lin = nullspace(&Mat::from_rows_with_cols(&all, n), RANK_TOL);
    for k in 0..lin.cols() {
        let c = lin.col(k);
        extreme += push(c.clone()) as usize;
        extreme += push(c.iter().map(|v| -v).collect()) as usize;
    }
    if d >= 2 && bh.rows() >= d - 1 {
        for s in Combinations::new(bh.rows(), d - 1).take(MAX_RAY_SUBSETS) {
            let sub: Vec<Vec<f64>> = s.iter().map(|&i| bh.row(i).to_vec()).collect();
            let ns = nullspace(&Mat::from_rows_with_cols(&sub, d), RANK_TOL);
            if ns.cols() != 1 {
                continue;
            }
            let y = ns.col(0);
            for sign in [1.0, -1.0] {
                let ys: Vec<f64> = y.iter().map(|v| sign * v).collect();
                if inside(&ys) {
                    extreme += push(z.matvec(&ys)) as usize;
                }
            }
        }
    }
    for y in sphere_directions(d, count) {
        if inside(&y) {
            push(z.matvec(&y));
        }
    }
    ConeSample {
        directions: out,
        hull_dim: d,
        extreme,
    }
}

/// `max ⟨r, w⟩` over `K ∩ [-1, 1]^n`.
fn max_over_cone(cone: &ConeRep, r: &[f64]) -> f64 {
    let n = cone.dim();
    let kb = cone.b.rows();
    let kc = cone.c.rows();
    // w = u - 1, u ∈ [0, 2]. Columns: u (n), box slacks (n), B slacks (kb).
    let cols = 2 * n + kb;
    let mut rows = Vec::with_capacity(n + kb + kc);
    let mut b = Vec::with_capacity(n + kb + kc);
    for j in 0..n {
        let mut row = vec![0.0; cols];
        row[j] = 1.0;
        row[n + j] = 1.0;
        rows.push(row);
        b.push(2.0);
    }
    for i in 0..kb {
        let mut row = vec![0.0; cols];
        row[..n].copy_from_slice(cone.b.row(i));
        row[2 * n + i] = 1.0;
        rows.push(row);
        b.push(cone.b.row(i).iter().sum());
    }
    for i in 0..kc {
        let mut row = vec![0.0; cols];
        row[..n].copy_from_slice(cone.c.row(i));
        rows.push(row);
        b.push(cone.c.row(i).iter().sum());
    }
    let mut cost = vec![0.0; cols];
    for j in 0..n {
        cost[j] = -r[j];
    }
    let res = simplex(&Mat::from_rows_with_cols(&rows, cols), &b, &cost);
    match res.status {
        LpStatus::Optimal => dot(r, &res.x[..n]) - r.iter().sum::<f64>(),
        _ => f64::INFINITY,
    }
}

/// Finite multiplier set standing in for `Δ(x̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSet {
    /// Vertices of the truncated optimal faces, deduplicated and sorted.
    pub vertices: Vec<Vec<f64>>,
    pub gamma: f64,
    /// Truncation radius `γ‖∇g(x̄)‖₂`.
    pub radius: f64,
    pub norm: BallNorm,
    /// True when the union over `K` is covered exhaustively.
    pub exact: bool,
    pub directions: usize,
    pub cone_dim: usize,
    /// Distinct optimal faces met.
    pub faces: usize,
    /// Directions whose `LP(v)` is unbounded (contributing nothing).
    pub unbounded_directions: usize,
    /// `∇g(x̄) = 0`, so the ball collapses to `{0}`.
    pub degenerate_ball: bool,
}

/// Builds `Δ(x̄)` from sampled critical directions. Each distinct optimal
/// face `Λ(x̄, x̄*; v)` is written as `Λ ∩ {λ_i = 0, i ∉ S}` (`S` the union
/// of the supports of its vertices and rays) and truncated by the ∞-norm
/// ball of radius `γ‖∇g(x̄)‖₂`.
pub fn build_delta(
    sp: &StationaryPoint,
    gamma: f64,
    directions: usize,
) -> Result<DeltaSet, AnalysisError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!(
            "γ must be positive, got {gamma}"
        )));
    }
    let m = sp.m();
    let radius = gamma * norm2(&sp.ev.grad_g);
    let (mut delta, faces) = collect_faces(sp, directions);
    delta.gamma = gamma;
    delta.radius = radius;
    if m == 0 {
        return Ok(delta);
    }
    let mut all = Vec::new();
    for face in &faces {
        let mut poly = sp.multipliers.poly.clone();
        for i in (0..m).filter(|i| !face.support.contains(i)) {
            let mut row = vec![0.0; m];
            row[i] = 1.0;
            poly = poly.with_equality(&row, 0.0);
        }
        all.extend(truncate_face(&poly, radius)?);
    }
    delta.vertices = dedup_sorted(all);
    Ok(delta)
}

/// `Δ_E(x̄)`: the union of the optimal-face vertices of `LP(v)` over the
/// sampled critical directions, without truncation.
pub fn build_delta_extreme(sp: &StationaryPoint, directions: usize) -> DeltaSet {
    let (mut delta, faces) = collect_faces(sp, directions);
    delta.gamma = f64::INFINITY;
    delta.radius = f64::INFINITY;
    if sp.m() > 0 {
        delta.vertices = dedup_sorted(faces.into_iter().flat_map(|f| f.vertices).collect());
    }
    delta
}

struct Face {
    support: Vec<usize>,
    vertices: Vec<Vec<f64>>,
}

fn collect_faces(sp: &StationaryPoint, directions: usize) -> (DeltaSet, Vec<Face>) {
    let ev = &sp.ev;
    let m = sp.m();
    let sample = sample_cone_directions(&sp.critical_cone, directions);
    let hessians_vanish = ev.active.iter().all(|&i| ev.hess_q[i].max_abs() == 0.0);
    let mut delta = DeltaSet {
        vertices: Vec::new(),
        gamma: f64::NAN,
        radius: f64::NAN,
        norm: BallNorm::Inf,
        exact: m == 0 || hessians_vanish || sample.hull_dim <= 1,
        directions: sample.directions.len(),
        cone_dim: sample.hull_dim,
        faces: 0,
        unbounded_directions: 0,
        degenerate_ball: ev.grad_g.iter().all(|&v| v == 0.0),
    };
    if m == 0 {
        if !sample.directions.is_empty() {
            delta.vertices = vec![Vec::new()];
        }
        return (delta, Vec::new());
    }
    let mut faces: Vec<Face> = Vec::new();
    for v in &sample.directions {
        let c = ev.directional_cost(v);
        match optimal_face(&sp.multipliers.decomposition, &c) {
            FaceResult::Optimal { vertices, rays, .. } => {
                let support: Vec<usize> = (0..m)
                    .filter(|&i| vertices.iter().chain(&rays).any(|p| p[i] > 0.0))
                    .collect();
                if !faces.iter().any(|f| f.support == support) {
                    faces.push(Face { support, vertices });
                }
            }
            FaceResult::Unbounded => delta.unbounded_directions += 1,
            FaceResult::Infeasible => {}
        }
    }
    delta.faces = faces.len();
    (delta, faces)
}

fn truncate_face(face: &StdPolyhedron, radius: f64) -> Result<Vec<Vec<f64>>, AnalysisError> {
    Ok(truncate_ball(face, radius, BallNorm::Inf)?.vertices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::test_problems::*;

    fn close(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12))
    }

    #[test]
    fn delta_of_nonconvex_example() {
        let sp = StationaryPoint::new(&nonconvex()).unwrap();
        let d = build_delta(&sp, 2.0, 500).unwrap();
        let want = vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 1.0, 2.0],
            vec![1.0, 2.0, 0.0],
            vec![1.0, 2.0, 2.0],
        ];
        assert!(close(&d.vertices, &want), "{:?}", d.vertices);
        assert!(d.exact && d.radius == 2.0);
    }

    #[test]
    fn delta_with_vanishing_gradient() {
        let sp = StationaryPoint::new(&twin()).unwrap();
        let d = build_delta(&sp, 1.0, 500).unwrap();
        assert_eq!(d.vertices, vec![vec![0.0, 0.0]]);
        assert!(d.degenerate_ball);
    }

    #[test]
    fn delta_without_constraints() {
        let sp = StationaryPoint::new(&bowl()).unwrap();
        let d = build_delta(&sp, 1.0, 500).unwrap();
        assert_eq!(d.vertices, vec![Vec::<f64>::new()]);
    }

    #[test]
    fn trivial_critical_cone_gives_empty_delta() {
        // min -x1 - x2 on the box corner: K = {0}.
        let p = problem(&["x1", "x2"], "-x1-x2", &["x1", "x2"], &[0.0, 0.0]);
        let sp = StationaryPoint::new(&p).unwrap();
        let d = build_delta(&sp, 1.0, 100).unwrap();
        assert!(d.vertices.is_empty() && d.cone_dim == 0);
    }

    #[test]
    fn cone_sampling_finds_hull_and_rays() {
        let cone = ConeRep::new(
            Mat::from_rows(&[vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![1.0, 0.0, 0.0]]),
            Mat::zeros(0, 3),
        );
        let s = sample_cone_directions(&cone, 200);
        assert_eq!(s.hull_dim, 2);
        assert!(s.directions.iter().all(|w| w[0].abs() < 1e-12 && w[1] >= -1e-12));
        assert!(s.directions.iter().any(|w| (w[2] - 1.0).abs() < 1e-12));
        assert!(s.directions.iter().any(|w| (w[2] + 1.0).abs() < 1e-12));
        assert!(s.directions.iter().any(|w| (w[1] - 1.0).abs() < 1e-12));
    }
}
