//! Standard-form polyhedra `{λ ≥ 0, Aλ = b}`: a two-phase primal simplex
//! with Bland's rule, exhaustive vertex and extreme-ray enumeration, and
//! truncation by a norm ball.

use thiserror::Error;

use crate::linalg::{dot, independent_rows, norm2, norm_inf, Mat, RANK_TOL};

/// Enumeration works by brute force over column subsets.
pub const MAX_ENUM_COLUMNS: usize = 16;
/// Column limit for the slack-augmented system built by [`truncate_ball`].
pub const MAX_TRUNCATED_COLUMNS: usize = 24;

pub const VERTEX_DEDUP_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("{cols} columns exceed the enumeration limit of {limit}")]
    TooManyColumns { cols: usize, limit: usize },
    #[error("polyhedron is empty")]
    EmptyPolyhedron,
    #[error("truncation radius {0} is negative")]
    NegativeRadius(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// `{λ ∈ R^m : λ ≥ 0, Aλ = b}` with `A` of shape `k × m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StdPolyhedron {
    a: Mat,
    b: Vec<f64>,
}

impl StdPolyhedron {
    pub fn new(a: Mat, b: Vec<f64>) -> Result<Self, PolyError> {
        if a.rows() != b.len() {
            return Err(PolyError::DimensionMismatch(format!(
                "A has {} rows, b has {} entries",
                a.rows(),
                b.len()
            )));
        }
        Ok(StdPolyhedron { a, b })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Ambient dimension `m`.
    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    /// Same set intersected with the hyperplane `row · λ = rhs`.
    pub fn with_equality(&self, row: &[f64], rhs: f64) -> StdPolyhedron {
        let mut rows = self.a.row_vecs();
        rows.push(row.to_vec());
        let mut b = self.b.clone();
        b.push(rhs);
        StdPolyhedron {
            a: Mat::from_rows_with_cols(&rows, self.dim()),
            b,
        }
    }

    /// `Aλ = b` within `tol` (∞-norm) and `λ ≥ -tol`.
    pub fn contains(&self, lambda: &[f64], tol: f64) -> bool {
        lambda.len() == self.dim()
            && lambda.iter().all(|&v| v >= -tol)
            && self
                .a
                .matvec(lambda)
                .iter()
                .zip(&self.b)
                .all(|(l, r)| (l - r).abs() <= tol)
    }
}

/// Vertices and extreme rays (rays scaled to unit ∞-norm), both sorted
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexRayDecomposition {
    pub vertices: Vec<Vec<f64>>,
    pub rays: Vec<Vec<f64>>,
    /// Set when the decomposition over-approximates the requested set
    /// (2-norm truncation).
    pub approximate: bool,
}

impl VertexRayDecomposition {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.rays.is_empty()
    }

    /// Whether `lambda ∈ conv(vertices) + cone(rays)`, decided by a phase-one
    /// LP in the convex-combination weights.
    pub fn contains(&self, lambda: &[f64], tol: f64) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let m = lambda.len();
        let nv = self.vertices.len();
        let cols = nv + self.rays.len();
        let mut rows = vec![vec![0.0; cols]; m + 1];
        for (j, v) in self.vertices.iter().chain(&self.rays).enumerate() {
            for i in 0..m {
                rows[i][j] = v[i];
            }
            if j < nv {
                rows[m][j] = 1.0;
            }
        }
        let mut b = lambda.to_vec();
        b.push(1.0);
        let a = Mat::from_rows_with_cols(&rows, cols);
        let res = simplex(&a, &b, &vec![0.0; cols]);
        match res.status {
            LpStatus::Infeasible => false,
            _ => {
                let back = a.matvec(&res.x);
                back.iter().zip(&b).all(|(l, r)| (l - r).abs() <= tol.max(1e-9))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "Optimal",
            LpStatus::Unbounded => "Unbounded",
            LpStatus::Infeasible => "Infeasible",
        }
    }
}

/// Result of minimizing `c·λ` over a standard-form polyhedron.
#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Optimal value; `NaN` unless `status` is `Optimal`.
    pub value: f64,
    /// One optimal basic solution.
    pub vertex: Option<Vec<f64>>,
    /// Vertices of the optimal face.
    pub face_vertices: Vec<Vec<f64>>,
    /// Extreme rays of the optimal face (rays of the polyhedron with `c·r = 0`).
    pub face_rays: Vec<Vec<f64>>,
    /// False when the polyhedron was too wide to enumerate; the face lists
    /// then hold only `vertex`.
    pub face_enumerated: bool,
}

/// Two-phase simplex, then the optimal face from vertex enumeration.
pub fn lp_solve(p: &StdPolyhedron, c: &[f64]) -> Result<LpOutcome, PolyError> {
    let dec = if p.dim() <= MAX_ENUM_COLUMNS {
        match enumerate_vertices_rays(p) {
            Ok(d) => Some(d),
            Err(PolyError::EmptyPolyhedron) => Some(VertexRayDecomposition::default()),
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    lp_solve_with(p, dec.as_ref(), c)
}

/// [`lp_solve`] reusing a decomposition of `p` computed earlier. When the
/// simplex and the decomposition disagree on the status (tolerance edge
/// cases), the decomposition wins.
pub fn lp_solve_with(
    p: &StdPolyhedron,
    dec: Option<&VertexRayDecomposition>,
    c: &[f64],
) -> Result<LpOutcome, PolyError> {
    if c.len() != p.dim() {
        return Err(PolyError::DimensionMismatch(format!(
            "cost has {} entries, polyhedron dimension is {}",
            c.len(),
            p.dim()
        )));
    }
    let res = simplex(&p.a, &p.b, c);
    let mut out = LpOutcome {
        status: res.status,
        value: f64::NAN,
        vertex: None,
        face_vertices: Vec::new(),
        face_rays: Vec::new(),
        face_enumerated: false,
    };
    match dec.map(|d| optimal_face(d, c)) {
        Some(FaceResult::Optimal {
            value,
            vertices,
            rays,
        }) => {
            out.status = LpStatus::Optimal;
            let simplex_ok = res.status == LpStatus::Optimal
                && (res.value - value).abs() <= 1e-8 * (1.0 + value.abs());
            out.value = if simplex_ok { res.value } else { value };
            out.vertex = Some(if simplex_ok { res.x } else { vertices[0].clone() });
            out.face_vertices = vertices;
            out.face_rays = rays;
            out.face_enumerated = true;
        }
        Some(FaceResult::Unbounded) => out.status = LpStatus::Unbounded,
        Some(FaceResult::Infeasible) => out.status = LpStatus::Infeasible,
        None => {
            if res.status == LpStatus::Optimal {
                out.value = res.value;
                out.vertex = Some(res.x.clone());
                out.face_vertices = vec![res.x];
            }
        }
    }
    Ok(out)
}

/// Optimal face of `min c·λ` read off an enumerated decomposition.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceResult {
    Optimal {
        value: f64,
        vertices: Vec<Vec<f64>>,
        rays: Vec<Vec<f64>>,
    },
    Unbounded,
    Infeasible,
}

/// A ray with `c·r < -1e-9` makes the problem unbounded; otherwise the
/// face consists of the vertices within `1e-8·(1+|opt|)` of the optimum and
/// the rays orthogonal to `c`.
pub fn optimal_face(dec: &VertexRayDecomposition, c: &[f64]) -> FaceResult {
    if dec.vertices.is_empty() {
        return FaceResult::Infeasible;
    }
    if dec.rays.iter().any(|r| dot(c, r) < -1e-9) {
        return FaceResult::Unbounded;
    }
    let values: Vec<f64> = dec.vertices.iter().map(|v| dot(c, v)).collect();
    let opt = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-8 * (1.0 + opt.abs());
    let vertices = dec
        .vertices
        .iter()
        .zip(&values)
        .filter(|(_, &val)| val <= opt + tol)
        .map(|(v, _)| v.clone())
        .collect();
    let rays = dec
        .rays
        .iter()
        .filter(|r| dot(c, r) <= 1e-9)
        .cloned()
        .collect();
    FaceResult::Optimal {
        value: opt,
        vertices,
        rays,
    }
}

/// All basic feasible solutions and all extreme rays.
pub fn enumerate_vertices_rays(p: &StdPolyhedron) -> Result<VertexRayDecomposition, PolyError> {
    let m = p.dim();
    if m > MAX_ENUM_COLUMNS {
        return Err(PolyError::TooManyColumns {
            cols: m,
            limit: MAX_ENUM_COLUMNS,
        });
    }
    let vertices = basic_feasible_points(&p.a, &p.b);
    if vertices.is_empty() {
        return Err(PolyError::EmptyPolyhedron);
    }
    // Extreme rays of {λ ≥ 0, Aλ = 0} are the vertices of its slice by
    // Σλ = 1, rescaled to unit ∞-norm.
    let mut rows = p.a.row_vecs();
    rows.push(vec![1.0; m]);
    let mut b = vec![0.0; p.a.rows()];
    b.push(1.0);
    let slice = Mat::from_rows_with_cols(&rows, m);
    let rays = basic_feasible_points(&slice, &b)
        .into_iter()
        .map(|r| {
            let s = norm_inf(&r);
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    Ok(VertexRayDecomposition {
        vertices,
        rays: dedup_sorted(rays),
        approximate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallNorm {
    Inf,
    Two,
}

impl BallNorm {
    pub fn as_str(self) -> &'static str {
        match self {
            BallNorm::Inf => "inf",
            BallNorm::Two => "2",
        }
    }
}

/// Decomposition of `P ∩ {‖λ‖ ≤ radius}`.
///
/// The ∞-norm ball is handled exactly through slack columns
/// (`λ + s = radius·1`, `s ≥ 0`). For the 2-norm the ∞-norm result is
/// filtered to vertices inside the Euclidean ball and flagged approximate.
/// An empty intersection yields an empty decomposition.
pub fn truncate_ball(
    p: &StdPolyhedron,
    radius: f64,
    norm: BallNorm,
) -> Result<VertexRayDecomposition, PolyError> {
    if radius < 0.0 {
        return Err(PolyError::NegativeRadius(radius));
    }
    let m = p.dim();
    if 2 * m > MAX_TRUNCATED_COLUMNS {
        return Err(PolyError::TooManyColumns {
            cols: 2 * m,
            limit: MAX_TRUNCATED_COLUMNS,
        });
    }
    let k = p.a.rows();
    let mut rows = Vec::with_capacity(k + m);
    for i in 0..k {
        let mut r = p.a.row(i).to_vec();
        r.extend(std::iter::repeat_n(0.0, m));
        rows.push(r);
    }
    for i in 0..m {
        let mut r = vec![0.0; 2 * m];
        r[i] = 1.0;
        r[m + i] = 1.0;
        rows.push(r);
    }
    let mut b = p.b.clone();
    b.extend(std::iter::repeat_n(radius, m));
    let aug = Mat::from_rows_with_cols(&rows, 2 * m);
    let pts = basic_feasible_points(&aug, &b)
        .into_iter()
        .map(|v| v[..m].to_vec())
        .collect();
    let mut vertices = dedup_sorted(pts);
    let approximate = norm == BallNorm::Two;
    if approximate {
        vertices.retain(|v| norm2(v) <= radius * (1.0 + 1e-12) + 1e-12);
    }
    Ok(VertexRayDecomposition {
        vertices,
        rays: Vec::new(),
        approximate,
    })
}

/// Every basic solution of `{x ≥ 0, Ax = b}`: for each column subset of
/// size `rank(A)` with a nonsingular basis, solve and keep nonnegative
/// solutions that satisfy all rows (including ones dropped as redundant).
fn basic_feasible_points(a: &Mat, b: &[f64]) -> Vec<Vec<f64>> {
    let m = a.cols();
    let rows = independent_rows(a, RANK_TOL);
    let r = rows.len();
    let scale_b = 1.0 + norm_inf(b);
    let mut out = Vec::new();
    let mut basis = Mat::zeros(r, r);
    let rhs: Vec<f64> = rows.iter().map(|&i| b[i]).collect();
    for subset in Combinations::new(m, r) {
        for (bi, &ri) in rows.iter().enumerate() {
            for (bj, &cj) in subset.iter().enumerate() {
                basis[(bi, bj)] = a[(ri, cj)];
            }
        }
        let Some(xb) = solve_square(&basis, &rhs) else {
            continue;
        };
        if xb.iter().any(|&v| v < -FEAS_TOL * scale_b) {
            continue;
        }
        let mut x = vec![0.0; m];
        for (&j, &v) in subset.iter().zip(&xb) {
            x[j] = v.max(0.0);
        }
        let ok = a
            .matvec(&x)
            .iter()
            .zip(b)
            .all(|(l, r)| (l - r).abs() <= 1e-8 * scale_b);
        if ok {
            out.push(x);
        }
    }
    dedup_sorted(out)
}

/// Gaussian elimination with partial pivoting; `None` if numerically
/// singular.
fn solve_square(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs().max(1.0);
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|i| (i, m[(i, col)].abs()))
            .fold((col, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if pmax <= 1e-10 * scale {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(col, piv);
        }
        for i in col + 1..n {
            let f = m[(i, col)] / m[(col, col)];
            if f != 0.0 {
                for j in col..n {
                    m[(i, j)] -= f * m[(col, j)];
                }
                x[i] -= f * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Some(x)
}

/// Removes points within [`VERTEX_DEDUP_TOL`] (∞-norm) of an earlier point
/// and sorts the rest lexicographically.
pub fn dedup_sorted(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        let dup = kept.iter().any(|q| {
            q.iter()
                .zip(&p)
                .all(|(a, b)| (a - b).abs() <= VERTEX_DEDUP_TOL)
        });
        if !dup {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| lex_cmp(a, b));
    kept
}

pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Lexicographic `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Raw simplex result.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
}

/// Two-phase primal simplex on a dense tableau with Bland's rule.
///
/// Phase one minimizes the sum of artificials after flipping rows to make
/// `b ≥ 0`; artificials left in the basis at level zero are pivoted out or
/// their rows dropped as redundant.
pub fn simplex(a: &Mat, b: &[f64], c: &[f64]) -> SimplexResult {
    let (k, m) = (a.rows(), a.cols());
    let width = m + k;
    let mut t = Tableau {
        rows: Vec::with_capacity(k),
        rhs: Vec::with_capacity(k),
        basis: Vec::with_capacity(k),
    };
    for i in 0..k {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width];
        for j in 0..m {
            row[j] = sign * a[(i, j)];
        }
        row[m + i] = 1.0;
        t.rows.push(row);
        t.rhs.push(sign * b[i]);
        t.basis.push(m + i);
    }

    let mut phase1 = vec![0.0; width];
    for v in phase1.iter_mut().skip(m) {
        *v = 1.0;
    }
    t.run(&phase1, width);
    let infeas: f64 = t
        .basis
        .iter()
        .zip(&t.rhs)
        .filter(|(&j, _)| j >= m)
        .map(|(_, &v)| v)
        .sum();
    if infeas > 1e-9 * (1.0 + norm_inf(b)) {
        return SimplexResult {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            value: f64::NAN,
        };
    }

    // Drive zero-level artificials out of the basis.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= m {
            let col = (0..m).find(|&j| t.rows[i][j].abs() > PIVOT_TOL);
            match col {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.rhs.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut cost = vec![0.0; width];
    cost[..m].copy_from_slice(c);
    let status = t.run(&cost, m);
    let mut x = vec![0.0; m];
    for (&j, &v) in t.basis.iter().zip(&t.rhs) {
        if j < m {
            x[j] = v.max(0.0);
        }
    }
    let value = dot(c, &x);
    SimplexResult { status, x, value }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][j];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                self.rhs[i] -= f * prhs;
                if self.rhs[i].abs() < 1e-13 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        self.basis[r] = j;
    }

    /// Minimizes `cost` with entering columns restricted to `0..allowed`.
    fn run(&mut self, cost: &[f64], allowed: usize) -> LpStatus {
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index column with a negative reduced cost.
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = self
                    .rows
                    .iter()
                    .zip(&self.basis)
                    .map(|(row, &b)| cost[b] * row[j])
                    .sum();
                cost[j] - z < -1e-9
            });
            let Some(j) = entering else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(f64, usize, usize)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[j] > PIVOT_TOL {
                    let ratio = self.rhs[i] / row[j];
                    let better = match leave {
                        None => true,
                        Some((best, _, bvar)) => {
                            ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < bvar)
                        }
                    };
                    if better {
                        leave = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            match leave {
                None => return LpStatus::Unbounded,
                Some((_, r, _)) => self.pivot(r, j),
            }
        }
        LpStatus::Optimal
    }
}
