//! Brute-force ground truth for tilt stability: the localized argmin map
//! `M_γ(v) = argmin{g(x) - ⟨v, x⟩ : q(x) ≤ 0, ‖x - x̄‖ ≤ γ}` is computed on a
//! grid of tilts by exhaustive grid search plus local refinement, then
//! tested for single-valuedness, Lipschitz continuity and uniform
//! quadratic growth.

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{dot, norm2};
use crate::nlp::{NlpError, Problem};
use crate::search::{feasible_directions, pattern_search, SearchOptions};

/// Grids grow as `resolution^n`.
pub const MAX_ORACLE_DIM: usize = 3;
/// Grid points within `1e-6·(1 + |best|)` of the best value are refined.
const CANDIDATE_REL_TOL: f64 = 1e-6;
const MAX_CANDIDATES: usize = 256;
/// Refined clusters within `1e-8·(1 + |best|)` of the best value are minimizers.
const MINIMIZER_REL_TOL: f64 = 1e-8;
/// Slack in the growth inequality.
pub const GROWTH_SLACK: f64 = 1e-7;
/// Slack in the bound/oracle comparison `L̂ ≤ bound·(1 + 0.15) + 0.02`.
pub const CONSISTENCY_REL_SLACK: f64 = 0.15;
pub const CONSISTENCY_ABS_SLACK: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("oracle needs n ≤ {MAX_ORACLE_DIM}, got {0}")]
    DimensionTooHigh(usize),
    #[error("no feasible grid point in the ball")]
    NoFeasibleGridPoint,
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nlp(#[from] NlpError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Radius of the ball `B̄_γ(x̄)`.
    pub gamma: f64,
    /// Tilts satisfy `‖v‖ ≤ ρ`.
    pub tilt_radius: f64,
    /// Levels per axis of the tilt grid.
    pub tilt_levels: usize,
    /// Requested grid points per axis (rounded to the odd count
    /// `2⌊r/2⌋ + 1` so that `x̄` is a grid point).
    pub resolution: usize,
    /// Pattern-search polls per refined candidate.
    pub refine_polls: usize,
    /// Refined points closer than this share a cluster; `None` means
    /// `1e-3·γ`.
    pub cluster_tol: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            gamma: 0.5,
            tilt_radius: 0.05,
            tilt_levels: 5,
            resolution: 65,
            refine_polls: 200,
            cluster_tol: None,
        }
    }
}

impl OracleConfig {
    pub fn cluster_tolerance(&self) -> f64 {
        self.cluster_tol.unwrap_or(1e-3 * self.gamma)
    }

    pub fn points_per_axis(&self) -> usize {
        2 * (self.resolution / 2) + 1
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: &str| Err(OracleError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("γ must be positive");
        }
        if !(self.tilt_radius > 0.0 && self.tilt_radius.is_finite()) {
            return bad("tilt radius must be positive");
        }
        if self.resolution < 32 {
            return bad("resolution must be at least 32");
        }
        if self.tilt_levels < 2 {
            return bad("at least two tilt levels are needed");
        }
        if !(self.cluster_tolerance() > 0.0) {
            return bad("cluster tolerance must be positive");
        }
        Ok(())
    }
}

/// Minimizers of one tilted problem that coincide up to the cluster
/// tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Best member.
    pub point: Vec<f64>,
    /// Largest distance between two members.
    pub diameter: f64,
    /// Tilted objective at `point`.
    pub value: f64,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltResult {
    pub v: Vec<f64>,
    /// Sorted by value.
    pub clusters: Vec<Cluster>,
    /// Smallest distance between two cluster representatives.
    pub min_separation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleWitness {
    /// The tilt `v` has several minimizers.
    MultiValued { v: Vec<f64>, points: Vec<Vec<f64>> },
    /// `M(0)` misses `x̄`.
    NotALocalMin { minimizer: Vec<f64>, distance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub config: OracleConfig,
    /// Feasible grid points in the ball.
    pub grid_points: usize,
    pub tilts: Vec<TiltResult>,
    pub single_valued: bool,
    /// `max ‖M(v) - M(v')‖ / ‖v - v'‖` over tilt pairs with
    /// `‖v - v'‖ ≥ ρ/10`; only when single-valued.
    pub lipschitz: Option<f64>,
    /// Pair attaining `lipschitz`.
    pub lipschitz_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub xbar_in_m0: bool,
    pub witnesses: Vec<OracleWitness>,
}

/// Feasible grid points of `B̄_γ(x̄)` with their objective values.
#[derive(Debug, Clone)]
struct Grid {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    spacing: f64,
}

fn build_grid(problem: &Problem, cfg: &OracleConfig) -> Result<Grid, OracleError> {
    let n = problem.n();
    if n > MAX_ORACLE_DIM {
        return Err(OracleError::DimensionTooHigh(n));
    }
    cfg.validate()?;
    let xbar = problem.point();
    let k = cfg.points_per_axis();
    let spacing = 2.0 * cfg.gamma / (k - 1) as f64;
    let half = (k / 2) as f64;
    let total = k.pow(n as u32);
    let found: Vec<(Vec<f64>, f64)> = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let mut rest = idx;
            let mut off = vec![0.0; n];
            for o in off.iter_mut() {
                *o = ((rest % k) as f64 - half) * spacing;
                rest /= k;
            }
            if norm2(&off) > cfg.gamma * (1.0 + 1e-12) {
                return None;
            }
            let x: Vec<f64> = xbar.iter().zip(&off).map(|(a, b)| a + b).collect();
            if !problem.is_feasible(&x) {
                return None;
            }
            let g = problem.objective_value(&x).ok()?;
            g.is_finite().then_some((x, g))
        })
        .collect();
    if found.is_empty() {
        return Err(OracleError::NoFeasibleGridPoint);
    }
    let (points, values) = found.into_iter().unzip();
    Ok(Grid {
        points,
        values,
        spacing,
    })
}

/// Clusters of `argmin{g(x) - ⟨v, x⟩ : q(x) ≤ 0, ‖x - x̄‖ ≤ γ}`.
pub fn solve_tilted(
    problem: &Problem,
    v: &[f64],
    cfg: &OracleConfig,
) -> Result<TiltResult, OracleError> {
    let grid = build_grid(problem, cfg)?;
    check_tilt_len(problem, v)?;
    Ok(solve_on_grid(problem, &grid, v, cfg))
}

fn check_tilt_len(problem: &Problem, v: &[f64]) -> Result<(), OracleError> {
    if v.len() != problem.n() {
        return Err(OracleError::InvalidConfig(format!(
            "tilt has {} entries, expected {}",
            v.len(),
            problem.n()
        )));
    }
    Ok(())
}

fn solve_on_grid(problem: &Problem, grid: &Grid, v: &[f64], cfg: &OracleConfig) -> TiltResult {
    let xbar = problem.point();
    let gamma = cfg.gamma;
    let tilted: Vec<f64> = grid
        .points
        .iter()
        .zip(&grid.values)
        .map(|(x, g)| g - dot(v, x))
        .collect();
    let best = tilted.iter().copied().fold(f64::INFINITY, f64::min);
    let cut = best + CANDIDATE_REL_TOL * (1.0 + best.abs());
    let mut cand: Vec<usize> = (0..tilted.len()).filter(|&i| tilted[i] <= cut).collect();
    cand.sort_by(|&a, &b| tilted[a].total_cmp(&tilted[b]).then(a.cmp(&b)));
    cand.truncate(MAX_CANDIDATES);

    let in_ball = |y: &[f64]| {
        let d: Vec<f64> = y.iter().zip(xbar).map(|(a, b)| a - b).collect();
        norm2(&d) <= gamma * (1.0 + 1e-12)
    };
    let objective = |y: &[f64]| -> Option<f64> {
        if !in_ball(y) || !problem.is_feasible(y) {
            return None;
        }
        let g = problem.objective_value(y).ok()?;
        g.is_finite().then(|| g - dot(v, y))
    };
    let directions = |y: &[f64], step: f64| {
        let d: Vec<f64> = y.iter().zip(xbar).map(|(a, b)| a - b).collect();
        let extra = if norm2(&d) >= gamma - step { vec![d] } else { Vec::new() };
        feasible_directions(problem, y, step, &extra)
    };
    let opts = SearchOptions {
        initial_step: grid.spacing,
        min_step: 1e-11 * (1.0 + gamma),
        max_polls: cfg.refine_polls,
    };
    let refined: Vec<(Vec<f64>, f64)> = cand
        .iter()
        .map(|&i| pattern_search(grid.points[i].clone(), tilted[i], opts, objective, directions))
        .collect();

    let tol = cfg.cluster_tolerance();
    let mut order: Vec<usize> = (0..refined.len()).collect();
    order.sort_by(|&a, &b| refined[a].1.total_cmp(&refined[b].1).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let p = &refined[i].0;
        match groups.iter_mut().find(|g| dist(&refined[g[0]].0, p) <= tol) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    let best_val = refined.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let keep = best_val + MINIMIZER_REL_TOL * (1.0 + best_val.abs());
    let clusters: Vec<Cluster> = groups
        .iter()
        .filter(|g| refined[g[0]].1 <= keep)
        .map(|g| {
            let mut diameter: f64 = 0.0;
            for (a, &i) in g.iter().enumerate() {
                for &j in &g[a + 1..] {
                    diameter = diameter.max(dist(&refined[i].0, &refined[j].0));
                }
            }
            Cluster {
                point: refined[g[0]].0.clone(),
                diameter,
                value: refined[g[0]].1,
                members: g.len(),
            }
        })
        .collect();
    let mut min_separation: Option<f64> = None;
    for (a, ca) in clusters.iter().enumerate() {
        for cb in &clusters[a + 1..] {
            let d = dist(&ca.point, &cb.point);
            min_separation = Some(min_separation.map_or(d, |m| m.min(d)));
        }
    }
    TiltResult {
        v: v.to_vec(),
        clusters,
        min_separation,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `ρ/√n · L^n` for the levels `L` evenly spaced in `[-1, 1]`, followed by
/// `±ρ e_i`.
pub fn tilt_grid(n: usize, cfg: &OracleConfig) -> Vec<Vec<f64>> {
    let levels = cfg.tilt_levels;
    let scale = cfg.tilt_radius / (n.max(1) as f64).sqrt();
    let level = |k: usize| -1.0 + 2.0 * k as f64 / (levels - 1) as f64;
    let mut out = Vec::new();
    for idx in 0..levels.pow(n as u32) {
        let mut rest = idx;
        let mut v = vec![0.0; n];
        for vi in v.iter_mut() {
            *vi = scale * level(rest % levels);
            rest /= levels;
        }
        out.push(v);
    }
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[i] = s * cfg.tilt_radius;
            out.push(v);
        }
    }
    out
}

/// Runs the tilted problems over [`tilt_grid`] and summarizes them.
pub fn verify_tilt_stability(
    problem: &Problem,
    cfg: &OracleConfig,
) -> Result<OracleReport, OracleError> {
    let grid = build_grid(problem, cfg)?;
    let tilts: Vec<TiltResult> = tilt_grid(problem.n(), cfg)
        .par_iter()
        .map(|v| solve_on_grid(problem, &grid, v, cfg))
        .collect();
    let mut witnesses = Vec::new();
    for t in &tilts {
        if t.clusters.len() != 1 {
            witnesses.push(OracleWitness::MultiValued {
                v: t.v.clone(),
                points: t.clusters.iter().map(|c| c.point.clone()).collect(),
            });
        }
    }
    let single_valued = witnesses.is_empty();
    let xbar = problem.point();
    let tol = cfg.cluster_tolerance();
    let zero = tilts.iter().find(|t| t.v.iter().all(|&x| x == 0.0));
    let mut xbar_in_m0 = false;
    if let Some(z) = zero {
        xbar_in_m0 = z.clusters.iter().any(|c| dist(&c.point, xbar) <= tol);
        if !xbar_in_m0 {
            if let Some(c) = z.clusters.first() {
                witnesses.push(OracleWitness::NotALocalMin {
                    minimizer: c.point.clone(),
                    distance: dist(&c.point, xbar),
                });
            }
        }
    }
    let (lipschitz, lipschitz_pair) = if single_valued {
        let min_gap = cfg.tilt_radius / 10.0;
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..tilts.len() {
            for b in a + 1..tilts.len() {
                let dv = dist(&tilts[a].v, &tilts[b].v);
                if dv < min_gap {
                    continue;
                }
                let r = dist(&tilts[a].clusters[0].point, &tilts[b].clusters[0].point) / dv;
                if best.is_none_or(|(l, _, _)| r > l) {
                    best = Some((r, a, b));
                }
            }
        }
        match best {
            Some((l, a, b)) => (Some(l), Some((tilts[a].v.clone(), tilts[b].v.clone()))),
            None => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(OracleReport {
        config: *cfg,
        grid_points: grid.points.len(),
        tilts,
        single_valued,
        lipschitz,
        lipschitz_pair,
        xbar_in_m0,
        witnesses,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthWitness {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    /// `g(x) - g(u) - ⟨v, x - u⟩`.
    pub lhs: f64,
    /// `‖x - u‖² / (2κ)`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub kappa: f64,
    pub holds: bool,
    /// Most violated inequality, if any.
    pub witness: Option<GrowthWitness>,
    /// Pairs `(v, u)` tested.
    pub pairs: usize,
}

/// Uniform quadratic growth
/// `g(x) ≥ g(u) + ⟨v, x - u⟩ + ‖x - u‖²/(2κ) - 1e-7` for every solved tilt
/// `(v, u = M(v))` of `report` and every feasible grid point `x`.
pub fn verify_growth(
    problem: &Problem,
    kappa: f64,
    report: &OracleReport,
) -> Result<GrowthReport, OracleError> {
    if !(kappa > 0.0) {
        return Err(OracleError::InvalidConfig("κ must be positive".into()));
    }
    let grid = build_grid(problem, &report.config)?;
    let pairs: Vec<(&[f64], &[f64])> = report
        .tilts
        .iter()
        .filter(|t| t.clusters.len() == 1)
        .map(|t| (t.v.as_slice(), t.clusters[0].point.as_slice()))
        .collect();
    let worst: Vec<Option<(f64, GrowthWitness)>> = pairs
        .par_iter()
        .map(|&(v, u)| -> Result<_, OracleError> {
            let gu = problem.objective_value(u)?;
            let mut worst: Option<(f64, GrowthWitness)> = None;
            for (x, gx) in grid.points.iter().zip(&grid.values) {
                let d: Vec<f64> = x.iter().zip(u).map(|(a, b)| a - b).collect();
                let lhs = gx - gu - dot(v, &d);
                let rhs = dot(&d, &d) / (2.0 * kappa);
                let gap = lhs - rhs;
                if gap < -GROWTH_SLACK && worst.as_ref().is_none_or(|w| gap < w.0) {
                    worst = Some((
                        gap,
                        GrowthWitness {
                            v: v.to_vec(),
                            u: u.to_vec(),
                            x: x.clone(),
                            lhs,
                            rhs,
                        },
                    ));
                }
            }
            Ok(worst)
        })
        .collect::<Result<_, _>>()?;
    let witness = worst
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .map(|w| w.1);
    Ok(GrowthReport {
        kappa,
        holds: witness.is_none(),
        witness,
        pairs: pairs.len(),
    })
}

/// Empirical modulus against an analytic bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyRecord {
    pub lipschitz: Option<f64>,
    pub bound: f64,
    /// `L̂ ≤ bound·1.15 + 0.02`, vacuous when either side is unavailable.
    pub pass: bool,
}

pub fn empirical_modulus_consistency(report: &OracleReport, bound: f64) -> ConsistencyRecord {
    let pass = match report.lipschitz {
        Some(l) if bound.is_finite() => {
            l <= bound * (1.0 + CONSISTENCY_REL_SLACK) + CONSISTENCY_ABS_SLACK
        }
        _ => true,
    };
    ConsistencyRecord {
        lipschitz: report.lipschitz,
        bound,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::test_problems::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        dist(a, b) <= tol
    }

    #[test]
    fn cross_tilts() {
        let p = cross();
        let cfg = OracleConfig::default();
        let r = solve_tilted(&p, &[0.1, 0.06], &cfg).unwrap();
        assert_eq!(r.clusters.len(), 1);
        assert!(close(&r.clusters[0].point, &[0.05, 0.0], 1e-6), "{r:?}");
        let r = solve_tilted(&p, &[0.1, 0.1], &cfg).unwrap();
        assert_eq!(r.clusters.len(), 2, "{r:?}");
        assert!(r.clusters.iter().any(|c| close(&c.point, &[0.05, 0.0], 2e-3)));
        assert!(r.clusters.iter().any(|c| close(&c.point, &[0.0, 0.05], 2e-3)));
    }

    #[test]
    fn unconstrained_tilt() {
        let r = solve_tilted(&bowl(), &[0.2, 0.0], &OracleConfig::default()).unwrap();
        assert_eq!(r.clusters.len(), 1);
        assert!(close(&r.clusters[0].point, &[0.1, 0.0], 1e-8));
    }

    #[test]
    fn stability_verdicts() {
        let cfg = OracleConfig::default();
        let r = verify_tilt_stability(&twin(), &cfg).unwrap();
        assert!(r.single_valued && r.xbar_in_m0);
        let l = r.lipschitz.unwrap();
        assert!((0.4..=0.55).contains(&l), "{l}");
        let r = verify_tilt_stability(&nonconvex(), &cfg).unwrap();
        assert!(r.single_valued && r.lipschitz.unwrap() <= 0.55);
        let r = verify_tilt_stability(&cross(), &cfg).unwrap();
        assert!(!r.single_valued && r.lipschitz.is_none());
        assert!(r
            .witnesses
            .iter()
            .any(|w| matches!(w, OracleWitness::MultiValued { v, .. } if v[0] == v[1])));
    }

    #[test]
    fn growth_verdicts() {
        let cfg = OracleConfig::default();
        let r = verify_tilt_stability(&nonconvex(), &cfg).unwrap();
        assert!(verify_growth(&nonconvex(), 0.6, &r).unwrap().holds);
        let g = verify_growth(&nonconvex(), 0.25, &r).unwrap();
        assert!(!g.holds);
        let w = g.witness.unwrap();
        assert!(w.lhs < w.rhs);
        let r = verify_tilt_stability(&bowl(), &cfg).unwrap();
        assert!(verify_growth(&bowl(), 0.5, &r).unwrap().holds);
    }

    #[test]
    fn config_validation() {
        let cfg = OracleConfig {
            resolution: 16,
            ..OracleConfig::default()
        };
        assert!(verify_tilt_stability(&bowl(), &cfg).is_err());
        let p = problem(&["a", "b", "c", "d"], "a^2", &[], &[0.0; 4]);
        assert_eq!(
            verify_tilt_stability(&p, &OracleConfig::default()).unwrap_err(),
            OracleError::DimensionTooHigh(4)
        );
    }

    #[test]
    fn tilt_grid_shape() {
        let t = tilt_grid(2, &OracleConfig::default());
        assert_eq!(t.len(), 25 + 4);
        assert!(t.iter().all(|v| norm2(v) <= 0.05 + 1e-15));
    }

    #[test]
    fn consistency_record() {
        let cfg = OracleConfig::default();
        let r = verify_tilt_stability(&bowl(), &cfg).unwrap();
        assert!((r.lipschitz.unwrap() - 0.5).abs() < 1e-6);
        assert!(empirical_modulus_consistency(&r, 0.5).pass);
        assert!(!empirical_modulus_consistency(&r, 0.3).pass);
    }
}
