//! Deterministic low-discrepancy point sets: Halton sequences, ball and
//! shell samples and unit-sphere direction grids.

use crate::linalg::norm2;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    out
}

/// Halton sequence in `[0,1)^dim`, starting after the origin.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension above {}", PRIMES.len());
        Halton { dim, index: 0 }
    }

    /// Continues the sequence at a later index, to decorrelate two uses.
    pub fn skip(mut self, k: u64) -> Self {
        self.index += k;
        self
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        self.index += 1;
        Some(
            (0..self.dim)
                .map(|d| radical_inverse(self.index, PRIMES[d]))
                .collect(),
        )
    }
}

/// Unit vector built from a point of `[0,1)^n` by rejection in the unit
/// ball; `None` for rejected points.
fn cube_to_direction(u: &[f64]) -> Option<Vec<f64>> {
    let y: Vec<f64> = u.iter().map(|t| 2.0 * t - 1.0).collect();
    let r = norm2(&y);
    if !(1e-3..=1.0).contains(&r) {
        return None;
    }
    Some(y.iter().map(|v| v / r).collect())
}

/// `count` points in the closed ball `B_radius(center)` (rejection from the
/// enclosing cube).
pub fn ball_points(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let n = center.len();
    if n == 0 {
        return vec![Vec::new(); count.min(1)];
    }
    let mut out = Vec::with_capacity(count);
    for u in Halton::new(n).take(count * 64 + 64) {
        let y: Vec<f64> = u.iter().map(|t| 2.0 * t - 1.0).collect();
        if norm2(&y) <= 1.0 {
            out.push(center.iter().zip(&y).map(|(c, d)| c + radius * d).collect());
            if out.len() == count {
                break;
            }
        }
    }
    out
}

/// `count` points with `r_in < ‖x - center‖ ≤ r_out`: Halton directions
/// with radii spread by the last Halton coordinate.
pub fn shell_points(center: &[f64], r_in: f64, r_out: f64, count: usize) -> Vec<Vec<f64>> {
    let n = center.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(count);
    for u in Halton::new(n + 1).take(count * 64 + 64) {
        let Some(d) = cube_to_direction(&u[..n]) else {
            continue;
        };
        // 1 - u keeps the radius in (r_in, r_out].
        let r = r_in + (r_out - r_in) * (1.0 - u[n]);
        out.push(center.iter().zip(&d).map(|(c, di)| c + r * di).collect());
        if out.len() == count {
            break;
        }
    }
    out
}

/// Deterministic unit directions in `R^d`: `±1` for `d = 1`, an equiangular
/// circle for `d = 2`, a Fibonacci sphere for `d = 3` and normalized Halton
/// points above.
pub fn sphere_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(4))
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count.max(4) as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let count = count.max(8);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2 * k + 1) as f64 / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut out = Vec::with_capacity(count);
            for u in Halton::new(d).take(count * 1024 + 1024) {
                if let Some(v) = cube_to_direction(&u) {
                    out.push(v);
                    if out.len() == count {
                        break;
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        let v: Vec<f64> = (1..5).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn ball_points_stay_inside() {
        let pts = ball_points(&[1.0, -1.0], 0.1, 200);
        assert_eq!(pts.len(), 200);
        assert!(pts.iter().all(|p| norm2(&[p[0] - 1.0, p[1] + 1.0]) <= 0.1 + 1e-15));
    }

    #[test]
    fn shell_points_respect_radii() {
        let pts = shell_points(&[0.0, 0.0, 0.0], 0.05, 0.1, 300);
        assert_eq!(pts.len(), 300);
        for p in pts {
            let r = norm2(&p);
            assert!(r > 0.05 && r <= 0.1 + 1e-15, "{r}");
        }
    }

    #[test]
    fn sphere_directions_are_unit() {
        for d in 1..6 {
            let dirs = sphere_directions(d, 50);
            assert!(!dirs.is_empty());
            assert!(dirs.iter().all(|v| (norm2(v) - 1.0).abs() < 1e-12));
        }
    }
}
