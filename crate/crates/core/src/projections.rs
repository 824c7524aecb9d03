//! Constraint sets for the signal (a box) and the kernel (the unit simplex),
//! their Euclidean projections, and normal-cone residuals
//! `min { ||g + r|| : r in N_C(x) }` used to check first-order conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::KernelVector;

/// Elementwise box `[lower, upper]^N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub lower: f64,
    pub upper: f64,
}

impl Default for BoxSet {
    fn default() -> Self {
        Self {
            lower: 0.0,
            upper: 100.0,
        }
    }
}

impl BoxSet {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower < self.upper) {
            return Err(Error::invalid(format!(
                "box lower bound {} must be below upper bound {}",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| *v >= self.lower && *v <= self.upper)
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }
}

/// Unit simplex of dimension `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplexSet {
    pub dimension: usize,
}

impl SimplexSet {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("simplex dimension must be at least 1"));
        }
        Ok(Self { dimension })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dimension
            && x.iter().all(|v| *v >= 0.0)
            && (x.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

pub fn project_box(z: &[f64], b: &BoxSet) -> Vec<f64> {
    z.iter().map(|v| b.clamp(*v)).collect()
}

/// Euclidean projection onto the unit simplex with Condat's algorithm
/// (expected linear time). The result is renormalized so that its entries sum
/// to one up to rounding even for inputs of very large magnitude, and points
/// already on the simplex are returned unchanged.
pub fn project_simplex(z: &[f64]) -> Result<KernelVector> {
    if z.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cannot project a non-finite vector"));
    }
    KernelVector::new(project_simplex_raw(z))
}

const ON_SIMPLEX_TOL: f64 = 1e-14;

pub(crate) fn project_simplex_raw(z: &[f64]) -> Vec<f64> {
    if z.iter().all(|v| *v >= 0.0) && (z.iter().sum::<f64>() - 1.0).abs() <= ON_SIMPLEX_TOL {
        return z.to_vec();
    }
    let tau = condat_threshold(z);
    let mut x: Vec<f64> = z.iter().map(|v| (v - tau).max(0.0)).collect();
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        for v in &mut x {
            *v /= total;
        }
    } else {
        // Only reachable through catastrophic rounding; fall back to the
        // largest coordinate.
        let imax = z
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if *v > z[b] { i } else { b });
        x.iter_mut().for_each(|v| *v = 0.0);
        x[imax] = 1.0;
    }
    x
}

/// Threshold `tau` such that `max(z - tau, 0)` sums to one.
fn condat_threshold(z: &[f64]) -> f64 {
    let a = 1.0;
    let mut v: Vec<f64> = Vec::with_capacity(z.len());
    let mut v_tilde: Vec<f64> = Vec::new();
    v.push(z[0]);
    let mut rho = z[0] - a;
    for &y in &z[1..] {
        if y > rho {
            rho += (y - rho) / (v.len() + 1) as f64;
            if rho > y - a {
                v.push(y);
            } else {
                v_tilde.append(&mut v);
                v.push(y);
                rho = y - a;
            }
        }
    }
    for y in v_tilde {
        if y > rho {
            v.push(y);
            rho += (y - rho) / v.len() as f64;
        }
    }
    loop {
        let before = v.len();
        let mut i = 0;
        while i < v.len() {
            if v[i] <= rho && v.len() > 1 {
                let y = v.swap_remove(i);
                rho += (rho - y) / v.len() as f64;
            } else {
                i += 1;
            }
        }
        if v.len() == before {
            break;
        }
    }
    rho
}

/// `min { ||g + r|| : r in N_box(x) }`. Components where the cone absorbs
/// `g` (active lower bound with `g >= 0`, active upper bound with `g <= 0`)
/// contribute zero.
pub fn normal_cone_residual_box(x: &[f64], g: &[f64], b: &BoxSet) -> Result<f64> {
    if x.len() != g.len() {
        return Err(Error::invalid("point and gradient lengths differ"));
    }
    if !b.contains(x) {
        return Err(Error::invalid("point lies outside the box"));
    }
    Ok(box_residual_unchecked(x, g, b))
}

pub(crate) fn box_residual_unchecked(x: &[f64], g: &[f64], b: &BoxSet) -> f64 {
    x.iter()
        .zip(g)
        .map(|(xi, gi)| {
            let at_lower = *xi <= b.lower;
            let at_upper = *xi >= b.upper;
            let r = if at_lower && at_upper {
                0.0
            } else if at_lower {
                gi.min(0.0)
            } else if at_upper {
                gi.max(0.0)
            } else {
                *gi
            };
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Feasibility tolerance on the simplex sum for residual evaluation.
const RESIDUAL_SIMPLEX_TOL: f64 = 1e-9;

/// `min { ||g + r|| : r in N_simplex(x) }`.
///
/// The normal cone at `x` is `{ mu 1 - nu : nu >= 0, nu_i = 0 where x_i > 0 }`,
/// so the squared residual is the convex piecewise quadratic
/// `sum_{x_i > 0} (g_i + mu)^2 + sum_{x_i = 0} min(g_i + mu, 0)^2`, minimized
/// exactly over `mu`.
pub fn normal_cone_residual_simplex(x: &[f64], g: &[f64]) -> Result<f64> {
    if x.len() != g.len() || x.is_empty() {
        return Err(Error::invalid("point and gradient lengths differ"));
    }
    if !(SimplexSet { dimension: x.len() }).contains(x, RESIDUAL_SIMPLEX_TOL) {
        return Err(Error::invalid("point lies outside the simplex"));
    }
    Ok(simplex_residual_unchecked(x, g))
}

pub(crate) fn simplex_residual_unchecked(x: &[f64], g: &[f64]) -> f64 {
    let support: Vec<f64> = x
        .iter()
        .zip(g)
        .filter(|(xi, _)| **xi > 0.0)
        .map(|(_, gi)| *gi)
        .collect();
    let mut zeros: Vec<f64> = x
        .iter()
        .zip(g)
        .filter(|(xi, _)| **xi <= 0.0)
        .map(|(_, gi)| *gi)
        .collect();
    // Zero coordinate i is active (contributes) when mu < -g_i. Sort the
    // breakpoints -g_i descending so the active set grows as mu decreases.
    zeros.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let objective = |mu: f64| -> f64 {
        support.iter().map(|gi| (gi + mu).powi(2)).sum::<f64>()
            + zeros.iter().map(|gi| (gi + mu).min(0.0).powi(2)).sum::<f64>()
    };
    // On each interval the active set is {support} U {zeros with g_i < -mu};
    // the stationary point is minus the mean of the active gradients.
    let mut best = f64::INFINITY;
    let mut sum: f64 = support.iter().sum();
    let mut count = support.len();
    let mut candidates = Vec::with_capacity(zeros.len() + 1);
    if count > 0 {
        candidates.push(-sum / count as f64);
    }
    for gi in &zeros {
        sum += gi;
        count += 1;
        candidates.push(-sum / count as f64);
        candidates.push(-gi);
    }
    for mu in candidates {
        best = best.min(objective(mu));
    }
    best.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Sort-and-threshold projection used as the reference.
    pub(crate) fn simplex_oracle(z: &[f64]) -> Vec<f64> {
        let mut u = z.to_vec();
        u.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut cum = 0.0;
        let mut tau = 0.0;
        for (j, uj) in u.iter().enumerate() {
            cum += uj;
            let t = (cum - 1.0) / (j + 1) as f64;
            if uj - t > 0.0 {
                tau = t;
            }
        }
        z.iter().map(|v| (v - tau).max(0.0)).collect()
    }

    #[test]
    fn box_examples() {
        let b = BoxSet::default();
        assert_eq!(project_box(&[-1.0, 50.0, 101.0], &b), vec![0.0, 50.0, 100.0]);
        let inside = [0.0, 3.0, 100.0];
        assert_eq!(project_box(&inside, &b), inside.to_vec());
        assert!(BoxSet::new(1.0, 1.0).is_err());
    }

    #[test]
    fn box_matches_grid_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = BoxSet::new(0.0, 1.0).unwrap();
        for _ in 0..20 {
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..2.0)).collect();
            let p = project_box(&z, &b);
            // Separable problem: scan each coordinate on a dense grid.
            for i in 0..3 {
                let mut best = (f64::INFINITY, 0.0);
                for k in 0..=100_000 {
                    let x = k as f64 / 100_000.0;
                    let d = (x - z[i]).powi(2);
                    if d < best.0 {
                        best = (d, x);
                    }
                }
                assert!((best.1 - p[i]).abs() < 1e-5 + 1e-9);
            }
        }
    }

    #[test]
    fn simplex_examples() {
        let on = [0.2, 0.5, 0.3];
        let p = project_simplex(&on).unwrap();
        for i in 0..3 {
            assert!((p[i] - on[i]).abs() < 1e-12);
        }
        let p = project_simplex(&[0.5, 0.5, 0.5]).unwrap();
        for v in p.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(project_simplex(&[7.0]).unwrap().as_slice(), &[1.0]);
        assert!(project_simplex(&[]).is_err());
    }

    #[test]
    fn simplex_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..1000 {
            let l = rng.random_range(2..=21);
            let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
            let z: Vec<f64> = (0..l).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            let got = project_simplex(&z).unwrap();
            let want = simplex_oracle(&z);
            for i in 0..l {
                assert!((got[i] - want[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn simplex_extreme_magnitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let l = rng.random_range(2..=21);
            let z: Vec<f64> = (0..l).map(|_| rng.random_range(-1e8..1e8)).collect();
            let x = project_simplex(&z).unwrap();
            assert!(x.iter().all(|v| *v >= 0.0));
            assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn box_residual_cases() {
        let b = BoxSet::default();
        let g = [0.3, -0.4];
        let r = normal_cone_residual_box(&[5.0, 7.0], &g, &b).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        // At the lower bound, a positive gradient (descent direction pointing
        // out of the box) is absorbed by the cone.
        assert_eq!(normal_cone_residual_box(&[0.0], &[2.0], &b).unwrap(), 0.0);
        assert_eq!(normal_cone_residual_box(&[0.0], &[-2.0], &b).unwrap(), 2.0);
        assert_eq!(normal_cone_residual_box(&[100.0], &[-2.0], &b).unwrap(), 0.0);
        assert!(normal_cone_residual_box(&[-1.0], &[0.0], &b).is_err());
    }

    #[test]
    fn simplex_residual_interior_is_gradient_minus_mean() {
        let x = [0.2, 0.3, 0.5];
        let g = [1.0, 2.0, 6.0];
        // Interior of the simplex: the cone is the span of the ones vector.
        let mean = 3.0f64;
        let want = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
        let got = normal_cone_residual_simplex(&x, &g).unwrap();
        assert!((got - want).abs() < 1e-14);
        assert!(normal_cone_residual_simplex(&[0.5, 0.6], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn simplex_residual_matches_discretized_cone() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..30 {
            // Feasible point on a face or vertex of the 3-simplex.
            let mut x = [0.0; 3];
            match rng.random_range(0..3) {
                0 => x[rng.random_range(0..3)] = 1.0,
                1 => {
                    let i = rng.random_range(0..3);
                    let t = rng.random_range(0.1..0.9);
                    x[i] = t;
                    x[(i + 1) % 3] = 1.0 - t;
                }
                _ => {
                    let a = rng.random_range(0.1..0.5);
                    let b = rng.random_range(0.1..0.4);
                    x = [a, b, 1.0 - a - b];
                }
            }
            let g: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = normal_cone_residual_simplex(&x, &g).unwrap();
            // Brute force over r = mu 1 - nu: dense grid on mu, then a
            // ternary refinement of the convex objective around the best cell.
            let obj = |mu: f64| -> f64 {
                (0..3)
                    .map(|i| {
                        let v = g[i] + mu;
                        if x[i] > 0.0 {
                            v * v
                        } else {
                            v.min(0.0).powi(2)
                        }
                    })
                    .sum()
            };
            let steps = 20_000;
            let h = 8.0 / steps as f64;
            let mut arg = -4.0;
            for im in 0..=steps {
                let mu = -4.0 + h * im as f64;
                if obj(mu) < obj(arg) {
                    arg = mu;
                }
            }
            let (mut lo, mut hi) = (arg - h, arg + h);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if obj(m1) <= obj(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let best = obj(0.5 * (lo + hi)).sqrt();
            assert!((best - got).abs() < 1e-6, "{got} vs {best}");
        }
    }
}
