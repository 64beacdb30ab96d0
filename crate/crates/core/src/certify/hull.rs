use nalgebra::{DMatrix, DVector};

use crate::base::Vector;
use crate::error::{Error, Result};

/// Default absolute accuracy of [`min_norm_in_hull`].
pub const DEFAULT_TOL: f64 = 1e-8;

/// Minimum-norm point of a convex hull.
#[derive(Clone, Debug, PartialEq)]
pub struct MinNorm {
    pub witness: Vector,
    /// Simplex weights, one per input point, reproducing `witness`.
    pub weights: Vec<f64>,
    pub norm: f64,
}

/// Minimum-norm point of `conv{g_i}` by Wolfe's method.
///
/// The returned norm is within `tol` of the true distance from the origin
/// to the hull.
pub fn min_norm_in_hull(points: &[Vector], tol: f64) -> Result<MinNorm> {
    let Some(first) = points.first() else {
        return Err(Error::contract("min_norm_in_hull needs at least one point"));
    };
    let n = first.dim();
    if let Some(p) = points.iter().find(|p| p.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.dim(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::contract("tolerance must be positive"));
    }

    // Exact duplicates are common (piecewise-linear gradients); solve on the
    // distinct set and credit the first occurrence.
    let mut uniq: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !uniq.iter().any(|&j| points[j] == *p) {
            uniq.push(i);
        }
    }
    let pts: Vec<&Vector> = uniq.iter().map(|&i| &points[i]).collect();
    let (set, lambda) = wolfe(&pts, tol);

    let mut weights = vec![0.0; points.len()];
    let mut witness = Vector::zeros(n);
    for (&s, &l) in set.iter().zip(&lambda) {
        weights[uniq[s]] = l;
        witness.axpy(l, pts[s]);
    }
    let norm = witness.norm();
    Ok(MinNorm {
        witness,
        weights,
        norm,
    })
}

const MAX_MAJOR: usize = 10_000;

/// Returns the final corral and its convex weights.
fn wolfe(p: &[&Vector], tol: f64) -> (Vec<usize>, Vec<f64>) {
    let start = (0..p.len())
        .min_by(|&a, &b| p[a].norm_sq().total_cmp(&p[b].norm_sq()))
        .unwrap();
    let mut set = vec![start];
    let mut lambda = vec![1.0];
    let mut x = p[start].clone();

    for _ in 0..MAX_MAJOR {
        let xn = x.norm();
        if xn <= tol {
            break;
        }
        let (j, lo) = (0..p.len())
            .map(|i| (i, x.dot(p[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        // ‖x‖ − dist ≤ (‖x‖² − min_i ⟨x, p_i⟩) / ‖x‖
        if x.norm_sq() - lo <= 0.5 * tol * xn || set.contains(&j) {
            break;
        }
        set.push(j);
        lambda.push(0.0);

        loop {
            let mu = affine_minimizer(p, &set);
            if mu.iter().all(|&m| m > 1e-14) {
                lambda = mu;
                break;
            }
            // Step from λ toward μ until a weight hits zero, then drop it.
            let mut theta = 1.0_f64;
            for (l, m) in lambda.iter().zip(&mu) {
                if *m <= 1e-14 && l - m > 0.0 {
                    theta = theta.min(l / (l - m));
                }
            }
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let mut k = 0;
            while k < set.len() {
                if lambda[k] <= 1e-14 {
                    set.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            if set.len() == 1 {
                lambda[0] = 1.0;
                break;
            }
        }
        let next = combine(p, &set, &lambda);
        // Exact arithmetic decreases ‖x‖ strictly; stalling means roundoff.
        let stalled = next.norm_sq() >= x.norm_sq();
        x = next;
        if stalled {
            break;
        }
    }
    (set, lambda)
}

fn combine(p: &[&Vector], set: &[usize], lambda: &[f64]) -> Vector {
    let mut x = Vector::zeros(p[0].dim());
    for (&s, &l) in set.iter().zip(lambda) {
        x.axpy(l, p[s]);
    }
    x
}

/// Weights `μ` (summing to one) of the minimum-norm point of the affine hull
/// of `p[set]`, from the KKT system `[G 1; 1ᵀ 0] [μ; ν] = [0; 1]`.
fn affine_minimizer(p: &[&Vector], set: &[usize]) -> Vec<f64> {
    let k = set.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in 0..k {
            m[(a, b)] = p[set[a]].dot(p[set[b]]);
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = m
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| {
            m.svd(true, true)
                .solve(&rhs, 1e-12)
                .expect("SVD with both factors")
        });
    let mu: Vec<f64> = sol.iter().take(k).copied().collect();
    let total: f64 = mu.iter().sum();
    mu.into_iter().map(|v| v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_slice(xs)
    }

    #[test]
    fn symmetric_pair_contains_origin() {
        let r = min_norm_in_hull(&[v(&[1.0]), v(&[-1.0])], DEFAULT_TOL).unwrap();
        assert!(r.norm <= 1e-12);
        assert!((r.weights[0] - 0.5).abs() < 1e-12 && (r.weights[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn same_sign_pair_picks_nearest() {
        let r = min_norm_in_hull(&[v(&[1.0]), v(&[0.5])], DEFAULT_TOL).unwrap();
        assert_eq!(r.norm, 0.5);
        assert_eq!(r.witness, v(&[0.5]));
        assert_eq!(r.weights, vec![0.0, 1.0]);
    }

    #[test]
    fn orthogonal_basis_vectors() {
        let r = min_norm_in_hull(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])], DEFAULT_TOL).unwrap();
        assert!((r.norm - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((r.witness[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn duplicates_and_errors() {
        let pts = vec![v(&[2.0, 1.0]); 50];
        let r = min_norm_in_hull(&pts, DEFAULT_TOL).unwrap();
        assert_eq!(r.weights.iter().sum::<f64>(), 1.0);
        assert!(min_norm_in_hull(&[], DEFAULT_TOL).is_err());
        assert!(min_norm_in_hull(&[v(&[1.0]), v(&[1.0, 0.0])], DEFAULT_TOL).is_err());
    }

    #[test]
    fn triangle_face() {
        // the closest point lies inside the face of the simplex
        let pts = [v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])];
        let r = min_norm_in_hull(&pts, DEFAULT_TOL).unwrap();
        assert!((r.norm - 1.0 / 3f64.sqrt()).abs() < 1e-10);
    }
}
