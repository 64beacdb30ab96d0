use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{DirDiff, DirDiffFunction};
use crate::base::Vector;
use crate::error::{Error, Result};

/// A map `ℝⁿ → ℝᵐ` with Hadamard directional derivatives.
///
/// `vjp(x, d, w)` applies the transpose of the linearization that is active
/// along `d`, so that `⟨vjp(x, d, w), d⟩ = ⟨w, jvp(x, d)⟩`.
pub trait VectorMap: Send + Sync + Debug {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn jvp(&self, x: &Vector, d: &Vector) -> Vector;
    fn vjp(&self, x: &Vector, d: &Vector, w: &Vector) -> Vector;
    /// Upper bound on the Lipschitz constant of the map.
    fn lipschitz(&self) -> f64;
}

/// `x ↦ A x + c`
#[derive(Clone, Debug)]
pub struct AffineMap {
    rows: Vec<Vector>,
    bias: Vector,
    in_dim: usize,
    op_norm: f64,
}

impl AffineMap {
    pub fn new(rows: Vec<Vector>, bias: Vector) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::contract("affine map needs at least one row"));
        };
        let in_dim = first.dim();
        if rows.iter().any(|r| r.dim() != in_dim) {
            return Err(Error::contract("affine map rows must share one length"));
        }
        if bias.dim() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: bias.dim(),
            });
        }
        let m = DMatrix::from_fn(rows.len(), in_dim, |i, j| rows[i][j]);
        let op_norm = m.singular_values().max();
        Ok(Self {
            rows,
            bias,
            in_dim,
            op_norm,
        })
    }

    fn linear(&self, d: &Vector) -> Vector {
        Vector::from_vec_unchecked(self.rows.iter().map(|r| r.dot(d)).collect())
    }
}

impl VectorMap for AffineMap {
    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, x: &Vector) -> Vector {
        &self.linear(x) + &self.bias
    }

    fn jvp(&self, _x: &Vector, d: &Vector) -> Vector {
        self.linear(d)
    }

    fn vjp(&self, _x: &Vector, _d: &Vector, w: &Vector) -> Vector {
        let mut out = Vector::zeros(self.in_dim);
        for (r, wi) in self.rows.iter().zip(w.iter()) {
            out.axpy(*wi, r);
        }
        out
    }

    fn lipschitz(&self) -> f64 {
        self.op_norm
    }
}

/// Elementwise `max(z, 0)`.
#[derive(Clone, Copy, Debug)]
pub struct ReluMap {
    pub dim: usize,
}

/// Whether a ReLU unit passes its perturbation along direction `dz`.
pub(crate) fn relu_gate(z: f64, dz: f64) -> bool {
    z > 0.0 || (z == 0.0 && dz > 0.0)
}

impl VectorMap for ReluMap {
    fn in_dim(&self) -> usize {
        self.dim
    }

    fn out_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Vector) -> Vector {
        Vector::from_vec_unchecked(x.iter().map(|z| z.max(0.0)).collect())
    }

    fn jvp(&self, x: &Vector, d: &Vector) -> Vector {
        Vector::from_vec_unchecked(
            x.iter()
                .zip(d.iter())
                .map(|(&z, &dz)| if relu_gate(z, dz) { dz } else { 0.0 })
                .collect(),
        )
    }

    fn vjp(&self, x: &Vector, d: &Vector, w: &Vector) -> Vector {
        Vector::from_vec_unchecked(
            x.iter()
                .zip(d.iter())
                .zip(w.iter())
                .map(|((&z, &dz), &wi)| if relu_gate(z, dz) { wi } else { 0.0 })
                .collect(),
        )
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// Elementwise `|z|`.
#[derive(Clone, Copy, Debug)]
pub struct AbsMap {
    pub dim: usize,
}

fn abs_sign(z: f64, dz: f64) -> f64 {
    if z > 0.0 || (z == 0.0 && dz >= 0.0) {
        1.0
    } else {
        -1.0
    }
}

impl VectorMap for AbsMap {
    fn in_dim(&self) -> usize {
        self.dim
    }

    fn out_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Vector) -> Vector {
        Vector::from_vec_unchecked(x.iter().map(|z| z.abs()).collect())
    }

    fn jvp(&self, x: &Vector, d: &Vector) -> Vector {
        Vector::from_vec_unchecked(
            x.iter()
                .zip(d.iter())
                .map(|(&z, &dz)| abs_sign(z, dz) * dz)
                .collect(),
        )
    }

    fn vjp(&self, x: &Vector, d: &Vector, w: &Vector) -> Vector {
        Vector::from_vec_unchecked(
            x.iter()
                .zip(d.iter())
                .zip(w.iter())
                .map(|((&z, &dz), &wi)| abs_sign(z, dz) * wi)
                .collect(),
        )
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// A scalar function viewed as a map into `ℝ¹`.
#[derive(Clone, Debug)]
pub struct ScalarMap(pub DirDiffFunction);

impl VectorMap for ScalarMap {
    fn in_dim(&self) -> usize {
        self.0.dim()
    }

    fn out_dim(&self) -> usize {
        1
    }

    fn apply(&self, x: &Vector) -> Vector {
        Vector::scalar(self.0.eval(x))
    }

    fn jvp(&self, x: &Vector, d: &Vector) -> Vector {
        Vector::scalar(self.0.dir_deriv(x, d))
    }

    fn vjp(&self, x: &Vector, d: &Vector, w: &Vector) -> Vector {
        self.0.grad_select(x, d).scaled(w[0])
    }

    fn lipschitz(&self) -> f64 {
        self.0.lipschitz()
    }
}

/// `outer ∘ maps[k-1] ∘ … ∘ maps[0]`, differentiated by the chain rule.
#[derive(Clone, Debug)]
pub struct Composition {
    outer: DirDiffFunction,
    maps: Vec<Arc<dyn VectorMap>>,
    lipschitz: f64,
}

impl Composition {
    pub fn new(outer: DirDiffFunction, maps: Vec<Arc<dyn VectorMap>>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::contract("composition needs at least one inner map"));
        }
        for w in maps.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    expected: w[1].in_dim(),
                    got: w[0].out_dim(),
                });
            }
        }
        let last = maps[maps.len() - 1].out_dim();
        if last != outer.dim() {
            return Err(Error::DimensionMismatch {
                expected: outer.dim(),
                got: last,
            });
        }
        let lipschitz = maps.iter().map(|m| m.lipschitz()).product::<f64>() * outer.lipschitz();
        Ok(Self {
            outer,
            maps,
            lipschitz,
        })
    }

    /// Points and directions entering each map, plus the final pair.
    fn forward(&self, x: &Vector, d: &Vector) -> (Vec<(Vector, Vector)>, Vector, Vector) {
        let mut trace = Vec::with_capacity(self.maps.len());
        let (mut z, mut dz) = (x.clone(), d.clone());
        for m in &self.maps {
            let (nz, ndz) = (m.apply(&z), m.jvp(&z, &dz));
            trace.push((z, dz));
            z = nz;
            dz = ndz;
        }
        (trace, z, dz)
    }
}

impl DirDiff for Composition {
    fn dim(&self) -> usize {
        self.maps[0].in_dim()
    }

    fn eval(&self, x: &Vector) -> f64 {
        let z = self.maps.iter().fold(x.clone(), |z, m| m.apply(&z));
        self.outer.eval(&z)
    }

    fn dir_deriv(&self, x: &Vector, d: &Vector) -> f64 {
        let (_, z, dz) = self.forward(x, d);
        self.outer.dir_deriv(&z, &dz)
    }

    fn grad_select(&self, x: &Vector, d: &Vector) -> Vector {
        let (trace, z, dz) = self.forward(x, d);
        // The outer selection must be consistent with the pushed-forward
        // direction, not with a probe, so bypass zero-direction handling.
        let mut w = self.outer.inner().grad_select(&z, &dz);
        for (m, (zi, di)) in self.maps.iter().zip(&trace).rev() {
            w = m.vjp(zi, di, &w);
        }
        w
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{make_abs, make_relu};

    fn s(x: f64) -> Vector {
        Vector::scalar(x)
    }

    fn affine(a: f64, c: f64) -> Arc<dyn VectorMap> {
        Arc::new(AffineMap::new(vec![s(a)], s(c)).unwrap())
    }

    #[test]
    fn relu_after_negation() {
        let f = Composition::new(make_relu(), vec![affine(-1.0, 0.0)]).unwrap();
        assert_eq!(f.dir_deriv(&s(0.0), &s(1.0)), 0.0);
        assert_eq!(f.dir_deriv(&s(0.0), &s(-1.0)), 1.0);
        assert_eq!(f.grad_select(&s(0.0), &s(-1.0)), s(-1.0));
    }

    #[test]
    fn abs_of_abs() {
        let f = Composition::new(make_abs(), vec![Arc::new(AbsMap { dim: 1 })]).unwrap();
        assert_eq!(f.dir_deriv(&s(0.0), &s(-1.0)), 1.0);
        assert_eq!(f.eval(&s(-3.0)), 3.0);
        let g = f.grad_select(&s(0.0), &s(-1.0));
        assert_eq!(g.dot(&s(-1.0)), 1.0);
    }

    #[test]
    fn relu_after_doubling_matches_difference_quotient() {
        let f = Composition::new(make_relu(), vec![affine(2.0, 0.0)]).unwrap();
        let t = 1e-8;
        let fd = (f.eval(&s(t)) - f.eval(&s(0.0))) / t;
        assert_eq!(f.dir_deriv(&s(0.0), &s(1.0)), 2.0);
        assert!((fd - 2.0).abs() < 1e-7);
        assert_eq!(f.lipschitz(), 2.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let two = Arc::new(ReluMap { dim: 2 });
        assert!(Composition::new(make_abs(), vec![two]).is_err());
        assert!(Composition::new(make_abs(), vec![]).is_err());
    }
}
