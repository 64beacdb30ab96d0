use nalgebra::{DMatrix, DVector};

use super::{DirDiff, DirDiffFunction, FunctionDescriptor};
use crate::base::Vector;
use crate::error::{Error, Result};

/// `x ↦ ½⟨x, Qx⟩ − ⟨b, x⟩` with `Q` symmetric positive definite.
///
/// As a [`DirDiff`] its Lipschitz constant is the bound
/// `λ_max·R + ‖b‖` valid on the ball of radius `R` around the origin.
#[derive(Clone, Debug)]
pub struct Quadratic {
    q: DMatrix<f64>,
    b: DVector<f64>,
    radius: f64,
    mu: f64,
    l_grad: f64,
}

impl Quadratic {
    pub fn new(q: &[Vector], b: &Vector, radius: f64) -> Result<Self> {
        let n = q.len();
        if n == 0 || q.iter().any(|r| r.dim() != n) {
            return Err(Error::contract("Q must be a nonempty square matrix"));
        }
        if b.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.dim(),
            });
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::contract("quadratic radius must be positive"));
        }
        let q = DMatrix::from_fn(n, n, |i, j| q[i][j]);
        let asym = (&q - q.transpose()).amax();
        if asym > 1e-12 * (1.0 + q.amax()) {
            return Err(Error::contract("Q must be symmetric"));
        }
        if q.clone().cholesky().is_none() {
            return Err(Error::contract("Q must be positive definite"));
        }
        let eig = q.clone().symmetric_eigenvalues();
        let (mu, l_grad) = (eig.min(), eig.max());
        if mu <= 0.0 {
            return Err(Error::contract("Q must be positive definite"));
        }
        Ok(Self {
            q,
            b: DVector::from_column_slice(b.as_slice()),
            radius,
            mu,
            l_grad,
        })
    }

    fn grad(&self, x: &Vector) -> DVector<f64> {
        &self.q * DVector::from_column_slice(x.as_slice()) - &self.b
    }
}

impl DirDiff for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval(&self, x: &Vector) -> f64 {
        let xv = DVector::from_column_slice(x.as_slice());
        0.5 * xv.dot(&(&self.q * &xv)) - self.b.dot(&xv)
    }

    fn dir_deriv(&self, x: &Vector, d: &Vector) -> f64 {
        self.grad(x).as_slice().iter().zip(d.iter()).map(|(g, d)| g * d).sum()
    }

    fn grad_select(&self, x: &Vector, _d: &Vector) -> Vector {
        Vector::from_vec_unchecked(self.grad(x).as_slice().to_vec())
    }

    fn lipschitz(&self) -> f64 {
        self.l_grad * self.radius + self.b.norm()
    }
}

/// A differentiable objective with an `L`-Lipschitz gradient.
#[derive(Clone, Debug)]
pub struct SmoothFunction {
    function: DirDiffFunction,
    quad: Quadratic,
}

impl SmoothFunction {
    pub(crate) fn from_quadratic(quad: Quadratic, descriptor: FunctionDescriptor) -> Result<Self> {
        let function = DirDiffFunction::from_parts(std::sync::Arc::new(quad.clone()), descriptor)?;
        Ok(Self { function, quad })
    }

    /// The objective as a generic directionally differentiable function.
    pub fn as_dir_diff(&self) -> &DirDiffFunction {
        &self.function
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.function.eval(x)
    }

    pub fn true_gradient(&self, x: &Vector) -> Vector {
        assert_eq!(x.dim(), self.dim(), "dimension mismatch");
        self.quad.grad_select(x, x)
    }

    /// Lipschitz constant of the gradient (largest eigenvalue of `Q`).
    pub fn grad_lipschitz(&self) -> f64 {
        self.quad.l_grad
    }

    /// Strong convexity modulus (smallest eigenvalue of `Q`).
    pub fn strong_convexity(&self) -> f64 {
        self.quad.mu
    }

    /// The unique minimizer, solving `Qx = b`.
    pub fn minimizer(&self) -> Vector {
        let chol = self.quad.q.clone().cholesky().expect("checked at construction");
        Vector::from_vec_unchecked(chol.solve(&self.quad.b).as_slice().to_vec())
    }

    pub fn min_value(&self) -> f64 {
        self.eval(&self.minimizer())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::make_quadratic;

    #[test]
    fn identity_gradient() {
        let f = make_quadratic(&[Vector::scalar(1.0)], &Vector::scalar(0.0)).unwrap();
        assert_eq!(f.true_gradient(&Vector::scalar(3.0)), Vector::scalar(3.0));
    }

    #[test]
    fn minimizer_and_minimum() {
        let f = make_quadratic(&[Vector::scalar(2.0)], &Vector::scalar(4.0)).unwrap();
        assert!((f.minimizer()[0] - 2.0).abs() < 1e-12);
        assert!((f.min_value() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_eigenvalues() {
        let q = [Vector::from_slice(&[0.25, 0.0]), Vector::from_slice(&[0.0, 1.0])];
        let f = make_quadratic(&q, &Vector::zeros(2)).unwrap();
        assert!((f.strong_convexity() - 0.25).abs() < 1e-12);
        assert!((f.grad_lipschitz() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_spd() {
        let q = [Vector::from_slice(&[1.0, 2.0]), Vector::from_slice(&[2.0, 1.0])];
        assert!(make_quadratic(&q, &Vector::zeros(2)).is_err());
        let q = [Vector::from_slice(&[1.0, 0.5]), Vector::from_slice(&[0.0, 1.0])];
        assert!(make_quadratic(&q, &Vector::zeros(2)).is_err());
    }
}
