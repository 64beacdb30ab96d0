use super::DirDiff;
use crate::base::Vector;
use crate::error::{Error, Result};

/// Pieces within this absolute gap of the maximum count as active.
pub const ACTIVE_TOL: f64 = 1e-12;

/// `x ↦ max_i (⟨a_i, x⟩ + b_i)`
#[derive(Clone, Debug)]
pub struct MaxAffine {
    slopes: Vec<Vector>,
    offsets: Vec<f64>,
    lipschitz: f64,
}

impl MaxAffine {
    pub fn new(slopes: Vec<Vector>, offsets: Vec<f64>) -> Result<Self> {
        let Some(first) = slopes.first() else {
            return Err(Error::contract("max_affine needs at least one piece"));
        };
        let n = first.dim();
        if slopes.iter().any(|a| a.dim() != n) {
            return Err(Error::contract("max_affine slopes must share one dimension"));
        }
        if offsets.len() != slopes.len() {
            return Err(Error::contract(format!(
                "{} slopes but {} offsets",
                slopes.len(),
                offsets.len()
            )));
        }
        if offsets.iter().any(|b| !b.is_finite()) {
            return Err(Error::contract("max_affine offsets must be finite"));
        }
        let lipschitz = slopes.iter().map(Vector::norm).fold(0.0, f64::max);
        Ok(Self {
            slopes,
            offsets,
            lipschitz,
        })
    }

    pub fn slopes(&self) -> &[Vector] {
        &self.slopes
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    fn values<'a>(&'a self, x: &'a Vector) -> impl Iterator<Item = f64> + 'a {
        self.slopes
            .iter()
            .zip(&self.offsets)
            .map(move |(a, b)| a.dot(x) + b)
    }

    /// Lowest-index active piece maximizing `⟨a_i, d⟩`, with that maximum.
    fn select(&self, x: &Vector, d: &Vector) -> (usize, f64) {
        let vals: Vec<f64> = self.values(x).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, v) in vals.iter().enumerate() {
            if top - v <= ACTIVE_TOL {
                let s = self.slopes[i].dot(d);
                if s > best.1 {
                    best = (i, s);
                }
            }
        }
        best
    }
}

impl DirDiff for MaxAffine {
    fn dim(&self) -> usize {
        self.slopes[0].dim()
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.values(x).fold(f64::NEG_INFINITY, f64::max)
    }

    fn dir_deriv(&self, x: &Vector, d: &Vector) -> f64 {
        self.select(x, d).1
    }

    fn grad_select(&self, x: &Vector, d: &Vector) -> Vector {
        self.slopes[self.select(x, d).0].clone()
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_slice(xs)
    }

    #[test]
    fn two_pieces_make_abs() {
        let f = MaxAffine::new(vec![v(&[1.0]), v(&[-1.0])], vec![0.0, 0.0]).unwrap();
        assert_eq!(f.eval(&v(&[-2.0])), 2.0);
        assert_eq!(f.dir_deriv(&v(&[0.0]), &v(&[1.0])), 1.0);
        assert_eq!(f.grad_select(&v(&[0.0]), &v(&[1.0])), v(&[1.0]));
        assert_eq!(f.grad_select(&v(&[0.0]), &v(&[-1.0])), v(&[-1.0]));
    }

    #[test]
    fn active_set_max_in_two_dims() {
        let f = MaxAffine::new(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])], vec![0.0, 0.0]).unwrap();
        let (x, d) = (v(&[0.0, 0.0]), v(&[1.0, 2.0]));
        assert_eq!(f.dir_deriv(&x, &d), 2.0);
        assert_eq!(f.grad_select(&x, &d), v(&[0.0, 1.0]));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let f = MaxAffine::new(vec![v(&[1.0, 0.0]), v(&[1.0, 1.0])], vec![0.0, 0.0]).unwrap();
        assert_eq!(f.grad_select(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])), v(&[1.0, 0.0]));
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(MaxAffine::new(vec![], vec![]).is_err());
        assert!(MaxAffine::new(vec![v(&[1.0]), v(&[1.0, 2.0])], vec![0.0, 0.0]).is_err());
        assert!(MaxAffine::new(vec![v(&[1.0])], vec![0.0, 0.0]).is_err());
    }
}
