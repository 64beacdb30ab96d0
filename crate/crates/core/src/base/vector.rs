use std::ops::{Add, Index, IndexMut, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real coordinate vector with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Wraps `coords`, rejecting empty input and non-finite entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::contract("vector must have dimension at least 1"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::contract(format!(
                "vector entry {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(Self(coords))
    }

    /// Copies `xs`. Panics on non-finite or empty input; meant for literals.
    pub fn from_slice(xs: &[f64]) -> Self {
        Self::new(xs.to_vec()).expect("finite, nonempty coordinates")
    }

    pub fn scalar(x: f64) -> Self {
        Self::from_slice(&[x])
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector must have dimension at least 1");
        Self(vec![0.0; dim])
    }

    /// The `i`-th standard basis vector.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = 1.0;
        v
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Self(self.0.iter().map(|a| c * a).collect())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Vector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (s, o) in self.0.iter_mut().zip(&other.0) {
            *s += a * o;
        }
    }

    /// `self + u (other - self)`
    pub fn lerp(&self, other: &Vector, u: f64) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + u * (b - a))
                .collect(),
        )
    }

    /// Unit vector along `self`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;

    fn add(self, rhs: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Vector {
    type Output = Vector;

    fn sub(self, rhs: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Vector {
    type Output = Vector;

    fn neg(self) -> Vector {
        self.scaled(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert!(serde_json::from_str::<Vector>("[]").is_err());
    }

    #[test]
    fn serializes_as_plain_array() {
        let v = Vector::from_slice(&[1.5, -2.0]);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, "[1.5,-2.0]");
        assert_eq!(serde_json::from_str::<Vector>(&s).unwrap(), v);
    }

    #[test]
    fn arithmetic() {
        let a = Vector::from_slice(&[1.0, 2.0]);
        let b = Vector::from_slice(&[3.0, -1.0]);
        assert_eq!(&a + &b, Vector::from_slice(&[4.0, 1.0]));
        assert_eq!(&a - &b, Vector::from_slice(&[-2.0, 3.0]));
        assert_eq!(a.dot(&b), 1.0);
        let mut c = a.clone();
        c.axpy(2.0, &b);
        assert_eq!(c, Vector::from_slice(&[7.0, 0.0]));
        assert!(Vector::zeros(3).normalized().is_none());
    }
}
