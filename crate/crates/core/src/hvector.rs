use std::ops::{Add, Index, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// An element of the Euclidean space ℝ^d.
///
/// Vectors built through [`HVector::new`] are checked to be non-empty and
/// finite. Arithmetic on already-valid vectors is unchecked; iteration
/// drivers test finiteness themselves so that divergence is reported as a
/// status instead of an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HVector(Vec<f64>);

impl HVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return usage("vectors must have dimension at least 1");
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Usage(format!("non-finite entry at index {i}")));
        }
        Ok(Self(data))
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::new(data.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    /// Wraps computed data without validation.
    pub(crate) fn raw(data: Vec<f64>) -> Self {
        Self(data)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|x| s * x).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    /// In-place `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&x| f(x)).collect())
    }

    /// Concatenates two vectors, as used for points of a product space H₁×H₂.
    pub fn concat(a: &Self, b: &Self) -> Self {
        let mut data = Vec::with_capacity(a.dim() + b.dim());
        data.extend_from_slice(&a.0);
        data.extend_from_slice(&b.0);
        Self(data)
    }

    /// Splits at `at` into the leading and trailing parts.
    pub fn split(&self, at: usize) -> (Self, Self) {
        let (a, b) = self.0.split_at(at);
        (Self(a.to_vec()), Self(b.to_vec()))
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        crate::error::check_dim(expected, self.dim())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Index<usize> for HVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &HVector {
    type Output = HVector;
    fn add(self, rhs: &HVector) -> HVector {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &HVector {
    type Output = HVector;
    fn sub(self, rhs: &HVector) -> HVector {
        self.add_scaled(-1.0, rhs)
    }
}

impl Mul<&HVector> for f64 {
    type Output = HVector;
    fn mul(self, rhs: &HVector) -> HVector {
        rhs.scaled(self)
    }
}

impl AsRef<[f64]> for HVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(HVector::new(vec![]).is_err());
        assert!(HVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(HVector::new(vec![f64::INFINITY]).is_err());
        assert!(HVector::new(vec![0.0, -2.5]).is_ok());
    }

    #[test]
    fn inner_product_and_norm() {
        let x = HVector::new(vec![3.0, 4.0]).unwrap();
        let y = HVector::new(vec![-1.0, 2.0]).unwrap();
        assert_eq!(x.dot(&y), y.dot(&x));
        assert_eq!(x.norm(), 5.0);
        assert_eq!((&x - &y).as_slice(), &[4.0, 2.0]);
        assert_eq!(x.dist(&y), (&x - &y).norm());
    }

    #[test]
    fn concat_split_inverse() {
        let a = HVector::new(vec![1.0, 2.0]).unwrap();
        let b = HVector::new(vec![3.0]).unwrap();
        let c = HVector::concat(&a, &b);
        assert_eq!(c.split(2), (a, b));
    }
}
