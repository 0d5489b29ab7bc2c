//! Weighted finite-dimensional Hilbert-space vectors.
//!
//! Every vector carries the quadrature weights of its discrete inner
//! product, so `inner` and `norm` are the discretizations of the continuous
//! L² pairings. Adjoints of discretized PDE operators are only correct with
//! respect to these weighted products.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Strictly positive quadrature weights defining a discrete inner product.
pub type Weights = Arc<[f64]>;

/// Builds a weight vector after validating positivity.
pub fn weights_from(values: Vec<f64>) -> Result<Weights> {
    if values.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
            context: "weights must have length >= 1",
        });
    }
    for (i, &w) in values.iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight(i));
        }
    }
    Ok(values.into())
}

/// Unit weights of length `n` (the plain Euclidean product).
pub fn unit_weights(n: usize) -> Weights {
    vec![1.0; n].into()
}

/// Element of a weighted discrete Hilbert space.
#[derive(Debug, Clone)]
pub struct Vector {
    entries: Vec<f64>,
    weights: Weights,
}

impl Vector {
    /// Creates a vector; entries and weights must have equal length >= 1.
    pub fn new(entries: Vec<f64>, weights: Weights) -> Result<Self> {
        if entries.is_empty() || entries.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len().max(1),
                got: entries.len(),
                context: "vector entries vs weights",
            });
        }
        Ok(Self { entries, weights })
    }

    /// Vector of zeros in the space defined by `weights`.
    pub fn zeros(weights: Weights) -> Self {
        Self {
            entries: vec![0.0; weights.len()],
            weights,
        }
    }

    /// Convenience constructor with unit weights.
    pub fn euclidean(entries: Vec<f64>) -> Result<Self> {
        let w = unit_weights(entries.len());
        Self::new(entries, w)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Checks that `other` lives in the same weighted space.
    pub fn same_space(&self, other: &Vector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
                context: "inner product operands",
            });
        }
        if !Arc::ptr_eq(&self.weights, &other.weights)
            && self.weights.iter().zip(other.weights.iter()).any(|(a, b)| a != b)
        {
            return Err(Error::WeightMismatch("inner product operands"));
        }
        Ok(())
    }

    /// Weighted inner product Σ_i w_i u_i v_i.
    pub fn inner(&self, other: &Vector) -> Result<f64> {
        self.same_space(other)?;
        Ok(self
            .entries
            .iter()
            .zip(other.entries.iter())
            .zip(self.weights.iter())
            .map(|((u, v), w)| w * u * v)
            .sum())
    }

    /// Weighted norm sqrt(inner(self, self)).
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .zip(self.weights.iter())
            .map(|(u, w)| w * u * u)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector {
            entries: self.entries.iter().map(|x| s * x).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        self.same_space(other)?;
        Ok(Vector {
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| a + b)
                .collect(),
            weights: self.weights.clone(),
        })
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.same_space(other)?;
        Ok(Vector {
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| a - b)
                .collect(),
            weights: self.weights.clone(),
        })
    }

    /// self + s * other.
    pub fn axpy(&self, s: f64, other: &Vector) -> Result<Vector> {
        self.same_space(other)?;
        Ok(Vector {
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| a + s * b)
                .collect(),
            weights: self.weights.clone(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }
}

/// Free-function form of the weighted inner product.
pub fn inner(u: &Vector, v: &Vector) -> Result<f64> {
    u.inner(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_orthogonal_coordinates() {
        let w = unit_weights(2);
        let u = Vector::new(vec![1.0, 0.0], w.clone()).unwrap();
        let v = Vector::new(vec![0.0, 1.0], w).unwrap();
        assert_eq!(inner(&u, &v).unwrap(), 0.0);
    }

    #[test]
    fn inner_weighted_sum() {
        let w = weights_from(vec![0.5, 0.5]).unwrap();
        let u = Vector::new(vec![1.0, 1.0], w).unwrap();
        assert_eq!(inner(&u, &u).unwrap(), 1.0);
    }

    #[test]
    fn inner_direct_formula() {
        let w = weights_from(vec![1.0, 2.0]).unwrap();
        let u = Vector::new(vec![2.0, 3.0], w.clone()).unwrap();
        let v = Vector::new(vec![1.0, 1.0], w).unwrap();
        assert_eq!(inner(&u, &v).unwrap(), 8.0);
    }

    #[test]
    fn inner_rejects_length_mismatch() {
        let u = Vector::euclidean(vec![1.0, 2.0]).unwrap();
        let v = Vector::euclidean(vec![1.0]).unwrap();
        assert!(matches!(
            inner(&u, &v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inner_rejects_weight_mismatch() {
        let u = Vector::new(vec![1.0, 2.0], weights_from(vec![1.0, 1.0]).unwrap()).unwrap();
        let v = Vector::new(vec![1.0, 2.0], weights_from(vec![1.0, 2.0]).unwrap()).unwrap();
        assert!(matches!(inner(&u, &v), Err(Error::WeightMismatch(_))));
    }

    #[test]
    fn empty_vector_rejected() {
        assert!(Vector::euclidean(vec![]).is_err());
        assert!(weights_from(vec![]).is_err());
    }

    #[test]
    fn nonpositive_weight_rejected() {
        assert!(matches!(
            weights_from(vec![1.0, 0.0]),
            Err(Error::NonPositiveWeight(1))
        ));
        assert!(weights_from(vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn norm_positive_definite() {
        let w = weights_from(vec![0.25, 0.5, 0.125]).unwrap();
        let z = Vector::zeros(w.clone());
        assert_eq!(z.norm(), 0.0);
        let u = Vector::new(vec![0.0, 1e-8, 0.0], w).unwrap();
        assert!(u.norm() > 0.0);
    }
}
