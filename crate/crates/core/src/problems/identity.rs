//! Trivial inner map `g_ω(x) = x`, under which a compositional solver sees
//! the outer problem directly.

use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{dot, Matrix};
use crate::problem::{CompositionalProblem, IdentityJacobian, InnerBatch, Jacobian};
use crate::rng::OracleRng;
use crate::scalar::Scalar;

/// Stochastic gradient oracle for a function on `R^q`.
pub trait OuterOracle<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn sample_gradient(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>>;
    fn value(&self, _y: &[T]) -> Option<T> {
        None
    }
    fn gradient(&self, _y: &[T]) -> Option<Vec<T>> {
        None
    }
}

/// `f_η(y) = ½ (y − c)ᵀ Q (y − c) + ηᵀy` with `E‖η‖² = σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyQuadratic<T> {
    pub hessian: Matrix<T>,
    pub center: Vec<T>,
    pub sigma: T,
}

impl<T: Scalar> NoisyQuadratic<T> {
    pub fn diagonal(scales: &[T], center: Vec<T>, sigma: T) -> Self {
        let n = scales.len();
        let hessian = Matrix::from_fn(n, n, |i, j| if i == j { scales[i] } else { T::zero() });
        Self {
            hessian,
            center,
            sigma,
        }
    }

    fn exact_gradient(&self, y: &[T]) -> Vec<T> {
        let d: Vec<T> = y.iter().zip(&self.center).map(|(&a, &c)| a - c).collect();
        self.hessian.matvec(&d)
    }
}

impl<T: Scalar> OuterOracle<T> for NoisyQuadratic<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn sample_gradient(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>> {
        let base = self.exact_gradient(y);
        let per_entry = self.sigma / T::from_count(base.len()).sqrt();
        (0..k)
            .map(|_| {
                let mut g = base.clone();
                if self.sigma > T::zero() {
                    for gi in &mut g {
                        let z: f64 = StandardNormal.sample(rng);
                        *gi = *gi + per_entry * T::lit(z);
                    }
                }
                g
            })
            .collect()
    }

    fn value(&self, y: &[T]) -> Option<T> {
        let d: Vec<T> = y.iter().zip(&self.center).map(|(&a, &c)| a - c).collect();
        Some(T::lit(0.5) * dot(&d, &self.hessian.matvec(&d)))
    }

    fn gradient(&self, y: &[T]) -> Option<Vec<T>> {
        Some(self.exact_gradient(y))
    }
}

/// `q = p`, `g_ω(x) = x`, `∇g_ω = I`.
pub struct IdentityProblem<T: Scalar> {
    outer: Box<dyn OuterOracle<T>>,
}

impl<T: Scalar> IdentityProblem<T> {
    pub fn new(outer: Box<dyn OuterOracle<T>>) -> Self {
        Self { outer }
    }

    pub fn outer(&self) -> &dyn OuterOracle<T> {
        self.outer.as_ref()
    }
}

impl<T: Scalar> CompositionalProblem<T> for IdentityProblem<T> {
    fn decision_dim(&self) -> usize {
        self.outer.dim()
    }

    fn image_dim(&self) -> usize {
        self.outer.dim()
    }

    fn sample_inner(&self, z: &[T], k: usize, _rng: &mut OracleRng) -> InnerBatch<T> {
        let p = self.outer.dim();
        InnerBatch {
            values: vec![z.to_vec(); k],
            jacobians: (0..k)
                .map(|_| Box::new(IdentityJacobian(p)) as Jacobian<T>)
                .collect(),
        }
    }

    fn sample_outer(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>> {
        self.outer.sample_gradient(y, k, rng)
    }

    fn exact_inner(&self, x: &[T]) -> Option<Vec<T>> {
        Some(x.to_vec())
    }

    fn exact_objective(&self, x: &[T]) -> Option<T> {
        self.outer.value(x)
    }

    fn exact_gradient(&self, x: &[T]) -> Option<Vec<T>> {
        self.outer.gradient(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::mean_transpose_apply;
    use crate::rng::{SeedStreams, StreamKind};

    fn problem() -> IdentityProblem<f64> {
        IdentityProblem::new(Box::new(NoisyQuadratic::diagonal(
            &[1.0, 2.0],
            vec![0.5, -1.0],
            0.3,
        )))
    }

    #[test]
    fn values_equal_input_and_jacobian_is_identity() {
        let p = problem();
        let mut rng = SeedStreams::new(0).stream(0, StreamKind::Aux);
        let batch = p.sample_inner(&[3.0, 4.0], 3, &mut rng);
        assert_eq!(batch.values, vec![vec![3.0, 4.0]; 3]);
        for j in &batch.jacobians {
            assert_eq!(j.to_dense(), Matrix::identity(2));
        }
    }

    #[test]
    fn composed_gradient_equals_outer_gradient() {
        let p = problem();
        let mut rng = SeedStreams::new(0).stream(0, StreamKind::Aux);
        let batch = p.sample_inner(&[3.0, 4.0], 2, &mut rng);
        let g = vec![0.7, -0.1];
        assert_eq!(mean_transpose_apply(&batch.jacobians, &g, 2), g);
    }
}
