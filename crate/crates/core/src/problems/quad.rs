//! Linear-quadratic composition `f(y) = ½‖y‖²`, `g(x) = Ax + b` with additive
//! zero-mean Gaussian oracle noise.
//!
//! Noise scales are total standard deviations: a value sample is
//! `Ax + b + ε` with `E‖ε‖² = σ_g²`, a Jacobian sample is `A + E` with
//! `E‖E‖_F² = σ_J²`, and an outer sample is `y + η` with `E‖η‖² = σ_f²`.
//! The configured `σ²` are therefore exactly the variance bounds of the
//! oracle model.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, CoreError, Result};
use crate::linalg::{dot, norm_sq, solve, Matrix};
use crate::problem::{CompositionalProblem, InnerBatch, Jacobian};
use crate::rng::OracleRng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseScales<T> {
    pub inner_value: T,
    pub inner_jacobian: T,
    pub outer_gradient: T,
}

impl<T: Scalar> NoiseScales<T> {
    pub fn none() -> Self {
        Self {
            inner_value: T::zero(),
            inner_jacobian: T::zero(),
            outer_gradient: T::zero(),
        }
    }

    pub fn uniform(sigma: T) -> Self {
        Self {
            inner_value: sigma,
            inner_jacobian: sigma,
            outer_gradient: sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadCompose<T> {
    a: Matrix<T>,
    b: Vec<T>,
    noise: NoiseScales<T>,
}

impl<T: Scalar> QuadCompose<T> {
    pub fn new(a: Matrix<T>, b: Vec<T>, noise: NoiseScales<T>) -> Result<Self> {
        check_dim("offset length", a.rows(), b.len())?;
        if a.rows() == 0 || a.cols() == 0 {
            return Err(CoreError::InvalidData("empty linear map".into()));
        }
        if !a.is_finite() || !b.iter().all(|v| v.is_finite()) {
            return Err(CoreError::InvalidData("non-finite problem data".into()));
        }
        for s in [noise.inner_value, noise.inner_jacobian, noise.outer_gradient] {
            if !(s >= T::zero() && s.is_finite()) {
                return Err(CoreError::InvalidData(format!("noise scale must be >= 0, got {s}")));
            }
        }
        Ok(Self { a, b, noise })
    }

    /// Random instance with `A_ij ~ N(0, 1/q)` and `b_i ~ N(0, 1)`.
    pub fn random(p: usize, q: usize, noise: NoiseScales<T>, seed: u64) -> Result<Self> {
        let mut rng = OracleRng::seed_from_u64(seed);
        let scale = 1.0 / (q as f64).sqrt();
        let a = Matrix::from_fn(q, p, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(scale * z)
        });
        let b = (0..q)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z)
            })
            .collect();
        Self::new(a, b, noise)
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn noise(&self) -> NoiseScales<T> {
        self.noise
    }

    pub fn without_noise(&self) -> Self {
        Self {
            noise: NoiseScales::none(),
            ..self.clone()
        }
    }

    /// `Ax + b`
    pub fn affine(&self, x: &[T]) -> Vec<T> {
        self.a
            .matvec(x)
            .into_iter()
            .zip(&self.b)
            .map(|(ax, &b)| ax + b)
            .collect()
    }

    /// Least-squares minimiser `−(AᵀA)⁻¹Aᵀb`; fails when `A` is rank deficient.
    pub fn minimizer(&self) -> Result<Vec<T>> {
        let at = self.a.transpose();
        let gram = at.matmul(&self.a)?;
        let rhs: Vec<T> = self.a.t_matvec(&self.b).into_iter().map(|v| -v).collect();
        solve(&gram, &rhs)
    }

    /// `min_x J(x)`.
    pub fn optimal_value(&self) -> Result<T> {
        let x = self.minimizer()?;
        Ok(T::lit(0.5) * norm_sq(&self.affine(&x)))
    }

    fn add_noise(&self, sigma: T, out: &mut [T], rng: &mut OracleRng) {
        if sigma > T::zero() {
            let per_entry = sigma / T::from_count(out.len()).sqrt();
            for o in out {
                let z: f64 = StandardNormal.sample(rng);
                *o = *o + per_entry * T::lit(z);
            }
        }
    }

    fn value_sample(&self, z: &[T], rng: &mut OracleRng) -> Vec<T> {
        let mut v = self.affine(z);
        self.add_noise(self.noise.inner_value, &mut v, rng);
        v
    }

    fn jacobian_sample(&self, rng: &mut OracleRng) -> Matrix<T> {
        let mut jac = self.a.clone();
        self.add_noise(self.noise.inner_jacobian, jac.as_mut_slice(), rng);
        jac
    }
}

impl<T: Scalar> CompositionalProblem<T> for QuadCompose<T> {
    fn decision_dim(&self) -> usize {
        self.a.cols()
    }

    fn image_dim(&self) -> usize {
        self.a.rows()
    }

    fn sample_inner(&self, z: &[T], k: usize, rng: &mut OracleRng) -> InnerBatch<T> {
        let mut values = Vec::with_capacity(k);
        let mut jacobians: Vec<Jacobian<T>> = Vec::with_capacity(k);
        for _ in 0..k {
            values.push(self.value_sample(z, rng));
            jacobians.push(Box::new(self.jacobian_sample(rng)));
        }
        InnerBatch { values, jacobians }
    }

    fn sample_inner_values(&self, z: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>> {
        (0..k).map(|_| self.value_sample(z, rng)).collect()
    }

    fn sample_inner_jacobians(&self, _z: &[T], k: usize, rng: &mut OracleRng) -> Vec<Jacobian<T>> {
        (0..k)
            .map(|_| Box::new(self.jacobian_sample(rng)) as Jacobian<T>)
            .collect()
    }

    fn sample_outer(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>> {
        (0..k)
            .map(|_| {
                let mut g = y.to_vec();
                self.add_noise(self.noise.outer_gradient, &mut g, rng);
                g
            })
            .collect()
    }

    /// `f_η(y) = ½‖y‖² + ηᵀy`, consistent with the gradient samples.
    fn sample_outer_values(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Option<Vec<T>> {
        let half = T::lit(0.5);
        Some(
            (0..k)
                .map(|_| {
                    let mut eta = vec![T::zero(); y.len()];
                    self.add_noise(self.noise.outer_gradient, &mut eta, rng);
                    half * norm_sq(y) + dot(&eta, y)
                })
                .collect(),
        )
    }

    fn exact_inner(&self, x: &[T]) -> Option<Vec<T>> {
        Some(self.affine(x))
    }

    fn exact_objective(&self, x: &[T]) -> Option<T> {
        Some(T::lit(0.5) * norm_sq(&self.affine(x)))
    }

    fn exact_gradient(&self, x: &[T]) -> Option<Vec<T>> {
        Some(self.a.t_matvec(&self.affine(x)))
    }
}
