//! The nested-expectation problem `min_x E_ν[f_ν(E_ω[g_ω(x)])]` seen through
//! its two first-order sampling oracles.

use rand::Rng;

use crate::error::{check_dim, CoreError, Result};
use crate::linalg::{axpy, Matrix};
use crate::rng::OracleRng;
use crate::scalar::Scalar;

/// A sampled Jacobian `∇g_ω(x) ∈ R^{q×p}`, possibly kept in operator form.
///
/// The solvers only ever need `∇gᵀ v`; dense materialisation is for tests and
/// diagnostics.
pub trait JacobianOp<T: Scalar>: Send + Sync {
    /// `q`
    fn rows(&self) -> usize;
    /// `p`
    fn cols(&self) -> usize;
    /// `∇g u` for `u ∈ R^p`.
    fn apply(&self, u: &[T]) -> Vec<T>;
    /// `∇gᵀ v` for `v ∈ R^q`.
    fn transpose_apply(&self, v: &[T]) -> Vec<T>;

    fn to_dense(&self) -> Matrix<T> {
        let (q, p) = (self.rows(), self.cols());
        let mut out = Matrix::zeros(q, p);
        let mut e = vec![T::zero(); p];
        for j in 0..p {
            e[j] = T::one();
            let col = self.apply(&e);
            for (i, c) in col.into_iter().enumerate() {
                out[(i, j)] = c;
            }
            e[j] = T::zero();
        }
        out
    }
}

pub type Jacobian<T> = Box<dyn JacobianOp<T>>;

impl<T: Scalar> JacobianOp<T> for Matrix<T> {
    fn rows(&self) -> usize {
        Matrix::rows(self)
    }
    fn cols(&self) -> usize {
        Matrix::cols(self)
    }
    fn apply(&self, u: &[T]) -> Vec<T> {
        self.matvec(u)
    }
    fn transpose_apply(&self, v: &[T]) -> Vec<T> {
        self.t_matvec(v)
    }
    fn to_dense(&self) -> Matrix<T> {
        self.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityJacobian(pub usize);

impl<T: Scalar> JacobianOp<T> for IdentityJacobian {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.0
    }
    fn apply(&self, u: &[T]) -> Vec<T> {
        u.to_vec()
    }
    fn transpose_apply(&self, v: &[T]) -> Vec<T> {
        v.to_vec()
    }
}

/// `K` inner-oracle samples taken at one point.
pub struct InnerBatch<T: Scalar> {
    pub values: Vec<Vec<T>>,
    pub jacobians: Vec<Jacobian<T>>,
}

/// How a finite-sum problem picks atom indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexSampling {
    /// Uniform i.i.d. with replacement.
    #[default]
    Iid,
    /// Deterministic pass `0, 1, …, K−1 (mod count)`, consuming no randomness.
    Enumerate,
}

impl IndexSampling {
    pub fn draw(self, count: usize, k: usize, rng: &mut OracleRng) -> Vec<usize> {
        match self {
            IndexSampling::Iid => (0..k).map(|_| rng.random_range(0..count)).collect(),
            IndexSampling::Enumerate => (0..k).map(|s| s % count).collect(),
        }
    }
}

/// Oracle-backed compositional problem with decision dimension `p` and inner
/// image dimension `q`.
pub trait CompositionalProblem<T: Scalar>: Send + Sync {
    /// `p`
    fn decision_dim(&self) -> usize;
    /// `q`
    fn image_dim(&self) -> usize;

    /// `K` i.i.d. samples of `(g_ω(z), ∇g_ω(z))`.
    fn sample_inner(&self, z: &[T], k: usize, rng: &mut OracleRng) -> InnerBatch<T>;

    /// `K` samples of `∇f_ν(y)`.
    fn sample_outer(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>>;

    /// Values only, with the same distribution as [`Self::sample_inner`].
    fn sample_inner_values(&self, z: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>> {
        self.sample_inner(z, k, rng).values
    }

    /// Jacobians only, with the same distribution as [`Self::sample_inner`].
    fn sample_inner_jacobians(&self, z: &[T], k: usize, rng: &mut OracleRng) -> Vec<Jacobian<T>> {
        self.sample_inner(z, k, rng).jacobians
    }

    /// `K` samples of `f_ν(y)` when the problem can evaluate them.
    fn sample_outer_values(&self, _y: &[T], _k: usize, _rng: &mut OracleRng) -> Option<Vec<T>> {
        None
    }

    /// Whether one index stream should drive both oracles within a step.
    fn coupled_sampling(&self) -> bool {
        false
    }

    /// `g(x) = E_ω[g_ω(x)]`.
    fn exact_inner(&self, _x: &[T]) -> Option<Vec<T>> {
        None
    }

    /// `J(x)`.
    fn exact_objective(&self, _x: &[T]) -> Option<T> {
        None
    }

    /// `∇J(x)`.
    fn exact_gradient(&self, _x: &[T]) -> Option<Vec<T>> {
        None
    }
}

/// Inner oracle with dimension and batch-size checks.
pub fn sample_inner<T: Scalar, P: CompositionalProblem<T> + ?Sized>(
    problem: &P,
    z: &[T],
    k: usize,
    rng: &mut OracleRng,
) -> Result<InnerBatch<T>> {
    check_dim("inner oracle point", problem.decision_dim(), z.len())?;
    check_batch(k)?;
    Ok(problem.sample_inner(z, k, rng))
}

/// Outer oracle with dimension and batch-size checks.
pub fn sample_outer<T: Scalar, P: CompositionalProblem<T> + ?Sized>(
    problem: &P,
    y: &[T],
    k: usize,
    rng: &mut OracleRng,
) -> Result<Vec<Vec<T>>> {
    check_dim("outer oracle point", problem.image_dim(), y.len())?;
    check_batch(k)?;
    Ok(problem.sample_outer(y, k, rng))
}

fn check_batch(k: usize) -> Result<()> {
    if k == 0 {
        Err(CoreError::InvalidParams("batch size must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `(1/K) Σ_k ∇g_kᵀ v`, i.e. the mean Jacobian transposed applied to `v`.
pub fn mean_transpose_apply<T: Scalar>(jacobians: &[Jacobian<T>], v: &[T], p: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); p];
    for jac in jacobians {
        let part = jac.transpose_apply(v);
        axpy(&mut acc, T::one(), &part);
    }
    if !jacobians.is_empty() {
        let k = T::from_count(jacobians.len());
        for a in &mut acc {
            *a = *a / k;
        }
    }
    acc
}

/// Dense mean of sampled Jacobians.
pub fn mean_dense_jacobian<T: Scalar>(jacobians: &[Jacobian<T>], q: usize, p: usize) -> Matrix<T> {
    let mut acc = Matrix::zeros(q, p);
    for jac in jacobians {
        let d = jac.to_dense();
        axpy(acc.as_mut_slice(), T::one(), d.as_slice());
    }
    if !jacobians.is_empty() {
        let k = T::from_count(jacobians.len());
        for a in acc.as_mut_slice() {
            *a = *a / k;
        }
    }
    acc
}
