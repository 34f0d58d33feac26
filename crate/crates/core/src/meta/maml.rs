//! One-step MAML written as a compositional problem.
//!
//! With `K` tasks the inner map stacks `G(x)[:, j] = x − α ∇L_j(x; ξ_j)` into a
//! vector of length `p K` (column-major), and the outer function is
//! `f(A) = (1/K) Σ_j L_j(A[:, j]; ξ'_j)`. `K = 1` is the single-task case.

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::linalg::{axpy, Matrix};
use crate::problem::{CompositionalProblem, InnerBatch, Jacobian, JacobianOp};
use crate::rng::OracleRng;
use crate::scalar::Scalar;

use super::mlp::{fd_hvp, Architecture};
use super::sine::{SineTask, TaskBatch};

/// Where the data points of each oracle call come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataMode<T> {
    /// Fresh `batch_size` points per task on every call.
    Stream { batch_size: usize },
    /// The same frozen points on every call; exact quantities are available.
    FullBatch {
        inner: Vec<TaskBatch<T>>,
        outer: Vec<TaskBatch<T>>,
    },
}

/// How the squared errors of one task batch are combined into its loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossReduction {
    /// `Σ_i (NN(u_i) − v_i)²`
    #[default]
    Sum,
    /// The sum divided by the batch size.
    Mean,
}

impl LossReduction {
    fn factor<T: Scalar>(self, n: usize) -> T {
        match self {
            LossReduction::Sum => T::one(),
            LossReduction::Mean => T::one() / T::from_count(n.max(1)),
        }
    }
}

/// Loss of `arch` on one batch.
pub fn batch_loss<T: Scalar>(
    arch: &Architecture,
    params: &[T],
    batch: &TaskBatch<T>,
    reduction: LossReduction,
) -> T {
    arch.loss(params, &batch.inputs, &batch.targets) * reduction.factor(batch.inputs.len())
}

/// Loss gradient of `arch` on one batch.
pub fn batch_grad<T: Scalar>(
    arch: &Architecture,
    params: &[T],
    batch: &TaskBatch<T>,
    reduction: LossReduction,
) -> Vec<T> {
    let mut g = arch.loss_grad(params, &batch.inputs, &batch.targets).1;
    if reduction != LossReduction::Sum {
        let s = reduction.factor::<T>(batch.inputs.len());
        g.iter_mut().for_each(|v| *v = *v * s);
    }
    g
}

/// `H u` of the batch loss at `params`.
pub fn batch_hvp<T: Scalar>(
    arch: &Architecture,
    params: &[T],
    batch: &TaskBatch<T>,
    reduction: LossReduction,
    u: &[T],
) -> Vec<T> {
    fd_hvp(|w| batch_grad(arch, w, batch, reduction), params, u)
}

pub struct MamlProblem<T: Scalar> {
    arch: Arc<Architecture>,
    tasks: Vec<SineTask<T>>,
    alpha_inner: T,
    mode: DataMode<T>,
    reduction: LossReduction,
}

impl<T: Scalar> MamlProblem<T> {
    /// Single task, streaming batches of `m` points.
    pub fn case1(arch: Architecture, task: SineTask<T>, alpha_inner: T, m: usize) -> Result<Self> {
        Self::case2(arch, vec![task], alpha_inner, m)
    }

    /// `K = tasks.len()` tasks, streaming batches of `m` points per task.
    pub fn case2(arch: Architecture, tasks: Vec<SineTask<T>>, alpha_inner: T, m: usize) -> Result<Self> {
        Self::with_mode(Arc::new(arch), tasks, alpha_inner, DataMode::Stream { batch_size: m })
    }

    pub fn with_mode(
        arch: Arc<Architecture>,
        tasks: Vec<SineTask<T>>,
        alpha_inner: T,
        mode: DataMode<T>,
    ) -> Result<Self> {
        if tasks.is_empty() {
            return Err(CoreError::InvalidConfig("at least one task is required".into()));
        }
        if !(alpha_inner >= T::zero() && alpha_inner.is_finite()) {
            return Err(CoreError::InvalidConfig(format!(
                "inner step must be >= 0, got {alpha_inner}"
            )));
        }
        if arch.input_dim() != 1 || arch.output_dim() != 1 {
            return Err(CoreError::InvalidConfig("sine regression needs a 1 → 1 network".into()));
        }
        match &mode {
            DataMode::Stream { batch_size } if *batch_size == 0 => {
                return Err(CoreError::InvalidConfig("batch size must be at least 1".into()))
            }
            DataMode::FullBatch { inner, outer }
                if inner.len() != tasks.len() || outer.len() != tasks.len() =>
            {
                return Err(CoreError::InvalidConfig("one frozen batch per task is required".into()))
            }
            _ => {}
        }
        Ok(Self {
            arch,
            tasks,
            alpha_inner,
            mode,
            reduction: LossReduction::Sum,
        })
    }

    /// Same problem with task losses combined by `reduction`.
    pub fn with_reduction(mut self, reduction: LossReduction) -> Self {
        self.reduction = reduction;
        self
    }

    pub fn reduction(&self) -> LossReduction {
        self.reduction
    }

    /// Same tasks with `m` frozen inner points and `m` frozen outer points each.
    pub fn frozen(&self, m: usize, rng: &mut OracleRng) -> Result<Self> {
        let inner = self.tasks.iter().map(|t| t.batch(m, rng)).collect();
        let outer = self.tasks.iter().map(|t| t.batch(m, rng)).collect();
        Ok(Self::with_mode(
            self.arch.clone(),
            self.tasks.clone(),
            self.alpha_inner,
            DataMode::FullBatch { inner, outer },
        )?
        .with_reduction(self.reduction))
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn tasks(&self) -> &[SineTask<T>] {
        &self.tasks
    }

    pub fn alpha_inner(&self) -> T {
        self.alpha_inner
    }

    pub fn mode(&self) -> &DataMode<T> {
        &self.mode
    }

    fn p(&self) -> usize {
        self.arch.param_count()
    }

    fn inner_batches(&self, rng: &mut OracleRng) -> Vec<TaskBatch<T>> {
        match &self.mode {
            DataMode::Stream { batch_size } => {
                self.tasks.iter().map(|t| t.batch(*batch_size, rng)).collect()
            }
            DataMode::FullBatch { inner, .. } => inner.clone(),
        }
    }

    fn outer_batches(&self, rng: &mut OracleRng) -> Vec<TaskBatch<T>> {
        match &self.mode {
            DataMode::Stream { batch_size } => {
                self.tasks.iter().map(|t| t.batch(*batch_size, rng)).collect()
            }
            DataMode::FullBatch { outer, .. } => outer.clone(),
        }
    }

    /// `G(x)` for fixed per-task batches.
    pub fn adapted(&self, x: &[T], batches: &[TaskBatch<T>]) -> Vec<T> {
        let p = self.p();
        let mut out = Vec::with_capacity(p * batches.len());
        for b in batches {
            let g = batch_grad(&self.arch, x, b, self.reduction);
            out.extend(x.iter().zip(&g).map(|(&xi, &gi)| xi - self.alpha_inner * gi));
        }
        out
    }

    /// `∇f(A)` for fixed per-task batches, column `j` being `(1/K) ∇L_j`.
    pub fn outer_gradient(&self, a: &[T], batches: &[TaskBatch<T>]) -> Vec<T> {
        let p = self.p();
        let k = T::from_count(batches.len());
        let mut out = Vec::with_capacity(a.len());
        for (j, b) in batches.iter().enumerate() {
            let g = batch_grad(&self.arch, &a[j * p..(j + 1) * p], b, self.reduction);
            out.extend(g.into_iter().map(|v| v / k));
        }
        out
    }

    /// `f(A)` for fixed per-task batches.
    pub fn outer_value(&self, a: &[T], batches: &[TaskBatch<T>]) -> T {
        let p = self.p();
        let k = T::from_count(batches.len());
        batches
            .iter()
            .enumerate()
            .map(|(j, b)| batch_loss(&self.arch, &a[j * p..(j + 1) * p], b, self.reduction))
            .fold(T::zero(), |s, v| s + v)
            / k
    }

    fn jacobian(&self, x: &[T], batches: Vec<TaskBatch<T>>) -> MamlJacobian<T> {
        MamlJacobian {
            arch: self.arch.clone(),
            x: Arc::new(x.to_vec()),
            batches,
            alpha: self.alpha_inner,
            reduction: self.reduction,
        }
    }
}

/// `∂G/∂x`, stacking `I − α H_j` for each task, applied matrix-free.
pub struct MamlJacobian<T: Scalar> {
    arch: Arc<Architecture>,
    x: Arc<Vec<T>>,
    batches: Vec<TaskBatch<T>>,
    alpha: T,
    reduction: LossReduction,
}

impl<T: Scalar> MamlJacobian<T> {
    fn block(&self, j: usize, u: &[T]) -> Vec<T> {
        let mut out = u.to_vec();
        if self.alpha != T::zero() {
            let hu = batch_hvp(&self.arch, &self.x, &self.batches[j], self.reduction, u);
            axpy(&mut out, -self.alpha, &hu);
        }
        out
    }
}

impl<T: Scalar> JacobianOp<T> for MamlJacobian<T> {
    fn rows(&self) -> usize {
        self.x.len() * self.batches.len()
    }

    fn cols(&self) -> usize {
        self.x.len()
    }

    fn apply(&self, u: &[T]) -> Vec<T> {
        (0..self.batches.len()).flat_map(|j| self.block(j, u)).collect()
    }

    /// `Σ_j (I − α H_j) v_j`, using the symmetry of each `H_j`.
    fn transpose_apply(&self, v: &[T]) -> Vec<T> {
        let p = self.x.len();
        let mut acc = vec![T::zero(); p];
        for j in 0..self.batches.len() {
            axpy(&mut acc, T::one(), &self.block(j, &v[j * p..(j + 1) * p]));
        }
        acc
    }

    fn to_dense(&self) -> Matrix<T> {
        let (q, p) = (self.rows(), self.cols());
        let mut m = Matrix::zeros(q, p);
        let mut e = vec![T::zero(); p];
        for c in 0..p {
            e[c] = T::one();
            let col = self.apply(&e);
            for (r, v) in col.into_iter().enumerate() {
                m[(r, c)] = v;
            }
            e[c] = T::zero();
        }
        m
    }
}

impl<T: Scalar> CompositionalProblem<T> for MamlProblem<T> {
    fn decision_dim(&self) -> usize {
        self.p()
    }

    fn image_dim(&self) -> usize {
        self.p() * self.tasks.len()
    }

    fn sample_inner(&self, z: &[T], k: usize, rng: &mut OracleRng) -> InnerBatch<T> {
        let mut values = Vec::with_capacity(k);
        let mut jacobians: Vec<Jacobian<T>> = Vec::with_capacity(k);
        for _ in 0..k {
            let batches = self.inner_batches(rng);
            values.push(self.adapted(z, &batches));
            jacobians.push(Box::new(self.jacobian(z, batches)));
        }
        InnerBatch { values, jacobians }
    }

    fn sample_inner_values(&self, z: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>> {
        (0..k)
            .map(|_| {
                let batches = self.inner_batches(rng);
                self.adapted(z, &batches)
            })
            .collect()
    }

    fn sample_inner_jacobians(&self, z: &[T], k: usize, rng: &mut OracleRng) -> Vec<Jacobian<T>> {
        (0..k)
            .map(|_| Box::new(self.jacobian(z, self.inner_batches(rng))) as Jacobian<T>)
            .collect()
    }

    fn sample_outer(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>> {
        (0..k)
            .map(|_| {
                let batches = self.outer_batches(rng);
                self.outer_gradient(y, &batches)
            })
            .collect()
    }

    fn sample_outer_values(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Option<Vec<T>> {
        Some(
            (0..k)
                .map(|_| {
                    let batches = self.outer_batches(rng);
                    self.outer_value(y, &batches)
                })
                .collect(),
        )
    }

    fn exact_inner(&self, x: &[T]) -> Option<Vec<T>> {
        match &self.mode {
            DataMode::FullBatch { inner, .. } => Some(self.adapted(x, inner)),
            DataMode::Stream { .. } => None,
        }
    }

    fn exact_objective(&self, x: &[T]) -> Option<T> {
        match &self.mode {
            DataMode::FullBatch { inner, outer } => Some(self.outer_value(&self.adapted(x, inner), outer)),
            DataMode::Stream { .. } => None,
        }
    }

    fn exact_gradient(&self, x: &[T]) -> Option<Vec<T>> {
        match &self.mode {
            DataMode::FullBatch { inner, outer } => {
                let g = self.outer_gradient(&self.adapted(x, inner), outer);
                Some(self.jacobian(x, inner.clone()).transpose_apply(&g))
            }
            DataMode::Stream { .. } => None,
        }
    }
}
