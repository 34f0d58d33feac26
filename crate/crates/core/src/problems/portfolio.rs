//! Mean-variance portfolio selection written as a compositional problem.
//!
//! With reward vectors `r_1, …, r_m ∈ R^n`, the objective
//! `J(x) = (1/m) Σ_i (r_iᵀx − (1/m) Σ_k r_kᵀx)² − (1/m) Σ_i r_iᵀx`
//! factors as `f(g(x))` with inner atoms `g_j(x) = [x; −r_jᵀx]` and outer atoms
//! `f_i(y) = ([r_iᵀ, 1] y)² − [r_iᵀ, 0] y`, so `p = n` and `q = n + 1`.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{check_dim, CoreError, Result};
use crate::linalg::{dot, Matrix};
use crate::problem::{CompositionalProblem, IndexSampling, InnerBatch, Jacobian, JacobianOp};
use crate::rng::OracleRng;
use crate::scalar::Scalar;

/// Reward matrix, one row per time point and one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioData<T> {
    returns: Matrix<T>,
}

impl<T: Scalar> PortfolioData<T> {
    pub fn new(returns: Matrix<T>) -> Result<Self> {
        if returns.rows() < 2 {
            return Err(CoreError::InvalidData(format!(
                "need at least 2 time points, got {}",
                returns.rows()
            )));
        }
        if returns.cols() < 1 {
            return Err(CoreError::InvalidData("need at least one asset".into()));
        }
        if !returns.is_finite() {
            return Err(CoreError::InvalidData("returns contain non-finite entries".into()));
        }
        Ok(Self { returns })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Time points.
    pub fn m(&self) -> usize {
        self.returns.rows()
    }

    /// Assets.
    pub fn n(&self) -> usize {
        self.returns.cols()
    }

    pub fn returns(&self) -> &Matrix<T> {
        &self.returns
    }

    pub fn reward(&self, i: usize) -> &[T] {
        self.returns.row(i)
    }

    pub fn column_means(&self) -> Vec<T> {
        let mut mean = vec![T::zero(); self.n()];
        for i in 0..self.m() {
            for (acc, &r) in mean.iter_mut().zip(self.reward(i)) {
                *acc = *acc + r;
            }
        }
        let m = T::from_count(self.m());
        mean.iter_mut().for_each(|v| *v = *v / m);
        mean
    }

    /// Population covariance (normalised by `m`).
    pub fn covariance(&self) -> Matrix<T> {
        let n = self.n();
        let mean = self.column_means();
        let mut cov = Matrix::zeros(n, n);
        let mut centered = vec![T::zero(); n];
        for i in 0..self.m() {
            for ((c, &r), &mu) in centered.iter_mut().zip(self.reward(i)).zip(&mean) {
                *c = r - mu;
            }
            for a in 0..n {
                let ca = centered[a];
                for b in a..n {
                    cov[(a, b)] = cov[(a, b)] + ca * centered[b];
                }
            }
        }
        let m = T::from_count(self.m());
        for a in 0..n {
            for b in a..n {
                let v = cov[(a, b)] / m;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        cov
    }

    /// Objective evaluated literally: sample variance of `r_iᵀx` minus its mean.
    pub fn objective_direct(&self, x: &[T]) -> T {
        let m = T::from_count(self.m());
        let portfolio: Vec<T> = (0..self.m()).map(|i| dot(self.reward(i), x)).collect();
        let mean = portfolio.iter().copied().sum::<T>() / m;
        let var = portfolio.iter().map(|&r| (r - mean) * (r - mean)).sum::<T>() / m;
        var - mean
    }
}

/// Objective evaluated through the composition: `ȳ = mean_j g_j(x)`, then `mean_i f_i(ȳ)`.
pub fn portfolio_objective_compositional<T: Scalar>(data: &PortfolioData<T>, x: &[T]) -> T {
    let n = data.n();
    let m = T::from_count(data.m());
    let mut y = vec![T::zero(); n + 1];
    for j in 0..data.m() {
        let gj = inner_atom_value(data.reward(j), x);
        for (acc, v) in y.iter_mut().zip(gj) {
            *acc = *acc + v;
        }
    }
    y.iter_mut().for_each(|v| *v = *v / m);
    (0..data.m())
        .map(|i| outer_atom_value(data.reward(i), &y))
        .sum::<T>()
        / m
}

fn inner_atom_value<T: Scalar>(r: &[T], x: &[T]) -> Vec<T> {
    let mut v = x.to_vec();
    v.push(-dot(r, x));
    v
}

fn outer_atom_value<T: Scalar>(r: &[T], y: &[T]) -> T {
    let n = r.len();
    let s = dot(r, &y[..n]) + y[n];
    s * s - dot(r, &y[..n])
}

fn outer_atom_gradient<T: Scalar>(r: &[T], y: &[T]) -> Vec<T> {
    let n = r.len();
    let s = dot(r, &y[..n]) + y[n];
    let two_s = s + s;
    let mut grad: Vec<T> = r.iter().map(|&ri| two_s * ri - ri).collect();
    grad.push(two_s);
    grad
}

/// Jacobian `[I_n; −r_jᵀ]` of one inner atom.
#[derive(Debug, Clone)]
pub struct PortfolioJacobian<T> {
    reward: Vec<T>,
}

impl<T: Scalar> JacobianOp<T> for PortfolioJacobian<T> {
    fn rows(&self) -> usize {
        self.reward.len() + 1
    }
    fn cols(&self) -> usize {
        self.reward.len()
    }
    fn apply(&self, u: &[T]) -> Vec<T> {
        let mut out = u.to_vec();
        out.push(-dot(&self.reward, u));
        out
    }
    fn transpose_apply(&self, v: &[T]) -> Vec<T> {
        let n = self.reward.len();
        let last = v[n];
        v[..n]
            .iter()
            .zip(&self.reward)
            .map(|(&vi, &ri)| vi - last * ri)
            .collect()
    }
}

/// The portfolio instance with independent inner and outer index streams.
#[derive(Debug, Clone)]
pub struct PortfolioProblem<T> {
    data: PortfolioData<T>,
    mean: Vec<T>,
    covariance: Matrix<T>,
    sampling: IndexSampling,
}

impl<T: Scalar> PortfolioProblem<T> {
    pub fn new(data: PortfolioData<T>) -> Self {
        let mean = data.column_means();
        let covariance = data.covariance();
        Self {
            data,
            mean,
            covariance,
            sampling: IndexSampling::Iid,
        }
    }

    pub fn with_sampling(mut self, sampling: IndexSampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn data(&self) -> &PortfolioData<T> {
        &self.data
    }

    /// Inner atom `j` evaluated at `x`.
    pub fn inner_atom(&self, j: usize, x: &[T]) -> (Vec<T>, PortfolioJacobian<T>) {
        let r = self.data.reward(j);
        (
            inner_atom_value(r, x),
            PortfolioJacobian { reward: r.to_vec() },
        )
    }

    /// `∇f_i(y)`.
    pub fn outer_atom_gradient(&self, i: usize, y: &[T]) -> Vec<T> {
        outer_atom_gradient(self.data.reward(i), y)
    }

    pub fn outer_atom_value(&self, i: usize, y: &[T]) -> T {
        outer_atom_value(self.data.reward(i), y)
    }
}

impl<T: Scalar> CompositionalProblem<T> for PortfolioProblem<T> {
    fn decision_dim(&self) -> usize {
        self.data.n()
    }

    fn image_dim(&self) -> usize {
        self.data.n() + 1
    }

    fn sample_inner(&self, z: &[T], k: usize, rng: &mut OracleRng) -> InnerBatch<T> {
        let idx = self.sampling.draw(self.data.m(), k, rng);
        let mut values = Vec::with_capacity(k);
        let mut jacobians: Vec<Jacobian<T>> = Vec::with_capacity(k);
        for j in idx {
            let (v, jac) = self.inner_atom(j, z);
            values.push(v);
            jacobians.push(Box::new(jac));
        }
        InnerBatch { values, jacobians }
    }

    fn sample_inner_values(&self, z: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>> {
        self.sampling
            .draw(self.data.m(), k, rng)
            .into_iter()
            .map(|j| inner_atom_value(self.data.reward(j), z))
            .collect()
    }

    fn sample_outer(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Vec<Vec<T>> {
        self.sampling
            .draw(self.data.m(), k, rng)
            .into_iter()
            .map(|i| self.outer_atom_gradient(i, y))
            .collect()
    }

    fn sample_outer_values(&self, y: &[T], k: usize, rng: &mut OracleRng) -> Option<Vec<T>> {
        Some(
            self.sampling
                .draw(self.data.m(), k, rng)
                .into_iter()
                .map(|i| self.outer_atom_value(i, y))
                .collect(),
        )
    }

    fn exact_inner(&self, x: &[T]) -> Option<Vec<T>> {
        Some(inner_atom_value(&self.mean, x))
    }

    fn exact_objective(&self, x: &[T]) -> Option<T> {
        let cx = self.covariance.matvec(x);
        Some(dot(x, &cx) - dot(&self.mean, x))
    }

    fn exact_gradient(&self, x: &[T]) -> Option<Vec<T>> {
        let cx = self.covariance.matvec(x);
        Some(
            cx.iter()
                .zip(&self.mean)
                .map(|(&c, &mu)| c + c - mu)
                .collect(),
        )
    }
}

/// Shape presets for synthetic return data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnsRegime {
    /// 13781 time points, 100 assets.
    Large,
    /// 7240 time points, 25 assets.
    Medium,
    Custom { m: usize, n: usize },
}

impl ReturnsRegime {
    pub fn shape(self) -> (usize, usize) {
        match self {
            ReturnsRegime::Large => (13781, 100),
            ReturnsRegime::Medium => (7240, 25),
            ReturnsRegime::Custom { m, n } => (m, n),
        }
    }
}

/// Generator for Gaussian returns `r_ij = μ_j + λ_j F_i + s_j ε_ij`, i.i.d.
/// over time, with a shared market factor `F_i ~ N(0, σ_M²)`.
///
/// The defaults are on the scale of daily percentage returns of diversified
/// equity portfolios. Setting `market_volatility` to zero makes the assets
/// independent.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticReturns {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// Per-asset drifts are drawn uniformly from this range.
    pub drift: (f64, f64),
    /// Per-asset idiosyncratic volatilities are drawn uniformly from this range.
    pub volatility: (f64, f64),
    /// Market-factor loadings are drawn uniformly from this range.
    pub loading: (f64, f64),
    pub market_volatility: f64,
}

impl SyntheticReturns {
    pub fn new(regime: ReturnsRegime, seed: u64) -> Self {
        let (m, n) = regime.shape();
        Self {
            m,
            n,
            seed,
            drift: (0.02, 0.08),
            volatility: (0.3, 0.8),
            loading: (0.7, 1.3),
            market_volatility: 1.0,
        }
    }

    /// Drifts, loadings and volatilities actually used, in that order.
    pub fn asset_parameters(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = OracleRng::seed_from_u64(self.seed);
        let drift = Uniform::new_inclusive(self.drift.0, self.drift.1).expect("drift range");
        let vol = Uniform::new_inclusive(self.volatility.0, self.volatility.1).expect("vol range");
        let load = Uniform::new_inclusive(self.loading.0, self.loading.1).expect("loading range");
        let mut mus = Vec::with_capacity(self.n);
        let mut lambdas = Vec::with_capacity(self.n);
        let mut sigmas = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            mus.push(drift.sample(&mut rng));
            lambdas.push(load.sample(&mut rng));
            sigmas.push(vol.sample(&mut rng));
        }
        (mus, lambdas, sigmas)
    }

    /// Standard deviation of each asset's return.
    pub fn column_std(&self) -> Vec<f64> {
        let (_, lambdas, sigmas) = self.asset_parameters();
        lambdas
            .iter()
            .zip(&sigmas)
            .map(|(l, s)| (l * l * self.market_volatility.powi(2) + s * s).sqrt())
            .collect()
    }

    pub fn generate<T: Scalar>(&self) -> Result<PortfolioData<T>> {
        let (mus, lambdas, sigmas) = self.asset_parameters();
        let mut rng = OracleRng::seed_from_u64(self.seed);
        rng.set_stream(1);
        let mut data = Vec::with_capacity(self.m * self.n);
        for _ in 0..self.m {
            let market: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                self.market_volatility * z
            };
            for j in 0..self.n {
                let eps: f64 = StandardNormal.sample(&mut rng);
                data.push(T::lit(mus[j] + lambdas[j] * market + sigmas[j] * eps));
            }
        }
        check_dim("synthetic returns", self.m * self.n, data.len())?;
        PortfolioData::new(Matrix::from_row_major(self.m, self.n, data)?)
    }
}
