//! Non-adaptive compositional baselines: basic SCGD and accelerated ASC-PG.

use crate::error::{check_dim, CoreError, Result};
use crate::linalg::mean_of;
use crate::problem::CompositionalProblem;
use crate::rng::StepRngs;
use crate::scalar::Scalar;
use crate::schedule::{batch_size, StepParams};

use super::cadam::{composite_estimate, StepReport};

/// `α_t = C_α t^{−a}`, `β_t = min(1, C_β t^{−b})`, batch sizes `⌈C_i t^{c}⌉`
/// (`⌈C_3 t^{e}⌉` for inner values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineSchedule<T> {
    pub c_alpha: T,
    pub c_beta: T,
    pub a: T,
    pub b: T,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c: T,
    pub e: T,
}

impl<T: Scalar> BaselineSchedule<T> {
    /// Nonconvex SCGD rates `α_t ∝ t^{−3/4}`, `β_t ∝ t^{−1/2}`.
    pub fn scgd() -> Self {
        Self::with_exponents(T::lit(0.75), T::lit(0.5))
    }

    /// Nonconvex ASC-PG rates `α_t ∝ t^{−5/9}`, `β_t ∝ t^{−4/9}`.
    pub fn ascpg() -> Self {
        Self::with_exponents(T::lit(5.0 / 9.0), T::lit(4.0 / 9.0))
    }

    fn with_exponents(a: T, b: T) -> Self {
        Self {
            c_alpha: T::lit(0.01),
            c_beta: T::one(),
            a,
            b,
            c1: T::one(),
            c2: T::one(),
            c3: T::one(),
            c: T::zero(),
            e: T::zero(),
        }
    }

    pub fn with_constant_batch(mut self, k: usize) -> Self {
        let k = T::from_count(k);
        self.c1 = k;
        self.c2 = k;
        self.c3 = k;
        self.c = T::zero();
        self.e = T::zero();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(CoreError::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        pos("c_alpha", self.c_alpha)?;
        pos("c_beta", self.c_beta)?;
        pos("c1", self.c1)?;
        pos("c2", self.c2)?;
        pos("c3", self.c3)?;
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("e", self.e)] {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(CoreError::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn at(&self, t: usize) -> Result<StepParams<T>> {
        self.validate()?;
        if t == 0 {
            return Err(CoreError::InvalidConfig("iterations are numbered from 1".into()));
        }
        let tt = T::from_count(t);
        Ok(StepParams {
            alpha: self.c_alpha / tt.powf(self.a),
            beta: (self.c_beta / tt.powf(self.b)).min(T::one()),
            k1: batch_size(self.c1.as_f64(), t, self.c.as_f64()),
            k2: batch_size(self.c2.as_f64(), t, self.c.as_f64()),
            k3: batch_size(self.c3.as_f64(), t, self.e.as_f64()),
            gamma1: T::zero(),
            gamma2: T::zero(),
        })
    }
}

/// Iterate, tracking vector and (for ASC-PG) the extrapolation point.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
    pub t: usize,
}

impl<T: Scalar> BaselineState<T> {
    pub fn new(x1: Vec<T>, q: usize) -> Self {
        Self {
            z: x1.clone(),
            x: x1,
            y: vec![T::zero(); q],
            t: 1,
        }
    }
}

fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if beta > T::zero() && beta <= T::one() {
        Ok(())
    } else {
        Err(CoreError::InvalidParams(format!("beta_t must lie in (0, 1], got {beta}")))
    }
}

fn blend<T: Scalar>(y: &[T], g: &[T], beta: T) -> Vec<T> {
    y.iter()
        .zip(g)
        .map(|(&y, &g)| (T::one() - beta) * y + beta * g)
        .collect()
}

/// `y ← (1−β)y + β ĝ(x)`, then `x ← x − α ∇ĝ(x)ᵀ ∇f̂(y)`.
pub fn scgd_step<T, P>(
    problem: &P,
    state: &BaselineState<T>,
    params: &StepParams<T>,
    rngs: &mut StepRngs,
) -> Result<(BaselineState<T>, StepReport<T>)>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    let q = problem.image_dim();
    check_dim("iterate", problem.decision_dim(), state.x.len())?;
    check_dim("tracking vector", q, state.y.len())?;
    check_beta(params.beta)?;
    if params.k3 == 0 {
        return Err(CoreError::InvalidParams("batch size must be at least 1".into()));
    }
    let values = problem.sample_inner_values(&state.x, params.k3, &mut rngs.inner_value);
    let y = blend(&state.y, &mean_of(&values, q), params.beta);
    let est = composite_estimate(problem, &state.x, &y, params.k1, params.k2, rngs)?;
    let x: Vec<T> = state
        .x
        .iter()
        .zip(&est)
        .map(|(&x, &g)| x - params.alpha * g)
        .collect();
    let report = StepReport {
        inner_value_samples: params.k3,
        inner_grad_samples: params.k2,
        outer_grad_samples: params.k1,
        composite_grad_estimate: est,
    };
    Ok((
        BaselineState {
            z: x.clone(),
            x,
            y,
            t: state.t + 1,
        },
        report,
    ))
}

/// `x ← x − α ∇ĝ(x)ᵀ ∇f̂(y)`, `z ← (1 − 1/β)x_old + (1/β)x`,
/// `y ← (1−β)y + β ĝ(z)`.
pub fn ascpg_step<T, P>(
    problem: &P,
    state: &BaselineState<T>,
    params: &StepParams<T>,
    rngs: &mut StepRngs,
) -> Result<(BaselineState<T>, StepReport<T>)>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    let q = problem.image_dim();
    check_beta(params.beta)?;
    if params.k3 == 0 {
        return Err(CoreError::InvalidParams("batch size must be at least 1".into()));
    }
    let est = composite_estimate(problem, &state.x, &state.y, params.k1, params.k2, rngs)?;
    let x: Vec<T> = state
        .x
        .iter()
        .zip(&est)
        .map(|(&x, &g)| x - params.alpha * g)
        .collect();
    let inv_beta = T::one() / params.beta;
    let z: Vec<T> = state
        .x
        .iter()
        .zip(&x)
        .map(|(&xo, &xn)| (T::one() - inv_beta) * xo + inv_beta * xn)
        .collect();
    let values = problem.sample_inner_values(&z, params.k3, &mut rngs.inner_value);
    let y = blend(&state.y, &mean_of(&values, q), params.beta);
    let report = StepReport {
        inner_value_samples: params.k3,
        inner_grad_samples: params.k2,
        outer_grad_samples: params.k1,
        composite_grad_estimate: est,
    };
    Ok((
        BaselineState {
            x,
            y,
            z,
            t: state.t + 1,
        },
        report,
    ))
}
