use crate::error::{check_dim, CoreError, Result};
use crate::linalg::mean_of;
use crate::problem::{mean_transpose_apply, CompositionalProblem};
use crate::rng::StepRngs;
use crate::scalar::Scalar;
use crate::schedule::StepParams;

/// Iterate, tracking vector, extrapolation point and both moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct CAdamState<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
    pub m: Vec<T>,
    pub v: Vec<T>,
    /// Index of the next step.
    pub t: usize,
}

impl<T: Scalar> CAdamState<T> {
    /// `z_1 = x_1`, `y_1 = 0`, `m = v = 0`.
    pub fn new(x1: Vec<T>, q: usize) -> Self {
        let p = x1.len();
        Self {
            z: x1.clone(),
            x: x1,
            y: vec![T::zero(); q],
            m: vec![T::zero(); p],
            v: vec![T::zero(); p],
            t: 1,
        }
    }
}

/// Oracle usage of one step together with the gradient estimate it formed.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<T> {
    pub inner_value_samples: usize,
    pub inner_grad_samples: usize,
    pub outer_grad_samples: usize,
    pub composite_grad_estimate: Vec<T>,
}

impl<T> StepReport<T> {
    pub fn total_samples(&self) -> usize {
        self.inner_value_samples + self.inner_grad_samples + self.outer_grad_samples
    }
}

/// `(mean ∇g_ω(x))ᵀ (mean ∇f_ν(y))` from `k2` inner and `k1` outer samples.
pub fn composite_estimate<T, P>(
    problem: &P,
    x: &[T],
    y: &[T],
    k1: usize,
    k2: usize,
    rngs: &mut StepRngs,
) -> Result<Vec<T>>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    let (p, q) = (problem.decision_dim(), problem.image_dim());
    check_dim("iterate", p, x.len())?;
    check_dim("tracking vector", q, y.len())?;
    if k1 == 0 || k2 == 0 {
        return Err(CoreError::InvalidParams("batch size must be at least 1".into()));
    }
    let outer = mean_of(&problem.sample_outer(y, k1, &mut rngs.outer), q);
    let jacobians = problem.sample_inner_jacobians(x, k2, &mut rngs.inner_grad);
    Ok(mean_transpose_apply(&jacobians, &outer, p))
}

/// One iteration of compositional ADAM.
pub fn cadam_step<T, P>(
    problem: &P,
    state: &CAdamState<T>,
    params: &StepParams<T>,
    epsilon: T,
    rngs: &mut StepRngs,
) -> Result<(CAdamState<T>, StepReport<T>)>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    cadam_step_with_next(problem, problem, state, params, epsilon, rngs)
}

/// As [`cadam_step`], but the inner values that refresh `y` come from
/// `next`. Training loops that redraw their problem every iteration use this
/// so that `y_{t+1}` tracks the problem the following step will query.
pub fn cadam_step_with_next<T, P, Q>(
    problem: &P,
    next: &Q,
    state: &CAdamState<T>,
    params: &StepParams<T>,
    epsilon: T,
    rngs: &mut StepRngs,
) -> Result<(CAdamState<T>, StepReport<T>)>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
    Q: CompositionalProblem<T> + ?Sized,
{
    let p = problem.decision_dim();
    let q = next.image_dim();
    check_dim("first moment", p, state.m.len())?;
    check_dim("second moment", p, state.v.len())?;
    check_dim("next problem decision dimension", p, next.decision_dim())?;
    let beta = params.beta;
    if !(beta > T::zero() && beta <= T::one()) {
        return Err(CoreError::InvalidParams(format!("beta_t must lie in (0, 1], got {beta}")));
    }
    if params.k3 == 0 {
        return Err(CoreError::InvalidParams("batch size must be at least 1".into()));
    }

    let est = composite_estimate(problem, &state.x, &state.y, params.k1, params.k2, rngs)?;

    let (g1, g2) = (params.gamma1, params.gamma2);
    let one = T::one();
    let m: Vec<T> = state
        .m
        .iter()
        .zip(&est)
        .map(|(&m, &e)| g1 * m + (one - g1) * e)
        .collect();
    let v: Vec<T> = state
        .v
        .iter()
        .zip(&est)
        .map(|(&v, &e)| g2 * v + (one - g2) * e * e)
        .collect();
    let x: Vec<T> = state
        .x
        .iter()
        .zip(m.iter().zip(&v))
        .map(|(&x, (&m, &v))| x - params.alpha * m / (v.sqrt() + epsilon))
        .collect();
    let inv_beta = one / beta;
    let z: Vec<T> = state
        .x
        .iter()
        .zip(&x)
        .map(|(&xo, &xn)| (one - inv_beta) * xo + inv_beta * xn)
        .collect();
    let inner = mean_of(&next.sample_inner_values(&z, params.k3, &mut rngs.inner_value), q);
    let y: Vec<T> = if state.y.len() == q {
        state
            .y
            .iter()
            .zip(&inner)
            .map(|(&y, &g)| (one - beta) * y + beta * g)
            .collect()
    } else {
        return Err(CoreError::DimensionMismatch {
            context: "tracking vector",
            expected: q,
            actual: state.y.len(),
        });
    };

    let report = StepReport {
        inner_value_samples: params.k3,
        inner_grad_samples: params.k2,
        outer_grad_samples: params.k1,
        composite_grad_estimate: est,
    };
    Ok((
        CAdamState {
            x,
            y,
            z,
            m,
            v,
            t: state.t + 1,
        },
        report,
    ))
}
