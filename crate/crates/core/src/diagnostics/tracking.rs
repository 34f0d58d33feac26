//! Distance between the tracking variable and the true inner value.

use crate::error::{check_dim, CoreError, Result};
use crate::linalg::{norm_sq, sub};
use crate::optim::CAdamState;
use crate::problem::CompositionalProblem;
use crate::scalar::Scalar;

/// `‖g(x) − y‖²` for an arbitrary pair.
pub fn tracking_error_at<T, P>(problem: &P, x: &[T], y: &[T]) -> Result<T>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    check_dim("tracking variable", problem.image_dim(), y.len())?;
    let g = problem
        .exact_inner(x)
        .ok_or(CoreError::Unavailable("an exact inner map"))?;
    Ok(norm_sq(&sub(&g, y)))
}

/// `‖g(x_t) − y_t‖²` for a C-ADAM state.
pub fn tracking_error<T, P>(problem: &P, state: &CAdamState<T>) -> Result<T>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    tracking_error_at(problem, &state.x, &state.y)
}
