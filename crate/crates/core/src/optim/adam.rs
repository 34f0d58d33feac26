//! Reference ADAM (no bias correction) and plain SGD on a supplied gradient.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub x: Vec<T>,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(x: Vec<T>) -> Self {
        let p = x.len();
        Self {
            x,
            m: vec![T::zero(); p],
            v: vec![T::zero(); p],
        }
    }
}

/// `m ← β1 m + (1−β1) g`, `v ← β2 v + (1−β2) g²`, `x ← x − α m/(√v + ε)`.
pub fn adam_step<T: Scalar>(
    state: &AdamState<T>,
    gradient: &[T],
    alpha: T,
    beta1: T,
    beta2: T,
    epsilon: T,
) -> AdamState<T> {
    let one = T::one();
    let m: Vec<T> = state
        .m
        .iter()
        .zip(gradient)
        .map(|(&m, &g)| beta1 * m + (one - beta1) * g)
        .collect();
    let v: Vec<T> = state
        .v
        .iter()
        .zip(gradient)
        .map(|(&v, &g)| beta2 * v + (one - beta2) * g * g)
        .collect();
    let x = state
        .x
        .iter()
        .zip(m.iter().zip(&v))
        .map(|(&x, (&m, &v))| x - alpha * m / (v.sqrt() + epsilon))
        .collect();
    AdamState { x, m, v }
}

/// `x − α g`
pub fn sgd_step<T: Scalar>(x: &[T], gradient: &[T], alpha: T) -> Vec<T> {
    x.iter().zip(gradient).map(|(&x, &g)| x - alpha * g).collect()
}
