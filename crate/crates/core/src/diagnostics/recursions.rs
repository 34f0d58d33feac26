//! Upper-envelope dynamics of the tracking error.
//!
//! The tracking error splits into a drift part `D_t` (how far the
//! extrapolation points are from the current iterate) and a noise part
//! `E_t`. Both satisfy linear recursions driven by the schedule; iterating
//! them as equalities gives the envelope `(L_g²/2) D_t² + 2 E_t`.

use crate::error::{CoreError, Result};
use crate::schedule::{ProblemConstants, ScheduleConfig};
use crate::scalar::Scalar;

/// Averaging weights of `y_{t+1}` over the past extrapolation points.
///
/// With `β_0 = 1` prepended, `θ_j = β_j Π_{i=j+1}^{t} (1 − β_i)` for
/// `j = 0..=t`, given `betas = [β_1, …, β_t]`. The weights telescope to one.
pub fn theta_coefficients<T: Scalar>(betas: &[T]) -> Vec<T> {
    let t = betas.len();
    let beta = |j: usize| if j == 0 { T::one() } else { betas[j - 1] };
    let mut theta = vec![T::zero(); t + 1];
    let mut tail = T::one();
    for j in (0..=t).rev() {
        theta[j] = beta(j) * tail;
        tail = tail * (T::one() - beta(j));
    }
    theta
}

/// One iterate of the envelope recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState<T> {
    pub t: usize,
    pub d: T,
    pub f_sq: T,
    /// Bound on `E‖E_t‖²`.
    pub e_sq: T,
    /// `(L_g²/2) D_t² + 2 E_t`
    pub envelope: T,
}

/// Iterates `D`, `F²`, `E` for `t = 1..=iterations`.
///
/// `D_{t+1} = (1−β_t) D_t + 2M²α_t²/(ε²β_t) + β_t F_t²`,
/// `F_{t+1}² = (1−β_t) F_t² + 4M²α_t²/(ε²β_t)`,
/// `E_{t+1} = (1−β_t)² E_t + β_t² σ_3²/K³_t`, with `M = M_g M_f`,
/// `D_1 = F_1 = 0` and `E_1 = ‖g(x_1)‖²`.
pub fn tracking_bound_recursions<T: Scalar>(
    schedule: &ScheduleConfig<T>,
    constants: &ProblemConstants<T>,
    initial_inner_norm_sq: T,
    iterations: usize,
) -> Result<Vec<BoundState<T>>> {
    if !(initial_inner_norm_sq >= T::zero()) {
        return Err(CoreError::InvalidConfig("initial inner norm must be nonnegative".into()));
    }
    let two = T::lit(2.0);
    let m_sq = (constants.m_g * constants.m_f).powi(2);
    let eps_sq = schedule.epsilon * schedule.epsilon;
    let half_lg_sq = constants.l_g * constants.l_g / two;
    let envelope = |d: T, e: T| half_lg_sq * d * d + two * e;

    let mut out = Vec::with_capacity(iterations);
    let (mut d, mut f_sq, mut e_sq) = (T::zero(), T::zero(), initial_inner_norm_sq);
    for t in 1..=iterations {
        out.push(BoundState {
            t,
            d,
            f_sq,
            e_sq,
            envelope: envelope(d, e_sq),
        });
        let p = schedule.at(t)?;
        let keep = T::one() - p.beta;
        let drive = m_sq * p.alpha * p.alpha / (eps_sq * p.beta);
        d = keep * d + two * drive + p.beta * f_sq;
        f_sq = keep * f_sq + two * two * drive;
        e_sq = keep * keep * e_sq + p.beta * p.beta * constants.sigma3_sq / T::from_count(p.k3);
    }
    Ok(out)
}

/// First `t` from which the envelope never increases again, if any.
pub fn envelope_burn_in<T: Scalar>(states: &[BoundState<T>]) -> Option<usize> {
    let mut start = states.first()?.t;
    for w in states.windows(2) {
        if w[1].envelope > w[0].envelope {
            start = w[1].t;
        }
    }
    (start < states.last()?.t).then_some(start)
}
