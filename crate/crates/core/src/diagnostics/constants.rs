//! Empirical regularity constants from oracle samples.
//!
//! Bounds are maxima over sampled points, so they only grow as points
//! accumulate. Variances use pairwise differences `½‖a − b‖²` of independent
//! draws, which are exactly zero for deterministic oracles.

use rand::Rng;

use crate::error::{check_dim, Result};
use crate::linalg::{norm, norm_sq, sub};
use crate::problem::CompositionalProblem;
use crate::rng::{OracleRng, SeedStreams, StreamKind};
use crate::schedule::ProblemConstants;
use crate::scalar::Scalar;

const POWER_ITERATIONS: usize = 60;
const MIN_DISTANCE: f64 = 1e-3;
const MAX_DISTANCE: f64 = 1.0;

/// `‖M‖₂` of an operator by power iteration on `MᵀM`; a lower bound that
/// tightens with the iteration count.
fn operator_norm<T: Scalar>(
    cols: usize,
    apply: impl Fn(&[T]) -> Vec<T>,
    transpose_apply: impl Fn(&[T]) -> Vec<T>,
    rng: &mut OracleRng,
) -> T {
    let mut u: Vec<T> = (0..cols).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
    let mut sigma = T::zero();
    for _ in 0..POWER_ITERATIONS {
        let n = norm(&u);
        if n == T::zero() {
            return T::zero();
        }
        u.iter_mut().for_each(|v| *v = *v / n);
        let mu = apply(&u);
        sigma = norm(&mu);
        u = transpose_apply(&mu);
    }
    sigma
}

fn random_direction<T: Scalar>(dim: usize, rng: &mut OracleRng) -> (Vec<T>, T) {
    let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let dist = rng.random_range(MIN_DISTANCE..=MAX_DISTANCE);
    (u.iter().map(|v| T::lit(v / n * dist)).collect(), T::lit(dist))
}

fn pair_variance<T: Scalar>(draws: &[Vec<T>]) -> T {
    let pairs = draws.len() / 2;
    if pairs == 0 {
        return T::zero();
    }
    let half = T::lit(0.5);
    draws
        .chunks_exact(2)
        .map(|p| half * norm_sq(&sub(&p[0], &p[1])))
        .fold(T::zero(), |s, v| s + v)
        / T::from_count(pairs)
}

/// Running maxima of the constants over observed points.
#[derive(Debug, Clone)]
pub struct ConstantEstimator<T> {
    constants: ProblemConstants<T>,
    points: usize,
    /// Oracle draws per point for the variance estimates (rounded down to even).
    pub draws_per_point: usize,
}

impl<T: Scalar> ConstantEstimator<T> {
    pub fn new(draws_per_point: usize) -> Self {
        Self {
            constants: ProblemConstants::default(),
            points: 0,
            draws_per_point: draws_per_point.max(2),
        }
    }

    pub fn constants(&self) -> ProblemConstants<T> {
        self.constants
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Folds the oracle behaviour around `x` into the running estimates.
    ///
    /// Outer quantities are probed at `y = g_ω(x)` for one inner draw.
    /// Jacobian variance uses the Frobenius norm and materialises the
    /// Jacobians, so it is meant for small problems.
    pub fn observe<P>(&mut self, problem: &P, x: &[T], rng: &mut OracleRng) -> Result<()>
    where
        P: CompositionalProblem<T> + ?Sized,
    {
        let (p, q) = (problem.decision_dim(), problem.image_dim());
        check_dim("sampled point", p, x.len())?;
        let c = &mut self.constants;
        let k = self.draws_per_point;

        let inner = problem.sample_inner(x, k, rng);
        c.sigma3_sq = c.sigma3_sq.max(pair_variance(&inner.values));
        let dense: Vec<Vec<T>> = inner
            .jacobians
            .iter()
            .map(|j| j.to_dense().as_slice().to_vec())
            .collect();
        c.sigma2_sq = c.sigma2_sq.max(pair_variance(&dense));
        for j in &inner.jacobians {
            let s = operator_norm(p, |u| j.apply(u), |v| j.transpose_apply(v), rng);
            c.m_g = c.m_g.max(s);
        }
        let y = inner.values[0].clone();

        let outer = problem.sample_outer(&y, k, rng);
        c.sigma1_sq = c.sigma1_sq.max(pair_variance(&outer));
        for g in &outer {
            c.m_f = c.m_f.max(norm(g));
        }
        if let Some(vals) = problem.sample_outer_values(&y, k, rng) {
            for v in vals {
                c.b_f = c.b_f.max(v.abs());
            }
        }

        // Difference quotients with a shared draw on both ends of the pair.
        let (dy, ry) = random_direction::<T>(q, rng);
        let y2: Vec<T> = y.iter().zip(&dy).map(|(&a, &b)| a + b).collect();
        let mut r1 = rng.clone();
        let mut r2 = rng.clone();
        let g1 = problem.sample_outer(&y, 1, &mut r1).remove(0);
        let g2 = problem.sample_outer(&y2, 1, &mut r2).remove(0);
        c.l_f = c.l_f.max(norm(&sub(&g1, &g2)) / ry);
        *rng = r1;

        let (dx, rx) = random_direction::<T>(p, rng);
        let x2: Vec<T> = x.iter().zip(&dx).map(|(&a, &b)| a + b).collect();
        let mut r1 = rng.clone();
        let mut r2 = rng.clone();
        let j1 = problem.sample_inner_jacobians(x, 1, &mut r1).remove(0);
        let j2 = problem.sample_inner_jacobians(&x2, 1, &mut r2).remove(0);
        *rng = r1;
        let diff = operator_norm(
            p,
            |u| sub(&j1.apply(u), &j2.apply(u)),
            |v| sub(&j1.transpose_apply(v), &j2.transpose_apply(v)),
            rng,
        );
        c.l_g = c.l_g.max(diff / rx);

        self.points += 1;
        Ok(())
    }
}

/// Estimates the constants at `n` points drawn by `domain_sampler`.
pub fn estimate_constants<T, P, S>(
    problem: &P,
    mut domain_sampler: S,
    n: usize,
    draws_per_point: usize,
    seed: u64,
) -> Result<ProblemConstants<T>>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
    S: FnMut(&mut OracleRng) -> Vec<T>,
{
    let streams = SeedStreams::new(seed);
    let mut est = ConstantEstimator::new(draws_per_point);
    for i in 0..n {
        let x = domain_sampler(&mut streams.stream(i as u64, StreamKind::Init));
        est.observe(problem, &x, &mut streams.stream(i as u64, StreamKind::Aux))?;
    }
    Ok(est.constants())
}
