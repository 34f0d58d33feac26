//! Multi-step driver shared by every solver.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use crate::error::{check_dim, CoreError, Result};
use crate::linalg::{all_finite, mean_of, norm_sq, sub};
use crate::problem::{mean_transpose_apply, CompositionalProblem};
use crate::rng::{SeedStreams, StepRngs, StreamKind};
use crate::scalar::Scalar;
use crate::schedule::{ScheduleConfig, StepParams};

use super::adam::{adam_step, sgd_step, AdamState};
use super::baselines::{ascpg_step, scgd_step, BaselineSchedule, BaselineState};
use super::cadam::{cadam_step, CAdamState, StepReport};

/// Constant-rate ADAM driven by the plug-in gradient estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub alpha: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub k1: usize,
    pub k2: usize,
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.001),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            k1: 1,
            k2: 1,
        }
    }
}

/// `α_t = C_α t^{−a}` SGD driven by the plug-in gradient estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig<T> {
    pub c_alpha: T,
    pub a: T,
    pub k1: usize,
    pub k2: usize,
}

impl<T: Scalar> Default for SgdConfig<T> {
    fn default() -> Self {
        Self {
            c_alpha: T::lit(0.01),
            a: T::zero(),
            k1: 1,
            k2: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Solver<T> {
    CAdam(ScheduleConfig<T>),
    Scgd(BaselineSchedule<T>),
    AscPg(BaselineSchedule<T>),
    Adam(AdamConfig<T>),
    Sgd(SgdConfig<T>),
}

impl<T: Scalar> Solver<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::CAdam(_) => "cadam",
            Solver::Scgd(_) => "scgd",
            Solver::AscPg(_) => "ascpg",
            Solver::Adam(_) => "adam",
            Solver::Sgd(_) => "sgd",
        }
    }

    /// Parameters of step `t` and the sample count it will consume.
    pub fn params(&self, t: usize) -> Result<StepParams<T>> {
        match self {
            Solver::CAdam(cfg) => cfg.at(t),
            Solver::Scgd(s) | Solver::AscPg(s) => s.at(t),
            Solver::Adam(c) => {
                check_plugin_batches(c.k1, c.k2)?;
                Ok(StepParams {
                    alpha: c.alpha,
                    beta: T::one(),
                    k1: c.k1,
                    k2: c.k2,
                    k3: 0,
                    gamma1: c.beta1,
                    gamma2: c.beta2,
                })
            }
            Solver::Sgd(c) => {
                check_plugin_batches(c.k1, c.k2)?;
                if t == 0 {
                    return Err(CoreError::InvalidConfig("iterations are numbered from 1".into()));
                }
                Ok(StepParams {
                    alpha: c.c_alpha / T::from_count(t).powf(c.a),
                    beta: T::one(),
                    k1: c.k1,
                    k2: c.k2,
                    k3: 0,
                    gamma1: T::zero(),
                    gamma2: T::zero(),
                })
            }
        }
    }
}

fn check_plugin_batches(k1: usize, k2: usize) -> Result<()> {
    if k1 == 0 || k2 == 0 {
        Err(CoreError::InvalidConfig("batch sizes must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Which iterate a run returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputRule {
    /// Uniform draw from `{x_1, …, x_T}`.
    #[default]
    Uniform,
    /// `x_{T+1}`.
    Last,
    /// Lowest exact objective among evaluated checkpoints.
    BestEvaluated,
}

/// Iterations after which a trace row is recorded.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Checkpoints {
    Every,
    /// Powers of two plus the final iteration.
    #[default]
    Geometric,
    List(Vec<usize>),
}

impl Checkpoints {
    pub fn contains(&self, t: usize, last: usize) -> bool {
        match self {
            Checkpoints::Every => true,
            Checkpoints::Geometric => t.is_power_of_two() || t == last,
            Checkpoints::List(ts) => ts.contains(&t) || t == last,
        }
    }
}

pub type PostStep<T> = Arc<dyn Fn(&mut [T]) + Send + Sync>;

#[derive(Clone)]
pub struct RunOptions<T> {
    pub iterations: usize,
    pub seed: u64,
    pub output_rule: OutputRule,
    pub checkpoints: Checkpoints,
    /// Stop before any step that would push the sample count past this.
    pub sample_budget: Option<u64>,
    pub record_wallclock: bool,
    /// Applied to `x` after every step, e.g. a box projection.
    pub post_step: Option<PostStep<T>>,
}

impl<T> fmt::Debug for RunOptions<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunOptions")
            .field("iterations", &self.iterations)
            .field("seed", &self.seed)
            .field("output_rule", &self.output_rule)
            .field("checkpoints", &self.checkpoints)
            .field("sample_budget", &self.sample_budget)
            .field("record_wallclock", &self.record_wallclock)
            .field("post_step", &self.post_step.is_some())
            .finish()
    }
}

impl<T> RunOptions<T> {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            output_rule: OutputRule::default(),
            checkpoints: Checkpoints::default(),
            sample_budget: None,
            record_wallclock: false,
            post_step: None,
        }
    }

    pub fn output_rule(mut self, rule: OutputRule) -> Self {
        self.output_rule = rule;
        self
    }

    pub fn checkpoints(mut self, checkpoints: Checkpoints) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn sample_budget(mut self, budget: u64) -> Self {
        self.sample_budget = Some(budget);
        self
    }

    pub fn record_wallclock(mut self, on: bool) -> Self {
        self.record_wallclock = on;
        self
    }

    pub fn post_step(mut self, hook: PostStep<T>) -> Self {
        self.post_step = Some(hook);
        self
    }
}

/// State after step `t`. Exact quantities are `None` when the problem cannot
/// evaluate them.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub t: usize,
    pub cumulative_samples: u64,
    pub j_exact: Option<T>,
    pub grad_norm_sq: Option<T>,
    pub tracking_err: Option<T>,
    pub alpha: T,
    pub beta: T,
    pub wallclock_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace<T> {
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Scalar> RunTrace<T> {
    pub fn row_at(&self, t: usize) -> Option<&TraceRow<T>> {
        self.rows.iter().find(|r| r.t == t)
    }

    pub fn last(&self) -> Option<&TraceRow<T>> {
        self.rows.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T> {
    pub x_out: Vec<T>,
    pub x_last: Vec<T>,
    pub trace: RunTrace<T>,
    pub steps: usize,
    pub total_samples: u64,
}

fn tracking_gap<T, P>(problem: &P, x: &[T], y: &[T]) -> Option<T>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    problem.exact_inner(x).map(|g| norm_sq(&sub(&g, y)))
}

enum SolverState<T> {
    CAdam(CAdamState<T>),
    Baseline(BaselineState<T>),
    Adam(AdamState<T>),
    Sgd(Vec<T>),
}

impl<T: Scalar> SolverState<T> {
    fn x(&self) -> &[T] {
        match self {
            SolverState::CAdam(s) => &s.x,
            SolverState::Baseline(s) => &s.x,
            SolverState::Adam(s) => &s.x,
            SolverState::Sgd(x) => x,
        }
    }

    fn x_mut(&mut self) -> &mut [T] {
        match self {
            SolverState::CAdam(s) => &mut s.x,
            SolverState::Baseline(s) => &mut s.x,
            SolverState::Adam(s) => &mut s.x,
            SolverState::Sgd(x) => x,
        }
    }

    fn y(&self) -> Option<&[T]> {
        match self {
            SolverState::CAdam(s) => Some(&s.y),
            SolverState::Baseline(s) => Some(&s.y),
            _ => None,
        }
    }
}

/// Gradient estimate used by the non-compositional solvers: the inner batch
/// at `x` gives both the plug-in point `ȳ` and the Jacobians.
pub(crate) fn plugin_estimate<T, P>(
    problem: &P,
    x: &[T],
    params: &StepParams<T>,
    rngs: &mut StepRngs,
) -> StepReport<T>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    let (p, q) = (problem.decision_dim(), problem.image_dim());
    let batch = problem.sample_inner(x, params.k2, &mut rngs.inner_grad);
    let y = mean_of(&batch.values, q);
    let outer = mean_of(&problem.sample_outer(&y, params.k1, &mut rngs.outer), q);
    StepReport {
        inner_value_samples: 0,
        inner_grad_samples: params.k2,
        outer_grad_samples: params.k1,
        composite_grad_estimate: mean_transpose_apply(&batch.jacobians, &outer, p),
    }
}

fn advance<T, P>(
    problem: &P,
    solver: &Solver<T>,
    state: SolverState<T>,
    params: &StepParams<T>,
    rngs: &mut StepRngs,
) -> Result<(SolverState<T>, StepReport<T>)>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    Ok(match (solver, state) {
        (Solver::CAdam(cfg), SolverState::CAdam(s)) => {
            let (s, r) = cadam_step(problem, &s, params, cfg.epsilon, rngs)?;
            (SolverState::CAdam(s), r)
        }
        (Solver::Scgd(_), SolverState::Baseline(s)) => {
            let (s, r) = scgd_step(problem, &s, params, rngs)?;
            (SolverState::Baseline(s), r)
        }
        (Solver::AscPg(_), SolverState::Baseline(s)) => {
            let (s, r) = ascpg_step(problem, &s, params, rngs)?;
            (SolverState::Baseline(s), r)
        }
        (Solver::Adam(c), SolverState::Adam(s)) => {
            let r = plugin_estimate(problem, &s.x, params, rngs);
            let s = adam_step(&s, &r.composite_grad_estimate, c.alpha, c.beta1, c.beta2, c.epsilon);
            (SolverState::Adam(s), r)
        }
        (Solver::Sgd(_), SolverState::Sgd(x)) => {
            let r = plugin_estimate(problem, &x, params, rngs);
            let x = sgd_step(&x, &r.composite_grad_estimate, params.alpha);
            (SolverState::Sgd(x), r)
        }
        _ => unreachable!("solver and state are created together"),
    })
}

/// Runs `solver` for up to `opts.iterations` steps from `x1`.
pub fn run<T, P>(
    problem: &P,
    x1: &[T],
    solver: &Solver<T>,
    opts: &RunOptions<T>,
) -> Result<RunResult<T>>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    let (p, q) = (problem.decision_dim(), problem.image_dim());
    check_dim("initial iterate", p, x1.len())?;
    if opts.iterations == 0 {
        return Err(CoreError::InvalidConfig("at least one iteration is required".into()));
    }
    if opts.output_rule == OutputRule::BestEvaluated && problem.exact_objective(x1).is_none() {
        return Err(CoreError::Unavailable("best-evaluated output needs an exact objective"));
    }
    solver.params(1)?;

    let streams = SeedStreams::new(opts.seed);
    let mut pick_rng = streams.stream(0, StreamKind::Output);
    let coupled = problem.coupled_sampling();
    let start = Instant::now();

    let mut state = match solver {
        Solver::CAdam(_) => SolverState::CAdam(CAdamState::new(x1.to_vec(), q)),
        Solver::Scgd(_) | Solver::AscPg(_) => SolverState::Baseline(BaselineState::new(x1.to_vec(), q)),
        Solver::Adam(_) => SolverState::Adam(AdamState::new(x1.to_vec())),
        Solver::Sgd(_) => SolverState::Sgd(x1.to_vec()),
    };
    let mut picked = x1.to_vec();
    let mut best: Option<(T, Vec<T>)> = None;
    let mut rows = Vec::new();
    let mut cumulative: u64 = 0;
    let mut steps = 0;

    for t in 1..=opts.iterations {
        let params = solver.params(t)?;
        if let Some(budget) = opts.sample_budget {
            if cumulative + params.samples() as u64 > budget {
                break;
            }
        }
        if t > 1 && pick_rng.random_range(0..t) == 0 {
            picked = state.x().to_vec();
        }
        let mut rngs = streams.step(t as u64, coupled);
        let (next, report) = advance(problem, solver, state, &params, &mut rngs)?;
        state = next;
        if let Some(hook) = &opts.post_step {
            hook(state.x_mut());
        }
        if !all_finite(state.x()) || !state.y().map_or(true, all_finite) {
            return Err(CoreError::NonFinite { t });
        }
        cumulative += report.total_samples() as u64;
        steps = t;

        let final_step = t == opts.iterations
            || opts
                .sample_budget
                .is_some_and(|b| solver.params(t + 1).map_or(true, |n| cumulative + n.samples() as u64 > b));
        if opts.checkpoints.contains(t, opts.iterations) || final_step {
            let x = state.x();
            let j_exact = problem.exact_objective(x);
            if opts.output_rule == OutputRule::BestEvaluated {
                if let Some(j) = j_exact {
                    if best.as_ref().is_none_or(|(b, _)| j < *b) {
                        best = Some((j, x.to_vec()));
                    }
                }
            }
            rows.push(TraceRow {
                t,
                cumulative_samples: cumulative,
                j_exact,
                grad_norm_sq: problem.exact_gradient(x).map(|g| norm_sq(&g)),
                tracking_err: state.y().and_then(|y| tracking_gap(problem, x, y)),
                alpha: params.alpha,
                beta: params.beta,
                wallclock_ns: if opts.record_wallclock {
                    start.elapsed().as_nanos() as u64
                } else {
                    0
                },
            });
        }
        if final_step {
            break;
        }
    }

    let x_last = state.x().to_vec();
    let x_out = match opts.output_rule {
        OutputRule::Uniform => picked,
        OutputRule::Last => x_last.clone(),
        OutputRule::BestEvaluated => best.map(|(_, x)| x).unwrap_or_else(|| x_last.clone()),
    };
    Ok(RunResult {
        x_out,
        x_last,
        trace: RunTrace { rows },
        steps,
        total_samples: cumulative,
    })
}

/// C-ADAM for `iterations` steps with a trace row after every step.
pub fn cadam_run<T, P>(
    problem: &P,
    x1: &[T],
    cfg: &ScheduleConfig<T>,
    iterations: usize,
    seed: u64,
    output_rule: OutputRule,
) -> Result<(Vec<T>, RunTrace<T>)>
where
    T: Scalar,
    P: CompositionalProblem<T> + ?Sized,
{
    let opts = RunOptions::new(iterations, seed)
        .output_rule(output_rule)
        .checkpoints(Checkpoints::Every);
    let res = run(problem, x1, &Solver::CAdam(*cfg), &opts)?;
    Ok((res.x_out, res.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problems::{NoiseScales, QuadCompose};

    fn quad() -> QuadCompose<f64> {
        QuadCompose::random(3, 4, NoiseScales::uniform(0.1), 9).unwrap()
    }

    #[test]
    fn single_iteration_outputs() {
        let prob = quad();
        let x1 = vec![1.0, -1.0, 0.5];
        let cfg = ScheduleConfig::default();
        let (x, trace) = cadam_run(&prob, &x1, &cfg, 1, 3, OutputRule::Uniform).unwrap();
        assert_eq!(x, x1);
        assert_eq!(trace.rows.len(), 1);
        let (x, _) = cadam_run(&prob, &x1, &cfg, 1, 3, OutputRule::Last).unwrap();
        assert_ne!(x, x1);
    }

    #[test]
    fn uniform_output_is_reproducible() {
        let prob = quad();
        let cfg = ScheduleConfig::default();
        let a = cadam_run(&prob, &[0.0; 3], &cfg, 50, 11, OutputRule::Uniform).unwrap();
        let b = cadam_run(&prob, &[0.0; 3], &cfg, 50, 11, OutputRule::Uniform).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn geometric_checkpoints() {
        let c = Checkpoints::Geometric;
        let hits: Vec<usize> = (1..=10).filter(|&t| c.contains(t, 10)).collect();
        assert_eq!(hits, vec![1, 2, 4, 8, 10]);
    }

    #[test]
    fn budget_stops_before_overrun() {
        let prob = quad();
        let opts = RunOptions::new(100, 0).sample_budget(10);
        let res = run(&prob, &[0.0; 3], &Solver::CAdam(ScheduleConfig::portfolio()), &opts).unwrap();
        assert_eq!(res.steps, 3);
        assert_eq!(res.total_samples, 9);
        assert_eq!(res.trace.last().unwrap().t, 3);
    }

    #[test]
    fn divergence_is_reported_with_its_step() {
        let prob = QuadCompose::new(Matrix::identity(1), vec![0.0], NoiseScales::none()).unwrap();
        let sgd = Solver::Sgd(SgdConfig {
            c_alpha: 1e200,
            ..SgdConfig::default()
        });
        let err = run(&prob, &[1.0], &sgd, &RunOptions::new(10, 0)).unwrap_err();
        assert!(matches!(err, CoreError::NonFinite { t } if t <= 3));
    }

    #[test]
    fn best_evaluated_requires_exact_objective() {
        use crate::problems::{IdentityProblem, OuterOracle};
        struct Opaque;
        impl OuterOracle<f64> for Opaque {
            fn dim(&self) -> usize {
                1
            }
            fn sample_gradient(&self, y: &[f64], k: usize, _: &mut crate::rng::OracleRng) -> Vec<Vec<f64>> {
                vec![y.to_vec(); k]
            }
        }
        let prob = IdentityProblem::new(Box::new(Opaque));
        let opts = RunOptions::new(3, 0).output_rule(OutputRule::BestEvaluated);
        let err = run(&prob, &[1.0], &Solver::CAdam(ScheduleConfig::default()), &opts).unwrap_err();
        assert!(matches!(err, CoreError::Unavailable(_)));
    }

    #[test]
    fn post_step_hook_clips() {
        let prob = quad();
        let hook: PostStep<f64> = Arc::new(|x: &mut [f64]| x.iter_mut().for_each(|v| *v = v.clamp(-0.01, 0.01)));
        let solver = Solver::Sgd(SgdConfig {
            c_alpha: 1.0,
            ..SgdConfig::default()
        });
        let opts = RunOptions::new(20, 0).post_step(hook).output_rule(OutputRule::Last);
        let res = run(&prob, &[0.0; 3], &solver, &opts).unwrap();
        assert!(res.x_last.iter().all(|v| v.abs() <= 0.01));
    }
}
