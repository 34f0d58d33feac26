//! Sinusoid regression tasks `u ↦ a sin(u + b)`.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::rng::OracleRng;
use crate::scalar::Scalar;

pub const AMPLITUDE_RANGE: (f64, f64) = (0.1, 5.0);
pub const PHASE_RANGE: (f64, f64) = (0.0, 2.0 * PI);
pub const INPUT_RANGE: (f64, f64) = (-5.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineTask<T> {
    pub amplitude: T,
    pub phase: T,
}

impl<T: Scalar> SineTask<T> {
    pub fn new(amplitude: T, phase: T) -> Result<Self> {
        let a = amplitude.as_f64();
        let b = phase.as_f64();
        if !(AMPLITUDE_RANGE.0..=AMPLITUDE_RANGE.1).contains(&a) {
            return Err(CoreError::InvalidParams(format!("amplitude {a} outside [0.1, 5]")));
        }
        if !(PHASE_RANGE.0..=PHASE_RANGE.1).contains(&b) {
            return Err(CoreError::InvalidParams(format!("phase {b} outside [0, 2π]")));
        }
        Ok(Self { amplitude, phase })
    }

    pub fn sample(rng: &mut OracleRng) -> Self {
        Self {
            amplitude: T::lit(rng.random_range(AMPLITUDE_RANGE.0..=AMPLITUDE_RANGE.1)),
            phase: T::lit(rng.random_range(PHASE_RANGE.0..=PHASE_RANGE.1)),
        }
    }

    pub fn eval(&self, u: T) -> T {
        self.amplitude * (u + self.phase).sin()
    }

    /// `m` inputs uniform on `[−5, 5]` with exact targets.
    pub fn batch(&self, m: usize, rng: &mut OracleRng) -> TaskBatch<T> {
        let inputs: Vec<T> = (0..m)
            .map(|_| T::lit(rng.random_range(INPUT_RANGE.0..=INPUT_RANGE.1)))
            .collect();
        self.batch_at(inputs)
    }

    pub fn batch_at(&self, inputs: Vec<T>) -> TaskBatch<T> {
        let targets = inputs.iter().map(|&u| self.eval(u)).collect();
        TaskBatch {
            task: *self,
            inputs,
            targets,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskBatch<T> {
    pub task: SineTask<T>,
    pub inputs: Vec<T>,
    pub targets: Vec<T>,
}

impl<T> TaskBatch<T> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn batches_hit_their_task_exactly() {
        let mut rng = OracleRng::seed_from_u64(4);
        for _ in 0..20 {
            let task = SineTask::<f64>::sample(&mut rng);
            assert!((0.1..=5.0).contains(&task.amplitude));
            assert!((0.0..=2.0 * PI).contains(&task.phase));
            let b = task.batch(10, &mut rng);
            assert_eq!(b.len(), 10);
            for (u, t) in b.inputs.iter().zip(&b.targets) {
                assert!((-5.0..=5.0).contains(u));
                assert_eq!(*t, task.amplitude * (u + task.phase).sin());
            }
        }
    }

    #[test]
    fn rejects_out_of_range_tasks() {
        assert!(SineTask::new(0.05, 1.0).is_err());
        assert!(SineTask::new(1.0, 7.0).is_err());
        assert!(SineTask::new(5.0, 0.0).is_ok());
    }
}
