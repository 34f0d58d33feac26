//! Step-size, averaging and batch-size schedules for C-ADAM.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Constants and exponents of the polynomial schedule
///
/// `α_t = C_α / t^a`, `β_t = C_β / t^b`, `K^{(1,2)}_t = ⌈C_{1,2} t^c⌉`,
/// `K^{(3)}_t = ⌈C_3 t^e⌉`, `γ¹_t = C_γ μ^t`,
/// `γ²_t = 1 − (C_α / t^{2a}) (1 − C_γ μ^t)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig<T> {
    pub c_alpha: T,
    pub c_beta: T,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c_gamma: T,
    pub mu: T,
    pub epsilon: T,
    pub a: T,
    pub b: T,
    pub c: T,
    pub e: T,
}

impl<T: Scalar> Default for ScheduleConfig<T> {
    /// Rate-optimal exponents `a = 1/5, b = 0, c = e = 4/5` with unit batch constants.
    fn default() -> Self {
        Self {
            c_alpha: T::lit(0.01),
            c_beta: T::lit(0.01),
            c1: T::one(),
            c2: T::one(),
            c3: T::one(),
            c_gamma: T::one(),
            mu: T::lit(0.9),
            epsilon: T::lit(1e-8),
            a: T::lit(0.2),
            b: T::zero(),
            c: T::lit(0.8),
            e: T::lit(0.8),
        }
    }
}

impl<T: Scalar> ScheduleConfig<T> {
    /// Portfolio experiments: `C_α = C_β = 0.01`, constant unit batches, `C_γ = 1`.
    pub fn portfolio() -> Self {
        Self {
            c: T::zero(),
            e: T::zero(),
            ..Self::default()
        }
    }

    /// Sine-regression meta-learning: `C_α = 0.001`, `C_β = 0.99`, constant batches of 10, `C_γ = 1`.
    pub fn maml() -> Self {
        Self {
            c_alpha: T::lit(0.001),
            c_beta: T::lit(0.99),
            c1: T::lit(10.0),
            c2: T::lit(10.0),
            c3: T::lit(10.0),
            c: T::zero(),
            e: T::zero(),
            ..Self::default()
        }
    }

    /// Same schedule with every batch constant set to `k` and batch growth switched off.
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
        let positive = [
            ("C_alpha", self.c_alpha),
            ("C_beta", self.c_beta),
            ("C_1", self.c1),
            ("C_2", self.c2),
            ("C_3", self.c3),
            ("C_gamma", self.c_gamma),
            ("mu", self.mu),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(CoreError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("e", self.e)] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(CoreError::InvalidConfig(format!(
                    "exponent {name} must be nonnegative, got {v}"
                )));
            }
        }
        if self.c_beta > T::one() {
            return Err(CoreError::InvalidConfig(format!(
                "C_beta must lie in (0, 1], got {}",
                self.c_beta
            )));
        }
        if self.mu >= T::one() {
            return Err(CoreError::InvalidConfig(format!("mu must lie in (0, 1), got {}", self.mu)));
        }
        if self.c_gamma > T::one() {
            return Err(CoreError::InvalidConfig(format!(
                "C_gamma must lie in (0, 1], got {}",
                self.c_gamma
            )));
        }
        Ok(())
    }

    /// Exponent condition under which the tracking error provably decays:
    /// `2a − 2b ∉ [−1, 0]` and `b ≤ 1`.
    pub fn tracking_decay_feasible(&self) -> bool {
        let d = T::lit(2.0) * (self.a - self.b);
        !(d >= -T::one() && d <= T::zero()) && self.b <= T::one()
    }

    /// Guaranteed decay exponent of the tracking error, `min(4a − 4b, b + e)`.
    pub fn tracking_decay_exponent(&self) -> T {
        let four = T::lit(4.0);
        (four * (self.a - self.b)).min(self.b + self.e)
    }

    /// Evaluates the schedule at iteration `t ≥ 1`.
    pub fn at(&self, t: usize) -> Result<StepParams<T>> {
        self.validate()?;
        if t == 0 {
            return Err(CoreError::InvalidConfig("iterations are numbered from 1".into()));
        }
        let tt = T::from_count(t);
        let alpha = self.c_alpha / tt.powf(self.a);
        let beta = self.c_beta / tt.powf(self.b);
        let mu_t = self.mu.powf(tt);
        let gamma1 = self.c_gamma * mu_t;
        let shrink = T::one() - self.c_gamma * mu_t;
        let raw_gamma2 = T::one() - self.c_alpha / tt.powf(T::lit(2.0) * self.a) * shrink * shrink;
        let upper = T::one() - T::lit(1e-12).max(T::epsilon());
        let gamma2 = raw_gamma2.max(T::zero()).min(upper);
        Ok(StepParams {
            alpha,
            beta,
            k1: batch_size(self.c1.as_f64(), t, self.c.as_f64()),
            k2: batch_size(self.c2.as_f64(), t, self.c.as_f64()),
            k3: batch_size(self.c3.as_f64(), t, self.e.as_f64()),
            gamma1,
            gamma2,
        })
    }
}

/// `⌈C t^p⌉`, with values within 1e-9 (relative) of an integer snapped to it so
/// that exact powers such as `32^{4/5} = 16` are not pushed up by rounding noise.
pub fn batch_size(constant: f64, t: usize, exponent: f64) -> usize {
    let raw = constant * (t as f64).powf(exponent);
    let nearest = raw.round();
    let k = if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    (k as usize).max(1)
}

/// Evaluated per-iteration parameters consumed by one solver step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams<T> {
    pub alpha: T,
    pub beta: T,
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub gamma1: T,
    pub gamma2: T,
}

impl<T: Scalar> StepParams<T> {
    pub fn samples(&self) -> usize {
        self.k1 + self.k2 + self.k3
    }
}

/// Regularity constants of a compositional problem.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProblemConstants<T> {
    /// Bound on `|f_ν|`.
    pub b_f: T,
    /// Bound on `‖∇f_ν‖`.
    pub m_f: T,
    /// Lipschitz constant of `g_ω`.
    pub m_g: T,
    /// Smoothness of `f_ν`.
    pub l_f: T,
    /// Smoothness of `g_ω`.
    pub l_g: T,
    pub sigma1_sq: T,
    pub sigma2_sq: T,
    pub sigma3_sq: T,
}

impl<T: Scalar> ProblemConstants<T> {
    /// Smoothness constant of the composite objective.
    pub fn smoothness(&self) -> T {
        lipschitz_composition_constant(self.m_g, self.l_f, self.l_g, self.m_f)
    }
}

/// Smoothness of `J = f ∘ g`: `M_g² L_f + L_g M_f`.
pub fn lipschitz_composition_constant<T: Scalar>(m_g: T, l_f: T, l_g: T, m_f: T) -> T {
    m_g * m_g * l_f + l_g * m_f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cfg() -> ScheduleConfig<f64> {
        ScheduleConfig {
            c_alpha: 0.01,
            c_beta: 0.01,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c_gamma: 1.0,
            mu: 0.9,
            ..ScheduleConfig::default()
        }
    }

    #[test]
    fn first_iteration_values() {
        let p = unit_cfg().at(1).unwrap();
        assert_eq!(p.alpha, 0.01);
        assert_eq!(p.beta, 0.01);
        assert_eq!((p.k1, p.k2, p.k3), (1, 1, 1));
        assert!((p.gamma1 - 0.9).abs() < 1e-15);
    }

    #[test]
    fn exact_powers_at_t32() {
        let cfg = ScheduleConfig {
            c_alpha: 1.0,
            ..unit_cfg()
        };
        let p = cfg.at(32).unwrap();
        assert!((p.alpha - 0.5).abs() < 1e-15);
        assert_eq!(p.k1, 16);
        assert_eq!(p.k3, 16);
    }

    #[test]
    fn gamma2_is_clamped() {
        let cfg = ScheduleConfig {
            c_alpha: 50.0,
            mu: 0.01,
            ..unit_cfg()
        };
        let p = cfg.at(1).unwrap();
        assert_eq!(p.gamma2, 0.0);
        let cfg = ScheduleConfig {
            c_alpha: 1e-30,
            ..unit_cfg()
        };
        assert!(cfg.at(1).unwrap().gamma2 < 1.0);
    }

    #[test]
    fn rejects_bad_constants() {
        for bad in [
            ScheduleConfig { mu: 1.0, ..unit_cfg() },
            ScheduleConfig { mu: 0.0, ..unit_cfg() },
            ScheduleConfig { c_alpha: -1.0, ..unit_cfg() },
            ScheduleConfig { c_beta: 1.5, ..unit_cfg() },
            ScheduleConfig { c3: 0.0, ..unit_cfg() },
        ] {
            assert!(matches!(bad.at(1), Err(CoreError::InvalidConfig(_))));
        }
        assert!(unit_cfg().at(0).is_err());
    }

    #[test]
    fn lipschitz_constant_examples() {
        assert_eq!(lipschitz_composition_constant(2.0, 3.0, 1.0, 4.0), 16.0);
        assert_eq!(lipschitz_composition_constant(0.0, 3.0, 0.0, 4.0), 0.0);
        assert_eq!(lipschitz_composition_constant(1.0, 1.0, 1.0, 1.0), 2.0);
    }

    #[test]
    fn default_exponents_are_feasible() {
        let cfg = ScheduleConfig::<f64>::default();
        assert!(cfg.tracking_decay_feasible());
        assert!((cfg.tracking_decay_exponent() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let p = ScheduleConfig::<f32>::default().at(10).unwrap();
        assert!(p.gamma2 < 1.0 && p.gamma2 > 0.0);
    }
}
