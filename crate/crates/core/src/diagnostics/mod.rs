//! Numeric checks of regularity constants, tracking-error envelopes and
//! decay rates.

mod constants;
mod decay;
mod gradcheck;
mod power;
mod recursions;
mod tracking;

pub use constants::{estimate_constants, ConstantEstimator};
pub use decay::{decay_exponent_fit, loglog_slope, mean_tracking_error};
pub use gradcheck::{finite_difference_gradient, max_relative_error};
pub use power::{certify_power_recursion, PowerCertificate, PowerRecursionConfig};
pub use recursions::{envelope_burn_in, theta_coefficients, tracking_bound_recursions, BoundState};
pub use tracking::{tracking_error, tracking_error_at};
