//! Compositional MAML on sinusoid regression.

mod maml;
mod mlp;
mod sine;
mod train;

pub use maml::{batch_grad, batch_hvp, batch_loss, DataMode, LossReduction, MamlJacobian, MamlProblem};
pub use mlp::{fd_hvp, Activation, Architecture, Mlp};
pub use sine::{SineTask, TaskBatch, AMPLITUDE_RANGE, INPUT_RANGE, PHASE_RANGE};
pub use train::{fine_tune_eval, train_meta, FineTune, MetaTrainConfig, MetaTrainLog};
