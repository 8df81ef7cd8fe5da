//! Neural classifiers producing per-class membership scores, their training,
//! evaluation and the portable model file.

mod cnn;
mod metrics;
mod mlp;
mod model_file;
mod network;
mod train;

pub use cnn::{CnnConfig, CnnModel};
pub use metrics::{evaluate, Metrics, HEALTHY_CLASS};
pub use mlp::{MlpModel, DEFAULT_HIDDEN};
pub use model_file::{Architecture, Model, ModelBundle, ModelHeader, TrainingProvenance, FORMAT_VERSION, MAGIC};
pub use network::{batch_gradient, batch_loss, softmax, MembershipVector, Network};
pub use train::{gradient_check, train, GradientCheck, TrainConfig, TrainReport, GRADCHECK_MIN_PARAMS, GRADCHECK_STEP};
