//! Multi-label problem extraction: a one-hidden-layer perceptron with an
//! independent sigmoid per label, trained on binary cross-entropy.

mod model;
mod train;

pub use model::{load_model, save_model, sigmoid, Activation, Example, Gradients, MlpModel, LOSS_CLAMP};
pub use train::{evaluate_examples, predict_sets, train, GridEntry, GridReport, Optimizer, TrainConfig};
