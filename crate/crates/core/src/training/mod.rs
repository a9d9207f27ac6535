//! Losses, optimizers, the training loop, grid search and checkpoints.

mod checkpoint;
mod fit;
mod grid;
mod loss;
mod optim;

pub use checkpoint::{load_checkpoint, load_checkpoint_as, save_checkpoint, Checkpoint, MAGIC, VERSION};
pub use fit::{fit, init_model, AlsParams, FitOutput, ModelTrainer, TrainConfig, Trainer};
pub use fit::new_sampler;
pub use grid::{grid_search, GridCell, GridResult, GridSpec};
pub use loss::{bce_with_logits, bpr, sigmoid, softplus, LossKind};
pub use optim::{Optimizer, OptimizerKind};
