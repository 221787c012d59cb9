//! Numeric layer: GRU cells, the sequence autoencoder, Adam and training.

pub mod adam;
pub mod autoencoder;
pub mod gradcheck;
pub mod gru;
pub mod linalg;
pub mod rng;
pub mod train;

pub use autoencoder::{mse, Architecture, AutoencoderModel, TrainingMeta, Variant};
pub use gradcheck::{numeric_gradient_check, GradCheckReport};
pub use gru::{gru_cell_forward, GruLayerParams};
pub use train::{train_autoencoder, train_with_progress, StopReason, TrainConfig, TrainReport};
