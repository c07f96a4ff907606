//! Tanh multilayer perceptrons regressing reduced coefficients.

mod mlp;
mod optim;
mod scheduler;
mod sizing;
mod train;

pub use mlp::{loss_and_grad, AffineNorm, Mlp};
pub use optim::{AdamW, AdamWConfig};
pub use scheduler::{PlateauConfig, ReduceLrOnPlateau};
pub use sizing::{size_apriori, SizingConfig};
pub use train::{predict_coeffs, train, StopReason, TrainConfig, TrainHistory};
