//! Small convolutional classifier over image stacks, written without a
//! deep-learning framework: forward/backward passes, Adam and RMSprop,
//! a mini-batch training loop and exact input gradients.

pub mod config;
pub mod network;
pub mod optim;
pub mod train;

pub use config::{default_input_shape, NetworkConfig, OptimizerKind, Pool};
pub use network::{Layer, Mode, Network};
pub use train::{accuracy_on, bce_with_logit, train, EpochStats, TrainOptions, TrainReport};
