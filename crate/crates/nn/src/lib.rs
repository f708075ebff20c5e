//! Residual 3D convolutional classifier for radar cubes, with focal loss,
//! SGD training and a binary checkpoint format.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod network;
pub mod tensor;
pub mod train;

pub use error::NnError;
pub use network::{Network, NetworkConfig, Sample};
