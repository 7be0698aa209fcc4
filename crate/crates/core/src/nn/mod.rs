//! Dense feed-forward ReLU networks with exact reverse-mode gradients, and
//! the Adam optimizer that trains them.
//!
//! Both the conditional generator and the discriminator are [`DenseNet`]s.
//! Everything is `f64`; batches are row-major `n x dim` matrices.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::NetworkCheckpoint;
pub use network::{DenseNet, ForwardCache, GradientBundle, NetworkSpec, OutputActivation};
