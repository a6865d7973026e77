//! Minimal differentiable computation and optimization substrate.
//!
//! Everything else in the crate runs on these pieces: a reusable reverse-mode
//! tape ([`ValueGraph`]), dense networks with deterministic initialization and
//! versioned JSON weight serialization, and SGD/Adam parameter updates.

pub mod activation;
pub mod graph;
pub mod network;
pub mod optimizer;

pub use activation::Activation;
pub use graph::{NodeId, ValueGraph};
pub use network::{BoundNetwork, DenseLayer, DenseNetwork, DenseNetworkSpec};
pub use optimizer::{OptimizerConfig, OptimizerKind, ParamOptimizer};
