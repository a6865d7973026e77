//! Desk-scale laboratory for training-set property inference against GANs.

pub mod attack;
pub mod classifier;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gan;
pub mod membership;
pub mod nn;
pub mod seeds;

pub use attack::{AttackReport, LatentCodeSet, ShadowEnsemble};
pub use classifier::PropertyClassifier;
pub use data::{AttributeSpec, DomainTag, LabeledDataset, PropertyDistribution, SplitPlan};
pub use error::{CoreError, Result};
pub use gan::{GanConfig, GanLoss, LatentPrior, TrainedGan};
pub use membership::{MiaConfig, MiaScore};
pub use nn::{Activation, DenseNetwork, DenseNetworkSpec, OptimizerConfig, ValueGraph};
