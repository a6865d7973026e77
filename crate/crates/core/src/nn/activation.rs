//! Activation functions used by dense networks.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    /// Leaky rectifier with the given negative-side slope, in (0, 1).
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    /// Only allowed as the final activation of a network.
    Softmax,
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        if let Activation::LeakyRelu(slope) = self {
            if !(*slope > 0.0 && *slope < 1.0) {
                return Err(CoreError::InvalidConfig(format!(
                    "leaky relu slope must be in (0,1), got {slope}"
                )));
            }
        }
        Ok(())
    }

    /// Scalar forward application (softmax is handled vector-wise elsewhere).
    pub fn apply_scalar(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => super::graph::sigmoid(x),
            Activation::Softmax => panic!("softmax is not a scalar activation"),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Activation::Identity => write!(f, "identity"),
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu(s) => write!(f, "leaky_relu({s})"),
            Activation::Tanh => write!(f, "tanh"),
            Activation::Sigmoid => write!(f, "sigmoid"),
            Activation::Softmax => write!(f, "softmax"),
        }
    }
}
