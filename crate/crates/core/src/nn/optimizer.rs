//! Parameter update rules: plain SGD and Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_stability: f64,
    pub batch_size: usize,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            beta1: 0.0,
            beta2: 0.0,
            epsilon_stability: 1e-8,
            batch_size: 100,
        }
    }

    pub fn adam(learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1,
            beta2,
            epsilon_stability: 1e-8,
            batch_size: 100,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(CoreError::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(self.epsilon_stability > 0.0) {
            return Err(CoreError::InvalidConfig(
                "epsilon_stability must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(CoreError::InvalidConfig(
                "beta1 and beta2 must be in [0,1)".into(),
            ));
        }
        if self.kind == OptimizerKind::Adam && !(self.beta1 < self.beta2) {
            return Err(CoreError::InvalidConfig(format!(
                "adam requires beta1 < beta2 < 1, got beta1={} beta2={}",
                self.beta1, self.beta2
            )));
        }
        Ok(())
    }
}

/// Optimizer state for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct ParamOptimizer {
    config: OptimizerConfig,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl ParamOptimizer {
    pub fn new(config: OptimizerConfig, tensor_sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        let first_moment = tensor_sizes.iter().map(|&n| vec![0.0; n]).collect();
        let second_moment = tensor_sizes.iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            config,
            step_count: 0,
            first_moment,
            second_moment,
        })
    }

    pub fn for_params(config: OptimizerConfig, params: &[Vec<f64>]) -> Result<Self> {
        let sizes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(config, &sizes)
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Override the learning rate, e.g. for a decay schedule.
    pub fn set_learning_rate(&mut self, learning_rate: f64) {
        self.config.learning_rate = learning_rate;
    }

    /// Apply one update in place. A non-finite gradient aborts the step and
    /// leaves both parameters and optimizer state untouched.
    pub fn step(&mut self, params: &mut [Vec<f64>], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(CoreError::ShapeMismatch {
                context: "optimizer tensor count".into(),
                expected: self.first_moment.len(),
                found: params.len().min(grads.len()),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(CoreError::ShapeMismatch {
                    context: format!("optimizer tensor {i}"),
                    expected: p.len(),
                    found: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::NonFinite(format!("gradient tensor {i}")));
            }
        }
        match self.config.kind {
            OptimizerKind::Sgd => {
                let lr = self.config.learning_rate;
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.iter_mut().zip(g) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                self.step_count += 1;
                let t = self.step_count as i32;
                let b1 = self.config.beta1;
                let b2 = self.config.beta2;
                let lr = self.config.learning_rate;
                let eps = self.config.epsilon_stability;
                let bc1 = 1.0 - b1.powi(t);
                let bc2 = 1.0 - b2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first_moment.iter_mut().zip(&mut self.second_moment))
                {
                    for i in 0..p.len() {
                        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_update_is_exact() {
        let cfg = OptimizerConfig::sgd(0.1);
        let mut opt = ParamOptimizer::new(cfg, &[1]).unwrap();
        let mut params = vec![vec![1.0]];
        opt.step(&mut params, &[vec![2.0]]).unwrap();
        assert_eq!(params[0][0], 1.0 - 0.1 * 2.0);
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let cfg = OptimizerConfig::adam(0.001, 0.9, 0.999);
        let mut opt = ParamOptimizer::new(cfg, &[3]).unwrap();
        let mut params = vec![vec![0.5, -0.25, 2.0]];
        let before = params.clone();
        opt.step(&mut params, &[vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn adam_single_step_matches_scripted_recurrence() {
        // Standalone transcription of the Adam update for one step on
        // gradient 1.0 from parameter 0.0.
        let (alpha, b1, b2, eps) = (0.001, 0.5, 0.99, 1e-8);
        let g: f64 = 1.0;
        let m = (1.0 - b1) * g;
        let v = (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1);
        let v_hat: f64 = v / (1.0 - b2);
        let expected = 0.0 - alpha * m_hat / (v_hat.sqrt() + eps);

        let mut cfg = OptimizerConfig::adam(alpha, b1, b2);
        cfg.epsilon_stability = eps;
        let mut opt = ParamOptimizer::new(cfg, &[1]).unwrap();
        let mut params = vec![vec![0.0]];
        opt.step(&mut params, &[vec![g]]).unwrap();
        assert!((params[0][0] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_three_steps_match_scripted_recurrence() {
        let (alpha, b1, b2, eps) = (0.01, 0.5, 0.99, 1e-8);
        let grads = [1.0, -0.5, 0.25];

        let mut p_ref: f64 = 0.3;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (t, g) in grads.iter().enumerate() {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t as i32 + 1));
            let v_hat = v / (1.0 - b2.powi(t as i32 + 1));
            p_ref -= alpha * m_hat / (v_hat.sqrt() + eps);
        }

        let mut cfg = OptimizerConfig::adam(alpha, b1, b2);
        cfg.epsilon_stability = eps;
        let mut opt = ParamOptimizer::new(cfg, &[1]).unwrap();
        let mut params = vec![vec![0.3]];
        for g in grads {
            opt.step(&mut params, &[vec![g]]).unwrap();
        }
        assert!((params[0][0] - p_ref).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts_step() {
        let cfg = OptimizerConfig::sgd(0.1);
        let mut opt = ParamOptimizer::new(cfg, &[2]).unwrap();
        let mut params = vec![vec![1.0, 2.0]];
        let before = params.clone();
        let err = opt.step(&mut params, &[vec![f64::NAN, 1.0]]);
        assert!(matches!(err, Err(CoreError::NonFinite(_))));
        assert_eq!(params, before);
    }

    #[test]
    fn adam_requires_ordered_betas() {
        assert!(OptimizerConfig::adam(0.001, 0.99, 0.9).validate().is_err());
        assert!(OptimizerConfig::adam(0.001, 0.5, 0.999).validate().is_ok());
    }
}
