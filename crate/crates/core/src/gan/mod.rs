//! Generator/discriminator training and the two query surfaces an attacker
//! can reach: blind sampling and caller-supplied latent codes.
//!
//! The discriminator never leaves this module; everything downstream works
//! against [`BlindSampler`] / [`LatentSampler`] or the generator network.

mod train;

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::nn::{Activation, DenseNetwork, DenseNetworkSpec, OptimizerConfig};
use crate::seeds::rng_from;

pub use train::train_gan;

/// Latent code prior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentPriorKind {
    GaussianStandard,
    UniformPm1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentPrior {
    pub kind: LatentPriorKind,
    pub dim: usize,
}

impl LatentPrior {
    pub fn gaussian(dim: usize) -> Self {
        Self {
            kind: LatentPriorKind::GaussianStandard,
            dim,
        }
    }

    pub fn uniform(dim: usize) -> Self {
        Self {
            kind: LatentPriorKind::UniformPm1,
            dim,
        }
    }

    /// Draw `n` codes, consuming the RNG one full code at a time.
    pub fn draw(&self, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| match self.kind {
                LatentPriorKind::GaussianStandard => (0..self.dim)
                    .map(|_| StandardNormal.sample(rng))
                    .collect(),
                LatentPriorKind::UniformPm1 => {
                    (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
                }
            })
            .collect()
    }

    /// Seeded draw; this is exactly the stream blind sampling consumes, so
    /// feeding the result through the generator reproduces blind samples.
    pub fn draw_seeded(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.draw(n, &mut rng_from(seed))
    }
}

/// Loss family for adversarial training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanLoss {
    /// Log-loss two-player game; sigmoid discriminator head.
    Minimax,
    /// Wasserstein critic with gradient penalty; identity critic head.
    WganGp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub generator: DenseNetworkSpec,
    pub discriminator: DenseNetworkSpec,
    pub prior: LatentPrior,
    pub loss: GanLoss,
    /// Gradient penalty coefficient; ignored for minimax.
    pub gp_lambda: f64,
    /// Discriminator updates per generator update.
    pub n_critic: usize,
    pub batch_size: usize,
    pub gen_opt: OptimizerConfig,
    pub disc_opt: OptimizerConfig,
    pub train_steps: usize,
    /// Decay both learning rates linearly to zero over the training run.
    /// Tames the end-of-training oscillation of small adversarial pairs.
    #[serde(default)]
    pub lr_decay: bool,
    /// Master seed; per-component streams (init, batch order, latent draws,
    /// penalty interpolation) are derived from it.
    pub seed: u64,
}

impl GanConfig {
    /// Wasserstein-with-penalty defaults: lambda 10, 3 critic iterations,
    /// batch 100, Adam(2e-4, 0.9, 0.999), hidden widths 64.
    pub fn wgan_gp(sample_dim: usize, seed: u64) -> Self {
        let latent = 16;
        let generator = DenseNetworkSpec::new(
            vec![latent, 64, 64, sample_dim],
            vec![
                Activation::LeakyRelu(0.2),
                Activation::LeakyRelu(0.2),
                Activation::Tanh,
            ],
            0,
        )
        .unwrap();
        let discriminator = DenseNetworkSpec::new(
            vec![sample_dim, 64, 64, 1],
            vec![
                Activation::LeakyRelu(0.2),
                Activation::LeakyRelu(0.2),
                Activation::Identity,
            ],
            0,
        )
        .unwrap();
        Self {
            generator,
            discriminator,
            prior: LatentPrior::gaussian(latent),
            loss: GanLoss::WganGp,
            gp_lambda: 10.0,
            n_critic: 3,
            batch_size: 100,
            gen_opt: OptimizerConfig::adam(2e-4, 0.9, 0.999),
            disc_opt: OptimizerConfig::adam(2e-4, 0.9, 0.999),
            train_steps: 2000,
            lr_decay: false,
            seed,
        }
    }

    /// Log-loss defaults: single critic iteration, batch 100,
    /// Adam(2e-4, 0.5, 0.999), sigmoid discriminator head.
    pub fn minimax(sample_dim: usize, seed: u64) -> Self {
        let mut cfg = Self::wgan_gp(sample_dim, seed);
        cfg.loss = GanLoss::Minimax;
        cfg.gp_lambda = 0.0;
        cfg.n_critic = 1;
        cfg.gen_opt = OptimizerConfig::adam(2e-4, 0.5, 0.999);
        cfg.disc_opt = OptimizerConfig::adam(2e-4, 0.5, 0.999);
        let n = cfg.discriminator.activations.len();
        cfg.discriminator.activations[n - 1] = Activation::Sigmoid;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.gen_opt.validate()?;
        self.disc_opt.validate()?;
        if self.prior.dim != self.generator.input_dim() {
            return Err(CoreError::ShapeMismatch {
                context: "prior dim vs generator input".into(),
                expected: self.generator.input_dim(),
                found: self.prior.dim,
            });
        }
        if self.generator.output_dim() != self.discriminator.input_dim() {
            return Err(CoreError::ShapeMismatch {
                context: "generator output vs discriminator input".into(),
                expected: self.discriminator.input_dim(),
                found: self.generator.output_dim(),
            });
        }
        if self.discriminator.output_dim() != 1 {
            return Err(CoreError::InvalidConfig(
                "discriminator must have scalar output".into(),
            ));
        }
        if self.batch_size == 0 || self.n_critic == 0 {
            return Err(CoreError::InvalidConfig(
                "batch_size and n_critic must be >= 1".into(),
            ));
        }
        match self.loss {
            GanLoss::WganGp => {
                if !(self.gp_lambda > 0.0) {
                    return Err(CoreError::InvalidConfig(
                        "wgan_gp requires gp_lambda > 0".into(),
                    ));
                }
                if self.discriminator.final_activation() != Activation::Identity {
                    return Err(CoreError::InvalidConfig(
                        "wgan_gp requires an identity discriminator head".into(),
                    ));
                }
            }
            GanLoss::Minimax => {
                if self.discriminator.final_activation() != Activation::Sigmoid {
                    return Err(CoreError::InvalidConfig(
                        "minimax requires a sigmoid discriminator head".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One generator-iteration record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogEntry {
    pub step: usize,
    pub disc_loss: f64,
    pub gen_loss: f64,
    pub gp_term: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub entries: Vec<TrainingLogEntry>,
    /// Set when training halted early (non-finite loss or gradient).
    pub failure: Option<String>,
}

impl TrainingLog {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// A trained generator/discriminator pair. The discriminator stays private:
/// consumers see only the generator and the sampling surfaces.
#[derive(Clone, Debug)]
pub struct TrainedGan {
    generator: DenseNetwork,
    discriminator: DenseNetwork,
    config: GanConfig,
    log: TrainingLog,
}

impl TrainedGan {
    pub(crate) fn new(
        generator: DenseNetwork,
        discriminator: DenseNetwork,
        config: GanConfig,
        log: TrainingLog,
    ) -> Self {
        Self {
            generator,
            discriminator,
            config,
            log,
        }
    }

    pub fn generator(&self) -> &DenseNetwork {
        &self.generator
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn latent_prior(&self) -> LatentPrior {
        self.config.prior
    }

    /// Persist as a directory: weight JSON per network, config JSON, and the
    /// training log as CSV.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.generator.save(&dir.join("generator.json"))?;
        self.discriminator.save(&dir.join("discriminator.json"))?;
        std::fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(&self.config)?,
        )?;
        let mut writer = csv::Writer::from_path(dir.join("training_log.csv"))?;
        writer.write_record(["step", "disc_loss", "gen_loss", "gp_term"])?;
        for e in &self.log.entries {
            writer.write_record([
                e.step.to_string(),
                e.disc_loss.to_string(),
                e.gen_loss.to_string(),
                e.gp_term.to_string(),
            ])?;
        }
        writer.flush()?;
        if let Some(failure) = &self.log.failure {
            std::fs::write(dir.join("FAILED"), failure)?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let generator = DenseNetwork::load(&dir.join("generator.json"))?;
        let discriminator = DenseNetwork::load(&dir.join("discriminator.json"))?;
        let config: GanConfig =
            serde_json::from_str(&std::fs::read_to_string(dir.join("config.json"))?)?;
        config.validate()?;
        let mut log = TrainingLog::default();
        let log_path = dir.join("training_log.csv");
        if log_path.exists() {
            let mut reader = csv::Reader::from_path(log_path)?;
            for record in reader.records() {
                let r = record?;
                log.entries.push(TrainingLogEntry {
                    step: r[0].parse().unwrap_or(0),
                    disc_loss: r[1].parse().unwrap_or(f64::NAN),
                    gen_loss: r[2].parse().unwrap_or(f64::NAN),
                    gp_term: r[3].parse().unwrap_or(f64::NAN),
                });
            }
        }
        let failed_path = dir.join("FAILED");
        if failed_path.exists() {
            log.failure = Some(std::fs::read_to_string(failed_path)?);
        }
        Ok(Self {
            generator,
            discriminator,
            config,
            log,
        })
    }
}

/// Blind sampling surface: the caller gets samples, never the latent codes.
pub trait BlindSampler: Sync {
    fn sample_dim(&self) -> usize;
    fn sample_blind(&self, n: usize, seed: u64) -> Vec<Vec<f64>>;
}

/// Code-accepting surface: the caller chooses latent codes but sees no
/// parameters.
pub trait LatentSampler: Sync {
    fn latent_dim(&self) -> usize;
    fn generate_from(&self, codes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

impl BlindSampler for TrainedGan {
    fn sample_dim(&self) -> usize {
        self.generator.output_dim()
    }

    fn sample_blind(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let codes = self.config.prior.draw_seeded(n, seed);
        codes
            .iter()
            .map(|z| self.generator.forward(z).expect("prior dim matches"))
            .collect()
    }
}

impl LatentSampler for TrainedGan {
    fn latent_dim(&self) -> usize {
        self.config.prior.dim
    }

    fn generate_from(&self, codes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        codes.iter().map(|z| self.generator.forward(z)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ValueGraph;

    fn tiny_config(seed: u64) -> GanConfig {
        let mut cfg = GanConfig::wgan_gp(2, seed);
        cfg.generator = DenseNetworkSpec::new(
            vec![4, 8, 2],
            vec![Activation::LeakyRelu(0.2), Activation::Tanh],
            0,
        )
        .unwrap();
        cfg.discriminator = DenseNetworkSpec::new(
            vec![2, 8, 1],
            vec![Activation::LeakyRelu(0.2), Activation::Identity],
            0,
        )
        .unwrap();
        cfg.prior = LatentPrior::gaussian(4);
        cfg.batch_size = 8;
        cfg.train_steps = 3;
        cfg
    }

    fn tiny_dataset(n: usize) -> crate::data::LabeledDataset {
        let attr = crate::data::AttributeSpec::binary();
        let p = crate::data::PropertyDistribution::binary(0.5).unwrap();
        crate::data::synth_domain(crate::data::DomainTag::Mixture2d, n, &attr, &p, 1).unwrap()
    }

    #[test]
    fn config_validation_enforces_heads() {
        let mut cfg = tiny_config(0);
        cfg.loss = GanLoss::Minimax;
        assert!(cfg.validate().is_err()); // identity head with minimax
        let n = cfg.discriminator.activations.len();
        cfg.discriminator.activations[n - 1] = Activation::Sigmoid;
        assert!(cfg.validate().is_ok());
        cfg.loss = GanLoss::WganGp;
        assert!(cfg.validate().is_err()); // sigmoid head with wgan_gp
    }

    #[test]
    fn zero_steps_returns_pure_initialization() {
        let mut cfg = tiny_config(5);
        cfg.train_steps = 0;
        let data = tiny_dataset(32);
        let gan = train_gan(&data, &cfg).unwrap();
        // Same derived init seed as the trainer uses.
        let mut gen_spec = cfg.generator.clone();
        gen_spec.seed = crate::seeds::derive_seed(cfg.seed, "gan-init-gen", 0);
        let untrained = DenseNetwork::init(gen_spec).unwrap();
        let z = vec![0.1, -0.2, 0.3, 0.4];
        assert_eq!(
            gan.generator().forward(&z).unwrap(),
            untrained.forward(&z).unwrap()
        );
        assert!(gan.log().entries.is_empty());
    }

    #[test]
    fn blind_sampling_is_deterministic() {
        let cfg = tiny_config(9);
        let data = tiny_dataset(32);
        let gan = train_gan(&data, &cfg).unwrap();
        assert_eq!(gan.sample_blind(5, 77), gan.sample_blind(5, 77));
        assert_ne!(gan.sample_blind(5, 77), gan.sample_blind(5, 78));
    }

    #[test]
    fn zero_weight_tanh_generator_emits_zero_vector() {
        let spec = DenseNetworkSpec::new(vec![3, 2], vec![Activation::Tanh], 0).unwrap();
        let generator = DenseNetwork::zeros(spec).unwrap();
        let out = generator.forward(&[0.4, -0.1, 2.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn generate_from_equals_blind_sampling_with_same_stream() {
        let cfg = tiny_config(13);
        let data = tiny_dataset(32);
        let gan = train_gan(&data, &cfg).unwrap();
        let seed = 4242;
        let blind = gan.sample_blind(7, seed);
        let codes = gan.latent_prior().draw_seeded(7, seed);
        let replayed = gan.generate_from(&codes).unwrap();
        assert_eq!(blind, replayed);
    }

    #[test]
    fn generate_from_rejects_wrong_code_length() {
        let cfg = tiny_config(13);
        let data = tiny_dataset(32);
        let gan = train_gan(&data, &cfg).unwrap();
        let err = gan.generate_from(&[vec![0.0; 3]]);
        assert!(matches!(err, Err(CoreError::ShapeMismatch { .. })));
    }

    #[test]
    fn generate_from_preserves_order_and_count() {
        let cfg = tiny_config(13);
        let data = tiny_dataset(32);
        let gan = train_gan(&data, &cfg).unwrap();
        let codes = gan.latent_prior().draw_seeded(100, 5);
        let out = gan.generate_from(&codes).unwrap();
        assert_eq!(out.len(), 100);
        for (z, x) in codes.iter().zip(&out) {
            assert_eq!(gan.generator().forward(z).unwrap(), *x);
        }
    }

    #[test]
    fn generator_output_gradients_match_finite_differences() {
        let cfg = tiny_config(21);
        let data = tiny_dataset(32);
        let gan = train_gan(&data, &cfg).unwrap();
        let code = vec![0.3, -0.5, 0.2, 0.9];
        for out_coord in 0..2 {
            let mut graph = ValueGraph::new();
            let bound = gan.generator().bind(&mut graph);
            let z = graph.variable(code.clone());
            let out = bound.forward(&mut graph, z);
            let picked = graph.pick(out, out_coord);
            graph.backward(picked).unwrap();
            let analytic = graph.grad(z).to_vec();
            for i in 0..code.len() {
                let step = 1e-5;
                let mut up = code.clone();
                up[i] += step;
                let mut down = code.clone();
                down[i] -= step;
                let numeric = (gan.generator().forward(&up).unwrap()[out_coord]
                    - gan.generator().forward(&down).unwrap()[out_coord])
                    / (2.0 * step);
                let diff = (analytic[i] - numeric).abs();
                let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
                assert!(diff / scale < 1e-4, "coord {out_coord} code {i}: {diff}");
            }
        }
    }

    #[test]
    fn save_and_load_round_trip() {
        let cfg = tiny_config(3);
        let data = tiny_dataset(32);
        let gan = train_gan(&data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gan");
        gan.save_dir(&path).unwrap();
        let restored = TrainedGan::load_dir(&path).unwrap();
        assert_eq!(gan.generator(), restored.generator());
        assert_eq!(gan.config(), restored.config());
        assert_eq!(gan.log().entries.len(), restored.log().entries.len());
        assert_eq!(gan.sample_blind(3, 1), restored.sample_blind(3, 1));
    }
}
