//! Scratch: hyperparameter matrix for the mixture GAN (run explicitly).

use std::time::Instant;

use propinfer_core::attack::full_black_box;
use propinfer_core::classifier::train_classifier;
use propinfer_core::data::{synth_domain, AttributeSpec, DomainTag, PropertyDistribution};
use propinfer_core::gan::{train_gan, GanConfig, LatentPrior};
use propinfer_core::nn::{Activation, DenseNetworkSpec, OptimizerConfig};

#[test]
#[ignore]
fn tune_matrix() {
    let attr = AttributeSpec::binary();
    let uniform = PropertyDistribution::binary(0.5).unwrap();
    let clf_train = synth_domain(DomainTag::Mixture2d, 1000, &attr, &uniform, 1).unwrap();
    let clf_test = synth_domain(DomainTag::Mixture2d, 400, &attr, &uniform, 2).unwrap();
    let spec = DenseNetworkSpec::new(
        vec![2, 32, 2],
        vec![Activation::LeakyRelu(0.2), Activation::Softmax],
        0,
    )
    .unwrap();
    let clf = train_classifier(
        &clf_train,
        &clf_test,
        &spec,
        &OptimizerConfig::adam(0.01, 0.9, 0.999).with_batch_size(32),
        30,
        3,
    )
    .unwrap();

    let p = 0.3;
    let property = PropertyDistribution::binary(p).unwrap();
    let data = synth_domain(DomainTag::Mixture2d, 512, &attr, &property, 100).unwrap();

    for (tag, n_critic, lr, b1, b2, steps) in [
        ("canonical-toy", 5usize, 1e-4, 0.5, 0.9, 2000usize),
        ("canonical-toy-hi-lr", 5, 1e-3, 0.5, 0.9, 2000),
        ("paper-wgangp", 3, 2e-4, 0.9, 0.999, 2000),
        ("b0", 5, 1e-4, 0.0, 0.9, 2000),
        ("hi-lr-b0", 5, 1e-3, 0.0, 0.9, 1000),
    ] {
        let mut cfg = GanConfig::wgan_gp(2, 500);
        cfg.generator = DenseNetworkSpec::new(
            vec![8, 32, 32, 2],
            vec![
                Activation::LeakyRelu(0.2),
                Activation::LeakyRelu(0.2),
                Activation::Tanh,
            ],
            0,
        )
        .unwrap();
        cfg.discriminator = DenseNetworkSpec::new(
            vec![2, 32, 32, 1],
            vec![
                Activation::LeakyRelu(0.2),
                Activation::LeakyRelu(0.2),
                Activation::Identity,
            ],
            0,
        )
        .unwrap();
        cfg.prior = LatentPrior::gaussian(8);
        cfg.batch_size = 64;
        cfg.n_critic = n_critic;
        cfg.gen_opt = OptimizerConfig::adam(lr, b1, b2).with_batch_size(64);
        cfg.disc_opt = OptimizerConfig::adam(lr, b1, b2).with_batch_size(64);
        cfg.train_steps = steps;

        let start = Instant::now();
        let gan = train_gan(&data, &cfg).unwrap();
        let took = start.elapsed();
        let report = full_black_box(&gan, &clf, 20000, 9, "tune").unwrap();
        let entries = &gan.log().entries;
        let tail: Vec<&propinfer_core::gan::TrainingLogEntry> =
            entries.iter().rev().take(3).collect();
        println!(
            "{tag}: inferred {:.4} (want {p}) in {took:.1?}; last d/g/gp: {:?}",
            report.inferred.class1_fraction(),
            tail.iter()
                .map(|e| format!("{:.3}/{:.3}/{:.3}", e.disc_loss, e.gen_loss, e.gp_term))
                .collect::<Vec<_>>()
        );
        // Where does the mass actually sit? Mean distances to each center.
        let samples = propinfer_core::gan::BlindSampler::sample_blind(&gan, 2000, 5);
        let c0 = propinfer_core::data::synth::mixture2d_center(0, 2, 0.0);
        let c1 = propinfer_core::data::synth::mixture2d_center(1, 2, 0.0);
        let near = |s: &Vec<f64>, c: [f64; 2]| {
            ((s[0] - c[0]).powi(2) + (s[1] - c[1]).powi(2)).sqrt() < 0.3
        };
        let n0 = samples.iter().filter(|s| near(s, c0)).count();
        let n1 = samples.iter().filter(|s| near(s, c1)).count();
        println!("  near c0: {n0}/2000, near c1: {n1}/2000, stray: {}", 2000 - n0 - n1);
    }
}
