//! Scratch tuning harness (not part of the suite; run explicitly).

use std::time::Instant;

use propinfer_core::attack::{absolute_difference, cosine_similarity, full_black_box};
use propinfer_core::classifier::train_classifier;
use propinfer_core::data::{synth_domain, AttributeSpec, DomainTag, PropertyDistribution};
use propinfer_core::gan::{train_gan, GanConfig, LatentPrior};
use propinfer_core::nn::{Activation, DenseNetworkSpec, OptimizerConfig};

fn mixture_gan_config(steps: usize, seed: u64) -> GanConfig {
    let mut cfg = GanConfig::wgan_gp(2, seed);
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
    cfg.train_steps = steps;
    cfg
}

#[test]
#[ignore]
fn tune_mixture() {
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
    println!("classifier accuracy: {}", clf.test_accuracy());

    for steps in [1000usize, 2000] {
        for p in [0.3f64, 0.5, 0.7] {
            let property = PropertyDistribution::binary(p).unwrap();
            for t in 0..2u64 {
                let data =
                    synth_domain(DomainTag::Mixture2d, 512, &attr, &property, 100 + t).unwrap();
                let start = Instant::now();
                let gan = train_gan(&data, &mixture_gan_config(steps, 500 + t + (p * 100.0) as u64))
                    .unwrap();
                let train_time = start.elapsed();
                let report = full_black_box(&gan, &clf, 20000, 9 + t, "tune").unwrap();
                let err = absolute_difference(&report.inferred, &property).unwrap();
                println!(
                    "steps {steps} p {p} t {t}: inferred {:.4} err {err:.4} ({:.1?} train, failed={})",
                    report.inferred.class1_fraction(),
                    train_time,
                    gan.log().failed(),
                );
            }
        }
    }
}

#[test]
#[ignore]
fn tune_digitlike() {
    let n_classes = 10;
    let attr = AttributeSpec::new(n_classes).unwrap();
    let uniform = PropertyDistribution::uniform(n_classes).unwrap();
    let ramp =
        PropertyDistribution::new((1..=10).map(|c| c as f64 / 55.0).collect()).unwrap();

    let clf_train = synth_domain(DomainTag::Digitlike, 2000, &attr, &uniform, 1).unwrap();
    let clf_test = synth_domain(DomainTag::Digitlike, 500, &attr, &uniform, 2).unwrap();
    let spec = DenseNetworkSpec::new(
        vec![64, 32, 10],
        vec![Activation::LeakyRelu(0.2), Activation::Softmax],
        0,
    )
    .unwrap();
    let clf = train_classifier(
        &clf_train,
        &clf_test,
        &spec,
        &OptimizerConfig::adam(0.005, 0.9, 0.999).with_batch_size(32),
        20,
        3,
    )
    .unwrap();
    println!("digit classifier accuracy: {}", clf.test_accuracy());

    for steps in [1500usize, 3000] {
        let data = synth_domain(DomainTag::Digitlike, 1000, &attr, &ramp, 50).unwrap();
        let mut cfg = mixture_gan_config(steps, 700);
        cfg.generator = DenseNetworkSpec::new(
            vec![16, 96, 96, 64],
            vec![
                Activation::LeakyRelu(0.2),
                Activation::LeakyRelu(0.2),
                Activation::Tanh,
            ],
            0,
        )
        .unwrap();
        cfg.discriminator = DenseNetworkSpec::new(
            vec![64, 96, 96, 1],
            vec![
                Activation::LeakyRelu(0.2),
                Activation::LeakyRelu(0.2),
                Activation::Identity,
            ],
            0,
        )
        .unwrap();
        cfg.prior = LatentPrior::gaussian(16);
        cfg.batch_size = 64;
        let start = Instant::now();
        let gan = train_gan(&data, &cfg).unwrap();
        let train_time = start.elapsed();
        let report = full_black_box(&gan, &clf, 20000, 9, "tune").unwrap();
        let cos = cosine_similarity(&report.inferred, &ramp).unwrap();
        println!(
            "steps {steps}: cosine {cos:.4} inferred {:?} ({:.1?} train, failed={})",
            report
                .inferred
                .probs()
                .iter()
                .map(|v| (v * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
            train_time,
            gan.log().failed(),
        );
    }
}
