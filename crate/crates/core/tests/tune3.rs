//! Scratch: refined sweep for the acceptance GAN config (run explicitly).

use std::time::Instant;

use propinfer_core::attack::full_black_box;
use propinfer_core::classifier::train_classifier;
use propinfer_core::data::{synth_domain, AttributeSpec, DomainTag, PropertyDistribution};
use propinfer_core::gan::{train_gan, GanConfig, LatentPrior};
use propinfer_core::nn::{Activation, DenseNetworkSpec, OptimizerConfig};
use rayon::prelude::*;

fn cfg_with(
    n_critic: usize,
    lr: f64,
    steps: usize,
    batch: usize,
    decay: bool,
    seed: u64,
) -> GanConfig {
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
    cfg.batch_size = batch;
    cfg.n_critic = n_critic;
    cfg.gen_opt = OptimizerConfig::adam(lr, 0.5, 0.9).with_batch_size(batch);
    cfg.disc_opt = OptimizerConfig::adam(lr, 0.5, 0.9).with_batch_size(batch);
    cfg.train_steps = steps;
    cfg.lr_decay = decay;
    cfg
}

#[test]
#[ignore]
fn tune_refined() {
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

    for (tag, n_critic, lr, steps, batch, decay) in [
        ("nc3-lr1e3-s2000-decay", 3usize, 1e-3, 2000usize, 64usize, true),
        ("nc3-lr1e3-s3000-decay", 3, 1e-3, 3000, 64, true),
        ("nc5-lr1e3-s2000-decay", 5, 1e-3, 2000, 64, true),
        ("nc3-lr2e3-s2000-decay", 3, 2e-3, 2000, 64, true),
        ("nc3-lr1e3-s2500-nodecay", 3, 1e-3, 2500, 64, false),
    ] {
        let start = Instant::now();
        let jobs: Vec<(f64, u64)> = [0.3, 0.5, 0.7]
            .iter()
            .flat_map(|&p| (0..3u64).map(move |t| (p, t)))
            .collect();
        let errs: Vec<(f64, u64, f64)> = jobs
            .par_iter()
            .map(|&(p, t)| {
                let property = PropertyDistribution::binary(p).unwrap();
                let data = synth_domain(
                    DomainTag::Mixture2d,
                    512,
                    &attr,
                    &property,
                    1000 + (p * 10.0) as u64 * 10 + t,
                )
                .unwrap();
                let gan = train_gan(
                    &data,
                    &cfg_with(
                        n_critic,
                        lr,
                        steps,
                        batch,
                        decay,
                        2000 + (p * 10.0) as u64 * 10 + t,
                    ),
                )
                .unwrap();
                let report = full_black_box(&gan, &clf, 20000, 9 + t, "tune").unwrap();
                (p, t, (report.inferred.class1_fraction() - p).abs())
            })
            .collect();
        let took = start.elapsed();
        let mut per_point = String::new();
        for p in [0.3, 0.5, 0.7] {
            let es: Vec<f64> = errs
                .iter()
                .filter(|(pp, _, _)| *pp == p)
                .map(|(_, _, e)| *e)
                .collect();
            let mean = es.iter().sum::<f64>() / es.len() as f64;
            per_point.push_str(&format!(
                " p{p}: mean {mean:.4} (max {:.4})",
                es.iter().cloned().fold(0.0f64, f64::max)
            ));
        }
        println!("{tag}: {per_point} [{took:.0?} total]");
    }
}
