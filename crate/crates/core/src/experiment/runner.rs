//! The end-to-end task pipeline: pools, classifier, target and shadow
//! generators, both attacks, and the result table.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{
    full_black_box, optimize_latent_codes, partial_black_box, CodeOptimizerSettings,
    LatentCodeSet, ShadowEnsemble,
};
use crate::classifier::{train_classifier, PropertyClassifier};
use crate::data::{
    draw_with_property, split, synth_domain, synth_domain_shifted, AttributeSpec, DomainShift,
    DomainTag, LabeledDataset, PropertyDistribution, SplitPlan, SplitPools,
};
use crate::error::{CoreError, Result};
use crate::experiment::{format_property, ExperimentConfig, ResultRow, ResultTable};
use crate::gan::{train_gan, GanConfig, GanLoss, LatentPrior, TrainedGan};
use crate::nn::{Activation, DenseNetworkSpec, OptimizerConfig};
use crate::seeds::derive_seed;

/// A trained target model with its ground truth and id.
pub struct TargetModel {
    pub gan: TrainedGan,
    pub property: PropertyDistribution,
    pub id: String,
    pub seed: u64,
}

/// Shared artifacts of a task run.
pub struct TaskWorld {
    pub attribute: AttributeSpec,
    pub pools: SplitPools,
    /// Samples outside the three pools; used as the non-member and
    /// rebalancing reservoir.
    pub reserve: LabeledDataset,
    pub classifier: PropertyClassifier,
}

#[derive(Serialize, Deserialize)]
struct EnsembleManifestEntry {
    dir: String,
    property: Vec<f64>,
}

/// Sample dimension of a domain.
pub fn domain_dim(domain: DomainTag) -> usize {
    match domain {
        DomainTag::Mixture2d => 2,
        DomainTag::Digitlike => 64,
        DomainTag::TabularOnehot => crate::data::synth::TABULAR_FIELDS.iter().sum(),
    }
}

/// Build a generator/discriminator config from the experiment settings.
pub fn gan_config_from(config: &ExperimentConfig, seed: u64) -> Result<GanConfig> {
    let sample_dim = domain_dim(config.domain);
    let mut gen_widths = vec![config.latent_dim];
    gen_widths.extend_from_slice(&config.gen_hidden);
    gen_widths.push(sample_dim);
    let mut gen_acts = vec![Activation::LeakyRelu(0.2); config.gen_hidden.len()];
    gen_acts.push(Activation::Tanh);

    let mut disc_widths = vec![sample_dim];
    disc_widths.extend_from_slice(&config.disc_hidden);
    disc_widths.push(1);
    let mut disc_acts = vec![Activation::LeakyRelu(0.2); config.disc_hidden.len()];
    disc_acts.push(match config.gan_loss {
        GanLoss::WganGp => Activation::Identity,
        GanLoss::Minimax => Activation::Sigmoid,
    });

    let cfg = GanConfig {
        generator: DenseNetworkSpec::new(gen_widths, gen_acts, 0)?,
        discriminator: DenseNetworkSpec::new(disc_widths, disc_acts, 0)?,
        prior: if config.gaussian_prior {
            LatentPrior::gaussian(config.latent_dim)
        } else {
            LatentPrior::uniform(config.latent_dim)
        },
        loss: config.gan_loss,
        gp_lambda: config.gp_lambda,
        n_critic: config.n_critic,
        batch_size: config.gan_batch,
        gen_opt: OptimizerConfig::adam(
            config.gan_learning_rate,
            config.gan_beta1,
            config.gan_beta2,
        )
        .with_batch_size(config.gan_batch),
        disc_opt: OptimizerConfig::adam(
            config.gan_learning_rate,
            config.gan_beta1,
            config.gan_beta2,
        )
        .with_batch_size(config.gan_batch),
        train_steps: config.train_steps,
        lr_decay: config.gan_lr_decay,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Classifier architecture from the experiment settings.
pub fn classifier_spec_from(config: &ExperimentConfig) -> Result<DenseNetworkSpec> {
    let mut widths = vec![domain_dim(config.domain)];
    widths.extend_from_slice(&config.clf_hidden);
    widths.push(config.n_classes);
    let mut acts = vec![Activation::LeakyRelu(0.2); config.clf_hidden.len()];
    acts.push(Activation::Softmax);
    DenseNetworkSpec::new(widths, acts, 0)
}

pub fn optimizer_settings_from(config: &ExperimentConfig) -> CodeOptimizerSettings {
    CodeOptimizerSettings {
        optimizer: OptimizerConfig::adam(config.opt_learning_rate, 0.9, 0.999),
        iterations: config.opt_iterations,
        ..Default::default()
    }
}

/// Natural (unskewed) property of the synthetic universe.
fn natural_property(config: &ExperimentConfig) -> Result<PropertyDistribution> {
    PropertyDistribution::uniform(config.n_classes)
}

/// Synthesize the universe, split pools, and train the property classifier.
pub fn build_world(config: &ExperimentConfig) -> Result<TaskWorld> {
    let attribute = AttributeSpec::new(config.n_classes)?;
    let natural = natural_property(config)?;
    let universe = synth_domain(
        config.domain,
        config.total_samples,
        &attribute,
        &natural,
        derive_seed(config.master_seed, "synth", 0),
    )
    .map_err(|e| e.in_stage("synth"))?;

    let plan = SplitPlan {
        target_size: config.target_pool_size,
        shadow_size: config.shadow_pool_size,
        classifier_size: config.classifier_pool_size,
        classifier_train_fraction: config.classifier_train_fraction,
    };
    let pools = split(&universe, &plan, derive_seed(config.master_seed, "split", 0))
        .map_err(|e| e.in_stage("split"))?;

    let mut used: Vec<usize> = pools
        .target_indices
        .iter()
        .chain(&pools.shadow_indices)
        .chain(&pools.classifier_train_indices)
        .chain(&pools.classifier_test_indices)
        .copied()
        .collect();
    used.sort_unstable();
    let reserve_indices: Vec<usize> = (0..universe.len())
        .filter(|i| used.binary_search(i).is_err())
        .collect();
    let reserve = universe.subset(&reserve_indices);

    // Distribution-shift knob: a nonzero shift trains the classifier on a
    // perturbed variant of the domain instead of the split pool.
    let (clf_train, clf_test) = if config.clf_domain_shift != 0.0 {
        let shift = DomainShift {
            amount: config.clf_domain_shift,
        };
        let train = synth_domain_shifted(
            config.domain,
            pools.classifier_train.len(),
            &attribute,
            &natural,
            derive_seed(config.master_seed, "clf-shift-train", 0),
            shift,
        )?;
        let test = synth_domain_shifted(
            config.domain,
            pools.classifier_test.len().max(config.n_classes),
            &attribute,
            &natural,
            derive_seed(config.master_seed, "clf-shift-test", 0),
            shift,
        )?;
        (train, test)
    } else {
        (pools.classifier_train.clone(), pools.classifier_test.clone())
    };

    let classifier = train_classifier(
        &clf_train,
        &clf_test,
        &classifier_spec_from(config)?,
        &OptimizerConfig::adam(config.clf_learning_rate, 0.9, 0.999)
            .with_batch_size(config.clf_batch),
        config.clf_epochs,
        derive_seed(config.master_seed, "clf-train", 0),
    )
    .map_err(|e| e.in_stage("train-classifier"))?;

    Ok(TaskWorld {
        attribute,
        pools,
        reserve,
        classifier,
    })
}

/// Model id like `target_p30_2`.
fn model_id(kind: &str, p: f64, index: usize) -> String {
    format!("{kind}_p{:02}_{index}", (p * 100.0).round() as u32)
}

/// Train the grid of target models from the target pool, in parallel.
pub fn train_targets(config: &ExperimentConfig, world: &TaskWorld) -> Result<Vec<TargetModel>> {
    let jobs: Vec<(usize, f64, usize)> = config
        .property_grid
        .iter()
        .enumerate()
        .flat_map(|(gi, &p)| (0..config.targets_per_property).map(move |t| (gi, p, t)))
        .collect();
    jobs.par_iter()
        .map(|&(gi, p, t)| {
            let index = (gi * 1_000 + t) as u64;
            let property = PropertyDistribution::binary(p)?;
            let data = draw_with_property(
                &world.pools.target,
                config.dataset_size,
                &property,
                derive_seed(config.master_seed, "target-data", index),
            )?;
            let gan_seed = derive_seed(config.master_seed, "target-gan", index);
            let gan = train_gan(&data, &gan_config_from(config, gan_seed)?)?;
            Ok(TargetModel {
                gan,
                property,
                id: model_id("target", p, t),
                seed: gan_seed,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("train-targets"))
}

/// Train the shadow ensemble from the shadow pool, in parallel.
pub fn train_shadows(config: &ExperimentConfig, world: &TaskWorld) -> Result<ShadowEnsemble> {
    let jobs: Vec<(usize, f64, usize)> = config
        .property_grid
        .iter()
        .enumerate()
        .flat_map(|(gi, &p)| (0..config.shadows_per_property).map(move |k| (gi, p, k)))
        .collect();
    let members = jobs
        .par_iter()
        .map(|&(gi, p, k)| {
            let index = (gi * 1_000 + k) as u64;
            let property = PropertyDistribution::binary(p)?;
            let data = draw_with_property(
                &world.pools.shadow,
                config.dataset_size,
                &property,
                derive_seed(config.master_seed, "shadow-data", index),
            )?;
            let gan_seed = derive_seed(config.master_seed, "shadow-gan", index);
            let gan = train_gan(&data, &gan_config_from(config, gan_seed)?)?;
            Ok((gan, property))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e: CoreError| e.in_stage("train-shadows"))?;
    ShadowEnsemble::new(members).map_err(|e| e.in_stage("train-shadows"))
}

/// Persist an ensemble as model directories plus a manifest.
pub fn save_ensemble(ensemble: &ShadowEnsemble, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = Vec::new();
    for (i, (gan, property)) in ensemble.members().iter().enumerate() {
        let name = format!("shadow_{i}");
        gan.save_dir(&dir.join(&name))?;
        manifest.push(EnsembleManifestEntry {
            dir: name,
            property: property.probs().to_vec(),
        });
    }
    std::fs::write(
        dir.join("ensemble.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn load_ensemble(dir: &Path) -> Result<ShadowEnsemble> {
    let manifest: Vec<EnsembleManifestEntry> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("ensemble.json"))?)?;
    let members = manifest
        .into_iter()
        .map(|entry| {
            let gan = TrainedGan::load_dir(&dir.join(entry.dir))?;
            Ok((gan, PropertyDistribution::new(entry.property)?))
        })
        .collect::<Result<Vec<_>>>()?;
    ShadowEnsemble::new(members)
}

/// Everything a finished run leaves on disk.
pub struct TaskOutput {
    pub table: ResultTable,
    pub run_dir: PathBuf,
    pub table_checksum: String,
    pub classifier_accuracy: f64,
}

/// Run the full pipeline for one task config. Deterministic in the master
/// seed; every row carries the seed that regenerates it. Partial results are
/// flushed to the run directory before any stage error is propagated.
pub fn run_task(config: &ExperimentConfig) -> Result<TaskOutput> {
    config.validate()?;
    let run_dir = config.output_dir.clone();
    std::fs::create_dir_all(&run_dir)?;
    std::fs::write(run_dir.join("config.kv"), config.to_kv_text())?;

    let world = build_world(config)?;
    world
        .classifier
        .save(&run_dir.join("classifier.json"))
        .map_err(|e| e.in_stage("train-classifier"))?;

    let targets = train_targets(config, &world)?;
    let models_dir = run_dir.join("models");
    for target in &targets {
        target
            .gan
            .save_dir(&models_dir.join(&target.id))
            .map_err(|e| e.in_stage("train-targets"))?;
    }

    let ensemble = train_shadows(config, &world)?;
    save_ensemble(&ensemble, &models_dir.join("shadows"))
        .map_err(|e| e.in_stage("train-shadows"))?;

    let codes = optimize_latent_codes(
        &ensemble,
        &world.classifier,
        config.optimized_set_size,
        &optimizer_settings_from(config),
        derive_seed(config.master_seed, "codes", 0),
        None,
    )
    .map_err(|e| e.in_stage("optimize-codes"))?;
    codes
        .save(&run_dir.join("codes.json"))
        .map_err(|e| e.in_stage("optimize-codes"))?;

    let mut table = ResultTable::default();
    let attack_result: Result<()> = (|| {
        for (ti, target) in targets.iter().enumerate() {
            for (ci, &count) in config.attack_sample_counts.iter().enumerate() {
                let seed = derive_seed(
                    config.master_seed,
                    "attack-full",
                    (ti * 10_000 + ci) as u64,
                );
                let report =
                    full_black_box(&target.gan, &world.classifier, count, seed, &target.id)?
                        .with_ground_truth(&target.property)?;
                table.append(ResultRow {
                    task: config.task_id.clone(),
                    mode: report.mode.to_string(),
                    model_id: target.id.clone(),
                    p_real: format_property(&target.property),
                    p_infer: format_property(&report.inferred),
                    abs_diff: report.abs_difference.unwrap(),
                    query_count: report.query_count,
                    trial: 0,
                    seed,
                });
            }
            let report = partial_black_box(&target.gan, &world.classifier, &codes, &target.id)?
                .with_ground_truth(&target.property)?;
            table.append(ResultRow {
                task: config.task_id.clone(),
                mode: report.mode.to_string(),
                model_id: target.id.clone(),
                p_real: format_property(&target.property),
                p_infer: format_property(&report.inferred),
                abs_diff: report.abs_difference.unwrap(),
                query_count: report.query_count,
                trial: 0,
                seed: derive_seed(config.master_seed, "codes", 0),
            });
        }
        Ok(())
    })();
    // Preserve whatever was produced before a failing stage.
    let table_checksum = table.write_csv(&run_dir.join("results.csv"))?;
    attack_result.map_err(|e| e.in_stage("attack"))?;

    Ok(TaskOutput {
        table,
        run_dir,
        table_checksum,
        classifier_accuracy: world.classifier.test_accuracy(),
    })
}

/// Convenience: a latent code set drawn from the prior of a config.
pub fn random_codes(config: &ExperimentConfig, n: usize, seed: u64) -> Result<LatentCodeSet> {
    let prior = if config.gaussian_prior {
        LatentPrior::gaussian(config.latent_dim)
    } else {
        LatentPrior::uniform(config.latent_dim)
    };
    LatentCodeSet::random(prior.draw_seeded(n, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A configuration small enough for unit tests.
    pub(crate) fn micro_config(dir: &Path) -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.task_id = "micro".into();
        config.property_grid = vec![0.4, 0.6];
        config.targets_per_property = 1;
        config.shadows_per_property = 2;
        config.dataset_size = 48;
        config.total_samples = 1024;
        config.target_pool_size = 256;
        config.shadow_pool_size = 256;
        config.classifier_pool_size = 256;
        config.latent_dim = 4;
        config.gen_hidden = vec![8];
        config.disc_hidden = vec![8];
        config.gan_batch = 16;
        config.train_steps = 8;
        config.clf_hidden = vec![8];
        config.clf_epochs = 4;
        config.full_bb_samples = 64;
        config.attack_sample_counts = vec![32];
        config.optimized_set_size = 8;
        config.opt_iterations = 5;
        config.trials = 2;
        config.mia_members = 16;
        config.mia_nonmembers = 48;
        config.mia_k = 32;
        config.output_dir = dir.to_path_buf();
        config
    }

    #[test]
    fn run_task_produces_expected_row_count_and_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = micro_config(&dir.path().join("run"));
        let out = run_task(&config).unwrap();
        // 2 targets x (1 full count + 1 partial) = 4 rows.
        assert_eq!(out.table.len(), 4);
        assert!(out.run_dir.join("config.kv").exists());
        assert!(out.run_dir.join("results.csv").exists());
        assert!(out.run_dir.join("results.csv.sha256").exists());
        assert!(out.run_dir.join("classifier.json").exists());
        assert!(out.run_dir.join("codes.json").exists());
        assert!(out.run_dir.join("models/target_p40_0/generator.json").exists());
        assert!(out.run_dir.join("models/shadows/ensemble.json").exists());
    }

    #[test]
    fn rerun_with_same_seed_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let config_a = micro_config(&dir.path().join("a"));
        let mut config_b = micro_config(&dir.path().join("b"));
        let out_a = run_task(&config_a).unwrap();
        let out_b = run_task(&config_b).unwrap();
        assert_eq!(out_a.table_checksum, out_b.table_checksum);
        let bytes_a = std::fs::read(out_a.run_dir.join("results.csv")).unwrap();
        let bytes_b = std::fs::read(out_b.run_dir.join("results.csv")).unwrap();
        assert_eq!(bytes_a, bytes_b);
        // A different master seed must change the outcome.
        config_b.master_seed += 1;
        config_b.output_dir = dir.path().join("c");
        let out_c = run_task(&config_b).unwrap();
        assert_ne!(out_a.table_checksum, out_c.table_checksum);
    }

    #[test]
    fn ensemble_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let config = micro_config(&dir.path().join("run"));
        let world = build_world(&config).unwrap();
        let ensemble = train_shadows(&config, &world).unwrap();
        let path = dir.path().join("ensemble");
        save_ensemble(&ensemble, &path).unwrap();
        let restored = load_ensemble(&path).unwrap();
        assert_eq!(restored.len(), ensemble.len());
        for ((a, pa), (b, pb)) in ensemble.members().iter().zip(restored.members()) {
            assert_eq!(a.generator(), b.generator());
            assert_eq!(pa.probs(), pb.probs());
        }
    }

    #[test]
    fn reserve_is_disjoint_from_pools() {
        let dir = tempfile::tempdir().unwrap();
        let config = micro_config(&dir.path().join("run"));
        let world = build_world(&config).unwrap();
        let expected = config.total_samples
            - config.target_pool_size
            - config.shadow_pool_size
            - config.classifier_pool_size;
        assert_eq!(world.reserve.len(), expected);
    }
}
