//! Per-figure experiment pipelines. Each one builds what it needs from the
//! config, runs the sweep, and writes a tidy CSV with columns matching the
//! figure's axes.

use std::path::{Path, PathBuf};

use crate::attack::{
    absolute_difference, compare_attack_modes, cosine_similarity, full_black_box,
    optimize_latent_codes, partial_black_box, GanSurface,
};
use crate::classifier::train_classifier;
use crate::data::{
    draw_with_property, rebalance, synth_domain, AttributeSpec, PropertyDistribution,
};
use crate::error::{CoreError, Result};
use crate::experiment::runner::{
    build_world, domain_dim, gan_config_from, optimizer_settings_from, train_shadows,
    train_targets, TaskWorld,
};
use crate::experiment::{format_property, ExperimentConfig, ResultRow, ResultTable};
use crate::gan::{train_gan, TrainedGan};
use crate::membership::{
    calibrated_error, enhancement_term, membership_statistic, sensitivity_sweep, MiaConfig,
    MiaEvaluation, MiaScore,
};
use crate::nn::OptimizerConfig;
use crate::seeds::derive_seed;

/// The figure analogs this lab reproduces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureId {
    /// Full black-box inference per target at the headline sample budget.
    F4,
    /// Full black-box error versus number of random samples.
    F5,
    /// Partial black-box inference per target with optimized codes.
    F6,
    /// Partial black-box error versus number of shadow models.
    F7,
    /// Partial black-box inference across optimization starting points.
    F8,
    /// Partial black-box behavior when the target property is outside the
    /// shadow grid.
    F9,
    /// Ratio of optimized code sets beating random draws per sample budget.
    F10,
    /// Multi-class property inference.
    F14,
    /// Multi-class inference after rebalancing mitigation.
    F15,
    /// Membership inference ROC, baseline versus enhanced.
    F16,
    /// Enhanced membership AUC under deviated inferred properties.
    F17,
}

impl std::str::FromStr for FigureId {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "f4" => FigureId::F4,
            "f5" => FigureId::F5,
            "f6" => FigureId::F6,
            "f7" => FigureId::F7,
            "f8" => FigureId::F8,
            "f9" => FigureId::F9,
            "f10" => FigureId::F10,
            "f14" => FigureId::F14,
            "f15" => FigureId::F15,
            "f16" => FigureId::F16,
            "f17" => FigureId::F17,
            other => return Err(CoreError::UnknownFigure(other.to_string())),
        })
    }
}

impl std::fmt::Display for FigureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FigureId::F4 => "f4",
            FigureId::F5 => "f5",
            FigureId::F6 => "f6",
            FigureId::F7 => "f7",
            FigureId::F8 => "f8",
            FigureId::F9 => "f9",
            FigureId::F10 => "f10",
            FigureId::F14 => "f14",
            FigureId::F15 => "f15",
            FigureId::F16 => "f16",
            FigureId::F17 => "f17",
        };
        write!(f, "{s}")
    }
}

pub const ALL_FIGURES: [FigureId; 11] = [
    FigureId::F4,
    FigureId::F5,
    FigureId::F6,
    FigureId::F7,
    FigureId::F8,
    FigureId::F9,
    FigureId::F10,
    FigureId::F14,
    FigureId::F15,
    FigureId::F16,
    FigureId::F17,
];

/// Result of one figure pipeline.
pub struct FigureOutput {
    pub table: ResultTable,
    pub csv_path: PathBuf,
}

fn write_plot_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn row_from_attack(
    config: &ExperimentConfig,
    mode: &str,
    model_id: &str,
    p_real: &PropertyDistribution,
    p_infer: &PropertyDistribution,
    query_count: usize,
    trial: usize,
    seed: u64,
) -> Result<ResultRow> {
    Ok(ResultRow {
        task: config.task_id.clone(),
        mode: mode.to_string(),
        model_id: model_id.to_string(),
        p_real: format_property(p_real),
        p_infer: format_property(p_infer),
        abs_diff: absolute_difference(p_infer, p_real)?,
        query_count,
        trial,
        seed,
    })
}

/// Run one figure pipeline, writing `<figure>.csv` under the output dir.
pub fn run_figure(figure: FigureId, config: &ExperimentConfig) -> Result<FigureOutput> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;
    match figure {
        FigureId::F4 => figure_full_bb_overview(config),
        FigureId::F5 => figure_sample_count_sweep(config),
        FigureId::F6 => figure_partial_bb_overview(config),
        FigureId::F7 => figure_shadow_count_sweep(config),
        FigureId::F8 => figure_starting_points(config),
        FigureId::F9 => figure_out_of_range(config),
        FigureId::F10 => figure_compare_modes(config),
        FigureId::F14 => figure_multiclass(config),
        FigureId::F15 => figure_mitigation(config),
        FigureId::F16 => figure_mia_roc(config),
        FigureId::F17 => figure_mia_sensitivity(config),
    }
}

fn figure_full_bb_overview(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_world(config)?;
    let targets = train_targets(config, &world)?;
    let mut table = ResultTable::default();
    let mut plot = Vec::new();
    for (ti, target) in targets.iter().enumerate() {
        let seed = derive_seed(config.master_seed, "f4-attack", ti as u64);
        let report = full_black_box(
            &target.gan,
            &world.classifier,
            config.full_bb_samples,
            seed,
            &target.id,
        )?;
        table.append(row_from_attack(
            config,
            "full_bb",
            &target.id,
            &target.property,
            &report.inferred,
            report.query_count,
            0,
            seed,
        )?);
        plot.push(vec![
            format_property(&target.property),
            target.id.clone(),
            format_property(&report.inferred),
        ]);
    }
    let csv_path = config.output_dir.join("f4.csv");
    write_plot_csv(&csv_path, &["ground_truth", "model_id", "inferred"], &plot)?;
    table.write_csv(&config.output_dir.join("f4_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

fn figure_sample_count_sweep(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_world(config)?;
    let targets = train_targets(config, &world)?;
    let mut table = ResultTable::default();
    let mut plot = Vec::new();
    for (ti, target) in targets.iter().enumerate() {
        for (ci, &count) in config.attack_sample_counts.iter().enumerate() {
            let seed = derive_seed(
                config.master_seed,
                "f5-attack",
                (ti * 100 + ci) as u64,
            );
            let report =
                full_black_box(&target.gan, &world.classifier, count, seed, &target.id)?;
            let err = absolute_difference(&report.inferred, &target.property)?;
            table.append(row_from_attack(
                config,
                "full_bb",
                &target.id,
                &target.property,
                &report.inferred,
                count,
                0,
                seed,
            )?);
            plot.push(vec![
                count.to_string(),
                format_property(&target.property),
                format_property(&report.inferred),
                err.to_string(),
            ]);
        }
    }
    let csv_path = config.output_dir.join("f5.csv");
    write_plot_csv(
        &csv_path,
        &["samples", "ground_truth", "inferred", "abs_diff"],
        &plot,
    )?;
    table.write_csv(&config.output_dir.join("f5_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

fn figure_partial_bb_overview(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_world(config)?;
    let targets = train_targets(config, &world)?;
    let ensemble = train_shadows(config, &world)?;
    let codes = optimize_latent_codes(
        &ensemble,
        &world.classifier,
        config.optimized_set_size,
        &optimizer_settings_from(config),
        derive_seed(config.master_seed, "f6-codes", 0),
        None,
    )?;
    let mut table = ResultTable::default();
    let mut plot = Vec::new();
    for target in &targets {
        let report = partial_black_box(&target.gan, &world.classifier, &codes, &target.id)?;
        table.append(row_from_attack(
            config,
            "partial_bb",
            &target.id,
            &target.property,
            &report.inferred,
            report.query_count,
            0,
            derive_seed(config.master_seed, "f6-codes", 0),
        )?);
        plot.push(vec![
            format_property(&target.property),
            target.id.clone(),
            format_property(&report.inferred),
        ]);
    }
    let csv_path = config.output_dir.join("f6.csv");
    write_plot_csv(&csv_path, &["ground_truth", "model_id", "inferred"], &plot)?;
    table.write_csv(&config.output_dir.join("f6_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

fn figure_shadow_count_sweep(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_world(config)?;
    let targets = train_targets(config, &world)?;
    let ensemble = train_shadows(config, &world)?;
    let grid_points = config.property_grid.len();
    let mut table = ResultTable::default();
    let mut plot = Vec::new();
    for (si, &count) in config.shadow_count_sweep.iter().enumerate() {
        let per_property = (count / grid_points).max(1);
        let sub = ensemble.subsample(per_property)?;
        let codes = optimize_latent_codes(
            &sub,
            &world.classifier,
            config.optimized_set_size,
            &optimizer_settings_from(config),
            derive_seed(config.master_seed, "f7-codes", si as u64),
            None,
        )?;
        for target in &targets {
            let report = partial_black_box(&target.gan, &world.classifier, &codes, &target.id)?;
            let err = absolute_difference(&report.inferred, &target.property)?;
            table.append(row_from_attack(
                config,
                "partial_bb",
                &target.id,
                &target.property,
                &report.inferred,
                report.query_count,
                si,
                derive_seed(config.master_seed, "f7-codes", si as u64),
            )?);
            plot.push(vec![
                sub.len().to_string(),
                format_property(&target.property),
                format_property(&report.inferred),
                err.to_string(),
            ]);
        }
    }
    let csv_path = config.output_dir.join("f7.csv");
    write_plot_csv(
        &csv_path,
        &["shadow_models", "ground_truth", "inferred", "abs_diff"],
        &plot,
    )?;
    table.write_csv(&config.output_dir.join("f7_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

fn figure_starting_points(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_world(config)?;
    let targets = train_targets(config, &world)?;
    let ensemble = train_shadows(config, &world)?;
    let mut table = ResultTable::default();
    let mut plot = Vec::new();
    for start in 0..config.starting_points {
        let seed = derive_seed(config.master_seed, "f8-init", start as u64);
        let codes = optimize_latent_codes(
            &ensemble,
            &world.classifier,
            config.optimized_set_size,
            &optimizer_settings_from(config),
            seed,
            None,
        )?;
        for target in &targets {
            let report = partial_black_box(&target.gan, &world.classifier, &codes, &target.id)?;
            table.append(row_from_attack(
                config,
                "partial_bb",
                &target.id,
                &target.property,
                &report.inferred,
                report.query_count,
                start,
                seed,
            )?);
            plot.push(vec![
                start.to_string(),
                format_property(&target.property),
                format_property(&report.inferred),
            ]);
        }
    }
    let csv_path = config.output_dir.join("f8.csv");
    write_plot_csv(
        &csv_path,
        &["starting_point", "ground_truth", "inferred"],
        &plot,
    )?;
    table.write_csv(&config.output_dir.join("f8_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

fn figure_out_of_range(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_world(config)?;
    let ensemble = train_shadows(config, &world)?;
    let codes = optimize_latent_codes(
        &ensemble,
        &world.classifier,
        config.optimized_set_size,
        &optimizer_settings_from(config),
        derive_seed(config.master_seed, "f9-codes", 0),
        None,
    )?;
    // Targets deliberately outside the shadow grid.
    let property = PropertyDistribution::binary(config.out_of_range_property)?;
    let mut table = ResultTable::default();
    let mut plot = Vec::new();
    for t in 0..config.out_of_range_targets {
        let index = t as u64;
        let data = draw_with_property(
            &world.pools.target,
            config.dataset_size,
            &property,
            derive_seed(config.master_seed, "f9-data", index),
        )?;
        let gan_seed = derive_seed(config.master_seed, "f9-gan", index);
        let gan = train_gan(&data, &gan_config_from(config, gan_seed)?)?;
        let id = format!("oor_{t}");
        let report = partial_black_box(&gan, &world.classifier, &codes, &id)?;
        let err = absolute_difference(&report.inferred, &property)?;
        table.append(row_from_attack(
            config,
            "partial_bb",
            &id,
            &property,
            &report.inferred,
            report.query_count,
            t,
            gan_seed,
        )?);
        plot.push(vec![
            id,
            format_property(&property),
            format_property(&report.inferred),
            err.to_string(),
        ]);
    }
    let csv_path = config.output_dir.join("f9.csv");
    write_plot_csv(
        &csv_path,
        &["model_id", "ground_truth", "inferred", "abs_diff"],
        &plot,
    )?;
    table.write_csv(&config.output_dir.join("f9_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

fn figure_compare_modes(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_world(config)?;
    let targets = train_targets(config, &world)?;
    let ensemble = train_shadows(config, &world)?;
    let pairs: Vec<(&dyn GanSurface, PropertyDistribution)> = targets
        .iter()
        .map(|t| (&t.gan as &dyn GanSurface, t.property.clone()))
        .collect();
    let rows = compare_attack_modes(
        &pairs,
        &world.classifier,
        &ensemble,
        &config.compare_sample_counts,
        config.trials,
        &optimizer_settings_from(config),
        derive_seed(config.master_seed, "f10", 0),
    )?;
    let mut table = ResultTable::default();
    let mut plot = Vec::new();
    for row in &rows {
        plot.push(vec![
            row.sample_count.to_string(),
            row.wins.to_string(),
            row.comparisons.to_string(),
            row.ratio.to_string(),
        ]);
        table.append(ResultRow {
            task: config.task_id.clone(),
            mode: "compare".into(),
            model_id: "all".into(),
            p_real: String::new(),
            p_infer: String::new(),
            abs_diff: row.ratio,
            query_count: row.sample_count,
            trial: row.comparisons,
            seed: derive_seed(config.master_seed, "f10", 0),
        });
    }
    let csv_path = config.output_dir.join("f10.csv");
    write_plot_csv(&csv_path, &["samples", "wins", "comparisons", "ratio"], &plot)?;
    table.write_csv(&config.output_dir.join("f10_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

/// Shared setup of the multi-class figures: a skewed training set, a GAN on
/// it, and a classifier trained on fresh uniform data.
struct MulticlassWorld {
    attribute: AttributeSpec,
    skewed_property: PropertyDistribution,
    skewed_data: crate::data::LabeledDataset,
    classifier: crate::classifier::PropertyClassifier,
}

fn build_multiclass_world(config: &ExperimentConfig) -> Result<MulticlassWorld> {
    let n_classes = config.multiclass_property.len();
    if n_classes < 3 {
        return Err(CoreError::InvalidConfig(
            "multi-class figures need at least 3 classes in multiclass_property".into(),
        ));
    }
    let attribute = AttributeSpec::new(n_classes)?;
    let skewed_property = PropertyDistribution::new(config.multiclass_property.clone())?;
    let uniform = PropertyDistribution::uniform(n_classes)?;

    let skewed_data = synth_domain(
        config.domain,
        config.dataset_size,
        &attribute,
        &skewed_property,
        derive_seed(config.master_seed, "mc-data", 0),
    )?;
    let clf_train = synth_domain(
        config.domain,
        config.classifier_pool_size,
        &attribute,
        &uniform,
        derive_seed(config.master_seed, "mc-clf-train", 0),
    )?;
    let clf_test = synth_domain(
        config.domain,
        (config.classifier_pool_size / 2).max(n_classes),
        &attribute,
        &uniform,
        derive_seed(config.master_seed, "mc-clf-test", 0),
    )?;

    let mut spec_widths = vec![domain_dim(config.domain)];
    spec_widths.extend_from_slice(&config.clf_hidden);
    spec_widths.push(n_classes);
    let mut acts = vec![crate::nn::Activation::LeakyRelu(0.2); config.clf_hidden.len()];
    acts.push(crate::nn::Activation::Softmax);
    let classifier = train_classifier(
        &clf_train,
        &clf_test,
        &crate::nn::DenseNetworkSpec::new(spec_widths, acts, 0)?,
        &OptimizerConfig::adam(config.clf_learning_rate, 0.9, 0.999)
            .with_batch_size(config.clf_batch),
        config.clf_epochs,
        derive_seed(config.master_seed, "mc-clf", 0),
    )?;

    Ok(MulticlassWorld {
        attribute,
        skewed_property,
        skewed_data,
        classifier,
    })
}

fn multiclass_attack(
    config: &ExperimentConfig,
    world: &MulticlassWorld,
    data: &crate::data::LabeledDataset,
    tag: &str,
) -> Result<(TrainedGan, PropertyDistribution)> {
    let gan_seed = derive_seed(config.master_seed, "mc-gan", hash_tag(tag));
    let gan = train_gan(data, &gan_config_from(config, gan_seed)?)?;
    let report = full_black_box(
        &gan,
        &world.classifier,
        config.full_bb_samples,
        derive_seed(config.master_seed, "mc-attack", hash_tag(tag)),
        tag,
    )?;
    Ok((gan, report.inferred))
}

fn hash_tag(tag: &str) -> u64 {
    tag.bytes().fold(0u64, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u64))
}

fn figure_multiclass(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_multiclass_world(config)?;
    let (_, inferred) = multiclass_attack(config, &world, &world.skewed_data, "mc-original")?;
    let cosine = cosine_similarity(&inferred, &world.skewed_property)?;

    let mut plot = Vec::new();
    for c in 0..world.attribute.n_classes {
        plot.push(vec![
            c.to_string(),
            world.skewed_property.probs()[c].to_string(),
            inferred.probs()[c].to_string(),
        ]);
    }
    let csv_path = config.output_dir.join("f14.csv");
    write_plot_csv(&csv_path, &["class", "true_p", "inferred_p"], &plot)?;

    let mut table = ResultTable::default();
    table.append(ResultRow {
        task: config.task_id.clone(),
        mode: "full_bb_multiclass".into(),
        model_id: "mc-original".into(),
        p_real: format_property(&world.skewed_property),
        p_infer: format_property(&inferred),
        abs_diff: absolute_difference(&inferred, &world.skewed_property)?,
        query_count: config.full_bb_samples,
        trial: 0,
        seed: config.master_seed,
    });
    std::fs::write(
        config.output_dir.join("f14_cosine.txt"),
        format!("{cosine}\n"),
    )?;
    table.write_csv(&config.output_dir.join("f14_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

fn figure_mitigation(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_multiclass_world(config)?;
    let uniform = PropertyDistribution::uniform(world.attribute.n_classes)?;
    // Reservoir of fresh samples for the additive rebalancing.
    let reservoir = synth_domain(
        config.domain,
        config.dataset_size * 4,
        &world.attribute,
        &uniform,
        derive_seed(config.master_seed, "mc-reservoir", 0),
    )?;
    let rebalanced = rebalance(
        &world.skewed_data,
        &uniform,
        &reservoir,
        derive_seed(config.master_seed, "mc-rebalance", 0),
    )?;

    let (_, inferred_original) =
        multiclass_attack(config, &world, &world.skewed_data, "mc-original")?;
    let (_, inferred_mitigated) =
        multiclass_attack(config, &world, &rebalanced, "mc-rebalanced")?;

    let cos_original = cosine_similarity(&inferred_original, &world.skewed_property)?;
    let cos_mitigated = cosine_similarity(&inferred_mitigated, &world.skewed_property)?;
    let fake_property = rebalanced.empirical_property();

    let mut plot = Vec::new();
    for c in 0..world.attribute.n_classes {
        plot.push(vec![
            c.to_string(),
            world.skewed_property.probs()[c].to_string(),
            inferred_original.probs()[c].to_string(),
            fake_property.probs()[c].to_string(),
            inferred_mitigated.probs()[c].to_string(),
        ]);
    }
    let csv_path = config.output_dir.join("f15.csv");
    write_plot_csv(
        &csv_path,
        &[
            "class",
            "original_p",
            "inferred_original",
            "fake_p",
            "inferred_after_rebalance",
        ],
        &plot,
    )?;
    std::fs::write(
        config.output_dir.join("f15_cosine.txt"),
        format!("original {cos_original}\nrebalanced {cos_mitigated}\n"),
    )?;

    let mut table = ResultTable::default();
    for (id, truth, inferred) in [
        ("mc-original", &world.skewed_property, &inferred_original),
        ("mc-rebalanced", &fake_property, &inferred_mitigated),
    ] {
        table.append(ResultRow {
            task: config.task_id.clone(),
            mode: "full_bb_multiclass".into(),
            model_id: id.into(),
            p_real: format_property(truth),
            p_infer: format_property(inferred),
            abs_diff: absolute_difference(inferred, truth)?,
            query_count: config.full_bb_samples,
            trial: 0,
            seed: config.master_seed,
        });
    }
    table.write_csv(&config.output_dir.join("f15_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

/// Build the membership evaluation population and score every query.
pub fn build_mia_evaluation(
    config: &ExperimentConfig,
    world: &TaskWorld,
) -> Result<(MiaEvaluation, MiaConfig)> {
    let member_property = PropertyDistribution::binary(config.mia_target_property)?;
    let nonmember_property = PropertyDistribution::binary(config.mia_nonmember_property)?;

    let members = draw_with_property(
        &world.pools.target,
        config.mia_members,
        &member_property,
        derive_seed(config.master_seed, "mia-members", 0),
    )?;
    let nonmembers = draw_with_property(
        &world.reserve,
        config.mia_nonmembers,
        &nonmember_property,
        derive_seed(config.master_seed, "mia-nonmembers", 0),
    )?;

    let target_gan = train_gan(
        &members,
        &gan_config_from(config, derive_seed(config.master_seed, "mia-target", 0))?,
    )?;
    let reference_data = draw_with_property(
        &world.pools.shadow,
        config.mia_members,
        &nonmember_property,
        derive_seed(config.master_seed, "mia-reference-data", 0),
    )?;
    let reference_gan = train_gan(
        &reference_data,
        &gan_config_from(config, derive_seed(config.master_seed, "mia-reference", 0))?,
    )?;

    let mut mia_config = MiaConfig::new(config.mia_k);
    mia_config.lambda_p = config.mia_lambda_p;
    mia_config.attribute_properties = vec![member_property];

    let mut scores = Vec::new();
    let mut query_classes = Vec::new();
    let mut add = |data: &crate::data::LabeledDataset, is_member: bool, offset: usize| -> Result<()> {
        for (i, (sample, &label)) in data.samples.iter().zip(&data.labels).enumerate() {
            let id = offset + i;
            let seed = derive_seed(config.master_seed, "mia-query", id as u64);
            let (raw, reference, calibrated) = calibrated_error(
                sample,
                &target_gan,
                &reference_gan,
                config.mia_k,
                seed,
                mia_config.distance,
            )?;
            let enhancement = enhancement_term(&mia_config, &[label])?;
            scores.push(MiaScore {
                sample_id: id,
                raw_error: raw,
                reference_error: reference,
                calibrated,
                enhancement,
                is_member,
            });
            query_classes.push(vec![label]);
        }
        Ok(())
    };
    add(&members, true, 0)?;
    add(&nonmembers, false, config.mia_members)?;

    Ok((
        MiaEvaluation {
            scores,
            query_classes,
        },
        mia_config,
    ))
}

fn roc_points(scores: &[(f64, bool)]) -> Vec<(f64, f64)> {
    let n_pos = scores.iter().filter(|(_, m)| *m).count() as f64;
    let n_neg = scores.len() as f64 - n_pos;
    let mut sorted: Vec<&(f64, bool)> = scores.iter().collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        for &&(_, m) in &sorted[i..=j] {
            if m {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        points.push((fp / n_neg, tp / n_pos));
        i = j + 1;
    }
    points
}

fn figure_mia_roc(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_world(config)?;
    let (eval, _) = build_mia_evaluation(config, &world)?;
    let auc_baseline = eval.auc_baseline()?;
    let auc_enhanced = eval.auc_enhanced()?;

    let mut plot = Vec::new();
    for (arm, enhanced) in [("baseline", false), ("enhanced", true)] {
        let stats: Vec<(f64, bool)> = eval
            .scores
            .iter()
            .map(|s| (membership_statistic(s, enhanced), s.is_member))
            .collect();
        for (fpr, tpr) in roc_points(&stats) {
            plot.push(vec![arm.to_string(), fpr.to_string(), tpr.to_string()]);
        }
    }
    let csv_path = config.output_dir.join("f16.csv");
    write_plot_csv(&csv_path, &["arm", "fpr", "tpr"], &plot)?;
    std::fs::write(
        config.output_dir.join("f16_auc.txt"),
        format!("baseline {auc_baseline}\nenhanced {auc_enhanced}\n"),
    )?;

    let mut table = ResultTable::default();
    for (arm, auc) in [("mia_baseline", auc_baseline), ("mia_enhanced", auc_enhanced)] {
        table.append(ResultRow {
            task: config.task_id.clone(),
            mode: arm.into(),
            model_id: "mia-target".into(),
            p_real: config.mia_target_property.to_string(),
            p_infer: String::new(),
            abs_diff: auc,
            query_count: config.mia_k,
            trial: 0,
            seed: config.master_seed,
        });
    }
    table.write_csv(&config.output_dir.join("f16_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

fn figure_mia_sensitivity(config: &ExperimentConfig) -> Result<FigureOutput> {
    let world = build_world(config)?;
    let (eval, mia_config) = build_mia_evaluation(config, &world)?;

    // Deviate the inferred proportion from the truth toward (and past) 0.5.
    let truth = config.mia_target_property;
    let mut substituted = Vec::new();
    let steps = 8;
    for i in 0..=steps {
        let p = truth + (0.5 - truth) * i as f64 / steps as f64;
        substituted.push(PropertyDistribution::binary(p)?);
    }
    let sweep = sensitivity_sweep(&eval, &mia_config, &substituted)?;

    let mut plot = Vec::new();
    let mut table = ResultTable::default();
    for point in &sweep {
        plot.push(vec![
            point.substituted.class1_fraction().to_string(),
            point.auc_enhanced.to_string(),
            point.auc_baseline.to_string(),
        ]);
        table.append(ResultRow {
            task: config.task_id.clone(),
            mode: "mia_sensitivity".into(),
            model_id: "mia-target".into(),
            p_real: truth.to_string(),
            p_infer: point.substituted.class1_fraction().to_string(),
            abs_diff: point.auc_enhanced,
            query_count: config.mia_k,
            trial: 0,
            seed: config.master_seed,
        });
    }
    let csv_path = config.output_dir.join("f17.csv");
    write_plot_csv(
        &csv_path,
        &["substituted_p", "auc_enhanced", "auc_baseline"],
        &plot,
    )?;
    table.write_csv(&config.output_dir.join("f17_results.csv"))?;
    Ok(FigureOutput { table, csv_path })
}

