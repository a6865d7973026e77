//! Command-line front end: dataset synthesis, model training, attacks,
//! mitigations, figure pipelines, and result summaries.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use propinfer_core::attack::{
    full_black_box, optimize_latent_codes, partial_black_box, CodeOptimizerSettings, LatentCodeSet,
};
use propinfer_core::classifier::{gate_release, train_classifier, PropertyClassifier};
use propinfer_core::data::{
    io as dataio, rebalance, split, synth_domain_shifted, AttributeSpec, DomainShift, DomainTag,
    PropertyDistribution, SplitPlan,
};
use propinfer_core::experiment::{
    load_ensemble, run_figure, run_task, summarize, write_summary_csv, ExperimentConfig, FigureId,
    ResultTable,
};
use propinfer_core::gan::{train_gan, GanConfig, GanLoss, LatentPrior, TrainedGan};
use propinfer_core::membership::{
    calibrated_error, enhancement_term, membership_statistic, MiaConfig, MiaScore,
};
use propinfer_core::nn::{Activation, DenseNetworkSpec, OptimizerConfig};

#[derive(Parser)]
#[command(
    name = "propinfer",
    about = "Property and membership inference lab for small GANs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled dataset with a controlled class distribution.
    Synth(SynthArgs),
    /// Split a dataset into disjoint target/shadow/classifier pools.
    Split(SplitArgs),
    /// Train a generator/discriminator pair on a dataset.
    TrainGan(TrainGanArgs),
    /// Train a property classifier.
    TrainClf(TrainClfArgs),
    /// Full black-box attack: blind samples only.
    AttackFull(AttackFullArgs),
    /// Partial black-box attack: caller-supplied latent codes.
    AttackPartial(AttackPartialArgs),
    /// Craft a latent code set against a shadow ensemble.
    OptimizeCodes(OptimizeCodesArgs),
    /// Membership inference with optional property enhancement.
    Mia(MiaArgs),
    /// Dataset- or release-level mitigations.
    Mitigate(MitigateArgs),
    /// Run one figure pipeline from a config file.
    Figure(FigureArgs),
    /// Run the full task pipeline from a config file.
    RunTask(RunTaskArgs),
    /// Grouped statistics over result tables.
    Summarize(SummarizeArgs),
}

fn parse_property(text: &str) -> Result<PropertyDistribution> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("cannot parse property '{text}'"))?;
    let p = if parts.len() == 1 {
        PropertyDistribution::binary(parts[0])
    } else {
        PropertyDistribution::new(parts)
    }?;
    Ok(p)
}

fn parse_widths(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(Into::into))
        .collect()
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    domain: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Single class-1 proportion or comma-separated per-class proportions.
    #[arg(long)]
    property: String,
    #[arg(long, default_value_t = 0.0)]
    shift: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    target: usize,
    #[arg(long)]
    shadow: usize,
    #[arg(long)]
    classifier: usize,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    outdir: PathBuf,
}

#[derive(Args)]
struct TrainGanArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "wgan_gp")]
    loss: String,
    #[arg(long, default_value_t = 16)]
    latent_dim: usize,
    #[arg(long, default_value = "64,64")]
    gen_hidden: String,
    #[arg(long, default_value = "64,64")]
    disc_hidden: String,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 3)]
    n_critic: usize,
    #[arg(long, default_value_t = 10.0)]
    gp_lambda: f64,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    /// Draw latent codes from U(-1,1) instead of a standard Gaussian.
    #[arg(long, default_value_t = false)]
    uniform_prior: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainClfArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "32")]
    hidden: String,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AttackFullArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    clf: PathBuf,
    #[arg(long, default_value_t = 20000)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    ground_truth: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AttackPartialArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    clf: PathBuf,
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    ground_truth: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeCodesArgs {
    /// Directory with shadow model subdirectories plus ensemble.json.
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long)]
    clf: PathBuf,
    #[arg(long, default_value_t = 100)]
    set_size: usize,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long)]
    seed: u64,
    /// Optional starting code set (JSON); defaults to a prior draw.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MiaArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    members: PathBuf,
    #[arg(long)]
    nonmembers: PathBuf,
    #[arg(long, default_value_t = 4096)]
    k: usize,
    #[arg(long, default_value_t = 2.0)]
    lambda_p: f64,
    /// Inferred training-set property used by the enhancement.
    #[arg(long)]
    property: Option<String>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MitigateArgs {
    #[command(subcommand)]
    mode: MitigateMode,
}

#[derive(Subcommand)]
enum MitigateMode {
    /// Add reservoir samples so the dataset realizes a fake property.
    Rebalance {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        reservoir: PathBuf,
        #[arg(long)]
        fake: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Release only a subset whose predicted labels realize a fake property.
    Gate {
        #[arg(long)]
        clf: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fake: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FigureArgs {
    /// One of f4 f5 f6 f7 f8 f9 f10 f14 f15 f16 f17.
    #[arg(long)]
    id: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeatable `key=value` config overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunTaskArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    out: PathBuf,
    /// Result table CSVs.
    tables: Vec<PathBuf>,
}

fn load_config(path: &Option<PathBuf>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::load(p)
            .with_context(|| format!("loading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    for entry in overrides {
        let (key, value) = entry
            .split_once('=')
            .with_context(|| format!("override '{entry}' is not key=value"))?;
        config.apply_kv(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn gan_config_from_args(args: &TrainGanArgs, sample_dim: usize) -> Result<GanConfig> {
    let loss = match args.loss.as_str() {
        "wgan_gp" => GanLoss::WganGp,
        "minimax" => GanLoss::Minimax,
        other => bail!("unknown loss '{other}' (expected wgan_gp or minimax)"),
    };
    let gen_hidden = parse_widths(&args.gen_hidden)?;
    let disc_hidden = parse_widths(&args.disc_hidden)?;

    let mut gen_widths = vec![args.latent_dim];
    gen_widths.extend_from_slice(&gen_hidden);
    gen_widths.push(sample_dim);
    let mut gen_acts = vec![Activation::LeakyRelu(0.2); gen_hidden.len()];
    gen_acts.push(Activation::Tanh);

    let mut disc_widths = vec![sample_dim];
    disc_widths.extend_from_slice(&disc_hidden);
    disc_widths.push(1);
    let mut disc_acts = vec![Activation::LeakyRelu(0.2); disc_hidden.len()];
    disc_acts.push(match loss {
        GanLoss::WganGp => Activation::Identity,
        GanLoss::Minimax => Activation::Sigmoid,
    });

    Ok(GanConfig {
        generator: DenseNetworkSpec::new(gen_widths, gen_acts, 0)?,
        discriminator: DenseNetworkSpec::new(disc_widths, disc_acts, 0)?,
        prior: if args.uniform_prior {
            LatentPrior::uniform(args.latent_dim)
        } else {
            LatentPrior::gaussian(args.latent_dim)
        },
        loss,
        gp_lambda: args.gp_lambda,
        n_critic: args.n_critic,
        batch_size: args.batch,
        gen_opt: OptimizerConfig::adam(args.lr, args.beta1, args.beta2)
            .with_batch_size(args.batch),
        disc_opt: OptimizerConfig::adam(args.lr, args.beta1, args.beta2)
            .with_batch_size(args.batch),
        train_steps: args.steps,
        seed: args.seed,
    })
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(args) => {
            let domain: DomainTag = args.domain.parse()?;
            let attr = AttributeSpec::new(args.classes)?;
            let property = parse_property(&args.property)?;
            let ds = synth_domain_shifted(
                domain,
                args.n,
                &attr,
                &property,
                args.seed,
                DomainShift { amount: args.shift },
            )?;
            dataio::write_csv(&ds, &args.out)?;
            println!(
                "wrote {} samples ({} classes, dim {}) to {}",
                ds.len(),
                attr.n_classes,
                ds.dim(),
                args.out.display()
            );
        }
        Command::Split(args) => {
            let ds = dataio::read_csv(&args.input)?;
            let plan = SplitPlan {
                target_size: args.target,
                shadow_size: args.shadow,
                classifier_size: args.classifier,
                classifier_train_fraction: args.train_fraction,
            };
            let pools = split(&ds, &plan, args.seed)?;
            std::fs::create_dir_all(&args.outdir)?;
            dataio::write_csv(&pools.target, &args.outdir.join("target.csv"))?;
            dataio::write_csv(&pools.shadow, &args.outdir.join("shadow.csv"))?;
            dataio::write_csv(
                &pools.classifier_train,
                &args.outdir.join("classifier_train.csv"),
            )?;
            dataio::write_csv(
                &pools.classifier_test,
                &args.outdir.join("classifier_test.csv"),
            )?;
            println!(
                "pools: target {} shadow {} classifier {}+{}",
                pools.target.len(),
                pools.shadow.len(),
                pools.classifier_train.len(),
                pools.classifier_test.len()
            );
        }
        Command::TrainGan(args) => {
            let ds = dataio::read_csv(&args.data)?;
            let config = gan_config_from_args(&args, ds.dim())?;
            let gan = train_gan(&ds, &config)?;
            gan.save_dir(&args.out)?;
            match &gan.log().failure {
                Some(reason) => println!(
                    "training halted early ({reason}); partial model saved to {}",
                    args.out.display()
                ),
                None => println!(
                    "trained {} steps; model saved to {}",
                    gan.log().entries.len(),
                    args.out.display()
                ),
            }
        }
        Command::TrainClf(args) => {
            let train = dataio::read_csv(&args.train)?;
            let test = dataio::read_csv(&args.test)?;
            let hidden = parse_widths(&args.hidden)?;
            let mut widths = vec![train.dim()];
            widths.extend_from_slice(&hidden);
            widths.push(train.attribute.n_classes);
            let mut acts = vec![Activation::LeakyRelu(0.2); hidden.len()];
            acts.push(Activation::Softmax);
            let spec = DenseNetworkSpec::new(widths, acts, 0)?;
            let clf = train_classifier(
                &train,
                &test,
                &spec,
                &OptimizerConfig::adam(args.lr, 0.9, 0.999).with_batch_size(args.batch),
                args.epochs,
                args.seed,
            )?;
            clf.save(&args.out)?;
            println!(
                "classifier test accuracy {:.4}; saved to {}",
                clf.test_accuracy(),
                args.out.display()
            );
        }
        Command::AttackFull(args) => {
            let gan = TrainedGan::load_dir(&args.model)?;
            let clf = PropertyClassifier::load(&args.clf)?;
            let mut report = full_black_box(
                &gan,
                &clf,
                args.samples,
                args.seed,
                &args.model.display().to_string(),
            )?;
            if let Some(truth) = &args.ground_truth {
                report = report.with_ground_truth(&parse_property(truth)?)?;
            }
            report.save(&args.out)?;
            println!("inferred {}", report.inferred);
            if let Some(diff) = report.abs_difference {
                println!("abs_diff {diff}");
            }
        }
        Command::AttackPartial(args) => {
            let gan = TrainedGan::load_dir(&args.model)?;
            let clf = PropertyClassifier::load(&args.clf)?;
            let codes = LatentCodeSet::load(&args.codes)?;
            let mut report = partial_black_box(
                &gan,
                &clf,
                &codes,
                &args.model.display().to_string(),
            )?;
            if let Some(truth) = &args.ground_truth {
                report = report.with_ground_truth(&parse_property(truth)?)?;
            }
            report.save(&args.out)?;
            println!("inferred {}", report.inferred);
            if let Some(diff) = report.abs_difference {
                println!("abs_diff {diff}");
            }
        }
        Command::OptimizeCodes(args) => {
            let ensemble = load_ensemble(&args.ensemble)?;
            let clf = PropertyClassifier::load(&args.clf)?;
            let init = args.init.as_deref().map(LatentCodeSet::load).transpose()?;
            let settings = CodeOptimizerSettings {
                optimizer: OptimizerConfig::adam(args.lr, 0.9, 0.999),
                iterations: args.iterations,
                ..Default::default()
            };
            let codes = optimize_latent_codes(
                &ensemble,
                &clf,
                args.set_size,
                &settings,
                args.seed,
                init.as_ref(),
            )?;
            let trace = codes.trace.clone().expect("optimized sets carry a trace");
            codes.save(&args.out)?;
            println!(
                "loss {} -> {} in {} iterations{}{}",
                trace.initial_loss,
                trace.final_loss,
                trace.iterations_run,
                if trace.early_stopped { " (early stop)" } else { "" },
                if trace.failed { " (FAILED)" } else { "" },
            );
        }
        Command::Mia(args) => {
            let target = TrainedGan::load_dir(&args.target)?;
            let reference = TrainedGan::load_dir(&args.reference)?;
            let members = dataio::read_csv(&args.members)?;
            let nonmembers = dataio::read_csv(&args.nonmembers)?;
            let mut config = MiaConfig::new(args.k);
            config.lambda_p = args.lambda_p;
            if let Some(p) = &args.property {
                config.attribute_properties = vec![parse_property(p)?];
            }

            let mut scores = Vec::new();
            let mut add = |data: &propinfer_core::data::LabeledDataset,
                           is_member: bool,
                           offset: usize|
             -> Result<()> {
                for (i, (sample, &label)) in data.samples.iter().zip(&data.labels).enumerate() {
                    let id = offset + i;
                    let seed = propinfer_core::seeds::derive_seed(args.seed, "mia-query", id as u64);
                    let (raw, reference_error, calibrated) = calibrated_error(
                        sample,
                        &target,
                        &reference,
                        args.k,
                        seed,
                        config.distance,
                    )?;
                    let enhancement = if config.attribute_properties.is_empty() {
                        0.0
                    } else {
                        enhancement_term(&config, &[label])?
                    };
                    scores.push(MiaScore {
                        sample_id: id,
                        raw_error: raw,
                        reference_error,
                        calibrated,
                        enhancement,
                        is_member,
                    });
                }
                Ok(())
            };
            add(&members, true, 0)?;
            add(&nonmembers, false, members.len())?;

            let mut writer = csv::Writer::from_path(&args.out)?;
            writer.write_record([
                "sample_id",
                "calibrated_error",
                "threshold_margin",
                "is_member",
            ])?;
            let enhanced = !config.attribute_properties.is_empty();
            for s in &scores {
                writer.write_record([
                    s.sample_id.to_string(),
                    s.calibrated.to_string(),
                    membership_statistic(s, enhanced).to_string(),
                    (s.is_member as u8).to_string(),
                ])?;
            }
            writer.flush()?;

            let baseline: Vec<(f64, bool)> = scores
                .iter()
                .map(|s| (membership_statistic(s, false), s.is_member))
                .collect();
            println!("auc_baseline {}", propinfer_core::membership::auc(&baseline)?);
            if enhanced {
                let enh: Vec<(f64, bool)> = scores
                    .iter()
                    .map(|s| (membership_statistic(s, true), s.is_member))
                    .collect();
                println!("auc_enhanced {}", propinfer_core::membership::auc(&enh)?);
            }
        }
        Command::Mitigate(args) => match args.mode {
            MitigateMode::Rebalance {
                data,
                reservoir,
                fake,
                seed,
                out,
            } => {
                let ds = dataio::read_csv(&data)?;
                let res = dataio::read_csv(&reservoir)?;
                let fake = parse_property(&fake)?;
                let rebalanced = rebalance(&ds, &fake, &res, seed)?;
                dataio::write_csv(&rebalanced, &out)?;
                println!(
                    "rebalanced {} -> {} samples; empirical property {}",
                    ds.len(),
                    rebalanced.len(),
                    rebalanced.empirical_property()
                );
            }
            MitigateMode::Gate {
                clf,
                data,
                fake,
                out,
            } => {
                let clf = PropertyClassifier::load(&clf)?;
                let ds = dataio::read_csv(&data)?;
                let fake = parse_property(&fake)?;
                let subset = gate_release(&clf, &ds.samples, &fake)?;
                let n = subset.len();
                let labels = clf.predict_hard(&subset)?;
                let released = propinfer_core::data::LabeledDataset {
                    samples: subset,
                    labels,
                    domain: ds.domain,
                    attribute: ds.attribute.clone(),
                };
                dataio::write_csv(&released, &out)?;
                println!("released {n} of {} samples", ds.len());
            }
        },
        Command::Figure(args) => {
            let figure: FigureId = args.id.parse()?;
            let config = load_config(&args.config, &args.overrides)?;
            let output = run_figure(figure, &config)?;
            println!(
                "figure {figure}: {} rows, plot data at {}",
                output.table.len(),
                output.csv_path.display()
            );
        }
        Command::RunTask(args) => {
            let config = load_config(&args.config, &args.overrides)?;
            let output = run_task(&config)?;
            println!(
                "task '{}' finished: {} rows, classifier accuracy {:.4}",
                config.task_id,
                output.table.len(),
                output.classifier_accuracy
            );
            println!("results: {}", output.run_dir.join("results.csv").display());
            println!("checksum: {}", output.table_checksum);
        }
        Command::Summarize(args) => {
            if args.tables.is_empty() {
                bail!("summarize needs at least one result table");
            }
            let tables: Vec<ResultTable> = args
                .tables
                .iter()
                .map(|p| ResultTable::read_csv(p))
                .collect::<std::result::Result<_, _>>()?;
            let refs: Vec<&ResultTable> = tables.iter().collect();
            let rows = summarize(&refs)?;
            write_summary_csv(&rows, &args.out)?;
            println!("{} groups -> {}", rows.len(), args.out.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
