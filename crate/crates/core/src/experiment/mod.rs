//! Reproducible experiment orchestration: configuration, result tables, the
//! end-to-end task runner, and the per-figure pipelines.

mod figures;
mod runner;
mod summary;

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::{DomainTag, PropertyDistribution};
use crate::error::{CoreError, Result};
use crate::gan::GanLoss;

pub use figures::{build_mia_evaluation, run_figure, FigureId, FigureOutput, ALL_FIGURES};
pub use runner::{
    build_world, classifier_spec_from, domain_dim, gan_config_from, load_ensemble,
    optimizer_settings_from, random_codes, run_task, save_ensemble, train_shadows, train_targets,
    TargetModel, TaskOutput, TaskWorld,
};
pub use summary::{summarize, write_summary_csv, SummaryRow};

/// Everything a run needs, expressible as a flat key-value config file.
///
/// Defaults are desk scale: they shrink dataset and model sizes roughly an
/// order of magnitude below the reference protocol while keeping every count
/// reachable through the config file.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub task_id: String,
    pub domain: DomainTag,
    pub n_classes: usize,
    /// Class-1 proportions of the binary grid.
    pub property_grid: Vec<f64>,
    pub targets_per_property: usize,
    pub shadows_per_property: usize,
    /// Training-set size of every target and shadow generator.
    pub dataset_size: usize,
    pub total_samples: usize,
    pub target_pool_size: usize,
    pub shadow_pool_size: usize,
    pub classifier_pool_size: usize,
    pub classifier_train_fraction: f64,

    pub gan_loss: GanLoss,
    pub latent_dim: usize,
    pub gaussian_prior: bool,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub gp_lambda: f64,
    pub n_critic: usize,
    pub gan_batch: usize,
    pub gan_learning_rate: f64,
    pub gan_beta1: f64,
    pub gan_beta2: f64,
    pub train_steps: usize,
    pub gan_lr_decay: bool,

    pub clf_hidden: Vec<usize>,
    pub clf_epochs: usize,
    pub clf_learning_rate: f64,
    pub clf_batch: usize,
    /// Distribution-shift knob: when nonzero the classifier trains on a
    /// perturbed variant of the domain.
    pub clf_domain_shift: f64,

    /// Blind-sample budget of the headline full black-box run.
    pub full_bb_samples: usize,
    /// Sample counts swept by the task runner and the sample-count figure.
    pub attack_sample_counts: Vec<usize>,
    pub optimized_set_size: usize,
    pub opt_iterations: usize,
    pub opt_learning_rate: f64,
    /// Full black-box repetitions per comparison cell.
    pub trials: usize,
    /// Sample counts of the optimized-vs-random comparison figure.
    pub compare_sample_counts: Vec<usize>,
    /// Ensemble sizes swept by the shadow-count figure.
    pub shadow_count_sweep: Vec<usize>,
    /// Random restarts of the starting-point figure.
    pub starting_points: usize,
    /// Out-of-range target property and model count for that figure.
    pub out_of_range_property: f64,
    pub out_of_range_targets: usize,

    /// Per-class proportions of the multi-class figures.
    pub multiclass_property: Vec<f64>,

    pub mia_members: usize,
    pub mia_nonmembers: usize,
    pub mia_k: usize,
    pub mia_lambda_p: f64,
    pub mia_target_property: f64,
    pub mia_nonmember_property: f64,

    pub output_dir: PathBuf,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task_id: "mixture".into(),
            domain: DomainTag::Mixture2d,
            n_classes: 2,
            property_grid: vec![0.3, 0.4, 0.5, 0.6, 0.7],
            targets_per_property: 8,
            shadows_per_property: 20,
            dataset_size: 512,
            total_samples: 8192,
            target_pool_size: 2048,
            shadow_pool_size: 2048,
            classifier_pool_size: 2048,
            classifier_train_fraction: 0.7,

            gan_loss: GanLoss::WganGp,
            latent_dim: 16,
            gaussian_prior: true,
            gen_hidden: vec![64, 64],
            disc_hidden: vec![64, 64],
            gp_lambda: 10.0,
            n_critic: 3,
            gan_batch: 100,
            gan_learning_rate: 1e-3,
            gan_beta1: 0.5,
            gan_beta2: 0.9,
            train_steps: 2000,
            gan_lr_decay: true,

            clf_hidden: vec![32],
            clf_epochs: 30,
            clf_learning_rate: 0.01,
            clf_batch: 32,
            clf_domain_shift: 0.0,

            full_bb_samples: 20000,
            attack_sample_counts: vec![64, 256, 1024, 4096],
            optimized_set_size: 100,
            opt_iterations: 500,
            opt_learning_rate: 0.01,
            trials: 20,
            compare_sample_counts: vec![25, 50, 100, 200],
            shadow_count_sweep: vec![25, 50, 100],
            starting_points: 5,
            out_of_range_property: 0.2,
            out_of_range_targets: 5,

            multiclass_property: (1..=10).map(|c| c as f64 / 55.0).collect(),

            mia_members: 256,
            mia_nonmembers: 768,
            mia_k: 4096,
            mia_lambda_p: 2.0,
            mia_target_property: 0.3,
            mia_nonmember_property: 0.5,

            output_dir: PathBuf::from("runs/default"),
            master_seed: 1,
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CoreError::InvalidConfig(format!("bad list entry '{s}' for {key}")))
        })
        .collect()
}

impl ExperimentConfig {
    /// Apply one `key = value` override.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |what: &str| CoreError::InvalidConfig(format!("bad value '{v}' for {what}"));
        match key {
            "task_id" => self.task_id = v.to_string(),
            "domain" => self.domain = v.parse()?,
            "n_classes" => self.n_classes = v.parse().map_err(|_| bad(key))?,
            "property_grid" => self.property_grid = parse_list(v, key)?,
            "targets_per_property" => {
                self.targets_per_property = v.parse().map_err(|_| bad(key))?
            }
            "shadows_per_property" => {
                self.shadows_per_property = v.parse().map_err(|_| bad(key))?
            }
            "dataset_size" => self.dataset_size = v.parse().map_err(|_| bad(key))?,
            "total_samples" => self.total_samples = v.parse().map_err(|_| bad(key))?,
            "target_pool_size" => self.target_pool_size = v.parse().map_err(|_| bad(key))?,
            "shadow_pool_size" => self.shadow_pool_size = v.parse().map_err(|_| bad(key))?,
            "classifier_pool_size" => {
                self.classifier_pool_size = v.parse().map_err(|_| bad(key))?
            }
            "classifier_train_fraction" => {
                self.classifier_train_fraction = v.parse().map_err(|_| bad(key))?
            }
            "gan_loss" => {
                self.gan_loss = match v {
                    "minimax" => GanLoss::Minimax,
                    "wgan_gp" => GanLoss::WganGp,
                    _ => return Err(bad(key)),
                }
            }
            "latent_dim" => self.latent_dim = v.parse().map_err(|_| bad(key))?,
            "gaussian_prior" => self.gaussian_prior = v.parse().map_err(|_| bad(key))?,
            "gen_hidden" => self.gen_hidden = parse_list(v, key)?,
            "disc_hidden" => self.disc_hidden = parse_list(v, key)?,
            "gp_lambda" => self.gp_lambda = v.parse().map_err(|_| bad(key))?,
            "n_critic" => self.n_critic = v.parse().map_err(|_| bad(key))?,
            "gan_batch" => self.gan_batch = v.parse().map_err(|_| bad(key))?,
            "gan_learning_rate" => self.gan_learning_rate = v.parse().map_err(|_| bad(key))?,
            "gan_beta1" => self.gan_beta1 = v.parse().map_err(|_| bad(key))?,
            "gan_beta2" => self.gan_beta2 = v.parse().map_err(|_| bad(key))?,
            "train_steps" => self.train_steps = v.parse().map_err(|_| bad(key))?,
            "gan_lr_decay" => self.gan_lr_decay = v.parse().map_err(|_| bad(key))?,
            "clf_hidden" => self.clf_hidden = parse_list(v, key)?,
            "clf_epochs" => self.clf_epochs = v.parse().map_err(|_| bad(key))?,
            "clf_learning_rate" => self.clf_learning_rate = v.parse().map_err(|_| bad(key))?,
            "clf_batch" => self.clf_batch = v.parse().map_err(|_| bad(key))?,
            "clf_domain_shift" => self.clf_domain_shift = v.parse().map_err(|_| bad(key))?,
            "full_bb_samples" => self.full_bb_samples = v.parse().map_err(|_| bad(key))?,
            "attack_sample_counts" => self.attack_sample_counts = parse_list(v, key)?,
            "optimized_set_size" => self.optimized_set_size = v.parse().map_err(|_| bad(key))?,
            "opt_iterations" => self.opt_iterations = v.parse().map_err(|_| bad(key))?,
            "opt_learning_rate" => self.opt_learning_rate = v.parse().map_err(|_| bad(key))?,
            "trials" => self.trials = v.parse().map_err(|_| bad(key))?,
            "compare_sample_counts" => self.compare_sample_counts = parse_list(v, key)?,
            "shadow_count_sweep" => self.shadow_count_sweep = parse_list(v, key)?,
            "starting_points" => self.starting_points = v.parse().map_err(|_| bad(key))?,
            "out_of_range_property" => {
                self.out_of_range_property = v.parse().map_err(|_| bad(key))?
            }
            "out_of_range_targets" => {
                self.out_of_range_targets = v.parse().map_err(|_| bad(key))?
            }
            "multiclass_property" => self.multiclass_property = parse_list(v, key)?,
            "mia_members" => self.mia_members = v.parse().map_err(|_| bad(key))?,
            "mia_nonmembers" => self.mia_nonmembers = v.parse().map_err(|_| bad(key))?,
            "mia_k" => self.mia_k = v.parse().map_err(|_| bad(key))?,
            "mia_lambda_p" => self.mia_lambda_p = v.parse().map_err(|_| bad(key))?,
            "mia_target_property" => {
                self.mia_target_property = v.parse().map_err(|_| bad(key))?
            }
            "mia_nonmember_property" => {
                self.mia_nonmember_property = v.parse().map_err(|_| bad(key))?
            }
            "output_dir" => self.output_dir = PathBuf::from(v),
            "master_seed" => self.master_seed = v.parse().map_err(|_| bad(key))?,
            other => {
                return Err(CoreError::InvalidConfig(format!(
                    "unknown config key '{other}'"
                )))
            }
        }
        Ok(())
    }

    /// Parse a config file: one `key = value` per line, `#` comments,
    /// blank lines ignored.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(CoreError::ConfigParse {
                line: i + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            config
                .apply_kv(key.trim(), value.trim())
                .map_err(|e| CoreError::ConfigParse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv_text(&std::fs::read_to_string(path)?)
    }

    /// Canonical key-value rendering; parsing it back reproduces the config.
    pub fn to_kv_text(&self) -> String {
        fn list<T: std::fmt::Display>(xs: &[T]) -> String {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("task_id", self.task_id.clone());
        push("domain", self.domain.to_string());
        push("n_classes", self.n_classes.to_string());
        push("property_grid", list(&self.property_grid));
        push("targets_per_property", self.targets_per_property.to_string());
        push("shadows_per_property", self.shadows_per_property.to_string());
        push("dataset_size", self.dataset_size.to_string());
        push("total_samples", self.total_samples.to_string());
        push("target_pool_size", self.target_pool_size.to_string());
        push("shadow_pool_size", self.shadow_pool_size.to_string());
        push("classifier_pool_size", self.classifier_pool_size.to_string());
        push(
            "classifier_train_fraction",
            self.classifier_train_fraction.to_string(),
        );
        push(
            "gan_loss",
            match self.gan_loss {
                GanLoss::Minimax => "minimax".into(),
                GanLoss::WganGp => "wgan_gp".into(),
            },
        );
        push("latent_dim", self.latent_dim.to_string());
        push("gaussian_prior", self.gaussian_prior.to_string());
        push("gen_hidden", list(&self.gen_hidden));
        push("disc_hidden", list(&self.disc_hidden));
        push("gp_lambda", self.gp_lambda.to_string());
        push("n_critic", self.n_critic.to_string());
        push("gan_batch", self.gan_batch.to_string());
        push("gan_learning_rate", self.gan_learning_rate.to_string());
        push("gan_beta1", self.gan_beta1.to_string());
        push("gan_beta2", self.gan_beta2.to_string());
        push("train_steps", self.train_steps.to_string());
        push("gan_lr_decay", self.gan_lr_decay.to_string());
        push("clf_hidden", list(&self.clf_hidden));
        push("clf_epochs", self.clf_epochs.to_string());
        push("clf_learning_rate", self.clf_learning_rate.to_string());
        push("clf_batch", self.clf_batch.to_string());
        push("clf_domain_shift", self.clf_domain_shift.to_string());
        push("full_bb_samples", self.full_bb_samples.to_string());
        push("attack_sample_counts", list(&self.attack_sample_counts));
        push("optimized_set_size", self.optimized_set_size.to_string());
        push("opt_iterations", self.opt_iterations.to_string());
        push("opt_learning_rate", self.opt_learning_rate.to_string());
        push("trials", self.trials.to_string());
        push("compare_sample_counts", list(&self.compare_sample_counts));
        push("shadow_count_sweep", list(&self.shadow_count_sweep));
        push("starting_points", self.starting_points.to_string());
        push("out_of_range_property", self.out_of_range_property.to_string());
        push("out_of_range_targets", self.out_of_range_targets.to_string());
        push("multiclass_property", list(&self.multiclass_property));
        push("mia_members", self.mia_members.to_string());
        push("mia_nonmembers", self.mia_nonmembers.to_string());
        push("mia_k", self.mia_k.to_string());
        push("mia_lambda_p", self.mia_lambda_p.to_string());
        push("mia_target_property", self.mia_target_property.to_string());
        push(
            "mia_nonmember_property",
            self.mia_nonmember_property.to_string(),
        );
        push("output_dir", self.output_dir.display().to_string());
        push("master_seed", self.master_seed.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.property_grid.is_empty()
            || self.property_grid.iter().any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(CoreError::InvalidConfig(
                "property grid entries must lie in [0,1]".into(),
            ));
        }
        for (name, v) in [
            ("targets_per_property", self.targets_per_property),
            ("shadows_per_property", self.shadows_per_property),
            ("dataset_size", self.dataset_size),
            ("optimized_set_size", self.optimized_set_size),
            ("trials", self.trials),
            ("mia_k", self.mia_k),
        ] {
            if v == 0 {
                return Err(CoreError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.n_classes < 2 {
            return Err(CoreError::InvalidConfig("n_classes must be >= 2".into()));
        }
        Ok(())
    }

    /// Binary property for a grid value.
    pub fn grid_property(&self, p: f64) -> Result<PropertyDistribution> {
        PropertyDistribution::binary(p)
    }
}

/// One attack-outcome row of a run's result table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub task: String,
    pub mode: String,
    pub model_id: String,
    pub p_real: String,
    pub p_infer: String,
    pub abs_diff: f64,
    pub query_count: usize,
    pub trial: usize,
    pub seed: u64,
}

/// Append-only result table, checksummed when written.
#[derive(Clone, Debug, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Compact display of a property: the class-1 proportion for binary
/// attributes, `|`-joined proportions otherwise.
pub fn format_property(p: &PropertyDistribution) -> String {
    if p.n_classes() == 2 {
        p.class1_fraction().to_string()
    } else {
        p.to_string()
    }
}

impl ResultTable {
    pub fn append(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record([
            "task",
            "mode",
            "model_id",
            "p_real",
            "p_infer",
            "abs_diff",
            "query_count",
            "trial",
            "seed",
        ])?;
        for r in &self.rows {
            writer.write_record([
                r.task.clone(),
                r.mode.clone(),
                r.model_id.clone(),
                r.p_real.clone(),
                r.p_infer.clone(),
                r.abs_diff.to_string(),
                r.query_count.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
            ])?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| CoreError::InvalidConfig(format!("csv flush: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Write `<path>` and `<path>.sha256`; returns the checksum.
    pub fn write_csv(&self, path: &Path) -> Result<String> {
        let text = self.to_csv_string()?;
        std::fs::write(path, &text)?;
        let checksum = sha256_hex(text.as_bytes());
        std::fs::write(
            path.with_extension("csv.sha256"),
            format!("{checksum}\n"),
        )?;
        Ok(checksum)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let r = record?;
            rows.push(ResultRow {
                task: r[0].to_string(),
                mode: r[1].to_string(),
                model_id: r[2].to_string(),
                p_real: r[3].to_string(),
                p_infer: r[4].to_string(),
                abs_diff: r[5]
                    .parse()
                    .map_err(|e| CoreError::InvalidConfig(format!("bad abs_diff: {e}")))?,
                query_count: r[6]
                    .parse()
                    .map_err(|e| CoreError::InvalidConfig(format!("bad query_count: {e}")))?,
                trial: r[7]
                    .parse()
                    .map_err(|e| CoreError::InvalidConfig(format!("bad trial: {e}")))?,
                seed: r[8]
                    .parse()
                    .map_err(|e| CoreError::InvalidConfig(format!("bad seed: {e}")))?,
            });
        }
        Ok(Self { rows })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip_reproduces_config() {
        let mut config = ExperimentConfig::default();
        config.task_id = "custom".into();
        config.property_grid = vec![0.3, 0.5, 0.7];
        config.train_steps = 123;
        config.gen_hidden = vec![32, 16];
        let text = config.to_kv_text();
        let parsed = ExperimentConfig::from_kv_text(&text).unwrap();
        assert_eq!(config, parsed);
    }

    #[test]
    fn kv_parser_reports_line_numbers() {
        let err = ExperimentConfig::from_kv_text("task_id = x\nnot a line\n").unwrap_err();
        match err {
            CoreError::ConfigParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        let err = ExperimentConfig::from_kv_text("unknown_key = 3\n").unwrap_err();
        assert!(err.to_string().contains("unknown_key"));
    }

    #[test]
    fn kv_parser_ignores_comments_and_blanks() {
        let config =
            ExperimentConfig::from_kv_text("# comment\n\ntrain_steps = 77\n").unwrap();
        assert_eq!(config.train_steps, 77);
    }

    #[test]
    fn result_table_csv_round_trip() {
        let mut table = ResultTable::default();
        table.append(ResultRow {
            task: "t".into(),
            mode: "full_bb".into(),
            model_id: "target_p30_0".into(),
            p_real: "0.3".into(),
            p_infer: "0.312".into(),
            abs_diff: 0.012,
            query_count: 20000,
            trial: 0,
            seed: 99,
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        let checksum = table.write_csv(&path).unwrap();
        assert_eq!(checksum.len(), 64);
        let restored = ResultTable::read_csv(&path).unwrap();
        assert_eq!(table.rows, restored.rows);
        let recorded = std::fs::read_to_string(path.with_extension("csv.sha256")).unwrap();
        assert_eq!(recorded.trim(), checksum);
    }
}
