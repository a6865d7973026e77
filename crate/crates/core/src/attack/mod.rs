//! Property inference attacks against the generator's query surfaces, plus
//! the evaluation metrics.

mod optimize;

use serde::{Deserialize, Serialize};

use crate::classifier::{argmax_tie_high, ProbClassifier};
use crate::data::PropertyDistribution;
use crate::error::{CoreError, Result};
use crate::gan::{BlindSampler, LatentSampler, TrainedGan};

pub use optimize::{optimize_latent_codes, CodeOptimizerSettings, OptimizationTrace};

/// How per-sample classifier outputs are summarized into one distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Fraction of hard (argmax) labels per class. Used at inference time.
    Hard,
    /// Coordinate-wise mean of the probability vectors. Differentiable;
    /// used inside the latent-code optimization.
    Soft,
}

/// Summarize classifier probability vectors into a property distribution.
pub fn aggregate(probs: &[Vec<f64>], mode: AggregationMode) -> Result<PropertyDistribution> {
    if probs.is_empty() {
        return Err(CoreError::EmptyInput("aggregate probability batch"));
    }
    let n_classes = probs[0].len();
    match mode {
        AggregationMode::Hard => {
            let mut counts = vec![0usize; n_classes];
            for p in probs {
                counts[argmax_tie_high(p)] += 1;
            }
            let n = probs.len() as f64;
            PropertyDistribution::new(counts.into_iter().map(|c| c as f64 / n).collect())
        }
        AggregationMode::Soft => {
            let n = probs.len() as f64;
            let mut mean = vec![0.0; n_classes];
            for p in probs {
                for (m, v) in mean.iter_mut().zip(p) {
                    *m += v;
                }
            }
            for m in mean.iter_mut() {
                *m /= n;
            }
            PropertyDistribution::new(mean)
        }
    }
}

/// Where a latent code set came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeOrigin {
    Random,
    Optimized,
}

/// A set of latent codes, either drawn from the prior or crafted by
/// gradient descent over a shadow ensemble.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatentCodeSet {
    pub codes: Vec<Vec<f64>>,
    pub origin: CodeOrigin,
    pub trace: Option<OptimizationTrace>,
}

impl LatentCodeSet {
    pub fn random(codes: Vec<Vec<f64>>) -> Result<Self> {
        Self::validate_codes(&codes)?;
        Ok(Self {
            codes,
            origin: CodeOrigin::Random,
            trace: None,
        })
    }

    pub(crate) fn validate_codes(codes: &[Vec<f64>]) -> Result<()> {
        if codes.is_empty() {
            return Err(CoreError::EmptyInput("latent code set"));
        }
        let dim = codes[0].len();
        if codes.iter().any(|c| c.len() != dim) {
            return Err(CoreError::InvalidConfig(
                "latent codes must share one dimension".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.codes[0].len()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let set: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::validate_codes(&set.codes)?;
        Ok(set)
    }
}

/// Shadow generators with their known training-set properties, balanced over
/// the property grid within one member.
pub struct ShadowEnsemble {
    members: Vec<(TrainedGan, PropertyDistribution)>,
}

impl ShadowEnsemble {
    pub fn new(members: Vec<(TrainedGan, PropertyDistribution)>) -> Result<Self> {
        if members.is_empty() {
            return Err(CoreError::EmptyInput("shadow ensemble"));
        }
        let dim = members[0].0.latent_prior().dim;
        if members.iter().any(|(g, _)| g.latent_prior().dim != dim) {
            return Err(CoreError::InvalidConfig(
                "shadow generators must share the latent dimension".into(),
            ));
        }
        // Uniform coverage of the grid: member counts per distinct property
        // may differ by at most one.
        let mut counts: Vec<(Vec<u64>, usize)> = Vec::new();
        for (_, p) in &members {
            let key: Vec<u64> = p.probs().iter().map(|v| v.to_bits()).collect();
            match counts.iter_mut().find(|(k, _)| *k == key) {
                Some((_, c)) => *c += 1,
                None => counts.push((key, 1)),
            }
        }
        let min = counts.iter().map(|(_, c)| *c).min().unwrap();
        let max = counts.iter().map(|(_, c)| *c).max().unwrap();
        if max - min > 1 {
            return Err(CoreError::InvalidConfig(format!(
                "shadow properties must cover the grid uniformly (counts {min}..{max})"
            )));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[(TrainedGan, PropertyDistribution)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn latent_dim(&self) -> usize {
        self.members[0].0.latent_prior().dim
    }

    /// Balanced sub-ensemble with `per_property` members per grid point,
    /// in first-seen property order.
    pub fn subsample(&self, per_property: usize) -> Result<ShadowEnsemble> {
        let mut kept: Vec<(TrainedGan, PropertyDistribution)> = Vec::new();
        let mut counts: Vec<(Vec<u64>, usize)> = Vec::new();
        for (g, p) in &self.members {
            let key: Vec<u64> = p.probs().iter().map(|v| v.to_bits()).collect();
            let entry = match counts.iter_mut().find(|(k, _)| *k == key) {
                Some(e) => e,
                None => {
                    counts.push((key, 0));
                    counts.last_mut().unwrap()
                }
            };
            if entry.1 < per_property {
                entry.1 += 1;
                kept.push((g.clone(), p.clone()));
            }
        }
        ShadowEnsemble::new(kept)
    }
}

/// Which query surface an attack used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    FullBb,
    PartialBb,
}

impl std::fmt::Display for AttackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttackMode::FullBb => write!(f, "full_bb"),
            AttackMode::PartialBb => write!(f, "partial_bb"),
        }
    }
}

/// Outcome of one attack run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackReport {
    pub inferred: PropertyDistribution,
    pub ground_truth: Option<PropertyDistribution>,
    /// Total-variation distance to the ground truth, when known.
    pub abs_difference: Option<f64>,
    pub query_count: usize,
    pub mode: AttackMode,
    pub seed: u64,
    pub model_id: String,
}

impl AttackReport {
    /// Attach the ground truth and compute the absolute difference.
    pub fn with_ground_truth(mut self, truth: &PropertyDistribution) -> Result<Self> {
        self.abs_difference = Some(absolute_difference(&self.inferred, truth)?);
        self.ground_truth = Some(truth.clone());
        Ok(self)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Full black-box attack: draw `n_samples` blind samples, label them, and
/// summarize the hard labels.
pub fn full_black_box<T, C>(
    target: &T,
    clf: &C,
    n_samples: usize,
    seed: u64,
    model_id: &str,
) -> Result<AttackReport>
where
    T: BlindSampler + ?Sized,
    C: ProbClassifier + ?Sized,
{
    if n_samples == 0 {
        return Err(CoreError::EmptyInput("full black-box sample count"));
    }
    let samples = target.sample_blind(n_samples, seed);
    let probs = clf.predict_proba(&samples)?;
    let inferred = aggregate(&probs, AggregationMode::Hard)?;
    Ok(AttackReport {
        inferred,
        ground_truth: None,
        abs_difference: None,
        query_count: n_samples,
        mode: AttackMode::FullBb,
        seed,
        model_id: model_id.to_string(),
    })
}

/// Partial black-box attack: feed a crafted latent code set to the target's
/// code-accepting surface and summarize the hard labels of the outputs.
pub fn partial_black_box<T, C>(
    target: &T,
    clf: &C,
    codes: &LatentCodeSet,
    model_id: &str,
) -> Result<AttackReport>
where
    T: LatentSampler + ?Sized,
    C: ProbClassifier + ?Sized,
{
    LatentCodeSet::validate_codes(&codes.codes)?;
    if codes.dim() != target.latent_dim() {
        return Err(CoreError::ShapeMismatch {
            context: "latent code dimension".into(),
            expected: target.latent_dim(),
            found: codes.dim(),
        });
    }
    let samples = target.generate_from(&codes.codes)?;
    let probs = clf.predict_proba(&samples)?;
    let inferred = aggregate(&probs, AggregationMode::Hard)?;
    Ok(AttackReport {
        inferred,
        ground_truth: None,
        abs_difference: None,
        query_count: codes.len(),
        mode: AttackMode::PartialBb,
        seed: 0,
        model_id: model_id.to_string(),
    })
}

/// Absolute difference between two property distributions: |p - q| on the
/// class-1 proportion for binary attributes, total variation in general
/// (which reduces to the former when both have two classes).
pub fn absolute_difference(a: &PropertyDistribution, b: &PropertyDistribution) -> Result<f64> {
    if a.n_classes() != b.n_classes() {
        return Err(CoreError::ShapeMismatch {
            context: "absolute_difference".into(),
            expected: a.n_classes(),
            found: b.n_classes(),
        });
    }
    Ok(a.probs()
        .iter()
        .zip(b.probs())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / 2.0)
}

/// Cosine similarity of two distributions viewed as vectors.
pub fn cosine_similarity(a: &PropertyDistribution, b: &PropertyDistribution) -> Result<f64> {
    if a.n_classes() != b.n_classes() {
        return Err(CoreError::ShapeMismatch {
            context: "cosine_similarity".into(),
            expected: a.n_classes(),
            found: b.n_classes(),
        });
    }
    let dot: f64 = a.probs().iter().zip(b.probs()).map(|(x, y)| x * y).sum();
    let na: f64 = a.probs().iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.probs().iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(CoreError::ZeroVector("cosine_similarity"));
    }
    Ok(dot / (na * nb))
}

/// A generator exposing both query surfaces, paired with its known property.
pub trait GanSurface: BlindSampler + LatentSampler {}
impl<T: BlindSampler + LatentSampler> GanSurface for T {}

/// One row of the optimized-vs-random comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareRow {
    pub sample_count: usize,
    pub wins: usize,
    pub comparisons: usize,
    /// Fraction of (target, trial) pairs where the optimized codes produced
    /// a strictly smaller error than the random draw. Ties do not count.
    pub ratio: f64,
}

/// Compare the partial attack with optimized codes against repeated full
/// black-box attacks at matched sample budgets. Per sample count, one code
/// set is optimized and reused across every target, while the full attack is
/// repeated `trials` times per target with fresh seeds; the ratio counts
/// strict wins of the optimized arm.
pub fn compare_attack_modes(
    targets: &[(&dyn GanSurface, PropertyDistribution)],
    clf: &crate::classifier::PropertyClassifier,
    ensemble: &ShadowEnsemble,
    sample_counts: &[usize],
    trials: usize,
    settings: &CodeOptimizerSettings,
    seed: u64,
) -> Result<Vec<CompareRow>> {
    if trials == 0 {
        return Err(CoreError::InvalidConfig("trials must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(sample_counts.len());
    for (ci, &count) in sample_counts.iter().enumerate() {
        let codes = optimize_latent_codes(
            ensemble,
            clf,
            count,
            settings,
            crate::seeds::derive_seed(seed, "compare-opt", ci as u64),
            None,
        )?;
        let mut wins = 0usize;
        let mut comparisons = 0usize;
        for (ti, (target, truth)) in targets.iter().enumerate() {
            let optimized = partial_black_box(*target, clf, &codes, &format!("target{ti}"))?;
            let opt_err = absolute_difference(&optimized.inferred, truth)?;
            for trial in 0..trials {
                let trial_seed = crate::seeds::derive_seed(
                    seed,
                    "compare-random",
                    (ci * targets.len() * trials + ti * trials + trial) as u64,
                );
                let random =
                    full_black_box(*target, clf, count, trial_seed, &format!("target{ti}"))?;
                let rand_err = absolute_difference(&random.inferred, truth)?;
                if opt_err < rand_err {
                    wins += 1;
                }
                comparisons += 1;
            }
        }
        rows.push(CompareRow {
            sample_count: count,
            wins,
            comparisons,
            ratio: wins as f64 / comparisons as f64,
        });
    }
    Ok(rows)
}
