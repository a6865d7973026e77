//! Reconstruction-based membership inference and its property-calibrated
//! enhancement.
//!
//! The baseline scores a query by its calibrated reconstruction error: the
//! distance to its nearest blind sample from the target generator minus the
//! same quantity against a reference generator. The enhancement shifts the
//! decision threshold by a term derived from the inferred training-set
//! proportion of the query's own attribute class.

use serde::{Deserialize, Serialize};

use crate::data::PropertyDistribution;
use crate::error::{CoreError, Result};
use crate::gan::BlindSampler;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    SquaredEuclidean,
}

impl DistanceKind {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceKind::SquaredEuclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum(),
        }
    }
}

/// Settings of the membership attack.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MiaConfig {
    /// Generated samples drawn per reconstruction query.
    pub reconstruction_budget: usize,
    pub distance: DistanceKind,
    /// Magnitude of the property-based threshold shift.
    pub lambda_p: f64,
    /// Inferred property per considered attribute (N attributes).
    pub attribute_properties: Vec<PropertyDistribution>,
    /// Decision threshold; AUC evaluation sweeps it instead.
    pub epsilon: Option<f64>,
}

impl MiaConfig {
    pub fn new(reconstruction_budget: usize) -> Self {
        Self {
            reconstruction_budget,
            distance: DistanceKind::SquaredEuclidean,
            lambda_p: 2.0,
            attribute_properties: Vec::new(),
            epsilon: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reconstruction_budget == 0 {
            return Err(CoreError::InvalidConfig(
                "reconstruction budget must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for MiaConfig {
    fn default() -> Self {
        Self::new(4096)
    }
}

/// Per-query attack record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiaScore {
    pub sample_id: usize,
    /// Reconstruction error against the target generator.
    pub raw_error: f64,
    /// Reconstruction error against the reference generator.
    pub reference_error: f64,
    /// raw_error - reference_error, exactly.
    pub calibrated: f64,
    /// Threshold shift from the inferred property; zero for the baseline.
    pub enhancement: f64,
    pub is_member: bool,
}

/// Nearest of `k` blind samples and its distance.
pub fn reconstruct<T: BlindSampler + ?Sized>(
    gan: &T,
    query: &[f64],
    k: usize,
    seed: u64,
    distance: DistanceKind,
) -> Result<(Vec<f64>, f64)> {
    if k == 0 {
        return Err(CoreError::InvalidConfig(
            "reconstruction budget must be >= 1".into(),
        ));
    }
    if query.len() != gan.sample_dim() {
        return Err(CoreError::ShapeMismatch {
            context: "reconstruct query width".into(),
            expected: gan.sample_dim(),
            found: query.len(),
        });
    }
    let candidates = gan.sample_blind(k, seed);
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let d = distance.eval(query, c);
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    Ok((candidates[best].clone(), best_dist))
}

/// Calibrated reconstruction error with paired seeds: the same budget and
/// the same seed drive both generators' draws.
pub fn calibrated_error<T, R>(
    query: &[f64],
    target: &T,
    reference: &R,
    k: usize,
    seed: u64,
    distance: DistanceKind,
) -> Result<(f64, f64, f64)>
where
    T: BlindSampler + ?Sized,
    R: BlindSampler + ?Sized,
{
    let (_, raw) = reconstruct(target, query, k, seed, distance)?;
    let (_, reference_error) = reconstruct(reference, query, k, seed, distance)?;
    Ok((raw, reference_error, raw - reference_error))
}

/// Threshold shift for a query whose attribute classes are `classes` (one
/// entry per considered attribute): lambda_p * mean over attributes of
/// (2 * P_i - 1), with P_i the inferred proportion of the query's own class.
pub fn enhancement_term(config: &MiaConfig, classes: &[usize]) -> Result<f64> {
    if config.attribute_properties.is_empty() {
        return Err(CoreError::InvalidConfig(
            "enhancement needs at least one inferred attribute property".into(),
        ));
    }
    if classes.len() != config.attribute_properties.len() {
        return Err(CoreError::ShapeMismatch {
            context: "enhancement attribute classes".into(),
            expected: config.attribute_properties.len(),
            found: classes.len(),
        });
    }
    let n = config.attribute_properties.len() as f64;
    let mut total = 0.0;
    for (property, &class) in config.attribute_properties.iter().zip(classes) {
        if class >= property.n_classes() {
            return Err(CoreError::InvalidConfig(format!(
                "class {class} out of range for inferred property"
            )));
        }
        let p = property.probs()[class];
        total += 2.0 * p - 1.0;
    }
    Ok(config.lambda_p * total / n)
}

/// Thresholded decision. Baseline: member iff calibrated < epsilon.
/// Enhanced: member iff calibrated < epsilon + the score's enhancement term.
pub fn decide(score: &MiaScore, config: &MiaConfig, enhanced: bool) -> Result<bool> {
    let epsilon = config.epsilon.ok_or_else(|| {
        CoreError::InvalidConfig("decide requires an epsilon threshold".into())
    })?;
    let threshold = if enhanced {
        epsilon + score.enhancement
    } else {
        epsilon
    };
    Ok(score.calibrated < threshold)
}

/// The signed margin whose epsilon sweep traces the ROC: larger means more
/// member-like. Baseline uses -calibrated; enhanced adds the shift.
pub fn membership_statistic(score: &MiaScore, enhanced: bool) -> f64 {
    if enhanced {
        score.enhancement - score.calibrated
    } else {
        -score.calibrated
    }
}

/// Area under the ROC curve by the rank statistic: the probability that a
/// random member's statistic exceeds a random non-member's, ties counted
/// half. Computed via average ranks, which matches exhaustive pair counting.
pub fn auc(scores: &[(f64, bool)]) -> Result<f64> {
    let n_pos = scores.iter().filter(|(_, m)| *m).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CoreError::InvalidConfig(
            "auc needs both members and non-members".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.partial_cmp(&scores[b].0).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].0 == scores[order[i]].0 {
            j += 1;
        }
        // Average rank of the tie group, 1-based.
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if scores[idx].1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// A scored evaluation population, with each query's attribute classes kept
/// so enhancement terms can be recomputed under substituted properties.
#[derive(Clone, Debug)]
pub struct MiaEvaluation {
    pub scores: Vec<MiaScore>,
    pub query_classes: Vec<Vec<usize>>,
}

impl MiaEvaluation {
    pub fn auc_baseline(&self) -> Result<f64> {
        auc(&self
            .scores
            .iter()
            .map(|s| (membership_statistic(s, false), s.is_member))
            .collect::<Vec<_>>())
    }

    pub fn auc_enhanced(&self) -> Result<f64> {
        auc(&self
            .scores
            .iter()
            .map(|s| (membership_statistic(s, true), s.is_member))
            .collect::<Vec<_>>())
    }

    /// Recompute enhancement terms under a substituted property set.
    pub fn with_substituted_properties(
        &self,
        config: &MiaConfig,
        properties: &[PropertyDistribution],
    ) -> Result<MiaEvaluation> {
        let mut cfg = config.clone();
        cfg.attribute_properties = properties.to_vec();
        let mut out = self.clone();
        for (score, classes) in out.scores.iter_mut().zip(&out.query_classes) {
            score.enhancement = enhancement_term(&cfg, classes)?;
        }
        Ok(out)
    }
}

/// One point of the deviation sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub substituted: PropertyDistribution,
    pub auc_enhanced: f64,
    pub auc_baseline: f64,
}

/// Enhanced AUC under each substituted inferred property.
pub fn sensitivity_sweep(
    eval: &MiaEvaluation,
    config: &MiaConfig,
    substituted: &[PropertyDistribution],
) -> Result<Vec<SweepPoint>> {
    let baseline = eval.auc_baseline()?;
    substituted
        .iter()
        .map(|p| {
            let deviated = eval.with_substituted_properties(config, std::slice::from_ref(p))?;
            Ok(SweepPoint {
                substituted: p.clone(),
                auc_enhanced: deviated.auc_enhanced()?,
                auc_baseline: baseline,
            })
        })
        .collect()
}
