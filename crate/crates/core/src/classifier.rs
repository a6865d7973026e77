//! The auxiliary property classifier: labels samples with respect to the
//! target attribute, and implements the gated-release mitigation.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{largest_remainder_counts, AttributeSpec, LabeledDataset, PropertyDistribution};
use crate::error::{CoreError, Result};
use crate::nn::graph::{NodeId, ValueGraph};
use crate::nn::{Activation, DenseNetwork, DenseNetworkSpec, OptimizerConfig, ParamOptimizer};
use crate::seeds::{derive_seed, rng_from};

/// Anything that maps samples to per-class probability vectors. Attack code
/// is written against this trait so oracle stubs can stand in for a trained
/// network in tests.
pub trait ProbClassifier: Sync {
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

/// A trained attribute classifier with its measured test accuracy.
///
/// The head is either a softmax over `n_classes` outputs or, for binary
/// attributes, a single sigmoid unit; both expose a full probability vector.
#[derive(Clone, Debug)]
pub struct PropertyClassifier {
    network: DenseNetwork,
    attribute: AttributeSpec,
    test_accuracy: f64,
}

#[derive(Serialize, Deserialize)]
struct ClassifierMeta {
    attribute: AttributeSpec,
    test_accuracy: f64,
}

impl PropertyClassifier {
    pub fn from_network(network: DenseNetwork, attribute: AttributeSpec) -> Result<Self> {
        validate_head(network.spec(), &attribute)?;
        Ok(Self {
            network,
            attribute,
            test_accuracy: f64::NAN,
        })
    }

    pub fn network(&self) -> &DenseNetwork {
        &self.network
    }

    pub fn attribute(&self) -> &AttributeSpec {
        &self.attribute
    }

    pub fn test_accuracy(&self) -> f64 {
        self.test_accuracy
    }

    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    fn is_sigmoid_head(&self) -> bool {
        self.network.output_dim() == 1
    }

    /// Probability vector per sample, deterministic in the inputs.
    pub fn predict_proba(&self, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        samples
            .iter()
            .map(|s| {
                let out = self.network.forward(s)?;
                Ok(if self.is_sigmoid_head() {
                    vec![1.0 - out[0], out[0]]
                } else {
                    out
                })
            })
            .collect()
    }

    /// Hard labels: argmax of the probability vector, ties resolving to the
    /// largest tied index (so an exact binary 0.5 goes to class 1).
    pub fn predict_hard(&self, samples: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba(samples)?
            .iter()
            .map(|p| argmax_tie_high(p))
            .collect())
    }

    /// Fraction of correct hard predictions on a labeled dataset.
    pub fn accuracy_on(&self, dataset: &LabeledDataset) -> Result<f64> {
        let preds = self.predict_hard(&dataset.samples)?;
        let correct = preds
            .iter()
            .zip(&dataset.labels)
            .filter(|(p, l)| p == l)
            .count();
        Ok(correct as f64 / dataset.len() as f64)
    }

    /// Weight JSON next to an accuracy/attribute sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.network.save(path)?;
        let meta = ClassifierMeta {
            attribute: self.attribute.clone(),
            test_accuracy: self.test_accuracy,
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let network = DenseNetwork::load(path)?;
        let meta: ClassifierMeta =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        validate_head(network.spec(), &meta.attribute)?;
        Ok(Self {
            network,
            attribute: meta.attribute,
            test_accuracy: meta.test_accuracy,
        })
    }
}

impl ProbClassifier for PropertyClassifier {
    fn n_classes(&self) -> usize {
        self.attribute.n_classes
    }

    fn predict_proba(&self, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        PropertyClassifier::predict_proba(self, samples)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.to_path_buf();
    p.set_extension("meta.json");
    p
}

fn validate_head(spec: &DenseNetworkSpec, attribute: &AttributeSpec) -> Result<()> {
    let out = spec.output_dim();
    let head = spec.final_activation();
    let ok = (out == attribute.n_classes && head == Activation::Softmax)
        || (attribute.n_classes == 2 && out == 1 && head == Activation::Sigmoid);
    if !ok {
        return Err(CoreError::InvalidConfig(format!(
            "classifier head must be softmax over {} classes or a 1-wide sigmoid for binary; \
             got width {out} with {head}",
            attribute.n_classes
        )));
    }
    Ok(())
}

/// Argmax with ties going to the largest tied index.
pub fn argmax_tie_high(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v >= values[best] {
            best = i;
        }
    }
    best
}

/// Train a classifier by cross-entropy and measure accuracy on the held-out
/// test set. Softmax heads train on logits through a fused stable loss; a
/// 1-wide sigmoid head uses binary cross-entropy on its logit.
pub fn train_classifier(
    train: &LabeledDataset,
    test: &LabeledDataset,
    spec: &DenseNetworkSpec,
    optimizer: &OptimizerConfig,
    epochs: usize,
    seed: u64,
) -> Result<PropertyClassifier> {
    if train.is_empty() || test.is_empty() {
        return Err(CoreError::EmptyInput("classifier train/test set"));
    }
    validate_head(spec, &train.attribute)?;
    if spec.input_dim() != train.dim() {
        return Err(CoreError::ShapeMismatch {
            context: "classifier input width".into(),
            expected: spec.input_dim(),
            found: train.dim(),
        });
    }
    optimizer.validate()?;

    let mut net_spec = spec.clone();
    net_spec.seed = derive_seed(seed, "clf-init", 0);
    let mut network = DenseNetwork::init(net_spec)?;
    let sigmoid_head = network.output_dim() == 1;

    let mut params = network.params_as_vecs();
    let mut opt = ParamOptimizer::for_params(optimizer.clone(), &params)?;
    let mut shuffle_rng = rng_from(derive_seed(seed, "clf-shuffle", 0));

    // One reusable step graph per distinct batch length (full plus remainder).
    struct StepGraph {
        graph: ValueGraph,
        bound: crate::nn::network::BoundNetwork,
        inputs: Vec<NodeId>,
        targets: Vec<NodeId>,
        loss: NodeId,
    }
    let build = |network: &DenseNetwork, len: usize| -> StepGraph {
        let mut graph = ValueGraph::new();
        let bound = network.bind(&mut graph);
        let mut inputs = Vec::with_capacity(len);
        let mut targets = Vec::with_capacity(len);
        let mut losses = Vec::with_capacity(len);
        for _ in 0..len {
            let x = graph.constant(vec![0.0; network.input_dim()]);
            let logits = bound.forward_logits(&mut graph, x);
            let loss = if sigmoid_head {
                let t = graph.constant(vec![0.0]);
                // BCE on a single logit with a variable target: compose from
                // the fused op by folding the target into two fixed-target
                // losses would lose gradient simplicity; instead train on
                // softmax-style +/- logit pairs is overkill. Use the fused op
                // with target rewritten per batch via a mul trick:
                // loss = softplus(z) - t*z, with t as a leaf.
                let tz = graph.mul(t, logits);
                let sp = graph.bce_with_logits(logits, vec![0.0]); // softplus(z)
                let l = graph.sub(sp, tz);
                targets.push(t);
                l
            } else {
                // Placeholder class; rewritten per batch is impossible for a
                // fused op, so build one loss per class and select by weight.
                let class_losses: Vec<NodeId> = (0..network.output_dim())
                    .map(|c| graph.softmax_cross_entropy(logits, c))
                    .collect();
                let onehot = graph.constant(vec![0.0; network.output_dim()]);
                let mut stacked = Vec::with_capacity(class_losses.len());
                for (c, l) in class_losses.iter().enumerate() {
                    let w = graph.pick(onehot, c);
                    stacked.push(graph.mul(w, *l));
                }
                let mut acc = stacked[0];
                for &s in &stacked[1..] {
                    acc = graph.add(acc, s);
                }
                targets.push(onehot);
                acc
            };
            inputs.push(x);
            losses.push(loss);
        }
        let mut acc = losses[0];
        for &l in &losses[1..] {
            acc = graph.add(acc, l);
        }
        let loss = graph.scale(acc, 1.0 / len as f64);
        StepGraph {
            graph,
            bound,
            inputs,
            targets,
            loss,
        }
    };

    let batch = optimizer.batch_size.min(train.len());
    let mut full_graph = build(&network, batch);
    let remainder = train.len() % batch;
    let mut rem_graph = (remainder > 0).then(|| build(&network, remainder));

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut global_step = 0usize;
    for _epoch in 0..epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(batch) {
            let sg = if chunk.len() == batch {
                &mut full_graph
            } else {
                rem_graph.as_mut().expect("remainder graph exists")
            };
            sg.bound.write_param_vecs(&mut sg.graph, &params);
            for (slot, &idx) in chunk.iter().enumerate() {
                sg.graph.set_value(sg.inputs[slot], &train.samples[idx]);
                if sigmoid_head {
                    sg.graph
                        .set_value(sg.targets[slot], &[train.labels[idx] as f64]);
                } else {
                    let mut onehot = vec![0.0; train.attribute.n_classes];
                    onehot[train.labels[idx]] = 1.0;
                    sg.graph.set_value(sg.targets[slot], &onehot);
                }
            }
            sg.graph.refresh();
            let loss = sg.graph.scalar_value(sg.loss);
            if !loss.is_finite() {
                return Err(CoreError::TrainingDiverged {
                    step: global_step,
                    what: format!("classifier loss became {loss}"),
                });
            }
            sg.graph.backward(sg.loss)?;
            let grads = sg.bound.read_grads(&sg.graph);
            opt.step(&mut params, &grads).map_err(|e| {
                CoreError::TrainingDiverged {
                    step: global_step,
                    what: e.to_string(),
                }
            })?;
            global_step += 1;
        }
    }

    network.set_params_from_vecs(&params);
    let mut clf = PropertyClassifier {
        network,
        attribute: train.attribute.clone(),
        test_accuracy: f64::NAN,
    };
    clf.test_accuracy = clf.accuracy_on(test)?;
    Ok(clf)
}

/// Gated release: the subset of `samples` (original order preserved) whose
/// predicted-label distribution realizes `fake_property`. The subset size is
/// the largest the rarest needed class supports: floor(min_c count_c / q_c).
pub fn gate_release(
    clf: &PropertyClassifier,
    samples: &[Vec<f64>],
    fake_property: &PropertyDistribution,
) -> Result<Vec<Vec<f64>>> {
    if fake_property.n_classes() != clf.attribute.n_classes {
        return Err(CoreError::ShapeMismatch {
            context: "gate_release property length".into(),
            expected: clf.attribute.n_classes,
            found: fake_property.n_classes(),
        });
    }
    let labels = clf.predict_hard(samples)?;
    let mut counts = vec![0usize; clf.attribute.n_classes];
    for &l in &labels {
        counts[l] += 1;
    }

    let mut size = usize::MAX;
    for (c, &q) in fake_property.probs().iter().enumerate() {
        if q > 0.0 {
            // Nudge before flooring so exact ratios like 70/0.7 don't lose
            // an element to rounding; the fix-up loop below corrects any
            // overshoot this introduces.
            size = size.min((counts[c] as f64 / q + 1e-9).floor() as usize);
        }
    }
    if size == 0 || size == usize::MAX {
        return Err(CoreError::UnachievableRelease {
            reason: "a class required by the fake property has no predicted samples".into(),
            achievable: 0,
        });
    }
    let take = loop {
        let take = largest_remainder_counts(fake_property.probs(), size);
        if take.iter().zip(&counts).all(|(t, c)| t <= c) {
            break take;
        }
        size -= 1;
        if size == 0 {
            return Err(CoreError::UnachievableRelease {
                reason: "no feasible subset size".into(),
                achievable: 0,
            });
        }
    };
    let mut taken = vec![0usize; clf.attribute.n_classes];
    let mut out = Vec::with_capacity(size);
    for (sample, &label) in samples.iter().zip(&labels) {
        if taken[label] < take[label] {
            taken[label] += 1;
            out.push(sample.clone());
        }
    }
    Ok(out)
}
