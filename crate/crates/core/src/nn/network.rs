//! Dense feed-forward networks with serializable weights.

use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::nn::activation::Activation;
use crate::nn::graph::{softmax, NodeId, ValueGraph};
use crate::seeds::rng_from;

/// Architecture description: `layer_widths[0]` is the input width, each
/// following entry the output width of one dense layer, and `activations[l]`
/// the activation applied after layer `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseNetworkSpec {
    pub layer_widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub seed: u64,
}

impl DenseNetworkSpec {
    pub fn new(layer_widths: Vec<usize>, activations: Vec<Activation>, seed: u64) -> Result<Self> {
        let spec = Self {
            layer_widths,
            activations,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(CoreError::InvalidConfig(
                "network needs at least one layer (two widths)".into(),
            ));
        }
        if self.layer_widths.iter().any(|&w| w == 0) {
            return Err(CoreError::InvalidConfig("layer widths must be >= 1".into()));
        }
        if self.activations.len() != self.layer_widths.len() - 1 {
            return Err(CoreError::InvalidConfig(format!(
                "need {} activations for {} layers, got {}",
                self.layer_widths.len() - 1,
                self.layer_widths.len() - 1,
                self.activations.len()
            )));
        }
        for (i, act) in self.activations.iter().enumerate() {
            act.validate()?;
            if *act == Activation::Softmax && i + 1 != self.activations.len() {
                return Err(CoreError::InvalidConfig(
                    "softmax is only allowed as the final activation".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn final_activation(&self) -> Activation {
        *self.activations.last().unwrap()
    }
}

/// One dense layer: row-major weights of shape (out, in) plus biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// A dense network with concrete weights. Immutable in normal use; training
/// code swaps whole parameter sets via [`DenseNetwork::set_params_from_vecs`].
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNetwork {
    spec: DenseNetworkSpec,
    layers: Vec<DenseLayer>,
}

const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct WeightsDoc {
    format_version: u32,
    spec: DenseNetworkSpec,
    layers: Vec<DenseLayer>,
}

impl DenseNetwork {
    /// Glorot-uniform initialization, deterministic in `spec.seed`.
    /// Biases start at zero.
    pub fn init(spec: DenseNetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from(spec.seed);
        let mut layers = Vec::with_capacity(spec.n_layers());
        for l in 0..spec.n_layers() {
            let fan_in = spec.layer_widths[l];
            let fan_out = spec.layer_widths[l + 1];
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let weights = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
            layers.push(DenseLayer {
                weights,
                biases: vec![0.0; fan_out],
            });
        }
        Ok(Self { spec, layers })
    }

    /// All-zero weights and biases. Useful as a degenerate fixture.
    pub fn zeros(spec: DenseNetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = (0..spec.n_layers())
            .map(|l| DenseLayer {
                weights: vec![0.0; spec.layer_widths[l] * spec.layer_widths[l + 1]],
                biases: vec![0.0; spec.layer_widths[l + 1]],
            })
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &DenseNetworkSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Replace one layer's parameters, checking shapes.
    pub fn set_layer(&mut self, layer: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<()> {
        let fan_in = self.spec.layer_widths[layer];
        let fan_out = self.spec.layer_widths[layer + 1];
        if weights.len() != fan_in * fan_out {
            return Err(CoreError::ShapeMismatch {
                context: format!("set_layer {layer} weights"),
                expected: fan_in * fan_out,
                found: weights.len(),
            });
        }
        if biases.len() != fan_out {
            return Err(CoreError::ShapeMismatch {
                context: format!("set_layer {layer} biases"),
                expected: fan_out,
                found: biases.len(),
            });
        }
        self.layers[layer] = DenseLayer { weights, biases };
        Ok(())
    }

    /// Parameters as a flat list of tensors ordered w0, b0, w1, b1, ...
    pub fn params_as_vecs(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for layer in &self.layers {
            out.push(layer.weights.clone());
            out.push(layer.biases.clone());
        }
        out
    }

    /// Inverse of [`DenseNetwork::params_as_vecs`].
    pub fn set_params_from_vecs(&mut self, params: &[Vec<f64>]) {
        assert_eq!(params.len(), self.layers.len() * 2, "parameter tensor count");
        for (l, layer) in self.layers.iter_mut().enumerate() {
            layer.weights.copy_from_slice(&params[2 * l]);
            layer.biases.copy_from_slice(&params[2 * l + 1]);
        }
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(CoreError::ShapeMismatch {
                context: "forward input".into(),
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        let mut current = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let fan_in = self.spec.layer_widths[l];
            let fan_out = self.spec.layer_widths[l + 1];
            let mut z = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
                let mut acc = layer.biases[o];
                for (w, x) in row.iter().zip(&current) {
                    acc = w.mul_add(*x, acc);
                }
                z[o] = acc;
            }
            current = match self.spec.activations[l] {
                Activation::Softmax => softmax(&z),
                act => {
                    for v in z.iter_mut() {
                        *v = act.apply_scalar(*v);
                    }
                    z
                }
            };
        }
        Ok(current)
    }

    pub fn forward_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|x| self.forward(x)).collect()
    }

    /// Bind this network's parameters into a graph as leaf variables.
    pub fn bind(&self, graph: &mut ValueGraph) -> BoundNetwork {
        let params = self
            .layers
            .iter()
            .map(|layer| {
                let w = graph.variable(layer.weights.clone());
                let b = graph.variable(layer.biases.clone());
                (w, b)
            })
            .collect();
        BoundNetwork {
            widths: self.spec.layer_widths.clone(),
            activations: self.spec.activations.clone(),
            params,
        }
    }

    /// Versioned JSON weight document. The decimal serialization chosen by
    /// serde_json round-trips every finite f64 bit-exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&WeightsDoc {
            format_version: WEIGHTS_FORMAT_VERSION,
            spec: self.spec.clone(),
            layers: self.layers.clone(),
        })
        .expect("network serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WeightsDoc = serde_json::from_str(text)?;
        if doc.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(CoreError::InvalidConfig(format!(
                "unsupported weights format version {}",
                doc.format_version
            )));
        }
        doc.spec.validate()?;
        if doc.layers.len() != doc.spec.n_layers() {
            return Err(CoreError::InvalidConfig("layer count mismatch".into()));
        }
        for (l, layer) in doc.layers.iter().enumerate() {
            let fan_in = doc.spec.layer_widths[l];
            let fan_out = doc.spec.layer_widths[l + 1];
            if layer.weights.len() != fan_in * fan_out || layer.biases.len() != fan_out {
                return Err(CoreError::InvalidConfig(format!(
                    "layer {l} has inconsistent tensor sizes"
                )));
            }
        }
        Ok(Self {
            spec: doc.spec,
            layers: doc.layers,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A network's parameters bound as leaves of one [`ValueGraph`], reusable
/// across many forward constructions within that graph.
pub struct BoundNetwork {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<(NodeId, NodeId)>,
}

impl BoundNetwork {
    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Full forward pass including the final activation.
    pub fn forward(&self, graph: &mut ValueGraph, input: NodeId) -> NodeId {
        self.forward_inner(graph, input, true).0
    }

    /// Forward pass with the final activation omitted. Training losses that
    /// fold the output nonlinearity into a numerically stable op use this.
    pub fn forward_logits(&self, graph: &mut ValueGraph, input: NodeId) -> NodeId {
        self.forward_inner(graph, input, false).0
    }

    fn forward_inner(
        &self,
        graph: &mut ValueGraph,
        input: NodeId,
        apply_final: bool,
    ) -> (NodeId, Vec<(NodeId, NodeId)>) {
        let n_layers = self.widths.len() - 1;
        let mut current = input;
        let mut traces = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (w, b) = self.params[l];
            let wx = graph.matvec(w, current, self.widths[l + 1], self.widths[l]);
            let z = graph.add(wx, b);
            let last = l + 1 == n_layers;
            let activated = if last && !apply_final {
                z
            } else {
                graph.activation(z, self.activations[l])
            };
            traces.push((z, activated));
            current = activated;
        }
        (current, traces)
    }

    /// Forward pass of a scalar-output network together with an explicit
    /// graph of the output's gradient with respect to the input. Because the
    /// gradient is itself built from differentiable primitives, a later
    /// backward pass propagates second-order effects into the parameters,
    /// which is what a gradient-penalty term needs.
    ///
    /// Requires an identity final activation and no softmax anywhere.
    pub fn forward_with_input_gradient(
        &self,
        graph: &mut ValueGraph,
        input: NodeId,
    ) -> (NodeId, NodeId) {
        assert_eq!(self.output_dim(), 1, "input-gradient graph needs a scalar output");
        assert_eq!(
            *self.activations.last().unwrap(),
            Activation::Identity,
            "input-gradient graph needs an identity head"
        );
        let (out, traces) = self.forward_inner(graph, input, true);

        let n_layers = self.widths.len() - 1;
        let mut upstream = graph.constant(vec![1.0]);
        for l in (0..n_layers).rev() {
            let (z, a) = traces[l];
            upstream = match self.activations[l] {
                Activation::Identity => upstream,
                Activation::Relu => {
                    let mask = graph.gt_mask(z);
                    graph.mul(upstream, mask)
                }
                Activation::LeakyRelu(slope) => {
                    let mask = graph.leaky_mask(z, slope);
                    graph.mul(upstream, mask)
                }
                Activation::Tanh => {
                    // d tanh = 1 - a^2, written in primitives so the chain
                    // stays differentiable.
                    let sq = graph.mul(a, a);
                    let neg = graph.scale(sq, -1.0);
                    let deriv = graph.add_const(neg, 1.0);
                    graph.mul(upstream, deriv)
                }
                Activation::Sigmoid => {
                    let neg = graph.scale(a, -1.0);
                    let one_minus = graph.add_const(neg, 1.0);
                    let deriv = graph.mul(a, one_minus);
                    graph.mul(upstream, deriv)
                }
                Activation::Softmax => {
                    panic!("softmax not supported in input-gradient graphs")
                }
            };
            let (w, _) = self.params[l];
            upstream = graph.matvec_t(w, upstream, self.widths[l + 1], self.widths[l]);
        }
        (out, upstream)
    }

    /// Push the current parameter values of `net` into the bound leaves.
    pub fn write_params(&self, graph: &mut ValueGraph, net: &DenseNetwork) {
        for (l, layer) in net.layers().iter().enumerate() {
            let (w, b) = self.params[l];
            graph.set_value(w, &layer.weights);
            graph.set_value(b, &layer.biases);
        }
    }

    /// Same as [`BoundNetwork::write_params`] but from flat tensors in
    /// w0, b0, w1, b1, ... order.
    pub fn write_param_vecs(&self, graph: &mut ValueGraph, params: &[Vec<f64>]) {
        assert_eq!(params.len(), self.params.len() * 2, "parameter tensor count");
        for (l, (w, b)) in self.params.iter().enumerate() {
            graph.set_value(*w, &params[2 * l]);
            graph.set_value(*b, &params[2 * l + 1]);
        }
    }

    /// Parameter gradients in w0, b0, w1, b1, ... order.
    pub fn read_grads(&self, graph: &ValueGraph) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.params.len() * 2);
        for (w, b) in &self.params {
            out.push(graph.grad(*w).to_vec());
            out.push(graph.grad(*b).to_vec());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(widths: Vec<usize>, acts: Vec<Activation>, seed: u64) -> DenseNetworkSpec {
        DenseNetworkSpec::new(widths, acts, seed).unwrap()
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let s = spec(vec![2, 2], vec![Activation::Identity], 0);
        let mut net = DenseNetwork::zeros(s).unwrap();
        net.set_layer(0, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let out = net.forward(&[0.2, -0.3]).unwrap();
        assert_eq!(out, vec![0.2, -0.3]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let s = spec(vec![2, 2], vec![Activation::Softmax], 0);
        let net = DenseNetwork::zeros(s).unwrap();
        let out = net.forward(&[3.0, -1.0]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn forward_matches_straight_line_reimplementation() {
        // Independent re-computation of a seeded 2-3-2 tanh/softmax network on
        // input [1, 1], written without any of the crate's forward machinery.
        let s = spec(
            vec![2, 3, 2],
            vec![Activation::Tanh, Activation::Softmax],
            7,
        );
        let net = DenseNetwork::init(s).unwrap();
        let got = net.forward(&[1.0, 1.0]).unwrap();

        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let mut h = [0.0f64; 3];
        for o in 0..3 {
            let z = l0.weights[o * 2] * 1.0 + l0.weights[o * 2 + 1] * 1.0 + l0.biases[o];
            h[o] = z.tanh();
        }
        let mut logits = [0.0f64; 2];
        for o in 0..2 {
            logits[o] = l1.weights[o * 3] * h[0]
                + l1.weights[o * 3 + 1] * h[1]
                + l1.weights[o * 3 + 2] * h[2]
                + l1.biases[o];
        }
        let m = logits[0].max(logits[1]);
        let e0 = (logits[0] - m).exp();
        let e1 = (logits[1] - m).exp();
        let expect = [e0 / (e0 + e1), e1 / (e0 + e1)];

        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12, "got {g}, expected {e}");
        }
    }

    #[test]
    fn forward_rejects_wrong_input_width() {
        let s = spec(vec![3, 2], vec![Activation::Identity], 0);
        let net = DenseNetwork::init(s).unwrap();
        match net.forward(&[1.0]) {
            Err(CoreError::ShapeMismatch {
                expected, found, ..
            }) => {
                assert_eq!((expected, found), (3, 1));
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn init_is_deterministic_in_seed() {
        let a = DenseNetwork::init(spec(vec![4, 5, 2], vec![Activation::Tanh, Activation::Identity], 9)).unwrap();
        let b = DenseNetwork::init(spec(vec![4, 5, 2], vec![Activation::Tanh, Activation::Identity], 9)).unwrap();
        assert_eq!(a, b);
        let c = DenseNetwork::init(spec(vec![4, 5, 2], vec![Activation::Tanh, Activation::Identity], 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_glorot_bounds_and_zero_biases() {
        let s = spec(vec![6, 4], vec![Activation::Tanh], 3);
        let net = DenseNetwork::init(s).unwrap();
        let limit = (6.0 / 10.0f64).sqrt();
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(net.layers()[0].biases.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let s = spec(
            vec![3, 4, 2],
            vec![Activation::LeakyRelu(0.2), Activation::Softmax],
            123,
        );
        let net = DenseNetwork::init(s).unwrap();
        let restored = DenseNetwork::from_json(&net.to_json()).unwrap();
        assert_eq!(net, restored);
        for (a, b) in net.layers().iter().zip(restored.layers()) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn spec_validation_catches_bad_shapes() {
        assert!(DenseNetworkSpec::new(vec![2], vec![], 0).is_err());
        assert!(DenseNetworkSpec::new(vec![2, 0], vec![Activation::Identity], 0).is_err());
        assert!(DenseNetworkSpec::new(
            vec![2, 3, 2],
            vec![Activation::Softmax, Activation::Identity],
            0
        )
        .is_err());
        assert!(DenseNetworkSpec::new(vec![2, 2], vec![Activation::LeakyRelu(1.5)], 0).is_err());
    }

    #[test]
    fn bound_forward_matches_plain_forward() {
        let s = spec(
            vec![3, 5, 4],
            vec![Activation::LeakyRelu(0.2), Activation::Softmax],
            77,
        );
        let net = DenseNetwork::init(s).unwrap();
        let input = vec![0.3, -0.9, 0.5];
        let plain = net.forward(&input).unwrap();
        let mut g = ValueGraph::new();
        let bound = net.bind(&mut g);
        let x = g.constant(input);
        let y = bound.forward(&mut g, x);
        for (a, b) in g.value(y).iter().zip(&plain) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
