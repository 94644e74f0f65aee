//! Feed-forward networks over exact rationals.
//!
//! A network is a chain of dense layers, each an affine map followed by an
//! activation. Everything evaluates in [`Rational`] arithmetic so that a
//! verdict about a network is a fact about the network, not about float
//! rounding. A float-path forward exists purely for display and drift
//! measurement.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::numeric::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected} inputs, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("input {index} is {value}, but stateful inputs must be 0 or 1")]
    NonBinaryInput { index: usize, value: u8 },
    #[error("output trace entry {index} is {value}, not 0/1")]
    NonBinaryTrace { index: usize, value: u8 },
    #[error("stateful neuron bias must be positive (threshold role), got {bias}")]
    NonPositiveBias { bias: Rational },
    #[error("layer {layer}: {message}")]
    Shape { layer: usize, message: String },
    #[error("network must have at least one layer")]
    EmptyNetwork,
}

/// Neuron nonlinearity. `Threshold` fires on the *weak* inequality
/// `z >= theta`, which matters: a potential of exactly zero produces 1
/// under `Threshold(0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Threshold(Rational),
}

impl Activation {
    pub fn apply(&self, z: &Rational) -> Rational {
        match self {
            Activation::Identity => z.clone(),
            Activation::Relu => {
                if z.is_negative() {
                    Rational::zero()
                } else {
                    z.clone()
                }
            }
            Activation::Threshold(theta) => {
                if z >= theta {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }
        }
    }

    fn apply_f64(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Threshold(theta) => {
                if z >= theta.to_f64() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Identity => write!(f, "identity"),
            Activation::Relu => write!(f, "relu"),
            Activation::Threshold(theta) => write!(f, "threshold({theta})"),
        }
    }
}

/// Which role the stored biases play. `SignedBias` is the trainer's view:
/// potential = w.x + b, threshold compares against theta. In
/// `PositiveThreshold` form the bias slot is zero and the (positive)
/// firing threshold lives in `Threshold(theta)`; this is the convention
/// used by proof-assistant-style neuron records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    #[default]
    SignedBias,
    PositiveThreshold,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Convention::SignedBias => write!(f, "signed-bias"),
            Convention::PositiveThreshold => write!(f, "positive-threshold"),
        }
    }
}

impl FromStr for Convention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "signed-bias" => Ok(Convention::SignedBias),
            "positive-threshold" => Ok(Convention::PositiveThreshold),
            other => Err(format!(
                "unknown convention `{other}` (expected `signed-bias` or `positive-threshold`)"
            )),
        }
    }
}

/// Dense layer: `weights` is row-major, one row per output neuron.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    weights: Vec<Vec<Rational>>,
    bias: Vec<Rational>,
    activation: Activation,
}

impl Layer {
    /// Validates shape: at least one neuron, equal-width rows, one bias
    /// per row. The `layer` index only labels error messages.
    pub fn new(
        layer: usize,
        weights: Vec<Vec<Rational>>,
        bias: Vec<Rational>,
        activation: Activation,
    ) -> Result<Layer, NetError> {
        if weights.is_empty() {
            return Err(NetError::Shape {
                layer,
                message: "layer has no neurons".into(),
            });
        }
        let width = weights[0].len();
        if width == 0 {
            return Err(NetError::Shape {
                layer,
                message: "neuron has no inputs".into(),
            });
        }
        if let Some((row, w)) = weights.iter().enumerate().find(|(_, w)| w.len() != width) {
            return Err(NetError::Shape {
                layer,
                message: format!(
                    "weight row {row} has {} entries, expected {width}",
                    w.len()
                ),
            });
        }
        if bias.len() != weights.len() {
            return Err(NetError::Shape {
                layer,
                message: format!(
                    "{} bias entries for {} neurons",
                    bias.len(),
                    weights.len()
                ),
            });
        }
        Ok(Layer { weights, bias, activation })
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<Rational>] {
        &self.weights
    }

    pub fn bias(&self) -> &[Rational] {
        &self.bias
    }

    pub fn activation(&self) -> &Activation {
        &self.activation
    }

    /// Affine image then activation: `act(W x + b)`, exactly.
    pub fn forward(&self, inputs: &[Rational]) -> Result<Vec<Rational>, NetError> {
        Ok(self
            .pre_activation(inputs)?
            .iter()
            .map(|z| self.activation.apply(z))
            .collect())
    }

    /// The affine part alone: `W x + b`.
    pub fn pre_activation(&self, inputs: &[Rational]) -> Result<Vec<Rational>, NetError> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| neuron_potential(row, inputs, b))
            .collect()
    }
}

/// Weighted sum plus bias for one neuron: `sum_i w_i x_i + b`.
pub fn neuron_potential(
    weights: &[Rational],
    inputs: &[Rational],
    bias: &Rational,
) -> Result<Rational, NetError> {
    if weights.len() != inputs.len() {
        return Err(NetError::DimensionMismatch {
            expected: weights.len(),
            found: inputs.len(),
        });
    }
    let mut acc = bias.clone();
    for (w, x) in weights.iter().zip(inputs) {
        acc = &acc + &(w * x);
    }
    Ok(acc)
}

/// Pre- and post-activation values of one layer during a forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerTrace {
    pub pre: Vec<Rational>,
    pub post: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    layers: Vec<Layer>,
    convention: Convention,
}

impl Network {
    /// Validates the chain: nonempty, and each layer consumes exactly what
    /// the previous one produces.
    pub fn new(layers: Vec<Layer>, convention: Convention) -> Result<Network, NetError> {
        if layers.is_empty() {
            return Err(NetError::EmptyNetwork);
        }
        for i in 1..layers.len() {
            let expected = layers[i - 1].output_dim();
            let found = layers[i].input_dim();
            if expected != found {
                return Err(NetError::Shape {
                    layer: i,
                    message: format!(
                        "expects {found} inputs but previous layer outputs {expected}"
                    ),
                });
            }
        }
        Ok(Network { layers, convention })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    /// Composition of the layers, exactly.
    pub fn forward(&self, inputs: &[Rational]) -> Result<Vec<Rational>, NetError> {
        let mut x = inputs.to_vec();
        for layer in &self.layers {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    /// Forward pass keeping every layer's pre/post activations. Used for
    /// bound-containment checks and for binding solver variables.
    pub fn forward_trace(&self, inputs: &[Rational]) -> Result<Vec<LayerTrace>, NetError> {
        let mut x = inputs.to_vec();
        let mut trace = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let pre = layer.pre_activation(&x)?;
            let post: Vec<Rational> = pre.iter().map(|z| layer.activation.apply(z)).collect();
            x = post.clone();
            trace.push(LayerTrace { pre, post });
        }
        Ok(trace)
    }

    /// Float-path forward. Display-only: verdicts never consult this.
    pub fn forward_f64(&self, inputs: &[f64]) -> Result<Vec<f64>, NetError> {
        if inputs.len() != self.input_dim() {
            return Err(NetError::DimensionMismatch {
                expected: self.input_dim(),
                found: inputs.len(),
            });
        }
        let mut x = inputs.to_vec();
        for layer in &self.layers {
            x = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, b)| {
                    let z = row
                        .iter()
                        .zip(&x)
                        .fold(b.to_f64(), |acc, (w, xi)| acc + w.to_f64() * xi);
                    layer.activation.apply_f64(z)
                })
                .collect();
        }
        Ok(x)
    }

    /// Predicted class. Single-output threshold networks classify by their
    /// binary output; anything else classifies by argmax with ties going
    /// to the lowest index.
    pub fn classify(&self, inputs: &[Rational]) -> Result<usize, NetError> {
        let out = self.forward(inputs)?;
        let last = self.layers.last().unwrap();
        if out.len() == 1 && matches!(last.activation, Activation::Threshold(_)) {
            return Ok(if out[0] == Rational::one() { 1 } else { 0 });
        }
        let mut best = 0;
        for (i, v) in out.iter().enumerate().skip(1) {
            if v > &out[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Structural well-formedness report under the declared convention.
    /// `violations` is what gates validity; the three booleans are plain
    /// facts about the network either way.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut weights_in_range = true;
        let one = Rational::one();
        for (li, layer) in self.layers.iter().enumerate() {
            for (ni, row) in layer.weights.iter().enumerate() {
                for (wi, w) in row.iter().enumerate() {
                    if w.abs() > one {
                        weights_in_range = false;
                        violations.push(Violation {
                            layer: li,
                            neuron: ni,
                            message: format!("weight {wi} is {w}, outside [-1, 1]"),
                        });
                    }
                }
            }
        }
        let bias_positive = match self.convention {
            Convention::SignedBias => self
                .layers
                .iter()
                .all(|l| l.bias.iter().all(|b| b.is_positive())),
            Convention::PositiveThreshold => {
                let mut ok = true;
                for (li, layer) in self.layers.iter().enumerate() {
                    if let Activation::Threshold(theta) = &layer.activation {
                        if !theta.is_positive() {
                            ok = false;
                            for ni in 0..layer.output_dim() {
                                violations.push(Violation {
                                    layer: li,
                                    neuron: ni,
                                    message: format!(
                                        "threshold {theta} must be positive under positive-threshold convention"
                                    ),
                                });
                            }
                        }
                        for (ni, b) in layer.bias.iter().enumerate() {
                            if !b.is_zero() {
                                ok = false;
                                violations.push(Violation {
                                    layer: li,
                                    neuron: ni,
                                    message: format!(
                                        "bias {b} must be 0 under positive-threshold convention (the threshold carries it)"
                                    ),
                                });
                            }
                        }
                    }
                }
                ok
            }
        };
        let output_binary = matches!(
            self.layers.last().unwrap().activation,
            Activation::Threshold(_)
        );
        ValidationReport {
            output_binary,
            bias_positive,
            weights_in_range,
            violations,
        }
    }
}

/// Per-neuron finding with its location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub layer: usize,
    pub neuron: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "layer {}, neuron {}: {}", self.layer, self.neuron, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    /// Final layer is all-threshold, so outputs are 0/1 by construction.
    pub output_binary: bool,
    /// Positivity of the bias role under the declared convention.
    pub bias_positive: bool,
    /// Every weight lies in [-1, 1].
    pub weights_in_range: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A single recurrent-style neuron that carries its previous potential and
/// a history of emitted outputs (most recent first). The bias plays the
/// threshold role and must be positive; inputs and trace entries are bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatefulNeuron {
    weights: Vec<Rational>,
    bias: Rational,
    potential: Rational,
    output_trace: Vec<u8>,
}

impl StatefulNeuron {
    pub fn new(
        weights: Vec<Rational>,
        bias: Rational,
        potential: Rational,
        output_trace: Vec<u8>,
    ) -> Result<StatefulNeuron, NetError> {
        if !bias.is_positive() {
            return Err(NetError::NonPositiveBias { bias });
        }
        if let Some((index, &value)) = output_trace.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(NetError::NonBinaryTrace { index, value });
        }
        Ok(StatefulNeuron { weights, bias, potential, output_trace })
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn bias(&self) -> &Rational {
        &self.bias
    }

    pub fn potential(&self) -> &Rational {
        &self.potential
    }

    pub fn output_trace(&self) -> &[u8] {
        &self.output_trace
    }

    /// Sum of the weights whose input bit is set. No bias here: the bias
    /// enters only through the comparison in [`next_potential`].
    ///
    /// [`next_potential`]: Self::next_potential
    fn gated_sum(&self, inputs: &[u8]) -> Result<Rational, NetError> {
        if inputs.len() != self.weights.len() {
            return Err(NetError::DimensionMismatch {
                expected: self.weights.len(),
                found: inputs.len(),
            });
        }
        if let Some((index, &value)) = inputs.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(NetError::NonBinaryInput { index, value });
        }
        let mut acc = Rational::zero();
        for (w, &x) in self.weights.iter().zip(inputs) {
            if x == 1 {
                acc = &acc + w;
            }
        }
        Ok(acc)
    }

    /// Next potential: the fresh gated sum, plus the stored potential only
    /// if the stored potential has not yet reached the bias (leaky
    /// accumulate-until-fire semantics).
    pub fn next_potential(&self, inputs: &[u8]) -> Result<Rational, NetError> {
        let fresh = self.gated_sum(inputs)?;
        if self.bias <= self.potential {
            Ok(fresh)
        } else {
            Ok(&fresh + &self.potential)
        }
    }

    /// Emits the next output bit (1 iff the next potential reaches the
    /// bias) and the successor neuron: potential replaced, output pushed
    /// onto the front of the trace.
    pub fn next_output(&self, inputs: &[u8]) -> Result<(u8, StatefulNeuron), NetError> {
        let p = self.next_potential(inputs)?;
        let out = u8::from(self.bias <= p);
        let mut trace = Vec::with_capacity(self.output_trace.len() + 1);
        trace.push(out);
        trace.extend_from_slice(&self.output_trace);
        let next = StatefulNeuron {
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            potential: p,
            output_trace: trace,
        };
        Ok((out, next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn rats(vals: &[(i64, i64)]) -> Vec<Rational> {
        vals.iter().map(|&(n, d)| rat(n, d)).collect()
    }

    /// The and-gate perceptron: potential -0.9 + 0.5a + 0.5b, fire at 0.
    fn and_gate() -> Network {
        let layer = Layer::new(
            0,
            vec![rats(&[(1, 2), (1, 2)])],
            rats(&[(-9, 10)]),
            Activation::Threshold(Rational::zero()),
        )
        .unwrap();
        Network::new(vec![layer], Convention::SignedBias).unwrap()
    }

    #[test]
    fn potential_is_exact() {
        // (0.95, 0.8): -0.9 + 0.475 + 0.4 = -0.025, strictly below 0.
        let p = neuron_potential(
            &rats(&[(1, 2), (1, 2)]),
            &rats(&[(19, 20), (4, 5)]),
            &rat(-9, 10),
        )
        .unwrap();
        assert_eq!(p, rat(-1, 40));
        assert_eq!(and_gate().classify(&rats(&[(19, 20), (4, 5)])).unwrap(), 0);
    }

    #[test]
    fn and_gate_truth_table() {
        let net = and_gate();
        let bit = |b: i64| Rational::from_int(b);
        for (a, b, want) in [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 1)] {
            assert_eq!(net.classify(&[bit(a), bit(b)]).unwrap(), want);
        }
    }

    #[test]
    fn threshold_fires_on_equality() {
        let act = Activation::Threshold(rat(1, 2));
        assert_eq!(act.apply(&rat(1, 2)), Rational::one());
        assert_eq!(act.apply(&rat(4999, 10000)), Rational::zero());
    }

    #[test]
    fn relu_layer_forward() {
        let layer = Layer::new(
            0,
            vec![rats(&[(1, 1)])],
            rats(&[(-2, 1)]),
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(layer.forward(&rats(&[(1, 1)])).unwrap(), rats(&[(0, 1)]));
        assert_eq!(layer.forward(&rats(&[(3, 1)])).unwrap(), rats(&[(1, 1)]));
    }

    #[test]
    fn identity_network_is_identity() {
        let layer = Layer::new(
            0,
            vec![rats(&[(1, 1), (0, 1)]), rats(&[(0, 1), (1, 1)])],
            rats(&[(0, 1), (0, 1)]),
            Activation::Identity,
        )
        .unwrap();
        let net = Network::new(vec![layer], Convention::SignedBias).unwrap();
        let x = rats(&[(3, 1), (4, 1)]);
        assert_eq!(net.forward(&x).unwrap(), x);
        // Argmax classify, ties to the lowest index.
        assert_eq!(net.classify(&x).unwrap(), 1);
        assert_eq!(net.classify(&rats(&[(4, 1), (4, 1)])).unwrap(), 0);
    }

    #[test]
    fn dimension_mismatch_everywhere() {
        let net = and_gate();
        assert!(matches!(
            net.forward(&rats(&[(1, 1)])),
            Err(NetError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(net.forward_f64(&[1.0]).is_err());
        assert!(neuron_potential(&rats(&[(1, 1)]), &rats(&[(1, 1), (1, 1)]), &rat(0, 1)).is_err());
    }

    #[test]
    fn shape_errors_carry_layer() {
        let bad = Layer::new(
            3,
            vec![rats(&[(1, 1), (2, 1)]), rats(&[(1, 1)])],
            rats(&[(0, 1), (0, 1)]),
            Activation::Identity,
        );
        match bad {
            Err(NetError::Shape { layer: 3, message }) => {
                assert!(message.contains("row 1"));
            }
            other => panic!("expected shape error, got {other:?}"),
        }
        let l1 = Layer::new(0, vec![rats(&[(1, 1)])], rats(&[(0, 1)]), Activation::Relu).unwrap();
        let l2 = Layer::new(
            1,
            vec![rats(&[(1, 1), (1, 1)])],
            rats(&[(0, 1)]),
            Activation::Identity,
        )
        .unwrap();
        assert!(matches!(
            Network::new(vec![l1, l2], Convention::SignedBias),
            Err(NetError::Shape { layer: 1, .. })
        ));
        assert!(matches!(
            Network::new(vec![], Convention::SignedBias),
            Err(NetError::EmptyNetwork)
        ));
    }

    #[test]
    fn validation_positive_threshold_convention() {
        // Quantized and-gate in positive-threshold form: weights 0.2,
        // bias 0, threshold 0.2. All checks pass.
        let layer = Layer::new(
            0,
            vec![rats(&[(1, 5), (1, 5)])],
            rats(&[(0, 1)]),
            Activation::Threshold(rat(1, 5)),
        )
        .unwrap();
        let net = Network::new(vec![layer], Convention::PositiveThreshold).unwrap();
        let report = net.validate();
        assert!(report.output_binary && report.bias_positive && report.weights_in_range);
        assert!(report.is_valid());
    }

    #[test]
    fn validation_locates_out_of_range_weight() {
        let layer = Layer::new(
            0,
            vec![rats(&[(3, 2), (1, 2)])],
            rats(&[(0, 1)]),
            Activation::Threshold(rat(1, 5)),
        )
        .unwrap();
        let net = Network::new(vec![layer], Convention::SignedBias).unwrap();
        let report = net.validate();
        assert!(!report.weights_in_range);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].layer, 0);
        assert_eq!(report.violations[0].neuron, 0);
        assert!(report.violations[0].message.contains("1.5"));
        assert!(!report.is_valid());
    }

    #[test]
    fn validation_signed_bias_is_not_a_violation() {
        // Negative bias is fine under signed-bias: reported as a fact only.
        let report = and_gate().validate();
        assert!(!report.bias_positive);
        assert!(report.is_valid());
        assert!(report.output_binary);
    }

    #[test]
    fn validation_positive_threshold_violations() {
        let layer = Layer::new(
            0,
            vec![rats(&[(1, 5)])],
            rats(&[(1, 10)]), // nonzero bias: not allowed in this form
            Activation::Threshold(rat(-1, 5)), // nonpositive threshold
        )
        .unwrap();
        let net = Network::new(vec![layer], Convention::PositiveThreshold).unwrap();
        let report = net.validate();
        assert!(!report.bias_positive);
        assert_eq!(report.violations.len(), 2);
    }

    #[test]
    fn stateful_neuron_construction_guards() {
        assert!(matches!(
            StatefulNeuron::new(rats(&[(1, 2)]), rat(0, 1), rat(0, 1), vec![]),
            Err(NetError::NonPositiveBias { .. })
        ));
        assert!(matches!(
            StatefulNeuron::new(rats(&[(1, 2)]), rat(1, 5), rat(0, 1), vec![1, 2]),
            Err(NetError::NonBinaryTrace { index: 1, value: 2 })
        ));
    }

    #[test]
    fn stateful_neuron_fires_after_accumulation() {
        // weights (0.2, 0.2), stored potential 1, bias 0.2, inputs (1,1):
        // stored potential already reached the bias, so it is dropped and
        // the next potential is the fresh sum 0.4; 0.2 <= 0.4 emits 1.
        let n = StatefulNeuron::new(
            rats(&[(1, 5), (1, 5)]),
            rat(1, 5),
            rat(1, 1),
            vec![1],
        )
        .unwrap();
        assert_eq!(n.next_potential(&[1, 1]).unwrap(), rat(2, 5));
        let (out, next) = n.next_output(&[1, 1]).unwrap();
        assert_eq!(out, 1);
        assert_eq!(next.potential(), &rat(2, 5));
        assert_eq!(next.output_trace(), &[1, 1]);
    }

    #[test]
    fn stateful_neuron_quiescent_on_zero_inputs() {
        let n = StatefulNeuron::new(
            rats(&[(1, 5), (1, 5)]),
            rat(1, 5),
            rat(0, 1),
            vec![],
        )
        .unwrap();
        assert_eq!(n.next_potential(&[0, 0]).unwrap(), rat(0, 1));
        let (out, next) = n.next_output(&[0, 0]).unwrap();
        assert_eq!(out, 0);
        assert_eq!(next.output_trace(), &[0]);
    }

    #[test]
    fn stateful_neuron_accumulates_below_bias() {
        // Stored potential 0.1 < bias 0.2, so it carries into the sum:
        // 0.5 + 0.1 = 0.6.
        let n = StatefulNeuron::new(rats(&[(1, 2)]), rat(1, 5), rat(1, 10), vec![]).unwrap();
        assert_eq!(n.next_potential(&[1]).unwrap(), rat(3, 5));
    }

    #[test]
    fn stateful_neuron_rejects_non_binary_input() {
        let n = StatefulNeuron::new(rats(&[(1, 2)]), rat(1, 5), rat(0, 1), vec![]).unwrap();
        assert!(matches!(
            n.next_output(&[2]),
            Err(NetError::NonBinaryInput { index: 0, value: 2 })
        ));
        assert!(n.next_output(&[1, 1]).is_err());
    }

    proptest! {
        /// Outputs of the stateful neuron are bits, whatever the weights,
        /// stored potential, or (binary) inputs.
        #[test]
        fn stateful_outputs_always_binary(
            ws in proptest::collection::vec((-50i64..50, 1i64..50), 1..5),
            bias_n in 1i64..50, bias_d in 1i64..50,
            pot_n in -50i64..50, pot_d in 1i64..50,
            steps in proptest::collection::vec(proptest::collection::vec(0u8..2, 4), 1..20),
        ) {
            let weights: Vec<Rational> = ws.iter().map(|&(n, d)| rat(n, d)).collect();
            let dim = weights.len();
            let mut neuron = StatefulNeuron::new(
                weights, rat(bias_n, bias_d), rat(pot_n, pot_d), vec![],
            ).unwrap();
            for step in &steps {
                let (out, next) = neuron.next_output(&step[..dim]).unwrap();
                prop_assert!(out <= 1);
                prop_assert!(next.output_trace().iter().all(|&b| b <= 1));
                prop_assert_eq!(next.output_trace().len(), neuron.output_trace().len() + 1);
                neuron = next;
            }
        }

        /// Bias-free ReLU networks are positively homogeneous:
        /// f(k x) = k f(x) for k > 0. Exact arithmetic makes this an
        /// equality, not an approximation.
        #[test]
        fn relu_positive_homogeneity(
            w in proptest::collection::vec(
                proptest::collection::vec((-20i64..20, 1i64..20), 2), 2),
            x in proptest::collection::vec((-20i64..20, 1i64..20), 2),
            k_n in 1i64..30, k_d in 1i64..30,
        ) {
            let layer1 = Layer::new(
                0,
                w.iter().map(|row| row.iter().map(|&(n, d)| rat(n, d)).collect()).collect(),
                vec![Rational::zero(), Rational::zero()],
                Activation::Relu,
            ).unwrap();
            let layer2 = Layer::new(
                1,
                vec![rats(&[(1, 3), (-1, 4)])],
                vec![Rational::zero()],
                Activation::Relu,
            ).unwrap();
            let net = Network::new(vec![layer1, layer2], Convention::SignedBias).unwrap();
            let k = rat(k_n, k_d);
            let x: Vec<Rational> = x.iter().map(|&(n, d)| rat(n, d)).collect();
            let kx: Vec<Rational> = x.iter().map(|xi| &k * xi).collect();
            let scaled: Vec<Rational> =
                net.forward(&x).unwrap().iter().map(|y| &k * y).collect();
            prop_assert_eq!(net.forward(&kx).unwrap(), scaled);
        }

        /// Rational forward and float forward agree within 1e-9 on small
        /// well-conditioned Identity/ReLU networks (threshold nets are
        /// excluded: a discontinuity admits no drift bound).
        #[test]
        fn float_drift_is_bounded(
            w1 in proptest::collection::vec(
                proptest::collection::vec(-1000i64..1000, 2), 3),
            w2 in proptest::collection::vec(
                proptest::collection::vec(-1000i64..1000, 3), 2),
            b1 in proptest::collection::vec(-1000i64..1000, 3),
            b2 in proptest::collection::vec(-1000i64..1000, 2),
            x in proptest::collection::vec(-1000i64..1000, 2),
        ) {
            let to_r = |v: &Vec<i64>| -> Vec<Rational> {
                v.iter().map(|&n| rat(n, 1000)).collect()
            };
            let layer1 = Layer::new(
                0, w1.iter().map(to_r).collect(), to_r(&b1), Activation::Relu,
            ).unwrap();
            let layer2 = Layer::new(
                1, w2.iter().map(to_r).collect(), to_r(&b2), Activation::Identity,
            ).unwrap();
            let net = Network::new(vec![layer1, layer2], Convention::SignedBias).unwrap();
            let xr = to_r(&x);
            let xf: Vec<f64> = xr.iter().map(|v| v.to_f64()).collect();
            let exact = net.forward(&xr).unwrap();
            let float = net.forward_f64(&xf).unwrap();
            for (e, f) in exact.iter().zip(&float) {
                prop_assert!((e.to_f64() - f).abs() <= 1e-9);
            }
        }
    }
}
