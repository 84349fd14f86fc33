//! Feedforward fully-connected networks and their `.net.json` file format.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

/// Current `.net.json` format version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network must have at least one layer")]
    NoLayers,
    #[error("layer {layer}: {message}")]
    InvalidLayer { layer: usize, message: String },
    #[error("layer {layer}: expects {expected} inputs but previous layer produces {actual}")]
    IncompatibleLayers { layer: usize, expected: usize, actual: usize },
    #[error("output layer must use the identity activation")]
    NonIdentityOutput,
    #[error("input has length {actual}, network expects {expected}")]
    InputDimension { expected: usize, actual: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("field `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("unsupported format_version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One dense layer: `activation(W x + b)` with `W` of shape out × in.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Matrix,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self, NetworkError> {
        Self::validated(0, weights, biases, activation)
    }

    fn validated(index: usize, weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self, NetworkError> {
        let invalid = |message: String| NetworkError::InvalidLayer { layer: index, message };
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(invalid("weight matrix must be non-empty".into()));
        }
        if biases.len() != weights.rows() {
            return Err(invalid(format!(
                "bias length {} does not match weight row count {}",
                biases.len(),
                weights.rows()
            )));
        }
        if !weights.as_slice().iter().chain(&biases).all(|v| v.is_finite()) {
            return Err(invalid("non-finite weight or bias".into()));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Writes `activation(W x + b)` into `out`. Dot products accumulate left
    /// to right and add the bias last, matching interval propagation.
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (&w, &v) in self.weights.row(r).iter().zip(x) {
                acc += w * v;
            }
            let z = acc + self.biases[r];
            *o = match self.activation {
                Activation::Relu => z.max(0.0),
                Activation::Identity => z,
            };
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkMetadata {
    #[serde(default)]
    pub name: String,
    /// Hex SHA-256 of the training configuration that produced the weights.
    #[serde(default)]
    pub training_config_digest: String,
}

/// Feedforward network. The last layer is always an identity layer producing
/// raw action scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    pub metadata: NetworkMetadata,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetworkError> {
        Self::with_metadata(layers, NetworkMetadata::default())
    }

    pub fn with_metadata(layers: Vec<Layer>, metadata: NetworkMetadata) -> Result<Self, NetworkError> {
        let last = layers.last().ok_or(NetworkError::NoLayers)?;
        if last.activation != Activation::Identity {
            return Err(NetworkError::NonIdentityOutput);
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].input_dim() != pair[0].output_dim() {
                return Err(NetworkError::IncompatibleLayers {
                    layer: i + 1,
                    expected: pair[1].input_dim(),
                    actual: pair[0].output_dim(),
                });
            }
        }
        Ok(Self { layers, metadata })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.biases.len())
            .sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if x.len() != self.input_dim() {
            return Err(NetworkError::InputDimension {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(NetworkError::NonFiniteInput);
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            next.resize(layer.output_dim(), 0.0);
            layer.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Greedy action: index of the largest output, lowest index on ties.
    pub fn argmax_action(&self, x: &[f64]) -> Result<usize, NetworkError> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| NetworkError::Parse {
            field: "<document>".into(),
            message: e.to_string(),
        })?;
        file.into_network()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Index of the maximal value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format_version: u32,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerFile>,
    #[serde(default)]
    metadata: NetworkMetadata,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    activation: String,
}

impl From<&Network> for NetworkFile {
    fn from(n: &Network) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            input_dim: n.input_dim(),
            output_dim: n.output_dim(),
            layers: n
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.weights.to_rows(),
                    biases: l.biases.clone(),
                    activation: l.activation.name().to_string(),
                })
                .collect(),
            metadata: n.metadata.clone(),
        }
    }
}

impl NetworkFile {
    fn into_network(self) -> Result<Network, NetworkError> {
        if self.format_version != FORMAT_VERSION {
            return Err(NetworkError::Version {
                found: self.format_version,
            });
        }
        let parse = |field: String, message: String| NetworkError::Parse { field, message };
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, lf) in self.layers.into_iter().enumerate() {
            let activation = Activation::parse(&lf.activation).ok_or_else(|| {
                parse(
                    format!("layers[{i}].activation"),
                    format!("unknown activation `{}`", lf.activation),
                )
            })?;
            let weights = Matrix::from_rows(&lf.weights)
                .ok_or_else(|| parse(format!("layers[{i}].weights"), "rows have unequal lengths".into()))?;
            if lf.biases.len() != weights.rows() {
                return Err(parse(
                    format!("layers[{i}].biases"),
                    format!(
                        "length {} does not match weight row count {} in layer {i}",
                        lf.biases.len(),
                        weights.rows()
                    ),
                ));
            }
            layers.push(Layer::validated(i, weights, lf.biases, activation)?);
        }
        let network = Network::with_metadata(layers, self.metadata)?;
        if network.input_dim() != self.input_dim {
            return Err(parse(
                "input_dim".into(),
                format!("declared {} but first layer takes {}", self.input_dim, network.input_dim()),
            ));
        }
        if network.output_dim() != self.output_dim {
            return Err(parse(
                "output_dim".into(),
                format!("declared {} but last layer produces {}", self.output_dim, network.output_dim()),
            ));
        }
        Ok(network)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(rows: &[Vec<f64>], b: &[f64], act: Activation) -> Layer {
        Layer::new(Matrix::from_rows(rows).unwrap(), b.to_vec(), act).unwrap()
    }

    fn two_layer() -> Network {
        Network::new(vec![
            layer(&[vec![1.0], vec![-1.0]], &[0.0, 0.0], Activation::Relu),
            layer(&[vec![1.0, 1.0]], &[0.0], Activation::Identity),
        ])
        .unwrap()
    }

    #[test]
    fn forward_examples() {
        let single = Network::new(vec![layer(&[vec![2.0]], &[1.0], Activation::Identity)]).unwrap();
        assert_eq!(single.forward(&[3.0]).unwrap(), vec![7.0]);
        assert_eq!(two_layer().forward(&[-2.0]).unwrap(), vec![2.0]);

        let zero = Network::new(vec![
            layer(&vec![vec![0.0, 0.0]; 3], &[0.5, -1.0, 2.0], Activation::Relu),
            layer(&vec![vec![0.0; 3]; 2], &[0.25, -4.0], Activation::Identity),
        ])
        .unwrap();
        assert_eq!(zero.forward(&[123.0, -7.0]).unwrap(), vec![0.25, -4.0]);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let n = two_layer();
        assert!(matches!(n.forward(&[1.0, 2.0]), Err(NetworkError::InputDimension { .. })));
        assert!(matches!(n.forward(&[f64::NAN]), Err(NetworkError::NonFiniteInput)));
    }

    #[test]
    fn argmax_ties_and_examples() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        let with_zero_head = Network::new(vec![
            layer(&[vec![1.0], vec![-1.0]], &[0.0, 0.0], Activation::Relu),
            layer(&[vec![1.0, 1.0], vec![0.0, 0.0]], &[0.0, 0.0], Activation::Identity),
        ])
        .unwrap();
        assert_eq!(with_zero_head.forward(&[-2.0]).unwrap(), vec![2.0, 0.0]);
        assert_eq!(with_zero_head.argmax_action(&[-2.0]).unwrap(), 0);
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(Network::new(vec![]), Err(NetworkError::NoLayers)));
        assert!(matches!(
            Network::new(vec![layer(&[vec![1.0]], &[0.0], Activation::Relu)]),
            Err(NetworkError::NonIdentityOutput)
        ));
        assert!(matches!(
            Network::new(vec![
                layer(&[vec![1.0]], &[0.0], Activation::Relu),
                layer(&[vec![1.0, 1.0]], &[0.0], Activation::Identity),
            ]),
            Err(NetworkError::IncompatibleLayers { layer: 1, .. })
        ));
        assert!(Layer::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![0.0, 1.0], Activation::Relu).is_err());
        assert!(Layer::new(Matrix::from_rows(&[vec![f64::NAN]]).unwrap(), vec![0.0], Activation::Relu).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut n = two_layer();
        n.layers_mut()[0].weights_mut().set(0, 0, 0.1 + 0.2);
        n.layers_mut()[1].biases_mut()[0] = -1.0 / 3.0;
        n.metadata.name = "toy".into();
        let back = Network::from_json(&n.to_json()).unwrap();
        assert_eq!(back, n);
    }

    fn doc(layers: &str) -> String {
        format!(r#"{{"format_version":1,"input_dim":1,"output_dim":1,"layers":[{layers}]}}"#)
    }

    #[test]
    fn load_errors_name_the_field() {
        let err = Network::from_json(&doc(
            r#"{"weights":[[1.0]],"biases":[0.0],"activation":"relu"},{"weights":[[1.0]],"biases":[0.0,1.0],"activation":"identity"}"#,
        ))
        .unwrap_err()
        .to_string();
        assert!(err.contains("layers[1].biases"), "{err}");
        assert!(err.contains("layer 1"), "{err}");

        let err = Network::from_json(&doc(r#"{"weights":[[1.0]],"biases":[0.0],"activation":"tanh"}"#))
            .unwrap_err()
            .to_string();
        assert!(err.contains("activation") && err.contains("tanh"), "{err}");

        let err = Network::from_json(
            r#"{"format_version":7,"input_dim":1,"output_dim":1,"layers":[{"weights":[[1.0]],"biases":[0.0],"activation":"identity"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::Version { found: 7 }));

        let err = Network::from_json(
            r#"{"format_version":1,"input_dim":2,"output_dim":1,"layers":[{"weights":[[1.0]],"biases":[0.0],"activation":"identity"}]}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("input_dim"), "{err}");

        assert!(Network::from_json("{not json").is_err());
    }
}
