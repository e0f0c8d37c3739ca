//! Untrained feedforward network used as a fixed random function approximator.
//!
//! Weights are drawn once from a seeded ChaCha8 stream and never updated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of the weight generator, echoed into output metadata.
pub const PRNG_ALGORITHM: &str = "chacha8(seed_from_u64)/uniform(+-1/sqrt(fan_in))";

pub const INPUT_WIDTH: usize = 6;
pub const OUTPUT_WIDTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network topology must start at {INPUT_WIDTH} and end at {OUTPUT_WIDTH}, got {0:?}")]
    Topology(Vec<usize>),
    #[error(
        "layer {layer}: weight matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}"
    )]
    LayerShape {
        layer: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("expected input of length {expected}, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("non-finite network input at index {0}")]
    NonFiniteInput(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

/// How the last layer's pre-activation is mapped to the output vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputMap {
    /// `scale · tanh(z)`, bounded by `scale`.
    ScaledTanh(f64),
    /// Raw affine output, no squashing.
    Linear,
}

/// Dense layer stored row-major: `weights[o][i]` connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Self {
        Self { weights, biases }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
    activation: Activation,
    output: OutputMap,
    seed: Option<u64>,
}

impl MlpNetwork {
    /// Builds a network with seeded uniform weights and zero biases.
    ///
    /// `layer_sizes` lists every width including input and output, so the
    /// default topology is `[6, 16, 16, 3]`.
    pub fn init(
        layer_sizes: &[usize],
        seed: u64,
        activation: Activation,
        output: OutputMap,
    ) -> Result<Self, NetworkError> {
        if layer_sizes.len() < 2
            || layer_sizes[0] != INPUT_WIDTH
            || layer_sizes[layer_sizes.len() - 1] != OUTPUT_WIDTH
            || layer_sizes.contains(&0)
        {
            return Err(NetworkError::Topology(layer_sizes.to_vec()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weights = (0..fan_out)
                    .map(|_| {
                        (0..fan_in)
                            .map(|_| bound * (2.0 * rng.gen::<f64>() - 1.0))
                            .collect()
                    })
                    .collect();
                Layer::new(weights, vec![0.0; fan_out])
            })
            .collect();
        Ok(Self {
            layers,
            activation,
            output,
            seed: Some(seed),
        })
    }

    /// Builds a network from explicit layers, validating shapes.
    pub fn from_layers(
        layers: Vec<Layer>,
        activation: Activation,
        output: OutputMap,
    ) -> Result<Self, NetworkError> {
        let mut expected_cols = INPUT_WIDTH;
        for (idx, layer) in layers.iter().enumerate() {
            let rows = layer.weights.len();
            let bad_row = layer.weights.iter().any(|r| r.len() != expected_cols);
            let last = idx + 1 == layers.len();
            let expected_rows = if last { OUTPUT_WIDTH } else { rows.max(1) };
            if bad_row || rows != expected_rows || layer.biases.len() != rows {
                return Err(NetworkError::LayerShape {
                    layer: idx,
                    rows,
                    cols: layer.inputs(),
                    expected_rows,
                    expected_cols,
                });
            }
            expected_cols = rows;
        }
        if layers.is_empty() {
            return Err(NetworkError::Topology(vec![INPUT_WIDTH]));
        }
        Ok(Self {
            layers,
            activation,
            output,
            seed: None,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_map(&self) -> OutputMap {
        self.output
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn topology(&self) -> Vec<usize> {
        std::iter::once(INPUT_WIDTH)
            .chain(self.layers.iter().map(|l| l.biases.len()))
            .collect()
    }

    /// Runs the forward pass on a 6-vector.
    pub fn forward(&self, input: &[f64]) -> Result<[f64; OUTPUT_WIDTH], NetworkError> {
        if input.len() != INPUT_WIDTH {
            return Err(NetworkError::InputLength {
                expected: INPUT_WIDTH,
                got: input.len(),
            });
        }
        if let Some(idx) = input.iter().position(|v| !v.is_finite()) {
            return Err(NetworkError::NonFiniteInput(idx));
        }
        let (last, hidden) = self.layers.split_last().expect("at least one layer");
        let mut x = input.to_vec();
        for layer in hidden {
            x = layer
                .affine(&x)
                .into_iter()
                .map(|z| self.activation.apply(z))
                .collect();
        }
        let z = last.affine(&x);
        let mut out = [0.0; OUTPUT_WIDTH];
        for (o, z) in out.iter_mut().zip(z) {
            *o = match self.output {
                OutputMap::ScaledTanh(scale) => scale * z.tanh(),
                OutputMap::Linear => z,
            };
        }
        Ok(out)
    }
}
