//! Trainable tensors of the classifier and their initialization.

use super::mat::Mat;
use super::{ModelConfig, NnError};
use crate::rng::{derive_seed, Rng};

// Seed stream tag for parameter initialization; shuffling, dropout, and
// corpus synthesis use other tags so the draws never overlap.
pub(crate) const INIT_STREAM: u64 = 0x01;

/// One direction's LSTM weights. The gate dimension packs the four gates
/// in the fixed order (input, forget, cell, output), each `hidden` wide.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights {
    /// embed_dim x 4·hidden
    pub w_input: Mat,
    /// hidden x 4·hidden
    pub w_recur: Mat,
    /// 4·hidden
    pub bias: Vec<f64>,
}

impl LstmWeights {
    fn zeros(embed_dim: usize, hidden: usize) -> Self {
        LstmWeights {
            w_input: Mat::zeros(embed_dim, 4 * hidden),
            w_recur: Mat::zeros(hidden, 4 * hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }
}

/// All trainable tensors of the embedding/BiLSTM/dense stack. Also serves
/// as the gradient and optimizer-moment container, which keeps every
/// elementwise update a single zipped pass in one fixed tensor order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// vocab_size x embed_dim; row 0 (padding) participates like any row.
    pub embedding: Mat,
    pub forward_lstm: LstmWeights,
    pub backward_lstm: LstmWeights,
    /// 2·hidden x dense_hidden
    pub dense1_w: Mat,
    pub dense1_b: Vec<f64>,
    /// dense_hidden x num_outputs
    pub dense2_w: Mat,
    pub dense2_b: Vec<f64>,
}

fn glorot_fill(mat: &mut Mat, fan_in: usize, fan_out: usize, rng: &mut Rng) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in &mut mat.data {
        *v = rng.next_symmetric(bound);
    }
}

impl ModelParams {
    /// All-zero tensors shaped for `config`; the gradient/moment container.
    pub fn zeros(config: &ModelConfig) -> Self {
        ModelParams {
            embedding: Mat::zeros(config.vocab_size, config.embed_dim),
            forward_lstm: LstmWeights::zeros(config.embed_dim, config.hidden),
            backward_lstm: LstmWeights::zeros(config.embed_dim, config.hidden),
            dense1_w: Mat::zeros(config.pooled_dim(), config.dense_hidden),
            dense1_b: vec![0.0; config.dense_hidden],
            dense2_w: Mat::zeros(config.dense_hidden, config.num_outputs),
            dense2_b: vec![0.0; config.num_outputs],
        }
    }

    /// Deterministic initialization from `config.seed`: embedding and
    /// kernels uniform in ±sqrt(6/(fan_in+fan_out)), biases zero except the
    /// forget-gate segment which starts at 1.0.
    pub fn init(config: &ModelConfig) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = Rng::seed_from(derive_seed(config.seed, INIT_STREAM));
        let mut params = Self::zeros(config);
        let h = config.hidden;
        glorot_fill(
            &mut params.embedding,
            config.vocab_size,
            config.embed_dim,
            &mut rng,
        );
        for lstm in [&mut params.forward_lstm, &mut params.backward_lstm] {
            glorot_fill(&mut lstm.w_input, config.embed_dim, 4 * h, &mut rng);
            glorot_fill(&mut lstm.w_recur, h, 4 * h, &mut rng);
            // forget gate occupies the second hidden-wide slice
            lstm.bias[h..2 * h].fill(1.0);
        }
        glorot_fill(
            &mut params.dense1_w,
            config.pooled_dim(),
            config.dense_hidden,
            &mut rng,
        );
        glorot_fill(
            &mut params.dense2_w,
            config.dense_hidden,
            config.num_outputs,
            &mut rng,
        );
        Ok(params)
    }

    /// All tensors as (name, dims, values), in the fixed serialization
    /// order that [`values`](Self::values) also follows.
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        vec![
            (
                "embedding",
                vec![self.embedding.rows, self.embedding.cols],
                &self.embedding.data,
            ),
            (
                "fwd.w_input",
                vec![
                    self.forward_lstm.w_input.rows,
                    self.forward_lstm.w_input.cols,
                ],
                &self.forward_lstm.w_input.data,
            ),
            (
                "fwd.w_recur",
                vec![
                    self.forward_lstm.w_recur.rows,
                    self.forward_lstm.w_recur.cols,
                ],
                &self.forward_lstm.w_recur.data,
            ),
            (
                "fwd.bias",
                vec![self.forward_lstm.bias.len()],
                &self.forward_lstm.bias,
            ),
            (
                "bwd.w_input",
                vec![
                    self.backward_lstm.w_input.rows,
                    self.backward_lstm.w_input.cols,
                ],
                &self.backward_lstm.w_input.data,
            ),
            (
                "bwd.w_recur",
                vec![
                    self.backward_lstm.w_recur.rows,
                    self.backward_lstm.w_recur.cols,
                ],
                &self.backward_lstm.w_recur.data,
            ),
            (
                "bwd.bias",
                vec![self.backward_lstm.bias.len()],
                &self.backward_lstm.bias,
            ),
            (
                "dense1.w",
                vec![self.dense1_w.rows, self.dense1_w.cols],
                &self.dense1_w.data,
            ),
            ("dense1.b", vec![self.dense1_b.len()], &self.dense1_b),
            (
                "dense2.w",
                vec![self.dense2_w.rows, self.dense2_w.cols],
                &self.dense2_w.data,
            ),
            ("dense2.b", vec![self.dense2_b.len()], &self.dense2_b),
        ]
    }

    pub(crate) fn tensor_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        match name {
            "embedding" => Some(&mut self.embedding.data),
            "fwd.w_input" => Some(&mut self.forward_lstm.w_input.data),
            "fwd.w_recur" => Some(&mut self.forward_lstm.w_recur.data),
            "fwd.bias" => Some(&mut self.forward_lstm.bias),
            "bwd.w_input" => Some(&mut self.backward_lstm.w_input.data),
            "bwd.w_recur" => Some(&mut self.backward_lstm.w_recur.data),
            "bwd.bias" => Some(&mut self.backward_lstm.bias),
            "dense1.w" => Some(&mut self.dense1_w.data),
            "dense1.b" => Some(&mut self.dense1_b),
            "dense2.w" => Some(&mut self.dense2_w.data),
            "dense2.b" => Some(&mut self.dense2_b),
            _ => None,
        }
    }

    /// Flat view over every parameter, in serialization order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.embedding
            .data
            .iter()
            .chain(&self.forward_lstm.w_input.data)
            .chain(&self.forward_lstm.w_recur.data)
            .chain(&self.forward_lstm.bias)
            .chain(&self.backward_lstm.w_input.data)
            .chain(&self.backward_lstm.w_recur.data)
            .chain(&self.backward_lstm.bias)
            .chain(&self.dense1_w.data)
            .chain(&self.dense1_b)
            .chain(&self.dense2_w.data)
            .chain(&self.dense2_b)
            .copied()
    }

    /// Flat mutable view, same order as [`values`](Self::values).
    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.embedding
            .data
            .iter_mut()
            .chain(&mut self.forward_lstm.w_input.data)
            .chain(&mut self.forward_lstm.w_recur.data)
            .chain(&mut self.forward_lstm.bias)
            .chain(&mut self.backward_lstm.w_input.data)
            .chain(&mut self.backward_lstm.w_recur.data)
            .chain(&mut self.backward_lstm.bias)
            .chain(&mut self.dense1_w.data)
            .chain(&mut self.dense1_b)
            .chain(&mut self.dense2_w.data)
            .chain(&mut self.dense2_b)
    }

    pub fn n_params(&self) -> usize {
        self.values().count()
    }

    /// self += other * scale, elementwise. Shapes must match.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b * scale;
        }
    }

    /// self *= scale, elementwise.
    pub fn scale(&mut self, scale: f64) {
        for v in self.values_mut() {
            *v *= scale;
        }
    }

    pub fn zero(&mut self) {
        for v in self.values_mut() {
            *v = 0.0;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// Maximum absolute entry, for gradient-norm style checks.
    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}
