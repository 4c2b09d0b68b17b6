//! Forward pass, loss, and backpropagation through time.
//!
//! The stack is embedding -> bidirectional LSTM -> global max pool ->
//! dropout -> dense+ReLU -> dense -> elementwise sigmoid over two outputs
//! (benign score, malicious score); argmax decides the class. The backward
//! pass produces exact analytic gradients of the mean batch loss through
//! both LSTM directions, the max-pool argmax routing, and the dropout mask.

use super::mat::{axpy, dot, Mat};
use super::math::{sigmoid, sigmoid_slice, tanh_slice};
use super::params::{LstmWeights, ModelParams};
use super::{ModelConfig, NnError};
use crate::rng::Rng;
use crate::text::TokenSequence;

/// Gradients are shaped exactly like the parameters they refer to.
pub type Gradients = ModelParams;

/// Forward-pass mode. Training derives the dropout mask from a seed, so a
/// pass is a pure function of its arguments and can be re-evaluated (for
/// finite differences) or replayed bit-identically.
#[derive(Clone, Copy, Debug)]
pub enum DropoutMode {
    Infer,
    Train { mask_seed: u64 },
}

const LOSS_CLAMP: f64 = 1e-7;

/// Per-direction activations cached for backpropagation, indexed by
/// sequence position.
pub(crate) struct DirectionState {
    /// maxlen x 4·hidden, post-activation gates in order (i, f, g, o)
    gates: Mat,
    /// maxlen x hidden
    cell: Mat,
    /// maxlen x hidden, tanh of the cell state
    cell_tanh: Mat,
    /// maxlen x hidden
    pub hidden: Mat,
}

impl DirectionState {
    fn zeros(steps: usize, hidden: usize) -> Self {
        DirectionState {
            gates: Mat::zeros(steps, 4 * hidden),
            cell: Mat::zeros(steps, hidden),
            cell_tanh: Mat::zeros(steps, hidden),
            hidden: Mat::zeros(steps, hidden),
        }
    }
}

/// One LSTM step: gate pre-activations from input, recurrence, and bias;
/// then c = f*c_prev + i*g and h = o*tanh(c).
#[allow(clippy::too_many_arguments)]
fn cell_step(
    w: &LstmWeights,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    gates: &mut [f64],
    cell: &mut [f64],
    cell_tanh: &mut [f64],
    hidden: &mut [f64],
) {
    let h = c_prev.len();
    gates.copy_from_slice(&w.bias);
    for (j, &xj) in x.iter().enumerate() {
        axpy(gates, w.w_input.row(j), xj);
    }
    for (j, &hj) in h_prev.iter().enumerate() {
        axpy(gates, w.w_recur.row(j), hj);
    }
    sigmoid_slice(&mut gates[..2 * h]);
    tanh_slice(&mut gates[2 * h..3 * h]);
    sigmoid_slice(&mut gates[3 * h..]);
    for k in 0..h {
        cell[k] = gates[h + k].mul_add(c_prev[k], gates[k] * gates[2 * h + k]);
    }
    cell_tanh.copy_from_slice(cell);
    tanh_slice(cell_tanh);
    for k in 0..h {
        hidden[k] = gates[3 * h + k] * cell_tanh[k];
    }
}

fn run_direction<I>(w: &LstmWeights, embedded: &Mat, positions: I, state: &mut DirectionState)
where
    I: Iterator<Item = usize>,
{
    let h = w.w_recur.rows;
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for t in positions {
        cell_step(
            w,
            embedded.row(t),
            &h_prev,
            &c_prev,
            state.gates.row_mut(t),
            state.cell.row_mut(t),
            state.cell_tanh.row_mut(t),
            state.hidden.row_mut(t),
        );
        h_prev.copy_from_slice(state.hidden.row(t));
        c_prev.copy_from_slice(state.cell.row(t));
    }
}

/// Single LSTM cell step over explicit state, validating dimensions.
pub fn lstm_cell_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    w: &LstmWeights,
) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    let h = w.w_recur.rows;
    if w.w_input.rows != x.len()
        || h_prev.len() != h
        || c_prev.len() != h
        || w.w_input.cols != 4 * h
        || w.w_recur.cols != 4 * h
        || w.bias.len() != 4 * h
    {
        return Err(NnError::DimensionMismatch(format!(
            "lstm step: x={}, h_prev={}, c_prev={}, kernels {}x{} / {}x{}",
            x.len(),
            h_prev.len(),
            c_prev.len(),
            w.w_input.rows,
            w.w_input.cols,
            w.w_recur.rows,
            w.w_recur.cols,
        )));
    }
    let mut gates = vec![0.0; 4 * h];
    let mut cell = vec![0.0; h];
    let mut cell_tanh = vec![0.0; h];
    let mut hidden = vec![0.0; h];
    cell_step(
        w,
        x,
        h_prev,
        c_prev,
        &mut gates,
        &mut cell,
        &mut cell_tanh,
        &mut hidden,
    );
    Ok((hidden, cell))
}

/// Runs both LSTM directions from zero state over an embedded sequence and
/// concatenates their hidden states per timestep: row t is
/// (h_fwd[t], h_bwd[t]), where the backward direction scanned from the end.
pub fn bilstm_forward(embedded: &Mat, params: &ModelParams) -> Result<Mat, NnError> {
    let h = params.forward_lstm.w_recur.rows;
    if embedded.cols != params.forward_lstm.w_input.rows
        || embedded.cols != params.backward_lstm.w_input.rows
        || embedded.rows == 0
    {
        return Err(NnError::DimensionMismatch(format!(
            "bilstm input {}x{} vs kernel rows {}",
            embedded.rows, embedded.cols, params.forward_lstm.w_input.rows
        )));
    }
    let t_len = embedded.rows;
    let mut fwd = DirectionState::zeros(t_len, h);
    run_direction(&params.forward_lstm, embedded, 0..t_len, &mut fwd);
    let mut bwd = DirectionState::zeros(t_len, h);
    run_direction(&params.backward_lstm, embedded, (0..t_len).rev(), &mut bwd);
    let mut out = Mat::zeros(t_len, 2 * h);
    for t in 0..t_len {
        out.row_mut(t)[..h].copy_from_slice(fwd.hidden.row(t));
        out.row_mut(t)[h..].copy_from_slice(bwd.hidden.row(t));
    }
    Ok(out)
}

/// Per-dimension maximum over timesteps.
pub fn global_max_pool(seq_out: &Mat) -> Vec<f64> {
    assert!(seq_out.rows >= 1, "max pool needs at least one timestep");
    let mut pooled = seq_out.row(0).to_vec();
    for t in 1..seq_out.rows {
        for (p, &v) in pooled.iter_mut().zip(seq_out.row(t)) {
            if v > *p {
                *p = v;
            }
        }
    }
    pooled
}

/// Inverted dropout: in training each entry is zeroed with probability
/// `rate` and survivors scale by 1/(1-rate); inference is the identity.
pub fn dropout_apply(
    v: &[f64],
    rate: f64,
    train: bool,
    rng: &mut Rng,
) -> Result<Vec<f64>, NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::InvalidRate(rate));
    }
    if !train || rate == 0.0 {
        return Ok(v.to_vec());
    }
    let keep = 1.0 / (1.0 - rate);
    Ok(v.iter()
        .map(|&x| if rng.next_f64() < rate { 0.0 } else { x * keep })
        .collect())
}

/// Mean binary cross-entropy over the output vector, with predictions
/// clamped to [1e-7, 1-1e-7] so the logs stay finite.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&p, &y) in pred.iter().zip(target) {
        let p = p.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    total / pred.len() as f64
}

pub(crate) struct ForwardCache {
    embedded: Mat,
    fwd: DirectionState,
    bwd: DirectionState,
    pool_src: Vec<usize>,
    dropout_scale: Vec<f64>,
    dropped: Vec<f64>,
    dense1_pre: Vec<f64>,
    dense1_out: Vec<f64>,
    pub probs: Vec<f64>,
}

pub(crate) fn forward_cached(
    params: &ModelParams,
    config: &ModelConfig,
    indices: &[u32],
    mode: DropoutMode,
) -> Result<ForwardCache, NnError> {
    if indices.len() != config.maxlen {
        return Err(NnError::DimensionMismatch(format!(
            "sequence length {} != maxlen {}",
            indices.len(),
            config.maxlen
        )));
    }
    for &ix in indices {
        if ix as usize >= config.vocab_size {
            return Err(NnError::IndexOutOfVocab {
                index: ix,
                vocab_size: config.vocab_size,
            });
        }
    }
    let t_len = indices.len();
    let h = config.hidden;

    let mut embedded = Mat::zeros(t_len, config.embed_dim);
    for (t, &ix) in indices.iter().enumerate() {
        embedded
            .row_mut(t)
            .copy_from_slice(params.embedding.row(ix as usize));
    }

    let mut fwd = DirectionState::zeros(t_len, h);
    run_direction(&params.forward_lstm, &embedded, 0..t_len, &mut fwd);
    let mut bwd = DirectionState::zeros(t_len, h);
    run_direction(&params.backward_lstm, &embedded, (0..t_len).rev(), &mut bwd);

    // Global max pool over concat(h_fwd, h_bwd); strict comparison keeps
    // the first maximal timestep, which fixes the backward routing.
    let d = 2 * h;
    let mut pooled = vec![f64::NEG_INFINITY; d];
    let mut pool_src = vec![0usize; d];
    for t in 0..t_len {
        for (k, &v) in fwd.hidden.row(t).iter().enumerate() {
            if v > pooled[k] {
                pooled[k] = v;
                pool_src[k] = t;
            }
        }
        for (k, &v) in bwd.hidden.row(t).iter().enumerate() {
            if v > pooled[h + k] {
                pooled[h + k] = v;
                pool_src[h + k] = t;
            }
        }
    }

    let mut dropout_scale = vec![1.0; d];
    if let DropoutMode::Train { mask_seed } = mode {
        if config.dropout_rate > 0.0 {
            let keep = 1.0 / (1.0 - config.dropout_rate);
            let mut rng = Rng::seed_from(mask_seed);
            for s in &mut dropout_scale {
                *s = if rng.next_f64() < config.dropout_rate {
                    0.0
                } else {
                    keep
                };
            }
        }
    }
    let dropped: Vec<f64> = pooled
        .iter()
        .zip(&dropout_scale)
        .map(|(p, s)| p * s)
        .collect();

    let mut dense1_pre = params.dense1_b.clone();
    for (j, &v) in dropped.iter().enumerate() {
        axpy(&mut dense1_pre, params.dense1_w.row(j), v);
    }
    let dense1_out: Vec<f64> = dense1_pre.iter().map(|&v| v.max(0.0)).collect();

    let mut logits = params.dense2_b.clone();
    for (j, &v) in dense1_out.iter().enumerate() {
        axpy(&mut logits, params.dense2_w.row(j), v);
    }
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();

    Ok(ForwardCache {
        embedded,
        fwd,
        bwd,
        pool_src,
        dropout_scale,
        dropped,
        dense1_pre,
        dense1_out,
        probs,
    })
}

/// Full forward pass over an encoded sequence. Returns the two class
/// scores (benign, malicious), each in (0, 1).
pub fn model_forward(
    seq: &TokenSequence,
    params: &ModelParams,
    config: &ModelConfig,
    mode: DropoutMode,
) -> Result<Vec<f64>, NnError> {
    Ok(forward_cached(params, config, &seq.indices, mode)?.probs)
}

fn lstm_backward(
    w: &LstmWeights,
    state: &DirectionState,
    embedded: &Mat,
    d_hidden_ext: &Mat,
    order: &[usize],
    grads: &mut LstmWeights,
    d_embedded: &mut Mat,
) {
    let h = w.w_recur.rows;
    let zeros = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut dc = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for s in (0..order.len()).rev() {
        let t = order[s];
        let gates = state.gates.row(t);
        let tanh_c = state.cell_tanh.row(t);
        let (h_prev, c_prev): (&[f64], &[f64]) = if s == 0 {
            (&zeros, &zeros)
        } else {
            (state.hidden.row(order[s - 1]), state.cell.row(order[s - 1]))
        };
        for (dhk, &ext) in dh.iter_mut().zip(d_hidden_ext.row(t)) {
            *dhk += ext;
        }
        for k in 0..h {
            let i = gates[k];
            let f = gates[h + k];
            let g = gates[2 * h + k];
            let o = gates[3 * h + k];
            let tc = tanh_c[k];
            let dhk = dh[k];
            dz[3 * h + k] = dhk * tc * o * (1.0 - o);
            let dck = dc[k] + dhk * o * (1.0 - tc * tc);
            dz[k] = dck * g * i * (1.0 - i);
            dz[h + k] = dck * c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dck * i * (1.0 - g * g);
            dc[k] = dck * f;
        }
        let x = embedded.row(t);
        for (j, &xj) in x.iter().enumerate() {
            axpy(grads.w_input.row_mut(j), &dz, xj);
        }
        for (j, &hj) in h_prev.iter().enumerate() {
            axpy(grads.w_recur.row_mut(j), &dz, hj);
        }
        axpy(&mut grads.bias, &dz, 1.0);
        for (j, dej) in d_embedded.row_mut(t).iter_mut().enumerate() {
            *dej += dot(w.w_input.row(j), &dz);
        }
        for (j, dhj) in dh.iter_mut().enumerate() {
            *dhj = dot(w.w_recur.row(j), &dz);
        }
    }
}

/// Accumulates (+=) gradients of this item's loss into `grads`.
pub(crate) fn backward_into(
    params: &ModelParams,
    config: &ModelConfig,
    cache: &ForwardCache,
    target: &[f64],
    indices: &[u32],
    grads: &mut Gradients,
) {
    let h = config.hidden;
    let k_out = config.num_outputs;

    // d loss / d logits through mean BCE and sigmoid; zero where the loss
    // clamp is active, matching the flat region of the clamped loss.
    let mut d_logits = vec![0.0; k_out];
    for k in 0..k_out {
        let p = cache.probs[k];
        d_logits[k] = if !(LOSS_CLAMP..=1.0 - LOSS_CLAMP).contains(&p) {
            0.0
        } else {
            (p - target[k]) / k_out as f64
        };
    }

    for (j, &a) in cache.dense1_out.iter().enumerate() {
        axpy(grads.dense2_w.row_mut(j), &d_logits, a);
    }
    axpy(&mut grads.dense2_b, &d_logits, 1.0);

    let mut d_dense1 = vec![0.0; config.dense_hidden];
    for (j, dd) in d_dense1.iter_mut().enumerate() {
        *dd = dot(params.dense2_w.row(j), &d_logits);
    }
    for (dd, &pre) in d_dense1.iter_mut().zip(&cache.dense1_pre) {
        if pre <= 0.0 {
            *dd = 0.0;
        }
    }

    for (j, &a) in cache.dropped.iter().enumerate() {
        axpy(grads.dense1_w.row_mut(j), &d_dense1, a);
    }
    axpy(&mut grads.dense1_b, &d_dense1, 1.0);

    let mut d_pooled = vec![0.0; config.pooled_dim()];
    for (j, dp) in d_pooled.iter_mut().enumerate() {
        *dp = dot(params.dense1_w.row(j), &d_dense1) * cache.dropout_scale[j];
    }

    let t_len = indices.len();
    let mut d_hidden_fwd = Mat::zeros(t_len, h);
    let mut d_hidden_bwd = Mat::zeros(t_len, h);
    for k in 0..h {
        d_hidden_fwd.row_mut(cache.pool_src[k])[k] += d_pooled[k];
        d_hidden_bwd.row_mut(cache.pool_src[h + k])[k] += d_pooled[h + k];
    }

    let mut d_embedded = Mat::zeros(t_len, config.embed_dim);
    let fwd_order: Vec<usize> = (0..t_len).collect();
    lstm_backward(
        &params.forward_lstm,
        &cache.fwd,
        &cache.embedded,
        &d_hidden_fwd,
        &fwd_order,
        &mut grads.forward_lstm,
        &mut d_embedded,
    );
    let bwd_order: Vec<usize> = (0..t_len).rev().collect();
    lstm_backward(
        &params.backward_lstm,
        &cache.bwd,
        &cache.embedded,
        &d_hidden_bwd,
        &bwd_order,
        &mut grads.backward_lstm,
        &mut d_embedded,
    );

    for (t, &ix) in indices.iter().enumerate() {
        axpy(grads.embedding.row_mut(ix as usize), d_embedded.row(t), 1.0);
    }
}

/// One item of a training batch. `mask_seed` fixes the dropout mask;
/// `None` runs the forward pass without dropout.
#[derive(Clone, Copy, Debug)]
pub struct BatchItem<'a> {
    pub indices: &'a [u32],
    pub target: [f64; 2],
    pub mask_seed: Option<u64>,
}

/// Mean loss over a batch and the exact analytic gradients of that mean
/// with respect to every parameter.
pub fn batch_gradients(
    params: &ModelParams,
    config: &ModelConfig,
    items: &[BatchItem],
) -> Result<(f64, Gradients), NnError> {
    if items.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if config.num_outputs != 2 {
        return Err(NnError::DimensionMismatch(format!(
            "batch targets are two-class, config has {} outputs",
            config.num_outputs
        )));
    }
    let mut grads = Gradients::zeros(config);
    let mut loss = 0.0;
    for item in items {
        let mode = match item.mask_seed {
            Some(seed) => DropoutMode::Train { mask_seed: seed },
            None => DropoutMode::Infer,
        };
        let cache = forward_cached(params, config, item.indices, mode)?;
        loss += bce_loss(&cache.probs, &item.target);
        backward_into(
            params,
            config,
            &cache,
            &item.target,
            item.indices,
            &mut grads,
        );
    }
    let scale = 1.0 / items.len() as f64;
    grads.scale(scale);
    Ok((loss * scale, grads))
}
