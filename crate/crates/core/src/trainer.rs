//! From-scratch single-hidden-layer MLP with an optional fixed embedding,
//! trained by minibatch Adam on mean BCE loss. Supports fractional-epoch
//! snapshotting (for emergence analysis) and per-neuron execution traces.
//!
//! The forward pass is `h = ReLU(W1 * (C0 * x) + b1)`, `y = sigmoid(W2 * h + b2)`,
//! with the embedding `C0` frozen throughout training. ReLU' at exactly zero
//! is taken as zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::disentangle::{Embedding, EmbeddingKind};
use crate::matrix::Matrix;
use crate::rng::{mix, rng_from};
use crate::sampler::Dataset;
use crate::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Clamp for log() in the reported loss; gradients use the exact (p - y).
const BCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Number of raw input variables (and embedded width; embeddings are square).
    pub num_inputs: usize,
    /// Hidden layer width.
    pub hidden: usize,
    /// Number of output neurons.
    pub outputs: usize,
    /// Whether the output layer has a trainable bias.
    pub use_b2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub dims: ModelDims,
    pub embedding: Embedding,
    /// hidden x embedded-width.
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// outputs x hidden.
    pub w2: Matrix,
    /// Zeros when `dims.use_b2` is false.
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without train-loss improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
    /// Fractional-epoch points at which to deep-copy the model (0.0 snapshots
    /// the initialization).
    #[serde(default)]
    pub snapshot_schedule: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            snapshot_schedule: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HistoryPoint {
    pub epoch: f64,
    pub train_loss: f64,
    pub train_error: f64,
    pub model: MlpModel,
}

#[derive(Debug, Clone)]
pub struct TrainHistory {
    /// Snapshot points, sorted by fractional epoch.
    pub points: Vec<HistoryPoint>,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub final_error: f64,
    pub stopped_early: bool,
}

/// Per-neuron record of one forward pass.
#[derive(Debug, Clone)]
pub struct NeuronTrace {
    pub pre_bias: f64,
    pub post_bias: f64,
    pub post_relu: f64,
    /// This neuron's outgoing weight per output.
    pub w2: Vec<f64>,
    /// post_relu * w2, per output.
    pub contribution: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExecutionTrace {
    pub neurons: Vec<NeuronTrace>,
    pub pre_sigmoid: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestError {
    /// Misclassification rate per output.
    pub per_output: Vec<f64>,
    /// Fraction of samples with at least one wrong output.
    pub joint: f64,
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fresh model with sign-symmetric uniform weights (scale `1/sqrt(fan_in)`)
/// and biases uniform in (-1, 1). Deterministic per seed; the embedding is
/// built from a derived seed and never trained.
pub fn init_model(dims: ModelDims, embedding_kind: EmbeddingKind, seed: u64) -> Result<MlpModel> {
    init_model_with(dims, embedding_kind, seed, 1.0)
}

/// [`init_model`] with an explicit bias init range: biases are drawn from
/// `Uniform(-bias_range, bias_range)`. Tasks whose inputs are too sparse to
/// ever activate a deeply negative bias need a small range, since a hidden
/// row that never activates receives no gradient at all and keeps its
/// initial bias forever.
pub fn init_model_with(
    dims: ModelDims,
    embedding_kind: EmbeddingKind,
    seed: u64,
    bias_range: f64,
) -> Result<MlpModel> {
    if dims.num_inputs == 0 || dims.hidden == 0 || dims.outputs == 0 {
        return Err(Error::Argument("model dimensions must be positive".into()));
    }
    if !(bias_range >= 0.0) {
        return Err(Error::Argument("bias_range must be nonnegative".into()));
    }
    let embedding = Embedding::build(embedding_kind, dims.num_inputs, mix(seed, 0xE3BD))?;
    let n0 = embedding.width();
    let n1 = dims.hidden;
    let o = dims.outputs;
    let mut rng = rng_from(seed);
    let s1 = 1.0 / (n0 as f64).sqrt();
    let w1 = Matrix::from_fn(n1, n0, |_, _| rng.gen_range(-s1..s1));
    let draw_bias = |rng: &mut rand_chacha::ChaCha8Rng| {
        if bias_range == 0.0 {
            0.0
        } else {
            rng.gen_range(-bias_range..bias_range)
        }
    };
    let b1: Vec<f64> = (0..n1).map(|_| draw_bias(&mut rng)).collect();
    let s2 = 1.0 / (n1 as f64).sqrt();
    let w2 = Matrix::from_fn(o, n1, |_, _| rng.gen_range(-s2..s2));
    let b2: Vec<f64> = if dims.use_b2 {
        (0..o).map(|_| draw_bias(&mut rng)).collect()
    } else {
        vec![0.0; o]
    };
    Ok(MlpModel { dims, embedding, w1, b1, w2, b2 })
}

impl MlpModel {
    pub fn num_inputs(&self) -> usize {
        self.dims.num_inputs
    }

    pub fn hidden(&self) -> usize {
        self.dims.hidden
    }

    pub fn outputs(&self) -> usize {
        self.dims.outputs
    }

    /// Hidden post-ReLU activations for an embedded input.
    fn hidden_from_embedded(&self, e: &[f64]) -> Vec<f64> {
        (0..self.dims.hidden)
            .map(|r| (dot(self.w1.row(r), e) + self.b1[r]).max(0.0))
            .collect()
    }

    /// Output probabilities for an embedded input (no trace).
    fn probs_from_embedded(&self, e: &[f64]) -> Vec<f64> {
        let h = self.hidden_from_embedded(e);
        (0..self.dims.outputs)
            .map(|t| sigmoid(dot(self.w2.row(t), &h) + self.b2[t]))
            .collect()
    }

    /// Post-ReLU hidden activations for a raw 0/1 input.
    pub fn hidden_activations(&self, input: &[u8]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.hidden_from_embedded(&self.embedding.embed(input)))
    }

    /// Output probabilities for a raw 0/1 input.
    pub fn predict(&self, input: &[u8]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.probs_from_embedded(&self.embedding.embed(input)))
    }

    fn check_input(&self, input: &[u8]) -> Result<()> {
        if input.len() != self.dims.num_inputs {
            return Err(Error::Dimension(format!(
                "input length {} != num_inputs {}",
                input.len(),
                self.dims.num_inputs
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))
    }
}

/// Full forward pass with a per-neuron execution trace.
pub fn forward(model: &MlpModel, input: &[u8]) -> Result<(Vec<f64>, ExecutionTrace)> {
    model.check_input(input)?;
    let e = model.embedding.embed(input);
    let n1 = model.dims.hidden;
    let o = model.dims.outputs;
    let mut neurons = Vec::with_capacity(n1);
    for r in 0..n1 {
        let pre_bias = dot(model.w1.row(r), &e);
        let post_bias = pre_bias + model.b1[r];
        let post_relu = post_bias.max(0.0);
        let w2: Vec<f64> = (0..o).map(|t| model.w2.get(t, r)).collect();
        let contribution: Vec<f64> = w2.iter().map(|w| w * post_relu).collect();
        neurons.push(NeuronTrace { pre_bias, post_bias, post_relu, w2, contribution });
    }
    let pre_sigmoid: Vec<f64> = (0..o)
        .map(|t| neurons.iter().map(|n| n.contribution[t]).sum::<f64>() + model.b2[t])
        .collect();
    let output: Vec<f64> = pre_sigmoid.iter().map(|&u| sigmoid(u)).collect();
    let trace = ExecutionTrace { neurons, pre_sigmoid, output: output.clone() };
    Ok((output, trace))
}

/// Gradient of the mean BCE loss over a batch, in the same shapes as the
/// parameters. Exposed so tests can compare against finite differences.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Mean BCE over a batch of (embedded input, labels) pairs.
pub fn batch_loss(model: &MlpModel, embedded: &[Vec<f64>], labels: &[&[u8]]) -> f64 {
    let o = model.dims.outputs;
    let mut total = 0.0;
    for (e, y) in embedded.iter().zip(labels) {
        let p = model.probs_from_embedded(e);
        for t in 0..o {
            total += bce(p[t], y[t] as f64);
        }
    }
    total / (embedded.len() as f64 * o as f64)
}

/// Analytic gradient of [`batch_loss`] with respect to every parameter.
pub fn batch_gradients(model: &MlpModel, embedded: &[Vec<f64>], labels: &[&[u8]]) -> Gradients {
    let n0 = model.embedding.width();
    let n1 = model.dims.hidden;
    let o = model.dims.outputs;
    let mut g = Gradients {
        w1: Matrix::zeros(n1, n0),
        b1: vec![0.0; n1],
        w2: Matrix::zeros(o, n1),
        b2: vec![0.0; o],
    };
    let scale = 1.0 / (embedded.len() as f64 * o as f64);
    let mut z = vec![0.0; n1];
    let mut h = vec![0.0; n1];
    let mut delta_u = vec![0.0; o];
    for (e, y) in embedded.iter().zip(labels) {
        for r in 0..n1 {
            let zr = dot(model.w1.row(r), e) + model.b1[r];
            z[r] = zr;
            h[r] = zr.max(0.0);
        }
        for t in 0..o {
            let u = dot(model.w2.row(t), &h) + model.b2[t];
            delta_u[t] = (sigmoid(u) - y[t] as f64) * scale;
        }
        for t in 0..o {
            let d = delta_u[t];
            g.b2[t] += d;
            let gw2_row = g.w2.row_mut(t);
            for (gw, &hr) in gw2_row.iter_mut().zip(&h) {
                *gw += d * hr;
            }
        }
        for r in 0..n1 {
            if z[r] <= 0.0 {
                continue;
            }
            let mut dh = 0.0;
            for t in 0..o {
                dh += model.w2.get(t, r) * delta_u[t];
            }
            if dh == 0.0 {
                continue;
            }
            g.b1[r] += dh;
            let gw1_row = g.w1.row_mut(r);
            for (gw, &ev) in gw1_row.iter_mut().zip(e) {
                *gw += dh * ev;
            }
        }
    }
    g
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len] }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64, step: u64) {
        let bc1 = 1.0 - ADAM_BETA1.powi(step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Loss and joint misclassification rate over a full dataset.
fn full_metrics(model: &MlpModel, embedded: &[Vec<f64>], dataset: &Dataset) -> (f64, f64) {
    let o = model.dims.outputs;
    let mut loss = 0.0;
    let mut wrong = 0usize;
    for (e, s) in embedded.iter().zip(&dataset.samples) {
        let p = model.probs_from_embedded(e);
        let mut any_wrong = false;
        for t in 0..o {
            loss += bce(p[t], s.labels[t] as f64);
            if (p[t] > 0.5) != (s.labels[t] != 0) {
                any_wrong = true;
            }
        }
        if any_wrong {
            wrong += 1;
        }
    }
    let n = embedded.len().max(1) as f64;
    (loss / (n * o as f64), wrong as f64 / n)
}

/// Train `model` in place with minibatch Adam. Returns the snapshot history;
/// the final state of `model` is the trained network.
pub fn train(model: &mut MlpModel, dataset: &Dataset, config: &TrainConfig) -> Result<TrainHistory> {
    if dataset.num_outputs != model.dims.outputs {
        return Err(Error::Dimension(format!(
            "dataset outputs {} != model outputs {}",
            dataset.num_outputs, model.dims.outputs
        )));
    }
    if dataset.num_vars != model.dims.num_inputs {
        return Err(Error::Dimension(format!(
            "dataset num_vars {} != model num_inputs {}",
            dataset.num_vars, model.dims.num_inputs
        )));
    }
    if config.lr <= 0.0 || config.batch_size == 0 {
        return Err(Error::Argument("lr must be positive and batch_size >= 1".into()));
    }
    let n = dataset.samples.len();
    if n == 0 {
        return Err(Error::Argument("empty training set".into()));
    }

    // The embedding is frozen, so inputs are embedded once up front.
    let embedded: Vec<Vec<f64>> = dataset
        .samples
        .iter()
        .map(|s| model.embedding.embed(&s.input))
        .collect();

    let mut schedule: Vec<f64> = config.snapshot_schedule.clone();
    schedule.sort_by(|a, b| a.partial_cmp(b).unwrap());
    schedule.dedup();
    let mut sched_idx = 0;
    let mut history = TrainHistory {
        points: Vec::new(),
        epochs_run: 0,
        final_loss: f64::NAN,
        final_error: f64::NAN,
        stopped_early: false,
    };
    let snapshot = |model: &MlpModel, at: f64, history: &mut TrainHistory| {
        let (loss, error) = full_metrics(model, &embedded, dataset);
        history.points.push(HistoryPoint { epoch: at, train_loss: loss, train_error: error, model: model.clone() });
    };
    while sched_idx < schedule.len() && schedule[sched_idx] <= 0.0 {
        snapshot(model, schedule[sched_idx], &mut history);
        sched_idx += 1;
    }

    let o = model.dims.outputs;
    let n1 = model.dims.hidden;
    let n0 = model.embedding.width();
    let mut adam_w1 = AdamState::new(n1 * n0);
    let mut adam_b1 = AdamState::new(n1);
    let mut adam_w2 = AdamState::new(o * n1);
    let mut adam_b2 = AdamState::new(o);
    let mut step = 0u64;

    let mut gw1 = vec![0.0; n1 * n0];
    let mut gb1 = vec![0.0; n1];
    let mut gw2 = vec![0.0; o * n1];
    let mut gb2 = vec![0.0; o];
    let mut z = vec![0.0; n1];
    let mut h = vec![0.0; n1];
    let mut delta_u = vec![0.0; o];

    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut shuffle_rng = rng_from(mix(config.seed, 0x5467_FF1E));
    let mut best_loss = f64::INFINITY;
    let mut stale_epochs = 0usize;

    for epoch in 0..config.max_epochs {
        // Fisher-Yates via SliceRandom, seeded once for the whole run.
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut done = 0usize;
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / (batch.len() as f64 * o as f64);
            gw1.iter_mut().for_each(|v| *v = 0.0);
            gb1.iter_mut().for_each(|v| *v = 0.0);
            gw2.iter_mut().for_each(|v| *v = 0.0);
            gb2.iter_mut().for_each(|v| *v = 0.0);
            let mut batch_loss_sum = 0.0;
            for &idx in batch {
                let sample = &dataset.samples[idx as usize];
                let e = &embedded[idx as usize];
                for r in 0..n1 {
                    let zr = dot(model.w1.row(r), e) + model.b1[r];
                    z[r] = zr;
                    h[r] = zr.max(0.0);
                }
                for t in 0..o {
                    let u = dot(model.w2.row(t), &h) + model.b2[t];
                    let p = sigmoid(u);
                    batch_loss_sum += bce(p, sample.labels[t] as f64);
                    delta_u[t] = (p - sample.labels[t] as f64) * scale;
                }
                for t in 0..o {
                    let d = delta_u[t];
                    gb2[t] += d;
                    let row = &mut gw2[t * n1..(t + 1) * n1];
                    for (gw, &hr) in row.iter_mut().zip(&h) {
                        *gw += d * hr;
                    }
                }
                for r in 0..n1 {
                    if z[r] <= 0.0 {
                        continue;
                    }
                    let mut dh = 0.0;
                    for t in 0..o {
                        dh += model.w2.get(t, r) * delta_u[t];
                    }
                    if dh == 0.0 {
                        continue;
                    }
                    gb1[r] += dh;
                    let row = &mut gw1[r * n0..(r + 1) * n0];
                    for (gw, &ev) in row.iter_mut().zip(e) {
                        *gw += dh * ev;
                    }
                }
            }
            if !batch_loss_sum.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}, after {done} samples"
                )));
            }
            epoch_loss += batch_loss_sum / o as f64;
            step += 1;
            adam_w1.update(model.w1.data_mut(), &gw1, config.lr, step);
            adam_b1.update(&mut model.b1, &gb1, config.lr, step);
            adam_w2.update(model.w2.data_mut(), &gw2, config.lr, step);
            if model.dims.use_b2 {
                adam_b2.update(&mut model.b2, &gb2, config.lr, step);
            }
            done += batch.len();
            let frac = epoch as f64 + done as f64 / n as f64;
            while sched_idx < schedule.len() && schedule[sched_idx] <= frac {
                snapshot(model, schedule[sched_idx], &mut history);
                sched_idx += 1;
            }
        }
        history.epochs_run = epoch + 1;
        let mean_loss = epoch_loss / n as f64;
        if mean_loss < best_loss {
            best_loss = mean_loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if config.patience > 0 && stale_epochs >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    let (loss, error) = full_metrics(model, &embedded, dataset);
    history.final_loss = loss;
    history.final_error = error;
    history.points.push(HistoryPoint {
        epoch: history.epochs_run as f64,
        train_loss: loss,
        train_error: error,
        model: model.clone(),
    });
    Ok(history)
}

/// Per-output and all-outputs-correct error rates at a decision threshold.
pub fn test_error(model: &MlpModel, dataset: &Dataset, threshold: f64) -> Result<TestError> {
    let o = model.dims.outputs;
    if dataset.num_outputs != o {
        return Err(Error::Dimension("dataset/model output mismatch".into()));
    }
    let mut wrong = vec![0usize; o];
    let mut joint_wrong = 0usize;
    for s in &dataset.samples {
        let p = model.predict(&s.input)?;
        let mut any = false;
        for t in 0..o {
            if (p[t] > threshold) != (s.labels[t] != 0) {
                wrong[t] += 1;
                any = true;
            }
        }
        if any {
            joint_wrong += 1;
        }
    }
    let n = dataset.samples.len().max(1) as f64;
    Ok(TestError {
        per_output: wrong.iter().map(|&w| w as f64 / n).collect(),
        joint: joint_wrong as f64 / n,
    })
}
