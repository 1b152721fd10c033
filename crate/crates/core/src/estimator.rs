//! Contact estimator: an 8 -> 12 -> 64 -> 64 -> 5 ReLU perceptron mapping the
//! pressure channels to `[fx, fy, fz, theta, phi]`, trained with Adam on the
//! mean squared error of all five outputs.
//!
//! Parameters live in one flat vector, layer by layer, each layer storing its
//! weights row-major (`out x in`) followed by its biases. Inputs are
//! standardized per channel with statistics from the training split, stored
//! alongside the weights.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::sensor::{LabeledDataset, Record, Split, CHANNELS};

pub const INPUTS: usize = CHANNELS;
pub const OUTPUTS: usize = 5;
pub const DIMS: [usize; 5] = [INPUTS, 12, 64, 64, OUTPUTS];

pub const MODEL_MAGIC: &str = "tipsense-mlp";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("the {0:?} split is empty")]
    EmptySplit(Split),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("unsupported model file: magic {magic:?}, version {version}")]
    Version { magic: String, version: u32 },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("model file parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid training configuration: {0}")]
    Config(String),
}

/// Per-channel standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: [f64; INPUTS],
    pub std: [f64; INPUTS],
}

impl Default for InputNorm {
    fn default() -> Self {
        Self { mean: [0.0; INPUTS], std: [1.0; INPUTS] }
    }
}

impl InputNorm {
    pub fn fit<'a>(inputs: impl Iterator<Item = &'a [f64; INPUTS]>) -> Self {
        let mut n = 0usize;
        let mut sum = [0.0; INPUTS];
        let mut sq = [0.0; INPUTS];
        for x in inputs {
            n += 1;
            for i in 0..INPUTS {
                sum[i] += x[i];
                sq[i] += x[i] * x[i];
            }
        }
        if n == 0 {
            return Self::default();
        }
        let mut norm = Self::default();
        for i in 0..INPUTS {
            let mean = sum[i] / n as f64;
            let var = (sq[i] / n as f64 - mean * mean).max(0.0);
            norm.mean[i] = mean;
            norm.std[i] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        norm
    }

    pub fn apply(&self, x: &[f64; INPUTS]) -> [f64; INPUTS] {
        let mut out = [0.0; INPUTS];
        for i in 0..INPUTS {
            out[i] = (x[i] - self.mean[i]) / self.std[i];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    params: Vec<f64>,
    pub norm: InputNorm,
}

fn layer_offsets() -> [(usize, usize, usize); 4] {
    // (weights offset, bias offset, end) per layer
    let mut out = [(0, 0, 0); 4];
    let mut offset = 0;
    for l in 0..4 {
        let (fan_in, fan_out) = (DIMS[l], DIMS[l + 1]);
        let w = offset;
        let b = w + fan_in * fan_out;
        offset = b + fan_out;
        out[l] = (w, b, offset);
    }
    out
}

pub fn parameter_count() -> usize {
    layer_offsets()[3].2
}

/// Activations kept for the backward pass.
struct Tape {
    /// Layer inputs, `acts[0]` being the standardized input.
    acts: [Vec<f64>; 4],
    output: [f64; OUTPUTS],
}

impl MlpModel {
    pub fn zeros() -> Self {
        Self { params: vec![0.0; parameter_count()], norm: InputNorm::default() }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut model = Self::zeros();
        for (l, (w, b, _)) in layer_offsets().into_iter().enumerate() {
            let limit = (6.0 / (DIMS[l] + DIMS[l + 1]) as f64).sqrt();
            for p in &mut model.params[w..b] {
                *p = rng.random_range(-limit..limit);
            }
        }
        model
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Row-major weights of layer `l` (shape `DIMS[l+1] x DIMS[l]`).
    pub fn weights(&self, l: usize) -> &[f64] {
        let (w, b, _) = layer_offsets()[l];
        &self.params[w..b]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let (_, b, e) = layer_offsets()[l];
        &self.params[b..e]
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn run(&self, x: &[f64; INPUTS]) -> Tape {
        let mut acts: [Vec<f64>; 4] = Default::default();
        acts[0] = self.norm.apply(x).to_vec();
        let mut output = [0.0; OUTPUTS];
        for (l, (w, b, _)) in layer_offsets().into_iter().enumerate() {
            let (fan_in, fan_out) = (DIMS[l], DIMS[l + 1]);
            let input = &acts[l];
            let mut z = vec![0.0; fan_out];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &self.params[w + o * fan_in..w + (o + 1) * fan_in];
                let mut acc = self.params[b + o];
                for (wi, xi) in row.iter().zip(input) {
                    acc += wi * xi;
                }
                *zo = acc;
            }
            if l < 3 {
                for v in &mut z {
                    *v = v.max(0.0);
                }
                acts[l + 1] = z;
            } else {
                output.copy_from_slice(&z);
            }
        }
        Tape { acts, output }
    }

    /// `[fx, fy, fz, theta, phi]` for one pressure sample.
    pub fn forward(&self, x: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        self.run(x).output
    }

    /// Mean squared error over the batch and all outputs, with its exact gradient.
    pub fn loss_and_gradient(&self, batch: &[([f64; INPUTS], [f64; OUTPUTS])]) -> Result<(f64, Vec<f64>), EstimatorError> {
        if batch.is_empty() {
            return Err(EstimatorError::EmptyBatch);
        }
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / (batch.len() * OUTPUTS) as f64;
        let mut loss = 0.0;
        let offsets = layer_offsets();
        for (x, target) in batch {
            let tape = self.run(x);
            let mut delta: Vec<f64> = (0..OUTPUTS)
                .map(|o| {
                    let e = tape.output[o] - target[o];
                    loss += e * e;
                    2.0 * e * scale
                })
                .collect();
            for l in (0..4).rev() {
                let (w, b, _) = offsets[l];
                let fan_in = DIMS[l];
                let input = &tape.acts[l];
                for (o, d) in delta.iter().enumerate() {
                    grad[b + o] += d;
                    let row = &mut grad[w + o * fan_in..w + (o + 1) * fan_in];
                    for (g, xi) in row.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
                if l == 0 {
                    break;
                }
                let mut prev = vec![0.0; fan_in];
                for (o, d) in delta.iter().enumerate() {
                    let row = &self.params[w + o * fan_in..w + (o + 1) * fan_in];
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += wi * d;
                    }
                }
                // ReLU derivative: the stored activation is zero exactly where the unit is off.
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss * scale, grad))
    }

    pub fn loss(&self, batch: &[([f64; INPUTS], [f64; OUTPUTS])]) -> f64 {
        let mut acc = 0.0;
        for (x, t) in batch {
            let y = self.forward(x);
            for o in 0..OUTPUTS {
                acc += (y[o] - t[o]).powi(2);
            }
        }
        acc / (batch.len() * OUTPUTS) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, n: usize) -> Self {
        Self { config, m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 10, seed: 0, adam: AdamConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub split: Split,
    pub count: usize,
    /// Pooled over fx, fy, fz (N).
    pub force_rmse: f64,
    /// Pooled over theta, phi (rad).
    pub angle_rmse: f64,
    pub per_output: [f64; OUTPUTS],
}

/// Loss and test errors after each epoch; entry 0 is the untrained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_force_rmse: f64,
    pub test_angle_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub train: RmseReport,
    pub test: RmseReport,
    pub history: Vec<EpochStats>,
}

fn pairs<'a>(records: impl Iterator<Item = &'a Record>) -> Vec<([f64; INPUTS], [f64; OUTPUTS])> {
    records.map(|r| (r.sample.s, r.state.to_target())).collect()
}

/// RMSE of `model` on the records of one split.
pub fn evaluate(model: &MlpModel, dataset: &LabeledDataset, split: Split) -> Result<RmseReport, EstimatorError> {
    let data = pairs(dataset.split(split));
    evaluate_pairs(model, &data, split)
}

pub fn evaluate_pairs(
    model: &MlpModel,
    data: &[([f64; INPUTS], [f64; OUTPUTS])],
    split: Split,
) -> Result<RmseReport, EstimatorError> {
    if data.is_empty() {
        return Err(EstimatorError::EmptySplit(split));
    }
    let mut sq = [0.0; OUTPUTS];
    for (x, t) in data {
        let y = model.forward(x);
        for o in 0..OUTPUTS {
            sq[o] += (y[o] - t[o]).powi(2);
        }
    }
    let n = data.len() as f64;
    Ok(RmseReport {
        split,
        count: data.len(),
        force_rmse: ((sq[0] + sq[1] + sq[2]) / (3.0 * n)).sqrt(),
        angle_rmse: ((sq[3] + sq[4]) / (2.0 * n)).sqrt(),
        per_output: sq.map(|s| (s / n).sqrt()),
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Train from scratch on the train split and report on both splits.
pub fn train(dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainOutcome, EstimatorError> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(EstimatorError::Config("epochs and batch size must be positive".into()));
    }
    let train_set = pairs(dataset.split(Split::Train));
    let test_set = pairs(dataset.split(Split::Test));
    if train_set.is_empty() {
        return Err(EstimatorError::EmptySplit(Split::Train));
    }
    if test_set.is_empty() {
        return Err(EstimatorError::EmptySplit(Split::Test));
    }

    let mut model = MlpModel::init(&mut stream_rng(cfg.seed, 0));
    model.norm = InputNorm::fit(train_set.iter().map(|(x, _)| x));
    let mut adam = AdamState::new(cfg.adam, parameter_count());
    let mut shuffle_rng = stream_rng(cfg.seed, 1);

    let snapshot = |model: &MlpModel, epoch| -> Result<EpochStats, EstimatorError> {
        let test = evaluate_pairs(model, &test_set, Split::Test)?;
        Ok(EpochStats {
            epoch,
            train_loss: model.loss(&train_set),
            test_force_rmse: test.force_rmse,
            test_angle_rmse: test.angle_rmse,
        })
    };
    let mut history = vec![snapshot(&model, 0)?];

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i]));
            let (_, grad) = model.loss_and_gradient(&batch)?;
            adam.update(&mut model.params, &grad);
        }
        history.push(snapshot(&model, epoch)?);
    }

    Ok(TrainOutcome {
        train: evaluate_pairs(&model, &train_set, Split::Train)?,
        test: evaluate_pairs(&model, &test_set, Split::Test)?,
        model,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    /// Row-major, `out x in`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub magic: String,
    pub format_version: u32,
    pub dims: Vec<usize>,
    pub layers: Vec<LayerFile>,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    #[serde(default)]
    pub training: serde_json::Value,
}

impl ModelFile {
    pub fn from_model(model: &MlpModel, training: serde_json::Value) -> Self {
        Self {
            magic: MODEL_MAGIC.into(),
            format_version: MODEL_FORMAT_VERSION,
            dims: DIMS.to_vec(),
            layers: (0..4)
                .map(|l| LayerFile { weights: model.weights(l).to_vec(), biases: model.biases(l).to_vec() })
                .collect(),
            input_mean: model.norm.mean.to_vec(),
            input_std: model.norm.std.to_vec(),
            training,
        }
    }

    pub fn into_model(self) -> Result<MlpModel, EstimatorError> {
        if self.magic != MODEL_MAGIC || self.format_version != MODEL_FORMAT_VERSION {
            return Err(EstimatorError::Version { magic: self.magic, version: self.format_version });
        }
        if self.dims != DIMS {
            return Err(EstimatorError::Dimensions(format!("expected dims {:?}, found {:?}", DIMS, self.dims)));
        }
        if self.layers.len() != 4 {
            return Err(EstimatorError::Dimensions(format!("expected 4 layers, found {}", self.layers.len())));
        }
        let mut params = Vec::with_capacity(parameter_count());
        for (l, layer) in self.layers.iter().enumerate() {
            let (fan_in, fan_out) = (DIMS[l], DIMS[l + 1]);
            if layer.weights.len() != fan_in * fan_out || layer.biases.len() != fan_out {
                return Err(EstimatorError::Dimensions(format!(
                    "layer {l}: {} weights / {} biases for a {fan_out}x{fan_in} layer",
                    layer.weights.len(),
                    layer.biases.len()
                )));
            }
            params.extend_from_slice(&layer.weights);
            params.extend_from_slice(&layer.biases);
        }
        let norm_vec = |v: &Vec<f64>, name: &str| -> Result<[f64; INPUTS], EstimatorError> {
            v.as_slice()
                .try_into()
                .map_err(|_| EstimatorError::Dimensions(format!("{name} has {} entries, expected {INPUTS}", v.len())))
        };
        let norm = InputNorm { mean: norm_vec(&self.input_mean, "input_mean")?, std: norm_vec(&self.input_std, "input_std")? };
        Ok(MlpModel { params, norm })
    }
}

pub fn save_model(model: &MlpModel, training: serde_json::Value, path: &Path) -> Result<(), EstimatorError> {
    let json = serde_json::to_string_pretty(&ModelFile::from_model(model, training))?;
    fs::write(path, json)?;
    Ok(())
}

/// Load a model file; nothing is returned unless the whole file checks out.
pub fn load_model(path: &Path) -> Result<MlpModel, EstimatorError> {
    let text = fs::read_to_string(path)?;
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<MlpModel, EstimatorError> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<([f64; INPUTS], [f64; OUTPUTS])> {
        (0..n)
            .map(|_| {
                let x = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let t = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
                (x, t)
            })
            .collect()
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = MlpModel::zeros();
        assert_eq!(m.forward(&[0.3; INPUTS]), [0.0; OUTPUTS]);
        assert_eq!(parameter_count(), 8 * 12 + 12 + 12 * 64 + 64 + 64 * 64 + 64 + 64 * 5 + 5);
    }

    #[test]
    fn single_path_routes_an_input() {
        // Route channel 3 through unit 0 of every hidden layer to output 2.
        let mut m = MlpModel::zeros();
        let offsets = layer_offsets();
        m.params[offsets[0].0 + 3] = 1.0;
        m.params[offsets[1].0] = 1.0;
        m.params[offsets[2].0] = 1.0;
        m.params[offsets[3].0 + 2 * 64] = 1.0;
        let mut x = [0.0; INPUTS];
        x[3] = 0.75;
        let y = m.forward(&x);
        assert_eq!(y, [0.0, 0.0, 0.75, 0.0, 0.0]);
        x[3] = -0.75;
        assert_eq!(m.forward(&x), [0.0; OUTPUTS]);
    }

    #[test]
    fn perfect_targets_have_zero_loss_and_gradient() {
        let mut rng = stream_rng(5, 0);
        let m = MlpModel::init(&mut rng);
        let batch: Vec<_> = random_batch(&mut rng, 6).into_iter().map(|(x, _)| (x, m.forward(&x))).collect();
        let (loss, grad) = m.loss_and_gradient(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn duplicated_batch_is_equivalent() {
        let mut rng = stream_rng(9, 0);
        let m = MlpModel::init(&mut rng);
        let batch = random_batch(&mut rng, 5);
        let tripled: Vec<_> = batch.iter().chain(&batch).chain(&batch).copied().collect();
        let (l1, g1) = m.loss_and_gradient(&batch).unwrap();
        let (l3, g3) = m.loss_and_gradient(&tripled).unwrap();
        assert!((l1 - l3).abs() <= 1e-12 * l1.abs());
        for (a, b) in g1.iter().zip(&g3) {
            assert!((a - b).abs() <= 1e-12 * (a.abs() + 1e-12));
        }
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(matches!(MlpModel::zeros().loss_and_gradient(&[]), Err(EstimatorError::EmptyBatch)));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = AdamState::new(AdamConfig::default(), 2);
        let mut p = [1.0, -1.0];
        adam.update(&mut p, &[0.5, -3.0]);
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((p[1] - (-1.0 + 1e-3)).abs() < 1e-9);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn model_file_errors() {
        let m = MlpModel::init(&mut stream_rng(1, 0));
        let good = serde_json::to_string(&ModelFile::from_model(&m, serde_json::Value::Null)).unwrap();
        assert_eq!(parse_model(&good).unwrap(), m);

        let bad_version = good.replace("\"format_version\":1", "\"format_version\":99");
        assert!(matches!(parse_model(&bad_version), Err(EstimatorError::Version { version: 99, .. })));
        let bad_magic = good.replace(MODEL_MAGIC, "something-else");
        assert!(matches!(parse_model(&bad_magic), Err(EstimatorError::Version { .. })));
        let bad_dims = good.replace("\"dims\":[8,12,64,64,5]", "\"dims\":[8,12,64,64,6]");
        assert!(matches!(parse_model(&bad_dims), Err(EstimatorError::Dimensions(_))));
        let truncated = &good[..good.len() / 2];
        assert!(matches!(parse_model(truncated), Err(EstimatorError::Parse(_))));
    }
}
