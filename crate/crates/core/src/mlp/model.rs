use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::layer::{Activation, BatchNormState, DenseLayer};
use super::loss::{sigmoid, PROB_EPSILON};
use super::MlpError;

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and dropout masks.
    Train,
    /// Running statistics, no dropout; the generator is not touched.
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Benign,
    Malicious,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Benign => "benign",
            Verdict::Malicious => "malicious",
        }
    }
}

/// Architecture and regularization settings for a fresh model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_width: usize,
    pub hidden_widths: Vec<usize>,
    pub dropout_rate: f64,
    pub batch_norm: bool,
    pub threshold: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_width: crate::features::FEATURE_COUNT,
            hidden_widths: vec![72, 72],
            dropout_rate: 0.15,
            batch_norm: true,
            threshold: 0.62,
            bn_momentum: 0.1,
            bn_epsilon: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub threshold: f64,
    /// Changes whenever trainable parameters change; ties caches to the
    /// parameters they were computed with.
    stamp: u64,
}

impl PartialEq for MlpModel {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.threshold == other.threshold
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    /// Normalized `z` (batch-norm layers only).
    xhat: Option<Array2<f64>>,
    inv_std: Option<Array1<f64>>,
    batch_mean: Option<Array1<f64>>,
    batch_var: Option<Array1<f64>>,
    /// Input to the activation function.
    pre_activation: Array2<f64>,
    /// Activation output before dropout.
    activation: Array2<f64>,
    /// Inverted-dropout multipliers: 0 or 1/(1 − rate).
    mask: Option<Array2<f64>>,
}

/// Intermediate values of one forward pass, consumed by
/// [`MlpModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    stamp: u64,
    layers: Vec<LayerCache>,
    probabilities: Array1<f64>,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &Array1<f64> {
        &self.probabilities
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Activation-function input of layer `i` (after batch-norm).
    pub fn pre_activation(&self, i: usize) -> Option<&Array2<f64>> {
        self.layers.get(i).map(|l| &l.pre_activation)
    }

    /// Output of layer `i` before dropout.
    pub fn activation(&self, i: usize) -> Option<&Array2<f64>> {
        self.layers.get(i).map(|l| &l.activation)
    }

    pub fn dropout_mask(&self, i: usize) -> Option<&Array2<f64>> {
        self.layers.get(i).and_then(|l| l.mask.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub gamma: Option<Array1<f64>>,
    pub beta: Option<Array1<f64>>,
}

/// Gradients of the mean batch loss, shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    /// Flattened in [`MlpModel::flat_params`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter());
            out.extend(g.biases.iter());
            if let (Some(gamma), Some(beta)) = (&g.gamma, &g.beta) {
                out.extend(gamma.iter());
                out.extend(beta.iter());
            }
        }
        out
    }
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, γ = 1, β = 0.
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self, MlpError> {
        let mut widths = vec![config.input_width];
        widths.extend(&config.hidden_widths);
        widths.push(1);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (i, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let hidden = i + 2 < widths.len();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..=limit));
            layers.push(DenseLayer {
                weights,
                biases: Array1::zeros(fan_out),
                activation: if hidden { Activation::Relu } else { Activation::Sigmoid },
                batch_norm: (hidden && config.batch_norm)
                    .then(|| BatchNormState::new(fan_out, config.bn_momentum, config.bn_epsilon)),
                dropout_rate: if hidden { config.dropout_rate } else { 0.0 },
            });
        }
        Self::from_layers(layers, config.threshold)
    }

    /// Validates a layer stack: widths chain, the last layer is a single
    /// sigmoid unit without batch-norm or dropout, hidden layers are ReLU.
    pub fn from_layers(layers: Vec<DenseLayer>, threshold: f64) -> Result<Self, MlpError> {
        let invalid = |m: String| Err::<Self, _>(MlpError::InvalidModel(m));
        let Some(last) = layers.last() else {
            return invalid("no layers".into());
        };
        if !(threshold > 0.0 && threshold < 1.0) {
            return invalid(format!("threshold {threshold} outside (0, 1)"));
        }
        if last.output_width() != 1 || last.activation != Activation::Sigmoid {
            return invalid("output layer must be a single sigmoid unit".into());
        }
        if last.batch_norm.is_some() || last.dropout_rate != 0.0 {
            return invalid("output layer takes no batch-norm or dropout".into());
        }
        for (i, layer) in layers.iter().enumerate() {
            layer
                .validate()
                .map_err(|m| MlpError::InvalidModel(format!("layer {i}: {m}")))?;
            if i + 1 < layers.len() {
                if layer.activation != Activation::Relu {
                    return invalid(format!("layer {i}: hidden layers use ReLU"));
                }
                if layers[i + 1].input_width() != layer.output_width() {
                    return invalid(format!(
                        "layer {} expects {} inputs but layer {i} has {} units",
                        i + 1,
                        layers[i + 1].input_width(),
                        layer.output_width()
                    ));
                }
            }
        }
        Ok(Self {
            layers,
            threshold,
            stamp: fresh_stamp(),
        })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    /// Unit counts from input to output, e.g. `[48, 72, 72, 1]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(DenseLayer::output_width))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::parameter_count).sum()
    }

    /// Weights (row-major), biases, then γ and β for each layer in turn.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
            if let Some(bn) = &l.batch_norm {
                out.extend(bn.gamma.iter());
                out.extend(bn.beta.iter());
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<(), MlpError> {
        if params.len() != self.parameter_count() {
            return Err(MlpError::DimensionMismatch {
                expected: self.parameter_count(),
                found: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|p| *p = it.next().unwrap());
            l.biases.iter_mut().for_each(|p| *p = it.next().unwrap());
            if let Some(bn) = &mut l.batch_norm {
                bn.gamma.iter_mut().for_each(|p| *p = it.next().unwrap());
                bn.beta.iter_mut().for_each(|p| *p = it.next().unwrap());
            }
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    /// Runs the network on `batch` (one sample per row). Never mutates the
    /// model; running statistics are folded in separately by
    /// [`MlpModel::update_running_stats`].
    pub fn forward<R: Rng + ?Sized>(
        &self,
        batch: ArrayView2<f64>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardCache, MlpError> {
        self.run(batch, mode, Some(rng))
    }

    fn run<R: Rng + ?Sized>(
        &self,
        batch: ArrayView2<f64>,
        mode: Mode,
        mut rng: Option<&mut R>,
    ) -> Result<ForwardCache, MlpError> {
        if batch.ncols() != self.input_width() {
            return Err(MlpError::DimensionMismatch {
                expected: self.input_width(),
                found: batch.ncols(),
            });
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut input = batch.to_owned();
        for layer in &self.layers {
            let z = input.dot(&layer.weights.t()) + &layer.biases;
            let (pre_activation, xhat, inv_std, batch_mean, batch_var) = match &layer.batch_norm {
                None => (z.clone(), None, None, None, None),
                Some(bn) => {
                    let (mean, var) = match mode {
                        Mode::Train => batch_moments(&z),
                        Mode::Infer => (bn.running_mean.clone(), bn.running_var.clone()),
                    };
                    let inv_std = var.mapv(|v| 1.0 / (v + bn.epsilon).sqrt());
                    let xhat = (&z - &mean) * &inv_std;
                    let y = &xhat * &bn.gamma + &bn.beta;
                    (y, Some(xhat), Some(inv_std), Some(mean), Some(var))
                }
            };
            let activation = match layer.activation {
                Activation::Relu => pre_activation.mapv(|v| v.max(0.0)),
                Activation::Sigmoid => pre_activation
                    .mapv(|v| sigmoid(v).clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)),
            };
            let mask = (mode == Mode::Train && layer.dropout_rate > 0.0).then(|| {
                let rng = rng.as_deref_mut().expect("train mode has a generator");
                let keep = 1.0 / (1.0 - layer.dropout_rate);
                Array2::from_shape_simple_fn(activation.raw_dim(), || {
                    if rng.random::<f64>() < layer.dropout_rate {
                        0.0
                    } else {
                        keep
                    }
                })
            });
            let output = match &mask {
                Some(m) => &activation * m,
                None => activation.clone(),
            };
            caches.push(LayerCache {
                input,
                xhat,
                inv_std,
                batch_mean,
                batch_var,
                pre_activation,
                activation,
                mask,
            });
            input = output;
        }
        let probabilities = input.column(0).to_owned();
        Ok(ForwardCache {
            mode,
            stamp: self.stamp,
            layers: caches,
            probabilities,
        })
    }

    /// Infer-mode probabilities for every row.
    pub fn predict_proba(&self, batch: ArrayView2<f64>) -> Result<Array1<f64>, MlpError> {
        Ok(self
            .run::<rand_chacha::ChaCha8Rng>(batch, Mode::Infer, None)?
            .probabilities)
    }

    /// Probability and verdict for one normalized feature vector;
    /// malicious iff probability ≥ threshold.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, Verdict), MlpError> {
        let row = ArrayView2::from_shape((1, x.len()), x).expect("one row");
        let p = self.predict_proba(row)?[0];
        Ok((p, self.verdict(p)))
    }

    pub fn verdict(&self, probability: f64) -> Verdict {
        if probability >= self.threshold {
            Verdict::Malicious
        } else {
            Verdict::Benign
        }
    }

    /// Folds the batch statistics of a train-mode pass into the running
    /// statistics: `running ← (1 − m)·running + m·batch`.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) -> Result<(), MlpError> {
        self.check_cache(cache, None)?;
        for (layer, lc) in self.layers.iter_mut().zip(&cache.layers) {
            if let (Some(bn), Some(mean), Some(var)) = (&mut layer.batch_norm, &lc.batch_mean, &lc.batch_var) {
                let m = bn.momentum;
                bn.running_mean = &bn.running_mean * (1.0 - m) + mean * m;
                bn.running_var = &bn.running_var * (1.0 - m) + var * m;
            }
        }
        Ok(())
    }

    fn check_cache(&self, cache: &ForwardCache, rows: Option<usize>) -> Result<(), MlpError> {
        if cache.mode != Mode::Train {
            return Err(MlpError::StaleCache("cache is from an infer-mode pass".into()));
        }
        if cache.stamp != self.stamp || cache.layers.len() != self.layers.len() {
            return Err(MlpError::StaleCache("parameters changed since the forward pass".into()));
        }
        if let Some(n) = rows {
            if n != cache.probabilities.len() {
                return Err(MlpError::StaleCache(format!(
                    "{n} labels for a batch of {}",
                    cache.probabilities.len()
                )));
            }
        }
        Ok(())
    }

    /// Exact gradients of the mean cross-entropy over the cached batch.
    pub fn backward(&self, cache: &ForwardCache, labels: &[f64]) -> Result<Gradients, MlpError> {
        self.check_cache(cache, Some(labels.len()))?;
        let n = labels.len() as f64;
        let y = Array1::from(labels.to_vec());
        // d(mean loss)/dz at the sigmoid output.
        let mut upstream: Array2<f64> = ((&cache.probabilities - &y) / n).insert_axis(Axis(1));
        let mut grads = Vec::with_capacity(self.layers.len());
        for (idx, (layer, lc)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let d_pre = if idx + 1 == self.layers.len() {
                upstream
            } else {
                let d_act = match &lc.mask {
                    Some(m) => &upstream * m,
                    None => upstream,
                };
                let relu_gate = lc.pre_activation.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                d_act * relu_gate
            };
            let (d_z, d_gamma, d_beta) = match (&layer.batch_norm, &lc.xhat, &lc.inv_std) {
                (Some(bn), Some(xhat), Some(inv_std)) => {
                    let d_gamma = (&d_pre * xhat).sum_axis(Axis(0));
                    let d_beta = d_pre.sum_axis(Axis(0));
                    let d_xhat = &d_pre * &bn.gamma;
                    let sum_d = d_xhat.sum_axis(Axis(0));
                    let sum_dx = (&d_xhat * xhat).sum_axis(Axis(0));
                    let d_z = (&d_xhat * n - &sum_d - xhat * &sum_dx) * &(inv_std / n);
                    (d_z, Some(d_gamma), Some(d_beta))
                }
                _ => (d_pre, None, None),
            };
            grads.push(LayerGradients {
                weights: d_z.t().dot(&lc.input),
                biases: d_z.sum_axis(Axis(0)),
                gamma: d_gamma,
                beta: d_beta,
            });
            upstream = d_z.dot(&layer.weights);
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// `p ← p − η·∂L/∂p` for every trainable parameter. η = 0 leaves the
    /// model untouched.
    pub fn sgd_step(&mut self, grads: &Gradients, eta: f64) -> Result<(), MlpError> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(MlpError::InvalidLearningRate(eta));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(MlpError::InvalidModel("gradient layer count mismatch".into()));
        }
        for (l, g) in self.layers.iter().zip(&grads.layers) {
            let bn_ok = match (&l.batch_norm, &g.gamma, &g.beta) {
                (Some(bn), Some(gg), Some(gb)) => gg.len() == bn.gamma.len() && gb.len() == bn.beta.len(),
                (None, None, None) => true,
                _ => false,
            };
            if g.weights.dim() != l.weights.dim() || g.biases.len() != l.biases.len() || !bn_ok {
                return Err(MlpError::InvalidModel("gradient shapes do not match the model".into()));
            }
        }
        if eta == 0.0 {
            return Ok(());
        }
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.scaled_add(-eta, &g.weights);
            l.biases.scaled_add(-eta, &g.biases);
            if let (Some(bn), Some(gg), Some(gb)) = (&mut l.batch_norm, &g.gamma, &g.beta) {
                bn.gamma.scaled_add(-eta, gg);
                bn.beta.scaled_add(-eta, gb);
            }
        }
        self.stamp = fresh_stamp();
        Ok(())
    }
}

/// Per-column mean and population variance.
fn batch_moments(z: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let n = z.nrows() as f64;
    let mean = z.sum_axis(Axis(0)) / n;
    let var = (z - &mean).mapv(|v| v * v).sum_axis(Axis(0)) / n;
    (mean, var)
}
