//! Mini-batch SGD over epochs with best-validation-loss model selection.

use std::io::Write;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mlp::{mean_cross_entropy, MlpError, MlpModel, Mode, ModelConfig};
use crate::model_store::{sha256_hex, ModelFile, TrainingFingerprint};
use crate::preprocess::{fit_scaler, split_train_validation, Dataset, PreprocessError, Scaler};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training performed: epochs must be at least 1")]
    NoEpochs,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training set must contain both classes (found only label {0})")]
    SingleClass(u8),
    #[error("training set is empty")]
    Empty,
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("scaler mismatch: {0}")]
    ScalerMismatch(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub eta: f64,
    pub dropout_rate: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Stop once validation loss falls below this value.
    pub early_stop_loss: Option<f64>,
    pub hidden_widths: Vec<usize>,
    pub batch_norm: bool,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            batch_size: 64,
            eta: 0.01,
            dropout_rate: 0.15,
            validation_fraction: 0.2,
            seed: 0,
            early_stop_loss: None,
            hidden_widths: vec![72, 72],
            batch_norm: true,
            threshold: 0.62,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self, input_width: usize) -> ModelConfig {
        ModelConfig {
            input_width,
            hidden_widths: self.hidden_widths.clone(),
            dropout_rate: self.dropout_rate,
            batch_norm: self.batch_norm,
            threshold: self.threshold,
            ..ModelConfig::default()
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.eta));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!("validation fraction {} outside (0, 1)", self.validation_fraction));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} outside (0, 1)", self.threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_tpr: f64,
    pub val_fpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; 0 means the starting model
    /// (only possible when resuming).
    pub selected_epoch: usize,
    pub final_model_checksum: String,
}

impl TrainReport {
    pub fn selected(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.selected_epoch)
    }

    /// `epoch,train_loss,val_loss,val_tpr,val_fpr`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_loss", "val_tpr", "val_fpr"])?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                format!("{:.9}", r.train_loss),
                format!("{:.9}", r.val_loss),
                format!("{:.6}", r.val_tpr),
                format!("{:.6}", r.val_fpr),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub scaler: Scaler,
    pub report: TrainReport,
}

impl TrainOutcome {
    /// Bundles the result with its provenance for persistence.
    pub fn into_model_file(self, config: &TrainConfig, data: &Dataset) -> ModelFile {
        let fingerprint = TrainingFingerprint {
            seed: config.seed,
            epochs: config.epochs as u64,
            eta: config.eta,
            data_checksum: dataset_checksum(data),
        };
        ModelFile::new(self.model, self.scaler, fingerprint)
    }
}

/// SHA-256 over labels and feature bits, row by row.
pub fn dataset_checksum(d: &Dataset) -> String {
    let mut bytes = Vec::with_capacity(d.features.len() * 8 + d.len());
    for (row, &label) in d.features.rows().into_iter().zip(&d.labels) {
        bytes.push(label);
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    sha256_hex(&bytes)
}

/// Independent seeds for each stage, all derived from the config seed.
struct Seeds {
    split: u64,
    init: u64,
    epochs: u64,
}

impl Seeds {
    fn new(seed: u64) -> Self {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        Self {
            split: master.random(),
            init: master.random(),
            epochs: master.random(),
        }
    }

    /// Generator for one epoch's shuffle and dropout masks. Resumed runs
    /// use a separate domain so they never replay the original stream.
    fn epoch_rng(&self, domain: u64, epoch: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.epochs ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(epoch as u64);
        rng
    }
}

const TRAIN_DOMAIN: u64 = 0;
const RESUME_DOMAIN: u64 = 1;

struct Prepared {
    train_x: Array2<f64>,
    train_y: Vec<f64>,
    val_x: Array2<f64>,
    val_y: Vec<f64>,
}

fn check_classes(d: &Dataset) -> Result<(), TrainError> {
    match d.class_counts() {
        [0, 0] => Err(TrainError::Empty),
        [0, _] => Err(TrainError::SingleClass(1)),
        [_, 0] => Err(TrainError::SingleClass(0)),
        _ => Ok(()),
    }
}

fn labels_f64(d: &Dataset) -> Vec<f64> {
    d.labels.iter().map(|&l| f64::from(l)).collect()
}

/// Row indices for one epoch: a fresh permutation of `0..n` cut into
/// batches of `batch_size`, the last one possibly shorter.
pub fn epoch_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// The (training, validation) partition that [`train`] and [`resume`]
/// use for this seed.
pub fn validation_split(data: &Dataset, config: &TrainConfig) -> Result<(Dataset, Dataset), TrainError> {
    let seeds = Seeds::new(config.seed);
    Ok(split_train_validation(data, config.validation_fraction, seeds.split)?)
}

/// Splits off validation rows, fits the scaler on the training part only
/// and trains a fresh model.
pub fn train(data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    if config.epochs == 0 {
        return Err(TrainError::NoEpochs);
    }
    config.validate()?;
    check_classes(data)?;
    let seeds = Seeds::new(config.seed);
    let (train_part, val_part) = split_train_validation(data, config.validation_fraction, seeds.split)?;
    let scaler = fit_scaler(&train_part)?;
    let prepared = Prepared {
        train_x: scaler.transform_dataset(&train_part)?,
        train_y: labels_f64(&train_part),
        val_x: scaler.transform_dataset(&val_part)?,
        val_y: labels_f64(&val_part),
    };
    let mut init_rng = ChaCha8Rng::seed_from_u64(seeds.init);
    let model = MlpModel::new(&config.model_config(data.width()), &mut init_rng)?;
    let (model, report) = run_epochs(model, &scaler, &prepared, config, &seeds, TRAIN_DOMAIN, None)?;
    Ok(TrainOutcome { model, scaler, report })
}

/// Continues SGD from `model` with its existing scaler. The validation
/// split is the same as for [`train`] with the same seed, but shuffles
/// and dropout masks come from a separate stream, so `train(e1)` followed
/// by `resume(e2)` is deterministic yet differs from `train(e1 + e2)`.
/// The starting model competes as epoch 0 in model selection, so
/// `epochs = 0` returns it unchanged.
pub fn resume(
    model: &MlpModel,
    scaler: &Scaler,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainReport), TrainError> {
    config.validate()?;
    if data.width() != scaler.width() || model.input_width() != scaler.width() {
        return Err(TrainError::ScalerMismatch(format!(
            "dataset has {} features, scaler {}, model {}",
            data.width(),
            scaler.width(),
            model.input_width()
        )));
    }
    if data.schema_id != scaler.schema_id {
        return Err(TrainError::ScalerMismatch(format!(
            "dataset schema {} differs from scaler schema {}",
            data.schema_id, scaler.schema_id
        )));
    }
    check_classes(data)?;
    let seeds = Seeds::new(config.seed);
    let (train_part, val_part) = split_train_validation(data, config.validation_fraction, seeds.split)?;
    let prepared = Prepared {
        train_x: scaler.transform_dataset(&train_part)?,
        train_y: labels_f64(&train_part),
        val_x: scaler.transform_dataset(&val_part)?,
        val_y: labels_f64(&val_part),
    };
    let baseline = validation_metrics(model, &prepared)?.0;
    run_epochs(model.clone(), scaler, &prepared, config, &seeds, RESUME_DOMAIN, Some(baseline))
}

/// Validation loss plus TPR/FPR at threshold 0.5.
fn validation_metrics(model: &MlpModel, p: &Prepared) -> Result<(f64, f64, f64), TrainError> {
    let probs = model.predict_proba(p.val_x.view())?;
    let probs = probs.as_slice().expect("contiguous");
    let loss = mean_cross_entropy(probs, &p.val_y);
    let (mut tp, mut pos, mut fp, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&prob, &y) in probs.iter().zip(&p.val_y) {
        let flagged = prob >= 0.5;
        if y == 1.0 {
            pos += 1;
            tp += usize::from(flagged);
        } else {
            neg += 1;
            fp += usize::from(flagged);
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok((loss, rate(tp, pos), rate(fp, neg)))
}

fn run_epochs(
    mut model: MlpModel,
    scaler: &Scaler,
    p: &Prepared,
    config: &TrainConfig,
    seeds: &Seeds,
    domain: u64,
    baseline: Option<f64>,
) -> Result<(MlpModel, TrainReport), TrainError> {
    let n = p.train_x.nrows();
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, MlpModel)> = baseline.map(|loss| (loss, 0, model.clone()));

    for epoch in 1..=config.epochs {
        let mut rng = seeds.epoch_rng(domain, epoch);
        let mut loss_sum = 0.0;
        for chunk in epoch_batches(n, config.batch_size, &mut rng) {
            let x = p.train_x.select(Axis(0), &chunk);
            let y: Vec<f64> = chunk.iter().map(|&i| p.train_y[i]).collect();
            let cache = model.forward(x.view(), Mode::Train, &mut rng)?;
            loss_sum += mean_cross_entropy(cache.probabilities().as_slice().expect("contiguous"), &y) * chunk.len() as f64;
            let grads = model.backward(&cache, &y)?;
            model.update_running_stats(&cache)?;
            model.sgd_step(&grads, config.eta)?;
        }
        let train_loss = loss_sum / n as f64;
        let (val_loss, val_tpr, val_fpr) = validation_metrics(&model, p)?;
        // The clamped sigmoid can keep the loss finite after the weights
        // have overflowed, so the parameters are checked as well.
        let params_finite = model.flat_params().iter().all(|v| v.is_finite());
        if !train_loss.is_finite() || !val_loss.is_finite() || !params_finite {
            return Err(TrainError::Diverged {
                epoch,
                loss: if train_loss.is_finite() { val_loss } else { train_loss },
            });
        }
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_tpr,
            val_fpr,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.clone()));
        }
        if config.early_stop_loss.is_some_and(|t| val_loss < t) {
            break;
        }
    }

    let (_, selected_epoch, selected) = best.unwrap_or((f64::INFINITY, 0, model));
    let checksum = ModelFile::new(selected.clone(), scaler.clone(), TrainingFingerprint::default()).checksum();
    Ok((
        selected,
        TrainReport {
            records,
            selected_epoch,
            final_model_checksum: checksum,
        },
    ))
}
