//! Threshold sweeps, ROC curves and AUC for a scored test set.
//!
//! A sample is flagged malicious when its score is `>=` the threshold.

use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::mlp::{MlpError, MlpModel};
use crate::preprocess::{Dataset, PreprocessError, Scaler};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("rates undefined: test set has {benign} benign and {malicious} malicious samples")]
    RatesUndefined { benign: usize, malicious: usize },
    #[error("no thresholds given")]
    NoThresholds,
    #[error("threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("max_fpr {0} outside [0, 1]")]
    InvalidMaxFpr(f64),
    #[error("no threshold keeps FPR <= {max_fpr}; minimum achievable FPR is {min_fpr}")]
    NoThresholdWithin { max_fpr: f64, min_fpr: f64 },
    #[error("{scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

/// Confusion counts and rates at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub tpr: f64,
    pub fpr: f64,
    /// `1 - tpr`, so `tpr + fnr == 1` holds exactly.
    pub fnr: f64,
}

impl SweepPoint {
    /// `1 - fpr`.
    pub fn tnr(&self) -> f64 {
        1.0 - self.fpr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_benign: usize,
    pub n_malicious: usize,
    /// Ascending by threshold.
    pub sweep: Vec<SweepPoint>,
    /// `(fpr, tpr)`, ascending in both coordinates.
    pub roc_points: Vec<(f64, f64)>,
    pub auc: f64,
    pub operating_point: SweepPoint,
}

/// Scores each test row once in inference mode and evaluates at the
/// model's own threshold, the given thresholds, every distinct score and
/// the endpoints 0 and 1.
pub fn evaluate(
    model: &MlpModel,
    scaler: &Scaler,
    test: &Dataset,
    thresholds: &[f64],
) -> Result<EvalReport, EvalError> {
    let x = scaler.transform_dataset(test)?;
    let scores = model.predict_proba(x.view())?;
    evaluate_scores(&scores.to_vec(), &test.labels, thresholds, model.threshold)
}

/// [`evaluate`] on precomputed scores.
pub fn evaluate_scores(
    scores: &[f64],
    labels: &[u8],
    thresholds: &[f64],
    operating_threshold: f64,
) -> Result<EvalReport, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(s));
    }
    if thresholds.is_empty() {
        return Err(EvalError::NoThresholds);
    }
    if let Some(&t) = thresholds.iter().chain([&operating_threshold]).find(|&&t| !(t > 0.0 && t < 1.0)) {
        return Err(EvalError::InvalidThreshold(t));
    }
    let counts = ScoreCounts::new(scores, labels)?;

    let mut grid: Vec<f64> = scores.to_vec();
    grid.extend_from_slice(thresholds);
    grid.extend([0.0, 1.0, operating_threshold]);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let sweep: Vec<SweepPoint> = grid.iter().map(|&t| counts.at(t)).collect();

    // Only the distinct scores and endpoints change the confusion counts.
    let mut cuts: Vec<f64> = scores.to_vec();
    cuts.extend([0.0, 1.0]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut roc: Vec<SweepPoint> = cuts.iter().rev().map(|&t| counts.at(t)).collect();
    roc.dedup_by_key(|p| (p.tp, p.fp));

    Ok(EvalReport {
        n_benign: counts.benign.len(),
        n_malicious: counts.malicious.len(),
        roc_points: roc.iter().map(|p| (p.fpr, p.tpr)).collect(),
        auc: trapezoid_auc(&roc, counts.malicious.len(), counts.benign.len()),
        operating_point: counts.at(operating_threshold),
        sweep,
    })
}

struct ScoreCounts {
    benign: Vec<f64>,
    malicious: Vec<f64>,
}

impl ScoreCounts {
    fn new(scores: &[f64], labels: &[u8]) -> Result<Self, EvalError> {
        let mut benign = Vec::new();
        let mut malicious = Vec::new();
        for (&s, &l) in scores.iter().zip(labels) {
            if l == 1 { &mut malicious } else { &mut benign }.push(s);
        }
        if benign.is_empty() || malicious.is_empty() {
            return Err(EvalError::RatesUndefined {
                benign: benign.len(),
                malicious: malicious.len(),
            });
        }
        benign.sort_by(f64::total_cmp);
        malicious.sort_by(f64::total_cmp);
        Ok(Self { benign, malicious })
    }

    fn at(&self, threshold: f64) -> SweepPoint {
        let at_or_above = |v: &[f64]| v.len() - v.partition_point(|&s| s < threshold);
        let (p, n) = (self.malicious.len(), self.benign.len());
        let tp = at_or_above(&self.malicious);
        let fp = at_or_above(&self.benign);
        let tpr = tp as f64 / p as f64;
        SweepPoint {
            threshold,
            tp,
            fp,
            tn: n - fp,
            fn_: p - tp,
            tpr,
            fpr: fp as f64 / n as f64,
            fnr: 1.0 - tpr,
        }
    }
}

/// Trapezoid area from integer counts, divided once at the end.
fn trapezoid_auc(roc: &[SweepPoint], positives: usize, negatives: usize) -> f64 {
    let twice_area: u128 = roc
        .windows(2)
        .map(|w| (w[1].fp - w[0].fp) as u128 * (w[0].tp + w[1].tp) as u128)
        .sum();
    twice_area as f64 / (2 * positives as u128 * negatives as u128) as f64
}

/// Threshold with the highest TPR among sweep points with
/// `fpr <= max_fpr`; ties go to the larger threshold.
pub fn pick_threshold(report: &EvalReport, max_fpr: f64) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&max_fpr) {
        return Err(EvalError::InvalidMaxFpr(max_fpr));
    }
    report
        .sweep
        .iter()
        .filter(|p| p.fpr <= max_fpr)
        .max_by(|a, b| a.tp.cmp(&b.tp).then(a.threshold.total_cmp(&b.threshold)))
        .map(|p| p.threshold)
        .ok_or_else(|| EvalError::NoThresholdWithin {
            max_fpr,
            min_fpr: report.sweep.iter().map(|p| p.fpr).fold(f64::INFINITY, f64::min),
        })
}

impl EvalReport {
    /// `fpr,tpr`
    pub fn write_roc_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fpr", "tpr"])?;
        for (fpr, tpr) in &self.roc_points {
            w.write_record([fpr.to_string(), tpr.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `threshold,tpr,fpr,fnr`
    pub fn write_sweep_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "tpr", "fpr", "fnr"])?;
        for p in &self.sweep {
            w.write_record([p.threshold.to_string(), p.tpr.to_string(), p.fpr.to_string(), p.fnr.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let op = &self.operating_point;
        let mut s = String::new();
        let _ = writeln!(s, "benign: {}", self.n_benign);
        let _ = writeln!(s, "malicious: {}", self.n_malicious);
        let _ = writeln!(s, "auc: {:.6}", self.auc);
        let _ = writeln!(s, "threshold: {}", op.threshold);
        let _ = writeln!(s, "tp: {}  fp: {}  tn: {}  fn: {}", op.tp, op.fp, op.tn, op.fn_);
        let _ = writeln!(s, "tpr: {:.6}  fpr: {:.6}  fnr: {:.6}", op.tpr, op.fpr, op.fnr);
        s
    }
}
