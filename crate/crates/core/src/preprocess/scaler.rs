use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::{Dataset, PreprocessError};
use crate::features::FeatureVector;

/// Per-column z-score parameters fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    /// Population standard deviations; 1 for constant columns.
    pub stds: Vec<f64>,
    pub schema_id: String,
}

/// Fits per-column mean and population standard deviation. A column whose
/// values are all identical gets σ = 1 so it transforms to 0.
pub fn fit_scaler(train: &Dataset) -> Result<Scaler, PreprocessError> {
    if train.is_empty() {
        return Err(PreprocessError::EmptyTrainingSet);
    }
    let n = train.len() as f64;
    let mut means = Vec::with_capacity(train.width());
    let mut stds = Vec::with_capacity(train.width());
    for col in train.features.axis_iter(Axis(1)) {
        let mean = col.sum() / n;
        let constant = col.iter().all(|&v| v == col[0]);
        let std = if constant {
            1.0
        } else {
            (col.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
        };
        means.push(if constant { col[0] } else { mean });
        stds.push(std);
    }
    Ok(Scaler {
        means,
        stds,
        schema_id: train.schema_id.clone(),
    })
}

impl Scaler {
    pub fn width(&self) -> usize {
        self.means.len()
    }

    /// Normalizes one feature vector; the schema must match.
    pub fn transform(&self, x: &FeatureVector) -> Result<Vec<f64>, PreprocessError> {
        if x.schema_id != self.schema_id {
            return Err(PreprocessError::SchemaMismatch {
                expected: self.schema_id.clone(),
                found: x.schema_id.clone(),
            });
        }
        self.transform_row(ArrayView1::from(&x.values[..])).map(|r| r.to_vec())
    }

    pub fn transform_row(&self, row: ArrayView1<f64>) -> Result<Array1<f64>, PreprocessError> {
        if row.len() != self.width() {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.width(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    pub fn transform_matrix(&self, x: &Array2<f64>) -> Result<Array2<f64>, PreprocessError> {
        if x.ncols() != self.width() {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.width(),
                found: x.ncols(),
            });
        }
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for ((v, &m), &s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    /// Transforms a dataset's features, checking the schema.
    pub fn transform_dataset(&self, d: &Dataset) -> Result<Array2<f64>, PreprocessError> {
        if d.schema_id != self.schema_id {
            return Err(PreprocessError::SchemaMismatch {
                expected: self.schema_id.clone(),
                found: d.schema_id.clone(),
            });
        }
        self.transform_matrix(&d.features)
    }
}
