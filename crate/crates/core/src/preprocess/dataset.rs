use ndarray::{Array2, Axis};

use super::{FeatureRow, PreprocessError, LABEL_BENIGN, LABEL_MALICIOUS};
use crate::features::{FeatureVector, FEATURE_COUNT};

/// Labeled feature matrix; rows are documents.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    /// 0 = benign, 1 = malicious.
    pub labels: Vec<u8>,
    pub paths: Vec<String>,
    pub schema_id: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<u8>,
        paths: Vec<String>,
        schema_id: impl Into<String>,
    ) -> Result<Self, PreprocessError> {
        if features.nrows() != labels.len() || labels.len() != paths.len() {
            return Err(PreprocessError::Inconsistent(format!(
                "{} rows, {} labels, {} paths",
                features.nrows(),
                labels.len(),
                paths.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(PreprocessError::Inconsistent(format!("label {bad} is not 0 or 1")));
        }
        Ok(Self {
            features,
            labels,
            paths,
            schema_id: schema_id.into(),
        })
    }

    /// Builds a dataset from labeled feature vectors that share one schema.
    pub fn from_vectors(items: &[(FeatureVector, u8)], schema_id: &str) -> Result<Self, PreprocessError> {
        let mut features = Array2::zeros((items.len(), FEATURE_COUNT));
        let mut labels = Vec::with_capacity(items.len());
        let mut paths = Vec::with_capacity(items.len());
        for (i, (fv, label)) in items.iter().enumerate() {
            if fv.schema_id != schema_id {
                return Err(PreprocessError::SchemaMismatch {
                    expected: schema_id.to_string(),
                    found: fv.schema_id.clone(),
                });
            }
            features.row_mut(i).iter_mut().zip(&fv.values).for_each(|(d, s)| *d = *s);
            labels.push(*label);
            paths.push(fv.source_path.clone().unwrap_or_default());
        }
        Self::new(features, labels, paths, schema_id)
    }

    /// Builds a dataset from CSV rows; unlabeled rows are rejected.
    pub fn from_rows(rows: &[FeatureRow], schema_id: &str) -> Result<Self, PreprocessError> {
        let width = rows.first().map_or(FEATURE_COUNT, |r| r.values.len());
        let mut features = Array2::zeros((rows.len(), width));
        let mut labels = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.values.len() != width {
                return Err(PreprocessError::DimensionMismatch {
                    expected: width,
                    found: row.values.len(),
                });
            }
            let label = match row.label {
                LABEL_BENIGN => 0,
                LABEL_MALICIOUS => 1,
                other => {
                    return Err(PreprocessError::BadRow {
                        row: i + 1,
                        detail: format!("label {other} is not usable for training or evaluation"),
                    })
                }
            };
            features.row_mut(i).iter_mut().zip(&row.values).for_each(|(d, s)| *d = *s);
            labels.push(label);
        }
        let paths = rows.iter().map(|r| r.path.clone()).collect();
        Self::new(features, labels, paths, schema_id)
    }

    pub fn to_rows(&self) -> Vec<FeatureRow> {
        self.features
            .rows()
            .into_iter()
            .zip(&self.labels)
            .zip(&self.paths)
            .map(|((values, &label), path)| FeatureRow {
                path: path.clone(),
                label: label as i8,
                values: values.to_vec(),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    /// `[benign, malicious]` counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let malicious = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - malicious, malicious]
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            paths: indices.iter().map(|&i| self.paths[i].clone()).collect(),
            schema_id: self.schema_id.clone(),
        }
    }
}
