//! Static PDF malware detection.
//!
//! The pipeline: [`pdf::parse_pdf`] recovers an object graph from raw
//! bytes, [`features::extract_features`] maps it to a 48-value
//! [`features::FeatureVector`], [`preprocess`] standardizes features and
//! splits data, [`trainer::train`] fits an [`mlp::MlpModel`] with
//! mini-batch SGD, and [`evaluator::evaluate`] produces ROC and threshold
//! sweeps. [`model_store`] persists a trained detector.

pub mod evaluator;
pub mod features;
pub mod mlp;
pub mod model_store;
pub mod pdf;
pub mod preprocess;
pub mod synth;
pub mod trainer;
