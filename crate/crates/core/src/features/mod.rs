//! Static feature extraction over parsed documents.

mod entropy;
mod extract;
mod schema;

pub use entropy::{shannon_entropy, ByteHistogram};
pub use extract::extract_features;
pub use schema::{describe_schema, Category, FeatureDescriptor, FeatureSchema, FEATURE_COUNT, SCHEMA_ID};

use crate::pdf::{parse_pdf_with, ParseOptions};

/// One document's features in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub schema_id: String,
    pub source_path: Option<String>,
}

impl FeatureVector {
    /// Value of the named feature, if the name is in the schema.
    pub fn get(&self, name: &str) -> Option<f64> {
        describe_schema().index_of(name).map(|i| self.values[i])
    }

    pub fn with_source(mut self, path: impl Into<String>) -> Self {
        self.source_path = Some(path.into());
        self
    }
}

/// Parses `bytes` and extracts features in one step.
pub fn features_from_bytes(bytes: &[u8]) -> FeatureVector {
    let doc = parse_pdf_with(bytes, &ParseOptions::default());
    extract_features(&doc, bytes)
}
