//! Versioned single-file persistence of a trained detector.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "PDFMLP"  u32 format_version
//! section*  = [u8; 4] tag, u64 payload length, payload
//!   META    str schema_id, f64 threshold, u64 seed, u64 epochs, f64 eta, str data_checksum
//!   SCAL    u32 width, f64 means[width], f64 stds[width]
//!   LAYR    u32 count, then per layer:
//!           u32 in, u32 out, u8 activation (0 ReLU, 1 sigmoid), f64 dropout_rate,
//!           u8 has_batch_norm, f64 weights[out*in] (row-major), f64 biases[out],
//!           [f64 momentum, f64 epsilon, f64 gamma[out], f64 beta[out],
//!            f64 running_mean[out], f64 running_var[out]]
//!   END\0   empty
//! str       = u32 byte length, UTF-8 bytes
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mlp::{Activation, BatchNormState, DenseLayer, MlpModel};
use crate::preprocess::Scaler;

pub const MAGIC: &[u8; 6] = b"PDFMLP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("truncated model file: {0}")]
    Truncated(String),
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("feature schema mismatch: model uses {found}, extractor provides {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Provenance of a trained model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingFingerprint {
    pub seed: u64,
    pub epochs: u64,
    pub eta: f64,
    /// SHA-256 of the training data, hex.
    pub data_checksum: String,
}

/// Everything needed to scan: network, scaler, schema and threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub format_version: u32,
    pub schema_id: String,
    pub model: MlpModel,
    pub scaler: Scaler,
    pub fingerprint: TrainingFingerprint,
}

impl ModelFile {
    pub fn new(model: MlpModel, scaler: Scaler, fingerprint: TrainingFingerprint) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            schema_id: scaler.schema_id.clone(),
            model,
            scaler,
            fingerprint,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.model.threshold
    }

    /// Refuses models built for a different feature schema.
    pub fn check_schema(&self, expected: &str) -> Result<(), StoreError> {
        if self.schema_id != expected {
            return Err(StoreError::SchemaMismatch {
                expected: expected.to_string(),
                found: self.schema_id.clone(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        decode(bytes)
    }

    /// Writes atomically: a temporary file in the target directory is
    /// renamed over `path` once complete.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let io = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(&self.to_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let bytes = fs::read(path).map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 (hex) of the serialized file.
    pub fn checksum(&self) -> String {
        sha256_hex(&self.to_bytes())
    }
}

pub fn save(model: &MlpModel, scaler: &Scaler, path: &Path) -> Result<(), StoreError> {
    ModelFile::new(model.clone(), scaler.clone(), TrainingFingerprint::default()).save(path)
}

pub fn load(path: &Path) -> Result<ModelFile, StoreError> {
    ModelFile::load(path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.f64(*v);
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn section(&mut self, tag: &[u8; 4], body: Writer) {
        self.0.extend_from_slice(tag);
        self.u64(body.0.len() as u64);
        self.0.extend_from_slice(&body.0);
    }
}

fn encode(file: &ModelFile) -> Vec<u8> {
    let (model, scaler, fp) = (&file.model, &file.scaler, &file.fingerprint);
    let mut out = Writer(MAGIC.to_vec());
    out.u32(file.format_version);

    let mut meta = Writer(Vec::new());
    meta.str(&file.schema_id);
    meta.f64(model.threshold);
    meta.u64(fp.seed);
    meta.u64(fp.epochs);
    meta.f64(fp.eta);
    meta.str(&fp.data_checksum);
    out.section(b"META", meta);

    let mut scal = Writer(Vec::new());
    scal.u32(scaler.width() as u32);
    scal.f64s(&scaler.means);
    scal.f64s(&scaler.stds);
    out.section(b"SCAL", scal);

    let mut layr = Writer(Vec::new());
    layr.u32(model.layers.len() as u32);
    for l in &model.layers {
        layr.u32(l.input_width() as u32);
        layr.u32(l.output_width() as u32);
        layr.u8(l.activation.as_u8());
        layr.f64(l.dropout_rate);
        layr.u8(u8::from(l.batch_norm.is_some()));
        layr.f64s(l.weights.iter());
        layr.f64s(l.biases.iter());
        if let Some(bn) = &l.batch_norm {
            layr.f64(bn.momentum);
            layr.f64(bn.epsilon);
            for v in [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var] {
                layr.f64s(v.iter());
            }
        }
    }
    out.section(b"LAYR", layr);
    out.section(b"END\0", Writer(Vec::new()));
    out.0
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], what: &'static str) -> Self {
        Self { data, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let Some(end) = end else {
            return Err(StoreError::Truncated(format!("{} ends early", self.what)));
        };
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, StoreError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, StoreError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| StoreError::Corrupt("array too large".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn str(&mut self) -> Result<String, StoreError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| StoreError::Corrupt("string is not UTF-8".into()))
    }
    fn finish(&self) -> Result<(), StoreError> {
        if self.pos != self.data.len() {
            return Err(StoreError::Corrupt(format!("{} has trailing bytes", self.what)));
        }
        Ok(())
    }
}

fn decode(bytes: &[u8]) -> Result<ModelFile, StoreError> {
    if bytes.len() < MAGIC.len() {
        return if MAGIC.starts_with(bytes) {
            Err(StoreError::Truncated("header ends early".into()))
        } else {
            Err(StoreError::BadMagic)
        };
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let mut r = Reader::new(&bytes[MAGIC.len()..], "header");
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }

    let (mut meta, mut scal, mut layr, mut end) = (None, None, None, false);
    while r.pos < r.data.len() {
        r.what = "section header";
        let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
        let len = r.u64()?;
        r.what = "section payload";
        let body = r.take(usize::try_from(len).map_err(|_| StoreError::Truncated("section ends early".into()))?)?;
        match &tag {
            b"META" => meta = Some(body),
            b"SCAL" => scal = Some(body),
            b"LAYR" => layr = Some(body),
            b"END\0" => {
                end = true;
                break;
            }
            other => return Err(StoreError::Corrupt(format!("unknown section {:?}", String::from_utf8_lossy(other)))),
        }
    }
    if !end {
        return Err(StoreError::Truncated("missing end marker".into()));
    }
    if r.pos != r.data.len() {
        return Err(StoreError::Corrupt("bytes after end marker".into()));
    }
    let missing = |name: &str| StoreError::Corrupt(format!("missing {name} section"));

    let mut m = Reader::new(meta.ok_or_else(|| missing("META"))?, "META section");
    let schema_id = m.str()?;
    let threshold = m.f64()?;
    let fingerprint = TrainingFingerprint {
        seed: m.u64()?,
        epochs: m.u64()?,
        eta: m.f64()?,
        data_checksum: m.str()?,
    };
    m.finish()?;

    let mut s = Reader::new(scal.ok_or_else(|| missing("SCAL"))?, "SCAL section");
    let width = s.u32()? as usize;
    let scaler = Scaler {
        means: s.f64s(width)?,
        stds: s.f64s(width)?,
        schema_id: schema_id.clone(),
    };
    s.finish()?;

    let mut l = Reader::new(layr.ok_or_else(|| missing("LAYR"))?, "LAYR section");
    let count = l.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for i in 0..count {
        let (inp, out) = (l.u32()? as usize, l.u32()? as usize);
        let activation = Activation::from_u8(l.u8()?)
            .ok_or_else(|| StoreError::Corrupt(format!("layer {i}: unknown activation")))?;
        let dropout_rate = l.f64()?;
        let has_bn = l.u8()? != 0;
        let weights = Array2::from_shape_vec((out, inp), l.f64s(out.saturating_mul(inp))?)
            .map_err(|e| StoreError::Corrupt(e.to_string()))?;
        let biases = Array1::from(l.f64s(out)?);
        let batch_norm = if has_bn {
            let momentum = l.f64()?;
            let epsilon = l.f64()?;
            Some(BatchNormState {
                gamma: Array1::from(l.f64s(out)?),
                beta: Array1::from(l.f64s(out)?),
                running_mean: Array1::from(l.f64s(out)?),
                running_var: Array1::from(l.f64s(out)?),
                momentum,
                epsilon,
            })
        } else {
            None
        };
        layers.push(DenseLayer {
            weights,
            biases,
            activation,
            batch_norm,
            dropout_rate,
        });
    }
    l.finish()?;

    for (i, pair) in layers.windows(2).enumerate() {
        if pair[1].input_width() != pair[0].output_width() {
            return Err(StoreError::WidthMismatch(format!(
                "layer {} expects {} inputs, layer {i} has {} units",
                i + 1,
                pair[1].input_width(),
                pair[0].output_width()
            )));
        }
    }
    if let Some(first) = layers.first() {
        if first.input_width() != scaler.width() {
            return Err(StoreError::WidthMismatch(format!(
                "scaler has {} columns, network expects {}",
                scaler.width(),
                first.input_width()
            )));
        }
    }
    if scaler.stds.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(StoreError::Corrupt("scaler standard deviations must be positive".into()));
    }
    let model = MlpModel::from_layers(layers, threshold).map_err(|e| StoreError::Corrupt(e.to_string()))?;
    Ok(ModelFile {
        format_version: version,
        schema_id,
        model,
        scaler,
        fingerprint,
    })
}
