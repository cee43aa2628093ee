//! Binary model files, all integers and floats little-endian:
//!
//! ```text
//! "FOFE" | version: u8 | mode: u8 | ngram order: u64 | K: u64 | D: u64
//! | hidden count: u64 | hidden dims: u64 each | alpha: f64
//! | per tensor: rows: u64 | cols: u64 | rows * cols f32, row-major
//! ```
//!
//! Tensors follow [`ModelParams::tensor_names`] order. Alpha is stored as 0
//! for n-gram models.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{InputMode, ModelConfig, ModelParams};
use crate::encoding::ForgettingFactor;

pub const MODEL_MAGIC: &[u8; 4] = b"FOFE";
pub const MODEL_VERSION: u8 = 1;

const MODE_FOFE1: u8 = 0;
const MODE_FOFE2: u8 = 1;
const MODE_NGRAM: u8 = 2;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("bad-magic: not a model file")]
    BadMagic,
    #[error("unsupported-version: file version {found}, expected {MODEL_VERSION}")]
    UnsupportedVersion { found: u8 },
    #[error("bad-header: {0}")]
    BadHeader(String),
    #[error("truncated: file ends inside {what}")]
    Truncated { what: String },
    #[error("shape-mismatch: tensor {tensor} is {found:?} in the file, config implies {expected:?}")]
    ShapeMismatch {
        tensor: String,
        expected: (usize, usize),
        found: (u64, u64),
    },
    #[error("trailing-bytes: {0} unread bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("non-finite value in tensor {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ModelIoError {
    /// Short kebab-case name of the failure.
    pub fn tag(&self) -> &'static str {
        match self {
            ModelIoError::BadMagic => "bad-magic",
            ModelIoError::UnsupportedVersion { .. } => "unsupported-version",
            ModelIoError::BadHeader(_) => "bad-header",
            ModelIoError::Truncated { .. } => "truncated",
            ModelIoError::ShapeMismatch { .. } => "shape-mismatch",
            ModelIoError::TrailingBytes(_) => "trailing-bytes",
            ModelIoError::NonFinite(_) => "non-finite",
            ModelIoError::Io(_) => "io",
        }
    }
}

pub fn write_model<W: Write>(
    mut w: W,
    params: &ModelParams<f32>,
    config: &ModelConfig,
) -> Result<(), ModelIoError> {
    if !params.matches(config) {
        return Err(ModelIoError::BadHeader("parameters do not match the config".into()));
    }
    let (tag, order) = match config.input_mode {
        InputMode::Fofe1 => (MODE_FOFE1, 0),
        InputMode::Fofe2 => (MODE_FOFE2, 0),
        InputMode::Ngram(n) => (MODE_NGRAM, n as u64),
    };
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&[MODEL_VERSION, tag])?;
    for v in [order, config.vocab_size as u64, config.embed_dim as u64, config.hidden_dims.len() as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for &h in &config.hidden_dims {
        w.write_all(&(h as u64).to_le_bytes())?;
    }
    let alpha = config.alpha.filter(|_| config.input_mode.is_fofe()).map_or(0.0, |a| a.value());
    w.write_all(&alpha.to_le_bytes())?;
    for (rows, cols, values) in params.tensors() {
        w.write_all(&(rows as u64).to_le_bytes())?;
        w.write_all(&(cols as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(values.len() * 4);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelIoError> {
        if self.bytes.len() - self.pos < n {
            return Err(ModelIoError::Truncated { what: what.to_string() });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8, ModelIoError> {
        Ok(self.take(1, what)?[0])
    }

    fn u64(&mut self, what: &str) -> Result<u64, ModelIoError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, ModelIoError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn to_usize(v: u64, what: &str) -> Result<usize, ModelIoError> {
    usize::try_from(v).map_err(|_| ModelIoError::BadHeader(format!("{what} {v} is too large")))
}

/// Parses a complete model file held in memory.
pub fn parse_model(bytes: &[u8]) -> Result<(ModelParams<f32>, ModelConfig), ModelIoError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "header").map_err(|_| ModelIoError::BadMagic)? != MODEL_MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    let version = c.u8("header")?;
    if version != MODEL_VERSION {
        return Err(ModelIoError::UnsupportedVersion { found: version });
    }
    let tag = c.u8("header")?;
    let order = c.u64("header")?;
    let input_mode = match tag {
        MODE_FOFE1 => InputMode::Fofe1,
        MODE_FOFE2 => InputMode::Fofe2,
        MODE_NGRAM => InputMode::Ngram(to_usize(order, "n-gram order")?),
        other => return Err(ModelIoError::BadHeader(format!("unknown mode tag {other}"))),
    };
    let vocab_size = to_usize(c.u64("header")?, "vocabulary size")?;
    let embed_dim = to_usize(c.u64("header")?, "embedding width")?;
    let n_hidden = to_usize(c.u64("header")?, "hidden layer count")?;
    if n_hidden > bytes.len() {
        return Err(ModelIoError::BadHeader(format!("{n_hidden} hidden layers")));
    }
    let hidden_dims = (0..n_hidden)
        .map(|_| c.u64("header").and_then(|v| to_usize(v, "hidden width")))
        .collect::<Result<Vec<_>, _>>()?;
    let alpha_raw = c.f64("header")?;
    let alpha = if input_mode.is_fofe() {
        Some(ForgettingFactor::new(alpha_raw).map_err(|e| ModelIoError::BadHeader(e.to_string()))?)
    } else {
        None
    };
    let config = ModelConfig::new(input_mode, vocab_size, embed_dim, hidden_dims, alpha)
        .map_err(|e| ModelIoError::BadHeader(e.to_string()))?;

    let mut params = ModelParams::<f32>::zeros(&config);
    let names = params.tensor_names();
    let shapes: Vec<(usize, usize)> = params.tensors().iter().map(|&(r, col, _)| (r, col)).collect();
    for ((slot, name), expected) in params.tensors_mut().into_iter().zip(&names).zip(shapes) {
        let rows = c.u64(name)?;
        let cols = c.u64(name)?;
        if (rows, cols) != (expected.0 as u64, expected.1 as u64) {
            return Err(ModelIoError::ShapeMismatch {
                tensor: name.clone(),
                expected,
                found: (rows, cols),
            });
        }
        let raw = c.take(slot.len() * 4, name)?;
        for (dst, chunk) in slot.iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        if !slot.iter().all(|v| v.is_finite()) {
            return Err(ModelIoError::NonFinite(name.clone()));
        }
    }
    if c.pos != bytes.len() {
        return Err(ModelIoError::TrailingBytes(bytes.len() - c.pos));
    }
    Ok((params, config))
}

pub fn read_model<R: Read>(mut r: R) -> Result<(ModelParams<f32>, ModelConfig), ModelIoError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_model(&bytes)
}

pub fn save_model(path: &Path, params: &ModelParams<f32>, config: &ModelConfig) -> Result<(), ModelIoError> {
    write_model(BufWriter::new(File::create(path)?), params, config)
}

pub fn load_model(path: &Path) -> Result<(ModelParams<f32>, ModelConfig), ModelIoError> {
    read_model(File::open(path)?)
}
