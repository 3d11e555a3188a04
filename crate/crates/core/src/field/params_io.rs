//! Decoder weight files.
//!
//! Binary layout, all little-endian: the 4-byte magic `NKSF`, then `u32`
//! version, levels, feature dimension and hidden width, then every weight as
//! an `f64` in the order given by [`DecoderShape::tensors`], matrices
//! row-major.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::network::{DecoderParams, DecoderShape};

pub const PARAMS_MAGIC: [u8; 4] = *b"NKSF";
pub const PARAMS_VERSION: u32 = 1;

/// Upper bound on header dimensions, to reject garbage before allocating.
const MAX_DIM: u32 = 1 << 16;

pub fn write_params<W: Write>(params: &DecoderParams, mut w: W) -> Result<()> {
    let s = &params.shape;
    let mut buf = Vec::with_capacity(20 + 8 * params.values.len());
    buf.extend_from_slice(&PARAMS_MAGIC);
    for v in [PARAMS_VERSION, s.levels as u32, s.feature_dim as u32, s.hidden as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &params.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> Result<DecoderParams> {
    let mut header = [0u8; 20];
    r.read_exact(&mut header)
        .map_err(|_| Error::parse("byte 0", "truncated decoder header"))?;
    if header[..4] != PARAMS_MAGIC {
        return Err(Error::UnsupportedFormat("not a decoder weight file".into()));
    }
    let field = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = field(0);
    if version != PARAMS_VERSION {
        return Err(Error::UnsupportedFormat(format!("decoder file version {version}")));
    }
    let (levels, dim, hidden) = (field(1), field(2), field(3));
    if levels > MAX_DIM || dim > MAX_DIM || hidden > MAX_DIM {
        return Err(Error::parse("byte 8", "implausible decoder dimensions"));
    }
    let shape = DecoderShape::new(levels as usize, dim as usize, hidden as usize)
        .map_err(|e| Error::parse("byte 8", e.to_string()))?;
    let n = shape.param_count();
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 8 * n {
        return Err(Error::parse(
            "byte 20",
            format!("expected {} weight bytes, found {}", 8 * n, body.len()),
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DecoderParams::from_values(shape, values).map_err(|e| Error::parse("byte 20", e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorExport {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Vec<f64>>,
}

/// Readable dump of the weights, one entry per tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsExport {
    pub version: u32,
    pub shape: DecoderShape,
    pub tensors: Vec<TensorExport>,
}

impl ParamsExport {
    pub fn new(params: &DecoderParams) -> Self {
        let mut cursor = 0;
        let tensors = params
            .shape
            .tensors()
            .into_iter()
            .map(|(name, rows, cols)| {
                let values = (0..rows)
                    .map(|r| params.values[cursor + r * cols..cursor + (r + 1) * cols].to_vec())
                    .collect();
                cursor += rows * cols;
                TensorExport {
                    name,
                    rows,
                    cols,
                    values,
                }
            })
            .collect();
        ParamsExport {
            version: PARAMS_VERSION,
            shape: params.shape,
            tensors,
        }
    }

    pub fn into_params(self) -> Result<DecoderParams> {
        let values = self
            .tensors
            .into_iter()
            .flat_map(|t| t.values.into_iter().flatten())
            .collect();
        DecoderParams::from_values(self.shape, values)
    }
}
