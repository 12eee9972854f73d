//! Flat parameter vectors and the binary checkpoint format.
//!
//! Checkpoint layout, all little-endian:
//!
//! ```text
//! b"EAXCKPT1"
//! u32 layer count L
//! L x (u32 inputs, u32 outputs)
//! sum(in * out + out) x f64 values in canonical order
//! ```

use std::path::Path;

use super::{check_chain, LayerShape};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"EAXCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct FlatParams {
    shapes: Vec<LayerShape>,
    values: Vec<f64>,
}

impl FlatParams {
    pub fn new(shapes: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        check_chain(&shapes)?;
        let expected: usize = shapes.iter().map(LayerShape::param_count).sum();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "flat parameters",
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { shapes, values })
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same shape header, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.shapes.clone(), values)
    }
}

pub fn encode_checkpoint(flat: &FlatParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 + 8 * flat.shapes.len() + 8 * flat.values.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(flat.shapes.len() as u32).to_le_bytes());
    for s in &flat.shapes {
        out.extend_from_slice(&(s.inputs as u32).to_le_bytes());
        out.extend_from_slice(&(s.outputs as u32).to_le_bytes());
    }
    for v in &flat.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<FlatParams> {
    let mut cursor = Cursor { bytes, pos: 0 };
    if cursor.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let layers = cursor.u32()? as usize;
    let mut shapes = Vec::with_capacity(layers.min(1024));
    for _ in 0..layers {
        let inputs = cursor.u32()? as usize;
        let outputs = cursor.u32()? as usize;
        shapes.push(LayerShape::new(inputs, outputs));
    }
    check_chain(&shapes)?;
    let count: usize = shapes.iter().map(LayerShape::param_count).sum();
    let remaining = bytes.len() - cursor.pos;
    if remaining != count * 8 {
        return Err(Error::Checkpoint(format!(
            "expected {} value bytes, found {remaining}",
            count * 8
        )));
    }
    let values = bytes[cursor.pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    FlatParams::new(shapes, values)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated header".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn write_checkpoint(path: &Path, flat: &FlatParams) -> Result<()> {
    std::fs::write(path, encode_checkpoint(flat)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<FlatParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
