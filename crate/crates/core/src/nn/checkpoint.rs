//! Binary model file.
//!
//! Layout (little endian): magic `IGRLCKPT`, `u32` version, `u8` mode
//! (0 lane, 1 vehicle, 255 custom), `u8` normalize flag, five `f64` feature
//! scaling divisors, `u32` layers, `u32` hidden width, the schema (`u32`
//! node type count and widths, `u32` edge type count and `(src, dst)` pairs,
//! `u32` readout type), then `u32` tensor count and per tensor: `u32` name
//! length, name bytes, `u32` rows, `u32` cols, `f64` data. The size depends
//! only on tensor shapes, never on the network a model was trained on.

use std::path::Path;

use super::graph::GraphSchema;
use super::matrix::Matrix;
use super::model::{ModelConfig, ModelParams};
use super::params::ParamSet;
use super::NnError;
use crate::graphenc::{FeatureScaling, GraphMode};

const MAGIC: &[u8; 8] = b"IGRLCKPT";
const VERSION: u32 = 1;
const CUSTOM_MODE: u8 = 255;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn params_to_bytes(p: &ModelParams) -> Vec<u8> {
    let c = &p.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize);
    out.push(c.mode.map_or(CUSTOM_MODE, |m| m.code()));
    out.push(u8::from(c.normalize));
    for v in c.scaling.to_array() {
        put_f64(&mut out, v);
    }
    put_u32(&mut out, c.layers);
    put_u32(&mut out, c.hidden);
    put_u32(&mut out, c.schema.node_widths.len());
    for &w in &c.schema.node_widths {
        put_u32(&mut out, w);
    }
    put_u32(&mut out, c.schema.edge_types.len());
    for &(s, d) in &c.schema.edge_types {
        put_u32(&mut out, s);
        put_u32(&mut out, d);
    }
    put_u32(&mut out, c.schema.readout);
    put_tensors(&mut out, &p.set);
    out
}

/// Appends the tensor count and every named tensor.
pub(crate) fn put_tensors(out: &mut Vec<u8>, set: &ParamSet) {
    put_u32(out, set.len());
    for (name, t) in set.names.iter().zip(&set.tensors) {
        put_u32(out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(out, t.rows());
        put_u32(out, t.cols());
        for &x in t.data() {
            put_f64(out, x);
        }
    }
}

pub(crate) struct Reader<'a> {
    pub(crate) buf: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| NnError::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<usize, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    pub(crate) fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Reader<'_> {
    pub(crate) fn tensors(&mut self) -> Result<ParamSet, NnError> {
        let n = self.u32()?;
        let mut set = ParamSet::default();
        for _ in 0..n {
            let len = self.u32()?;
            let name = String::from_utf8(self.take(len)?.to_vec())
                .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?;
            let (rows, cols) = (self.u32()?, self.u32()?);
            let count = rows.checked_mul(cols).ok_or_else(|| NnError::Checkpoint("tensor too large".into()))?;
            let bytes = self.take(count.checked_mul(8).ok_or_else(|| NnError::Checkpoint("tensor too large".into()))?)?;
            let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            set.push(name, Matrix::new(rows, cols, data));
        }
        Ok(set)
    }
}

/// Parses a model file; `expected` rejects files of another mode.
pub fn params_from_bytes(buf: &[u8], expected: Option<GraphMode>) -> Result<ModelParams, NnError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(NnError::Checkpoint("not a model file".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let code = r.u8()?;
    let mode = if code == CUSTOM_MODE {
        None
    } else {
        Some(GraphMode::from_code(code).ok_or_else(|| NnError::Checkpoint(format!("unknown mode {code}")))?)
    };
    if let Some(want) = expected {
        if mode != Some(want) {
            return Err(NnError::ModeMismatch {
                expected: want.as_str().into(),
                found: mode.map_or("custom", |m| m.as_str()).into(),
            });
        }
    }
    let normalize = r.u8()? != 0;
    let mut sc = [0.0; 5];
    for v in &mut sc {
        *v = r.f64()?;
    }
    let layers = r.u32()?;
    let hidden = r.u32()?;
    let n_types = r.u32()?;
    let node_widths = (0..n_types).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let n_edges = r.u32()?;
    let mut edge_types = Vec::with_capacity(n_edges.min(1024));
    for _ in 0..n_edges {
        edge_types.push((r.u32()?, r.u32()?));
    }
    let readout = r.u32()?;
    let schema = GraphSchema { node_widths, edge_types, readout };
    let config = ModelConfig { mode, schema, layers, hidden, normalize, scaling: FeatureScaling::from_array(sc) };
    let set = r.tensors()?;
    if r.pos != buf.len() {
        return Err(NnError::Checkpoint("trailing bytes".into()));
    }
    let expected_count = config.layers * config.schema.edge_types.len() + 8;
    if set.len() != expected_count {
        return Err(NnError::Checkpoint(format!("expected {expected_count} tensors, found {}", set.len())));
    }
    Ok(ModelParams { config, set })
}

pub fn save_params(p: &ModelParams, path: impl AsRef<Path>) -> Result<(), NnError> {
    std::fs::write(path, params_to_bytes(p))?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>, expected: Option<GraphMode>) -> Result<ModelParams, NnError> {
    params_from_bytes(&std::fs::read(path)?, expected)
}
