//! Binary weight checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "NAVTL1"                     magic + format version
//! u64                          FNV-1a digest of the spec's canonical text
//! u32                          record count
//! per record:
//!   u32 + bytes                layer name
//!   u32 ndim, u32 dims..., f32 payload    weight tensor
//!   u32 ndim, u32 dims..., f32 payload    bias tensor
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::network::{LayerParams, Network};
use super::spec::NetworkSpec;
use super::tensor::Tensor;
use super::NnError;

pub const MAGIC: &[u8; 5] = b"NAVTL";
pub const FORMAT_VERSION: u8 = b'1';

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    pub name: String,
    pub params: LayerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub digest: u64,
    pub records: Vec<CheckpointRecord>,
}

pub fn encode(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&net.spec().digest().to_le_bytes());
    let records: Vec<_> = net.layer_params().collect();
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (name, p) in records {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        write_tensor(&mut out, &p.weight);
        write_tensor(&mut out, &p.bias);
    }
    out
}

fn write_tensor(out: &mut Vec<u8>, t: &Tensor) {
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(NnError::Truncated { offset: self.pos })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Tensor, NnError> {
        let ndim = self.u32()? as usize;
        if ndim > 8 {
            return Err(NnError::Format(format!("tensor rank {ndim} at offset {}", self.pos)));
        }
        let shape = (0..ndim).map(|_| self.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let raw = self.take(n.checked_mul(4).ok_or(NnError::Truncated { offset: self.pos })?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Tensor::new(shape, data)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, NnError> {
    if bytes.len() < 6 || &bytes[..5] != MAGIC {
        return Err(NnError::Format("missing NAVTL magic header".into()));
    }
    if bytes[5] != FORMAT_VERSION {
        return Err(NnError::Version { found: bytes[5] as char, expected: FORMAT_VERSION as char });
    }
    let mut r = Reader { bytes, pos: 6 };
    let digest = r.u64()?;
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name =
            String::from_utf8(r.take(len)?.to_vec()).map_err(|_| NnError::Format("layer name is not UTF-8".into()))?;
        let weight = r.tensor()?;
        let bias = r.tensor()?;
        records.push(CheckpointRecord { name, params: LayerParams { weight, bias } });
    }
    if r.pos != bytes.len() {
        return Err(NnError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { digest, records })
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<(), NnError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(net))?;
    Ok(())
}

/// Load weights for `spec`. Every parametrised layer of `spec` must have a
/// record of identical shape; the trainable flags of `spec` are kept.
pub fn load_checkpoint(path: &Path, spec: &NetworkSpec) -> Result<Network, NnError> {
    let bytes = fs::read(path)?;
    network_from_checkpoint(&decode(&bytes)?, spec)
}

pub fn network_from_checkpoint(ckpt: &Checkpoint, spec: &NetworkSpec) -> Result<Network, NnError> {
    let mut net = Network::zeroed(spec.clone())?;
    let expected: Vec<String> = net.layer_params().map(|(n, _)| n.to_string()).collect();
    if expected.len() != ckpt.records.len() {
        return Err(NnError::ShapeMismatch {
            context: "checkpoint layer count".into(),
            expected: vec![expected.len()],
            actual: vec![ckpt.records.len()],
        });
    }
    for (name, rec) in expected.iter().zip(&ckpt.records) {
        if *name != rec.name {
            return Err(NnError::ShapeMismatch {
                context: format!("checkpoint layer '{}' where '{name}' expected", rec.name),
                expected: vec![],
                actual: vec![],
            });
        }
        net.replace_params(name, rec.params.clone())?;
    }
    if ckpt.digest != spec.digest() {
        return Err(NnError::SpecMismatch { expected: spec.digest(), actual: ckpt.digest });
    }
    Ok(net)
}
