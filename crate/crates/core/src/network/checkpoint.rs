//! Binary checkpoint format.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `SNNCKPT\0` |
//! | 8 | 4 | format version, `u32` |
//! | 12 | 1 | neuron variant code, index into [`NeuronModel::ALL`] |
//! | 13 | 3 | zero |
//! | 16 | 40 | `a, tau, b, v0, alpha` as `f64` |
//! | 56 | 4 | layer count `L`, `u32` |
//! | 60 | 8 L | per layer `fan_out, fan_in` as `u32` |
//! | .. | 8 n | weights of every layer in order, row-major `f64` |
//! | .. | 8 | manifest length `m`, `u64` |
//! | .. | m | manifest, UTF-8 JSON |
//! | .. | 32 | SHA-256 of every preceding byte |

use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::{Layer, Network};
use crate::error::{Error, Result};
use crate::neuron::{NeuronModel, NeuronModelConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SNNCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A network plus the JSON manifest describing how its inputs were encoded.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub manifest: serde_json::Value,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let net = &self.network;
        let cfg = net.cfg();
        let mut buf = Vec::with_capacity(128 + 8 * net.num_weights());
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let code = NeuronModel::ALL
            .iter()
            .position(|&v| v == cfg.variant())
            .expect("variant listed") as u8;
        buf.extend_from_slice(&[code, 0, 0, 0]);
        for x in [cfg.a(), cfg.tau(), cfg.b(), cfg.v0(), cfg.alpha()] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&(net.depth() as u32).to_le_bytes());
        for l in net.layers() {
            buf.extend_from_slice(&(l.fan_out() as u32).to_le_bytes());
            buf.extend_from_slice(&(l.fan_in() as u32).to_le_bytes());
        }
        for l in net.layers() {
            for w in l.weights().iter() {
                buf.extend_from_slice(&w.to_le_bytes());
            }
        }
        let manifest = serde_json::to_vec(&self.manifest)?;
        buf.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        buf.extend_from_slice(&manifest);
        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 + 32 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Corrupted("not a checkpoint file".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Corrupted("checkpoint digest mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 8 };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Corrupted(format!("unsupported checkpoint version {version}")));
        }
        let code = r.take(4)?[0] as usize;
        let variant = *NeuronModel::ALL
            .get(code)
            .ok_or_else(|| Error::Corrupted(format!("unknown variant code {code}")))?;
        let [a, tau, b, v0, alpha] = [r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?];
        let cfg = NeuronModelConfig::new(variant, a, tau, b, v0, alpha)?;
        let depth = r.u32()? as usize;
        let shapes = (0..depth)
            .map(|_| Ok((r.u32()? as usize, r.u32()? as usize)))
            .collect::<Result<Vec<_>>>()?;
        let mut layers = Vec::with_capacity(depth);
        for (fan_out, fan_in) in shapes {
            let n = fan_out
                .checked_mul(fan_in)
                .ok_or_else(|| Error::Corrupted("layer size overflows".into()))?;
            let w = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let w = Array2::from_shape_vec((fan_out, fan_in), w).map_err(|e| Error::Corrupted(e.to_string()))?;
            layers.push(Layer::new(w)?);
        }
        let m = r.u64()? as usize;
        let manifest = serde_json::from_slice(r.take(m)?)?;
        if r.pos != body.len() {
            return Err(Error::Corrupted("trailing bytes after manifest".into()));
        }
        Ok(Checkpoint {
            network: Network::new(cfg, layers)?,
            manifest,
        })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupted("truncated checkpoint".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
