//! Binary checkpoint format.
//!
//! Little-endian layout:
//!
//! ```text
//! "TAGN"  u32 version  u32 tensor_count
//! per tensor: u16 name_len, name (UTF-8), u8 rank, u32 dims[rank], f32 payload
//! u32 config_len, config (UTF-8 `key=value` lines)
//! u64 FNV-1a of every preceding byte
//! ```

use std::fs;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;

use crate::error::{Error, Result};
use crate::model::{ModelParams, PARAM_NAMES};
use crate::tensor::Tensor;
use crate::train::TrainConfig;

pub const MAGIC: &[u8; 4] = b"TAGN";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    /// Fingerprint of the vocabulary the model was trained with.
    pub vocab_hash: u64,
    pub config: TrainConfig,
    pub epoch: usize,
    pub best_metric: f64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let named = self.params.named();
        out.extend_from_slice(&(named.len() as u32).to_le_bytes());
        for (name, t) in named {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let rank = u8::try_from(t.rank())
                .map_err(|_| Error::Checkpoint(format!("{name}: rank too large")))?;
            out.push(rank);
            for &d in t.shape() {
                let d = u32::try_from(d)
                    .map_err(|_| Error::Checkpoint(format!("{name}: dimension {d} too large")))?;
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let block = self.config_block();
        out.extend_from_slice(&(block.len() as u32).to_le_bytes());
        out.extend_from_slice(block.as_bytes());
        let hash = fnv1a(&out);
        out.extend_from_slice(&hash.to_le_bytes());
        Ok(out)
    }

    fn config_block(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("vocab_hash={:016x}\n", self.vocab_hash));
        s.push_str(&format!("epoch={}\n", self.epoch));
        s.push_str(&format!("best_metric={}\n", self.best_metric));
        for (k, v) in self.config.to_key_values() {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 4 + 4 + 4 + 8 {
            return Err(Error::Checkpoint("file is truncated".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {VERSION})"
            )));
        }
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if stored != fnv1a(body) {
            return Err(Error::Checkpoint(
                "hash mismatch: file is corrupt or truncated".into(),
            ));
        }

        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for i in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            if PARAM_NAMES.get(i) != Some(&name) {
                return Err(Error::Checkpoint(format!(
                    "unexpected tensor `{name}` at position {i}"
                )));
            }
            let rank = r.u8()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let raw = r.take(
                len.checked_mul(4)
                    .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` is too large")))?,
            )?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(Tensor::new(shape, data)?);
        }
        let params = ModelParams::from_tensors(tensors)
            .map_err(|e| Error::Checkpoint(format!("bad parameter set: {e}")))?;

        let block_len = r.u32()? as usize;
        let block = std::str::from_utf8(r.take(block_len)?)
            .map_err(|_| Error::Checkpoint("config block is not UTF-8".into()))?;
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes before hash".into()));
        }

        let mut config = TrainConfig::default();
        let (mut vocab_hash, mut epoch, mut best_metric) = (None, None, None);
        for line in block.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("bad config line `{line}`")))?;
            let bad = || Error::Checkpoint(format!("bad value for `{k}`"));
            match k {
                "vocab_hash" => vocab_hash = Some(u64::from_str_radix(v, 16).map_err(|_| bad())?),
                "epoch" => epoch = Some(v.parse().map_err(|_| bad())?),
                "best_metric" => best_metric = Some(v.parse().map_err(|_| bad())?),
                _ => {
                    if !config
                        .set(k, v)
                        .map_err(|e| Error::Checkpoint(e.to_string()))?
                    {
                        return Err(Error::Checkpoint(format!("unknown config key `{k}`")));
                    }
                }
            }
        }
        let missing = |what: &str| Error::Checkpoint(format!("config block lacks `{what}`"));
        let ckpt = Checkpoint {
            params,
            vocab_hash: vocab_hash.ok_or_else(|| missing("vocab_hash"))?,
            config,
            epoch: epoch.ok_or_else(|| missing("epoch"))?,
            best_metric: best_metric.ok_or_else(|| missing("best_metric"))?,
        };
        ckpt.params
            .check_variant(ckpt.config.variant)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(ckpt)
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
            .ok_or_else(|| Error::Checkpoint("payload is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, ckpt.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
