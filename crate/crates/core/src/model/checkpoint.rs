//! Versioned little-endian binary checkpoint.
//!
//! ```text
//! magic      8 bytes  "CL4CVRCK"
//! version    u32      1
//! fields     u32 F, then F × u32 vocabulary sizes
//! dim        u32 K
//! towers     u32 count, then count × u32 widths
//! encoder    u32 count, then count × u32 widths
//! seeds      5 × u64  master, init, shuffle, mask, data
//! optimizer  f64 learning rate, f64 epsilon
//! tensors    parameters then Adagrad accumulators, each group in order
//!            embedding fields, CTR tower, CVR tower, encoder (weight then
//!            bias per layer); every tensor is u32 rows, u32 cols, f64 data
//! checksum   u64 FNV-1a of all preceding bytes
//! ```
//!
//! Floats are stored by bit pattern, so a decode/encode cycle is exact.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{EmbeddingConfig, Mlp, ModelConfig, ModelParams};
use crate::rng::fnv1a64;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CL4CVRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CheckpointSeeds {
    pub master: u64,
    pub init: u64,
    pub shuffle: u64,
    pub mask: u64,
    pub data: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub accumulators: ModelParams,
    pub seeds: CheckpointSeeds,
    pub learning_rate: f64,
    pub epsilon: f64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn tensor(&mut self, rows: usize, cols: usize, data: &[f64]) {
        self.u32(rows);
        self.u32(cols);
        data.iter().for_each(|&v| self.f64(v));
    }
    fn params(&mut self, p: &ModelParams) {
        for m in &p.embeddings {
            self.tensor(m.rows(), m.cols(), m.as_slice());
        }
        for mlp in [&p.ctr_tower, &p.cvr_tower, &p.encoder] {
            for l in &mlp.layers {
                self.tensor(l.weight.rows(), l.weight.cols(), l.weight.as_slice());
                self.tensor(1, l.bias.len(), &l.bias);
            }
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(alloc::format!("truncated at byte {}", self.at)))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        self.u64().map(f64::from_bits)
    }
    fn widths(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()?;
        (0..n).map(|_| self.u32()).collect()
    }
    fn tensor_into(&mut self, rows: usize, cols: usize, dst: &mut [f64]) -> Result<()> {
        let (r, c) = (self.u32()?, self.u32()?);
        if (r, c) != (rows, cols) {
            return Err(Error::Checkpoint(alloc::format!(
                "tensor shape {r}x{c} does not match expected {rows}x{cols}"
            )));
        }
        for v in dst.iter_mut() {
            *v = self.f64()?;
        }
        Ok(())
    }
    fn params_into(&mut self, p: &mut ModelParams) -> Result<()> {
        for m in &mut p.embeddings {
            let (r, c) = m.shape();
            self.tensor_into(r, c, m.as_mut_slice())?;
        }
        for mlp in [&mut p.ctr_tower, &mut p.cvr_tower, &mut p.encoder] {
            read_mlp(self, mlp)?;
        }
        Ok(())
    }
}

fn read_mlp(r: &mut Reader<'_>, mlp: &mut Mlp) -> Result<()> {
    for l in &mut mlp.layers {
        let (rows, cols) = l.weight.shape();
        r.tensor_into(rows, cols, l.weight.as_mut_slice())?;
        let n = l.bias.len();
        r.tensor_into(1, n, &mut l.bias)?;
    }
    Ok(())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.params.config();
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION as usize);
        w.u32(cfg.embedding.field_count());
        cfg.embedding.vocab_sizes.iter().for_each(|&v| w.u32(v as usize));
        w.u32(cfg.embedding.dim_per_field);
        w.u32(cfg.tower_widths.len());
        cfg.tower_widths.iter().for_each(|&v| w.u32(v));
        w.u32(cfg.encoder_widths.len());
        cfg.encoder_widths.iter().for_each(|&v| w.u32(v));
        let s = self.seeds;
        for v in [s.master, s.init, s.shuffle, s.mask, s.data] {
            w.u64(v);
        }
        w.f64(self.learning_rate);
        w.f64(self.epsilon);
        w.params(&self.params);
        w.params(&self.accumulators);
        let sum = fnv1a64(&w.0);
        w.u64(sum);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < CHECKPOINT_MAGIC.len() + 4 + 8 {
            return Err(Error::Checkpoint("file too short".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if fnv1a64(body) != stored {
            return Err(Error::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { bytes: body, at: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()? as u32;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(alloc::format!("unsupported version {version}")));
        }
        let f = r.u32()?;
        let vocab = (0..f).map(|_| r.u32().map(|v| v as u32)).collect::<Result<Vec<_>>>()?;
        let k = r.u32()?;
        let towers = r.widths()?;
        let encoder = r.widths()?;
        let config = ModelConfig::new(EmbeddingConfig::new(vocab, k)?, towers, encoder)?;
        let seeds = CheckpointSeeds {
            master: r.u64()?,
            init: r.u64()?,
            shuffle: r.u64()?,
            mask: r.u64()?,
            data: r.u64()?,
        };
        let learning_rate = r.f64()?;
        let epsilon = r.f64()?;
        let mut params = ModelParams::zeros(config)?;
        r.params_into(&mut params)?;
        let mut accumulators = params.zeros_like();
        r.params_into(&mut accumulators)?;
        if r.at != body.len() {
            return Err(Error::Checkpoint("trailing bytes after tensors".into()));
        }
        Ok(Checkpoint {
            params,
            accumulators,
            seeds,
            learning_rate,
            epsilon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;

    fn sample_checkpoint() -> Checkpoint {
        let cfg = ModelConfig::new(EmbeddingConfig::new(vec![3, 4], 2).unwrap(), vec![5], vec![4, 3]).unwrap();
        let params = ModelParams::init(cfg, &mut rng::stream(9, rng::INIT_STREAM)).unwrap();
        let mut accumulators = params.zeros_like();
        accumulators.embeddings[1].set(2, 1, 0.125);
        Checkpoint {
            params,
            accumulators,
            seeds: CheckpointSeeds {
                master: 9,
                init: 1,
                shuffle: 2,
                mask: 3,
                data: u64::MAX,
            },
            learning_rate: 0.05,
            epsilon: 1e-8,
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let ck = sample_checkpoint();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = sample_checkpoint().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint(_))));
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
    }
}
