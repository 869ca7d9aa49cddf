//! Versioned binary snapshot of a brain and its learned assemblies.
//!
//! All integers are little-endian; floats are stored as their IEEE-754 bit
//! patterns, so a round trip is bit-exact.
//!
//! ```text
//! magic     8 bytes  "ASMBSNAP"
//! version   u32      1
//! config    n u64, k u64, p f64, beta f64, seed u64
//! area      k u64, inhibited u8, |firing| u64, firing u32*, n u64, ever_fired u8*
//! weights   recurrent block, then fiber block:
//!           n_src u64, n_tgt u64, nnz u64, offsets u64*(n_tgt+1),
//!           sources u32*nnz, weights f64*nnz, baseline f64*n_tgt
//! records   len u64, UTF-8 JSON array of assembly records (len 0: none)
//! ```

use std::fs;
use std::path::Path;

use crate::config::ModelConfig;
use crate::dynamics::Area;
use crate::error::{Error, Result};
use crate::graph::{Fiber, SparseWeights};
use crate::learning::{AssemblyRecord, Brain, TrainedModel};

pub const MAGIC: &[u8; 8] = b"ASMBSNAP";
pub const VERSION: u32 = 1;

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
        self.u64(v.to_bits());
    }
    fn weights(&mut self, w: &SparseWeights) {
        self.u64(w.n_src() as u64);
        self.u64(w.n_tgt() as u64);
        self.u64(w.edge_count() as u64);
        w.offsets().iter().for_each(|&o| self.u64(o as u64));
        w.sources().iter().for_each(|&s| self.u32(s));
        w.weights().iter().for_each(|&x| self.f64(x));
        w.baselines().iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated snapshot".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&l| l <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("implausible length {v}")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn weights(&mut self) -> Result<SparseWeights> {
        let n_src = self.len()?;
        let n_tgt = self.len()?;
        let nnz = self.len()?;
        let offsets = (0..=n_tgt)
            .map(|_| self.len())
            .collect::<Result<Vec<_>>>()?;
        let sources = (0..nnz).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let weights = (0..nnz).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        let baseline = (0..n_tgt).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        SparseWeights::from_raw_parts(n_src, n_tgt, offsets, sources, weights, baseline)
    }
}

pub fn encode(brain: &Brain, assemblies: &[AssemblyRecord]) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    let c = &brain.config;
    w.u64(c.n as u64);
    w.u64(c.k as u64);
    w.f64(c.p);
    w.f64(c.beta);
    w.u64(c.seed);
    let area = &brain.area;
    w.u64(area.k() as u64);
    w.u8(area.is_inhibited() as u8);
    w.u64(area.firing().len() as u64);
    area.firing().iter().for_each(|&i| w.u32(i));
    w.u64(area.ever_fired().len() as u64);
    area.ever_fired().iter().for_each(|&f| w.u8(f as u8));
    w.weights(&area.recurrent);
    w.weights(&brain.fiber.weights);
    if assemblies.is_empty() {
        w.u64(0);
    } else {
        let json = serde_json::to_vec(assemblies).expect("assembly records serialize");
        w.u64(json.len() as u64);
        w.0.extend_from_slice(&json);
    }
    w.0
}

pub fn decode(bytes: &[u8]) -> Result<(Brain, Vec<AssemblyRecord>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("not an assembly snapshot (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported snapshot version {version}"
        )));
    }
    let config = ModelConfig {
        n: r.len()?,
        k: r.len()?,
        p: r.f64()?,
        beta: r.f64()?,
        seed: r.u64()?,
    };
    let k = r.len()?;
    let inhibited = r.u8()? != 0;
    let firing_len = r.len()?;
    let firing = (0..firing_len)
        .map(|_| r.u32())
        .collect::<Result<Vec<_>>>()?;
    let n = r.len()?;
    let ever_fired = (0..n)
        .map(|_| r.u8().map(|b| b != 0))
        .collect::<Result<Vec<_>>>()?;
    let recurrent = r.weights()?;
    let fiber = Fiber {
        weights: r.weights()?,
    };
    let json_len = r.len()?;
    let assemblies = if json_len == 0 {
        Vec::new()
    } else {
        serde_json::from_slice(r.take(json_len)?)
            .map_err(|e| Error::Format(format!("assembly records: {e}")))?
    };
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after snapshot".into()));
    }
    let area = Area::from_parts(k, recurrent, firing, inhibited, ever_fired)?;
    if fiber.n_tgt() != area.n() {
        return Err(Error::Format("fiber does not feed the area".into()));
    }
    Ok((
        Brain {
            config,
            area,
            fiber,
        },
        assemblies,
    ))
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    fs::write(path, encode(&model.brain, &model.assemblies))?;
    Ok(())
}

/// Loads a model; training traces are not part of the snapshot.
pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let (brain, assemblies) = decode(&fs::read(path)?)?;
    Ok(TrainedModel {
        brain,
        assemblies,
        traces: Vec::new(),
    })
}
