//! Binary columnar sample files.
//!
//! Layout (little-endian): magic `CCMB`, version `u32`, step `u32`, norm
//! kind `u32` (0 Engel, 1 filiform), `a`, `p`, `δ`, `γ_δ`, `C̃` as `f64`
//! (NaN when unperturbed), seed `u64`, point count `u64`, then one column of
//! `count` values per coordinate.

use super::{MeasureSpec, SampleBatch};
use crate::error::{CarnotError, Result};
use crate::norms::NormKind;
use std::io::{Read, Write};
use std::path::Path;

pub const BATCH_MAGIC: &[u8; 4] = b"CCMB";
pub const BATCH_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchHeader {
    pub version: u32,
    pub step: u32,
    pub kind: u32,
    pub a: f64,
    pub p: f64,
    pub delta: f64,
    pub gamma: f64,
    pub c_tilde: f64,
    pub seed: u64,
    pub count: u64,
}

impl BatchHeader {
    pub fn for_spec(spec: &MeasureSpec, batch: &SampleBatch) -> Self {
        let (delta, gamma, c_tilde) = match &spec.perturbation {
            Some(w) => (w.delta, w.gamma, w.c_tilde),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        BatchHeader {
            version: BATCH_VERSION,
            step: spec.kind.step() as u32,
            kind: match spec.kind {
                NormKind::Engel => 0,
                NormKind::Filiform(_) => 1,
            },
            a: spec.a,
            p: spec.p,
            delta,
            gamma,
            c_tilde,
            seed: batch.seed,
            count: batch.len() as u64,
        }
    }
}

pub fn write_batch(path: &Path, spec: &MeasureSpec, batch: &SampleBatch) -> Result<()> {
    let h = BatchHeader::for_spec(spec, batch);
    let mut buf = Vec::with_capacity(72 + batch.data.len() * 8);
    buf.extend_from_slice(BATCH_MAGIC);
    for v in [h.version, h.step, h.kind] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [h.a, h.p, h.delta, h.gamma, h.c_tilde] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&h.seed.to_le_bytes());
    buf.extend_from_slice(&h.count.to_le_bytes());
    for k in 0..batch.dimension {
        for x in batch.points() {
            buf.extend_from_slice(&x[k].to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_batch(path: &Path) -> Result<(BatchHeader, SampleBatch)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |msg: &str| CarnotError::Io(format!("{}: {msg}", path.display()));
    if bytes.len() < 72 || &bytes[..4] != BATCH_MAGIC {
        return Err(bad("not a sample batch file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let h = BatchHeader {
        version: u32_at(4),
        step: u32_at(8),
        kind: u32_at(12),
        a: f64_at(16),
        p: f64_at(24),
        delta: f64_at(32),
        gamma: f64_at(40),
        c_tilde: f64_at(48),
        seed: u64_at(56),
        count: u64_at(64),
    };
    if h.version != BATCH_VERSION {
        return Err(bad(&format!("unsupported version {}", h.version)));
    }
    let d = h.step as usize + 1;
    let count = h.count as usize;
    if bytes.len() != 72 + d * count * 8 {
        return Err(bad("length does not match header"));
    }
    let mut data = vec![0.0; d * count];
    for k in 0..d {
        for i in 0..count {
            data[i * d + k] = f64_at(72 + (k * count + i) * 8);
        }
    }
    Ok((h.clone(), SampleBatch::from_points(d, data, h.seed)))
}

/// CSV mirror: header `x1,…,x{n+1}`, one point per row.
pub fn write_batch_csv(path: &Path, batch: &SampleBatch) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CarnotError::Io(e.to_string()))?;
    let header: Vec<String> = (1..=batch.dimension).map(|k| format!("x{k}")).collect();
    w.write_record(&header).map_err(|e| CarnotError::Io(e.to_string()))?;
    for x in batch.points() {
        w.write_record(x.iter().map(|v| format!("{v:e}")))
            .map_err(|e| CarnotError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
