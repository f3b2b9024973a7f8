//! Flat binary checkpoints.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! magic    b"GSWINCKP"
//! version  u8 = 1
//! count    u32
//! count × { name_len u32, name utf-8, rank u32, dims u32 × rank, values f32 × numel }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::gswin::Gswin;
use crate::error::{Error, Result};
use crate::tensor::numel;

pub const MAGIC: &[u8; 8] = b"GSWINCKP";
pub const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

pub fn write_entries(mut w: impl Write, entries: &[CheckpointEntry]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for e in entries {
        w.write_all(&(e.name.len() as u32).to_le_bytes())?;
        w.write_all(e.name.as_bytes())?;
        w.write_all(&(e.shape.len() as u32).to_le_bytes())?;
        for &d in &e.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in &e.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_entries(mut r: impl Read) -> Result<Vec<CheckpointEntry>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)
        .map_err(|_| Error::Checkpoint("missing version".into()))?;
    if version[0] != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", version[0])));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|_| Error::Checkpoint("truncated name".into()))?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("name is not utf-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = numel(&shape);
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)
            .map_err(|_| Error::Checkpoint(format!("truncated values for {name}")))?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        out.push(CheckpointEntry { name, shape, values });
    }
    Ok(out)
}

pub fn save(model: &Gswin, path: &Path) -> Result<()> {
    let entries: Vec<CheckpointEntry> = model
        .parameters()
        .iter()
        .map(|p| CheckpointEntry {
            name: p.name().to_string(),
            shape: p.shape().to_vec(),
            values: p.tensor().data().iter().map(|&v| v as f32).collect(),
        })
        .collect();
    write_entries(BufWriter::new(File::create(path)?), &entries)
}

/// Overwrites the model's parameters from a checkpoint. Every parameter must
/// be present with a matching shape, and the file may hold nothing else.
pub fn load_into(model: &Gswin, path: &Path) -> Result<()> {
    let entries = read_entries(BufReader::new(File::open(path)?))?;
    let params = model.parameters();
    if entries.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "{} entries for a model with {} parameters",
            entries.len(),
            params.len()
        )));
    }
    for p in params {
        let e = entries
            .iter()
            .find(|e| e.name == p.name())
            .ok_or_else(|| Error::Checkpoint(format!("missing {}", p.name())))?;
        if e.shape != p.shape() {
            return Err(Error::Checkpoint(format!("{}: shape {:?}, model has {:?}", e.name, e.shape, p.shape())));
        }
        let mut d = p.tensor().data_mut();
        d.iter_mut().zip(&e.values).for_each(|(dst, &v)| *dst = f64::from(v));
    }
    Ok(())
}
