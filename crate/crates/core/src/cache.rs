//! Comparison cache: both neighbor tables of a model pair under one metric.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic    8 bytes  "LNSCACHE"
//! version  u32
//! meta_len u32
//! meta     meta_len bytes of JSON (CacheHeader)
//! table A  n·k_max u32 indices, then n·k_max f64 distances
//! table B  same
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::NeighborTable;

pub const MAGIC: &[u8; 8] = b"LNSCACHE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format_version: u32,
    pub dataset: String,
    pub model_a: String,
    pub model_b: String,
    pub metric: String,
    pub k_max: usize,
    pub objects: usize,
}

pub fn write_comparison_cache<W: Write>(mut out: W, a: &NeighborTable, b: &NeighborTable) -> Result<()> {
    if a.dataset != b.dataset || a.metric != b.metric || a.k_max != b.k_max || a.len() != b.len() {
        return Err(Error::Mismatch("cached tables must share dataset, metric, k_max and size".into()));
    }
    let header = CacheHeader {
        format_version: FORMAT_VERSION,
        dataset: a.dataset.clone(),
        model_a: a.model.clone(),
        model_b: b.model.clone(),
        metric: a.metric.clone(),
        k_max: a.k_max,
        objects: a.len(),
    };
    let meta = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(meta.len() as u32).to_le_bytes())?;
    out.write_all(&meta)?;
    for t in [a, b] {
        for i in &t.indices {
            out.write_all(&i.to_le_bytes())?;
        }
        for d in &t.distances {
            out.write_all(&d.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_comparison_cache<R: Read>(mut input: R) -> Result<(CacheHeader, NeighborTable, NeighborTable)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| Error::CorruptCache("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::CorruptCache("not a comparison cache".into()));
    }
    let version = read_u32(&mut input)?;
    if version != FORMAT_VERSION {
        return Err(Error::CacheVersion { found: version, expected: FORMAT_VERSION });
    }
    let meta_len = read_u32(&mut input)? as usize;
    let mut meta = vec![0u8; meta_len];
    input.read_exact(&mut meta).map_err(|_| Error::CorruptCache("truncated metadata".into()))?;
    let header: CacheHeader = serde_json::from_slice(&meta)?;
    if header.format_version != version {
        return Err(Error::CacheVersion { found: header.format_version, expected: FORMAT_VERSION });
    }

    let len = header.objects * header.k_max;
    let mut read_table = |model: &str| -> Result<NeighborTable> {
        let mut buf = vec![0u8; len * 4];
        input.read_exact(&mut buf).map_err(|_| Error::CorruptCache("truncated indices".into()))?;
        let indices = buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
        let mut buf = vec![0u8; len * 8];
        input.read_exact(&mut buf).map_err(|_| Error::CorruptCache("truncated distances".into()))?;
        let distances = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        NeighborTable::from_parts(&header.dataset, model, &header.metric, header.k_max, indices, distances)
            .map_err(|e| Error::CorruptCache(e.to_string()))
    };
    let a = read_table(&header.model_a)?;
    let b = read_table(&header.model_b)?;
    if input.read(&mut [0u8; 1])? != 0 {
        return Err(Error::CorruptCache("trailing bytes".into()));
    }
    Ok((header, a, b))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b).map_err(|_| Error::CorruptCache("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

pub fn save_comparison_cache(path: impl AsRef<Path>, a: &NeighborTable, b: &NeighborTable) -> Result<()> {
    write_comparison_cache(BufWriter::new(File::create(path)?), a, b)
}

pub fn load_comparison_cache(path: impl AsRef<Path>) -> Result<(CacheHeader, NeighborTable, NeighborTable)> {
    read_comparison_cache(BufReader::new(File::open(path)?))
}
