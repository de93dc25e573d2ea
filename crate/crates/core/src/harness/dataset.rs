//! Hidden-state dataset files.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic    8 bytes "TORICDS\0"
//! version  u32
//! d        u32
//! p        f64
//! count    u64
//! seed     u64
//! samples  count × ⌈2d²/8⌉ bytes: top bits then left bits, row-major, LSB first
//! ```
//!
//! Sample `i` is `HiddenState::random(d, p, rng::stream(seed, i))`, so a file
//! is regenerable bit-exactly from its header.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{CodeDistance, HiddenState};
use crate::rng;

pub const DATASET_MAGIC: [u8; 8] = *b"TORICDS\0";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub d: CodeDistance,
    pub p: f64,
    pub seed: u64,
    pub states: Vec<HiddenState>,
}

impl Dataset {
    /// Samples `count` states from the per-sample streams of `seed`.
    pub fn generate(d: CodeDistance, p: f64, count: u64, seed: u64) -> Result<Self> {
        let states = (0..count)
            .map(|i| HiddenState::random(d, p, &mut rng::stream(seed, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { d, p, seed, states })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let per = bytes_per_sample(self.d);
        let mut out = Vec::with_capacity(HEADER_LEN + per * self.states.len());
        out.extend_from_slice(&DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.d.get() as u32).to_le_bytes());
        out.extend_from_slice(&self.p.to_le_bytes());
        out.extend_from_slice(&(self.states.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for s in &self.states {
            let mut packed = vec![0u8; per];
            for (i, &bit) in s.top_bits().iter().chain(s.left_bits()).enumerate() {
                if bit {
                    packed[i / 8] |= 1 << (i % 8);
                }
            }
            out.extend_from_slice(&packed);
        }
        out
    }

    /// Parses a dataset; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |reason: String| Error::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < 8 || bytes[..8] != DATASET_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: "dataset",
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(corrupt("truncated header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != DATASET_VERSION {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                found: version,
                expected: DATASET_VERSION,
            });
        }
        let d = CodeDistance::new(u32_at(12) as usize).map_err(|e| corrupt(e.to_string()))?;
        let p = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let count = u64_at(24);
        let seed = u64_at(32);
        let per = bytes_per_sample(d);
        let body = &bytes[HEADER_LEN..];
        if (body.len() as u64) != count.saturating_mul(per as u64) {
            return Err(corrupt(format!(
                "header declares {count} samples but body holds {} bytes",
                body.len()
            )));
        }
        let n = d.get() * d.get();
        let states = body
            .chunks_exact(per)
            .map(|chunk| {
                let bit = |i: usize| chunk[i / 8] >> (i % 8) & 1 == 1;
                HiddenState::from_bits(d, (0..n).map(bit).collect(), (n..2 * n).map(bit).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { d, p, seed, states })
    }
}

fn bytes_per_sample(d: CodeDistance) -> usize {
    (2 * d.get() * d.get()).div_ceil(8)
}

/// Writes `count` fresh samples to `path` and returns them.
pub fn generate_dataset(d: CodeDistance, p: f64, count: u64, seed: u64, path: &Path) -> Result<Dataset> {
    let ds = Dataset::generate(d, p, count, seed)?;
    write_dataset(&ds, path)?;
    Ok(ds)
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, ds.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_bytes(&bytes, path)
}
