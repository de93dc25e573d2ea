//! Binary network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "TORICQN\0"
//! version      u32
//! float width  u32      bytes per stored float (8)
//! d            u32
//! filters      u32
//! kernel       u32
//! stride       u32
//! outputs      u32
//! n_dense      u32, then n_dense × u32 widths
//! learn steps  u64
//! episodes     u64
//! adam step    u64
//! adam config  4 × f64 (lr, beta1, beta2, epsilon)
//! n_tensors    u32, then per tensor: rank u32, rank × u32 dims
//! tensors      parameters, Adam m, Adam v, each in declared order, row-major
//! checksum     u64 FNV-1a over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use super::{AdamConfig, AdamState, Architecture, QNetwork, Tensor};
use crate::error::{Error, Result};
use crate::lattice::CodeDistance;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"TORICQN\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const FLOAT_WIDTH: u32 = 8;

/// Everything needed to resume training or to evaluate a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: QNetwork,
    pub optimizer: AdamState,
    pub learning_steps: u64,
    pub episodes: u64,
}

impl Checkpoint {
    /// Fails with a shape error unless the stored network expects d×d input.
    pub fn require_distance(&self, d: CodeDistance) -> Result<()> {
        let stored = self.net.architecture().d;
        if stored != d {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint holds a d={stored} network, run needs d={d}"
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.net.architecture();
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        for v in [
            CHECKPOINT_VERSION,
            FLOAT_WIDTH,
            arch.d.get() as u32,
            arch.conv_filters as u32,
            arch.kernel as u32,
            arch.stride as u32,
            arch.outputs as u32,
            arch.dense.len() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &w in &arch.dense {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        for v in [self.learning_steps, self.episodes, self.optimizer.step] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let c = self.optimizer.config;
        for v in [c.learning_rate, c.beta1, c.beta2, c.epsilon] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let params = self.net.params();
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for t in params {
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &dim in &t.shape {
                out.extend_from_slice(&(dim as u32).to_le_bytes());
            }
        }
        for set in [params, &self.optimizer.m[..], &self.optimizer.v[..]] {
            for t in set {
                for v in &t.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let sum = fnv1a(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    /// Parses a checkpoint; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |reason: &str| Error::Corrupt {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 8 || bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: "checkpoint",
            });
        }
        let mut r = Reader {
            bytes,
            pos: 8,
            path,
        };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 8 + 8 {
            return Err(corrupt("truncated header"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if fnv1a(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
            return Err(corrupt("checksum mismatch"));
        }
        r.bytes = body;

        let float_width = r.u32()?;
        if float_width != FLOAT_WIDTH {
            return Err(corrupt(&format!("unsupported float width {float_width}")));
        }
        let d = CodeDistance::new(r.u32()? as usize).map_err(|_| corrupt("invalid code distance"))?;
        let conv_filters = r.u32()? as usize;
        let kernel = r.u32()? as usize;
        let stride = r.u32()? as usize;
        let outputs = r.u32()? as usize;
        let n_dense = r.u32()? as usize;
        if n_dense > 64 {
            return Err(corrupt("implausible layer count"));
        }
        let dense = (0..n_dense)
            .map(|_| r.u32().map(|w| w as usize))
            .collect::<Result<Vec<_>>>()?;
        let arch = Architecture {
            d,
            conv_filters,
            kernel,
            stride,
            dense,
            outputs,
        };
        if outputs != super::OUTPUTS {
            return Err(corrupt("output width is not 4"));
        }
        arch.validate().map_err(|e| corrupt(&e.to_string()))?;
        let learning_steps = r.u64()?;
        let episodes = r.u64()?;
        let adam_step = r.u64()?;
        let config = AdamConfig {
            learning_rate: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
        };

        let expected = arch.tensor_shapes();
        let n_tensors = r.u32()? as usize;
        if n_tensors != expected.len() {
            return Err(corrupt("tensor count does not match declared layers"));
        }
        let mut shapes = Vec::with_capacity(n_tensors);
        for want in &expected {
            let rank = r.u32()? as usize;
            if rank != want.len() {
                return Err(corrupt("tensor rank does not match declared layers"));
            }
            let shape = (0..rank)
                .map(|_| r.u32().map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            if &shape != want {
                return Err(corrupt("tensor shape does not match declared layers"));
            }
            shapes.push(shape);
        }
        let read_set = |r: &mut Reader| -> Result<Vec<Tensor>> {
            shapes
                .iter()
                .map(|s| {
                    let n = s.iter().product();
                    let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                    Ok(Tensor {
                        shape: s.clone(),
                        data,
                    })
                })
                .collect()
        };
        let params = read_set(&mut r)?;
        let m = read_set(&mut r)?;
        let v = read_set(&mut r)?;
        if r.pos != r.bytes.len() {
            return Err(corrupt("trailing bytes after tensors"));
        }
        Ok(Checkpoint {
            net: QNetwork::from_params(arch, params)?,
            optimizer: AdamState {
                config,
                step: adam_step,
                m,
                v,
            },
            learning_steps,
            episodes,
        })
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = checkpoint.to_bytes();
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes, path)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(Error::Corrupt {
                path: self.path.to_path_buf(),
                reason: "unexpected end of file".into(),
            });
        }
        let out = self.bytes[self.pos..end].try_into().unwrap();
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Batch;
    use crate::rng;

    fn trained(d: usize) -> Checkpoint {
        let arch = Architecture::for_distance(CodeDistance::new(d).unwrap());
        let mut net = QNetwork::random(arch, &mut rng::stream(1, 0)).unwrap();
        let mut optimizer = AdamState::new(AdamConfig::default(), &net);
        let mut batch = Batch::default();
        let n = d * d;
        let x: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        batch.push(&x, 2, -1.0);
        let g = net.gradients(&batch).unwrap();
        optimizer.step(&mut net, &g).unwrap();
        Checkpoint {
            net,
            optimizer,
            learning_steps: 17,
            episodes: 5,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let ck = trained(3);
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.to_bytes(), ck.to_bytes());
        assert_eq!(back.learning_steps, 17);
        assert_eq!(back.episodes, 5);
        assert_eq!(back.optimizer.step, 1);
        let x = vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(
            back.net.forward(&x).unwrap().map(f64::to_bits),
            ck.net.forward(&x).unwrap().map(f64::to_bits)
        );
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let p = Path::new("x.ckpt");
        let mut bytes = trained(3).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes, p), Err(Error::BadMagic { .. })));
        assert!(matches!(Checkpoint::from_bytes(b"hi", p), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn version_and_corruption_errors_are_distinct() {
        let p = Path::new("x.ckpt");
        let good = trained(3).to_bytes();

        let mut v2 = good.clone();
        v2[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&v2, p),
            Err(Error::VersionMismatch { found: 2, .. })
        ));

        let truncated = &good[..good.len() - 100];
        assert!(matches!(Checkpoint::from_bytes(truncated, p), Err(Error::Corrupt { .. })));

        let mut flipped = good.clone();
        let mid = good.len() / 2;
        flipped[mid] ^= 0x10;
        assert!(matches!(Checkpoint::from_bytes(&flipped, p), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn distance_mismatch_is_a_shape_error() {
        let ck = trained(5);
        assert!(ck.require_distance(CodeDistance::new(5).unwrap()).is_ok());
        assert!(matches!(
            ck.require_distance(CodeDistance::new(7).unwrap()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_checkpoint(Path::new("/nonexistent/net.ckpt")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
