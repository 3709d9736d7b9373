//! Versioned binary chain checkpoints.
//!
//! Checkpoints are written at bin boundaries only, so the accumulator
//! state reduces to the completed bin means; together with the engine
//! configurations and the RNG position this reproduces the uninterrupted
//! run exactly.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! offset size  field
//! 0      8     magic "BQMCCKPT"
//! 8      4     format version (u32, currently 1)
//! 12     32    chain fingerprint (SHA-256 of the chain identity)
//! 44     1     payload kind: 1 scalar estimators, 2 replica correlators
//! 45     8     completed bins (u64)
//! 53     32    RNG seed
//! 85     16    RNG word position (u128)
//! 101    4     configuration count (u32)
//! ```
//!
//! followed per configuration by `beta: f64`, `n: u64`, `n2: u64`,
//! `state` (length-prefixed i8 array), `ops` (length-prefixed u32 array),
//! and then the payload: for kind 1 `n_corr: u32`, `n_bins: u64` and the
//! five bin-mean arrays (|m|, m^2, m^4, operator count, correlations);
//! for kind 2 `n_rep: u32`, `n_sites: u32`, `n_bins: u64` and the on-site
//! and momentum bin arrays. Files are written to a temporary sibling and
//! renamed into place.

use std::fs;
use std::path::Path;

use crate::error::CliError;

pub const MAGIC: [u8; 8] = *b"BQMCCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSnapshot {
    pub beta: f64,
    pub n: u64,
    pub n2: u64,
    pub state: Vec<i8>,
    pub ops: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Estimators {
        n_corr: u32,
        bins_abs_m: Vec<f64>,
        bins_m2: Vec<f64>,
        bins_m4: Vec<f64>,
        bins_n: Vec<f64>,
        bins_corr: Vec<f64>,
    },
    Replica {
        n_rep: u32,
        n_sites: u32,
        bins_onsite: Vec<f64>,
        bins_momentum: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCheckpoint {
    pub fingerprint: [u8; 32],
    pub completed_bins: u64,
    pub rng_seed: [u8; 32],
    pub rng_word_pos: u128,
    pub configs: Vec<ConfigSnapshot>,
    pub payload: Payload,
}

fn put_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
}

impl ChainCheckpoint {
    fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&self.fingerprint);
        buf.push(match self.payload {
            Payload::Estimators { .. } => 1,
            Payload::Replica { .. } => 2,
        });
        buf.extend_from_slice(&self.completed_bins.to_le_bytes());
        buf.extend_from_slice(&self.rng_seed);
        buf.extend_from_slice(&self.rng_word_pos.to_le_bytes());
        buf.extend_from_slice(&(self.configs.len() as u32).to_le_bytes());
        for cfg in &self.configs {
            buf.extend_from_slice(&cfg.beta.to_bits().to_le_bytes());
            buf.extend_from_slice(&cfg.n.to_le_bytes());
            buf.extend_from_slice(&cfg.n2.to_le_bytes());
            buf.extend_from_slice(&(cfg.state.len() as u64).to_le_bytes());
            buf.extend(cfg.state.iter().map(|&s| s as u8));
            buf.extend_from_slice(&(cfg.ops.len() as u64).to_le_bytes());
            for op in &cfg.ops {
                buf.extend_from_slice(&op.to_le_bytes());
            }
        }
        match &self.payload {
            Payload::Estimators {
                n_corr,
                bins_abs_m,
                bins_m2,
                bins_m4,
                bins_n,
                bins_corr,
            } => {
                buf.extend_from_slice(&n_corr.to_le_bytes());
                for arr in [bins_abs_m, bins_m2, bins_m4, bins_n, bins_corr] {
                    put_f64s(&mut buf, arr);
                }
            }
            Payload::Replica {
                n_rep,
                n_sites,
                bins_onsite,
                bins_momentum,
            } => {
                buf.extend_from_slice(&n_rep.to_le_bytes());
                buf.extend_from_slice(&n_sites.to_le_bytes());
                put_f64s(&mut buf, bins_onsite);
                put_f64s(&mut buf, bins_momentum);
            }
        }
        buf
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.encode()).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))?;
        Ok(())
    }

    /// Load and validate against the fingerprint the caller derived from
    /// its own configuration.
    pub fn load(path: &Path, expected_fingerprint: &[u8; 32]) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        let fail = |reason: &str| CliError::Checkpoint {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut r = Reader { bytes: &bytes, pos: 0 };

        if r.take(8).ok_or_else(|| fail("truncated header"))? != MAGIC {
            return Err(fail("bad magic"));
        }
        let version = r.u32().ok_or_else(|| fail("truncated header"))?;
        if version != VERSION {
            return Err(fail(&format!(
                "format version {version} unsupported (expected {VERSION})"
            )));
        }
        let mut fingerprint = [0u8; 32];
        fingerprint.copy_from_slice(r.take(32).ok_or_else(|| fail("truncated header"))?);
        if &fingerprint != expected_fingerprint {
            return Err(fail("fingerprint does not match this configuration"));
        }
        let kind = r.u8().ok_or_else(|| fail("truncated header"))?;
        let completed_bins = r.u64().ok_or_else(|| fail("truncated header"))?;
        let mut rng_seed = [0u8; 32];
        rng_seed.copy_from_slice(r.take(32).ok_or_else(|| fail("truncated header"))?);
        let rng_word_pos = r.u128().ok_or_else(|| fail("truncated header"))?;

        let n_cfg = r.u32().ok_or_else(|| fail("truncated body"))?;
        let mut configs = Vec::with_capacity(n_cfg as usize);
        for _ in 0..n_cfg {
            let beta = r.f64().ok_or_else(|| fail("truncated configuration"))?;
            let n = r.u64().ok_or_else(|| fail("truncated configuration"))?;
            let n2 = r.u64().ok_or_else(|| fail("truncated configuration"))?;
            let n_state = r.u64().ok_or_else(|| fail("truncated configuration"))? as usize;
            let state: Vec<i8> = r
                .take(n_state)
                .ok_or_else(|| fail("truncated configuration"))?
                .iter()
                .map(|&b| b as i8)
                .collect();
            let n_ops = r.u64().ok_or_else(|| fail("truncated configuration"))? as usize;
            let mut ops = Vec::with_capacity(n_ops);
            for _ in 0..n_ops {
                ops.push(r.u32().ok_or_else(|| fail("truncated configuration"))?);
            }
            configs.push(ConfigSnapshot {
                beta,
                n,
                n2,
                state,
                ops,
            });
        }

        let payload = match kind {
            1 => {
                let n_corr = r.u32().ok_or_else(|| fail("truncated payload"))?;
                let mut arrays = Vec::with_capacity(5);
                for _ in 0..5 {
                    arrays.push(r.f64s().ok_or_else(|| fail("truncated payload"))?);
                }
                let bins_corr = arrays.pop().unwrap();
                let bins_n = arrays.pop().unwrap();
                let bins_m4 = arrays.pop().unwrap();
                let bins_m2 = arrays.pop().unwrap();
                let bins_abs_m = arrays.pop().unwrap();
                Payload::Estimators {
                    n_corr,
                    bins_abs_m,
                    bins_m2,
                    bins_m4,
                    bins_n,
                    bins_corr,
                }
            }
            2 => {
                let n_rep = r.u32().ok_or_else(|| fail("truncated payload"))?;
                let n_sites = r.u32().ok_or_else(|| fail("truncated payload"))?;
                let bins_onsite = r.f64s().ok_or_else(|| fail("truncated payload"))?;
                let bins_momentum = r.f64s().ok_or_else(|| fail("truncated payload"))?;
                Payload::Replica {
                    n_rep,
                    n_sites,
                    bins_onsite,
                    bins_momentum,
                }
            }
            other => return Err(fail(&format!("unknown payload kind {other}"))),
        };
        if r.pos != bytes.len() {
            return Err(fail("trailing bytes"));
        }

        Ok(ChainCheckpoint {
            fingerprint,
            completed_bins,
            rng_seed,
            rng_word_pos,
            configs,
            payload,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(len)?;
        let slice = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(slice)
    }

    fn u8(&mut self) -> Option<u8> {
        Some(self.take(1)?[0])
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Option<u128> {
        Some(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_bits(self.u64()?))
    }

    fn f64s(&mut self) -> Option<Vec<f64>> {
        let len = self.u64()? as usize;
        let mut out = Vec::with_capacity(len.min(1 << 20));
        for _ in 0..len {
            out.push(self.f64()?);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample() -> ChainCheckpoint {
        ChainCheckpoint {
            fingerprint: [7; 32],
            completed_bins: 5,
            rng_seed: [9; 32],
            rng_word_pos: 123456789012345678901234567890u128,
            configs: vec![ConfigSnapshot {
                beta: 8.0,
                n: 3,
                n2: 2,
                state: vec![1, -1, -1, 1],
                ops: vec![0, 5, 6, 0, 7],
            }],
            payload: Payload::Estimators {
                n_corr: 0,
                bins_abs_m: vec![0.5, 0.25],
                bins_m2: vec![0.3, 0.2],
                bins_m4: vec![0.1, 0.05],
                bins_n: vec![3.0, 2.5],
                bins_corr: vec![],
            },
        }
    }

    #[test]
    fn round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("chain.ckpt");
        let ck = sample();
        ck.save(&path).unwrap();
        let back = ChainCheckpoint::load(&path, &[7; 32]).unwrap();
        assert_eq!(ck, back);
    }

    #[test]
    fn replica_payload_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("replica.ckpt");
        let mut ck = sample();
        ck.payload = Payload::Replica {
            n_rep: 4,
            n_sites: 4,
            bins_onsite: vec![1.0; 32],
            bins_momentum: vec![0.5; 32],
        };
        ck.save(&path).unwrap();
        let back = ChainCheckpoint::load(&path, &[7; 32]).unwrap();
        assert_eq!(ck, back);
    }

    #[test]
    fn fingerprint_mismatch_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("chain.ckpt");
        sample().save(&path).unwrap();
        let err = ChainCheckpoint::load(&path, &[8; 32]).unwrap_err();
        assert!(matches!(err, CliError::Checkpoint { .. }));
    }

    #[test]
    fn corrupt_files_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("chain.ckpt");
        let ck = sample();
        ck.save(&path).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            ChainCheckpoint::load(&path, &[7; 32]),
            Err(CliError::Checkpoint { .. })
        ));

        std::fs::write(&path, b"NOTMAGIC").unwrap();
        assert!(matches!(
            ChainCheckpoint::load(&path, &[7; 32]),
            Err(CliError::Checkpoint { .. })
        ));
    }
}
