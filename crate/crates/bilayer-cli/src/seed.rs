//! Deterministic per-chain seed derivation.
//!
//! Seeds are `SHA-256(domain tag, master seed, L, g bits, chain index)`,
//! so extending a sweep grid or adding chains never perturbs the streams
//! of existing points.

use sha2::{Digest, Sha256};

pub fn chain_seed(master: u64, l: u32, g: f64, chain: u32) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"bilayer-sse-chain-v1");
    h.update(master.to_le_bytes());
    h.update(l.to_le_bytes());
    h.update(g.to_bits().to_le_bytes());
    h.update(chain.to_le_bytes());
    h.finalize().into()
}
