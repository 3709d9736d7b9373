//! Diagonal insert/remove sweep through the operator string.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Couplings, OpCode, OpKind, SseConfig};
use crate::lattice::LatticeSpec;

/// One pass over all M slots in order, propagating the basis state past
/// off-diagonal operators in a scratch copy (the stored slice-0 state is
/// untouched).
///
/// At a null slot, propose a class (Ising with probability `2 N_I J / C`),
/// then a bond uniformly within the class, auto-reject when the spins are
/// incompatible (Ising needs parallel, Heisenberg antiparallel), and accept
/// the insertion with `min(beta C / 2 / (M - n), 1)`. At a diagonal slot,
/// remove with `min((M - n + 1) / (beta C / 2), 1)`.
pub fn diagonal_sweep(
    cfg: &mut SseConfig,
    lat: &LatticeSpec,
    coup: &Couplings,
    rng: &mut ChaCha8Rng,
    state_scratch: &mut Vec<i8>,
) {
    state_scratch.clear();
    state_scratch.extend_from_slice(&cfg.state);

    let m = cfg.ops.len();
    let half_beta_c = 0.5 * cfg.beta * coup.c_norm(lat);
    let p_ising = coup.p_ising(lat);
    let n_intra = lat.n_intra_total();

    for p in 0..m {
        let op = cfg.ops[p];
        if op.is_null() {
            let (bond_idx, kind) = if rng.gen::<f64>() < p_ising {
                (rng.gen_range(0..n_intra), OpKind::IsingDiag)
            } else {
                (n_intra + rng.gen_range(0..lat.n_inter), OpKind::HeisDiag)
            };
            let bond = lat.bonds[bond_idx];
            let s1 = state_scratch[bond.site1 as usize];
            let s2 = state_scratch[bond.site2 as usize];
            let compatible = match kind {
                OpKind::IsingDiag => s1 == s2,
                _ => s1 != s2,
            };
            if compatible {
                let p_insert = half_beta_c / (m - cfg.n) as f64;
                if p_insert >= 1.0 || rng.gen::<f64>() < p_insert {
                    cfg.ops[p] = OpCode::new(bond_idx, kind);
                    cfg.n += 1;
                }
            }
        } else if op.kind() == OpKind::HeisOffdiag {
            let bond = lat.bonds[op.bond()];
            state_scratch[bond.site1 as usize] = -state_scratch[bond.site1 as usize];
            state_scratch[bond.site2 as usize] = -state_scratch[bond.site2 as usize];
        } else {
            let p_remove = if half_beta_c > 0.0 {
                (m - cfg.n + 1) as f64 / half_beta_c
            } else {
                1.0
            };
            if p_remove >= 1.0 || rng.gen::<f64>() < p_remove {
                cfg.ops[p] = OpCode::NULL;
                cfg.n -= 1;
            }
        }
    }

    debug_assert_eq!(state_scratch.as_slice(), cfg.state.as_slice());
}
