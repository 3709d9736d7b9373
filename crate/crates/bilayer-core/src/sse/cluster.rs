//! Joint Ising/Heisenberg cluster update.
//!
//! Legs are partitioned into clusters by two deterministic rules: any leg of
//! an Ising vertex drags the other three legs into its cluster, while a leg
//! of a Heisenberg vertex drags only its neighbor on the same time side
//! (lower pair together, upper pair together). Legs joined by a time link
//! always share a cluster because they carry the same world-line segment.
//!
//! Each cluster is flipped with probability 1/2. A flip keeps Ising vertices
//! on parallel spins and Heisenberg sides antiparallel, so configuration
//! weight is invariant; a Heisenberg vertex whose two sides land in clusters
//! with opposite flip decisions toggles between its diagonal and
//! off-diagonal form. World lines without any operator flip with an
//! independent coin (one coin per sewn layer-A line, one per layer-B line
//! and replica).

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::vertex::{VertexList, NO_LEG};
use super::{OpKind, SseConfig};
use crate::lattice::LatticeSpec;

const NO_CLUSTER: u32 = u32::MAX;

/// Scratch buffers reused across sweeps.
#[derive(Debug, Default)]
pub struct SweepContext {
    pub vl: VertexList,
    pub state_scratch: Vec<i8>,
    stack: Vec<u32>,
    cluster_of: Vec<u32>,
    cluster_flip: Vec<bool>,
}

impl SweepContext {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Flip clusters of the prebuilt vertex list in `ctx.vl`, updating operator
/// kinds, off-diagonal counts, and the stored slice-0 states of every
/// configuration in the slice.
pub fn cluster_sweep(
    configs: &mut [SseConfig],
    lat: &LatticeSpec,
    rng: &mut ChaCha8Rng,
    ctx: &mut SweepContext,
) {
    let SweepContext {
        vl,
        stack,
        cluster_of,
        cluster_flip,
        ..
    } = ctx;
    let n_legs = vl.links.len();
    cluster_of.clear();
    cluster_of.resize(n_legs, NO_CLUSTER);
    cluster_flip.clear();
    stack.clear();

    // Partition legs into clusters, drawing each cluster's coin at creation
    // so the RNG stream does not depend on cluster sizes.
    for seed in 0..n_legs as u32 {
        if cluster_of[seed as usize] != NO_CLUSTER {
            continue;
        }
        let cid = cluster_flip.len() as u32;
        cluster_flip.push(rng.gen::<bool>());
        cluster_of[seed as usize] = cid;
        stack.push(seed);
        while let Some(leg) = stack.pop() {
            let visit = |l: u32, stack: &mut Vec<u32>, cluster_of: &mut Vec<u32>| {
                if cluster_of[l as usize] == NO_CLUSTER {
                    cluster_of[l as usize] = cid;
                    stack.push(l);
                }
            };
            visit(vl.links[leg as usize], stack, cluster_of);
            let v = (leg / 4) as usize;
            let base = leg & !3;
            match vl.v_kind[v] {
                OpKind::IsingDiag => {
                    for j in 0..4 {
                        let other = base + j;
                        if other != leg {
                            visit(other, stack, cluster_of);
                        }
                    }
                }
                OpKind::HeisDiag | OpKind::HeisOffdiag => {
                    visit(leg ^ 1, stack, cluster_of);
                }
            }
        }
    }

    // Retype Heisenberg vertices whose sides flip differently.
    for v in 0..vl.n_vertices() {
        if vl.v_kind[v] == OpKind::IsingDiag {
            continue;
        }
        let lower = cluster_flip[cluster_of[4 * v] as usize];
        let upper = cluster_flip[cluster_of[4 * v + 2] as usize];
        if lower != upper {
            let cfg = &mut configs[vl.v_rep[v] as usize];
            let slot = vl.v_slot[v] as usize;
            let was_offdiag = cfg.ops[slot].is_offdiag();
            cfg.ops[slot].toggle_heis();
            if was_offdiag {
                cfg.n2 -= 1;
                vl.v_kind[v] = OpKind::HeisDiag;
            } else {
                cfg.n2 += 1;
                vl.v_kind[v] = OpKind::HeisOffdiag;
            }
        }
    }

    // Update stored states: each seam flips with the cluster that owns its
    // world-line segment; operator-free lines flip on their own coins.
    let n_rep = configs.len();
    let n_spins = lat.n_spins;
    for site in 0..n_spins {
        if lat.is_layer_a(site) {
            if vl.seam_leg[site] == NO_LEG {
                if rng.gen::<bool>() {
                    for cfg in configs.iter_mut() {
                        cfg.state[site] = -cfg.state[site];
                    }
                }
            } else {
                for (k, cfg) in configs.iter_mut().enumerate() {
                    let leg = vl.seam_leg[k * n_spins + site];
                    if cluster_flip[cluster_of[leg as usize] as usize] {
                        cfg.state[site] = -cfg.state[site];
                    }
                }
            }
        } else {
            for k in 0..n_rep {
                let leg = vl.seam_leg[k * n_spins + site];
                let flip = if leg == NO_LEG {
                    rng.gen::<bool>()
                } else {
                    cluster_flip[cluster_of[leg as usize] as usize]
                };
                if flip {
                    configs[k].state[site] = -configs[k].state[site];
                }
            }
        }
    }
}
