//! Linked vertex list: each non-null operator becomes a four-leg vertex and
//! legs on the same world-line segment are linked through imaginary time.
//!
//! Leg numbering within vertex `v`: `4v+0` lower site1, `4v+1` lower site2,
//! `4v+2` upper site1, `4v+3` upper site2.
//!
//! World lines wrap according to the slice topology: layer-B sites are
//! time-periodic within their own configuration, while layer-A sites are
//! sewn cyclically across the configurations of the slice (for a slice of
//! one this reduces to ordinary periodic wrapping). The same rule realizes
//! both a plain chain and a replica manifold.

use alloc::vec::Vec;

use super::{OpKind, SseConfig};
use crate::lattice::LatticeSpec;

/// Sentinel for "no leg".
pub const NO_LEG: u32 = u32::MAX;

/// Reusable linked-leg structure for one slice of configurations.
#[derive(Debug, Default)]
pub struct VertexList {
    /// Time link per leg; an involution over all `4 * n_vertices` legs.
    pub links: Vec<u32>,
    /// Operator kind per vertex (copied from the string when built).
    pub v_kind: Vec<OpKind>,
    /// Bond index per vertex.
    pub v_bond: Vec<u32>,
    /// Configuration (replica) index per vertex.
    pub v_rep: Vec<u32>,
    /// Slot index within its configuration per vertex.
    pub v_slot: Vec<u32>,
    /// Per (replica, site), the leg just above the stored slice-0 spin:
    /// the lower leg of the first operator met when moving up the world
    /// line from that seam. `NO_LEG` marks a world line with no operators
    /// (for layer-A sites that means none in any replica).
    pub seam_leg: Vec<u32>,
    /// Replica count the list was built for.
    pub n_rep: usize,
    first_lower: Vec<u32>,
    last_upper: Vec<u32>,
    rep_scratch: Vec<u32>,
}

impl VertexList {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.v_kind.len()
    }

    #[inline]
    pub fn seam(&self, replica: usize, site: usize, n_spins: usize) -> u32 {
        self.seam_leg[replica * n_spins + site]
    }
}

/// Build the linked vertex list for a slice of configurations.
pub fn build_vertex_list(configs: &[SseConfig], lat: &LatticeSpec, vl: &mut VertexList) {
    let n_rep = configs.len();
    let n_spins = lat.n_spins;
    let n_vertices: usize = configs.iter().map(|c| c.n).sum();

    vl.n_rep = n_rep;
    vl.links.clear();
    vl.links.resize(4 * n_vertices, NO_LEG);
    vl.v_kind.clear();
    vl.v_bond.clear();
    vl.v_rep.clear();
    vl.v_slot.clear();
    vl.first_lower.clear();
    vl.first_lower.resize(n_rep * n_spins, NO_LEG);
    vl.last_upper.clear();
    vl.last_upper.resize(n_rep * n_spins, NO_LEG);
    vl.seam_leg.clear();
    vl.seam_leg.resize(n_rep * n_spins, NO_LEG);

    let mut v = 0u32;
    for (k, cfg) in configs.iter().enumerate() {
        for (slot, op) in cfg.ops.iter().enumerate() {
            if op.is_null() {
                continue;
            }
            vl.v_kind.push(op.kind());
            vl.v_bond.push(op.bond() as u32);
            vl.v_rep.push(k as u32);
            vl.v_slot.push(slot as u32);
            let bond = lat.bonds[op.bond()];
            for (side, site) in [(0u32, bond.site1), (1u32, bond.site2)] {
                let lower = 4 * v + side;
                let upper = 4 * v + 2 + side;
                let idx = k * n_spins + site as usize;
                let prev = vl.last_upper[idx];
                if prev == NO_LEG {
                    vl.first_lower[idx] = lower;
                } else {
                    vl.links[prev as usize] = lower;
                    vl.links[lower as usize] = prev;
                }
                vl.last_upper[idx] = upper;
            }
            v += 1;
        }
    }
    debug_assert_eq!(v as usize, n_vertices);

    // Close the world lines. Layer B wraps within each configuration.
    for site in lat.n_sites_per_layer..n_spins {
        for k in 0..n_rep {
            let idx = k * n_spins + site;
            let first = vl.first_lower[idx];
            if first != NO_LEG {
                let last = vl.last_upper[idx];
                vl.links[last as usize] = first;
                vl.links[first as usize] = last;
            }
            vl.seam_leg[idx] = first;
        }
    }

    // Layer A sews cyclically across the slice: the top of each
    // configuration's world line continues into the bottom of the next
    // configuration that carries operators on this site.
    for site in 0..lat.n_sites_per_layer {
        vl.rep_scratch.clear();
        for k in 0..n_rep {
            if vl.first_lower[k * n_spins + site] != NO_LEG {
                vl.rep_scratch.push(k as u32);
            }
        }
        if vl.rep_scratch.is_empty() {
            continue;
        }
        for (i, &k) in vl.rep_scratch.iter().enumerate() {
            let k_next = vl.rep_scratch[(i + 1) % vl.rep_scratch.len()];
            let last = vl.last_upper[k as usize * n_spins + site];
            let first = vl.first_lower[k_next as usize * n_spins + site];
            vl.links[last as usize] = first;
            vl.links[first as usize] = last;
        }
        // The seam of replica k sits on the segment ending at the first
        // operator at or above it in the cyclic replica order.
        let mut cursor = 0;
        for k in 0..n_rep {
            // First listed replica >= k, wrapping to the smallest.
            while cursor < vl.rep_scratch.len() && (vl.rep_scratch[cursor] as usize) < k {
                cursor += 1;
            }
            let owner = if cursor < vl.rep_scratch.len() {
                vl.rep_scratch[cursor]
            } else {
                vl.rep_scratch[0]
            };
            vl.seam_leg[k * n_spins + site] = vl.first_lower[owner as usize * n_spins + site];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::sse::{Couplings, OpCode, SseConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn empty_config(lat: &LatticeSpec, m: usize) -> SseConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cfg = SseConfig::new(lat, 1.0, &mut rng);
        cfg.ops = alloc::vec![OpCode::NULL; m];
        cfg
    }

    #[test]
    fn empty_string_has_no_vertices_and_all_sites_free() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let cfg = empty_config(&lat, 10);
        let mut vl = VertexList::new();
        build_vertex_list(core::slice::from_ref(&cfg), &lat, &mut vl);
        assert_eq!(vl.n_vertices(), 0);
        assert!(vl.seam_leg.iter().all(|&l| l == NO_LEG));
    }

    #[test]
    fn single_heis_diag_wraps_all_four_legs() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let mut cfg = empty_config(&lat, 10);
        let inter0 = lat.n_intra_total();
        let b = lat.bonds[inter0];
        cfg.state[b.site1 as usize] = 1;
        cfg.state[b.site2 as usize] = -1;
        cfg.ops[3] = OpCode::new(inter0, crate::sse::OpKind::HeisDiag);
        cfg.n = 1;
        let mut vl = VertexList::new();
        build_vertex_list(core::slice::from_ref(&cfg), &lat, &mut vl);
        assert_eq!(vl.n_vertices(), 1);
        // Lower legs wrap to upper legs on the same site.
        assert_eq!(vl.links[0], 2);
        assert_eq!(vl.links[2], 0);
        assert_eq!(vl.links[1], 3);
        assert_eq!(vl.links[3], 1);
        // Every other site is free.
        let free = vl.seam_leg.iter().filter(|&&l| l == NO_LEG).count();
        assert_eq!(free, lat.n_spins - 2);
        assert_eq!(vl.seam(0, b.site1 as usize, lat.n_spins), 0);
        assert_eq!(vl.seam(0, b.site2 as usize, lat.n_spins), 1);
    }

    #[test]
    fn stacked_operators_link_through_time() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let mut cfg = empty_config(&lat, 10);
        let inter0 = lat.n_intra_total();
        let b = lat.bonds[inter0];
        cfg.state[b.site1 as usize] = 1;
        cfg.state[b.site2 as usize] = -1;
        cfg.ops[2] = OpCode::new(inter0, crate::sse::OpKind::HeisDiag);
        cfg.ops[7] = OpCode::new(inter0, crate::sse::OpKind::HeisDiag);
        cfg.n = 2;
        let mut vl = VertexList::new();
        build_vertex_list(core::slice::from_ref(&cfg), &lat, &mut vl);
        assert_eq!(vl.n_vertices(), 2);
        // Upper legs of vertex 0 link to lower legs of vertex 1.
        assert_eq!(vl.links[2], 4);
        assert_eq!(vl.links[3], 5);
        // And the string wraps around.
        assert_eq!(vl.links[6], 0);
        assert_eq!(vl.links[7], 1);
    }

    #[test]
    fn links_are_an_involution_on_random_strings() {
        let lat = LatticeSpec::new(3, Boundary::Periodic).unwrap();
        let coup = Couplings::new(1.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cfg = SseConfig::new(&lat, 2.0, &mut rng);
        let mut scratch = Vec::new();
        for _ in 0..50 {
            crate::sse::diagonal_sweep(&mut cfg, &lat, &coup, &mut rng, &mut scratch);
            cfg.adjust_cutoff();
        }
        let mut vl = VertexList::new();
        build_vertex_list(core::slice::from_ref(&cfg), &lat, &mut vl);
        for leg in 0..vl.links.len() {
            let partner = vl.links[leg];
            assert_ne!(partner, NO_LEG, "leg {leg} unlinked");
            assert_eq!(vl.links[partner as usize] as usize, leg);
        }
    }

    #[test]
    fn two_replica_a_sites_sew_across_replicas() {
        let lat = LatticeSpec::new(1, Boundary::Open).unwrap();
        // One inter bond; site 0 is layer A, site 1 is layer B.
        let mut c0 = empty_config(&lat, 4);
        let mut c1 = empty_config(&lat, 4);
        for c in [&mut c0, &mut c1] {
            c.state[0] = 1;
            c.state[1] = -1;
            c.ops[0] = OpCode::new(0, crate::sse::OpKind::HeisDiag);
            c.n = 1;
        }
        let mut vl = VertexList::new();
        build_vertex_list(&[c0, c1], &lat, &mut vl);
        assert_eq!(vl.n_vertices(), 2);
        // Site 0 (layer A): upper leg of replica 0 links to lower leg of
        // replica 1 and vice versa.
        assert_eq!(vl.links[2], 4);
        assert_eq!(vl.links[6], 0);
        // Site 1 (layer B): each replica wraps onto itself.
        assert_eq!(vl.links[3], 1);
        assert_eq!(vl.links[7], 5);
        // Seams: replica k's A seam is owned by its own first operator.
        assert_eq!(vl.seam(0, 0, 2), 0);
        assert_eq!(vl.seam(1, 0, 2), 4);
    }
}
