//! Structural invariant checks for configurations and vertex lists, used by
//! tests and debug assertions.

use alloc::vec::Vec;
use core::fmt;

use super::vertex::{VertexList, NO_LEG};
use super::{OpKind, SseConfig};
use crate::lattice::LatticeSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvariantError {
    CountMismatch { replica: usize },
    OddOffdiagCount { replica: usize, n2: usize },
    IsingOnAntiparallel { replica: usize, slot: usize },
    HeisOnParallel { replica: usize, slot: usize },
    IsingOnInterBond { replica: usize, slot: usize },
    HeisOnIntraBond { replica: usize, slot: usize },
    LayerBNotPeriodic { replica: usize, site: usize },
    LayerASeamMismatch { replica: usize, site: usize },
    BrokenLink { leg: usize },
}

impl fmt::Display for InvariantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvariantError::CountMismatch { replica } => {
                write!(f, "replica {replica}: stored n/n2 disagree with the string")
            }
            InvariantError::OddOffdiagCount { replica, n2 } => {
                write!(f, "replica {replica}: odd off-diagonal count {n2}")
            }
            InvariantError::IsingOnAntiparallel { replica, slot } => {
                write!(f, "replica {replica} slot {slot}: Ising op on antiparallel spins")
            }
            InvariantError::HeisOnParallel { replica, slot } => {
                write!(f, "replica {replica} slot {slot}: Heisenberg op on parallel spins")
            }
            InvariantError::IsingOnInterBond { replica, slot } => {
                write!(f, "replica {replica} slot {slot}: Ising op on an inter-layer bond")
            }
            InvariantError::HeisOnIntraBond { replica, slot } => {
                write!(f, "replica {replica} slot {slot}: Heisenberg op on an intra-layer bond")
            }
            InvariantError::LayerBNotPeriodic { replica, site } => {
                write!(f, "replica {replica} site {site}: layer-B world line not periodic")
            }
            InvariantError::LayerASeamMismatch { replica, site } => {
                write!(
                    f,
                    "replica {replica} site {site}: propagated layer-A state does not match the next replica"
                )
            }
            InvariantError::BrokenLink { leg } => write!(f, "leg {leg}: link is not an involution"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for InvariantError {}

/// Verify every structural invariant of a slice of configurations: operator
/// compatibility along the propagated state, stored counts, off-diagonal
/// parity, layer-B time periodicity within each configuration, and cyclic
/// layer-A sewing across the slice.
pub fn check_configs(configs: &[SseConfig], lat: &LatticeSpec) -> Result<(), InvariantError> {
    let n_rep = configs.len();
    let mut prop: Vec<i8> = Vec::new();
    for (k, cfg) in configs.iter().enumerate() {
        prop.clear();
        prop.extend_from_slice(&cfg.state);
        let mut n = 0;
        let mut n2 = 0;
        for (slot, op) in cfg.ops.iter().enumerate() {
            if op.is_null() {
                continue;
            }
            n += 1;
            let bond = lat.bonds[op.bond()];
            let inter = bond.kind == crate::lattice::BondKind::Inter;
            let s1 = prop[bond.site1 as usize];
            let s2 = prop[bond.site2 as usize];
            match op.kind() {
                OpKind::IsingDiag => {
                    if inter {
                        return Err(InvariantError::IsingOnInterBond { replica: k, slot });
                    }
                    if s1 != s2 {
                        return Err(InvariantError::IsingOnAntiparallel { replica: k, slot });
                    }
                }
                OpKind::HeisDiag | OpKind::HeisOffdiag => {
                    if !inter {
                        return Err(InvariantError::HeisOnIntraBond { replica: k, slot });
                    }
                    if s1 == s2 {
                        return Err(InvariantError::HeisOnParallel { replica: k, slot });
                    }
                    if op.kind() == OpKind::HeisOffdiag {
                        n2 += 1;
                        prop[bond.site1 as usize] = -s1;
                        prop[bond.site2 as usize] = -s2;
                    }
                }
            }
        }
        if n != cfg.n || n2 != cfg.n2 {
            return Err(InvariantError::CountMismatch { replica: k });
        }
        if n2 % 2 != 0 {
            return Err(InvariantError::OddOffdiagCount { replica: k, n2 });
        }
        let next = &configs[(k + 1) % n_rep];
        for site in 0..lat.n_spins {
            if lat.is_layer_a(site) {
                if prop[site] != next.state[site] {
                    return Err(InvariantError::LayerASeamMismatch { replica: k, site });
                }
            } else if prop[site] != cfg.state[site] {
                return Err(InvariantError::LayerBNotPeriodic { replica: k, site });
            }
        }
    }
    Ok(())
}

/// Verify that the vertex list's time links form an involution with no
/// dangling legs.
pub fn check_vertex_list(vl: &VertexList) -> Result<(), InvariantError> {
    for leg in 0..vl.links.len() {
        let partner = vl.links[leg];
        if partner == NO_LEG || vl.links[partner as usize] as usize != leg {
            return Err(InvariantError::BrokenLink { leg });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::sse::OpCode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_config_passes() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SseConfig::new(&lat, 1.0, &mut rng);
        check_configs(core::slice::from_ref(&cfg), &lat).unwrap();
    }

    #[test]
    fn detects_incompatible_ising_op() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cfg = SseConfig::new(&lat, 1.0, &mut rng);
        let b = lat.bonds[0];
        cfg.state[b.site1 as usize] = 1;
        cfg.state[b.site2 as usize] = -1;
        cfg.ops[0] = OpCode::new(0, OpKind::IsingDiag);
        cfg.n = 1;
        assert_eq!(
            check_configs(core::slice::from_ref(&cfg), &lat),
            Err(InvariantError::IsingOnAntiparallel { replica: 0, slot: 0 })
        );
    }

    #[test]
    fn detects_count_mismatch() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cfg = SseConfig::new(&lat, 1.0, &mut rng);
        let b = lat.bonds[0];
        cfg.state[b.site2 as usize] = cfg.state[b.site1 as usize];
        cfg.ops[0] = OpCode::new(0, OpKind::IsingDiag);
        assert_eq!(
            check_configs(core::slice::from_ref(&cfg), &lat),
            Err(InvariantError::CountMismatch { replica: 0 })
        );
    }

    #[test]
    fn detects_broken_periodicity() {
        let lat = LatticeSpec::new(1, Boundary::Open).unwrap();
        let mut cfg = SseConfig {
            state: alloc::vec![1, -1],
            ops: alloc::vec![OpCode::NULL; 4],
            n: 1,
            n2: 1,
            beta: 1.0,
        };
        cfg.ops[0] = OpCode::new(0, OpKind::HeisOffdiag);
        let err = check_configs(core::slice::from_ref(&cfg), &lat).unwrap_err();
        assert!(matches!(
            err,
            InvariantError::OddOffdiagCount { .. } | InvariantError::LayerASeamMismatch { .. }
        ));
    }
}
