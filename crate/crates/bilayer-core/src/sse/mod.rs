//! Stochastic series expansion engine.
//!
//! A configuration is a basis state at time slice 0 plus an operator string
//! of fixed cutoff length M whose non-null entries are bond operators:
//! diagonal Ising operators of weight J/2 on intra-layer bonds with parallel
//! spins, and diagonal/off-diagonal Heisenberg operators of weight J'/2 on
//! inter-layer bonds with antiparallel spins. Updates alternate a diagonal
//! insert/remove sweep with a joint Ising/Heisenberg cluster sweep.
//!
//! Every sweep kernel operates on a slice of configurations. A plain chain
//! is a slice of one; the replica manifold passes several configurations
//! whose layer-A world lines are sewn cyclically across the slice.

pub mod check;
pub mod cluster;
pub mod diagonal;
pub mod vertex;

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::lattice::LatticeSpec;

pub use cluster::{cluster_sweep, SweepContext};
pub use diagonal::diagonal_sweep;
pub use vertex::{build_vertex_list, VertexList, NO_LEG};

/// Kind of a non-null operator in the string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum OpKind {
    /// Diagonal on an intra-layer bond; requires parallel spins.
    IsingDiag = 1,
    /// Diagonal on an inter-layer bond; requires antiparallel spins.
    HeisDiag = 2,
    /// Off-diagonal on an inter-layer bond; flips both spins.
    HeisOffdiag = 3,
}

/// One slot of the operator string: null or `(bond, kind)` packed in a u32.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCode(u32);

impl OpCode {
    pub const NULL: OpCode = OpCode(0);

    #[inline]
    pub fn new(bond: usize, kind: OpKind) -> Self {
        OpCode(((bond as u32) << 2) | kind as u32)
    }

    #[inline]
    pub fn is_null(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn bond(self) -> usize {
        (self.0 >> 2) as usize
    }

    #[inline]
    pub fn kind(self) -> OpKind {
        match self.0 & 0b11 {
            1 => OpKind::IsingDiag,
            2 => OpKind::HeisDiag,
            3 => OpKind::HeisOffdiag,
            _ => unreachable!("kind of a null op"),
        }
    }

    #[inline]
    pub fn is_offdiag(self) -> bool {
        self.0 & 0b11 == OpKind::HeisOffdiag as u32
    }

    /// Swap HeisDiag and HeisOffdiag; must not be called on other codes.
    #[inline]
    pub fn toggle_heis(&mut self) {
        debug_assert!(matches!(self.kind(), OpKind::HeisDiag | OpKind::HeisOffdiag));
        self.0 ^= 1;
    }

    /// Raw packed representation, for serialization.
    #[inline]
    pub fn to_bits(self) -> u32 {
        self.0
    }

    /// Inverse of [`OpCode::to_bits`]; `None` for encodings no operator
    /// produces.
    #[inline]
    pub fn from_bits(bits: u32) -> Option<OpCode> {
        match bits & 0b11 {
            0 if bits == 0 => Some(OpCode::NULL),
            1..=3 => Some(OpCode(bits)),
            _ => None,
        }
    }
}

/// Errors from coupling construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingsError {
    NonPositiveJ { j: f64 },
    NegativeG { g: f64 },
}

impl fmt::Display for CouplingsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingsError::NonPositiveJ { j } => write!(f, "J must be > 0, got {j}"),
            CouplingsError::NegativeG { g } => write!(f, "g must be >= 0, got {g}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CouplingsError {}

/// Model couplings: intra-layer Ising J, inter-layer Heisenberg J' = g J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub j: f64,
    pub jp: f64,
    pub g: f64,
}

impl Couplings {
    pub fn new(j: f64, g: f64) -> Result<Self, CouplingsError> {
        if !(j > 0.0) {
            return Err(CouplingsError::NonPositiveJ { j });
        }
        if !(g >= 0.0) {
            return Err(CouplingsError::NegativeG { g });
        }
        Ok(Couplings { j, jp: g * j, g })
    }

    /// Diagonal-update normalization `C = 2 N_I J + N_H J'`.
    #[inline]
    pub fn c_norm(&self, lat: &LatticeSpec) -> f64 {
        lat.n_intra_total() as f64 * self.j + lat.n_inter as f64 * self.jp
    }

    /// Probability of proposing the Ising class, `2 N_I J / C`.
    #[inline]
    pub fn p_ising(&self, lat: &LatticeSpec) -> f64 {
        let c = self.c_norm(lat);
        if c > 0.0 {
            lat.n_intra_total() as f64 * self.j / c
        } else {
            0.0
        }
    }

    /// Constant shift `(2 N_I J + N_H J') / 4` restored by the energy
    /// estimator.
    #[inline]
    pub fn energy_shift(&self, lat: &LatticeSpec) -> f64 {
        0.25 * self.c_norm(lat)
    }
}

/// Initial operator-string cutoff for a fresh configuration.
pub const INITIAL_CUTOFF: usize = 20;

/// One SSE configuration: basis state at slice 0 plus the operator string.
#[derive(Debug, Clone, PartialEq)]
pub struct SseConfig {
    /// `sigma = 2 S^z` per spin, each +1 or -1.
    pub state: Vec<i8>,
    /// Operator string of length M (the cutoff).
    pub ops: Vec<OpCode>,
    /// Non-null entries in `ops`.
    pub n: usize,
    /// Off-diagonal entries in `ops`; always even.
    pub n2: usize,
    pub beta: f64,
}

impl SseConfig {
    /// Fresh configuration with a uniformly random state and an empty string.
    pub fn new(lat: &LatticeSpec, beta: f64, rng: &mut ChaCha8Rng) -> Self {
        let state = (0..lat.n_spins)
            .map(|_| if rng.gen::<bool>() { 1i8 } else { -1i8 })
            .collect();
        SseConfig {
            state,
            ops: alloc::vec![OpCode::NULL; INITIAL_CUTOFF],
            n: 0,
            n2: 0,
            beta,
        }
    }

    /// Current cutoff M.
    #[inline]
    pub fn cutoff(&self) -> usize {
        self.ops.len()
    }

    /// Grow the cutoff when the string gets crowded: if `4n > 3M`, pad with
    /// null slots up to `ceil(4n/3) + 10`. Never shrinks. Call only during
    /// equilibration so measurement-phase strings have a fixed M.
    pub fn adjust_cutoff(&mut self) {
        let m = self.ops.len();
        if 4 * self.n > 3 * m {
            let target = (4 * self.n).div_ceil(3) + 10;
            if target > m {
                self.ops.resize(target, OpCode::NULL);
            }
        }
    }
}

/// One full Monte Carlo sweep over a slice of configurations: a diagonal
/// sweep per configuration, vertex-list construction, then the joint
/// cluster sweep.
pub fn mc_sweep(
    configs: &mut [SseConfig],
    lat: &LatticeSpec,
    coup: &Couplings,
    rng: &mut ChaCha8Rng,
    ctx: &mut SweepContext,
) {
    for cfg in configs.iter_mut() {
        diagonal_sweep(cfg, lat, coup, rng, &mut ctx.state_scratch);
    }
    build_vertex_list(configs, lat, &mut ctx.vl);
    cluster_sweep(configs, lat, rng, ctx);
}
