//! Bilayer square-lattice geometry: sites, bond tables, and the momentum grid.
//!
//! Sites are indexed globally as `layer * L^2 + y * L + x` with layer 0 = A
//! (upper) and layer 1 = B (bottom). Bond order is deterministic: for each
//! layer the x-bonds in row-major order, then the y-bonds, then the
//! inter-layer bonds. Intra-layer bonds therefore occupy the index range
//! `[0, 2*n_intra_per_layer)` and inter-layer bonds the range after it,
//! which the sampling engine relies on when drawing bonds by class.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::math;

/// Imaginary-time-independent boundary condition of each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => write!(f, "periodic"),
            Boundary::Open => write!(f, "open"),
        }
    }
}

/// Which coupling a bond carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondKind {
    /// Nearest-neighbor Ising bond inside layer A.
    IntraA,
    /// Nearest-neighbor Ising bond inside layer B.
    IntraB,
    /// Heisenberg bond between site i of layer A and site i of layer B.
    Inter,
}

/// A two-site bond, endpoints as global spin indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub kind: BondKind,
    pub site1: u32,
    pub site2: u32,
}

/// Errors from lattice construction and transforms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LatticeError {
    /// Periodic boundaries with L < 3 would create duplicate bonds.
    PeriodicTooSmall { l: usize },
    /// L must be at least 1.
    ZeroSize,
    /// Input length does not match the L^2 grid.
    GridMismatch { expected: usize, got: usize },
}

impl fmt::Display for LatticeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeError::PeriodicTooSmall { l } => {
                write!(f, "periodic boundaries need L >= 3, got L = {l}")
            }
            LatticeError::ZeroSize => write!(f, "lattice size L must be >= 1"),
            LatticeError::GridMismatch { expected, got } => {
                write!(f, "expected {expected} grid values, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LatticeError {}

/// Bilayer geometry shared read-only by every chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    pub l: usize,
    pub boundary: Boundary,
    /// Sites per layer, `L^2`.
    pub n_sites_per_layer: usize,
    /// Total spins, `2 L^2`.
    pub n_spins: usize,
    /// All bonds in deterministic order; intra first, inter last.
    pub bonds: Vec<Bond>,
    /// Inter-layer bond count `N_H = L^2`.
    pub n_inter: usize,
    /// Intra-layer bond count per layer `N_I`.
    pub n_intra_per_layer: usize,
}

impl LatticeSpec {
    /// Build the bilayer geometry.
    ///
    /// Periodic boundaries require `L >= 3`: at L = 2 the left and right
    /// neighbor coincide and the same bond would be counted twice.
    pub fn new(l: usize, boundary: Boundary) -> Result<Self, LatticeError> {
        if l == 0 {
            return Err(LatticeError::ZeroSize);
        }
        if boundary == Boundary::Periodic && l < 3 {
            return Err(LatticeError::PeriodicTooSmall { l });
        }
        let n_per_layer = l * l;
        let mut bonds = Vec::new();
        for (layer, kind) in [(0usize, BondKind::IntraA), (1usize, BondKind::IntraB)] {
            // x-bonds, row-major.
            for y in 0..l {
                for x in 0..l {
                    if x + 1 < l {
                        bonds.push(Bond {
                            kind,
                            site1: site_index(layer, x, y, l) as u32,
                            site2: site_index(layer, x + 1, y, l) as u32,
                        });
                    } else if boundary == Boundary::Periodic {
                        bonds.push(Bond {
                            kind,
                            site1: site_index(layer, x, y, l) as u32,
                            site2: site_index(layer, 0, y, l) as u32,
                        });
                    }
                }
            }
            // y-bonds, row-major.
            for y in 0..l {
                for x in 0..l {
                    if y + 1 < l {
                        bonds.push(Bond {
                            kind,
                            site1: site_index(layer, x, y, l) as u32,
                            site2: site_index(layer, x, y + 1, l) as u32,
                        });
                    } else if boundary == Boundary::Periodic {
                        bonds.push(Bond {
                            kind,
                            site1: site_index(layer, x, y, l) as u32,
                            site2: site_index(layer, x, 0, l) as u32,
                        });
                    }
                }
            }
        }
        let n_intra_per_layer = bonds.len() / 2;
        for i in 0..n_per_layer {
            bonds.push(Bond {
                kind: BondKind::Inter,
                site1: i as u32,
                site2: (i + n_per_layer) as u32,
            });
        }
        Ok(LatticeSpec {
            l,
            boundary,
            n_sites_per_layer: n_per_layer,
            n_spins: 2 * n_per_layer,
            bonds,
            n_inter: n_per_layer,
            n_intra_per_layer,
        })
    }

    /// Total intra-layer bonds across both layers, `2 N_I`.
    #[inline]
    pub fn n_intra_total(&self) -> usize {
        2 * self.n_intra_per_layer
    }

    /// Global spin index from layer and in-layer coordinates.
    #[inline]
    pub fn site(&self, layer: usize, x: usize, y: usize) -> usize {
        site_index(layer, x, y, self.l)
    }

    /// Inverse of [`site`](Self::site): `(layer, x, y)`.
    #[inline]
    pub fn coords(&self, site: usize) -> (usize, usize, usize) {
        let layer = site / self.n_sites_per_layer;
        let r = site % self.n_sites_per_layer;
        (layer, r % self.l, r / self.l)
    }

    /// True if the global site index lies in layer A.
    #[inline]
    pub fn is_layer_a(&self, site: usize) -> bool {
        site < self.n_sites_per_layer
    }

    /// The momentum grid of one layer.
    pub fn momentum_grid(&self) -> MomentumGrid {
        MomentumGrid::new(self.l)
    }
}

#[inline]
fn site_index(layer: usize, x: usize, y: usize, l: usize) -> usize {
    layer * l * l + y * l + x
}

/// The L^2 momenta `k = (2 pi / L)(m, n)` of one layer, Gamma first.
#[derive(Debug, Clone)]
pub struct MomentumGrid {
    pub l: usize,
    /// `(m, n)` integer labels in row-major order, so `points[n*L + m] = (m, n)`.
    pub points: Vec<(usize, usize)>,
}

impl MomentumGrid {
    pub fn new(l: usize) -> Self {
        let mut points = Vec::with_capacity(l * l);
        for n in 0..l {
            for m in 0..l {
                points.push((m, n));
            }
        }
        MomentumGrid { l, points }
    }

    /// Momentum components `(k_x, k_y)` of grid point `(m, n)`.
    #[inline]
    pub fn k(&self, m: usize, n: usize) -> (f64, f64) {
        let f = 2.0 * core::f64::consts::PI / self.l as f64;
        (f * m as f64, f * n as f64)
    }
}

/// Discrete Fourier transform of a single-layer map,
/// `C(k) = sum_r exp(-i k.r) C(r)` for every `k` on the momentum grid.
///
/// `values` holds C(r) for all L^2 displacement vectors in row-major order
/// (`values[y*L + x]`). The output is ordered like [`MomentumGrid::points`].
pub fn fourier_correlations(values: &[f64], l: usize) -> Result<Vec<Complex64>, LatticeError> {
    if values.len() != l * l {
        return Err(LatticeError::GridMismatch {
            expected: l * l,
            got: values.len(),
        });
    }
    let table = phase_table(l);
    let mut out = Vec::with_capacity(l * l);
    for n in 0..l {
        for m in 0..l {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..l {
                for x in 0..l {
                    // exp(-2 pi i (m x + n y) / L)
                    let idx = (m * x + n * y) % l;
                    acc += table[idx] * values[y * l + x];
                }
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Inverse of [`fourier_correlations`]:
/// `C(r) = (1/L^2) sum_k exp(+i k.r) C(k)`.
pub fn inverse_fourier_correlations(
    values: &[Complex64],
    l: usize,
) -> Result<Vec<Complex64>, LatticeError> {
    if values.len() != l * l {
        return Err(LatticeError::GridMismatch {
            expected: l * l,
            got: values.len(),
        });
    }
    let table = phase_table(l);
    let norm = 1.0 / (l * l) as f64;
    let mut out = Vec::with_capacity(l * l);
    for y in 0..l {
        for x in 0..l {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..l {
                for m in 0..l {
                    let idx = (m * x + n * y) % l;
                    acc += table[idx].conj() * values[n * l + m];
                }
            }
            out.push(acc * norm);
        }
    }
    Ok(out)
}

/// `exp(-2 pi i j / L)` for `j` in `0..L`.
fn phase_table(l: usize) -> Vec<Complex64> {
    let step = -2.0 * core::f64::consts::PI / l as f64;
    (0..l)
        .map(|j| {
            let a = step * j as f64;
            Complex64::new(math::cos(a), math::sin(a))
        })
        .collect()
}
