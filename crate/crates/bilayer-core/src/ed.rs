//! Exact dense computations on small bilayers: thermal states, reduced
//! density matrices, entanglement spectra, replica-power correlators, and
//! thermal observables. Ground truth for every Monte Carlo estimator.
//!
//! Basis: sigma^z product states indexed by bit patterns, bit `i` = global
//! spin `i` (layer A occupies bits `0..L^2`), bit set = sigma = +1.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::estimators::{binder, layer_a_correlation, susceptibility, ScalarSet};
use crate::lattice::{fourier_correlations, BondKind, LatticeSpec};
use crate::math;
use crate::sse::Couplings;

/// Dense diagonalization is capped at this many spins (Hilbert dimension
/// 2^14).
pub const MAX_SPINS: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdError {
    TooManySpins { n_spins: usize },
    ZeroTrace,
    ReplicaPowerTooSmall { n_rep: usize },
}

impl fmt::Display for EdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdError::TooManySpins { n_spins } => {
                write!(f, "dense diagonalization supports at most {MAX_SPINS} spins, got {n_spins}")
            }
            EdError::ZeroTrace => write!(f, "density matrix has zero trace"),
            EdError::ReplicaPowerTooSmall { n_rep } => {
                write!(f, "replica power must be >= 2, got {n_rep}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EdError {}

/// Eigendecomposition of a real symmetric operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub evals: Vec<f64>,
    /// Eigenvectors as columns, aligned with `evals`.
    pub evecs: DMatrix<f64>,
}

#[inline]
fn sigma_bit(basis: usize, site: u32) -> f64 {
    if basis >> site & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Dense Hamiltonian: `-J sum_intra S^z S^z + J' sum_inter S.S`, plus an
/// optional transverse field `-h sum_{i in A} S^x_i` used as a controlled
/// off-diagonal perturbation of the subsystem.
pub fn build_hamiltonian(
    lat: &LatticeSpec,
    coup: &Couplings,
    field_hx_a: f64,
) -> Result<DMatrix<f64>, EdError> {
    if lat.n_spins > MAX_SPINS {
        return Err(EdError::TooManySpins { n_spins: lat.n_spins });
    }
    let dim = 1usize << lat.n_spins;
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = 0.0;
        for bond in &lat.bonds {
            let s1 = sigma_bit(s, bond.site1);
            let s2 = sigma_bit(s, bond.site2);
            match bond.kind {
                BondKind::Inter => {
                    diag += 0.25 * coup.jp * s1 * s2;
                    if s1 != s2 {
                        let t = s ^ (1 << bond.site1) ^ (1 << bond.site2);
                        h[(t, s)] += 0.5 * coup.jp;
                    }
                }
                _ => diag -= 0.25 * coup.j * s1 * s2,
            }
        }
        if field_hx_a != 0.0 {
            for i in 0..lat.n_sites_per_layer {
                h[(s ^ (1 << i), s)] += -0.5 * field_hx_a;
            }
        }
        h[(s, s)] += diag;
    }
    Ok(h)
}

/// Eigendecompose a symmetric matrix, sorting eigenvalues ascending.
pub fn diagonalize(h: DMatrix<f64>) -> Spectrum {
    let se = h.symmetric_eigen();
    let dim = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let evals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let evecs = DMatrix::from_fn(dim, dim, |r, c| se.eigenvectors[(r, order[c])]);
    Spectrum { evals, evecs }
}

/// Boltzmann weights `exp(-beta (E - E_min))`, unnormalized, plus their sum.
fn boltzmann(spec: &Spectrum, beta: f64) -> (Vec<f64>, f64) {
    let e0 = spec.evals.first().copied().unwrap_or(0.0);
    let w: Vec<f64> = spec.evals.iter().map(|e| math::exp(-beta * (e - e0))).collect();
    let z = w.iter().sum();
    (w, z)
}

/// Thermal density matrix `exp(-beta H) / Z`.
pub fn thermal_rho(spec: &Spectrum, beta: f64) -> DMatrix<f64> {
    let (w, z) = boltzmann(spec, beta);
    let mut scaled = spec.evecs.clone();
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        col *= w[c] / z;
    }
    &scaled * spec.evecs.transpose()
}

/// Partial trace over layer B: bits `0..n_a_bits` are kept.
pub fn reduce_to_a(rho: &DMatrix<f64>, n_a_bits: usize) -> DMatrix<f64> {
    let dim = rho.nrows();
    let dim_a = 1usize << n_a_bits;
    let dim_b = dim / dim_a;
    let mut rho_a = DMatrix::zeros(dim_a, dim_a);
    for b in 0..dim_b {
        let off = b << n_a_bits;
        for a2 in 0..dim_a {
            for a1 in 0..dim_a {
                rho_a[(a1, a2)] += rho[(a1 | off, a2 | off)];
            }
        }
    }
    rho_a
}

#[inline]
fn power(x: f64, n: usize) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

/// `V^T diag(w) V` for a diagonal operator given by `w` in the product
/// basis.
fn weighted_gram(v: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = v.clone();
    for (r, mut row) in scaled.row_iter_mut().enumerate() {
        row *= w[r];
    }
    v.transpose() * scaled
}

/// Entanglement report for a reduced density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EhReport {
    pub n_rep: usize,
    /// rho_A eigenvalues, descending, clamped at 0.
    pub lambda: Vec<f64>,
    /// Entanglement levels `-ln lambda` for the strictly positive lambda.
    pub xi: Vec<f64>,
    /// Von Neumann entropy `-sum lambda ln lambda`.
    pub entropy: f64,
    /// Largest off-diagonal magnitude of rho_A in the product basis.
    pub diag_defect: f64,
    /// `G_i(tau) = Tr(rho_A^{n-tau} sigma_i rho_A^tau sigma_i) / Tr(rho_A^n)`
    /// per layer-A site, tau = 0..n_rep.
    pub g_onsite: Vec<Vec<f64>>,
    /// Same with `sigma_k = (1/L^2) sum_r e^{-ik.r} sigma_r`, ordered like
    /// the momentum grid.
    pub g_momentum: Vec<Vec<f64>>,
}

/// Exact replica-power correlators, spectrum, entropy, and diagonality
/// defect of a layer-A reduced density matrix on an `l x l` grid.
pub fn eh_report(rho_a: &DMatrix<f64>, l: usize, n_rep: usize) -> Result<EhReport, EdError> {
    if n_rep < 2 {
        return Err(EdError::ReplicaPowerTooSmall { n_rep });
    }
    let dim = rho_a.nrows();
    debug_assert_eq!(dim, 1usize << (l * l));
    if rho_a.trace() <= 0.0 {
        return Err(EdError::ZeroTrace);
    }

    let mut diag_defect = 0.0f64;
    for r in 0..dim {
        for c in 0..dim {
            if r != c {
                diag_defect = diag_defect.max(math::abs(rho_a[(r, c)]));
            }
        }
    }

    let se = diagonalize(rho_a.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.reverse();
    let lambda: Vec<f64> = order.iter().map(|&i| se.evals[i].max(0.0)).collect();
    let v = DMatrix::from_fn(dim, dim, |r, c| se.evecs[(r, order[c])]);

    let entropy = -lambda
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * math::ln(x))
        .sum::<f64>();
    let xi: Vec<f64> = lambda
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -math::ln(x))
        .collect();

    // Powers lambda^t for t = 0..=n_rep.
    let pows: Vec<Vec<f64>> = (0..=n_rep)
        .map(|t| lambda.iter().map(|&x| power(x, t)).collect())
        .collect();
    let z_n: f64 = pows[n_rep].iter().sum();

    let correlator = |m_re: &DMatrix<f64>, m_im: Option<&DMatrix<f64>>| -> Vec<f64> {
        (0..n_rep)
            .map(|tau| {
                let mut acc = 0.0;
                for a in 0..dim {
                    let la = pows[n_rep - tau][a];
                    if la == 0.0 {
                        continue;
                    }
                    for b in 0..dim {
                        let w2 = match m_im {
                            Some(mi) => {
                                m_re[(a, b)] * m_re[(a, b)] + mi[(a, b)] * mi[(a, b)]
                            }
                            None => m_re[(a, b)] * m_re[(a, b)],
                        };
                        acc += la * pows[tau][b] * w2;
                    }
                }
                acc / z_n
            })
            .collect()
    };

    let n_sites = l * l;
    let mut g_onsite = Vec::with_capacity(n_sites);
    let mut sigma_diag = alloc::vec![0.0; dim];
    for i in 0..n_sites {
        for (a, s) in sigma_diag.iter_mut().enumerate() {
            *s = sigma_bit(a, i as u32);
        }
        let m = weighted_gram(&v, &sigma_diag);
        g_onsite.push(correlator(&m, None));
    }

    // Fourier field per basis state, then one complex gram per momentum.
    let inv_l2 = 1.0 / n_sites as f64;
    let mut f_table: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    let mut field = alloc::vec![0.0; n_sites];
    for a in 0..dim {
        for (r, fval) in field.iter_mut().enumerate() {
            *fval = sigma_bit(a, r as u32);
        }
        let ck = fourier_correlations(&field, l).expect("grid size matches");
        f_table.push(ck.into_iter().map(|c| c * inv_l2).collect());
    }
    let mut g_momentum = Vec::with_capacity(n_sites);
    let mut w_re = alloc::vec![0.0; dim];
    let mut w_im = alloc::vec![0.0; dim];
    for k in 0..n_sites {
        for a in 0..dim {
            w_re[a] = f_table[a][k].re;
            w_im[a] = f_table[a][k].im;
        }
        let m_re = weighted_gram(&v, &w_re);
        let m_im = weighted_gram(&v, &w_im);
        g_momentum.push(correlator(&m_re, Some(&m_im)));
    }

    Ok(EhReport {
        n_rep,
        lambda,
        xi,
        entropy,
        diag_defect,
        g_onsite,
        g_momentum,
    })
}

/// Exact thermal observables plus the layer-A correlation map.
#[derive(Debug, Clone, PartialEq)]
pub struct EdObservables {
    pub scalars: ScalarSet,
    /// `G(r)` for all L^2 displacements, periodic displacement convention.
    pub corr_a: Vec<f64>,
}

/// Thermal expectation values of every estimator observable.
pub fn thermal_observables(spec: &Spectrum, lat: &LatticeSpec, beta: f64) -> EdObservables {
    let dim = spec.evecs.nrows();
    let (w, z) = boltzmann(spec, beta);
    let energy = spec
        .evals
        .iter()
        .zip(&w)
        .map(|(e, wa)| e * wa)
        .sum::<f64>()
        / z;

    // Diagonal of rho in the product basis.
    let mut p = alloc::vec![0.0; dim];
    for a in 0..dim {
        let wa = w[a] / z;
        if wa == 0.0 {
            continue;
        }
        let col = spec.evecs.column(a);
        for (s, pv) in p.iter_mut().enumerate() {
            *pv += wa * col[s] * col[s];
        }
    }

    let na = lat.n_sites_per_layer;
    let n = lat.n_spins as f64;
    let mut m_abs = 0.0;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    let mut corr_a = alloc::vec![0.0; na];
    let mut state = alloc::vec![0i8; lat.n_spins];
    let mut corr_tmp = alloc::vec![0.0; na];
    for (s, &ps) in p.iter().enumerate() {
        let mut m = 0i64;
        for i in 0..na {
            let sa = (s >> i & 1) as i64 * 2 - 1;
            let sb = (s >> (i + na) & 1) as i64 * 2 - 1;
            m += sa - sb;
        }
        let m_bar = m as f64 / (2.0 * n);
        let sq = m_bar * m_bar;
        m_abs += ps * math::abs(m_bar);
        m2 += ps * sq;
        m4 += ps * sq * sq;
        if ps != 0.0 {
            for (i, sv) in state.iter_mut().enumerate() {
                *sv = if s >> i & 1 == 1 { 1 } else { -1 };
            }
            layer_a_correlation(&state, lat.l, &mut corr_tmp);
            for (acc, c) in corr_a.iter_mut().zip(&corr_tmp) {
                *acc += ps * c;
            }
        }
    }

    EdObservables {
        scalars: ScalarSet {
            m_abs,
            m2,
            m4,
            binder: binder(m2, m4),
            chi: susceptibility(m2, m_abs, beta, lat.n_spins),
            energy,
        },
        corr_a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;

    fn dimer() -> (LatticeSpec, Couplings) {
        (
            LatticeSpec::new(1, Boundary::Open).unwrap(),
            Couplings::new(1.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn dimer_spectrum() {
        let (lat, coup) = dimer();
        let h = build_hamiltonian(&lat, &coup, 0.0).unwrap();
        let spec = diagonalize(h);
        let expect = [-0.75, 0.25, 0.25, 0.25];
        for (e, x) in spec.evals.iter().zip(expect) {
            assert!((e - x).abs() < 1e-12, "{:?}", spec.evals);
        }
    }

    #[test]
    fn aligned_ising_ground_energy() {
        // g = 0, L = 2 open: 8 intra bonds, each -J/4 when its layer is
        // aligned; both layers align independently.
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let coup = Couplings::new(1.0, 0.0).unwrap();
        let h = build_hamiltonian(&lat, &coup, 0.0).unwrap();
        let spec = diagonalize(h);
        assert!((spec.evals[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_system_rejected() {
        let lat = LatticeSpec::new(3, Boundary::Open).unwrap();
        let coup = Couplings::new(1.0, 1.0).unwrap();
        assert_eq!(
            build_hamiltonian(&lat, &coup, 0.0).unwrap_err(),
            EdError::TooManySpins { n_spins: 18 }
        );
    }

    #[test]
    fn dimer_ground_rdm_is_maximally_mixed() {
        let (lat, coup) = dimer();
        let h = build_hamiltonian(&lat, &coup, 0.0).unwrap();
        let spec = diagonalize(h);
        let rho = thermal_rho(&spec, 200.0);
        let rho_a = reduce_to_a(&rho, 1);
        assert!((rho_a[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((rho_a[(1, 1)] - 0.5).abs() < 1e-12);
        assert!(rho_a[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn infinite_temperature_rdm_is_maximally_mixed() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let coup = Couplings::new(1.0, 3.0).unwrap();
        let h = build_hamiltonian(&lat, &coup, 0.0).unwrap();
        let spec = diagonalize(h);
        let rho = thermal_rho(&spec, 0.0);
        let rho_a = reduce_to_a(&rho, lat.n_sites_per_layer);
        let dim_a = 1 << lat.n_sites_per_layer;
        for r in 0..dim_a {
            for c in 0..dim_a {
                let expect = if r == c { 1.0 / dim_a as f64 } else { 0.0 };
                assert!((rho_a[(r, c)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimer_eh_report() {
        let (lat, coup) = dimer();
        let h = build_hamiltonian(&lat, &coup, 0.0).unwrap();
        let spec = diagonalize(h);
        let rho_a = reduce_to_a(&thermal_rho(&spec, 100.0), 1);
        let report = eh_report(&rho_a, 1, 4).unwrap();
        let ln2 = math::ln(2.0);
        assert!((report.lambda[0] - 0.5).abs() < 1e-12);
        assert!((report.lambda[1] - 0.5).abs() < 1e-12);
        assert!((report.xi[0] - ln2).abs() < 1e-12);
        assert!((report.xi[1] - ln2).abs() < 1e-12);
        assert!((report.entropy - ln2).abs() < 1e-12);
        assert!(report.diag_defect < 1e-14);
        for tau in 0..4 {
            assert!((report.g_onsite[0][tau] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eh_report_rejects_bad_inputs() {
        let rho = DMatrix::from_diagonal_element(2, 2, 0.5);
        assert_eq!(eh_report(&rho, 1, 1).unwrap_err(), EdError::ReplicaPowerTooSmall { n_rep: 1 });
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(eh_report(&zero, 1, 2).unwrap_err(), EdError::ZeroTrace);
    }

    #[test]
    fn infinite_temperature_m2() {
        // beta = 0: independent spins give <m_bar^2> = 1/(4N).
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let coup = Couplings::new(1.0, 3.0).unwrap();
        let h = build_hamiltonian(&lat, &coup, 0.0).unwrap();
        let spec = diagonalize(h);
        let obs = thermal_observables(&spec, &lat, 0.0);
        assert!((obs.scalars.m2 - 1.0 / 32.0).abs() < 1e-12);
        assert!(obs.scalars.chi.abs() < 1e-12);
    }

    #[test]
    fn weak_coupling_ground_state_m2() {
        // As g -> 0+ at large beta the two inter-layer-antialigned FM
        // sectors dominate and <m_bar^2> -> 1/4.
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let coup = Couplings::new(1.0, 0.05).unwrap();
        let h = build_hamiltonian(&lat, &coup, 0.0).unwrap();
        let spec = diagonalize(h);
        let obs = thermal_observables(&spec, &lat, 200.0);
        assert!((obs.scalars.m2 - 0.25).abs() < 0.02, "m2 = {}", obs.scalars.m2);
    }

    #[test]
    fn unperturbed_rdm_is_diagonal_and_field_breaks_it() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        for g in [0.5, 1.0, 3.0, 5.0] {
            for beta in [1.0, 4.0, 8.0] {
                let coup = Couplings::new(1.0, g).unwrap();
                let h = build_hamiltonian(&lat, &coup, 0.0).unwrap();
                let spec = diagonalize(h);
                let rho_a = reduce_to_a(&thermal_rho(&spec, beta), lat.n_sites_per_layer);
                let report = eh_report(&rho_a, lat.l, 4).unwrap();
                assert!(
                    report.diag_defect < 1e-12,
                    "d = {} at g = {g}, beta = {beta}",
                    report.diag_defect
                );
                for g_site in &report.g_onsite {
                    for (tau, val) in g_site.iter().enumerate() {
                        assert!((val - 1.0).abs() < 1e-10, "G(tau={tau}) = {val}");
                    }
                }
            }
        }

        let coup = Couplings::new(1.0, 3.0).unwrap();
        let h = build_hamiltonian(&lat, &coup, 0.5).unwrap();
        let spec = diagonalize(h);
        let rho_a = reduce_to_a(&thermal_rho(&spec, 8.0), lat.n_sites_per_layer);
        let report = eh_report(&rho_a, lat.l, 4).unwrap();
        assert!(report.diag_defect > 1e-3, "d = {}", report.diag_defect);
        for g_site in &report.g_onsite {
            assert!(g_site[1] < 1.0 - 1e-6, "G(1) = {}", g_site[1]);
        }
    }

    #[test]
    fn entropy_grows_with_coupling() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let mut prev = -1.0;
        for g in [0.5, 1.0, 3.0, 5.0] {
            let coup = Couplings::new(1.0, g).unwrap();
            let h = build_hamiltonian(&lat, &coup, 0.0).unwrap();
            let spec = diagonalize(h);
            let rho_a = reduce_to_a(&thermal_rho(&spec, 8.0), lat.n_sites_per_layer);
            let report = eh_report(&rho_a, lat.l, 2).unwrap();
            assert!(
                report.entropy > prev,
                "entropy {} not increasing at g = {g}",
                report.entropy
            );
            prev = report.entropy;
        }
    }
}
