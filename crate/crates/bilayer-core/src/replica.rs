//! Replica manifold realizing Tr(rho_A^n) and the entanglement-Hamiltonian
//! imaginary-time correlators.
//!
//! The manifold is `n_rep` SSE configurations at the physical beta whose
//! layer-A world lines are glued cyclically: propagating replica k maps its
//! initial state to one whose A part equals replica k+1's initial A part,
//! while each B part is time-periodic within its own replica. The replica
//! index of a seam plays the role of the EH imaginary time tau, so
//! correlators are measured between seam pairs a fixed tau apart, averaged
//! over all n_rep seams.
//!
//! Spin convention for the correlators: sigma = 2 S^z, so the on-site
//! correlator of a seam with itself is exactly 1 and a fully polarized
//! layer gives G(Gamma, tau) = 1 with all other momenta 0.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::estimators::mean_and_error;
use crate::lattice::{fourier_correlations, LatticeSpec};
use crate::sse::{mc_sweep, Couplings, SseConfig, SweepContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplicaError {
    ReplicaCountTooSmall { n_rep: usize },
}

impl fmt::Display for ReplicaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplicaError::ReplicaCountTooSmall { n_rep } => {
                write!(f, "replica manifold needs n_rep >= 2, got {n_rep}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ReplicaError {}

/// `n_rep` glued configurations; the slice ordering is the cyclic replica
/// order used by the sweep kernels.
#[derive(Debug, Clone)]
pub struct ReplicaManifold {
    pub replicas: Vec<SseConfig>,
}

impl ReplicaManifold {
    pub fn n_rep(&self) -> usize {
        self.replicas.len()
    }

    /// Construct with empty operator strings: every replica shares the same
    /// random layer-A state (the glue constraint at n = 0) while layer-B
    /// states are drawn independently.
    pub fn build(
        lat: &LatticeSpec,
        beta: f64,
        n_rep: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ReplicaError> {
        if n_rep < 2 {
            return Err(ReplicaError::ReplicaCountTooSmall { n_rep });
        }
        let first = SseConfig::new(lat, beta, rng);
        let mut replicas = Vec::with_capacity(n_rep);
        replicas.push(first);
        for _ in 1..n_rep {
            let mut cfg = replicas[0].clone();
            for site in lat.n_sites_per_layer..lat.n_spins {
                cfg.state[site] = if rng.gen::<bool>() { 1 } else { -1 };
            }
            replicas.push(cfg);
        }
        Ok(ReplicaManifold { replicas })
    }

    /// One Monte Carlo sweep of the whole manifold.
    pub fn sweep(
        &mut self,
        lat: &LatticeSpec,
        coup: &Couplings,
        rng: &mut ChaCha8Rng,
        ctx: &mut SweepContext,
    ) {
        mc_sweep(&mut self.replicas, lat, coup, rng, ctx);
    }

    pub fn adjust_cutoffs(&mut self) {
        for cfg in &mut self.replicas {
            cfg.adjust_cutoff();
        }
    }
}

/// Binned accumulator for the seam correlators.
#[derive(Debug, Clone)]
pub struct ManifoldRecorder {
    pub bin_size: u64,
    n_rep: usize,
    n_sites: usize,
    count: u64,
    acc_onsite: Vec<f64>,
    acc_momentum: Vec<f64>,
    /// Bin-major `[bin][site * n_rep + tau]`.
    pub bins_onsite: Vec<f64>,
    /// Bin-major `[bin][k * n_rep + tau]`.
    pub bins_momentum: Vec<f64>,
    field: Vec<f64>,
    sk: Vec<Vec<Complex64>>,
}

impl ManifoldRecorder {
    pub fn new(lat: &LatticeSpec, n_rep: usize, bin_size: u64) -> Self {
        let n_sites = lat.n_sites_per_layer;
        ManifoldRecorder {
            bin_size,
            n_rep,
            n_sites,
            count: 0,
            acc_onsite: alloc::vec![0.0; n_sites * n_rep],
            acc_momentum: alloc::vec![0.0; n_sites * n_rep],
            bins_onsite: Vec::new(),
            bins_momentum: Vec::new(),
            field: alloc::vec![0.0; n_sites],
            sk: alloc::vec![Vec::new(); n_rep],
        }
    }

    pub fn completed_bins(&self) -> usize {
        if self.n_sites == 0 {
            return 0;
        }
        self.bins_onsite.len() / (self.n_sites * self.n_rep)
    }

    /// Record one post-sweep manifold configuration.
    pub fn measure(&mut self, man: &ReplicaManifold, lat: &LatticeSpec) {
        let n = self.n_rep;
        debug_assert_eq!(man.n_rep(), n);
        let na = self.n_sites;

        for (j, cfg) in man.replicas.iter().enumerate() {
            for (r, f) in self.field.iter_mut().enumerate() {
                *f = cfg.state[r] as f64;
            }
            let ck = fourier_correlations(&self.field, lat.l).expect("grid matches");
            let inv = 1.0 / na as f64;
            self.sk[j] = ck.into_iter().map(|c| c * inv).collect();
        }

        let inv_n = 1.0 / n as f64;
        for site in 0..na {
            for tau in 0..n {
                let mut acc = 0i64;
                for j in 0..n {
                    let a = man.replicas[j].state[site] as i64;
                    let b = man.replicas[(j + tau) % n].state[site] as i64;
                    acc += a * b;
                }
                self.acc_onsite[site * n + tau] += acc as f64 * inv_n;
            }
        }
        for k in 0..na {
            for tau in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    let prod = self.sk[(j + tau) % n][k] * self.sk[j][k].conj();
                    acc += prod.re;
                }
                self.acc_momentum[k * n + tau] += acc * inv_n;
            }
        }

        self.count += 1;
        if self.count == self.bin_size {
            let inv = 1.0 / self.bin_size as f64;
            self.bins_onsite.extend(self.acc_onsite.iter().map(|a| a * inv));
            self.bins_momentum.extend(self.acc_momentum.iter().map(|a| a * inv));
            for a in &mut self.acc_onsite {
                *a = 0.0;
            }
            for a in &mut self.acc_momentum {
                *a = 0.0;
            }
            self.count = 0;
        }
    }

    /// Restore a recorder from completed bin means (checkpoint resume).
    pub fn from_bins(
        lat: &LatticeSpec,
        n_rep: usize,
        bin_size: u64,
        bins_onsite: Vec<f64>,
        bins_momentum: Vec<f64>,
    ) -> Self {
        let mut rec = ManifoldRecorder::new(lat, n_rep, bin_size);
        rec.bins_onsite = bins_onsite;
        rec.bins_momentum = bins_momentum;
        rec
    }

    /// Reduce to means and standard errors.
    pub fn summarize(&self) -> EhEstimate {
        let nb = self.completed_bins();
        let stride = self.n_sites * self.n_rep;
        let reduce = |bins: &[f64]| -> Vec<(f64, f64)> {
            (0..stride)
                .map(|idx| {
                    let series: Vec<f64> = (0..nb).map(|b| bins[b * stride + idx]).collect();
                    mean_and_error(&series)
                })
                .collect()
        };
        EhEstimate {
            n_rep: self.n_rep,
            n_sites: self.n_sites,
            g_onsite: reduce(&self.bins_onsite),
            g_momentum: reduce(&self.bins_momentum),
            n_bins: nb,
        }
    }
}

/// Seam-correlator estimates: `(mean, standard error)` per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EhEstimate {
    pub n_rep: usize,
    pub n_sites: usize,
    /// `[site * n_rep + tau]`.
    pub g_onsite: Vec<(f64, f64)>,
    /// `[k * n_rep + tau]`, momentum-grid order.
    pub g_momentum: Vec<(f64, f64)>,
    pub n_bins: usize,
}

impl EhEstimate {
    pub fn onsite(&self, site: usize, tau: usize) -> (f64, f64) {
        self.g_onsite[site * self.n_rep + tau]
    }

    pub fn momentum(&self, k: usize, tau: usize) -> (f64, f64) {
        self.g_momentum[k * self.n_rep + tau]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::sse::check::check_configs;
    use rand::SeedableRng;

    #[test]
    fn rejects_single_replica() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            ReplicaManifold::build(&lat, 4.0, 1, &mut rng).unwrap_err(),
            ReplicaError::ReplicaCountTooSmall { n_rep: 1 }
        );
    }

    #[test]
    fn fresh_manifold_shares_layer_a() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let man = ReplicaManifold::build(&lat, 4.0, 2, &mut rng).unwrap();
        for site in 0..lat.n_sites_per_layer {
            assert_eq!(man.replicas[0].state[site], man.replicas[1].state[site]);
        }
        check_configs(&man.replicas, &lat).unwrap();
    }

    #[test]
    fn invariants_hold_over_many_sweeps() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let coup = Couplings::new(1.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut man = ReplicaManifold::build(&lat, 2.0, 3, &mut rng).unwrap();
        let mut ctx = SweepContext::new();
        for sweep in 0..1000 {
            man.sweep(&lat, &coup, &mut rng, &mut ctx);
            man.adjust_cutoffs();
            if sweep % 100 == 0 {
                check_configs(&man.replicas, &lat).unwrap();
            }
        }
        check_configs(&man.replicas, &lat).unwrap();
        assert!(man.replicas.iter().any(|c| c.n > 0));
    }

    #[test]
    fn onsite_correlator_is_identically_one() {
        // Layer-B periodicity forces an even number of spin flips per
        // replica on every layer-A world line, so all seams agree site by
        // site and the on-site estimator is 1 for every tau in every
        // configuration, with zero variance.
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let coup = Couplings::new(1.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut man = ReplicaManifold::build(&lat, 4.0, 4, &mut rng).unwrap();
        let mut ctx = SweepContext::new();
        let mut rec = ManifoldRecorder::new(&lat, 4, 10);
        for _ in 0..200 {
            man.sweep(&lat, &coup, &mut rng, &mut ctx);
            man.adjust_cutoffs();
            rec.measure(&man, &lat);
        }
        let est = rec.summarize();
        assert_eq!(est.n_bins, 20);
        for site in 0..lat.n_sites_per_layer {
            for tau in 0..4 {
                let (mean, err) = est.onsite(site, tau);
                assert!((mean - 1.0).abs() < 1e-12);
                assert!(err < 1e-12);
            }
        }
    }

    #[test]
    fn momentum_correlator_is_flat_in_tau() {
        let lat = LatticeSpec::new(3, Boundary::Periodic).unwrap();
        let coup = Couplings::new(1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut man = ReplicaManifold::build(&lat, 3.0, 3, &mut rng).unwrap();
        let mut ctx = SweepContext::new();
        let mut rec = ManifoldRecorder::new(&lat, 3, 5);
        for _ in 0..100 {
            man.sweep(&lat, &coup, &mut rng, &mut ctx);
            man.adjust_cutoffs();
            rec.measure(&man, &lat);
        }
        let est = rec.summarize();
        for k in 0..lat.n_sites_per_layer {
            let (g0, _) = est.momentum(k, 0);
            for tau in 1..3 {
                let (g, _) = est.momentum(k, tau);
                assert!((g - g0).abs() < 1e-12, "k = {k}, tau = {tau}");
            }
        }
    }

    #[test]
    fn polarized_seams_give_plane_wave_orthogonality() {
        let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut man = ReplicaManifold::build(&lat, 4.0, 2, &mut rng).unwrap();
        for cfg in &mut man.replicas {
            for s in cfg.state.iter_mut() {
                *s = 1;
            }
        }
        let mut rec = ManifoldRecorder::new(&lat, 2, 1);
        rec.measure(&man, &lat);
        let est = rec.summarize();
        for tau in 0..2 {
            let (gamma, _) = est.momentum(0, tau);
            assert!((gamma - 1.0).abs() < 1e-12);
            for k in 1..lat.n_sites_per_layer {
                let (g, _) = est.momentum(k, tau);
                assert!(g.abs() < 1e-12);
            }
        }
    }
}
