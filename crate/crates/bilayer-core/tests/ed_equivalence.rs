//! Cross-check of the Monte Carlo estimators against exact
//! diagonalization on a 2 x 2 open bilayer.

use bilayer_core::ed;
use bilayer_core::estimators::{summarize, ObservableSeries, Recorder, SeriesMeta};
use bilayer_core::lattice::{Boundary, LatticeSpec};
use bilayer_core::sse::{mc_sweep, Couplings, SseConfig, SweepContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run_qmc(
    lat: &LatticeSpec,
    coup: &Couplings,
    beta: f64,
    seed: u64,
    equil: u64,
    n_bins: u64,
    bin_size: u64,
) -> ObservableSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut configs = vec![SseConfig::new(lat, beta, &mut rng)];
    let mut ctx = SweepContext::new();
    for _ in 0..equil {
        mc_sweep(&mut configs, lat, coup, &mut rng, &mut ctx);
        configs[0].adjust_cutoff();
    }
    let mut rec = Recorder::new(lat, bin_size, true, true);
    for _ in 0..n_bins * bin_size {
        mc_sweep(&mut configs, lat, coup, &mut rng, &mut ctx);
        rec.measure(&configs[0], lat);
    }
    let meta = SeriesMeta {
        l: lat.l,
        boundary: lat.boundary,
        g: coup.g,
        beta,
        seed,
        equil_sweeps: equil,
        n_bins,
        bin_size,
    };
    summarize(&rec, lat, coup, meta)
}

#[test]
fn sampler_reproduces_exact_thermal_observables() {
    let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
    let coup = Couplings::new(1.0, 3.0).unwrap();
    let beta = 8.0;

    let h = ed::build_hamiltonian(&lat, &coup, 0.0).unwrap();
    let spec = ed::diagonalize(h);
    let exact = ed::thermal_observables(&spec, &lat, beta);

    let series = run_qmc(&lat, &coup, beta, 91, 5_000, 40, 1_000);

    let check = |label: &str, target: f64, floor: f64| {
        let tr = series.trace(label).unwrap();
        let tol = 3.0 * tr.error + floor;
        assert!(
            (tr.mean - target).abs() < tol,
            "{label}: qmc {} vs exact {target}, tol {tol}",
            tr.mean
        );
    };
    check("energy", exact.scalars.energy, 1e-4);
    check("m_abs", exact.scalars.m_abs, 1e-5);
    check("m2", exact.scalars.m2, 1e-5);
    check("m4", exact.scalars.m4, 1e-6);
    check("binder", exact.scalars.binder.unwrap(), 1e-4);
    check("chi", exact.scalars.chi, 1e-4);
    for (r, &target) in exact.corr_a.iter().enumerate() {
        let label = format!("G_{}_{}", r % lat.l, r / lat.l);
        check(&label, target, 1e-5);
    }
}

#[test]
fn sampler_visits_diagonal_and_offdiagonal_sectors() {
    let lat = LatticeSpec::new(2, Boundary::Open).unwrap();
    let coup = Couplings::new(1.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut configs = vec![SseConfig::new(&lat, 1.0, &mut rng)];
    let mut ctx = SweepContext::new();
    let mut saw_empty_offdiag = false;
    let mut saw_offdiag = false;
    for _ in 0..20_000 {
        mc_sweep(&mut configs, &lat, &coup, &mut rng, &mut ctx);
        configs[0].adjust_cutoff();
        match configs[0].n2 {
            0 => saw_empty_offdiag = true,
            n if n >= 2 => saw_offdiag = true,
            _ => {}
        }
    }
    assert!(saw_empty_offdiag, "never visited the purely diagonal sector");
    assert!(saw_offdiag, "never inserted off-diagonal operators");
}
