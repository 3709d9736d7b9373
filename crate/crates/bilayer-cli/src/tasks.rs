//! Simulation of single points and grids: equilibrate, measure in bins,
//! checkpoint at bin boundaries, summarize.
//!
//! A point is fully identified by its [`PointSpec`]; the spec fingerprint
//! names the checkpoint file, so resuming after an interruption replays
//! the remaining bins on the same random stream and reproduces the
//! uninterrupted run bit for bit.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use bilayer_core::estimators::{summarize, ObservableSeries, Recorder, SeriesMeta};
use bilayer_core::lattice::{Boundary, LatticeSpec};
use bilayer_core::replica::{EhEstimate, ManifoldRecorder, ReplicaManifold};
use bilayer_core::sse::{mc_sweep, Couplings, OpCode, SseConfig, SweepContext};

use crate::checkpoint::{ChainCheckpoint, ConfigSnapshot, Payload};
use crate::config::{Mode, RunConfig};
use crate::error::CliError;
use crate::seed::chain_seed;

/// Everything that determines a single simulated point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    pub l: u32,
    pub boundary: Boundary,
    pub j: f64,
    pub g: f64,
    pub beta: f64,
    pub equil_sweeps: u64,
    pub bins: u64,
    pub bin_size: u64,
    pub slice_average: bool,
    pub measure_correlations: bool,
    pub master_seed: u64,
    /// 1 runs a plain chain; >= 2 runs the glued replica manifold.
    pub n_rep: usize,
    /// Checkpoint after every this many completed bins; 0 disables.
    pub checkpoint_every_bins: u64,
    pub checkpoint_dir: Option<PathBuf>,
    /// Abort with [`CliError::StoppedEarly`] once this many bins are done.
    pub stop_after_bins: Option<u64>,
}

impl PointSpec {
    /// Hash of every field that affects the Markov chain. Checkpoints
    /// carry it so a stale or foreign file can never be resumed.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"bilayer-ckpt-v1");
        h.update(self.l.to_le_bytes());
        h.update([match self.boundary {
            Boundary::Periodic => 0u8,
            Boundary::Open => 1,
        }]);
        h.update(self.j.to_bits().to_le_bytes());
        h.update(self.g.to_bits().to_le_bytes());
        h.update(self.beta.to_bits().to_le_bytes());
        h.update(self.equil_sweeps.to_le_bytes());
        h.update(self.bins.to_le_bytes());
        h.update(self.bin_size.to_le_bytes());
        h.update([self.slice_average as u8, self.measure_correlations as u8]);
        h.update((self.n_rep as u32).to_le_bytes());
        h.update(chain_seed(self.master_seed, self.l, self.g, 0));
        h.finalize().into()
    }

    /// Checkpoint file name, derived from the fingerprint so distinct
    /// points in one output directory never collide.
    pub fn checkpoint_file(&self) -> String {
        let fp = self.fingerprint();
        let short: String = fp[..8].iter().map(|b| format!("{b:02x}")).collect();
        format!("point-{short}.ckpt")
    }

    fn checkpoint_path(&self) -> Option<PathBuf> {
        if self.checkpoint_every_bins == 0 {
            return None;
        }
        self.checkpoint_dir
            .as_ref()
            .map(|d| d.join(self.checkpoint_file()))
    }
}

/// Expand a run configuration into the grid of points it describes, in
/// the deterministic output order (sizes outer, couplings inner).
pub fn specs_from_config(cfg: &RunConfig, stop_after_bins: Option<u64>) -> Vec<PointSpec> {
    let n_rep = match cfg.mode {
        Mode::ReplicaEh => cfg.run.n_rep.unwrap_or(2),
        _ => 1,
    };
    let ckpt_dir =
        (cfg.run.checkpoint_every_bins > 0).then(|| cfg.out_dir.join("checkpoints"));
    let mut specs = Vec::new();
    for &l in &cfg.ls() {
        for &g in &cfg.gs() {
            specs.push(PointSpec {
                l,
                boundary: cfg.boundary(),
                j: cfg.couplings.j,
                g,
                beta: cfg.beta_for(l),
                equil_sweeps: cfg.run.equil_sweeps,
                bins: cfg.run.bins,
                bin_size: cfg.run.bin_size,
                slice_average: cfg.run.slice_average,
                measure_correlations: cfg.run.measure_correlations,
                master_seed: cfg.seed,
                n_rep,
                checkpoint_every_bins: cfg.run.checkpoint_every_bins,
                checkpoint_dir: ckpt_dir.clone(),
                stop_after_bins,
            });
        }
    }
    specs
}

#[derive(Debug, Clone)]
pub enum PointResult {
    Series(ObservableSeries),
    Replica(EhEstimate),
}

enum Rec {
    Plain(Recorder),
    Manifold(ManifoldRecorder),
}

/// Simulate one point, resuming from its checkpoint when one exists.
pub fn run_point(spec: &PointSpec) -> Result<PointResult, CliError> {
    let lat = LatticeSpec::new(spec.l as usize, spec.boundary)?;
    let coup = Couplings::new(spec.j, spec.g)?;
    let seed = chain_seed(spec.master_seed, spec.l, spec.g, 0);
    let fp = spec.fingerprint();
    let ckpt_path = spec.checkpoint_path();

    let mut rng = ChaCha8Rng::from_seed(seed);
    let mut ctx = SweepContext::new();

    let resume = match &ckpt_path {
        Some(p) if p.exists() => Some((ChainCheckpoint::load(p, &fp)?, p.clone())),
        _ => None,
    };

    let (mut man, mut rec, start_bin) = match resume {
        Some((ck, path)) => {
            rng = ChaCha8Rng::from_seed(ck.rng_seed);
            rng.set_word_pos(ck.rng_word_pos);
            let man = restore_manifold(&ck, &lat, &path)?;
            let rec = restore_recorder(&ck, &lat, spec, &path)?;
            (man, rec, ck.completed_bins)
        }
        None => {
            let man = if spec.n_rep >= 2 {
                ReplicaManifold::build(&lat, spec.beta, spec.n_rep, &mut rng)?
            } else {
                ReplicaManifold {
                    replicas: vec![SseConfig::new(&lat, spec.beta, &mut rng)],
                }
            };
            let rec = if spec.n_rep >= 2 {
                Rec::Manifold(ManifoldRecorder::new(&lat, spec.n_rep, spec.bin_size))
            } else {
                Rec::Plain(Recorder::new(
                    &lat,
                    spec.bin_size,
                    spec.slice_average,
                    spec.measure_correlations,
                ))
            };
            (man, rec, 0)
        }
    };

    // The cutoff is grown during equilibration only, so the measurement
    // phase (and everything a checkpoint captures) runs at fixed M.
    if start_bin == 0 {
        for _ in 0..spec.equil_sweeps {
            mc_sweep(&mut man.replicas, &lat, &coup, &mut rng, &mut ctx);
            man.adjust_cutoffs();
        }
    }

    for bin in start_bin..spec.bins {
        for _ in 0..spec.bin_size {
            mc_sweep(&mut man.replicas, &lat, &coup, &mut rng, &mut ctx);
            match &mut rec {
                Rec::Plain(r) => r.measure(&man.replicas[0], &lat),
                Rec::Manifold(r) => r.measure(&man, &lat),
            }
        }
        let done = bin + 1;
        if let Some(path) = &ckpt_path {
            if done % spec.checkpoint_every_bins == 0 || done == spec.bins {
                save_checkpoint(path, &fp, done, seed, &rng, &man, &rec, spec)?;
            }
        }
        if spec.stop_after_bins.is_some_and(|s| done >= s) && done < spec.bins {
            return Err(CliError::StoppedEarly {
                completed_bins: done,
            });
        }
    }

    Ok(match rec {
        Rec::Plain(r) => {
            let meta = SeriesMeta {
                l: spec.l as usize,
                boundary: spec.boundary,
                g: spec.g,
                beta: spec.beta,
                seed: spec.master_seed,
                equil_sweeps: spec.equil_sweeps,
                n_bins: spec.bins,
                bin_size: spec.bin_size,
            };
            PointResult::Series(summarize(&r, &lat, &coup, meta))
        }
        Rec::Manifold(r) => PointResult::Replica(r.summarize()),
    })
}

/// Simulate a grid of points on `workers` threads. Each point's chain is
/// seeded independently of scheduling, and results come back in spec
/// order, so the output is identical for every worker count.
pub fn run_points(specs: &[PointSpec], workers: usize) -> Result<Vec<PointResult>, CliError> {
    if workers <= 1 || specs.len() <= 1 {
        return specs.iter().map(run_point).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| specs.par_iter().map(run_point).collect())
}

fn restore_manifold(
    ck: &ChainCheckpoint,
    lat: &LatticeSpec,
    path: &Path,
) -> Result<ReplicaManifold, CliError> {
    let bad = |reason: &str| CliError::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if ck.configs.is_empty() {
        return Err(bad("no configurations"));
    }
    let mut replicas = Vec::with_capacity(ck.configs.len());
    for snap in &ck.configs {
        if snap.state.len() != lat.n_spins {
            return Err(bad("state length does not match the lattice"));
        }
        if snap.state.iter().any(|&s| s != 1 && s != -1) {
            return Err(bad("invalid spin value"));
        }
        let mut ops = Vec::with_capacity(snap.ops.len());
        for &bits in &snap.ops {
            let op = OpCode::from_bits(bits).ok_or_else(|| bad("invalid operator code"))?;
            if !op.is_null() && op.bond() >= lat.bonds.len() {
                return Err(bad("operator bond index out of range"));
            }
            ops.push(op);
        }
        replicas.push(SseConfig {
            state: snap.state.clone(),
            ops,
            n: snap.n as usize,
            n2: snap.n2 as usize,
            beta: snap.beta,
        });
    }
    Ok(ReplicaManifold { replicas })
}

fn restore_recorder(
    ck: &ChainCheckpoint,
    lat: &LatticeSpec,
    spec: &PointSpec,
    path: &Path,
) -> Result<Rec, CliError> {
    let bad = |reason: &str| CliError::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let nb = ck.completed_bins as usize;
    match &ck.payload {
        Payload::Estimators {
            n_corr,
            bins_abs_m,
            bins_m2,
            bins_m4,
            bins_n,
            bins_corr,
        } => {
            if spec.n_rep != 1 {
                return Err(bad("scalar payload in a replica run"));
            }
            let expect_corr = if spec.measure_correlations {
                lat.n_sites_per_layer
            } else {
                0
            };
            if *n_corr as usize != expect_corr
                || bins_abs_m.len() != nb
                || bins_m2.len() != nb
                || bins_m4.len() != nb
                || bins_n.len() != nb
                || bins_corr.len() != nb * expect_corr
            {
                return Err(bad("payload shape does not match the run"));
            }
            Ok(Rec::Plain(Recorder::from_bins(
                lat,
                spec.bin_size,
                spec.slice_average,
                spec.measure_correlations,
                bins_abs_m.clone(),
                bins_m2.clone(),
                bins_m4.clone(),
                bins_n.clone(),
                bins_corr.clone(),
            )))
        }
        Payload::Replica {
            n_rep,
            n_sites,
            bins_onsite,
            bins_momentum,
        } => {
            if spec.n_rep < 2 {
                return Err(bad("replica payload in a scalar run"));
            }
            let stride = spec.n_rep * lat.n_sites_per_layer;
            if *n_rep as usize != spec.n_rep
                || *n_sites as usize != lat.n_sites_per_layer
                || bins_onsite.len() != nb * stride
                || bins_momentum.len() != nb * stride
            {
                return Err(bad("payload shape does not match the run"));
            }
            Ok(Rec::Manifold(ManifoldRecorder::from_bins(
                lat,
                spec.n_rep,
                spec.bin_size,
                bins_onsite.clone(),
                bins_momentum.clone(),
            )))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn save_checkpoint(
    path: &Path,
    fp: &[u8; 32],
    completed_bins: u64,
    seed: [u8; 32],
    rng: &ChaCha8Rng,
    man: &ReplicaManifold,
    rec: &Rec,
    spec: &PointSpec,
) -> Result<(), CliError> {
    let configs = man
        .replicas
        .iter()
        .map(|c| ConfigSnapshot {
            beta: c.beta,
            n: c.n as u64,
            n2: c.n2 as u64,
            state: c.state.clone(),
            ops: c.ops.iter().map(|o| o.to_bits()).collect(),
        })
        .collect();
    let payload = match rec {
        Rec::Plain(r) => Payload::Estimators {
            n_corr: r.n_corr as u32,
            bins_abs_m: r.bins_abs_m.clone(),
            bins_m2: r.bins_m2.clone(),
            bins_m4: r.bins_m4.clone(),
            bins_n: r.bins_n.clone(),
            bins_corr: r.bins_corr.clone(),
        },
        Rec::Manifold(r) => Payload::Replica {
            n_rep: spec.n_rep as u32,
            n_sites: spec.l * spec.l,
            bins_onsite: r.bins_onsite.clone(),
            bins_momentum: r.bins_momentum.clone(),
        },
    };
    ChainCheckpoint {
        fingerprint: *fp,
        completed_bins,
        rng_seed: seed,
        rng_word_pos: rng.get_word_pos(),
        configs,
        payload,
    }
    .save(path)
}
