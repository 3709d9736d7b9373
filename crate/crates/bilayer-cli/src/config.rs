//! TOML run configuration.
//!
//! ```toml
//! mode = "observables"        # observables | replica-eh | ed
//! seed = 1                    # master seed (default 0)
//! workers = 4                 # worker threads (default: all cores)
//! out_dir = "out"             # output directory (default "out")
//!
//! [lattice]
//! l = 8                       # or l_values = [8, 12, 16]
//! boundary = "periodic"       # periodic | open
//!
//! [couplings]
//! j = 1.0
//! g = 3.0                     # or g_values = [2.9, 2.95, ...]
//!
//! [run]
//! beta = 16.0                 # or beta_policy = "2l" (the default)
//! equil_sweeps = 1000
//! bins = 20
//! bin_size = 100
//! slice_average = false
//! measure_correlations = false
//! checkpoint_every_bins = 1   # 0 disables checkpointing
//! n_rep = 4                   # replica-eh mode only
//! h_field = 0.0               # ed mode: transverse field on layer A
//! ```
//!
//! Unknown keys are rejected. A parsed config serializes back to an
//! equivalent document.

use std::path::PathBuf;

use bilayer_core::lattice::Boundary;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Observables,
    ReplicaEh,
    Ed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCfg {
    Periodic,
    Open,
}

impl From<BoundaryCfg> for Boundary {
    fn from(b: BoundaryCfg) -> Boundary {
        match b {
            BoundaryCfg::Periodic => Boundary::Periodic,
            BoundaryCfg::Open => Boundary::Open,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaPolicy {
    /// `beta = 2 L`, targeting ground-state behavior.
    #[serde(rename = "2l")]
    TwiceL,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_values: Option<Vec<u32>>,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryCfg,
}

fn default_boundary() -> BoundaryCfg {
    BoundaryCfg::Periodic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingsSection {
    #[serde(default = "default_j")]
    pub j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_values: Option<Vec<f64>>,
}

fn default_j() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_policy: Option<BetaPolicy>,
    #[serde(default = "default_equil")]
    pub equil_sweeps: u64,
    #[serde(default = "default_bins")]
    pub bins: u64,
    #[serde(default = "default_bin_size")]
    pub bin_size: u64,
    #[serde(default)]
    pub slice_average: bool,
    #[serde(default)]
    pub measure_correlations: bool,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every_bins: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rep: Option<usize>,
    #[serde(default)]
    pub h_field: f64,
}

fn default_equil() -> u64 {
    1000
}
fn default_bins() -> u64 {
    20
}
fn default_bin_size() -> u64 {
    100
}
fn default_checkpoint_every() -> u64 {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            beta: None,
            beta_policy: None,
            equil_sweeps: default_equil(),
            bins: default_bins(),
            bin_size: default_bin_size(),
            slice_average: false,
            measure_correlations: false,
            checkpoint_every_bins: default_checkpoint_every(),
            n_rep: None,
            h_field: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub lattice: LatticeSection,
    pub couplings: CouplingsSection,
    #[serde(default)]
    pub run: RunSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |msg: String| Err(CliError::Config(msg));

        if !(self.couplings.j > 0.0) {
            return err(format!("couplings.j must be > 0, got {}", self.couplings.j));
        }
        for &g in self.gs().iter() {
            if !(g >= 0.0) {
                return err(format!("coupling ratio g must be >= 0, got {g}"));
            }
        }
        match (self.lattice.l, &self.lattice.l_values) {
            (Some(_), Some(_)) => {
                return err("set either lattice.l or lattice.l_values, not both".into())
            }
            (None, None) => return err("lattice.l or lattice.l_values is required".into()),
            (None, Some(v)) if v.is_empty() => {
                return err("lattice.l_values must not be empty".into())
            }
            _ => {}
        }
        match (self.couplings.g, &self.couplings.g_values) {
            (Some(_), Some(_)) => {
                return err("set either couplings.g or couplings.g_values, not both".into())
            }
            (None, None) => return err("couplings.g or couplings.g_values is required".into()),
            (None, Some(v)) if v.is_empty() => {
                return err("couplings.g_values must not be empty".into())
            }
            _ => {}
        }
        if let (Some(_), Some(_)) = (self.run.beta, self.run.beta_policy) {
            return err("set either run.beta or run.beta_policy, not both".into());
        }
        if let Some(beta) = self.run.beta {
            if !(beta > 0.0) {
                return err(format!("run.beta must be > 0, got {beta}"));
            }
        }
        if self.run.bins == 0 || self.run.bin_size == 0 {
            return err("run.bins and run.bin_size must be >= 1".into());
        }
        if self.workers == Some(0) {
            return err("workers must be >= 1".into());
        }
        match self.mode {
            Mode::ReplicaEh => match self.run.n_rep {
                None => return err("mode replica-eh requires run.n_rep".into()),
                Some(n) if n < 2 => {
                    return err(format!("run.n_rep must be >= 2, got {n}"));
                }
                _ => {}
            },
            Mode::Ed => {
                if self.lattice.l_values.is_some() || self.couplings.g_values.is_some() {
                    return err("mode ed takes a single lattice.l and couplings.g".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn ls(&self) -> Vec<u32> {
        match (&self.lattice.l_values, self.lattice.l) {
            (Some(v), _) => v.clone(),
            (None, Some(l)) => vec![l],
            (None, None) => Vec::new(),
        }
    }

    pub fn gs(&self) -> Vec<f64> {
        match (&self.couplings.g_values, self.couplings.g) {
            (Some(v), _) => v.clone(),
            (None, Some(g)) => vec![g],
            (None, None) => Vec::new(),
        }
    }

    /// Inverse temperature for a given size: explicit `beta` or the 2L
    /// policy (the default when neither field is set).
    pub fn beta_for(&self, l: u32) -> f64 {
        match (self.run.beta, self.run.beta_policy) {
            (Some(beta), _) => beta,
            (None, _) => 2.0 * l as f64,
        }
    }

    pub fn boundary(&self) -> Boundary {
        self.lattice.boundary.into()
    }
}
