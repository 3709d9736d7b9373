//! Output tables and their CSV/JSON encodings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use bilayer_core::estimators::ObservableSeries;
use bilayer_core::replica::EhEstimate;

use crate::error::CliError;

/// One scalar observable estimate at a single simulated point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub l: usize,
    pub g: f64,
    pub beta: f64,
    pub seed: u64,
    pub observable: String,
    pub mean: f64,
    pub error: f64,
    pub n_bins: u64,
}

/// Entanglement-spectrum momentum correlator at one replica index offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaMomentumRow {
    pub l: usize,
    pub g: f64,
    pub beta: f64,
    pub n_rep: usize,
    pub k_m: usize,
    pub k_n: usize,
    pub tau: usize,
    #[serde(rename = "G")]
    pub g_value: f64,
    pub error: f64,
}

/// On-site replica correlator for one site and replica index offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaOnsiteRow {
    pub l: usize,
    pub g: f64,
    pub beta: f64,
    pub n_rep: usize,
    pub site: usize,
    pub tau: usize,
    #[serde(rename = "G")]
    pub g_value: f64,
    pub error: f64,
}

/// Flattens a per-point series into output rows, one per observable,
/// with correlation entries labelled `G_{dx}_{dy}`.
pub fn rows_from_series(series: &ObservableSeries) -> Vec<EstimatorRow> {
    let meta = &series.meta;
    series
        .traces
        .iter()
        .map(|tr| EstimatorRow {
            l: meta.l,
            g: meta.g,
            beta: meta.beta,
            seed: meta.seed,
            observable: tr.label.clone(),
            mean: tr.mean,
            error: tr.error,
            n_bins: meta.n_bins,
        })
        .collect()
}

pub fn momentum_rows(
    est: &EhEstimate,
    l: usize,
    g: f64,
    beta: f64,
    grid: &[(usize, usize)],
) -> Vec<ReplicaMomentumRow> {
    let mut rows = Vec::new();
    for (k, &(k_m, k_n)) in grid.iter().enumerate() {
        for tau in 0..est.n_rep {
            let (g_value, error) = est.momentum(k, tau);
            rows.push(ReplicaMomentumRow {
                l,
                g,
                beta,
                n_rep: est.n_rep,
                k_m,
                k_n,
                tau,
                g_value,
                error,
            });
        }
    }
    rows
}

pub fn onsite_rows(est: &EhEstimate, l: usize, g: f64, beta: f64) -> Vec<ReplicaOnsiteRow> {
    let mut rows = Vec::new();
    for site in 0..est.n_sites {
        for tau in 0..est.n_rep {
            let (g_value, error) = est.onsite(site, tau);
            rows.push(ReplicaOnsiteRow {
                l,
                g,
                beta,
                n_rep: est.n_rep,
                site,
                tau,
                g_value,
                error,
            });
        }
    }
    rows
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| {
        CliError::io(path, std::io::Error::new(std::io::ErrorKind::Other, e))
    })?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_estimator_csv(path: &Path) -> Result<Vec<EstimatorRow>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for record in rdr.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn estimator_rows_round_trip_through_csv() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("est.csv");
        let rows = vec![
            EstimatorRow {
                l: 8,
                g: 3.05,
                beta: 16.0,
                seed: 42,
                observable: "binder".into(),
                mean: 0.612345,
                error: 0.001,
                n_bins: 20,
            },
            EstimatorRow {
                l: 8,
                g: 3.05,
                beta: 16.0,
                seed: 42,
                observable: "chi".into(),
                mean: 14.25,
                error: 0.5,
                n_bins: 20,
            },
        ];
        write_csv(&path, &rows).unwrap();
        let back = read_estimator_csv(&path).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn csv_output_is_byte_stable() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let rows = vec![EstimatorRow {
            l: 12,
            g: 2.9,
            beta: 24.0,
            seed: 7,
            observable: "m2".into(),
            mean: 0.125,
            error: 0.0025,
            n_bins: 10,
        }];
        write_csv(&a, &rows).unwrap();
        write_csv(&b, &rows).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }
}
