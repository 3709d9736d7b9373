//! Finite-size analysis over estimator tables: crossings of a
//! dimensionless observable, infinite-size extrapolation of the crossing
//! points, and scaling collapses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use bilayer_core::fss::{
    collapse_cost, extrapolate_gc, find_crossing, CollapseParams, Crossing, FssError, ObsPoint,
    SizeSeries,
};

use crate::error::CliError;
use crate::io::EstimatorRow;

/// Group one observable's rows into per-size curves, sizes ascending.
pub fn series_by_size(
    rows: &[EstimatorRow],
    observable: &str,
) -> Result<Vec<SizeSeries>, CliError> {
    let mut sizes: Vec<u32> = Vec::new();
    for row in rows {
        if row.observable == observable && !sizes.contains(&(row.l as u32)) {
            sizes.push(row.l as u32);
        }
    }
    if sizes.is_empty() {
        return Err(CliError::Config(format!(
            "no rows for observable {observable:?} in the input table"
        )));
    }
    sizes.sort_unstable();
    let mut series = Vec::with_capacity(sizes.len());
    for l in sizes {
        let points: Vec<ObsPoint> = rows
            .iter()
            .filter(|r| r.observable == observable && r.l as u32 == l)
            .map(|r| ObsPoint {
                g: r.g,
                value: r.mean,
                error: r.error,
            })
            .collect();
        series.push(SizeSeries::new(l, points));
    }
    Ok(series)
}

fn pair_rng(seed: u64, l1: u32, l2: u32) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"bilayer-crossing-v1");
    h.update(seed.to_le_bytes());
    h.update(l1.to_le_bytes());
    h.update(l2.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingRecord {
    pub l1: u32,
    pub l2: u32,
    pub g_star: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub observable: String,
    pub n_boot: usize,
    pub seed: u64,
    pub crossings: Vec<CrossingRecord>,
    pub g_c: f64,
    pub g_c_error: f64,
    pub drift_amplitude: f64,
    pub drift_exponent: f64,
}

/// Locate the crossing of every size pair, then extrapolate the crossings
/// to infinite size. Pairs whose curves do not intersect inside their
/// common window are skipped; at least three crossings must remain.
pub fn analyze_crossings(
    rows: &[EstimatorRow],
    observable: &str,
    n_boot: usize,
    seed: u64,
) -> Result<AnalysisReport, CliError> {
    let series = series_by_size(rows, observable)?;
    let mut crossings: Vec<Crossing> = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let mut rng = pair_rng(seed, series[i].l, series[j].l);
            match find_crossing(&series[i], &series[j], n_boot, &mut rng) {
                Ok(c) => crossings.push(c),
                Err(FssError::NoCrossing { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let fit = extrapolate_gc(&crossings)?;
    Ok(AnalysisReport {
        observable: observable.to_string(),
        n_boot,
        seed,
        crossings: crossings
            .iter()
            .map(|c| CrossingRecord {
                l1: c.l1,
                l2: c.l2,
                g_star: c.g_star,
                error: c.error,
            })
            .collect(),
        g_c: fit.g_c,
        g_c_error: fit.error,
        drift_amplitude: fit.amplitude,
        drift_exponent: fit.omega,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CollapseReport {
    pub observable: String,
    pub g_c: f64,
    pub nu: f64,
    pub kappa: f64,
    pub cost: f64,
}

/// One input point in collapsed coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct CollapsedRow {
    pub l: u32,
    pub g: f64,
    pub x: f64,
    pub y: f64,
    pub y_error: f64,
}

/// Evaluate a scaling collapse at fixed parameters: the cost plus every
/// point in collapsed coordinates `x = (g - g_c)/g_c * L^(1/nu)`,
/// `y = value * L^kappa`.
pub fn evaluate_collapse(
    rows: &[EstimatorRow],
    observable: &str,
    params: &CollapseParams,
) -> Result<(CollapseReport, Vec<CollapsedRow>), CliError> {
    let series = series_by_size(rows, observable)?;
    let cost = collapse_cost(&series, params)?;
    let mut collapsed = Vec::new();
    for s in &series {
        let x_scale = (s.l as f64).powf(1.0 / params.nu);
        let y_scale = (s.l as f64).powf(params.kappa);
        for p in &s.points {
            collapsed.push(CollapsedRow {
                l: s.l,
                g: p.g,
                x: (p.g - params.g_c) / params.g_c * x_scale,
                y: p.value * y_scale,
                y_error: p.error * y_scale,
            });
        }
    }
    Ok((
        CollapseReport {
            observable: observable.to_string(),
            g_c: params.g_c,
            nu: params.nu,
            kappa: params.kappa,
            cost,
        },
        collapsed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_rows() -> Vec<EstimatorRow> {
        // Curves L * (g - 3.0) cross exactly at g = 3 with zero drift.
        let mut rows = Vec::new();
        for l in [8u32, 12, 16] {
            for i in 0..9 {
                let g = 2.9 + 0.025 * i as f64;
                rows.push(EstimatorRow {
                    l: l as usize,
                    g,
                    beta: 2.0 * l as f64,
                    seed: 1,
                    observable: "binder".into(),
                    mean: l as f64 * (g - 3.0),
                    error: 1e-3,
                    n_bins: 20,
                });
                rows.push(EstimatorRow {
                    l: l as usize,
                    g,
                    beta: 2.0 * l as f64,
                    seed: 1,
                    observable: "chi".into(),
                    mean: 1.0,
                    error: 1e-3,
                    n_bins: 20,
                });
            }
        }
        rows
    }

    #[test]
    fn groups_only_the_requested_observable() {
        let rows = synthetic_rows();
        let series = series_by_size(&rows, "binder").unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(series[0].l, 8);
        assert_eq!(series[0].points.len(), 9);
        assert!(series_by_size(&rows, "missing").is_err());
    }

    #[test]
    fn crossing_analysis_recovers_the_common_intersection() {
        let rows = synthetic_rows();
        let report = analyze_crossings(&rows, "binder", 50, 7).unwrap();
        assert_eq!(report.crossings.len(), 3);
        assert!((report.g_c - 3.0).abs() < 1e-3, "g_c = {}", report.g_c);
    }

    #[test]
    fn analysis_is_deterministic() {
        let rows = synthetic_rows();
        let a = analyze_crossings(&rows, "binder", 50, 7).unwrap();
        let b = analyze_crossings(&rows, "binder", 50, 7).unwrap();
        assert_eq!(a.g_c, b.g_c);
        assert_eq!(a.g_c_error, b.g_c_error);
    }

    #[test]
    fn collapse_reports_cost_and_coordinates() {
        let rows = synthetic_rows();
        let params = CollapseParams {
            g_c: 3.0,
            nu: 1.0,
            kappa: 0.0,
        };
        let (report, collapsed) = evaluate_collapse(&rows, "binder", &params).unwrap();
        assert_eq!(collapsed.len(), 27);
        assert!(report.cost.is_finite());
        // x = (g - 3)/3 * L and y = L (g - 3): a perfect linear collapse.
        for row in &collapsed {
            assert!((row.y - 3.0 * row.x).abs() < 1e-9);
        }
    }
}
