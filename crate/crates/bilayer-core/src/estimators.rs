//! Observable measurement on SSE configurations and binned statistics.
//!
//! The order parameter is the per-site layer magnetization difference
//! `m_bar = m / N` with `m = sum_i (S^z_{A,i} - S^z_{B,i})` and `N = 2 L^2`.
//! Derived quantities: Binder cumulant `U2 = (3/2)(1 - R2/3)` with
//! `R2 = <m_bar^4>/<m_bar^2>^2`, susceptibility
//! `chi = beta N (<m_bar^2> - <|m_bar|>^2)`, energy
//! `E = -<n>/beta + (2 N_I J + N_H J')/4`, and the equal-time layer-A
//! correlation `G(r) = <S^z_0 S^z_r>` for all L^2 displacements (periodic
//! displacement convention on any boundary).
//!
//! Errors come from bin-to-bin variance; nonlinear combinations (U2, chi)
//! use delete-one jackknife over bins.

use alloc::string::String;
use alloc::vec::Vec;

use crate::lattice::{Boundary, LatticeSpec};
use crate::math;
use crate::sse::{Couplings, SseConfig};

/// Moments of `m_bar` from a single configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetizationMoments {
    pub abs_m: f64,
    pub m2: f64,
    pub m4: f64,
}

/// Mean observables of one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSet {
    pub m_abs: f64,
    pub m2: f64,
    pub m4: f64,
    /// `None` when the second moment vanishes.
    pub binder: Option<f64>,
    pub chi: f64,
    pub energy: f64,
}

/// `m_bar` of the stored slice-0 state.
pub fn measure_m(cfg: &SseConfig, lat: &LatticeSpec) -> MagnetizationMoments {
    let na = lat.n_sites_per_layer;
    let mut m = 0i64;
    for i in 0..na {
        m += (cfg.state[i] - cfg.state[i + na]) as i64;
    }
    // state holds sigma = 2 S^z, so the pair difference above is 2m.
    let m_bar = m as f64 / (2.0 * lat.n_spins as f64);
    moments_of(m_bar)
}

/// `m_bar` moments averaged over all M slots of the operator string.
///
/// `m` is conserved between off-diagonal operators, so one traversal
/// updating it at each HeisOffdiag yields the slot average; every fixed
/// slot is a valid measurement point, so the average is unbiased and has
/// lower variance than the slice-0 value.
pub fn measure_m_slice_averaged(
    cfg: &SseConfig,
    lat: &LatticeSpec,
    scratch_a: &mut Vec<i8>,
) -> MagnetizationMoments {
    let na = lat.n_sites_per_layer;
    scratch_a.clear();
    scratch_a.extend_from_slice(&cfg.state[..na]);
    let mut m2_sum = 0i64;
    for i in 0..na {
        m2_sum += (cfg.state[i] - cfg.state[i + na]) as i64;
    }
    let mut m = m2_sum as f64 / 2.0;
    let norm = 1.0 / lat.n_spins as f64;
    let mut acc_abs = 0.0;
    let mut acc_m2 = 0.0;
    let mut acc_m4 = 0.0;
    for op in &cfg.ops {
        let m_bar = m * norm;
        let sq = m_bar * m_bar;
        acc_abs += math::abs(m_bar);
        acc_m2 += sq;
        acc_m4 += sq * sq;
        if !op.is_null() && op.is_offdiag() {
            let site_a = lat.bonds[op.bond()].site1 as usize;
            m -= 2.0 * scratch_a[site_a] as f64;
            scratch_a[site_a] = -scratch_a[site_a];
        }
    }
    let inv_m = 1.0 / cfg.ops.len() as f64;
    MagnetizationMoments {
        abs_m: acc_abs * inv_m,
        m2: acc_m2 * inv_m,
        m4: acc_m4 * inv_m,
    }
}

fn moments_of(m_bar: f64) -> MagnetizationMoments {
    let sq = m_bar * m_bar;
    MagnetizationMoments {
        abs_m: math::abs(m_bar),
        m2: sq,
        m4: sq * sq,
    }
}

/// Binder cumulant; `None` when the second moment vanishes.
pub fn binder(m2: f64, m4: f64) -> Option<f64> {
    if m2 > 0.0 {
        let r2 = m4 / (m2 * m2);
        Some(1.5 * (1.0 - r2 / 3.0))
    } else {
        None
    }
}

/// `chi = beta N (<m_bar^2> - <|m_bar|>^2)`, clamped at 0 against round-off.
pub fn susceptibility(m2: f64, m_abs: f64, beta: f64, n_spins: usize) -> f64 {
    (beta * n_spins as f64 * (m2 - m_abs * m_abs)).max(0.0)
}

/// Series-expansion energy estimator `E = -<n>/beta + shift`.
pub fn energy(mean_n: f64, beta: f64, lat: &LatticeSpec, coup: &Couplings) -> f64 {
    -mean_n / beta + coup.energy_shift(lat)
}

/// Layer-A equal-time correlation of a sigma state whose first L^2 entries
/// are layer A: `out[dy*L + dx] = (1/L^2) sum_r0 S^z(r0) S^z(r0 + d)` with
/// periodic displacement arithmetic. `out` must have length L^2.
pub fn layer_a_correlation(state: &[i8], l: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), l * l);
    let norm = 0.25 / (l * l) as f64;
    for dy in 0..l {
        for dx in 0..l {
            let mut acc = 0i64;
            for y in 0..l {
                let y2 = (y + dy) % l;
                for x in 0..l {
                    let x2 = (x + dx) % l;
                    acc += (state[y * l + x] * state[y2 * l + x2]) as i64;
                }
            }
            out[dy * l + dx] = acc as f64 * norm;
        }
    }
}

/// [`layer_a_correlation`] of a configuration's slice-0 state.
pub fn correlation_g_sample(cfg: &SseConfig, lat: &LatticeSpec, out: &mut [f64]) {
    layer_a_correlation(&cfg.state, lat.l, out);
}

/// Sample mean and its standard error from bin means.
pub fn mean_and_error(bins: &[f64]) -> (f64, f64) {
    let nb = bins.len();
    if nb == 0 {
        return (0.0, 0.0);
    }
    let mean = bins.iter().sum::<f64>() / nb as f64;
    if nb < 2 {
        return (mean, 0.0);
    }
    let var = bins.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>();
    (mean, math::sqrt(var / (nb as f64 * (nb - 1) as f64)))
}

/// Rebin a raw series into `len / bin_size` bins (a trailing partial bin is
/// dropped) and return `(bin means, mean, standard error, reliable)`.
/// Errors are flagged unreliable below 10 bins.
pub fn bin_and_error(raw: &[f64], bin_size: usize) -> (Vec<f64>, f64, f64, bool) {
    assert!(bin_size > 0);
    let nb = raw.len() / bin_size;
    let bins: Vec<f64> = (0..nb)
        .map(|b| raw[b * bin_size..(b + 1) * bin_size].iter().sum::<f64>() / bin_size as f64)
        .collect();
    let (mean, err) = mean_and_error(&bins);
    (bins, mean, err, nb >= 10)
}

/// Delete-one jackknife of `f` applied to the means of several aligned bin
/// series. Returns the full-sample estimate and the jackknife error.
pub fn jackknife_means<F: Fn(&[f64]) -> f64>(series: &[&[f64]], f: F) -> (f64, f64) {
    let nb = series[0].len();
    assert!(series.iter().all(|s| s.len() == nb));
    assert!(nb >= 2);
    let sums: Vec<f64> = series.iter().map(|s| s.iter().sum::<f64>()).collect();
    let full: Vec<f64> = sums.iter().map(|s| s / nb as f64).collect();
    let estimate = f(&full);
    let mut loo = alloc::vec![0.0; series.len()];
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for i in 0..nb {
        for (j, s) in series.iter().enumerate() {
            loo[j] = (sums[j] - s[i]) / (nb - 1) as f64;
        }
        let theta = f(&loo);
        acc += theta;
        acc2 += theta * theta;
    }
    let mean = acc / nb as f64;
    let var = (acc2 / nb as f64 - mean * mean).max(0.0);
    let err = math::sqrt(var * (nb - 1) as f64);
    (estimate, err)
}

/// Per-sweep accumulator that closes bins automatically every `bin_size`
/// measurements. At a bin boundary the partial accumulators are empty, so
/// checkpoints need only the completed bin means.
#[derive(Debug, Clone, PartialEq)]
pub struct Recorder {
    pub bin_size: u64,
    pub slice_average: bool,
    /// Number of G(r) displacements (L^2), or 0 when correlations are off.
    pub n_corr: usize,
    count: u64,
    acc_abs_m: f64,
    acc_m2: f64,
    acc_m4: f64,
    acc_n: f64,
    acc_corr: Vec<f64>,
    pub bins_abs_m: Vec<f64>,
    pub bins_m2: Vec<f64>,
    pub bins_m4: Vec<f64>,
    pub bins_n: Vec<f64>,
    /// Bin-major: `bins_corr[bin * n_corr + r]`.
    pub bins_corr: Vec<f64>,
    corr_tmp: Vec<f64>,
    scratch_a: Vec<i8>,
}

impl Recorder {
    pub fn new(lat: &LatticeSpec, bin_size: u64, slice_average: bool, measure_corr: bool) -> Self {
        let n_corr = if measure_corr { lat.n_sites_per_layer } else { 0 };
        Recorder {
            bin_size,
            slice_average,
            n_corr,
            count: 0,
            acc_abs_m: 0.0,
            acc_m2: 0.0,
            acc_m4: 0.0,
            acc_n: 0.0,
            acc_corr: alloc::vec![0.0; n_corr],
            bins_abs_m: Vec::new(),
            bins_m2: Vec::new(),
            bins_m4: Vec::new(),
            bins_n: Vec::new(),
            bins_corr: Vec::new(),
            corr_tmp: alloc::vec![0.0; n_corr],
            scratch_a: Vec::new(),
        }
    }

    pub fn completed_bins(&self) -> usize {
        self.bins_m2.len()
    }

    /// Record one post-sweep configuration.
    pub fn measure(&mut self, cfg: &SseConfig, lat: &LatticeSpec) {
        let mm = if self.slice_average {
            measure_m_slice_averaged(cfg, lat, &mut self.scratch_a)
        } else {
            measure_m(cfg, lat)
        };
        self.acc_abs_m += mm.abs_m;
        self.acc_m2 += mm.m2;
        self.acc_m4 += mm.m4;
        self.acc_n += cfg.n as f64;
        if self.n_corr > 0 {
            correlation_g_sample(cfg, lat, &mut self.corr_tmp);
            for (a, t) in self.acc_corr.iter_mut().zip(&self.corr_tmp) {
                *a += t;
            }
        }
        self.count += 1;
        if self.count == self.bin_size {
            let inv = 1.0 / self.bin_size as f64;
            self.bins_abs_m.push(self.acc_abs_m * inv);
            self.bins_m2.push(self.acc_m2 * inv);
            self.bins_m4.push(self.acc_m4 * inv);
            self.bins_n.push(self.acc_n * inv);
            self.bins_corr.extend(self.acc_corr.iter().map(|a| a * inv));
            for a in &mut self.acc_corr {
                *a = 0.0;
            }
            self.acc_abs_m = 0.0;
            self.acc_m2 = 0.0;
            self.acc_m4 = 0.0;
            self.acc_n = 0.0;
            self.count = 0;
        }
    }

    /// Restore a recorder from completed bin means (checkpoint resume).
    pub fn from_bins(
        lat: &LatticeSpec,
        bin_size: u64,
        slice_average: bool,
        measure_corr: bool,
        bins_abs_m: Vec<f64>,
        bins_m2: Vec<f64>,
        bins_m4: Vec<f64>,
        bins_n: Vec<f64>,
        bins_corr: Vec<f64>,
    ) -> Self {
        let mut rec = Recorder::new(lat, bin_size, slice_average, measure_corr);
        rec.bins_abs_m = bins_abs_m;
        rec.bins_m2 = bins_m2;
        rec.bins_m4 = bins_m4;
        rec.bins_n = bins_n;
        rec.bins_corr = bins_corr;
        rec
    }
}

/// Metadata attached to a finished series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMeta {
    pub l: usize,
    pub boundary: Boundary,
    pub g: f64,
    pub beta: f64,
    pub seed: u64,
    pub equil_sweeps: u64,
    pub n_bins: u64,
    pub bin_size: u64,
}

/// One observable: bin means plus the reduced mean and error.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableTrace {
    pub label: String,
    pub bins: Vec<f64>,
    pub mean: f64,
    pub error: f64,
    pub reliable: bool,
}

/// All observables of one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub meta: SeriesMeta,
    pub traces: Vec<ObservableTrace>,
}

impl ObservableSeries {
    pub fn trace(&self, label: &str) -> Option<&ObservableTrace> {
        self.traces.iter().find(|t| t.label == label)
    }

    /// Point estimates regrouped into a [`ScalarSet`].
    pub fn scalar_set(&self) -> ScalarSet {
        let get = |label: &str| self.trace(label).map(|t| t.mean).unwrap_or(0.0);
        ScalarSet {
            m_abs: get("m_abs"),
            m2: get("m2"),
            m4: get("m4"),
            binder: self.trace("binder").map(|t| t.mean),
            chi: get("chi"),
            energy: get("energy"),
        }
    }
}

/// Reduce a recorder into labeled traces: direct observables from bin
/// variance, U2 and chi from jackknife, the energy from the operator-count
/// bins, and one `G_dx_dy` trace per displacement when enabled.
pub fn summarize(rec: &Recorder, lat: &LatticeSpec, coup: &Couplings, meta: SeriesMeta) -> ObservableSeries {
    let nb = rec.completed_bins();
    let reliable = nb >= 10;
    let mut traces = Vec::new();

    let push_direct = |traces: &mut Vec<ObservableTrace>, label: &str, bins: Vec<f64>| {
        let (mean, error) = mean_and_error(&bins);
        traces.push(ObservableTrace {
            label: String::from(label),
            bins,
            mean,
            error,
            reliable,
        });
    };

    let energy_bins: Vec<f64> = rec
        .bins_n
        .iter()
        .map(|&n| energy(n, meta.beta, lat, coup))
        .collect();
    push_direct(&mut traces, "energy", energy_bins);
    push_direct(&mut traces, "m_abs", rec.bins_abs_m.clone());
    push_direct(&mut traces, "m2", rec.bins_m2.clone());
    push_direct(&mut traces, "m4", rec.bins_m4.clone());

    if nb >= 2 {
        let (u2, u2_err) = jackknife_means(&[&rec.bins_m2, &rec.bins_m4], |m| {
            binder(m[0], m[1]).unwrap_or(0.0)
        });
        let u2_bins: Vec<f64> = rec
            .bins_m2
            .iter()
            .zip(&rec.bins_m4)
            .map(|(&m2, &m4)| binder(m2, m4).unwrap_or(0.0))
            .collect();
        traces.push(ObservableTrace {
            label: String::from("binder"),
            bins: u2_bins,
            mean: u2,
            error: u2_err,
            reliable,
        });

        let beta = meta.beta;
        let n_spins = lat.n_spins;
        let (chi, chi_err) = jackknife_means(&[&rec.bins_m2, &rec.bins_abs_m], |m| {
            susceptibility(m[0], m[1], beta, n_spins)
        });
        let chi_bins: Vec<f64> = rec
            .bins_m2
            .iter()
            .zip(&rec.bins_abs_m)
            .map(|(&m2, &ma)| susceptibility(m2, ma, beta, n_spins))
            .collect();
        traces.push(ObservableTrace {
            label: String::from("chi"),
            bins: chi_bins,
            mean: chi,
            error: chi_err,
            reliable,
        });
    }

    if rec.n_corr > 0 {
        let l = lat.l;
        for r in 0..rec.n_corr {
            let bins: Vec<f64> = (0..nb).map(|b| rec.bins_corr[b * rec.n_corr + r]).collect();
            let (mean, error) = mean_and_error(&bins);
            traces.push(ObservableTrace {
                label: alloc::format!("G_{}_{}", r % l, r / l),
                bins,
                mean,
                error,
                reliable,
            });
        }
    }

    ObservableSeries { meta, traces }
}
