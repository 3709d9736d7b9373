//! Finite-size-scaling analysis: curve crossings, infinite-size
//! extrapolation, data collapse, and power-law fits.

pub mod spline;

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math;
use spline::SplineError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FssError {
    TooFewPoints { needed: usize, got: usize },
    TooFewSizes { needed: usize, got: usize },
    NoCrossing { l1: u32, l2: u32 },
    NoOverlap,
    DegenerateFit,
}

impl fmt::Display for FssError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FssError::TooFewPoints { needed, got } => {
                write!(f, "need at least {needed} data points, got {got}")
            }
            FssError::TooFewSizes { needed, got } => {
                write!(f, "need at least {needed} system sizes, got {got}")
            }
            FssError::NoCrossing { l1, l2 } => {
                write!(f, "curves for L = {l1} and L = {l2} do not cross")
            }
            FssError::NoOverlap => write!(f, "abscissa ranges do not overlap"),
            FssError::DegenerateFit => write!(f, "fit problem is degenerate"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FssError {}

impl From<SplineError> for FssError {
    fn from(e: SplineError) -> FssError {
        match e {
            SplineError::TooFewPoints { needed, got } => FssError::TooFewPoints { needed, got },
            _ => FssError::DegenerateFit,
        }
    }
}

/// One observable sample at a coupling value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsPoint {
    pub g: f64,
    pub value: f64,
    pub error: f64,
}

/// Observable curve for a single linear size, sorted by coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSeries {
    pub l: u32,
    pub points: Vec<ObsPoint>,
}

impl SizeSeries {
    pub fn new(l: u32, mut points: Vec<ObsPoint>) -> SizeSeries {
        points.sort_unstable_by(|a, b| a.g.total_cmp(&b.g));
        SizeSeries { l, points }
    }
}

/// Crossing of two size curves, with a parametric-bootstrap error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub l1: u32,
    pub l2: u32,
    pub g_star: f64,
    pub error: f64,
}

impl Crossing {
    pub fn l_eff(&self) -> f64 {
        0.5 * (self.l1 as f64 + self.l2 as f64)
    }
}

/// Local cubic Lagrange interpolation through the 4 points bracketing `g`.
fn cubic_interp(pts: &[(f64, f64)], g: f64) -> f64 {
    let n = pts.len();
    let idx = pts.partition_point(|p| p.0 < g);
    let start = idx.saturating_sub(2).min(n - 4);
    let w = &pts[start..start + 4];
    let mut acc = 0.0;
    for i in 0..4 {
        let mut term = w[i].1;
        for j in 0..4 {
            if j != i {
                term *= (g - w[j].0) / (w[i].0 - w[j].0);
            }
        }
        acc += term;
    }
    acc
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (flo < 0.0) == (fm < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// All sign changes of `a - b` on the overlapping window, refined by
/// bisection.
fn crossing_candidates(a: &[(f64, f64)], b: &[(f64, f64)], lo: f64, hi: f64) -> Vec<f64> {
    const GRID: usize = 256;
    let diff = |g: f64| cubic_interp(a, g) - cubic_interp(b, g);
    let mut out = Vec::new();
    let mut g_prev = lo;
    let mut d_prev = diff(g_prev);
    for i in 1..=GRID {
        let g = lo + (hi - lo) * i as f64 / GRID as f64;
        let d = diff(g);
        if d == 0.0 {
            out.push(g);
        } else if d_prev != 0.0 && (d_prev < 0.0) != (d < 0.0) {
            out.push(bisect(&diff, g_prev, g));
        }
        g_prev = g;
        d_prev = d;
    }
    out
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(core::f64::consts::TAU * u2)
}

/// Locate the crossing of two size curves. The central estimate uses the
/// measured means; the error is the spread of the crossing over `n_boot`
/// parametric resamples of the data within their error bars.
pub fn find_crossing(
    a: &SizeSeries,
    b: &SizeSeries,
    n_boot: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Crossing, FssError> {
    for s in [a, b] {
        if s.points.len() < 4 {
            return Err(FssError::TooFewPoints {
                needed: 4,
                got: s.points.len(),
            });
        }
    }
    let lo = a.points[0].g.max(b.points[0].g);
    let hi = a.points[a.points.len() - 1]
        .g
        .min(b.points[b.points.len() - 1].g);
    if !(hi > lo) {
        return Err(FssError::NoOverlap);
    }

    let table = |s: &SizeSeries| -> Vec<(f64, f64)> {
        s.points.iter().map(|p| (p.g, p.value)).collect()
    };
    let ta = table(a);
    let tb = table(b);
    let central = *crossing_candidates(&ta, &tb, lo, hi)
        .first()
        .ok_or(FssError::NoCrossing { l1: a.l, l2: b.l })?;

    let mut boots = Vec::with_capacity(n_boot);
    let mut ra = ta.clone();
    let mut rb = tb.clone();
    for _ in 0..n_boot {
        for (dst, p) in ra.iter_mut().zip(&a.points) {
            dst.1 = p.value + p.error * gauss(rng);
        }
        for (dst, p) in rb.iter_mut().zip(&b.points) {
            dst.1 = p.value + p.error * gauss(rng);
        }
        let cands = crossing_candidates(&ra, &rb, lo, hi);
        if let Some(&g) = cands.iter().min_by(|x, y| {
            math::abs(**x - central).total_cmp(&math::abs(**y - central))
        }) {
            boots.push(g);
        }
    }

    let error = if boots.len() >= 2 {
        let mean = boots.iter().sum::<f64>() / boots.len() as f64;
        let var = boots.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>()
            / (boots.len() - 1) as f64;
        math::sqrt(var)
    } else {
        0.0
    };

    Ok(Crossing {
        l1: a.l,
        l2: b.l,
        g_star: central,
        error,
    })
}

/// Weighted least squares for `y = c0 + c1 x`. Returns
/// `(c0, c1, var_c0, var_c1, ssr)` with variances propagated from the
/// weights.
fn wls_line(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64, f64, f64, f64)> {
    let mut s = 0.0;
    let mut sx = 0.0;
    let mut sxx = 0.0;
    let mut sy = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        s += w[i];
        sx += w[i] * x[i];
        sxx += w[i] * x[i] * x[i];
        sy += w[i] * y[i];
        sxy += w[i] * x[i] * y[i];
    }
    let det = s * sxx - sx * sx;
    if !(math::abs(det) > 1e-300) {
        return None;
    }
    let c1 = (s * sxy - sx * sy) / det;
    let c0 = (sxx * sy - sx * sxy) / det;
    let mut ssr = 0.0;
    for i in 0..x.len() {
        let r = y[i] - c0 - c1 * x[i];
        ssr += w[i] * r * r;
    }
    Some((c0, c1, sxx / det, s / det, ssr))
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Infinite-size extrapolation of crossing points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcFit {
    pub g_c: f64,
    pub error: f64,
    pub amplitude: f64,
    pub omega: f64,
}

/// Fit `g*(L) = g_c + a L^(-omega)` to crossing points, with the drift
/// exponent chosen by weighted least squares. Uses the mean of the two
/// sizes of each crossing as its effective size.
///
/// The drift exponent is fitted freely only when the data can support it:
/// with exactly three crossings the free fit is an exact solve with no
/// residual degrees of freedom, so `omega` is fixed to the fallback value
/// of two instead. In either case, if the fitted drift amplitude is not
/// resolved at two standard errors the drift term is dropped entirely and
/// the error-weighted mean of the crossings is returned (`amplitude = 0`,
/// `omega = 2`). Extrapolating a statistically unresolved drift has huge
/// leverage on `g_c` and can throw it far outside the scatter of the
/// crossings themselves; the gate keeps the estimate inside what the data
/// actually measure. Constant crossings short-circuit the same way.
pub fn extrapolate_gc(crossings: &[Crossing]) -> Result<GcFit, FssError> {
    if crossings.len() < 3 {
        return Err(FssError::TooFewPoints {
            needed: 3,
            got: crossings.len(),
        });
    }
    let n = crossings.len();
    let l_eff: Vec<f64> = crossings.iter().map(|c| c.l_eff()).collect();
    let y: Vec<f64> = crossings.iter().map(|c| c.g_star).collect();
    let unweighted = crossings.iter().all(|c| c.error == 0.0);
    let w: Vec<f64> = if unweighted {
        alloc::vec![1.0; n]
    } else {
        crossings
            .iter()
            .map(|c| 1.0 / (c.error.max(1e-12) * c.error.max(1e-12)))
            .collect()
    };

    let mut span = f64::NEG_INFINITY;
    let mut base = f64::INFINITY;
    for &gs in &y {
        span = span.max(gs);
        base = base.min(gs);
    }
    if span - base <= 1e-10 * span.abs().max(1.0) {
        let sw: f64 = w.iter().sum();
        let mean = y.iter().zip(&w).map(|(v, ww)| v * ww).sum::<f64>() / sw;
        let error = if unweighted { 0.0 } else { math::sqrt(1.0 / sw) };
        return Ok(GcFit {
            g_c: mean,
            error,
            amplitude: 0.0,
            omega: 2.0,
        });
    }

    let fit_at = |omega: f64| -> Option<(f64, f64, f64, f64, f64)> {
        let x: Vec<f64> = l_eff.iter().map(|&l| math::powf(l, -omega)).collect();
        wls_line(&x, &y, &w).map(|(c0, c1, var0, var1, ssr)| (ssr, c0, c1, var0, var1))
    };

    let omega = if n == 3 {
        2.0
    } else {
        let mut best_omega = 2.0;
        let mut best_ssr = f64::INFINITY;
        let mut om = 0.25;
        while om <= 6.0 + 1e-9 {
            if let Some((ssr, ..)) = fit_at(om) {
                if ssr < best_ssr {
                    best_ssr = ssr;
                    best_omega = om;
                }
            }
            om += 0.25;
        }
        if !best_ssr.is_finite() {
            return Err(FssError::DegenerateFit);
        }
        golden_min(
            |o| fit_at(o).map_or(f64::INFINITY, |(ssr, ..)| ssr),
            (best_omega - 0.25).max(0.05),
            (best_omega + 0.25).min(6.0),
        )
    };
    let (ssr, g_c, amplitude, var0, var1) = fit_at(omega).ok_or(FssError::DegenerateFit)?;

    // For unweighted fits the residuals set the variance scale; weighted
    // fits carry it in the weights already.
    let scale = if unweighted {
        ssr / (n - 2) as f64
    } else {
        1.0
    };
    let amp_var = var1 * scale;
    if !(amplitude * amplitude > 4.0 * amp_var) {
        let sw: f64 = w.iter().sum();
        let mean = y.iter().zip(&w).map(|(v, ww)| v * ww).sum::<f64>() / sw;
        let error = if unweighted {
            let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / ((n - 1) as f64 * n as f64);
            math::sqrt(var)
        } else {
            math::sqrt(1.0 / sw)
        };
        return Ok(GcFit {
            g_c: mean,
            error,
            amplitude: 0.0,
            omega: 2.0,
        });
    }

    let error = math::sqrt(var0 * scale);

    Ok(GcFit {
        g_c,
        error,
        amplitude,
        omega,
    })
}

/// Scaling ansatz for a data collapse: the abscissa is
/// `(g - g_c) / g_c * L^(1/nu)` and the ordinate is rescaled by
/// `L^kappa` (zero for dimensionless observables, `-gamma/nu` for the
/// susceptibility).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseParams {
    pub g_c: f64,
    pub nu: f64,
    pub kappa: f64,
}

/// Quality of a data collapse: all sizes are rescaled onto a common axis,
/// a cross-validated smoother is fitted to the pooled points, and the
/// error-normalized mean squared residual is returned. A perfect collapse
/// with honest error bars gives a cost near one; a wrong ansatz separates
/// the curves and inflates the cost.
///
/// Every point participates in the fit, but only points whose abscissa is
/// covered by the x-range of at least one other size enter the score: a
/// point with no neighbor curve to disagree with says nothing about the
/// quality of the collapse, and letting such lone tails dilute the mean
/// residual would blur the contrast between correct and detuned exponents.
pub fn collapse_cost(data: &[SizeSeries], params: &CollapseParams) -> Result<f64, FssError> {
    if data.len() < 2 {
        return Err(FssError::TooFewSizes {
            needed: 2,
            got: data.len(),
        });
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut sigma = Vec::new();
    let mut size_of = Vec::new();
    let mut ranges = Vec::new();
    for (s, series) in data.iter().enumerate() {
        let l = series.l as f64;
        let x_scale = math::powf(l, 1.0 / params.nu);
        let y_scale = math::powf(l, params.kappa);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &series.points {
            let xv = (p.g - params.g_c) / params.g_c * x_scale;
            x.push(xv);
            y.push(p.value * y_scale);
            sigma.push(p.error * y_scale);
            size_of.push(s);
            lo = lo.min(xv);
            hi = hi.max(xv);
        }
        ranges.push((lo, hi));
    }
    let covered = |i: usize| {
        ranges
            .iter()
            .enumerate()
            .any(|(s, &(lo, hi))| s != size_of[i] && x[i] >= lo && x[i] <= hi)
    };
    let scored: Vec<bool> = (0..x.len()).map(covered).collect();
    if !scored.iter().any(|&s| s) {
        return Err(FssError::NoOverlap);
    }
    let n_scored = scored.iter().filter(|&&s| s).count();
    if n_scored < 8 {
        return Err(FssError::TooFewPoints {
            needed: 8,
            got: n_scored,
        });
    }

    // Pool in a canonical order so the cost does not depend on how the
    // sizes were listed.
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        x[a].total_cmp(&x[b])
            .then(y[a].total_cmp(&y[b]))
            .then(sigma[a].total_cmp(&sigma[b]))
    });
    let x: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let sigma: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    let scored: Vec<bool> = order.iter().map(|&i| scored[i]).collect();

    let w: Vec<f64> = if sigma.iter().any(|&s| s <= 0.0) {
        alloc::vec![1.0; n]
    } else {
        sigma.iter().map(|&s| 1.0 / (s * s)).collect()
    };

    let n_basis = (n / 2).clamp(6, 16);
    let fit = spline::fit_gcv(&x, &y, &w, n_basis)?;
    let mut ssr = 0.0;
    for i in 0..n {
        if scored[i] {
            let r = y[i] - fit.spline.eval(x[i]);
            ssr += w[i] * r * r;
        }
    }
    Ok(ssr / n_scored as f64)
}

/// Minimize [`collapse_cost`] over `(g_c, nu)` by coordinate descent with
/// golden-section line searches, starting from `initial`. `kappa` is held
/// fixed. Returns the refined parameters and their cost.
pub fn optimize_collapse(
    data: &[SizeSeries],
    initial: &CollapseParams,
    g_c_window: (f64, f64),
    nu_window: (f64, f64),
) -> Result<(CollapseParams, f64), FssError> {
    let cost_at = |g_c: f64, nu: f64| -> f64 {
        collapse_cost(
            data,
            &CollapseParams {
                g_c,
                nu,
                kappa: initial.kappa,
            },
        )
        .unwrap_or(f64::INFINITY)
    };
    let mut g_c = initial.g_c;
    let mut nu = initial.nu;
    for _ in 0..4 {
        g_c = golden_min(|v| cost_at(v, nu), g_c_window.0, g_c_window.1);
        nu = golden_min(|v| cost_at(g_c, v), nu_window.0, nu_window.1);
    }
    let params = CollapseParams {
        g_c,
        nu,
        kappa: initial.kappa,
    };
    let cost = collapse_cost(data, &params)?;
    Ok((params, cost))
}

/// Power-law fit `G(r) = A r^(-p)` on a log-log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_error: f64,
    pub amplitude: f64,
}

/// Weighted log-log line fit over points with `r` inside the window and
/// positive values. Errors propagate as `err / G`; if any point has a
/// zero error the fit falls back to equal weights with a residual-based
/// error estimate.
pub fn powerlaw_fit(
    r: &[f64],
    value: &[f64],
    error: &[f64],
    window: (f64, f64),
) -> Result<PowerLawFit, FssError> {
    debug_assert_eq!(r.len(), value.len());
    debug_assert_eq!(r.len(), error.len());
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut ls = Vec::new();
    for i in 0..r.len() {
        if r[i] >= window.0 && r[i] <= window.1 && r[i] > 0.0 && value[i] > 0.0 {
            lx.push(math::ln(r[i]));
            ly.push(math::ln(value[i]));
            ls.push(error[i] / value[i]);
        }
    }
    let n = lx.len();
    if n < 4 {
        return Err(FssError::TooFewPoints { needed: 4, got: n });
    }
    let unweighted = ls.iter().any(|&s| s <= 0.0);
    let w: Vec<f64> = if unweighted {
        alloc::vec![1.0; n]
    } else {
        ls.iter().map(|&s| 1.0 / (s * s)).collect()
    };
    let (c0, c1, _, var1, ssr) = wls_line(&lx, &ly, &w).ok_or(FssError::DegenerateFit)?;
    let exponent_error = if unweighted {
        math::sqrt(var1 * ssr / (n - 2) as f64)
    } else {
        math::sqrt(var1)
    };
    Ok(PowerLawFit {
        exponent: -c1,
        exponent_error,
        amplitude: math::exp(c0),
    })
}

/// Power-law fit for correlations measured along one axis of a periodic
/// lattice of linear `extent`.
///
/// On a torus the signal at displacement `r` also picks up the wrap-around
/// geodesic of length `extent - r`, so the bare data behave as
/// `A (r^(-p) + (extent - r)^(-p))` and a log-log line fit systematically
/// underestimates `p` (badly so near `r = extent / 2`). This fit uses the
/// two-geodesic shape directly: the amplitude is profiled out analytically
/// for each trial exponent, the exponent minimizes the weighted squared
/// residual, and its error comes from the curvature of that residual
/// profile. With `extent` far beyond the window it reduces to the plain
/// power law.
pub fn powerlaw_fit_periodic(
    r: &[f64],
    value: &[f64],
    error: &[f64],
    window: (f64, f64),
    extent: f64,
) -> Result<PowerLawFit, FssError> {
    debug_assert_eq!(r.len(), value.len());
    debug_assert_eq!(r.len(), error.len());
    let mut rr = Vec::new();
    let mut gv = Vec::new();
    let mut sg = Vec::new();
    for i in 0..r.len() {
        if r[i] >= window.0
            && r[i] <= window.1
            && r[i] > 0.0
            && r[i] < extent
            && value[i] > 0.0
        {
            rr.push(r[i]);
            gv.push(value[i]);
            sg.push(error[i]);
        }
    }
    let n = rr.len();
    if n < 4 {
        return Err(FssError::TooFewPoints { needed: 4, got: n });
    }
    let unweighted = sg.iter().any(|&s| s <= 0.0);
    let w: Vec<f64> = if unweighted {
        alloc::vec![1.0; n]
    } else {
        sg.iter().map(|&s| 1.0 / (s * s)).collect()
    };

    let profile = |p: f64| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        let f: Vec<f64> = rr
            .iter()
            .map(|&x| math::powf(x, -p) + math::powf(extent - x, -p))
            .collect();
        for i in 0..n {
            num += w[i] * gv[i] * f[i];
            den += w[i] * f[i] * f[i];
        }
        let a = num / den;
        let mut ssr = 0.0;
        for i in 0..n {
            let d = gv[i] - a * f[i];
            ssr += w[i] * d * d;
        }
        (ssr, a)
    };

    let mut best_p = 1.0;
    let mut best_ssr = f64::INFINITY;
    let mut p = 0.1;
    while p <= 4.0 + 1e-9 {
        let (ssr, _) = profile(p);
        if ssr < best_ssr {
            best_ssr = ssr;
            best_p = p;
        }
        p += 0.05;
    }
    if !best_ssr.is_finite() {
        return Err(FssError::DegenerateFit);
    }
    let p = golden_min(
        |q| profile(q).0,
        (best_p - 0.05).max(0.01),
        best_p + 0.05,
    );
    let (ssr, amplitude) = profile(p);

    let scale = if unweighted {
        ssr / (n - 2) as f64
    } else {
        1.0
    };
    let h = 1e-3;
    let d2 = (profile(p + h).0 - 2.0 * ssr + profile(p - h).0) / (h * h);
    let exponent_error = if d2 > 0.0 {
        math::sqrt(2.0 * scale / d2)
    } else {
        0.0
    };
    Ok(PowerLawFit {
        exponent: p,
        exponent_error,
        amplitude,
    })
}
