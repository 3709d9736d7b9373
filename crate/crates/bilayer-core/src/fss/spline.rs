//! Penalized cubic B-spline smoother with generalized cross-validation.
//!
//! The basis sits on a uniform knot grid spanning the data range and the
//! penalty acts on second differences of the coefficients. Knot placement
//! is affine in the data range, so fitted values, the weighted residual
//! sum, and the cross-validation score are invariant under affine
//! rescaling of the abscissa.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

const DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplineError {
    TooFewPoints { needed: usize, got: usize },
    DegenerateAbscissa,
    SingularSystem,
}

impl fmt::Display for SplineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplineError::TooFewPoints { needed, got } => {
                write!(f, "spline fit needs at least {needed} points, got {got}")
            }
            SplineError::DegenerateAbscissa => write!(f, "abscissa values span zero range"),
            SplineError::SingularSystem => write!(f, "normal equations are singular"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SplineError {}

/// Uniform cubic B-spline basis over `[x_min, x_max]` with `n_basis`
/// functions. Knot `i` sits at `x_min + (i - DEGREE) * h`.
#[derive(Debug, Clone, Copy)]
struct Basis {
    x_min: f64,
    h: f64,
    n_basis: usize,
}

impl Basis {
    fn new(x_min: f64, x_max: f64, n_basis: usize) -> Basis {
        let spans = n_basis - DEGREE;
        Basis {
            x_min,
            h: (x_max - x_min) / spans as f64,
            n_basis,
        }
    }

    fn x_max(&self) -> f64 {
        self.x_min + self.h * (self.n_basis - DEGREE) as f64
    }

    fn knot(&self, i: usize) -> f64 {
        self.x_min + (i as f64 - DEGREE as f64) * self.h
    }

    /// Nonzero basis values at `x`: returns the first active index and the
    /// `DEGREE + 1` values, computed with the de Boor recurrence.
    fn row(&self, x: f64) -> (usize, [f64; DEGREE + 1]) {
        let spans = self.n_basis - DEGREE;
        let u = (x - self.x_min) / self.h;
        let mut seg = if u <= 0.0 { 0 } else { u as usize };
        if seg >= spans {
            seg = spans - 1;
        }
        let k = DEGREE + seg;

        let mut vals = [0.0; DEGREE + 1];
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        vals[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - self.knot(k + 1 - j);
            right[j] = self.knot(k + j) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        (k - DEGREE, vals)
    }
}

/// Fitted smoother; evaluation clamps to the fitted range.
#[derive(Debug, Clone)]
pub struct PSpline {
    basis: Basis,
    coef: Vec<f64>,
}

impl PSpline {
    pub fn eval(&self, x: f64) -> f64 {
        let xc = x.max(self.basis.x_min).min(self.basis.x_max());
        let (start, vals) = self.basis.row(xc);
        let mut acc = 0.0;
        for (a, v) in vals.iter().enumerate() {
            acc += v * self.coef[start + a];
        }
        acc
    }
}

/// Result of a cross-validated fit. `weighted_ssr` is `sum w_i r_i^2` at
/// the selected penalty.
#[derive(Debug, Clone)]
pub struct GcvFit {
    pub spline: PSpline,
    pub lambda: f64,
    pub gcv: f64,
    pub weighted_ssr: f64,
    pub edof: f64,
}

fn fit_once(
    basis: &Basis,
    x: &[f64],
    y: &[f64],
    w: &[f64],
    lambda: f64,
) -> Result<(PSpline, f64, f64), SplineError> {
    let k = basis.n_basis;
    let mut btwb = DMatrix::zeros(k, k);
    let mut btwy = DVector::zeros(k);
    for i in 0..x.len() {
        let (start, vals) = basis.row(x[i]);
        for a in 0..=DEGREE {
            for b in 0..=DEGREE {
                btwb[(start + a, start + b)] += w[i] * vals[a] * vals[b];
            }
            btwy[start + a] += w[i] * vals[a] * y[i];
        }
    }

    let mut a_mat = btwb.clone();
    for j in 0..k - 2 {
        let idx = [j, j + 1, j + 2];
        let c = [1.0, -2.0, 1.0];
        for p in 0..3 {
            for q in 0..3 {
                a_mat[(idx[p], idx[q])] += lambda * c[p] * c[q];
            }
        }
    }

    let (coef, inv_btwb) = match a_mat.clone().cholesky() {
        Some(ch) => (ch.solve(&btwy), ch.solve(&btwb)),
        None => {
            let lu = a_mat.lu();
            let coef = lu.solve(&btwy).ok_or(SplineError::SingularSystem)?;
            let inv = lu.solve(&btwb).ok_or(SplineError::SingularSystem)?;
            (coef, inv)
        }
    };
    let edof = inv_btwb.trace();

    let spline = PSpline {
        basis: *basis,
        coef: coef.iter().copied().collect(),
    };
    let mut ssr = 0.0;
    for i in 0..x.len() {
        let r = y[i] - spline.eval(x[i]);
        ssr += w[i] * r * r;
    }
    Ok((spline, ssr, edof))
}

/// Fit with the penalty chosen by minimizing the generalized
/// cross-validation score over a logarithmic grid.
pub fn fit_gcv(x: &[f64], y: &[f64], w: &[f64], n_basis: usize) -> Result<GcvFit, SplineError> {
    let n = x.len();
    let needed = DEGREE + 2;
    if n < needed || n_basis < DEGREE + 1 {
        return Err(SplineError::TooFewPoints { needed, got: n });
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    for &v in x {
        x_min = x_min.min(v);
        x_max = x_max.max(v);
    }
    if !(x_max > x_min) {
        return Err(SplineError::DegenerateAbscissa);
    }
    let basis = Basis::new(x_min, x_max, n_basis);

    let mut best: Option<GcvFit> = None;
    let mut lambda = 1e-6;
    while lambda <= 1e6 {
        if let Ok((spline, ssr, edof)) = fit_once(&basis, x, y, w, lambda) {
            let denom = n as f64 - edof;
            if denom > 0.5 {
                let gcv = n as f64 * ssr / (denom * denom);
                if best.as_ref().map_or(true, |b| gcv < b.gcv) {
                    best = Some(GcvFit {
                        spline,
                        lambda,
                        gcv,
                        weighted_ssr: ssr,
                        edof,
                    });
                }
            }
        }
        lambda *= 10.0;
    }
    best.ok_or(SplineError::SingularSystem)
}
