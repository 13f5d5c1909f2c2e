//! Scaling functions on the line: the infinite product
//! `phi_hat(x) = prod_k N^{-1/2} m0(x / N^k)`, the cascade iteration of
//! `phi(t) = sqrt N sum a_n phi(N t - n)`, and the isometry `f -> f(x/N^n) phi_hat(x)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::Filter;
use crate::error::{Error, Result};
use crate::representation::CylinderFunction;
use crate::transfer::{apply_cylinder, weight_from_samples};

pub const DEFAULT_K: usize = 30;
/// Allowed `|m0(0) - sqrt N|`.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Consecutive growing sup-differences that flag divergence.
const DIVERGENCE_RUN: usize = 5;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScalingHat {
    pub x: f64,
    pub value: Complex64,
    /// Bound on `|phi_hat - phi_hat_K|`, available when `|x| / N^K < 1/2`.
    pub tail_bound: Option<f64>,
}

fn check_normalization(m0: &Filter, n: u32) -> Result<Vec<(i64, Complex64)>> {
    let coeffs = m0.coefficients().ok_or(Error::NotSymbolic("scaling functions need a trigonometric filter"))?;
    let deviation = (m0.eval_real(0.0)? - (n as f64).sqrt()).norm();
    if deviation > NORMALIZATION_TOL {
        return Err(Error::Normalization0 { deviation });
    }
    Ok(coeffs)
}

/// `L` with `|m0(y)/sqrt N - 1| <= L |y|`: `2 pi sum |n| |a_n| / sqrt N`.
fn lipschitz_at_zero(coeffs: &[(i64, Complex64)], n: u32) -> f64 {
    TAU * coeffs.iter().map(|(k, a)| k.unsigned_abs() as f64 * a.norm()).sum::<f64>() / (n as f64).sqrt()
}

fn product(m0: &Filter, n: u32, x: f64, k: usize) -> Complex64 {
    // innermost factor first, so that phi_K(x) = N^{-1/2} m0(x/N) phi_{K-1}(x/N) bit for bit
    let s = (n as f64).sqrt();
    let mut ys = Vec::with_capacity(k);
    let mut y = x;
    for _ in 0..k {
        y /= n as f64;
        ys.push(y);
    }
    ys.iter().rev().fold(Complex64::new(1.0, 0.0), |p, &y| m0.eval_real(y).expect("trigonometric filter") / s * p)
}

fn tail_bound(value: Complex64, l: f64, n: u32, x: f64, k: usize) -> Option<f64> {
    let nk = (n as f64).powi(k as i32);
    (x.abs() / nk < 0.5).then(|| value.norm() * (l * x.abs() / (nk * (n as f64 - 1.0))).exp_m1())
}

/// `prod_{k=1..K} N^{-1/2} m0(x / N^k)`.
pub fn scaling_hat(m0: &Filter, n: u32, x: f64, k: usize) -> Result<ScalingHat> {
    if k == 0 || n < 2 {
        return Err(Error::InvalidSystem("scaling_hat needs K >= 1 and N >= 2".into()));
    }
    let coeffs = check_normalization(m0, n)?;
    let value = product(m0, n, x, k);
    let l = lipschitz_at_zero(&coeffs, n);
    Ok(ScalingHat { x, value, tail_bound: tail_bound(value, l, n, x, k) })
}

/// `scaling_hat` on many points, in parallel.
pub fn scaling_hat_grid(m0: &Filter, n: u32, xs: &[f64], k: usize) -> Result<Vec<ScalingHat>> {
    scaling_hat(m0, n, 0.0, k)?;
    let l = lipschitz_at_zero(&m0.coefficients().unwrap(), n);
    Ok(xs
        .par_iter()
        .map(|&x| {
            let value = product(m0, n, x, k);
            ScalingHat { x, value, tail_bound: tail_bound(value, l, n, x, k) }
        })
        .collect())
}

/// Piecewise-constant approximation of the scaling function: cell averages
/// on `[t0, t0 + values.len() / grid)` with `grid` cells per unit.
#[derive(Clone, Debug)]
pub struct Cascade {
    pub t0: f64,
    pub grid: usize,
    pub values: Vec<Complex64>,
    pub sup_differences: Vec<f64>,
}

impl Cascade {
    pub fn spacing(&self) -> f64 {
        1.0 / self.grid as f64
    }

    /// `sum phi dt`.
    pub fn mass(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.spacing()
    }

    /// Value on the cell containing `t` (zero outside).
    pub fn value_at(&self, t: f64) -> Complex64 {
        let i = ((t - self.t0) * self.grid as f64).floor();
        if i < 0.0 || i as usize >= self.values.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    /// `int phi(t) e^{-2 pi i x t} dt`, exact for the piecewise-constant table.
    pub fn fourier(&self, x: f64) -> Complex64 {
        let dt = self.spacing();
        let kernel = if x == 0.0 {
            Complex64::new(dt, 0.0)
        } else {
            (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -TAU * x * dt)) / Complex64::new(0.0, TAU * x)
        };
        let step = Complex64::from_polar(1.0, -TAU * x * dt);
        let mut phase = Complex64::from_polar(1.0, -TAU * x * self.t0);
        let mut s = Complex64::new(0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            if i % 256 == 0 {
                // re-anchor to keep the running phase accurate
                phase = Complex64::from_polar(1.0, -TAU * x * (self.t0 + i as f64 * dt));
            }
            s += v * phase;
            phase *= step;
        }
        s * kernel
    }
}

/// Cascade iteration from `phi_0 = chi_[0,1)`, on cell averages:
/// `phi_{j+1}[cell] = sqrt N sum_n a_n mean(phi_j over N cell - n)`.
/// The domain is the integer hull of `[0,1]` and the support
/// `[n_min/(N-1), n_max/(N-1)]`, which the iteration maps into itself.
pub fn cascade(m0: &Filter, n: u32, iterations: usize, grid: usize) -> Result<Cascade> {
    let coeffs = check_normalization(m0, n)?;
    if grid == 0 || n < 2 {
        return Err(Error::InvalidSystem("cascade needs grid >= 1 and N >= 2".into()));
    }
    let coeffs: Vec<(i64, Complex64)> = coeffs.into_iter().filter(|(_, a)| a.norm() != 0.0).collect();
    let nm1 = n as i64 - 1;
    let lo = coeffs.iter().map(|&(k, _)| k.div_euclid(nm1)).min().unwrap_or(0).min(0);
    let hi = coeffs.iter().map(|&(k, _)| -((-k).div_euclid(nm1))).max().unwrap_or(1).max(1);
    let len = ((hi - lo) as usize) * grid;
    let g = grid as i64;
    let nn = n as i64;
    let mut phi: Vec<Complex64> = (0..len)
        .map(|i| {
            let t = lo * g + i as i64;
            if (0..g).contains(&t) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    // a_n / sqrt N = sqrt N a_n / N
    let scaled: Vec<(i64, Complex64)> = coeffs.iter().map(|&(k, a)| (k, a / (n as f64).sqrt())).collect();
    let mut diffs = Vec::with_capacity(iterations);
    let mut growing = 0;
    for it in 0..iterations {
        let next: Vec<Complex64> = (0..len as i64)
            .into_par_iter()
            .map(|i| {
                let mut v = Complex64::new(0.0, 0.0);
                for &(k, c) in &scaled {
                    let base = nn * i + ((nn - 1) * lo - k) * g;
                    let mut s = Complex64::new(0.0, 0.0);
                    for m in 0..nn {
                        let j = base + m;
                        if (0..len as i64).contains(&j) {
                            s += phi[j as usize];
                        }
                    }
                    v += c * s;
                }
                v
            })
            .collect();
        let d = next.iter().zip(&phi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if diffs.last().is_some_and(|&prev| d > prev) {
            growing += 1;
        } else {
            growing = 0;
        }
        diffs.push(d);
        phi = next;
        if growing >= DIVERGENCE_RUN {
            return Err(Error::Diverged { iteration: it + 1, sup_differences: diffs });
        }
    }
    Ok(Cascade { t0: lo as f64, grid, values: phi, sup_differences: diffs })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PsiQuadrature {
    pub x_max: f64,
    /// Trapezoid nodes on `[-x_max, x_max]`.
    pub points: usize,
    pub k: usize,
    /// Largest acceptable truncation estimate.
    pub tail_tol: f64,
    /// Depth at which `m0` is sampled for the left-hand side.
    pub sample_depth: usize,
}

impl Default for PsiQuadrature {
    fn default() -> Self {
        PsiQuadrature { x_max: 1e3, points: 1_000_001, k: 40, tail_tol: 1e-3, sample_depth: 16 }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PsiIsometry {
    /// `int |f|^2 d omega_n` with `h = 1` and Haar measure on the circle.
    pub lhs: f64,
    /// `int_{|x| <= x_max} |f(x / N^n)|^2 |phi_hat(x)|^2 dx`.
    pub rhs: f64,
    pub residual: f64,
    /// Estimate of the integral over `|x| > x_max`.
    pub tail_estimate: f64,
    /// Largest product-truncation bound seen on the nodes.
    pub product_tail: f64,
}

/// Both sides of `int |f|^2 d omega_n = int |f(x/N^n) phi_hat(x)|^2 dx`
/// for a cylinder function `f` on the circle `x -> N x`.
pub fn psi_isometry_residual(m0: &Filter, n: u32, f: &CylinderFunction, level: usize, q: &PsiQuadrature) -> Result<PsiIsometry> {
    let space = f.space();
    if space.radix() != Some(n) || !space.is_full() || space.labels().iter().enumerate().any(|(i, &l)| l != i as u32) {
        return Err(Error::Incompatible("psi isometry needs the circle map with the same N".into()));
    }
    let coeffs = check_normalization(m0, n)?;

    // left side: omega_n(|f|^2) = int R^n |f|^2 dx, h = 1, W = |m0|^2 / N
    let depth = q.sample_depth.max(f.depth() + level + 1);
    let w = weight_from_samples(&m0.sample(space, depth)?);
    let mut g = f.abs_sq();
    for _ in 0..level {
        g = apply_cylinder(&w, &g)?;
    }
    let lhs = g.values().iter().map(|v| v.re).sum::<f64>() / g.values().len() as f64;

    // right side: composite trapezoid on [-x_max, x_max], split at the jumps
    // of f(x / N^n) so that every panel sees a constant value of f
    let scale = (n as f64).powi(level as i32);
    let cells = f.values().len();
    let fsq: Vec<f64> = f.values().iter().map(|v| v.norm_sqr()).collect();
    let b = scale / cells as f64;
    let segs = (q.x_max / b).ceil() as i64;
    let x_max = segs as f64 * b;
    let per = (q.points / (2 * segs as usize)).max(2);
    let h = b / per as f64;
    let l = lipschitz_at_zero(&coeffs, n);
    let (rhs, tail_c, prod_tail) = (-segs..segs)
        .into_par_iter()
        .map(|j| {
            let fv = fsq[j.rem_euclid(cells as i64) as usize];
            let a = j as f64 * b;
            let mut s = 0.0;
            let mut tc: f64 = 0.0;
            let mut pt: f64 = 0.0;
            for i in 0..=per {
                let x = a + i as f64 * h;
                let phi = product(m0, n, x, q.k);
                let p2 = phi.norm_sqr();
                let wgt = if i == 0 || i == per { 0.5 } else { 1.0 };
                s += wgt * p2;
                if x.abs() >= x_max - 1.0 {
                    tc = tc.max(x * x * p2);
                }
                pt = pt.max(tail_bound(phi, l, n, x, q.k).unwrap_or(f64::INFINITY));
            }
            (fv * s * h, tc, pt)
        })
        .reduce(|| (0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1), a.2.max(b.2)));
    let sup_f = fsq.iter().copied().fold(0.0, f64::max);
    // |phi_hat(x)|^2 <= c / x^2 beyond x_max, so each side contributes <= c / x_max
    let tail_estimate = 2.0 * sup_f * tail_c / x_max;
    if tail_estimate > q.tail_tol {
        return Err(Error::Truncation { estimate: tail_estimate, tolerance: q.tail_tol });
    }
    Ok(PsiIsometry { lhs, rhs, residual: (lhs - rhs).abs(), tail_estimate, product_tail: prod_tail })
}
