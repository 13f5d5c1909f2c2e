//! The Ruelle transfer operator `(R_W f)(x) = sum_{r(y)=x} W(y) f(y)`, its
//! harmonic functions `R_W h = h` and eigen-measures `nu R_W = nu`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::Filter;
use crate::measures::{CylinderMeasure, MeasureRep};
use crate::representation::{CylinderFunction, SampledFunction};
use crate::systems::{Point, SymbolSpace, System};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Tolerance on `|lambda - 1|` for eigen-measures.
pub const EIGENVALUE_TOL: f64 = 1e-6;
/// Largest chain handled by the direct stationary solve.
const DIRECT_SOLVE_MAX: usize = 4096;
const PARALLEL_CELLS: usize = 1 << 14;

/// A nonnegative weight `W` on `X`.
#[derive(Clone, Debug)]
pub enum Weight {
    Cylinder(CylinderFunction),
    Sampled(SampledFunction),
}

impl Weight {
    /// Checks that every value is real, finite and nonnegative.
    pub fn cylinder(w: CylinderFunction) -> Result<Self> {
        for (i, v) in w.values().iter().enumerate() {
            if v.im != 0.0 || !v.re.is_finite() || v.re < 0.0 {
                let s = w.space();
                return Err(Error::NegativeWeight { word: s.format_word(&s.word(w.depth(), i)), value: v.re });
            }
        }
        Ok(Weight::Cylinder(w))
    }

    pub fn constant(space: &Arc<SymbolSpace>, c: f64) -> Result<Self> {
        Self::cylinder(CylinderFunction::constant(space, c))
    }

    /// `W(y) = 1 / #r^{-1}(r(y))`, the weight of balanced backward averaging.
    pub fn balanced(space: &Arc<SymbolSpace>) -> Self {
        if space.is_full() {
            return Weight::Cylinder(CylinderFunction::constant(space, 1.0 / space.alphabet_size() as f64));
        }
        let w = CylinderFunction::from_word_fn(space, 2, |w| {
            Complex64::new(1.0 / space.branch_count(w[1]) as f64, 0.0)
        });
        Weight::Cylinder(w)
    }

    pub fn as_cylinder(&self) -> Result<&CylinderFunction> {
        match self {
            Weight::Cylinder(w) => Ok(w),
            Weight::Sampled(_) => Err(Error::NotSymbolic("sampled weight")),
        }
    }

    /// `W / c`.
    pub fn rescaled(&self, c: f64) -> Self {
        match self {
            Weight::Cylinder(w) => Weight::Cylinder(w.scale(1.0 / c)),
            Weight::Sampled(f) => {
                let f = f.clone();
                Weight::Sampled(SampledFunction::new(move |p| f.eval(p) / c))
            }
        }
    }
}

/// `R_W f` on cylinders: both inputs are refined to their common depth
/// `d` and the output lives at depth `d - 1`, with
/// `(R_W f)[w] = sum_a W[a w] f[a w]` over admissible prepended symbols.
pub fn transfer_apply(w: &Weight, f: &CylinderFunction) -> Result<CylinderFunction> {
    let w = w.as_cylinder()?;
    apply_cylinder(w, f)
}

pub(crate) fn apply_cylinder(w: &CylinderFunction, f: &CylinderFunction) -> Result<CylinderFunction> {
    let space = f.space();
    if !space.same_as(w.space()) {
        return Err(Error::Incompatible("weight and function on different systems".into()));
    }
    let d = w.depth().max(f.depth()).max(space.min_transfer_depth());
    let wv = w.refine(d)?;
    let fv = f.refine(d)?;
    let grid = space.grid(d);
    let n_out = space.word_count(d - 1);
    let (wv, fv) = (wv.values(), fv.values());
    let cell = |j: usize| grid.preimages(j).map(|i| wv[i] * fv[i]).sum::<Complex64>();
    let out: Vec<Complex64> = if n_out >= PARALLEL_CELLS {
        (0..n_out).into_par_iter().map(cell).collect()
    } else {
        (0..n_out).map(cell).collect()
    };
    CylinderFunction::from_values(space, d - 1, out)
}

/// `R_W^n f`.
pub fn transfer_power(w: &Weight, f: &CylinderFunction, n: usize) -> Result<CylinderFunction> {
    let mut g = f.clone();
    for _ in 0..n {
        g = transfer_apply(w, &g)?;
    }
    Ok(g)
}

/// Pointwise `R_W f (x)` for sampled functions on a rational map.
pub fn transfer_apply_at(sys: &System, w: &SampledFunction, f: &SampledFunction, x: &Point) -> Result<Complex64> {
    Ok(sys.preimages(x)?.iter().map(|y| w.eval(y) * f.eval(y)).sum())
}

/// `W(x) = |m0(x)|^2 / #r^{-1}(r(x))`, with trigonometric filters sampled at
/// cylinder midpoints of depth `depth`.
pub fn weight_from_filter(sys: &System, m0: &Filter, depth: usize) -> Result<Weight> {
    let space = sys.symbol_space()?;
    let m = m0.sample(space, depth)?;
    Ok(Weight::Cylinder(weight_from_samples(&m)))
}

pub(crate) fn weight_from_samples(m: &CylinderFunction) -> CylinderFunction {
    let space = m.space();
    if space.is_full() {
        let k = space.alphabet_size() as f64;
        return m.map(|v| Complex64::new(v.norm_sqr() / k, 0.0));
    }
    let m = m.refine(m.depth().max(2)).unwrap();
    let g = space.grid(m.depth());
    let values = m
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            // second symbol of the cell = first symbol of r(y)
            let second = space.grid(m.depth() - 1).first(g.shift(i));
            Complex64::new(v.norm_sqr() / space.branch_count(second) as f64, 0.0)
        })
        .collect();
    CylinderFunction::from_values(space, m.depth(), values).unwrap()
}

/// Result of the harmonic-function power iteration.
#[derive(Clone, Debug)]
pub struct Harmonic {
    pub h: CylinderFunction,
    /// `||R_W h - h||_inf`.
    pub residual: f64,
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixpointSummary {
    pub eigenvalue: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Harmonic {
    /// Wraps a known fixed point, recording its residual.
    pub fn from_function(w: &Weight, h: CylinderFunction) -> Result<Self> {
        let rh = transfer_apply(w, &h)?;
        let residual = rh.sup_distance(&h);
        let eigenvalue = ratio_of_means(&rh, &h);
        Ok(Harmonic { h, residual, eigenvalue, iterations: 0, converged: true })
    }

    pub fn summary(&self) -> FixpointSummary {
        FixpointSummary {
            eigenvalue: self.eigenvalue,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

fn ratio_of_means(a: &CylinderFunction, b: &CylinderFunction) -> f64 {
    let (a, b) = a.align(b);
    a.cell_mean().re / b.cell_mean().re
}

/// Power iteration `h <- refine(R_W h)`, renormalized to cell-average 1,
/// until the sup-change is at most `tol`.
pub fn solve_eigenfunction(w: &Weight, init: &CylinderFunction, tol: f64, max_iter: usize) -> Result<Harmonic> {
    let wc = w.as_cylinder()?;
    let space = init.space();
    let d = wc.depth().max(init.depth()).max(space.min_transfer_depth());
    if init.values().iter().any(|v| v.im != 0.0 || v.re < 0.0) {
        return Err(Error::Incompatible("initial iterate must be real and nonnegative".into()));
    }
    let mut h = init.refine(d)?;
    let mean = h.cell_mean().re;
    if mean <= 0.0 {
        return Err(Error::ZeroIterate);
    }
    h = h.scale(1.0 / mean);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = apply_cylinder(wc, &h)?.refine(d)?;
        iterations += 1;
        let mean = next.cell_mean().re;
        if !(mean > 0.0) {
            return Err(Error::ZeroIterate);
        }
        let next = next.scale(1.0 / mean);
        let change = next.sup_distance(&h);
        h = next;
        if change <= tol {
            converged = true;
            break;
        }
    }
    let rh = apply_cylinder(wc, &h)?;
    let residual = rh.sup_distance(&h);
    let eigenvalue = ratio_of_means(&rh, &h);
    Ok(Harmonic { h, residual, eigenvalue, iterations, converged })
}

/// Normalized nonnegative `nu` with `int R_W f dnu = int f dnu`.
///
/// The map `f -> R_W f` on depth-`d-1` coefficients (`d` the weight depth)
/// is a sparse matrix `T`; `nu` restricted to depth `d-1` is its dominant
/// left eigenvector, found by power iteration on `T^t`. The depth-`d`
/// masses follow exactly from `nu[a w] = W[a w] nu[w]`. Slowly mixing
/// chains (weights close to 0 or 1 on some branch) fall back to a direct
/// stationary-distribution solve when the chain is small enough.
pub fn solve_eigenmeasure(w: &Weight) -> Result<MeasureRep> {
    solve_eigenmeasure_with(w, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn solve_eigenmeasure_with(w: &Weight, tol: f64, max_iter: usize) -> Result<MeasureRep> {
    let wc = w.as_cylinder()?;
    let space = Arc::clone(wc.space());
    let d = wc.depth().max(space.min_transfer_depth());
    let wv: Vec<f64> = wc.refine(d)?.values().iter().map(|v| v.re).collect();
    let grid = space.grid(d);
    let n = space.word_count(d - 1);

    let step = |nu: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 0..grid.len() {
            out[grid.parent(i)] += wv[i] * nu[grid.shift(i)];
        }
        out
    };

    let mut nu = vec![1.0 / n as f64; n];
    let mut eigenvalue = 1.0;
    let mut converged = false;
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let next = step(&nu);
        let total: f64 = next.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroIterate);
        }
        eigenvalue = total;
        let next: Vec<f64> = next.into_iter().map(|v| v / total).collect();
        change = next.iter().zip(&nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        nu = next;
        if change <= tol * 1e-3 {
            converged = true;
            break;
        }
    }
    if (eigenvalue - 1.0).abs() > EIGENVALUE_TOL {
        return Err(Error::Eigenvalue { eigenvalue });
    }
    if !converged {
        if n > DIRECT_SOLVE_MAX {
            return Err(Error::NotConverged { iterations: max_iter, change });
        }
        nu = stationary_direct(&wv, &grid, n, wc)?;
    }
    let masses: Vec<f64> = (0..grid.len()).map(|i| wv[i] * nu[grid.shift(i)]).collect();
    let total: f64 = masses.iter().sum();
    let masses = masses.into_iter().map(|m| m / total).collect();
    Ok(MeasureRep::Cylinder(CylinderMeasure::new(&space, d, masses)?))
}

/// Stationary vector of the chain `T[j][k] = sum_{i in pre(j), parent(i)=k} W_i`
/// by Grassmann–Taksar–Heyman elimination. Non-stochastic `T` with
/// eigenvalue 1 is first conjugated by its harmonic function.
fn stationary_direct(
    wv: &[f64],
    grid: &crate::systems::Grid,
    n: usize,
    wc: &CylinderFunction,
) -> Result<Vec<f64>> {
    let mut p = vec![0.0f64; n * n];
    for i in 0..grid.len() {
        p[grid.shift(i) * n + grid.parent(i)] += wv[i];
    }
    let row_defect = (0..n).map(|j| (p[j * n..(j + 1) * n].iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let mut h = vec![1.0; n];
    if row_defect > 1e-12 {
        let harmonic = solve_eigenfunction(
            &Weight::Cylinder(wc.clone()),
            &CylinderFunction::constant(wc.space(), 1.0),
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )?;
        let hd = harmonic.h.refine(grid.depth().max(harmonic.h.depth()))?;
        // h as a depth-(d-1) function: it is constant on children after the first step
        let space = wc.space();
        let hv = hd.project(grid.depth() - 1, &MeasureRep::Cylinder(CylinderMeasure::uniform(space, hd.depth())))?;
        h = hv.values().iter().map(|v| v.re).collect();
        if let Some(j) = h.iter().position(|&x| x <= 0.0) {
            return Err(Error::VanishingHarmonic { word: space.format_word(&space.word(grid.depth() - 1, j)) });
        }
        for j in 0..n {
            for k in 0..n {
                p[j * n + k] *= h[k] / h[j];
            }
        }
    }
    let pi = gth(&mut p, n);
    let nu: Vec<f64> = pi.iter().zip(&h).map(|(a, b)| a / b).collect();
    let total: f64 = nu.iter().sum();
    Ok(nu.into_iter().map(|v| v / total).collect())
}

fn gth(p: &mut [f64], n: usize) -> Vec<f64> {
    for k in (1..n).rev() {
        let s: f64 = p[k * n..k * n + k].iter().sum();
        if s <= 0.0 {
            continue;
        }
        for i in 0..k {
            p[i * n + k] /= s;
        }
        for i in 0..k {
            let pik = p[i * n + k];
            if pik == 0.0 {
                continue;
            }
            for j in 0..k {
                p[i * n + j] += pik * p[k * n + j];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * p[i * n + k]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.into_iter().map(|v| v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{invariance_residual, InvarianceKind};
    use crate::systems::System;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn space(sys: &System) -> Arc<SymbolSpace> {
        Arc::clone(sys.symbol_space().unwrap())
    }

    fn haar_weight(depth: usize) -> Weight {
        let sys = System::circle(2).unwrap();
        weight_from_filter(&sys, &Filter::haar(), depth).unwrap()
    }

    #[test]
    fn constant_half_averages() {
        let s = space(&System::circle(2).unwrap());
        let w = Weight::constant(&s, 0.5).unwrap();
        let out = transfer_apply(&w, &CylinderFunction::constant(&s, 1.0)).unwrap();
        assert_eq!(out.depth(), 0);
        assert_eq!(out.values(), &[c(1.0)]);
    }

    #[test]
    fn haar_weight_is_cos_squared() {
        let w = haar_weight(10);
        let wc = w.as_cylinder().unwrap();
        let mids = wc.space().midpoints(10).unwrap();
        for (v, x) in wc.values().iter().zip(mids) {
            assert!((v.re - (PI * x).cos().powi(2)).abs() < 1e-14);
        }
        // cos^2(pi x/2) + cos^2(pi (x+1)/2) = 1
        let s = Arc::clone(wc.space());
        let out = transfer_apply(&w, &CylinderFunction::constant(&s, 1.0)).unwrap();
        assert!(out.sup_distance(&CylinderFunction::constant(&s, 1.0)) <= 2e-3);
    }

    #[test]
    fn golden_mean_branch_counts() {
        let sys = System::subshift(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let s = space(&sys);
        let w = Weight::constant(&s, 1.0).unwrap().as_cylinder().unwrap().refine(1).unwrap();
        let out = transfer_apply(&Weight::cylinder(w).unwrap(), &CylinderFunction::constant(&s, 1.0)).unwrap();
        assert_eq!(out.depth(), 1);
        assert_eq!(out.values(), &[c(2.0), c(1.0)]);
    }

    #[test]
    fn weights_from_simple_filters() {
        let sys = System::circle(2).unwrap();
        let w = weight_from_filter(&sys, &Filter::constant(c(1.0)), 3).unwrap();
        assert!(w.as_cylinder().unwrap().values().iter().all(|&v| v == c(0.5)));
        let cantor = System::cantor();
        let w = weight_from_filter(&cantor, &Filter::constant(c(2f64.sqrt())), 3).unwrap();
        assert!(w.as_cylinder().unwrap().values().iter().all(|v| (v.re - 1.0).abs() < 1e-15));
    }

    #[test]
    fn eigenfunction_examples() {
        let s = space(&System::circle(2).unwrap());
        let one = CylinderFunction::constant(&s, 1.0);
        let h = solve_eigenfunction(&Weight::constant(&s, 0.5).unwrap(), &one, 1e-10, 100).unwrap();
        assert!(h.converged);
        assert_eq!(h.residual, 0.0);
        assert!(h.h.sup_distance(&one) == 0.0);

        let h = solve_eigenfunction(&haar_weight(10), &one, 1e-10, 100).unwrap();
        assert!(h.h.sup_distance(&one) < 1e-8);
        assert!(h.residual < 1e-8);

        let cs = space(&System::cantor());
        let h = solve_eigenfunction(
            &Weight::constant(&cs, 1.0).unwrap().rescaled(2.0),
            &CylinderFunction::constant(&cs, 1.0),
            1e-10,
            100,
        )
        .unwrap();
        assert!(h.h.sup_distance(&CylinderFunction::constant(&cs, 1.0)) < 1e-12);
    }

    #[test]
    fn eigenfunction_rejects_zero_init() {
        let s = space(&System::circle(2).unwrap());
        let r = solve_eigenfunction(&Weight::constant(&s, 0.5).unwrap(), &CylinderFunction::constant(&s, 0.0), 1e-10, 10);
        assert!(matches!(r, Err(Error::ZeroIterate)));
    }

    #[test]
    fn eigenfunction_reports_non_convergence() {
        // weight concentrated on one branch: slow, bounded number of steps
        let s = space(&System::circle(2).unwrap());
        let w = Weight::cylinder(CylinderFunction::from_real_fn(&s, 6, |x| c(0.2 + x)).unwrap()).unwrap();
        let init = CylinderFunction::from_real_fn(&s, 6, |x| c(1.0 + 10.0 * x)).unwrap();
        let h = solve_eigenfunction(&w, &init, 0.0, 3).unwrap();
        assert!(!h.converged);
        assert_eq!(h.iterations, 3);
    }

    #[test]
    fn eigenmeasure_examples() {
        let s = space(&System::circle(2).unwrap());
        let nu = solve_eigenmeasure(&Weight::constant(&s, 0.5).unwrap()).unwrap();
        let m = nu.masses_at(&s, 1).unwrap();
        assert!(m.iter().all(|&v| (v - 0.5).abs() < 1e-12));

        let cs = space(&System::cantor());
        let nu = solve_eigenmeasure(&Weight::constant(&cs, 0.5).unwrap()).unwrap();
        let m = nu.masses_at(&cs, 1).unwrap();
        assert!(m.iter().all(|&v| (v - 0.5).abs() < 1e-12));

        let s3 = space(&System::circle(3).unwrap());
        let w = Weight::cylinder(CylinderFunction::constant(&s3, 1.0 / 3.0).refine(4).unwrap()).unwrap();
        let nu = solve_eigenmeasure(&w).unwrap();
        let m = nu.masses_at(&s3, 4).unwrap();
        assert!(m.iter().all(|&v| (v - 1.0 / 81.0).abs() < 1e-12));
    }

    #[test]
    fn eigenmeasure_reports_eigenvalue() {
        let s = space(&System::circle(2).unwrap());
        let r = solve_eigenmeasure(&Weight::constant(&s, 0.75).unwrap());
        match r {
            Err(Error::Eigenvalue { eigenvalue }) => assert!((eigenvalue - 1.5).abs() < 1e-12),
            other => panic!("expected eigenvalue error, got {other:?}"),
        }
    }

    #[test]
    fn haar_eigenmeasure_concentrates_at_zero() {
        // slow chain: exercised through the direct solve. The circle point 0 has
        // two codings, 000... and 111..., and nu sits next to both.
        let w = haar_weight(8);
        let nu = solve_eigenmeasure_with(&w, 1e-10, 200).unwrap();
        let s = Arc::clone(w.as_cylinder().unwrap().space());
        let m = nu.masses_at(&s, 7).unwrap();
        assert!(m[0] + m[m.len() - 1] > 0.99, "{} {}", m[0], m[m.len() - 1]);
        let f = CylinderFunction::from_real_fn(&s, 7, |x| c((3.0 * x).sin())).unwrap();
        let lhs = nu.integrate_cylinder(&transfer_apply(&w, &f).unwrap()).unwrap();
        let rhs = nu.integrate_cylinder(&f).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    fn positive_weight(s: &Arc<SymbolSpace>, depth: usize, raw: &[f64]) -> Weight {
        // normalize so that R_W 1 = 1 (row-stochastic chain)
        let w = CylinderFunction::from_real_values(s, depth, raw).unwrap();
        let r1 = apply_cylinder(&w, &CylinderFunction::constant(s, 1.0)).unwrap();
        let g = s.grid(depth);
        let r1g = s.grid(depth - 1);
        let _ = r1g;
        let vals: Vec<f64> = (0..g.len()).map(|i| raw[i] / r1.values()[g.shift(i)].re).collect();
        Weight::cylinder(CylinderFunction::from_real_values(s, depth, &vals).unwrap()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pull_out_identity(fv in proptest::collection::vec(-3.0f64..3.0, 16),
                             gv in proptest::collection::vec(-3.0f64..3.0, 8),
                             wv in proptest::collection::vec(0.0f64..2.0, 16)) {
            let s = space(&System::circle(2).unwrap());
            let w = Weight::cylinder(CylinderFunction::from_real_values(&s, 4, &wv).unwrap()).unwrap();
            let f = CylinderFunction::from_real_values(&s, 4, &fv).unwrap();
            let g = CylinderFunction::from_real_values(&s, 3, &gv).unwrap();
            let lhs = transfer_apply(&w, &g.compose_r().mul(&f)).unwrap();
            let rhs = g.mul(&transfer_apply(&w, &f).unwrap());
            prop_assert!(lhs.sup_distance(&rhs) < 1e-12);
        }

        #[test]
        fn positivity(fv in proptest::collection::vec(0.0f64..3.0, 13),
                      wv in proptest::collection::vec(0.0f64..2.0, 13)) {
            let s = space(&System::subshift(vec![vec![1, 1], vec![1, 0]]).unwrap());
            let w = Weight::cylinder(CylinderFunction::from_real_values(&s, 5, &wv).unwrap()).unwrap();
            let f = CylinderFunction::from_real_values(&s, 5, &fv).unwrap();
            let out = transfer_apply(&w, &f).unwrap();
            prop_assert!(out.values().iter().all(|v| v.re >= 0.0 && v.im == 0.0));
        }

        #[test]
        fn residual_is_recheckable(wv in proptest::collection::vec(0.1f64..2.0, 32)) {
            let s = space(&System::circle(2).unwrap());
            let w = Weight::cylinder(CylinderFunction::from_real_values(&s, 5, &wv).unwrap()).unwrap();
            let h = solve_eigenfunction(&w, &CylinderFunction::constant(&s, 1.0), 1e-12, 5000).unwrap();
            let again = transfer_apply(&w, &h.h).unwrap().sup_distance(&h.h);
            prop_assert_eq!(again, h.residual);
        }

        #[test]
        fn h_nu_is_invariant(raw in proptest::collection::vec(0.1f64..2.0, 32)) {
            let s = space(&System::circle(2).unwrap());
            let w = positive_weight(&s, 5, &raw);
            // a non-stochastic weight with the same eigen-data up to a conjugation
            let hv = CylinderFunction::from_real_fn(&s, 4, |x| c(1.0 + x * x)).unwrap();
            let wh = w.as_cylinder().unwrap().mul(&hv.refine(5).unwrap().map(|v| 1.0 / v)).mul(&hv.compose_r());
            let w2 = Weight::cylinder(wh.map(|v| c(v.re))).unwrap();
            let h = solve_eigenfunction(&w2, &CylinderFunction::constant(&s, 1.0), 1e-13, 10_000).unwrap();
            prop_assert!(h.residual < 1e-10);
            let nu = solve_eigenmeasure(&w2).unwrap();
            let d = h.h.depth().max(5);
            let nu_m = nu.masses_at(&s, d - 1).unwrap();
            let hh = h.h.project(d - 1, &MeasureRep::Cylinder(CylinderMeasure::uniform(&s, d))).unwrap();
            let mu: Vec<f64> = nu_m.iter().zip(hh.values()).map(|(a, b)| a * b.re).collect();
            let mu = MeasureRep::Cylinder(CylinderMeasure::new(&s, d - 1, mu).unwrap());
            let sys = System::circle(2).unwrap();
            let rep = invariance_residual(&sys, &mu, InvarianceKind::Invariance, d - 2).unwrap();
            prop_assert!(rep.residual < 1e-8, "{}", rep.residual);
        }
    }
}
