//! The space of backward orbits `X_inf = {(x_n) : r(x_{n+1}) = x_n}`, the
//! consistent family `omega_n(f) = int R^n(f h) dmu`, a sampler for the
//! measure it defines, and the martingale Hilbert space with `U` and `pi`.

mod martingale;

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::MeasureRep;
use crate::representation::CylinderFunction;
use crate::systems::{Point, SymbolSpace, SymbolicPoint, System};
use crate::transfer::{apply_cylinder, Harmonic, Weight};

pub use martingale::{apply_pi, apply_u, martingale_from_level, martingale_inner, InnerTrace, Martingale};

/// Largest allowed `|sum_y W(y) h(y) / h(x) - 1|` along a sampled path.
pub const TRANSITION_TOL: f64 = 1e-6;
/// `h` below this is treated as zero when dividing.
pub const H_FLOOR: f64 = 1e-14;
/// Starting points are drawn from the deepest cylinder level with at most this many cells.
pub const START_CELLS: usize = 1 << 16;

/// `(sys, W, h, mu)` with `h` rescaled so that `int h dmu = 1`.
#[derive(Clone, Debug)]
pub struct PathContext {
    system: System,
    space: Arc<SymbolSpace>,
    weight: CylinderFunction,
    h: CylinderFunction,
    h_scale: f64,
    harmonic_residual: f64,
    mu: MeasureRep,
}

impl PathContext {
    pub fn new(system: &System, weight: &Weight, h: &Harmonic, mu: MeasureRep) -> Result<Self> {
        let space = Arc::clone(system.symbol_space()?);
        let w = weight.as_cylinder()?.clone();
        if !w.space().same_as(&space) || !h.h.space().same_as(&space) {
            return Err(Error::MismatchedSystems);
        }
        let mass = mu.integrate_cylinder(&h.h)?.re;
        if !(mass > 0.0) {
            return Err(Error::ZeroMass { word: "X".into() });
        }
        let hn = h.h.scale(1.0 / mass);
        let residual = apply_cylinder(&w, &hn)?.sup_distance(&hn);
        Ok(PathContext {
            system: system.clone(),
            space,
            weight: w,
            h: hn,
            h_scale: 1.0 / mass,
            harmonic_residual: residual,
            mu,
        })
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn space(&self) -> &Arc<SymbolSpace> {
        &self.space
    }

    pub fn weight(&self) -> &CylinderFunction {
        &self.weight
    }

    /// The normalized harmonic function.
    pub fn h(&self) -> &CylinderFunction {
        &self.h
    }

    /// Factor applied to the supplied `h` to make `int h dmu = 1`.
    pub fn h_scale(&self) -> f64 {
        self.h_scale
    }

    /// `||R_W h - h||_inf` for the normalized `h`.
    pub fn harmonic_residual(&self) -> f64 {
        self.harmonic_residual
    }

    pub fn mu(&self) -> &MeasureRep {
        &self.mu
    }

    /// `R_W g`.
    pub fn transfer(&self, g: &CylinderFunction) -> Result<CylinderFunction> {
        apply_cylinder(&self.weight, g)
    }

    /// `int R^n(g) dmu`.
    pub fn integrate_transferred(&self, g: &CylinderFunction, n: usize) -> Result<Complex64> {
        let mut g = g.clone();
        for _ in 0..n {
            g = self.transfer(&g)?;
        }
        if let Some(d) = self.mu.max_depth() {
            if g.depth() > d {
                return Err(Error::InsufficientDepth { needed: g.depth(), available: d });
            }
        }
        self.mu.integrate_cylinder(&g)
    }
}

/// `omega_n(f) = int R^n(f h) dmu`.
pub fn omega_n(ctx: &PathContext, f: &CylinderFunction, n: usize) -> Result<Complex64> {
    ctx.integrate_transferred(&f.mul(&ctx.h), n)
}

/// `|omega_{n+1}(f o r) - omega_n(f)|`.
pub fn consistency_residual(ctx: &PathContext, f: &CylinderFunction, n: usize) -> Result<f64> {
    Ok((omega_n(ctx, &f.compose_r(), n + 1)? - omega_n(ctx, f, n)?).norm())
}

/// A finite piece `(x_0, ..., x_n)` of a backward orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSegment {
    pub points: Vec<Point>,
}

impl PathSegment {
    /// The coordinate `theta_k(path) = x_k`.
    pub fn theta(&self, k: usize) -> &Point {
        &self.points[k]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `r(x_{k+1}) = x_k` for every k.
    pub fn is_orbit(&self, sys: &System) -> bool {
        self.points.windows(2).all(|w| sys.apply(&w[1]).map(|p| p == w[0]).unwrap_or(false))
    }
}

/// `count` independent paths of length `n + 1`: `x_0 ~ h dmu`, then
/// `x_{k+1} = a x_k` with probability `W(a x_k) h(a x_k) / h(x_k)`.
/// Path `i` uses ChaCha stream `i` of `seed`, so output is independent of
/// the thread count.
pub fn sample_paths(ctx: &PathContext, n: usize, count: usize, seed: u64) -> Result<Vec<PathSegment>> {
    let space = &ctx.space;
    let d = ctx.weight.depth().max(ctx.h.depth()).max(space.min_transfer_depth());
    let w = ctx.weight.refine(d)?;
    let h = ctx.h.refine(d)?;
    if let Some((i, v)) = h.values().iter().enumerate().find(|(_, v)| v.re < 0.0 || v.im != 0.0) {
        return Err(Error::NegativeWeight { word: space.format_word(&space.word(d, i)), value: v.re });
    }
    // x_0 is drawn from h dmu on a finer level than d so that its later digits are random too
    let mut d0 = d;
    while space.word_count(d0 + 1) <= START_CELLS && ctx.mu.max_depth().is_none_or(|m| d0 < m) {
        d0 += 1;
    }
    let h0 = h.refine(d0)?;
    let mu = ctx.mu.masses_at(space, d0)?;
    let mut cdf = Vec::with_capacity(mu.len());
    let mut acc = 0.0;
    for (m, hv) in mu.iter().zip(h0.values()) {
        acc += m * hv.re;
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::ZeroMass { word: "X".into() });
    }
    let (wv, hv) = (w.values(), h.values());
    (0..count)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let u = rng.random::<f64>() * acc;
            let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let x0 = SymbolicPoint::from_word(space, &space.word(d0, cell))?;
            let mut points = Vec::with_capacity(n + 1);
            let mut x = x0;
            points.push(Point::Symbolic(x.clone()));
            for step in 1..=n {
                let hx = hv[space.index_of(&x.prefix(d)).expect("admissible")].re;
                if hx <= H_FLOOR {
                    return Err(Error::VanishingHarmonic { word: space.format_word(&x.prefix(d)) });
                }
                let first = x.symbol(0);
                let mut probs: Vec<(u8, f64)> = Vec::with_capacity(space.predecessors(first).len());
                let mut total = 0.0;
                for &a in space.predecessors(first) {
                    let y = x.prepended(a);
                    let i = space.index_of(&y.prefix(d)).expect("admissible");
                    let pr = wv[i].re * hv[i].re / hx;
                    if pr < 0.0 {
                        return Err(Error::NegativeWeight { word: space.format_word(&y.prefix(d)), value: pr });
                    }
                    total += pr;
                    probs.push((a, pr));
                }
                if (total - 1.0).abs() > TRANSITION_TOL {
                    return Err(Error::Normalization { step, sum: total });
                }
                let mut u = rng.random::<f64>() * total;
                let mut pick = probs.last().unwrap().0;
                for &(a, pr) in &probs {
                    if u < pr {
                        pick = a;
                        break;
                    }
                    u -= pr;
                }
                x = x.prepended(pick);
                points.push(Point::Symbolic(x.clone()));
            }
            Ok(PathSegment { points })
        })
        .collect()
}
