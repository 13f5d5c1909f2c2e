//! Truncated martingales `(xi_0, ..., xi_m)` with `R(xi_{k+1} h) = xi_k h`,
//! their inner products `lim int R^n(conj(xi_n) eta_n h) dmu`, and the
//! operators `U` and `pi(g)` acting level by level.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::{omega_n, PathContext, H_FLOOR};
use crate::error::{Error, Result};
use crate::representation::CylinderFunction;
use crate::transfer::weight_from_samples;

/// Allowed sup difference between the context weight and `|m0|^2 / #`.
pub const WEIGHT_MATCH_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Martingale {
    ctx: Arc<PathContext>,
    levels: Vec<CylinderFunction>,
    compat_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerTrace {
    /// Value at the deepest common level.
    pub value: Complex64,
    /// `int R^k(conj(xi_k) eta_k h) dmu` for every common level `k`.
    pub trace: Vec<Complex64>,
}

impl Martingale {
    /// Wraps explicit levels and measures their compatibility.
    pub fn new(ctx: &Arc<PathContext>, levels: Vec<CylinderFunction>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::TooFewLevels { needed: 1, available: 0 });
        }
        let compat_residual = compat(ctx, &levels)?;
        Ok(Martingale { ctx: Arc::clone(ctx), levels, compat_residual })
    }

    pub fn context(&self) -> &Arc<PathContext> {
        &self.ctx
    }

    pub fn levels(&self) -> &[CylinderFunction] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &CylinderFunction {
        &self.levels[k]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `max_k ||R(xi_{k+1} h) - xi_k h||_inf`.
    pub fn compat_residual(&self) -> f64 {
        self.compat_residual
    }

    /// `int R^k(|xi_k|^2 h) dmu` for each level.
    pub fn level_norms(&self) -> Result<Vec<f64>> {
        self.levels.iter().enumerate().map(|(k, xi)| Ok(omega_n(&self.ctx, &xi.abs_sq(), k)?.re)).collect()
    }
}

fn compat(ctx: &PathContext, levels: &[CylinderFunction]) -> Result<f64> {
    let mut r: f64 = 0.0;
    for k in 0..levels.len().saturating_sub(1) {
        let lhs = ctx.transfer(&levels[k + 1].mul(ctx.h()))?;
        r = r.max(lhs.sup_distance(&levels[k].mul(ctx.h())));
    }
    Ok(r)
}

/// The martingale through `xi` at level `n`, truncated at level `m >= n`:
/// `xi_k = R^{n-k}(xi h) / h` below and `xi o r^{k-n}` above.
pub fn martingale_from_level(ctx: &Arc<PathContext>, xi: &CylinderFunction, n: usize, m: usize) -> Result<Martingale> {
    if m < n {
        return Err(Error::TooFewLevels { needed: n + 1, available: m + 1 });
    }
    let space = ctx.space();
    let mut levels = vec![xi.clone(); m + 1];
    let mut g = xi.mul(ctx.h());
    for k in (0..n).rev() {
        g = ctx.transfer(&g)?;
        let (num, h) = g.align(ctx.h());
        let mut vals = Vec::with_capacity(num.values().len());
        for (i, (a, b)) in num.values().iter().zip(h.values()).enumerate() {
            if b.norm() <= H_FLOOR {
                return Err(Error::VanishingHarmonic { word: space.format_word(&space.word(h.depth(), i)) });
            }
            vals.push(a / b);
        }
        levels[k] = CylinderFunction::from_values(space, num.depth(), vals)?;
    }
    for k in n + 1..=m {
        levels[k] = levels[k - 1].compose_r();
    }
    Martingale::new(ctx, levels)
}

/// Level values of `<a, b>` and the value at the deepest common level.
pub fn martingale_inner(a: &Martingale, b: &Martingale) -> Result<InnerTrace> {
    if !Arc::ptr_eq(&a.ctx, &b.ctx) {
        return Err(Error::MismatchedSystems);
    }
    let n = a.len().min(b.len());
    let trace = (0..n)
        .map(|k| omega_n(&a.ctx, &a.levels[k].conj().mul(&b.levels[k]), k))
        .collect::<Result<Vec<_>>>()?;
    Ok(InnerTrace { value: *trace.last().unwrap(), trace })
}

/// `(U a)_n = (m0 o r^n) xi_{n+1}`, one level shorter. `m0` is the filter
/// sampled on cylinders; its weight must be the context weight.
pub fn apply_u(m0: &CylinderFunction, a: &Martingale) -> Result<Martingale> {
    if a.len() < 2 {
        return Err(Error::TooFewLevels { needed: 2, available: a.len() });
    }
    let difference = weight_from_samples(m0).sup_distance(a.ctx.weight());
    if difference > WEIGHT_MATCH_TOL {
        return Err(Error::WeightMismatch { difference });
    }
    let levels = (0..a.len() - 1).map(|n| m0.compose_r_n(n).mul(&a.levels[n + 1])).collect();
    Martingale::new(&a.ctx, levels)
}

/// `(pi(g) a)_n = (g o r^n) xi_n`.
pub fn apply_pi(g: &CylinderFunction, a: &Martingale) -> Result<Martingale> {
    let levels = a.levels.iter().enumerate().map(|(n, xi)| g.compose_r_n(n).mul(xi)).collect();
    Martingale::new(&a.ctx, levels)
}
