//! Low-pass filters `m0`, the operator `(S f)(x) = m0(x) f(r(x))`, the
//! isometry test for `S`, matrix QMF conditions and scaling functions.

mod matrix;
mod scaling;

use std::f64::consts::TAU;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{invariance_residual, InvarianceKind, MeasureRep};
use crate::representation::CylinderFunction;
use crate::systems::{Point, SymbolSpace, System};
use crate::transfer::{apply_cylinder, weight_from_samples, Harmonic};

pub use matrix::{qmf_matrix_residual, MatrixFilter, QmfReport};
pub use scaling::{
    cascade, psi_isometry_residual, scaling_hat, scaling_hat_grid, Cascade, PsiIsometry, PsiQuadrature, ScalingHat,
    DEFAULT_K, NORMALIZATION_TOL,
};

/// A filter on `X`: a trigonometric polynomial on the circle or arbitrary
/// cylinder values.
#[derive(Clone, Debug)]
pub enum Filter {
    /// `m0(x) = sum_k coeffs[k] e^{-2 pi i (offset + k) x}`.
    TrigPoly { coeffs: Vec<Complex64>, offset: i64 },
    Cylinder(CylinderFunction),
}

/// JSON form: `{"coeffs": [[re, im], ...], "offset": n}` or `{"cylinder": "m0.csv"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FilterSpec {
    TrigPoly {
        #[serde(with = "crate::systems::complex_pairs")]
        coeffs: Vec<Complex64>,
        #[serde(default)]
        offset: i64,
    },
    Cylinder {
        cylinder: String,
    },
}

impl Filter {
    /// `(1 + e^{-2 pi i x}) / sqrt 2`.
    pub fn haar() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Filter::TrigPoly { coeffs: vec![a, a], offset: 0 }
    }

    pub fn constant(c: Complex64) -> Self {
        Filter::TrigPoly { coeffs: vec![c], offset: 0 }
    }

    pub fn trig(coeffs: Vec<Complex64>, offset: i64) -> Self {
        Filter::TrigPoly { coeffs, offset }
    }

    /// Resolves a JSON spec; cylinder CSV paths are relative to `base`.
    pub fn from_spec(spec: &FilterSpec, space: Option<&Arc<SymbolSpace>>, base: &Path) -> Result<Self> {
        match spec {
            FilterSpec::TrigPoly { coeffs, offset } => {
                if coeffs.is_empty() {
                    return Err(Error::Parse("filter needs at least one coefficient".into()));
                }
                Ok(Filter::trig(coeffs.clone(), *offset))
            }
            FilterSpec::Cylinder { cylinder } => {
                let space = space.ok_or(Error::NotSymbolic("cylinder filter on a non-symbolic system"))?;
                let file = std::fs::File::open(base.join(cylinder))?;
                Ok(Filter::Cylinder(CylinderFunction::read_csv(space, file)?))
            }
        }
    }

    pub fn from_file(path: impl AsRef<Path>, space: Option<&Arc<SymbolSpace>>) -> Result<Self> {
        let path = path.as_ref();
        let spec: FilterSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_spec(&spec, space, path.parent().unwrap_or(Path::new(".")))
    }

    /// `m0(x)` for real `x`.
    pub fn eval_real(&self, x: f64) -> Result<Complex64> {
        match self {
            Filter::TrigPoly { coeffs, offset } => Ok(trig_eval(coeffs, *offset, x)),
            Filter::Cylinder(f) => {
                let p = crate::systems::SymbolicPoint::from_real(f.space(), x, f.depth())?;
                f.eval(&p)
            }
        }
    }

    pub fn eval(&self, space: &SymbolSpace, x: &Point) -> Result<Complex64> {
        match (self, x) {
            (Filter::Cylinder(f), _) => f.eval_point(x),
            (Filter::TrigPoly { .. }, Point::Symbolic(p)) => {
                let t = p.real_value(space).ok_or(Error::NotSymbolic("trigonometric filter needs N-adic digits"))?;
                self.eval_real(t)
            }
            (Filter::TrigPoly { .. }, Point::Complex(_)) => {
                Err(Error::Incompatible("trigonometric filter at a complex point".into()))
            }
        }
    }

    /// Cylinder values at depth `depth` (trigonometric filters at midpoints;
    /// cylinder filters refined if shallower).
    pub fn sample(&self, space: &Arc<SymbolSpace>, depth: usize) -> Result<CylinderFunction> {
        match self {
            Filter::TrigPoly { coeffs, offset } => {
                if space.radix().is_none() {
                    return Err(Error::NotSymbolic("trigonometric filter on a subshift"));
                }
                CylinderFunction::from_real_fn(space, depth, |x| trig_eval(coeffs, *offset, x))
            }
            Filter::Cylinder(f) => {
                if !f.space().same_as(space) {
                    return Err(Error::MismatchedSystems);
                }
                f.refine(depth.max(f.depth()))
            }
        }
    }

    /// `(coefficient index n, a_n)` pairs of a trigonometric filter.
    pub fn coefficients(&self) -> Option<Vec<(i64, Complex64)>> {
        match self {
            Filter::TrigPoly { coeffs, offset } => {
                Some(coeffs.iter().enumerate().map(|(k, &a)| (offset + k as i64, a)).collect())
            }
            Filter::Cylinder(_) => None,
        }
    }
}

fn trig_eval(coeffs: &[Complex64], offset: i64, x: f64) -> Complex64 {
    // Horner in e^{-2 pi i x}, phases reduced mod 1 first
    let t = x.rem_euclid(1.0);
    let z = Complex64::from_polar(1.0, -TAU * t);
    let s = coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a);
    if offset == 0 {
        s
    } else {
        s * Complex64::from_polar(1.0, -TAU * (offset as f64 * t).rem_euclid(1.0))
    }
}

/// `S f = m0 * (f o r)`, at depth `max(depth(m0), depth(f) + 1)`.
pub fn apply_s(m0: &CylinderFunction, f: &CylinderFunction) -> CylinderFunction {
    m0.mul(&f.compose_r())
}

#[derive(Clone, Debug, Serialize)]
pub struct IsometryReport {
    /// `||R_{m0} h - h||_inf`.
    pub harmonic_residual: f64,
    /// `max_f |<Sf,Sf> - <f,f>|` in `L^2(h dmu)` over `f = 1` and all
    /// cylinder indicators below the working depth.
    pub isometry_defect: f64,
    /// The larger of the two.
    pub residual: f64,
    /// Strong-invariance residual of `mu` (checked first, never fatal).
    pub strong_invariance: f64,
    pub working_depth: usize,
}

/// Checks that `S_{m0}` is an isometry of `L^2(h dmu)`, alongside the
/// harmonic condition `R_{m0} h = h`, for trigonometric filters sampled at
/// depth `depth`.
pub fn isometry_residual(
    sys: &System,
    m0: &Filter,
    h: &Harmonic,
    mu: &MeasureRep,
    depth: usize,
) -> Result<IsometryReport> {
    let space = sys.symbol_space()?;
    let m = m0.sample(space, depth)?;
    let w = weight_from_samples(&m);
    // h must be read at depth d - 1, one level above the filter
    let d = m.depth().max(w.depth()).max(h.h.depth() + 1).max(space.min_transfer_depth());
    let hd = h.h.refine(d)?;
    let rh = apply_cylinder(&w, &hd)?;
    let harmonic_residual = rh.sup_distance(&hd);

    let strong = match mu.max_depth() {
        Some(0) => 0.0,
        Some(md) => invariance_residual(sys, mu, InvarianceKind::StrongInvariance, md.min(d) - 1)?.residual,
        None => invariance_residual(sys, mu, InvarianceKind::StrongInvariance, d.min(8))?.residual,
    };

    // <S chi_E, S chi_E> = sum_i |m0_i|^2 h_i mu_i [shift(i) in E], pushed to
    // depth d-1 and then coarsened alongside <chi_E, chi_E> = sum h mu
    let mu_d = mu.masses_at(space, d)?;
    let mu_dm = mu.masses_at(space, d - 1)?;
    let hm = h.h.refine(d - 1)?;
    let g = space.grid(d);
    let md = m.refine(d)?;
    let mut lhs = vec![0.0; space.word_count(d - 1)];
    for i in 0..g.len() {
        lhs[g.shift(i)] += md.values()[i].norm_sqr() * hd.values()[i].re * mu_d[i];
    }
    let mut rhs: Vec<f64> = hm.values().iter().zip(&mu_dm).map(|(v, m)| v.re * m).collect();
    let mut defect: f64 = 0.0;
    for level in (0..d).rev() {
        for (a, b) in lhs.iter().zip(&rhs) {
            defect = defect.max((a - b).abs());
        }
        if level == 0 {
            break;
        }
        let gl = space.grid(level);
        let mut l2 = vec![0.0; space.word_count(level - 1)];
        let mut r2 = vec![0.0; space.word_count(level - 1)];
        for i in 0..gl.len() {
            l2[gl.parent(i)] += lhs[i];
            r2[gl.parent(i)] += rhs[i];
        }
        lhs = l2;
        rhs = r2;
    }
    Ok(IsometryReport {
        harmonic_residual,
        isometry_defect: defect,
        residual: harmonic_residual.max(defect),
        strong_invariance: strong,
        working_depth: d,
    })
}
