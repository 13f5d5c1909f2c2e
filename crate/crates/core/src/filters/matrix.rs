//! Matrix-valued filters and the condition
//! `(1/#r^{-1}(x)) sum_{r(y)=x} M0(y)^* H(y) M0(y) = H(x)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::systems::{Point, System};

type MatrixFn = Arc<dyn Fn(&Point) -> DMatrix<Complex64> + Send + Sync>;

#[derive(Clone)]
pub struct MatrixFilter {
    dim: usize,
    m0: MatrixFn,
    h: MatrixFn,
}

impl fmt::Debug for MatrixFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixFilter({0}x{0})", self.dim)
    }
}

impl MatrixFilter {
    pub fn new(
        dim: usize,
        m0: impl Fn(&Point) -> DMatrix<Complex64> + Send + Sync + 'static,
        h: impl Fn(&Point) -> DMatrix<Complex64> + Send + Sync + 'static,
    ) -> Self {
        MatrixFilter { dim, m0: Arc::new(m0), h: Arc::new(h) }
    }

    /// `1 x 1` filter from a scalar `m0` with `H = 1`.
    pub fn scalar(m0: impl Fn(&Point) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::new(1, move |x| DMatrix::from_element(1, 1, m0(x)), |_| DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m0(&self, x: &Point) -> DMatrix<Complex64> {
        (self.m0)(x)
    }

    pub fn h(&self, x: &Point) -> DMatrix<Complex64> {
        (self.h)(x)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QmfReport {
    /// Max Frobenius norm of LHS - RHS over evaluated points.
    pub residual: f64,
    pub evaluated: usize,
    /// Points skipped because preimages could not be computed.
    pub skipped: usize,
    /// Smallest eigenvalue of the Hermitian part of `H` seen (should be >= 0).
    pub min_h_eigenvalue: f64,
}

pub fn qmf_matrix_residual(sys: &System, mf: &MatrixFilter, points: &[Point]) -> Result<QmfReport> {
    let mut residual: f64 = 0.0;
    let mut skipped = 0;
    let mut min_eig = f64::INFINITY;
    for x in points {
        let pre = match sys.preimages(x) {
            Ok(p) if !p.is_empty() => p,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let mut lhs = DMatrix::zeros(mf.dim, mf.dim);
        for y in &pre {
            let m = mf.m0(y);
            lhs += m.adjoint() * mf.h(y) * m;
        }
        lhs /= Complex64::new(pre.len() as f64, 0.0);
        let hx = mf.h(x);
        residual = residual.max((lhs - &hx).norm());
        let herm = (&hx + hx.adjoint()) * Complex64::new(0.5, 0.0);
        let re = DMatrix::from_fn(mf.dim, mf.dim, |i, j| herm[(i, j)].re);
        if mf.dim > 0 {
            // eigenvalues of the real symmetric part suffice for real H; for complex
            // Hermitian H use the 2n x 2n real embedding
            let im = DMatrix::from_fn(mf.dim, mf.dim, |i, j| herm[(i, j)].im);
            let n = mf.dim;
            let big = DMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
                (true, true) => re[(i, j)],
                (false, false) => re[(i - n, j - n)],
                (true, false) => -im[(i, j - n)],
                (false, true) => im[(i - n, j)],
            });
            let ev = big.symmetric_eigenvalues();
            min_eig = min_eig.min(ev.iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
    Ok(QmfReport { residual, evaluated: points.len() - skipped, skipped, min_h_eigenvalue: min_eig })
}
