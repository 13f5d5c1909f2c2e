//! Complex polynomials and all-roots solving by simultaneous iteration
//! (Aberth–Ehrlich), with closed forms for degree one and two.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex polynomial, coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() == 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Poly { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].norm() == 0.0
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and derivative by Horner.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let mut p = zero;
        let mut dp = zero;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `self - x * other`.
    pub fn sub_scaled(&self, x: Complex64, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        let c = (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(zero);
                let b = other.coeffs.get(i).copied().unwrap_or(zero);
                a - x * b
            })
            .collect();
        Poly::new(c)
    }

    /// All roots counted with multiplicity (numerically), degree many.
    pub fn roots(&self, tol: f64, max_iter: usize) -> Result<Vec<Complex64>> {
        let n = self.degree();
        let c = &self.coeffs;
        match n {
            0 => Ok(Vec::new()),
            1 => Ok(vec![-c[0] / c[1]]),
            2 => Ok(quadratic(c[2], c[1], c[0]).to_vec()),
            _ => aberth(self, tol, max_iter),
        }
    }
}

fn quadratic(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 2] {
    let disc = (b * b - 4.0 * a * c).sqrt();
    // pick the sign avoiding cancellation
    let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) / 2.0 } else { -(b - disc) / 2.0 };
    if q.norm() == 0.0 {
        let z = Complex64::new(0.0, 0.0);
        return [z, z];
    }
    [q / a, c / q]
}

fn aberth(p: &Poly, tol: f64, max_iter: usize) -> Result<Vec<Complex64>> {
    let n = p.degree();
    let c = p.coeffs();
    let lead = c[n].norm();
    // Cauchy bound on root moduli
    let bound = 1.0 + c[..n].iter().map(|a| a.norm() / lead).fold(0.0, f64::max);
    let radius = bound.min(1e6) * 0.5 + 0.5;
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..max_iter {
        let mut step_max: f64 = 0.0;
        for i in 0..n {
            let (v, dv) = p.eval_with_derivative(z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if w.is_finite() {
                z[i] -= w;
                step_max = step_max.max(w.norm() / (1.0 + z[i].norm()));
            }
        }
        if step_max <= tol {
            return Ok(z);
        }
    }
    let residual = z.iter().map(|&r| p.eval(r).norm()).fold(0.0, f64::max);
    // clusters at multiple roots converge slowly; accept if the residual is tiny
    if residual <= tol * lead.max(1.0) {
        return Ok(z);
    }
    Err(Error::RootSolver { iterations: max_iter, residual })
}

/// Merge roots closer than `tol` (relative to `1 + |z|`).
pub fn dedup_roots(roots: &[Complex64], tol: f64) -> Vec<Complex64> {
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        match out.iter_mut().find(|(c, _)| (*c - r).norm() <= tol * (1.0 + r.norm())) {
            Some((c, m)) => {
                *c = (*c * *m as f64 + r) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => out.push((r, 1)),
        }
    }
    out.into_iter().map(|(c, _)| c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadratic_roots_of_unity() {
        let p = Poly::new(vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let mut r = p.roots(1e-12, 200).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((r[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn aberth_recovers_known_roots() {
        // (z-1)(z+2)(z-i)(z+0.5i)(z-3)
        let known = [c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0), c(0.0, -0.5), c(3.0, 0.0)];
        let mut coeffs = vec![c(1.0, 0.0)];
        for &r in &known {
            let mut next = vec![c(0.0, 0.0); coeffs.len() + 1];
            for (i, &a) in coeffs.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * r;
            }
            coeffs = next;
        }
        let p = Poly::new(coeffs);
        let roots = p.roots(1e-13, 200).unwrap();
        for k in known {
            assert!(roots.iter().any(|&r| (r - k).norm() < 1e-9), "missing {k}");
        }
    }

    #[test]
    fn double_root_is_merged() {
        let p = Poly::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let r = dedup_roots(&p.roots(1e-12, 200).unwrap(), 1e-8);
        assert_eq!(r.len(), 1);
    }
}
