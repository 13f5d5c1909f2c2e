//! Dynamical systems `(X, r)` with a finite-to-one onto map `r`: the circle
//! map `x -> Nx mod 1`, the Cantor map, subshifts of finite type and
//! rational maps of the Riemann sphere.

pub mod roots;
pub mod symbolic;

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use roots::Poly;
pub use symbolic::{Grid, SymbolSpace, SymbolicKind, SymbolicPoint};

/// Root acceptance tolerance on `|r(y) - x|`, scaled by `1 + |x|`.
pub const ROOT_TOL: f64 = 1e-10;
pub const ROOT_MAX_ITER: usize = 200;
/// Roots closer than this are one preimage (critical values).
pub const ROOT_DEDUP_TOL: f64 = 1e-8;

/// JSON description of a system.
///
/// ```json
/// {"kind":"circle","N":2}
/// {"kind":"cantor"}
/// {"kind":"sft","matrix":[[1,1],[1,0]]}
/// {"kind":"rational","p1":[[0,0],[0,0],[1,0]],"p2":[[1,0]]}
/// ```
///
/// Rational-map coefficients are `[re, im]` pairs in ascending powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemSpec {
    Circle {
        #[serde(rename = "N")]
        n: u32,
    },
    Cantor,
    Sft {
        matrix: Vec<Vec<u8>>,
    },
    Rational {
        #[serde(with = "complex_pairs")]
        p1: Vec<Complex64>,
        #[serde(with = "complex_pairs")]
        p2: Vec<Complex64>,
    },
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Circle { .. } => "circle",
            SystemSpec::Cantor => "cantor",
            SystemSpec::Sft { .. } => "sft",
            SystemSpec::Rational { .. } => "rational",
        }
    }

    /// `z -> z^2 + c`.
    pub fn quadratic(c: Complex64) -> Self {
        SystemSpec::Rational {
            p1: vec![c, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            p2: vec![Complex64::new(1.0, 0.0)],
        }
    }
}

/// Serde adapter for `Vec<Complex64>` as `[[re, im], ...]`.
pub mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

/// A point of `X`.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Symbolic(SymbolicPoint),
    Complex(Complex64),
}

impl Point {
    pub fn as_symbolic(&self) -> Option<&SymbolicPoint> {
        match self {
            Point::Symbolic(p) => Some(p),
            Point::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<Complex64> {
        match self {
            Point::Complex(z) => Some(*z),
            Point::Symbolic(_) => None,
        }
    }
}

#[derive(Debug)]
pub struct RationalMap {
    p1: Poly,
    p2: Poly,
    degree: usize,
}

impl RationalMap {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &Poly {
        &self.p1
    }

    pub fn denominator(&self) -> &Poly {
        &self.p2
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let den = self.p2.eval(z);
        if den.norm() == 0.0 {
            return Err(Error::Pole { re: z.re, im: z.im });
        }
        Ok(self.p1.eval(z) / den)
    }

    /// Distinct solutions of `p1(y) - x p2(y) = 0`.
    pub fn preimages(&self, x: Complex64) -> Result<Vec<Complex64>> {
        let q = self.p1.sub_scaled(x, &self.p2);
        let raw = q.roots(ROOT_TOL, ROOT_MAX_ITER)?;
        let mut out = Vec::with_capacity(raw.len());
        for y in roots::dedup_roots(&raw, ROOT_DEDUP_TOL) {
            let y = polish(&q, y);
            let den = self.p2.eval(y);
            if den.norm() == 0.0 {
                continue;
            }
            let err = (self.p1.eval(y) / den - x).norm();
            if err > ROOT_TOL * (1.0 + x.norm()) {
                return Err(Error::RootSolver { iterations: ROOT_MAX_ITER, residual: err });
            }
            out.push(y);
        }
        Ok(out)
    }
}

fn polish(q: &Poly, mut y: Complex64) -> Complex64 {
    for _ in 0..3 {
        let (v, dv) = q.eval_with_derivative(y);
        if dv.norm() == 0.0 || v.norm() == 0.0 {
            break;
        }
        let step = v / dv;
        if !step.is_finite() {
            break;
        }
        let cand = y - step;
        if q.eval(cand).norm() < v.norm() {
            y = cand;
        } else {
            break;
        }
    }
    y
}

#[derive(Clone, Debug)]
enum Kind {
    Symbolic(Arc<SymbolSpace>),
    Rational(Arc<RationalMap>),
}

/// Runtime form of a [`SystemSpec`]. Cheap to clone.
#[derive(Clone, Debug)]
pub struct System {
    spec: SystemSpec,
    kind: Kind,
}

impl PartialEq for System {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl System {
    pub fn new(spec: SystemSpec) -> Result<Self> {
        let kind = match &spec {
            SystemSpec::Circle { n } => Kind::Symbolic(Arc::new(SymbolSpace::circle(*n)?)),
            SystemSpec::Cantor => Kind::Symbolic(Arc::new(SymbolSpace::cantor())),
            SystemSpec::Sft { matrix } => Kind::Symbolic(Arc::new(SymbolSpace::subshift(matrix)?)),
            SystemSpec::Rational { p1, p2 } => {
                let report = validate_system(&spec);
                if !report.valid {
                    return Err(Error::InvalidSystem(report.failures.join("; ")));
                }
                let p1 = Poly::new(p1.clone());
                let p2 = Poly::new(p2.clone());
                let degree = p1.degree().max(p2.degree());
                Kind::Rational(Arc::new(RationalMap { p1, p2, degree }))
            }
        };
        Ok(System { spec, kind })
    }

    pub fn circle(n: u32) -> Result<Self> {
        Self::new(SystemSpec::Circle { n })
    }

    pub fn cantor() -> Self {
        Self::new(SystemSpec::Cantor).expect("cantor system")
    }

    pub fn subshift(matrix: Vec<Vec<u8>>) -> Result<Self> {
        Self::new(SystemSpec::Sft { matrix })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn symbol_space(&self) -> Result<&Arc<SymbolSpace>> {
        match &self.kind {
            Kind::Symbolic(s) => Ok(s),
            Kind::Rational(_) => Err(Error::NotSymbolic("rational")),
        }
    }

    pub fn rational(&self) -> Result<&Arc<RationalMap>> {
        match &self.kind {
            Kind::Rational(r) => Ok(r),
            Kind::Symbolic(_) => Err(Error::NotRational),
        }
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.kind, Kind::Symbolic(_))
    }

    /// Symbolic point from a word of labels such as `"0110"`.
    pub fn word_point(&self, word: &str) -> Result<Point> {
        let s = self.symbol_space()?;
        let w = s.parse_word(word)?;
        Ok(Point::Symbolic(SymbolicPoint::from_word(s, &w)?))
    }

    pub fn real_point(&self, x: f64, depth: usize) -> Result<Point> {
        Ok(Point::Symbolic(SymbolicPoint::from_real(self.symbol_space()?, x, depth)?))
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        match (&self.kind, x) {
            (Kind::Symbolic(s), Point::Symbolic(p)) => {
                if p.is_valid(s) {
                    Ok(())
                } else {
                    Err(Error::InvalidPoint(format!("inadmissible sequence {}", p.format(s))))
                }
            }
            (Kind::Rational(_), Point::Complex(z)) if z.is_finite() => Ok(()),
            _ => Err(Error::InvalidPoint("point does not belong to this system".into())),
        }
    }

    /// `r(x)`.
    pub fn apply(&self, x: &Point) -> Result<Point> {
        self.check_point(x)?;
        match (&self.kind, x) {
            (Kind::Symbolic(_), Point::Symbolic(p)) => Ok(Point::Symbolic(p.shifted())),
            (Kind::Rational(r), Point::Complex(z)) => {
                if r.p2.eval(*z).norm() == 0.0 && r.p1.eval(*z).norm() == 0.0 {
                    return Err(Error::InvalidPoint("p1 and p2 both vanish".into()));
                }
                Ok(Point::Complex(r.eval(*z)?))
            }
            _ => unreachable!(),
        }
    }

    /// The complete finite list `r^{-1}(x)`.
    pub fn preimages(&self, x: &Point) -> Result<Vec<Point>> {
        self.check_point(x)?;
        match (&self.kind, x) {
            (Kind::Symbolic(s), Point::Symbolic(p)) => Ok(s
                .predecessors(p.symbol(0))
                .iter()
                .map(|&a| Point::Symbolic(p.prepended(a)))
                .collect()),
            (Kind::Rational(r), Point::Complex(z)) => Ok(r.preimages(*z)?.into_iter().map(Point::Complex).collect()),
            _ => unreachable!(),
        }
    }

    /// `#r^{-1}(x)`.
    pub fn branch_count(&self, x: &Point) -> Result<usize> {
        match (&self.kind, x) {
            (Kind::Symbolic(s), Point::Symbolic(p)) => {
                self.check_point(x)?;
                Ok(s.branch_count(p.symbol(0)))
            }
            _ => Ok(self.preimages(x)?.len()),
        }
    }
}

/// Structural checks on a system description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kind: String,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub onto: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coprime: Option<bool>,
    pub failures: Vec<String>,
}

pub fn validate_system(spec: &SystemSpec) -> ValidationReport {
    let mut report = ValidationReport {
        kind: spec.name().to_string(),
        valid: true,
        onto: None,
        degree: None,
        coprime: None,
        failures: Vec::new(),
    };
    match spec {
        SystemSpec::Circle { n } => {
            if *n < 2 {
                report.failures.push(format!("N = {n} < 2"));
            }
        }
        SystemSpec::Cantor => {}
        SystemSpec::Sft { matrix } => match SymbolSpace::subshift(matrix) {
            Ok(space) => {
                let onto = space.onto();
                report.onto = Some(onto);
                if !onto {
                    for b in 0..space.alphabet_size() as u8 {
                        if space.predecessors(b).is_empty() {
                            report.failures.push(format!("column {} has no entry 1", b + 1));
                        }
                    }
                }
            }
            Err(e) => report.failures.push(e.to_string()),
        },
        SystemSpec::Rational { p1, p2 } => {
            let p1 = Poly::new(p1.clone());
            let p2 = Poly::new(p2.clone());
            let degree = p1.degree().max(p2.degree());
            report.degree = Some(degree);
            if p2.is_zero() {
                report.failures.push("p2 is identically zero".into());
            }
            if degree < 2 {
                report.failures.push(format!("degree {degree} < 2"));
            }
            let coprime = coprime(&p1, &p2);
            report.coprime = Some(coprime);
            if !coprime {
                report.failures.push("p1 and p2 have a common root".into());
            }
        }
    }
    report.valid = report.failures.is_empty();
    report
}

fn coprime(p1: &Poly, p2: &Poly) -> bool {
    if p1.is_zero() || p2.is_zero() {
        return !p1.is_zero() || !p2.is_zero();
    }
    let (small, other) = if p1.degree() <= p2.degree() { (p1, p2) } else { (p2, p1) };
    if small.degree() == 0 {
        return true;
    }
    let scale: f64 = other.coeffs().iter().map(|c| c.norm()).sum();
    match small.roots(1e-13, 500) {
        Ok(roots) => roots.into_iter().all(|z| {
            let zn = z.norm().max(1.0).powi(other.degree() as i32);
            other.eval(z).norm() > 1e-8 * scale * zn
        }),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> System {
        System::subshift(vec![vec![1, 1], vec![1, 0]]).unwrap()
    }

    #[test]
    fn spec_json_forms() {
        let s = SystemSpec::from_json(r#"{"kind":"circle","N":2}"#).unwrap();
        assert_eq!(s, SystemSpec::Circle { n: 2 });
        let s = SystemSpec::from_json(r#"{"kind":"rational","p1":[[0,0],[0,0],[1,0]],"p2":[[1,0]]}"#).unwrap();
        assert_eq!(s, SystemSpec::quadratic(Complex64::new(0.0, 0.0)));
        let s = SystemSpec::from_json(r#"{"kind":"sft","matrix":[[1,1],[1,0]]}"#).unwrap();
        assert_eq!(System::new(s).unwrap(), golden());
        assert!(SystemSpec::from_json(r#"{"kind":"cantor"}"#).is_ok());
    }

    #[test]
    fn circle_apply_quarter() {
        let sys = System::circle(2).unwrap();
        let s = sys.symbol_space().unwrap();
        let x = sys.real_point(0.25, 8).unwrap();
        let y = sys.apply(&x).unwrap();
        assert_eq!(y.as_symbolic().unwrap().real_value(s), Some(0.5));
    }

    #[test]
    fn subshift_apply_shifts() {
        let sys = golden();
        let x = sys.word_point("121").unwrap();
        let y = sys.apply(&x).unwrap();
        let s = sys.symbol_space().unwrap();
        assert_eq!(y.as_symbolic().unwrap().prefix(2), s.parse_word("21").unwrap());
    }

    #[test]
    fn rational_apply_square() {
        let sys = System::new(SystemSpec::quadratic(Complex64::new(0.0, 0.0))).unwrap();
        let y = sys.apply(&Point::Complex(Complex64::new(0.0, 1.0))).unwrap();
        assert_eq!(y, Point::Complex(Complex64::new(-1.0, 0.0)));
    }

    #[test]
    fn circle_three_preimages_of_zero() {
        let sys = System::circle(3).unwrap();
        let s = sys.symbol_space().unwrap();
        let x = sys.real_point(0.0, 4).unwrap();
        let mut vals: Vec<f64> = sys
            .preimages(&x)
            .unwrap()
            .iter()
            .map(|p| p.as_symbolic().unwrap().real_value(s).unwrap())
            .collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(sys.branch_count(&x).unwrap(), 3);
    }

    #[test]
    fn subshift_preimages_follow_columns() {
        let sys = golden();
        let s = sys.symbol_space().unwrap();
        let x = sys.word_point("21").unwrap();
        let pre = sys.preimages(&x).unwrap();
        assert_eq!(pre.len(), 1);
        assert_eq!(pre[0].as_symbolic().unwrap().prefix(1), s.parse_word("1").unwrap());
        let x1 = sys.word_point("1").unwrap();
        assert_eq!(sys.branch_count(&x1).unwrap(), 2);
    }

    #[test]
    fn cantor_two_branches() {
        let sys = System::cantor();
        for w in ["", "0", "2", "0220", "2222"] {
            assert_eq!(sys.branch_count(&sys.word_point(w).unwrap()).unwrap(), 2);
        }
    }

    #[test]
    fn z_squared_preimages_of_one() {
        let sys = System::new(SystemSpec::quadratic(Complex64::new(0.0, 0.0))).unwrap();
        let pre = sys.preimages(&Point::Complex(Complex64::new(1.0, 0.0))).unwrap();
        let mut re: Vec<f64> = pre.iter().map(|p| p.as_complex().unwrap().re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.0).abs() < 1e-15 && (re[1] - 1.0).abs() < 1e-15);
        // critical value 0 has one preimage
        assert_eq!(sys.branch_count(&Point::Complex(Complex64::new(0.0, 0.0))).unwrap(), 1);
    }

    #[test]
    fn cubic_preimages_use_simultaneous_iteration() {
        let c = |re| Complex64::new(re, 0.0);
        let spec = SystemSpec::Rational { p1: vec![c(0.3), c(0.0), c(0.0), c(1.0)], p2: vec![c(1.0)] };
        let sys = System::new(spec).unwrap();
        let x = Point::Complex(Complex64::new(0.2, -0.7));
        let pre = sys.preimages(&x).unwrap();
        assert_eq!(pre.len(), 3);
        for y in pre {
            let back = sys.apply(&y).unwrap().as_complex().unwrap();
            assert!((back - x.as_complex().unwrap()).norm() <= ROOT_TOL);
        }
    }

    #[test]
    fn validation_reports() {
        let r = validate_system(&SystemSpec::Sft { matrix: vec![vec![1, 1], vec![1, 0]] });
        assert_eq!(r.onto, Some(true));
        assert!(r.valid);
        let r = validate_system(&SystemSpec::Sft { matrix: vec![vec![1, 0], vec![1, 0]] });
        assert_eq!(r.onto, Some(false));
        assert!(!r.valid);
        let r = validate_system(&SystemSpec::quadratic(Complex64::new(0.0, 0.0)));
        assert_eq!(r.degree, Some(2));
        assert!(r.valid);
        // z^2 / z shares the root 0
        let c = |re| Complex64::new(re, 0.0);
        let r = validate_system(&SystemSpec::Rational { p1: vec![c(0.0), c(0.0), c(1.0)], p2: vec![c(0.0), c(1.0)] });
        assert_eq!(r.coprime, Some(false));
        assert!(validate_system(&SystemSpec::Circle { n: 1 }).failures.len() == 1);
    }
}
