//! Function representations on `X`.
//!
//! Symbolic systems use [`CylinderFunction`]: complex values on the
//! admissible words of one depth, i.e. functions constant on cylinders.
//! Refinement to a deeper grid is exact, and the transfer operator maps a
//! depth-`d` function with a depth-`d` weight to a depth-`d - 1` function, so
//! every fixed-point computation on symbolic systems is finite linear algebra.
//!
//! Rational maps use [`SampledFunction`], a deterministic evaluator that is
//! integrated against empirical point clouds.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measures::MeasureRep;
use crate::systems::{Grid, Point, SymbolSpace, SymbolicPoint};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone)]
pub struct CylinderFunction {
    space: Arc<SymbolSpace>,
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl fmt::Debug for CylinderFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFunction")
            .field("depth", &self.depth())
            .field("cells", &self.values.len())
            .finish()
    }
}

impl PartialEq for CylinderFunction {
    fn eq(&self, other: &Self) -> bool {
        self.space.same_as(&other.space) && self.depth() == other.depth() && self.values == other.values
    }
}

impl CylinderFunction {
    pub fn constant(space: &Arc<SymbolSpace>, c: impl Into<Complex64>) -> Self {
        Self { space: Arc::clone(space), grid: space.grid(0), values: vec![c.into()] }
    }

    pub fn from_values(space: &Arc<SymbolSpace>, depth: usize, values: Vec<Complex64>) -> Result<Self> {
        let grid = space.grid(depth);
        if values.len() != grid.len() {
            return Err(Error::Incompatible(format!(
                "{} values for {} admissible words of depth {depth}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { space: Arc::clone(space), grid, values })
    }

    pub fn from_real_values(space: &Arc<SymbolSpace>, depth: usize, values: &[f64]) -> Result<Self> {
        Self::from_values(space, depth, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Values from a function of the (alphabet-index) word.
    pub fn from_word_fn(space: &Arc<SymbolSpace>, depth: usize, f: impl Fn(&[u8]) -> Complex64) -> Self {
        let grid = space.grid(depth);
        let values = (0..grid.len()).map(|i| f(&space.word(depth, i))).collect();
        Self { space: Arc::clone(space), grid, values }
    }

    /// Midpoint sampling of a function of the real coordinate (circle and
    /// Cantor systems).
    pub fn from_real_fn(space: &Arc<SymbolSpace>, depth: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let mids = space.midpoints(depth).ok_or(Error::NotSymbolic("subshift has no real coordinate"))?;
        let values = mids.into_iter().map(f).collect();
        Self::from_values(space, depth, values)
    }

    /// `1` on the cylinder `[word]`, `0` elsewhere; depth `word.len()`.
    pub fn indicator(space: &Arc<SymbolSpace>, word: &[u8]) -> Result<Self> {
        let idx = space
            .index_of(word)
            .ok_or_else(|| Error::InvalidPoint(format!("inadmissible word {}", space.format_word(word))))?;
        let grid = space.grid(word.len());
        let mut values = vec![ZERO; grid.len()];
        values[idx] = Complex64::new(1.0, 0.0);
        Ok(Self { space: Arc::clone(space), grid, values })
    }

    pub fn space(&self) -> &Arc<SymbolSpace> {
        &self.space
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn depth(&self) -> usize {
        self.grid.depth()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn value_at_word(&self, word: &[u8]) -> Option<Complex64> {
        if word.len() < self.depth() {
            return None;
        }
        self.space.index_of(&word[..self.depth()]).map(|i| self.values[i])
    }

    /// Value at a point (the cell containing its first `depth` symbols).
    pub fn eval(&self, x: &SymbolicPoint) -> Result<Complex64> {
        let w = x.prefix(self.depth());
        self.space
            .index_of(&w)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::InvalidPoint(format!("inadmissible prefix {}", self.space.format_word(&w))))
    }

    pub fn eval_point(&self, x: &Point) -> Result<Complex64> {
        match x {
            Point::Symbolic(p) => self.eval(p),
            Point::Complex(_) => Err(Error::Incompatible("cylinder function at a complex point".into())),
        }
    }

    /// Exact inclusion into depth `depth`: each word takes the value of its
    /// length-`self.depth()` prefix.
    pub fn refine(&self, depth: usize) -> Result<Self> {
        if depth < self.depth() {
            return Err(Error::RefineDepth { requested: depth, current: self.depth() });
        }
        let mut values = self.values.clone();
        for d in self.depth() + 1..=depth {
            let g = self.space.grid(d);
            values = (0..g.len()).map(|i| values[g.parent(i)]).collect();
        }
        Ok(Self { space: Arc::clone(&self.space), grid: self.space.grid(depth), values })
    }

    /// Conditional expectation onto depth `depth` cylinders: each coarse value
    /// is the `m`-weighted average of its refinements.
    pub fn project(&self, depth: usize, m: &MeasureRep) -> Result<Self> {
        if depth > self.depth() {
            return Err(Error::ProjectDepth { requested: depth, current: self.depth() });
        }
        let masses = m.masses_at(&self.space, self.depth())?;
        let mut sums: Vec<Complex64> = self.values.iter().zip(&masses).map(|(v, &w)| v * w).collect();
        let mut weights = masses;
        for d in (depth + 1..=self.depth()).rev() {
            let g = self.space.grid(d);
            let n = self.space.grid(d - 1).len();
            let mut s = vec![ZERO; n];
            let mut w = vec![0.0; n];
            for i in 0..g.len() {
                s[g.parent(i)] += sums[i];
                w[g.parent(i)] += weights[i];
            }
            sums = s;
            weights = w;
        }
        let mut values = Vec::with_capacity(sums.len());
        for (j, (s, w)) in sums.into_iter().zip(weights).enumerate() {
            if w <= 0.0 {
                return Err(Error::ZeroMass { word: self.space.format_word(&self.space.word(depth, j)) });
            }
            values.push(s / w);
        }
        Ok(Self { space: Arc::clone(&self.space), grid: self.space.grid(depth), values })
    }

    /// `f o r`, one level deeper.
    pub fn compose_r(&self) -> Self {
        let g = self.space.grid(self.depth() + 1);
        let values = (0..g.len()).map(|i| self.values[g.shift(i)]).collect();
        Self { space: Arc::clone(&self.space), grid: g, values }
    }

    /// `f o r^n`.
    pub fn compose_r_n(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |f, _| f.compose_r())
    }

    fn check_space(&self, other: &Self) {
        assert!(self.space.same_as(&other.space), "cylinder functions on different systems");
    }

    /// Both operands refined to their common depth.
    pub fn align(&self, other: &Self) -> (Self, Self) {
        self.check_space(other);
        let d = self.depth().max(other.depth());
        (self.refine(d).unwrap(), other.refine(d).unwrap())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let (a, b) = self.align(other);
        let values = a.values.iter().zip(&b.values).map(|(&x, &y)| f(x, y)).collect();
        Self { values, ..a }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// `|f|^2` as a (real) cylinder function.
    pub fn abs_sq(&self) -> Self {
        self.map(|v| Complex64::new(v.norm_sqr(), 0.0))
    }

    /// Sup-norm of the difference after aligning depths.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let (a, b) = self.align(other);
        a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Plain average over cells, i.e. the integral against the uniform
    /// cylinder measure of this depth.
    pub fn cell_mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    /// Same system, same depth, bitwise-equal values.
    pub fn identical(&self, other: &Self) -> bool {
        self == other
    }

    /// Rows `word,re,im` with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["word", "re", "im"])?;
        for (i, v) in self.values.iter().enumerate() {
            let word = self.space.format_word(&self.space.word(self.depth(), i));
            out.write_record([word, fmt_f64(v.re), fmt_f64(v.im)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv); every admissible word of one
    /// depth must appear exactly once.
    pub fn read_csv<R: Read>(space: &Arc<SymbolSpace>, r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            // word,re,im or, for real functions, word,value
            if rec.len() != 3 && rec.len() != 2 {
                return Err(Error::Parse(format!("expected word,re,im or word,value, got {} fields", rec.len())));
            }
            let word = space.parse_word(&rec[0])?;
            let re: f64 = parse_f64(&rec[1])?;
            let im: f64 = if rec.len() == 3 { parse_f64(&rec[2])? } else { 0.0 };
            rows.push((word, Complex64::new(re, im)));
        }
        let depth = rows.first().map(|(w, _)| w.len()).ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let n = space.word_count(depth);
        let mut values = vec![None; n];
        for (word, v) in rows {
            if word.len() != depth {
                return Err(Error::Parse("words of different lengths".into()));
            }
            let i = space
                .index_of(&word)
                .ok_or_else(|| Error::Parse(format!("inadmissible word {}", space.format_word(&word))))?;
            if values[i].replace(v).is_some() {
                return Err(Error::Parse(format!("duplicate word {}", space.format_word(&word))));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("missing word {}", space.format_word(&space.word(depth, i))))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(space, depth, values)
    }
}

/// Shortest representation that round-trips.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

/// A function given by a deterministic evaluator, used on rational maps.
#[derive(Clone)]
pub struct SampledFunction {
    eval: Arc<dyn Fn(&Point) -> Complex64 + Send + Sync>,
}

impl fmt::Debug for SampledFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SampledFunction")
    }
}

impl SampledFunction {
    pub fn new(f: impl Fn(&Point) -> Complex64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(f) }
    }

    /// Function of the complex coordinate; zero at symbolic points.
    pub fn of_complex(f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::new(move |p| p.as_complex().map(&f).unwrap_or(ZERO))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(move |_| c)
    }

    pub fn eval(&self, x: &Point) -> Complex64 {
        (self.eval)(x)
    }
}

/// Either representation, for [`integrate`].
#[derive(Clone, Debug)]
pub enum FunctionRep {
    Cylinder(CylinderFunction),
    Sampled(SampledFunction),
}

impl From<CylinderFunction> for FunctionRep {
    fn from(f: CylinderFunction) -> Self {
        FunctionRep::Cylinder(f)
    }
}

impl From<SampledFunction> for FunctionRep {
    fn from(f: SampledFunction) -> Self {
        FunctionRep::Sampled(f)
    }
}

/// `int_X f dm`: exact cell sum for cylinder pairs, weighted sample mean for
/// sampled functions against point clouds.
pub fn integrate(f: &FunctionRep, m: &MeasureRep) -> Result<Complex64> {
    match (f, m) {
        (FunctionRep::Cylinder(f), MeasureRep::Cylinder(_) | MeasureRep::Bernoulli(_)) => m.integrate_cylinder(f),
        (FunctionRep::Sampled(f), MeasureRep::Empirical(cloud)) => cloud.integrate(f),
        (FunctionRep::Cylinder(_), MeasureRep::Empirical(_)) => {
            Err(Error::Incompatible("cylinder function against a point cloud".into()))
        }
        (FunctionRep::Sampled(_), _) => Err(Error::Incompatible("sampled function against a cylinder measure".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_bernoulli, BernoulliSpec, CylinderMeasure};
    use crate::systems::System;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn circle2() -> Arc<SymbolSpace> {
        Arc::clone(System::circle(2).unwrap().symbol_space().unwrap())
    }

    fn golden() -> Arc<SymbolSpace> {
        Arc::clone(System::subshift(vec![vec![1, 1], vec![1, 0]]).unwrap().symbol_space().unwrap())
    }

    fn uniform(space: &Arc<SymbolSpace>) -> MeasureRep {
        let k = space.alphabet_size();
        MeasureRep::Bernoulli(BernoulliSpec::new(space, vec![1.0 / k as f64; k]).unwrap())
    }

    #[test]
    fn refine_constant() {
        let s = circle2();
        let f = CylinderFunction::constant(&s, 1.0).refine(3).unwrap();
        assert_eq!(f.values().len(), 8);
        assert!(f.values().iter().all(|&v| v == c(1.0)));
    }

    #[test]
    fn refine_half_indicator() {
        let s = circle2();
        let chi = CylinderFunction::indicator(&s, &[0]).unwrap();
        let r = chi.refine(2).unwrap();
        assert_eq!(r.values(), &[c(1.0), c(1.0), c(0.0), c(0.0)]);
        assert!(chi.refine(0).is_err());
    }

    #[test]
    fn refine_golden_mean() {
        let s = golden();
        let f = CylinderFunction::from_values(&s, 1, vec![c(2.0), c(5.0)]).unwrap();
        let r = f.refine(2).unwrap();
        let words: Vec<String> = (0..3).map(|i| s.format_word(&s.word(2, i))).collect();
        assert_eq!(words, ["11", "12", "21"]);
        assert_eq!(r.values(), &[c(2.0), c(2.0), c(5.0)]);
    }

    #[test]
    fn project_examples() {
        let s = circle2();
        let m = uniform(&s);
        let f = CylinderFunction::from_real_values(&s, 2, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.project(1, &m).unwrap().values(), &[c(1.0), c(0.0)]);
        let g = CylinderFunction::from_real_values(&s, 1, &[2.0, 4.0]).unwrap();
        assert_eq!(g.project(0, &m).unwrap().values(), &[c(3.0)]);
        assert!(g.project(2, &m).is_err());
    }

    #[test]
    fn project_reports_zero_mass() {
        let s = circle2();
        let delta = make_bernoulli(&System::circle(2).unwrap(), &[1.0, 0.0]).unwrap();
        let f = CylinderFunction::constant(&s, 1.0).refine(2).unwrap();
        assert!(matches!(f.project(1, &delta), Err(Error::ZeroMass { .. })));
    }

    #[test]
    fn integrate_examples() {
        let s = circle2();
        let leb = uniform(&s);
        let one = FunctionRep::from(CylinderFunction::constant(&s, 1.0));
        assert_eq!(integrate(&one, &leb).unwrap(), c(1.0));
        let chi = FunctionRep::from(CylinderFunction::indicator(&s, &[0]).unwrap());
        assert_eq!(integrate(&chi, &leb).unwrap(), c(0.5));

        let cantor = System::cantor();
        let cs = cantor.symbol_space().unwrap();
        let mu_c = make_bernoulli(&cantor, &[0.5, 0.5]).unwrap();
        let x = CylinderFunction::from_real_fn(cs, 12, c).unwrap();
        let v = integrate(&x.into(), &mu_c).unwrap();
        assert!((v - c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn integrate_rejects_mixed_pairs() {
        let s = circle2();
        let f = FunctionRep::Sampled(SampledFunction::constant(c(1.0)));
        assert!(matches!(integrate(&f, &uniform(&s)), Err(Error::Incompatible(_))));
    }

    #[test]
    fn csv_round_trip() {
        let s = golden();
        let f = CylinderFunction::from_word_fn(&s, 4, |w| Complex64::new(w.len() as f64 / 3.0, w[0] as f64 - 0.1));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = CylinderFunction::read_csv(&s, buf.as_slice()).unwrap();
        assert!(f.identical(&g));
    }

    #[test]
    fn compose_r_is_pullback() {
        let s = golden();
        let f = CylinderFunction::from_word_fn(&s, 2, |w| c((w[0] * 2 + w[1]) as f64));
        let g = f.compose_r();
        for i in 0..g.values().len() {
            let w = s.word(3, i);
            assert_eq!(g.values()[i], f.value_at_word(&w[1..]).unwrap());
        }
    }

    proptest! {
        #[test]
        fn project_after_refine_is_identity(vals in proptest::collection::vec(-5.0f64..5.0, 8), extra in 0usize..4,
                                           p in 0.05f64..0.95) {
            let s = circle2();
            let f = CylinderFunction::from_real_values(&s, 3, &vals).unwrap();
            let m = MeasureRep::Bernoulli(BernoulliSpec::new(&s, vec![p, 1.0 - p]).unwrap());
            let back = f.refine(3 + extra).unwrap().project(3, &m).unwrap();
            prop_assert!(back.sup_distance(&f) < 1e-12);
        }

        #[test]
        fn refine_preserves_integral(vals in proptest::collection::vec(0.0f64..1.0, 5), extra in 0usize..5) {
            let s = golden();
            let f = CylinderFunction::from_real_values(&s, 3, &vals).unwrap();
            let masses: Vec<f64> = (0..s.word_count(3 + extra)).map(|i| 1.0 + (i % 3) as f64).collect();
            let m = MeasureRep::Cylinder(CylinderMeasure::new(&s, 3 + extra, masses).unwrap());
            let a = m.integrate_cylinder(&f).unwrap();
            let b = m.integrate_cylinder(&f.refine(3 + extra).unwrap()).unwrap();
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
