//! Measures on `X`: cylinder masses, Bernoulli products, and empirical point
//! clouds from backward iteration on Julia sets, together with residuals of
//! the invariance `mu o r^{-1} = mu` and of strong (balanced) invariance.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::{fmt_f64, parse_f64, CylinderFunction, SampledFunction};
use crate::systems::{Point, SymbolSpace, System};

/// Tolerance on `sum p_a = 1` and on total mass for the probability flag.
pub const MASS_TOL: f64 = 1e-12;
pub const DEFAULT_BURN_IN: usize = 50;
pub const DEFAULT_CHAINS: usize = 8;
/// Highest power in the smooth test library `Re z^k, Im z^k`.
pub const TEST_LIBRARY_DEGREE: u32 = 8;
const TARGET_BATCHES: usize = 64;

/// Nonnegative masses on the admissible words of one depth.
#[derive(Clone, Debug)]
pub struct CylinderMeasure {
    space: Arc<SymbolSpace>,
    depth: usize,
    masses: Vec<f64>,
}

impl CylinderMeasure {
    pub fn new(space: &Arc<SymbolSpace>, depth: usize, masses: Vec<f64>) -> Result<Self> {
        let n = space.word_count(depth);
        if masses.len() != n {
            return Err(Error::BadWeights(format!("expected {n} masses at depth {depth}, got {}", masses.len())));
        }
        if let Some(i) = masses.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::BadWeights(format!(
                "mass {} on word {} is not a finite nonnegative number",
                masses[i],
                space.format_word(&space.word(depth, i))
            )));
        }
        Ok(CylinderMeasure { space: Arc::clone(space), depth, masses })
    }

    /// Equal mass on every admissible word.
    pub fn uniform(space: &Arc<SymbolSpace>, depth: usize) -> Self {
        let n = space.word_count(depth);
        CylinderMeasure { space: Arc::clone(space), depth, masses: vec![1.0 / n as f64; n] }
    }

    pub fn space(&self) -> &Arc<SymbolSpace> {
        &self.space
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total() - 1.0).abs() <= MASS_TOL * self.masses.len().max(1) as f64
    }

    /// Masses of the depth-`depth` words, `depth <= self.depth()`.
    pub fn coarsen(&self, depth: usize) -> Result<Vec<f64>> {
        if depth > self.depth {
            return Err(Error::InsufficientDepth { needed: depth, available: self.depth });
        }
        let mut m = self.masses.clone();
        for d in (depth + 1..=self.depth).rev() {
            let g = self.space.grid(d);
            let mut up = vec![0.0; self.space.word_count(d - 1)];
            for (i, v) in m.iter().enumerate() {
                up[g.parent(i)] += v;
            }
            m = up;
        }
        Ok(m)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["word", "mass"])?;
        for (i, m) in self.masses.iter().enumerate() {
            out.write_record([self.space.format_word(&self.space.word(self.depth, i)), fmt_f64(*m)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `word,mass` rows; every admissible word of one depth must appear once.
    pub fn read_csv<R: Read>(space: &Arc<SymbolSpace>, r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(r).records() {
            let rec = rec?;
            let word = space.parse_word(rec.get(0).unwrap_or(""))?;
            let mass = parse_f64(rec.get(1).ok_or_else(|| Error::Parse("missing mass column".into()))?)?;
            rows.push((word, mass));
        }
        let depth = rows.first().map(|(w, _)| w.len()).ok_or_else(|| Error::Parse("empty measure file".into()))?;
        let n = space.word_count(depth);
        let mut masses = vec![f64::NAN; n];
        for (w, m) in rows {
            let i = space
                .index_of(&w)
                .filter(|_| w.len() == depth)
                .ok_or_else(|| Error::Parse(format!("word {} not admissible at depth {depth}", space.format_word(&w))))?;
            masses[i] = m;
        }
        if masses.iter().any(|m| m.is_nan()) {
            return Err(Error::Parse(format!("measure file does not cover all {n} words of depth {depth}")));
        }
        Self::new(space, depth, masses)
    }
}

/// Product measure with digit weights `p_a`.
#[derive(Clone, Debug)]
pub struct BernoulliSpec {
    space: Arc<SymbolSpace>,
    weights: Vec<f64>,
}

impl BernoulliSpec {
    pub fn new(space: &Arc<SymbolSpace>, weights: Vec<f64>) -> Result<Self> {
        if !space.is_full() {
            return Err(Error::BadWeights("product measures need a full shift".into()));
        }
        if weights.len() != space.alphabet_size() {
            return Err(Error::BadWeights(format!(
                "expected {} weights, got {}",
                space.alphabet_size(),
                weights.len()
            )));
        }
        if weights.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::BadWeights("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::BadWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(BernoulliSpec { space: Arc::clone(space), weights })
    }

    pub fn space(&self) -> &Arc<SymbolSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `mass(w) = prod p_{w_i}`, accumulated from the last digit so that
    /// `mass(a w) = p_a mass(w)` holds exactly in floating point.
    pub fn materialize(&self, depth: usize) -> CylinderMeasure {
        let mut m = vec![1.0];
        for d in 1..=depth {
            let g = self.space.grid(d);
            m = (0..g.len()).map(|i| self.weights[g.first(i) as usize] * m[g.shift(i)]).collect();
        }
        CylinderMeasure { space: Arc::clone(&self.space), depth, masses: m }
    }
}

/// Weighted point cloud. `chains` lists the lengths of consecutive runs that
/// come from one Markov chain; it drives the batch-means error estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCloud {
    points: Vec<Complex64>,
    weights: Vec<f64>,
    chains: Vec<usize>,
}

impl EmpiricalCloud {
    /// Equal weights, no chain structure.
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        let n = points.len();
        Self::with_weights(points, vec![1.0 / n as f64; n])
    }

    pub fn with_weights(points: Vec<Complex64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.len() != weights.len() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::BadWeights("one finite nonnegative weight per point".into()));
        }
        Ok(EmpiricalCloud { points, weights, chains: Vec::new() })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn chains(&self) -> &[usize] {
        &self.chains
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: &SampledFunction) -> Result<Complex64> {
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyCloud);
        }
        let s: Complex64 = self.points.iter().zip(&self.weights).map(|(&z, &w)| f.eval(&Point::Complex(z)) * w).sum();
        Ok(s / total)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["re", "im", "weight"])?;
        for (z, wt) in self.points.iter().zip(&self.weights) {
            out.write_record([fmt_f64(z.re), fmt_f64(z.im), fmt_f64(*wt)])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for rec in csv::Reader::from_reader(r).records() {
            let rec = rec?;
            let field = |k: usize| parse_f64(rec.get(k).ok_or_else(|| Error::Parse("cloud rows are re,im,weight".into()))?);
            points.push(Complex64::new(field(0)?, field(1)?));
            weights.push(field(2)?);
        }
        Self::with_weights(points, weights)
    }
}

#[derive(Clone, Debug)]
pub enum MeasureRep {
    Cylinder(CylinderMeasure),
    Bernoulli(BernoulliSpec),
    Empirical(EmpiricalCloud),
}

impl MeasureRep {
    /// Masses of all depth-`depth` words.
    pub fn masses_at(&self, space: &Arc<SymbolSpace>, depth: usize) -> Result<Vec<f64>> {
        let own = match self {
            MeasureRep::Cylinder(m) => m.space(),
            MeasureRep::Bernoulli(b) => b.space(),
            MeasureRep::Empirical(_) => {
                return Err(Error::Incompatible("point cloud has no cylinder masses".into()));
            }
        };
        if !own.same_as(space) {
            return Err(Error::MismatchedSystems);
        }
        match self {
            MeasureRep::Cylinder(m) => m.coarsen(depth),
            MeasureRep::Bernoulli(b) => Ok(b.materialize(depth).masses),
            MeasureRep::Empirical(_) => unreachable!(),
        }
    }

    /// Deepest depth with known masses (`None` = any depth).
    pub fn max_depth(&self) -> Option<usize> {
        match self {
            MeasureRep::Cylinder(m) => Some(m.depth()),
            _ => None,
        }
    }

    pub fn integrate_cylinder(&self, f: &CylinderFunction) -> Result<Complex64> {
        let m = self.masses_at(f.space(), f.depth())?;
        Ok(f.values().iter().zip(&m).map(|(v, &w)| v * w).sum())
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            MeasureRep::Cylinder(m) => m.total(),
            MeasureRep::Bernoulli(_) => 1.0,
            MeasureRep::Empirical(c) => c.weights.iter().sum(),
        }
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= 1e-9
    }

    /// Cylinder masses at a fixed depth.
    pub fn to_cylinder(&self, space: &Arc<SymbolSpace>, depth: usize) -> Result<CylinderMeasure> {
        CylinderMeasure::new(space, depth, self.masses_at(space, depth)?)
    }
}

pub fn make_bernoulli(sys: &System, weights: &[f64]) -> Result<MeasureRep> {
    Ok(MeasureRep::Bernoulli(BernoulliSpec::new(sys.symbol_space()?, weights.to_vec())?))
}

/// A strongly invariant probability measure: `mu(a w) = mu(w) / #r^{-1}`.
///
/// Uniform Bernoulli on full shifts; on a subshift the depth-1 masses come
/// from the eigenmeasure of the balanced weight and deeper masses from the
/// recursion itself, up to `depth`.
pub fn strongly_invariant_measure(space: &Arc<SymbolSpace>, depth: usize) -> Result<MeasureRep> {
    if space.is_full() {
        let k = space.alphabet_size();
        return Ok(MeasureRep::Bernoulli(BernoulliSpec::new(space, vec![1.0 / k as f64; k])?));
    }
    let nu = crate::transfer::solve_eigenmeasure(&crate::transfer::Weight::balanced(space))?;
    let mut m = nu.masses_at(space, 1)?;
    for d in 2..=depth {
        let g = space.grid(d);
        let below = space.grid(d - 1);
        m = (0..g.len()).map(|i| m[g.shift(i)] / space.branch_count(below.first(g.shift(i))) as f64).collect();
    }
    Ok(MeasureRep::Cylinder(CylinderMeasure::new(space, depth.max(1), m)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvarianceKind {
    Invariance,
    StrongInvariance,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub kind: InvarianceKind,
    /// Largest absolute defect over the test functions.
    pub residual: f64,
    /// Cylinder depth of the test indicators (symbolic), or the top power of
    /// the test library (clouds).
    pub test_depth: usize,
    pub tests: usize,
    /// Test function attaining the reported maximum.
    pub worst_test: String,
    /// Monte Carlo standard error of the worst test (clouds only).
    pub standard_error: Option<f64>,
    /// `max |defect| / standard error` over the library (clouds only).
    pub max_z: Option<f64>,
    /// Points skipped because their preimages could not be computed.
    pub skipped: usize,
}

impl InvarianceReport {
    /// Exact test for cylinder measures; `|defect| < k` standard errors for clouds.
    pub fn passes(&self, tol: f64, k: f64) -> bool {
        match self.max_z {
            Some(z) => z < k,
            None => self.residual <= tol,
        }
    }
}

/// Residual of `mu o r^{-1} = mu` or of strong invariance.
///
/// Symbolic measures are tested against every cylinder indicator of depth
/// `0..=test_depth`; point clouds against `Re z^k, Im z^k` (`k <= 8`), with
/// `test_depth` ignored.
pub fn invariance_residual(sys: &System, m: &MeasureRep, mode: InvarianceKind, test_depth: usize) -> Result<InvarianceReport> {
    match m {
        MeasureRep::Empirical(cloud) => {
            sys.rational()?;
            cloud_residual(sys, cloud, mode)
        }
        _ => {
            let space = sys.symbol_space()?;
            let needed = match mode {
                InvarianceKind::Invariance => test_depth + 1,
                InvarianceKind::StrongInvariance => test_depth.max(space.min_transfer_depth() - 1),
            };
            if let Some(d) = m.max_depth() {
                if d < needed {
                    return Err(Error::InsufficientDepth { needed, available: d });
                }
            }
            symbolic_residual(space, m, mode, test_depth)
        }
    }
}

fn symbolic_residual(space: &Arc<SymbolSpace>, m: &MeasureRep, mode: InvarianceKind, test_depth: usize) -> Result<InvarianceReport> {
    let mut worst = (0.0f64, String::from("-"));
    let mut tests = 0;
    let mut record = |defect: f64, t: usize, j: usize, tests: &mut usize| {
        *tests += 1;
        if defect > worst.0 || (*tests == 1) {
            worst = (defect, space.format_word(&space.word(t, j)));
        }
    };
    match mode {
        InvarianceKind::Invariance => {
            let mut mu_next = m.masses_at(space, 0)?;
            for t in 0..=test_depth {
                let mu_t = mu_next;
                mu_next = m.masses_at(space, t + 1)?;
                let g = space.grid(t + 1);
                for (j, &mt) in mu_t.iter().enumerate() {
                    let pulled: f64 = g.preimages(j).map(|i| mu_next[i]).sum();
                    record((pulled - mt).abs(), t, j, &mut tests);
                }
            }
        }
        InvarianceKind::StrongInvariance => {
            let balanced = crate::transfer::Weight::balanced(space);
            let w = balanced.as_cylinder()?;
            for t in 0..=test_depth {
                // int chi_E dmu vs int (1/#) sum chi_E(y) dmu(x): the second is
                // sum over cells i of E at the working depth of W_i mu(shift i)
                let d = t.max(w.depth()).max(space.min_transfer_depth());
                let wv = w.refine(d)?;
                let below = m.masses_at(space, d - 1)?;
                let g = space.grid(d);
                let mut pulled: Vec<f64> = (0..g.len()).map(|i| wv.values()[i].re * below[g.shift(i)]).collect();
                for dd in (t + 1..=d).rev() {
                    let gg = space.grid(dd);
                    let mut up = vec![0.0; space.word_count(dd - 1)];
                    for (i, v) in pulled.iter().enumerate() {
                        up[gg.parent(i)] += v;
                    }
                    pulled = up;
                }
                let mu_t = m.masses_at(space, t)?;
                for (j, (&p, &mt)) in pulled.iter().zip(&mu_t).enumerate() {
                    record((p - mt).abs(), t, j, &mut tests);
                }
            }
        }
    }
    Ok(InvarianceReport {
        kind: mode,
        residual: worst.0,
        test_depth,
        tests,
        worst_test: worst.1,
        standard_error: None,
        max_z: None,
        skipped: 0,
    })
}

fn library_names() -> Vec<String> {
    (1..=TEST_LIBRARY_DEGREE).flat_map(|k| [format!("Re z^{k}"), format!("Im z^{k}")]).collect()
}

fn library(z: Complex64, out: &mut [f64]) {
    let mut p = Complex64::new(1.0, 0.0);
    for k in 0..TEST_LIBRARY_DEGREE as usize {
        p *= z;
        out[2 * k] = p.re;
        out[2 * k + 1] = p.im;
    }
}

fn cloud_residual(sys: &System, cloud: &EmpiricalCloud, mode: InvarianceKind) -> Result<InvarianceReport> {
    let nf = 2 * TEST_LIBRARY_DEGREE as usize;
    let map = sys.rational()?;
    // per-point defect samples, None where the map or its inverse fails
    let defects: Vec<Option<Vec<f64>>> = cloud
        .points
        .par_iter()
        .map(|&z| {
            let mut fz = vec![0.0; nf];
            library(z, &mut fz);
            let mut other = vec![0.0; nf];
            match mode {
                InvarianceKind::Invariance => library(map.eval(z).ok()?, &mut other),
                InvarianceKind::StrongInvariance => {
                    let pre = map.preimages(z).ok()?;
                    let mut buf = vec![0.0; nf];
                    for y in &pre {
                        library(*y, &mut buf);
                        for (o, b) in other.iter_mut().zip(&buf) {
                            *o += b / pre.len() as f64;
                        }
                    }
                }
            }
            Some(other.iter().zip(&fz).map(|(a, b)| a - b).collect())
        })
        .collect();
    let skipped = defects.iter().filter(|d| d.is_none()).count();

    // batches: consecutive slices within each chain
    let chains = if cloud.chains.is_empty() { vec![cloud.len()] } else { cloud.chains.clone() };
    let n = cloud.len();
    let iid = cloud.chains.is_empty();
    let mut batches: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    for &len in &chains {
        let b = if iid { len } else { ((TARGET_BATCHES * len) as f64 / n as f64).round().max(1.0) as usize };
        for k in 0..b {
            batches.push(start + k * len / b..start + (k + 1) * len / b);
        }
        start += len;
    }

    let mut worst = (0usize, 0.0f64, 0.0f64, 0.0f64); // (test, |mean|, se, z)
    for t in 0..nf {
        // weighted mean and its standard error
        let mut sw = 0.0;
        let mut swd = 0.0;
        for (d, &w) in defects.iter().zip(&cloud.weights) {
            if let Some(d) = d {
                sw += w;
                swd += w * d[t];
            }
        }
        if sw <= 0.0 {
            return Err(Error::EmptyCloud);
        }
        let mean = swd / sw;
        let se = if batches.len() >= 2 && !iid {
            let mut acc = 0.0;
            for r in &batches {
                let (mut bw, mut bwd) = (0.0, 0.0);
                for i in r.clone() {
                    if let Some(d) = &defects[i] {
                        bw += cloud.weights[i];
                        bwd += cloud.weights[i] * d[t];
                    }
                }
                if bw > 0.0 {
                    acc += bw * bw * (bwd / bw - mean).powi(2);
                }
            }
            let b = batches.len() as f64;
            (acc / (sw * sw) * b / (b - 1.0)).sqrt()
        } else {
            let mut acc = 0.0;
            let mut k = 0.0;
            for (d, &w) in defects.iter().zip(&cloud.weights) {
                if let Some(d) = d {
                    acc += w * w * (d[t] - mean).powi(2);
                    k += 1.0;
                }
            }
            if k < 2.0 {
                0.0
            } else {
                (acc / (sw * sw) * k / (k - 1.0)).sqrt()
            }
        };
        let z = if se > 0.0 {
            mean.abs() / se
        } else if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if t == 0 || z > worst.3 {
            worst = (t, mean.abs(), se, z);
        }
    }
    let residual = {
        // largest |defect| over the library, independent of the z ranking
        let mut r: f64 = 0.0;
        for t in 0..nf {
            let (mut sw, mut swd) = (0.0, 0.0);
            for (d, &w) in defects.iter().zip(&cloud.weights) {
                if let Some(d) = d {
                    sw += w;
                    swd += w * d[t];
                }
            }
            r = r.max((swd / sw).abs());
        }
        r
    };
    Ok(InvarianceReport {
        kind: mode,
        residual,
        test_depth: TEST_LIBRARY_DEGREE as usize,
        tests: nf,
        worst_test: library_names()[worst.0].clone(),
        standard_error: Some(worst.2),
        max_z: Some(worst.3),
        skipped,
    })
}

#[derive(Clone, Debug)]
pub struct BrolinConfig {
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Independent chains; fixed so results do not depend on the thread count.
    pub chains: usize,
    pub start: Complex64,
}

impl BrolinConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        BrolinConfig { n, burn_in: DEFAULT_BURN_IN, seed, chains: DEFAULT_CHAINS, start: Complex64::new(2.0, 0.0) }
    }
}

#[derive(Clone, Debug)]
pub struct BrolinSample {
    pub cloud: EmpiricalCloud,
    /// Root-solver failures along the orbits (each retried).
    pub failures: usize,
}

const MAX_REDRAWS: usize = 100;

/// Random backward orbits `z_{k+1}` uniform among the distinct preimages of
/// `z_k`, after `burn_in` discarded steps per chain. Each chain has its own
/// ChaCha stream, so the merged cloud depends only on the seed.
pub fn brolin_sample(sys: &System, cfg: &BrolinConfig) -> Result<BrolinSample> {
    let map = sys.rational()?;
    if map.degree() < 2 {
        return Err(Error::InvalidSystem("backward sampling needs degree >= 2".into()));
    }
    if cfg.n == 0 || cfg.burn_in == 0 || cfg.chains == 0 {
        return Err(Error::InvalidSystem("n, burn_in and chains must be positive".into()));
    }
    let chains = cfg.chains.min(cfg.n);
    let sizes: Vec<usize> = (0..chains).map(|c| cfg.n / chains + usize::from(c < cfg.n % chains)).collect();
    let runs: Vec<Result<(Vec<Complex64>, usize)>> = sizes
        .par_iter()
        .enumerate()
        .map(|(c, &len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c as u64);
            let mut z = cfg.start;
            let mut failures = 0;
            let mut out = Vec::with_capacity(len);
            for step in 0..cfg.burn_in + len {
                z = backward_step(map, z, &mut rng, &mut failures)?;
                if step >= cfg.burn_in {
                    out.push(z);
                }
            }
            Ok((out, failures))
        })
        .collect();
    let mut points = Vec::with_capacity(cfg.n);
    let mut failures = 0;
    for r in runs {
        let (p, f) = r?;
        points.extend(p);
        failures += f;
    }
    let n = points.len();
    let mut cloud = EmpiricalCloud::new(points)?;
    cloud.chains = sizes;
    debug_assert_eq!(cloud.chains.iter().sum::<usize>(), n);
    Ok(BrolinSample { cloud, failures })
}

/// One uniform backward step. A failed root solve is counted and retried
/// from a copy of `z` moved by about 1e-9.
fn backward_step(map: &crate::systems::RationalMap, z: Complex64, rng: &mut ChaCha8Rng, failures: &mut usize) -> Result<Complex64> {
    let mut x = z;
    for attempt in 0..=MAX_REDRAWS {
        match map.preimages(x) {
            Ok(pre) if !pre.is_empty() => return Ok(pre[rng.random_range(0..pre.len())]),
            _ => {
                *failures += 1;
                let eps = 1e-9 * (1.0 + z.norm()) * (attempt + 1) as f64;
                x = z + Complex64::from_polar(eps, rng.random::<f64>() * std::f64::consts::TAU);
            }
        }
    }
    Err(Error::RootSolver { iterations: MAX_REDRAWS, residual: f64::NAN })
}

/// Kolmogorov–Smirnov distance between the sample and the uniform law on [0,1).
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i + 1) as f64 / n - x)
        })
        .fold(0.0, f64::max)
}

/// `arg z / 2 pi` in [0,1).
pub fn angle_fraction(z: Complex64) -> f64 {
    let t = z.arg() / std::f64::consts::TAU;
    if t < 0.0 {
        t + 1.0
    } else {
        t
    }
}
