//! Loading specs from disk and writing reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use dilation_core::measures::{brolin_sample, strongly_invariant_measure, BrolinConfig};
use dilation_core::systems::validate_system;
use dilation_core::transfer::weight_from_filter;
use dilation_core::{
    Complex64, CylinderFunction, CylinderMeasure, EmpiricalCloud, Filter, MeasureRep, SymbolSpace, System, SystemSpec, Weight,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Cli, WeightSource};

pub fn load_system(cli: &Cli) -> Result<System> {
    let path = cli.common.system.as_ref().context("--system is required")?;
    let spec = SystemSpec::from_file(path).with_context(|| format!("reading system {}", path.display()))?;
    let report = validate_system(&spec);
    if !report.valid {
        bail!("invalid system {}: {}", path.display(), report.failures.join("; "));
    }
    Ok(System::new(spec)?)
}

pub fn symbolic(sys: &System) -> Result<&Arc<SymbolSpace>> {
    Ok(sys.symbol_space()?)
}

pub fn load_filter(path: &Path, sys: &System) -> Result<Filter> {
    Filter::from_file(path, sys.symbol_space().ok()).with_context(|| format!("reading filter {}", path.display()))
}

/// Weight from `--filter` or `--weight`, plus the filter if one was given.
pub fn load_weight(src: &WeightSource, sys: &System, depth: usize) -> Result<(Weight, Option<Filter>)> {
    match (&src.filter, &src.weight) {
        (Some(f), None) => {
            let m0 = load_filter(f, sys)?;
            Ok((weight_from_filter(sys, &m0, depth)?, Some(m0)))
        }
        (None, Some(w)) => {
            let space = symbolic(sys)?;
            let file = fs::File::open(w).with_context(|| format!("reading weight {}", w.display()))?;
            let f = CylinderFunction::read_csv(space, file)?;
            Ok((Weight::cylinder(f)?, None))
        }
        _ => bail!("exactly one of --filter and --weight is required"),
    }
}

#[derive(Deserialize, Serialize, Debug, Clone)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureSpec {
    Bernoulli {
        weights: Vec<f64>,
    },
    /// `word,mass` CSV.
    Cylinder {
        path: PathBuf,
    },
    /// Point mass on the cylinder of `word`.
    Dirac {
        word: String,
    },
    /// `re,im,weight` CSV.
    Cloud {
        path: PathBuf,
    },
    /// Backward-iteration cloud generated on the fly.
    Brolin {
        n: usize,
        burn_in: Option<usize>,
        seed: Option<u64>,
        start: Option<[f64; 2]>,
    },
    /// The strongly invariant measure, to the given depth.
    Balanced {
        depth: usize,
    },
}

pub struct LoadedMeasure {
    pub measure: MeasureRep,
    pub spec: MeasureSpec,
    /// Generated cloud (brolin only), for export.
    pub generated: Option<EmpiricalCloud>,
    pub root_failures: usize,
}

pub fn load_measure(path: &Path, sys: &System, seed: u64) -> Result<LoadedMeasure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading measure {}", path.display()))?;
    let spec: MeasureSpec = serde_json::from_str(&text).with_context(|| format!("parsing measure {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut generated = None;
    let mut root_failures = 0;
    let measure = match &spec {
        MeasureSpec::Bernoulli { weights } => dilation_core::measures::make_bernoulli(sys, weights)?,
        MeasureSpec::Cylinder { path } => {
            let p = base.join(path);
            let f = fs::File::open(&p).with_context(|| format!("reading {}", p.display()))?;
            MeasureRep::Cylinder(CylinderMeasure::read_csv(symbolic(sys)?, f)?)
        }
        MeasureSpec::Dirac { word } => {
            let space = symbolic(sys)?;
            let w = space.parse_word(word)?;
            let i = space.index_of(&w).context("inadmissible word")?;
            let mut m = vec![0.0; space.word_count(w.len())];
            m[i] = 1.0;
            MeasureRep::Cylinder(CylinderMeasure::new(space, w.len(), m)?)
        }
        MeasureSpec::Cloud { path } => {
            let p = base.join(path);
            let f = fs::File::open(&p).with_context(|| format!("reading {}", p.display()))?;
            MeasureRep::Empirical(EmpiricalCloud::read_csv(f)?)
        }
        MeasureSpec::Brolin { n, burn_in, seed: s, start } => {
            let mut cfg = BrolinConfig::new(*n, s.unwrap_or(seed));
            if let Some(b) = burn_in {
                cfg.burn_in = *b;
            }
            if let Some([re, im]) = start {
                cfg.start = Complex64::new(*re, *im);
            }
            let sample = brolin_sample(sys, &cfg)?;
            root_failures = sample.failures;
            generated = Some(sample.cloud.clone());
            MeasureRep::Empirical(sample.cloud)
        }
        MeasureSpec::Balanced { depth } => strongly_invariant_measure(symbolic(sys)?, *depth)?,
    };
    Ok(LoadedMeasure { measure, spec, generated, root_failures })
}

/// `--measure` if given, else the strongly invariant measure.
pub fn measure_or_default(path: Option<&PathBuf>, sys: &System, seed: u64, depth: usize) -> Result<(MeasureRep, Value)> {
    match path {
        Some(p) => {
            let m = load_measure(p, sys, seed)?;
            Ok((m.measure, serde_json::to_value(&m.spec)?))
        }
        None => Ok((strongly_invariant_measure(symbolic(sys)?, depth)?, json!({"kind": "balanced", "depth": depth}))),
    }
}

pub struct Report {
    started: Instant,
    name: &'static str,
}

impl Report {
    pub fn start(name: &'static str) -> Self {
        Report { started: Instant::now(), name }
    }

    /// Writes `<out>/<name>.json` with the resolved config, seed, verdict and
    /// elapsed time merged into `body`, and echoes it to stdout.
    pub fn finish(self, cli: &Cli, pass: bool, mut body: Value) -> Result<bool> {
        let obj = body.as_object_mut().expect("report body is an object");
        obj.insert("config".into(), serde_json::to_value(cli)?);
        obj.insert("seed".into(), json!(cli.common.seed));
        obj.insert("pass".into(), json!(pass));
        obj.insert("elapsed_seconds".into(), json!(self.started.elapsed().as_secs_f64()));
        let text = serde_json::to_string_pretty(&body)?;
        let path = artifact(cli, &format!("{}.json", self.name))?;
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        println!("{text}");
        Ok(pass)
    }
}

/// Path of an output file, creating the output directory if needed.
pub fn artifact(cli: &Cli, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cli.common.out).with_context(|| format!("creating {}", cli.common.out.display()))?;
    Ok(cli.common.out.join(name))
}

pub fn create(cli: &Cli, name: &str) -> Result<fs::File> {
    let p = artifact(cli, name)?;
    fs::File::create(&p).with_context(|| format!("creating {}", p.display()))
}
