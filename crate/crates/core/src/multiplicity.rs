//! Integer multiplicity functions `d: X -> {0, 1, ..., inf}` and the
//! relations `d_{V1}(x) = sum_{r(y)=x} d_{V0}(y) = d_{V0}(x) + d_{W0}(x)`.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::systems::SymbolSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mult {
    Finite(u64),
    Infinite,
}

/// Saturating sum; `inf` absorbs.
impl std::ops::Add for Mult {
    type Output = Mult;

    fn add(self, other: Mult) -> Mult {
        match (self, other) {
            (Mult::Finite(a), Mult::Finite(b)) => a.checked_add(b).map_or(Mult::Infinite, Mult::Finite),
            _ => Mult::Infinite,
        }
    }
}

impl fmt::Display for Mult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mult::Finite(v) => write!(f, "{v}"),
            Mult::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Mult {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Mult::Infinite);
        }
        s.parse::<u64>().map(Mult::Finite).map_err(|_| Error::Parse(format!("bad multiplicity {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct MultiplicityFunction {
    space: Arc<SymbolSpace>,
    depth: usize,
    values: Vec<Mult>,
}

impl PartialEq for MultiplicityFunction {
    fn eq(&self, other: &Self) -> bool {
        self.space.same_as(&other.space) && self.depth == other.depth && self.values == other.values
    }
}

impl MultiplicityFunction {
    pub fn new(space: &Arc<SymbolSpace>, depth: usize, values: Vec<Mult>) -> Result<Self> {
        let n = space.word_count(depth);
        if values.len() != n {
            return Err(Error::Parse(format!("expected {n} values at depth {depth}, got {}", values.len())));
        }
        Ok(MultiplicityFunction { space: Arc::clone(space), depth, values })
    }

    pub fn constant(space: &Arc<SymbolSpace>, depth: usize, c: Mult) -> Self {
        MultiplicityFunction { space: Arc::clone(space), depth, values: vec![c; space.word_count(depth)] }
    }

    pub fn space(&self) -> &Arc<SymbolSpace> {
        &self.space
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[Mult] {
        &self.values
    }

    pub fn value_at_word(&self, word: &[u8]) -> Option<Mult> {
        if word.len() < self.depth {
            return None;
        }
        self.space.index_of(&word[..self.depth]).map(|i| self.values[i])
    }

    /// Exact inclusion at a deeper level.
    pub fn refine(&self, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::RefineDepth { requested: depth, current: self.depth });
        }
        let mut values = self.values.clone();
        for d in self.depth + 1..=depth {
            let g = self.space.grid(d);
            values = (0..g.len()).map(|i| values[g.parent(i)]).collect();
        }
        Ok(MultiplicityFunction { space: Arc::clone(&self.space), depth, values })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["word", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            out.write_record([self.space.format_word(&self.space.word(self.depth, i)), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(space: &Arc<SymbolSpace>, r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(r).records() {
            let rec = rec?;
            let word = space.parse_word(rec.get(0).unwrap_or(""))?;
            let value: Mult = rec.get(1).ok_or_else(|| Error::Parse("missing value column".into()))?.parse()?;
            rows.push((word, value));
        }
        let depth = rows.first().map(|(w, _)| w.len()).ok_or_else(|| Error::Parse("empty multiplicity file".into()))?;
        let mut values = vec![None; space.word_count(depth)];
        for (w, v) in rows {
            let i = space
                .index_of(&w)
                .filter(|_| w.len() == depth)
                .ok_or_else(|| Error::Parse(format!("word {} not admissible at depth {depth}", space.format_word(&w))))?;
            values[i] = Some(v);
        }
        let values = values
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse(format!("multiplicity file does not cover all words of depth {depth}")))?;
        Self::new(space, depth, values)
    }
}

/// `d1(x) = sum_{r(y)=x} d0(y)`, one level coarser than `d0` (refined first
/// if too shallow for the branch structure).
pub fn lift_multiplicity(d0: &MultiplicityFunction) -> Result<MultiplicityFunction> {
    let d = d0.depth.max(d0.space.min_transfer_depth());
    let fine = d0.refine(d)?;
    let g = d0.space.grid(d);
    let values = (0..d0.space.word_count(d - 1))
        .into_par_iter()
        .map(|j| g.preimages(j).fold(Mult::Finite(0), |acc, i| acc + fine.values[i]))
        .collect();
    MultiplicityFunction::new(&d0.space, d - 1, values)
}

/// `d_{W0}(x) = sum_{r(y)=x} d0(y) - d0(x)`: `d0` is refined one level, lifted
/// back to its own depth and compared there.
pub fn detail_multiplicity(d0: &MultiplicityFunction) -> Result<MultiplicityFunction> {
    let fine = d0.refine(d0.depth + 1)?;
    let lifted = lift_multiplicity(&fine)?;
    let base = d0.refine(lifted.depth)?;
    let space = &d0.space;
    let values = lifted
        .values
        .iter()
        .zip(&base.values)
        .enumerate()
        .map(|(i, (&l, &b))| match (l, b) {
            (Mult::Infinite, Mult::Finite(_)) => Ok(Mult::Infinite),
            (Mult::Infinite, Mult::Infinite) => {
                Err(Error::InfiniteDifference { word: space.format_word(&space.word(lifted.depth, i)) })
            }
            (Mult::Finite(_), Mult::Infinite) => Err(Error::NegativeMultiplicity {
                word: space.format_word(&space.word(lifted.depth, i)),
                value: i64::MIN,
            }),
            (Mult::Finite(a), Mult::Finite(b)) => {
                if a >= b {
                    Ok(Mult::Finite(a - b))
                } else {
                    Err(Error::NegativeMultiplicity {
                        word: space.format_word(&space.word(lifted.depth, i)),
                        value: a as i64 - b as i64,
                    })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    MultiplicityFunction::new(space, lifted.depth, values)
}
