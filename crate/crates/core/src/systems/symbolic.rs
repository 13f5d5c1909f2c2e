//! Symbolic state spaces: full shifts (circle, Cantor) and subshifts of
//! finite type, together with the cylinder grids used to index
//! piecewise-constant functions and measures.
//!
//! A depth-`d` grid enumerates the admissible words of length `d` in
//! lexicographic order. Each cell carries the index of its prefix (drop the
//! last symbol) and of its shift (drop the first symbol) in the depth `d - 1`
//! grid, so that `r`, refinement and the transfer operator are all integer
//! index maps.

use std::fmt;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};

/// Grids with more cells than this are refused.
pub const MAX_GRID_CELLS: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolicKind {
    Circle,
    Cantor,
    Subshift,
}

/// Alphabet, transition matrix and a lazily grown cache of cylinder grids.
pub struct SymbolSpace {
    kind: SymbolicKind,
    labels: Vec<u32>,
    allowed: Vec<bool>,
    full: bool,
    radix: Option<u32>,
    // successor_rank[a * k + b] = position of b among the successors of a
    successor_rank: Vec<Option<u32>>,
    successors: Vec<Vec<u8>>,
    predecessors: Vec<Vec<u8>>,
    grids: RwLock<Vec<Arc<Grid>>>,
}

impl fmt::Debug for SymbolSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolSpace")
            .field("kind", &self.kind)
            .field("labels", &self.labels)
            .field("full", &self.full)
            .finish()
    }
}

/// Cylinder cells of one depth.
#[derive(Debug)]
pub struct Grid {
    depth: usize,
    first: Vec<u8>,
    last: Vec<u8>,
    parent: Vec<u32>,
    shift: Vec<u32>,
    child_start: Vec<u32>,
    // CSR lists: cells of this grid whose shift is a given depth-(d-1) cell
    pre_start: Vec<u32>,
    pre_list: Vec<u32>,
}

impl Grid {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// First symbol of cell `i` (meaningless at depth 0).
    pub fn first(&self, i: usize) -> u8 {
        self.first[i]
    }

    pub fn last(&self, i: usize) -> u8 {
        self.last[i]
    }

    /// Index of the length-`d-1` prefix.
    pub fn parent(&self, i: usize) -> usize {
        self.parent[i] as usize
    }

    /// Index of `r([w])`, the word with its first symbol removed.
    pub fn shift(&self, i: usize) -> usize {
        self.shift[i] as usize
    }

    /// Cells of this grid mapped by `r` onto depth-`d-1` cell `j`, ordered by
    /// prepended symbol.
    pub fn preimages(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        let (s, e) = (self.pre_start[j] as usize, self.pre_start[j + 1] as usize);
        self.pre_list[s..e].iter().map(|&i| i as usize)
    }

    pub fn preimage_count(&self, j: usize) -> usize {
        (self.pre_start[j + 1] - self.pre_start[j]) as usize
    }

    /// Children of cell `i` live in `child_range(i)` of the next grid.
    pub fn child_range(&self, i: usize) -> std::ops::Range<usize> {
        self.child_start[i] as usize..self.child_start[i + 1] as usize
    }
}

impl SymbolSpace {
    /// Full shift on `n` symbols labelled `0..n`, read as base-`n` digits.
    pub fn circle(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSystem(format!("circle map needs N >= 2, got {n}")));
        }
        if n > 255 {
            return Err(Error::InvalidSystem(format!("alphabet of {n} symbols is too large")));
        }
        Ok(Self::build(
            SymbolicKind::Circle,
            (0..n).collect(),
            vec![true; (n * n) as usize],
            Some(n),
        ))
    }

    /// Middle-third Cantor set: base 3 with digits {0, 2}.
    pub fn cantor() -> Self {
        Self::build(SymbolicKind::Cantor, vec![0, 2], vec![true; 4], Some(3))
    }

    /// Subshift of finite type with 0-1 matrix `a`; symbols are labelled `1..=N`.
    pub fn subshift(a: &[Vec<u8>]) -> Result<Self> {
        let k = a.len();
        if k < 2 {
            return Err(Error::InvalidSystem("subshift matrix must be at least 2x2".into()));
        }
        if k > 255 {
            return Err(Error::InvalidSystem("subshift alphabet too large".into()));
        }
        let mut allowed = Vec::with_capacity(k * k);
        for (i, row) in a.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidSystem(format!("row {} has length {}, expected {k}", i + 1, row.len())));
            }
            for &v in row {
                match v {
                    0 => allowed.push(false),
                    1 => allowed.push(true),
                    _ => return Err(Error::InvalidSystem(format!("matrix entry {v} is not 0 or 1"))),
                }
            }
        }
        Ok(Self::build(SymbolicKind::Subshift, (1..=k as u32).collect(), allowed, None))
    }

    fn build(kind: SymbolicKind, labels: Vec<u32>, allowed: Vec<bool>, radix: Option<u32>) -> Self {
        let k = labels.len();
        let full = allowed.iter().all(|&b| b);
        let mut successor_rank = vec![None; k * k];
        let mut successors = vec![Vec::new(); k];
        let mut predecessors = vec![Vec::new(); k];
        for a in 0..k {
            for b in 0..k {
                if allowed[a * k + b] {
                    successor_rank[a * k + b] = Some(successors[a].len() as u32);
                    successors[a].push(b as u8);
                    predecessors[b].push(a as u8);
                }
            }
        }
        let root = Grid {
            depth: 0,
            first: vec![0],
            last: vec![0],
            parent: vec![0],
            shift: vec![0],
            child_start: vec![0, k as u32],
            pre_start: vec![0, 1],
            pre_list: vec![0],
        };
        SymbolSpace {
            kind,
            labels,
            allowed,
            full,
            radix,
            successor_rank,
            successors,
            predecessors,
            grids: RwLock::new(vec![Arc::new(root)]),
        }
    }

    pub fn kind(&self) -> SymbolicKind {
        self.kind
    }

    /// Same alphabet and transitions (grids are then interchangeable).
    pub fn same_as(&self, other: &SymbolSpace) -> bool {
        std::ptr::eq(self, other)
            || (self.kind == other.kind && self.labels == other.labels && self.allowed == other.allowed)
    }

    pub fn alphabet_size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn radix(&self) -> Option<u32> {
        self.radix
    }

    /// True when every transition is allowed (circle and Cantor maps).
    pub fn is_full(&self) -> bool {
        self.full
    }

    pub fn allowed(&self, a: u8, b: u8) -> bool {
        let k = self.labels.len();
        self.allowed[a as usize * k + b as usize]
    }

    /// Symbols `a` with `A(a, b) = 1`, i.e. the symbols that can be prepended
    /// in front of a word starting with `b`.
    pub fn predecessors(&self, b: u8) -> &[u8] {
        &self.predecessors[b as usize]
    }

    pub fn successors(&self, a: u8) -> &[u8] {
        &self.successors[a as usize]
    }

    /// `#r^{-1}(x)` for a point whose first symbol is `first`.
    pub fn branch_count(&self, first: u8) -> usize {
        self.predecessors[first as usize].len()
    }

    /// Every column of the matrix has an entry 1, so that `r` is onto.
    pub fn onto(&self) -> bool {
        self.predecessors.iter().all(|p| !p.is_empty())
    }

    /// Smallest depth at which the transfer operator can be evaluated without
    /// losing information: branch counts of constrained subshifts depend on
    /// the first symbol, so outputs there live at depth at least 1.
    pub fn min_transfer_depth(&self) -> usize {
        if self.full {
            1
        } else {
            2
        }
    }

    pub fn word_count(&self, depth: usize) -> usize {
        self.grid(depth).len()
    }

    /// Grid of depth `depth`, building and caching intermediate depths.
    ///
    /// Panics if the grid would exceed [`MAX_GRID_CELLS`].
    pub fn grid(&self, depth: usize) -> Arc<Grid> {
        {
            let grids = self.grids.read().expect("grid cache poisoned");
            if let Some(g) = grids.get(depth) {
                return Arc::clone(g);
            }
        }
        let mut grids = self.grids.write().expect("grid cache poisoned");
        while grids.len() <= depth {
            let next = self.extend(&grids);
            grids.push(Arc::new(next));
        }
        Arc::clone(&grids[depth])
    }

    fn child_index(&self, grid: &Grid, j: usize, b: u8) -> Option<usize> {
        if grid.depth == 0 {
            return Some(b as usize);
        }
        let k = self.labels.len();
        let a = grid.last[j] as usize;
        self.successor_rank[a * k + b as usize].map(|r| grid.child_start[j] as usize + r as usize)
    }

    fn extend(&self, grids: &[Arc<Grid>]) -> Grid {
        let prev = grids.last().expect("root grid");
        let depth = prev.depth + 1;
        let total = *prev.child_start.last().unwrap() as usize;
        assert!(
            total <= MAX_GRID_CELLS,
            "cylinder grid of depth {depth} would have {total} cells"
        );
        let k = self.labels.len();
        let mut first = Vec::with_capacity(total);
        let mut last = Vec::with_capacity(total);
        let mut parent = Vec::with_capacity(total);
        let mut shift = Vec::with_capacity(total);
        for j in 0..prev.len() {
            let succ: Vec<u8> = if depth == 1 {
                (0..k as u8).collect()
            } else {
                self.successors[prev.last[j] as usize].clone()
            };
            for b in succ {
                first.push(if depth == 1 { b } else { prev.first[j] });
                last.push(b);
                parent.push(j as u32);
                let s = if depth == 1 {
                    0
                } else {
                    let older = &grids[depth - 2];
                    self.child_index(older, prev.shift[j] as usize, b)
                        .expect("shift of an admissible word is admissible") as u32
                };
                shift.push(s);
            }
        }
        let mut child_start = Vec::with_capacity(total + 1);
        let mut acc = 0u32;
        child_start.push(0);
        for &b in &last {
            acc += self.successors[b as usize].len() as u32;
            child_start.push(acc);
        }
        let mut pre_start = vec![0u32; prev.len() + 1];
        for &s in &shift {
            pre_start[s as usize + 1] += 1;
        }
        for j in 0..prev.len() {
            pre_start[j + 1] += pre_start[j];
        }
        let mut fill = pre_start.clone();
        let mut pre_list = vec![0u32; total];
        for (i, &s) in shift.iter().enumerate() {
            pre_list[fill[s as usize] as usize] = i as u32;
            fill[s as usize] += 1;
        }
        Grid { depth, first, last, parent, shift, child_start, pre_start, pre_list }
    }

    /// Index of `word` in the grid of depth `word.len()`, if admissible.
    pub fn index_of(&self, word: &[u8]) -> Option<usize> {
        let k = self.labels.len();
        let mut j = 0usize;
        for (t, &b) in word.iter().enumerate() {
            if b as usize >= k {
                return None;
            }
            let g = self.grid(t);
            j = self.child_index(&g, j, b)?;
        }
        Some(j)
    }

    /// Word (alphabet indices) of cell `i` at depth `depth`.
    pub fn word(&self, depth: usize, i: usize) -> Vec<u8> {
        let mut out = vec![0u8; depth];
        let mut j = i;
        for d in (1..=depth).rev() {
            let g = self.grid(d);
            out[d - 1] = g.last[j];
            j = g.parent[j] as usize;
        }
        out
    }

    pub fn is_admissible(&self, word: &[u8]) -> bool {
        let k = self.labels.len();
        word.iter().all(|&b| (b as usize) < k) && word.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    /// Digit string of a word; labels are joined with `.` when any exceeds 9.
    pub fn format_word(&self, word: &[u8]) -> String {
        let wide = self.labels.iter().any(|&l| l > 9);
        let parts: Vec<String> = word.iter().map(|&b| self.labels[b as usize].to_string()).collect();
        if wide {
            parts.join(".")
        } else {
            parts.concat()
        }
    }

    pub fn parse_word(&self, s: &str) -> Result<Vec<u8>> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Vec::new());
        }
        let tokens: Vec<&str> = if s.contains('.') {
            s.split('.').collect()
        } else {
            s.char_indices().map(|(i, c)| &s[i..i + c.len_utf8()]).collect()
        };
        tokens
            .into_iter()
            .map(|t| {
                let label: u32 = t.parse().map_err(|_| Error::Parse(format!("bad symbol {t:?} in word {s:?}")))?;
                self.labels
                    .iter()
                    .position(|&l| l == label)
                    .map(|p| p as u8)
                    .ok_or_else(|| Error::Parse(format!("symbol {label} not in alphabet")))
            })
            .collect()
    }

    /// Left endpoint and width of the real interval coded by a cylinder
    /// (circle and Cantor only).
    pub fn interval(&self, word: &[u8]) -> Option<(f64, f64)> {
        let b = self.radix? as f64;
        let mut left = 0.0;
        let mut scale = 1.0;
        for &s in word {
            scale /= b;
            left += self.labels[s as usize] as f64 * scale;
        }
        Some((left, scale))
    }

    /// Midpoints of all depth-`depth` cylinders (circle and Cantor only).
    pub fn midpoints(&self, depth: usize) -> Option<Vec<f64>> {
        let b = self.radix? as f64;
        let width = b.powi(-(depth as i32));
        // left endpoint of each cell, built recursively from the parent
        let mut lefts = vec![0.0f64];
        let mut scale = 1.0;
        for d in 1..=depth {
            scale /= b;
            let g = self.grid(d);
            lefts = (0..g.len())
                .map(|i| lefts[g.parent(i)] + self.labels[g.last(i) as usize] as f64 * scale)
                .collect();
        }
        Some(lefts.into_iter().map(|l| l + width / 2.0).collect())
    }

    /// A canonical admissible cycle that can follow symbol `a`, together with
    /// the connecting path. Returns `(path, cycle)` with `a -> path -> cycle`
    /// admissible, or `None` when every continuation dies out.
    pub fn default_tail(&self, a: u8) -> Option<(Vec<u8>, Vec<u8>)> {
        let k = self.labels.len();
        let mut seen = vec![usize::MAX; k];
        let mut path = Vec::new();
        let mut cur = a;
        loop {
            let next = *self.successors[cur as usize].first()?;
            if seen[next as usize] != usize::MAX {
                let start = seen[next as usize];
                let cycle = path[start..].to_vec();
                path.truncate(start);
                return Some((path, cycle));
            }
            seen[next as usize] = path.len();
            path.push(next);
            cur = next;
        }
    }
}

/// An eventually periodic symbol sequence `digits ++ tail ++ tail ++ ...`.
///
/// Circle and Cantor points with tail `[0]` are exactly the N-adic
/// rationals; subshift points carry an admissible periodic tail fixed at
/// construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymbolicPoint {
    digits: Vec<u8>,
    tail: Vec<u8>,
}

impl SymbolicPoint {
    /// Build and canonicalize; `tail` must be non-empty.
    pub fn new(digits: Vec<u8>, tail: Vec<u8>) -> Self {
        assert!(!tail.is_empty(), "periodic tail must be non-empty");
        let mut p = SymbolicPoint { digits, tail };
        p.canonicalize();
        p
    }

    /// Finite word followed by the default tail of the space (symbol 0 for
    /// full shifts, the canonical reachable cycle for subshifts).
    pub fn from_word(space: &SymbolSpace, word: &[u8]) -> Result<Self> {
        if !space.is_admissible(word) {
            return Err(Error::InvalidPoint(format!("inadmissible word {}", space.format_word(word))));
        }
        if space.is_full() {
            return Ok(Self::new(word.to_vec(), vec![0]));
        }
        let (digits, tail) = match word.last() {
            None => {
                // any cycle will do; start from the first symbol that has one
                (0..space.alphabet_size() as u8)
                    .find_map(|a| space.default_tail(a))
                    .ok_or_else(|| Error::InvalidPoint("subshift has no infinite sequences".into()))?
            }
            Some(&a) => {
                let (path, cycle) = space
                    .default_tail(a)
                    .ok_or_else(|| Error::InvalidPoint(format!("word {} cannot be continued", space.format_word(word))))?;
                let mut d = word.to_vec();
                d.extend(path);
                (d, cycle)
            }
        };
        Ok(Self::new(digits, tail))
    }

    /// N-adic expansion of `x` in `[0, 1)` truncated to `depth` digits.
    pub fn from_real(space: &SymbolSpace, x: f64, depth: usize) -> Result<Self> {
        let b = space
            .radix()
            .ok_or_else(|| Error::InvalidPoint("subshift points have no real coordinate".into()))?;
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidPoint(format!("{x} is outside [0, 1)")));
        }
        let mut digits = Vec::with_capacity(depth);
        let mut y = x;
        for _ in 0..depth {
            y *= b as f64;
            let d = (y.floor() as u32).min(b - 1);
            y -= d as f64;
            let s = space
                .labels()
                .iter()
                .position(|&l| l == d)
                .ok_or_else(|| Error::InvalidPoint(format!("{x} has digit {d}, not in the alphabet")))?;
            digits.push(s as u8);
        }
        Ok(Self::new(digits, vec![0]))
    }

    fn canonicalize(&mut self) {
        // minimal period
        let p = self.tail.len();
        for q in 1..=p {
            if p.is_multiple_of(q) && (q..p).all(|i| self.tail[i] == self.tail[i - q]) {
                self.tail.truncate(q);
                break;
            }
        }
        // absorb trailing digits into the tail
        while let Some(&d) = self.digits.last() {
            if d == *self.tail.last().unwrap() {
                self.digits.pop();
                self.tail.rotate_right(1);
            } else {
                break;
            }
        }
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn tail(&self) -> &[u8] {
        &self.tail
    }

    /// Symbol at position `i` (0-based) of the infinite sequence.
    pub fn symbol(&self, i: usize) -> u8 {
        if i < self.digits.len() {
            self.digits[i]
        } else {
            self.tail[(i - self.digits.len()) % self.tail.len()]
        }
    }

    pub fn prefix(&self, n: usize) -> Vec<u8> {
        (0..n).map(|i| self.symbol(i)).collect()
    }

    /// `r(x)`: drop the first symbol.
    pub fn shifted(&self) -> Self {
        if self.digits.is_empty() {
            let mut tail = self.tail.clone();
            tail.rotate_left(1);
            SymbolicPoint { digits: Vec::new(), tail }
        } else {
            SymbolicPoint { digits: self.digits[1..].to_vec(), tail: self.tail.clone() }
        }
    }

    /// The preimage branch `a x`.
    pub fn prepended(&self, a: u8) -> Self {
        let mut digits = Vec::with_capacity(self.digits.len() + 1);
        digits.push(a);
        digits.extend_from_slice(&self.digits);
        let mut p = SymbolicPoint { digits, tail: self.tail.clone() };
        p.canonicalize();
        p
    }

    /// Checks admissibility of the whole infinite sequence.
    pub fn is_valid(&self, space: &SymbolSpace) -> bool {
        let k = space.alphabet_size();
        if self.digits.iter().chain(&self.tail).any(|&s| s as usize >= k) {
            return false;
        }
        let n = self.digits.len() + self.tail.len();
        (0..n).all(|i| space.allowed(self.symbol(i), self.symbol(i + 1)))
    }

    /// Real coordinate in `[0, 1]` for circle and Cantor points.
    pub fn real_value(&self, space: &SymbolSpace) -> Option<f64> {
        let b = space.radix()? as f64;
        let labels = space.labels();
        let mut value = 0.0;
        let mut scale = 1.0;
        for &d in &self.digits {
            scale /= b;
            value += labels[d as usize] as f64 * scale;
        }
        let p = self.tail.len() as i32;
        let mut t = 0.0;
        for &d in &self.tail {
            t = t * b + labels[d as usize] as f64;
        }
        value += scale * t / (b.powi(p) - 1.0);
        Some(value)
    }

    pub fn format(&self, space: &SymbolSpace) -> String {
        format!("{}({})", space.format_word(&self.digits), space.format_word(&self.tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> SymbolSpace {
        SymbolSpace::subshift(&[vec![1, 1], vec![1, 0]]).unwrap()
    }

    #[test]
    fn full_shift_counts_and_indices() {
        let s = SymbolSpace::circle(3).unwrap();
        assert_eq!(s.word_count(4), 81);
        let g = s.grid(3);
        for i in 0..g.len() {
            let w = s.word(3, i);
            assert_eq!(s.index_of(&w), Some(i));
            assert_eq!(g.shift(i), s.index_of(&w[1..]).unwrap());
            assert_eq!(g.parent(i), s.index_of(&w[..2]).unwrap());
            assert_eq!(g.first(i), w[0]);
        }
    }

    #[test]
    fn golden_mean_words() {
        let s = golden();
        let words: Vec<String> = (0..s.word_count(2)).map(|i| s.format_word(&s.word(2, i))).collect();
        assert_eq!(words, ["11", "12", "21"]);
        // Fibonacci growth
        let counts: Vec<usize> = (1..=6).map(|d| s.word_count(d)).collect();
        assert_eq!(counts, [2, 3, 5, 8, 13, 21]);
        assert_eq!(s.branch_count(0), 2);
        assert_eq!(s.branch_count(1), 1);
        assert!(s.onto());
    }

    #[test]
    fn preimage_lists_invert_shift() {
        let s = golden();
        let g = s.grid(5);
        let mut seen = vec![false; g.len()];
        for j in 0..s.word_count(4) {
            let w = s.word(4, j);
            let pre: Vec<usize> = g.preimages(j).collect();
            assert_eq!(pre.len(), s.branch_count(w[0]));
            for i in pre {
                assert_eq!(g.shift(i), j);
                seen[i] = true;
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }

    #[test]
    fn non_onto_matrix() {
        let s = SymbolSpace::subshift(&[vec![1, 0], vec![1, 0]]).unwrap();
        assert!(!s.onto());
        assert_eq!(s.branch_count(1), 0);
    }

    #[test]
    fn point_canonical_form() {
        let p = SymbolicPoint::new(vec![0, 1, 0, 0], vec![0, 0]);
        assert_eq!(p.digits(), &[0, 1]);
        assert_eq!(p.tail(), &[0]);
        let s = SymbolSpace::circle(2).unwrap();
        assert_eq!(p.real_value(&s), Some(0.25));
        assert_eq!(p.shifted().real_value(&s), Some(0.5));
        assert_eq!(p.shifted().prepended(0), p);
    }

    #[test]
    fn subshift_default_tail_is_admissible() {
        let s = golden();
        let p = SymbolicPoint::from_word(&s, &[0, 1, 0]).unwrap();
        assert!(p.is_valid(&s));
        assert_eq!(p.prefix(3), vec![0, 1, 0]);
        assert!(SymbolicPoint::from_word(&s, &[1, 1]).is_err());
    }

    #[test]
    fn word_round_trip_and_midpoints() {
        let s = SymbolSpace::cantor();
        assert_eq!(s.format_word(&[0, 1, 1]), "022");
        assert_eq!(s.parse_word("022").unwrap(), vec![0, 1, 1]);
        let mids = s.midpoints(1).unwrap();
        assert!((mids[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((mids[1] - 5.0 / 6.0).abs() < 1e-15);
    }
}
