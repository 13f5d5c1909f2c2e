//! Transfer operators, invariant measures and covariant dilations for
//! finite-to-one maps `r: X -> X`.
//!
//! Symbolic systems (the circle `x -> N x`, the middle-thirds Cantor set,
//! subshifts of finite type) are handled exactly on cylinder partitions;
//! rational maps of the Riemann sphere by backward iteration and Monte Carlo.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filters;
pub mod measures;
pub mod multiplicity;
pub mod pathspace;
pub mod representation;
pub mod systems;
pub mod transfer;

pub use error::{Error, Result};
pub use filters::{Filter, FilterSpec, MatrixFilter};
pub use measures::{BernoulliSpec, CylinderMeasure, EmpiricalCloud, InvarianceKind, InvarianceReport, MeasureRep};
pub use multiplicity::{Mult, MultiplicityFunction};
pub use num_complex::Complex64;
pub use pathspace::{Martingale, PathContext, PathSegment};
pub use representation::{CylinderFunction, FunctionRep, SampledFunction};
pub use systems::{Point, SymbolSpace, SymbolicPoint, System, SystemSpec};
pub use transfer::{Harmonic, Weight};
