//! Fixtures shared by the benchmarks in `benches/`.

use std::sync::Arc;

use dilation_core::measures::make_bernoulli;
use dilation_core::transfer::weight_from_filter;
use dilation_core::{Complex64, CylinderFunction, Filter, Harmonic, PathContext, System, SystemSpec, Weight};

pub fn circle2() -> System {
    System::circle(2).expect("N = 2 is valid")
}

/// Daubechies 4-tap low-pass filter, `m0(0) = sqrt 2`.
pub fn daubechies4() -> Filter {
    let r3 = 3f64.sqrt();
    let c = |v: f64| Complex64::new(v / (4.0 * 2f64.sqrt()), 0.0);
    Filter::trig(vec![c(1.0 + r3), c(3.0 + r3), c(3.0 - r3), c(1.0 - r3)], 0)
}

pub fn haar_weight(depth: usize) -> Weight {
    weight_from_filter(&circle2(), &Filter::haar(), depth).expect("Haar weight")
}

/// A smooth depth-`depth` test function `sin(5x) + i x^2`.
pub fn smooth(depth: usize) -> CylinderFunction {
    let sys = circle2();
    let s = Arc::clone(sys.symbol_space().expect("symbolic"));
    CylinderFunction::from_real_fn(&s, depth, |x| Complex64::new((5.0 * x).sin(), x * x)).expect("circle has midpoints")
}

/// Haar weight, `h = 1`, Lebesgue measure.
pub fn haar_context(depth: usize) -> Arc<PathContext> {
    let sys = circle2();
    let w = haar_weight(depth);
    let s = Arc::clone(sys.symbol_space().expect("symbolic"));
    let h = Harmonic::from_function(&w, CylinderFunction::constant(&s, 1.0)).expect("h = 1");
    let mu = make_bernoulli(&sys, &[0.5, 0.5]).expect("Lebesgue");
    Arc::new(PathContext::new(&sys, &w, &h, mu).expect("context"))
}

pub fn z_squared() -> System {
    System::new(SystemSpec::quadratic(Complex64::new(0.0, 0.0))).expect("z^2")
}
