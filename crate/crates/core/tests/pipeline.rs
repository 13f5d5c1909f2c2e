//! End-to-end: weight -> h, nu -> mu = h dnu -> path space.

use std::sync::Arc;

use dilation_core::measures::{invariance_residual, make_bernoulli, strongly_invariant_measure};
use dilation_core::pathspace::{consistency_residual, omega_n, sample_paths};
use dilation_core::transfer::{solve_eigenfunction, solve_eigenmeasure, transfer_apply, weight_from_filter};
use dilation_core::{Complex64, CylinderFunction, CylinderMeasure, Filter, InvarianceKind, MeasureRep, PathContext, System, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn invariant_from(w: &Weight) -> (CylinderFunction, MeasureRep) {
    let s = Arc::clone(w.as_cylinder().unwrap().space());
    let h = solve_eigenfunction(w, &CylinderFunction::constant(&s, 1.0), 1e-13, 10_000).unwrap();
    assert!(h.converged && h.residual < 1e-11, "{:?}", h.summary());
    let nu = solve_eigenmeasure(w).unwrap();
    let d = nu.max_depth().unwrap();
    let nu_d = nu.masses_at(&s, d).unwrap();
    let hd = h.h.refine(d).unwrap();
    let masses: Vec<f64> = hd.values().iter().zip(&nu_d).map(|(h, n)| h.re * n).collect();
    let total: f64 = masses.iter().sum();
    let mu = CylinderMeasure::new(&s, d, masses.into_iter().map(|m| m / total).collect()).unwrap();
    (h.h, MeasureRep::Cylinder(mu))
}

#[test]
fn h_times_nu_is_invariant_for_a_rescaled_random_weight() {
    let sys = System::circle(2).unwrap();
    let s = Arc::clone(sys.symbol_space().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let raw: Vec<f64> = (0..8).map(|_| rng.random_range(0.2..1.0)).collect();
    let w0 = Weight::cylinder(CylinderFunction::from_real_values(&s, 3, &raw).unwrap()).unwrap();
    let lambda = solve_eigenfunction(&w0, &CylinderFunction::constant(&s, 1.0), 1e-13, 10_000).unwrap().eigenvalue;
    assert!((lambda - 1.0).abs() > 1e-3);
    assert!(solve_eigenmeasure(&w0).is_err());
    let w = w0.rescaled(lambda);
    let (h, mu) = invariant_from(&w);
    assert!(h.values().iter().any(|v| (v.re - 1.0).abs() > 1e-3), "h should not be constant here");
    let d = mu.max_depth().unwrap();
    let r = invariance_residual(&sys, &mu, InvarianceKind::Invariance, d - 1).unwrap();
    assert!(r.residual < 1e-10, "{r:?}");
}

#[test]
fn riesz_product_weight() {
    // W(x) = (1 + cos 2 pi x / 2) / 2 has R_W 1 = 1 and a mixing chain
    let sys = System::circle(2).unwrap();
    let s = Arc::clone(sys.symbol_space().unwrap());
    let w = Weight::cylinder(CylinderFunction::from_real_fn(&s, 8, |x| Complex64::new((1.0 + 0.5 * (std::f64::consts::TAU * x).cos()) / 2.0, 0.0)).unwrap()).unwrap();
    let (h, mu) = invariant_from(&w);
    assert!(h.sup_distance(&CylinderFunction::constant(&s, 1.0)) < 1e-12);
    let f = CylinderFunction::from_real_fn(&s, 7, |x| Complex64::new((5.0 * x).sin(), x * x)).unwrap();
    let lhs = mu.integrate_cylinder(&transfer_apply(&w, &f).unwrap()).unwrap();
    let rhs = mu.integrate_cylinder(&f).unwrap();
    assert!((lhs - rhs).norm() < 1e-12);
    assert!(invariance_residual(&sys, &mu, InvarianceKind::Invariance, 7).unwrap().residual < 1e-12);
}

#[test]
fn daubechies_filter_path_space() {
    let r3 = 3f64.sqrt();
    let c = |v: f64| Complex64::new(v / (4.0 * 2f64.sqrt()), 0.0);
    let d4 = Filter::trig(vec![c(1.0 + r3), c(3.0 + r3), c(3.0 - r3), c(1.0 - r3)], 0);
    let sys = System::circle(2).unwrap();
    let w = weight_from_filter(&sys, &d4, 10).unwrap();
    let s = Arc::clone(sys.symbol_space().unwrap());
    let h = dilation_core::Harmonic::from_function(&w, CylinderFunction::constant(&s, 1.0)).unwrap();
    assert!(h.residual < 1e-13);
    let ctx = PathContext::new(&sys, &w, &h, make_bernoulli(&sys, &[0.5, 0.5]).unwrap()).unwrap();
    for d in 1..=3 {
        for i in 0..s.word_count(d) {
            let f = CylinderFunction::indicator(&s, &s.word(d, i)).unwrap();
            for n in 0..=4 {
                assert!(consistency_residual(&ctx, &f, n).unwrap() < 1e-12);
            }
        }
    }
    // sampled paths are backward orbits, with the right level-2 marginals
    let paths = sample_paths(&ctx, 2, 40_000, 3).unwrap();
    assert!(paths.iter().take(100).all(|p| p.is_orbit(&sys)));
    let f = CylinderFunction::indicator(&s, &[0]).unwrap();
    let target = omega_n(&ctx, &f, 2).unwrap().re;
    let freq = paths.iter().filter(|p| p.theta(2).as_symbolic().unwrap().symbol(0) == 0).count() as f64 / 40_000.0;
    let se = (target * (1.0 - target) / 40_000.0).sqrt();
    assert!((freq - target).abs() < 4.0 * se, "{freq} vs {target}");
}

#[test]
fn subshift_pipeline() {
    let sys = System::subshift(vec![vec![1, 1], vec![1, 0]]).unwrap();
    let s = Arc::clone(sys.symbol_space().unwrap());
    let w = Weight::balanced(&s);
    let (h, mu) = invariant_from(&w);
    assert!(h.sup_distance(&CylinderFunction::constant(&s, 1.0)) < 1e-12);
    let strong = strongly_invariant_measure(&s, 6).unwrap();
    let d = mu.max_depth().unwrap();
    let a = mu.masses_at(&s, d).unwrap();
    let b = strong.masses_at(&s, d).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
    let hh = dilation_core::Harmonic::from_function(&w, h).unwrap();
    let ctx = PathContext::new(&sys, &w, &hh, strong).unwrap();
    let paths = sample_paths(&ctx, 4, 500, 9).unwrap();
    assert!(paths.iter().all(|p| p.is_orbit(&sys)));
}
