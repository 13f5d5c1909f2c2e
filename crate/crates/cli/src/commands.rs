use std::io::Write;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use dilation_core::filters::{cascade, isometry_residual, psi_isometry_residual, qmf_matrix_residual, scaling_hat_grid, PsiQuadrature};
use dilation_core::measures::invariance_residual;
use dilation_core::multiplicity::{detail_multiplicity, lift_multiplicity};
use dilation_core::pathspace::{apply_pi, apply_u, consistency_residual, martingale_from_level, omega_n, sample_paths};
use dilation_core::systems::validate_system;
use dilation_core::transfer::{solve_eigenfunction, solve_eigenmeasure_with, weight_from_filter, EIGENVALUE_TOL};
use dilation_core::{
    Complex64, CylinderFunction, Error as CoreError, Filter, InvarianceKind, MatrixFilter, MeasureRep, MultiplicityFunction, PathContext, Point,
    SymbolicPoint, System, SystemSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::inputs::{create, load_filter, load_measure, load_system, load_weight, measure_or_default, symbolic, Report};
use crate::{Cli, Command, Mode, Op};

pub fn run(cli: &Cli) -> Result<bool> {
    let (name, out) = match &cli.command {
        Command::SystemInfo => ("system_info", system_info(cli)),
        Command::TransferFixpoint { .. } => ("transfer_fixpoint", transfer_fixpoint(cli)),
        Command::MeasureCheck { .. } => ("measure_check", measure_check(cli)),
        Command::PathsSample { .. } => ("paths_sample", paths_sample(cli)),
        Command::MartingaleVerify { .. } => ("martingale_verify", martingale_verify(cli)),
        Command::FilterCheck { .. } => ("filter_check", filter_check(cli)),
        Command::ScalingFunction { .. } => ("scaling_function", scaling_function(cli)),
        Command::Multiplicity { .. } => ("multiplicity", multiplicity(cli)),
    };
    match out {
        Err(e) if is_verification_failure(&e) => {
            // the computation itself refuted the property: report it, exit 1
            Report::start(name).finish(cli, false, json!({"error": format!("{e:#}")}))?;
            Ok(false)
        }
        other => other,
    }
}

fn is_verification_failure(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<CoreError>(),
        Some(
            CoreError::Eigenvalue { .. }
                | CoreError::NotConverged { .. }
                | CoreError::VanishingHarmonic { .. }
                | CoreError::Normalization { .. }
                | CoreError::Diverged { .. }
                | CoreError::Truncation { .. }
                | CoreError::NegativeMultiplicity { .. }
                | CoreError::InfiniteDifference { .. }
        )
    )
}

fn one(sys: &System) -> Result<CylinderFunction> {
    Ok(CylinderFunction::constant(symbolic(sys)?, 1.0))
}

fn system_info(cli: &Cli) -> Result<bool> {
    let report = Report::start("system_info");
    let path = cli.common.system.as_ref().context("--system is required")?;
    let spec = SystemSpec::from_file(path).with_context(|| format!("reading system {}", path.display()))?;
    let validation = validate_system(&spec);
    if !validation.valid {
        bail!("invalid system: {}", validation.failures.join("; "));
    }
    let sys = System::new(spec)?;
    let mut body = json!({"system": sys.spec(), "validation": validation});
    if let Ok(space) = sys.symbol_space() {
        let symbols: Vec<Value> = (0..space.alphabet_size() as u8)
            .map(|a| json!({"label": space.labels()[a as usize], "preimage_branches": space.branch_count(a)}))
            .collect();
        body["symbols"] = json!(symbols);
        body["onto"] = json!(space.onto());
        body["min_transfer_depth"] = json!(space.min_transfer_depth());
        body["word_counts"] = json!((0..=6).map(|d| space.word_count(d)).collect::<Vec<_>>());
    }
    if let Ok(map) = sys.rational() {
        body["degree"] = json!(map.degree());
    }
    report.finish(cli, true, body)
}

fn transfer_fixpoint(cli: &Cli) -> Result<bool> {
    let Command::TransferFixpoint { source, depth, tol, max_iter, rescale } = &cli.command else { unreachable!() };
    let report = Report::start("transfer_fixpoint");
    let sys = load_system(cli)?;
    let (mut w, _) = load_weight(source, &sys, *depth)?;
    let init = one(&sys)?;
    let mut h = solve_eigenfunction(&w, &init, *tol, *max_iter)?;
    let mut rescaled_by = None;
    if *rescale && (h.eigenvalue - 1.0).abs() > EIGENVALUE_TOL {
        rescaled_by = Some(h.eigenvalue);
        w = w.rescaled(h.eigenvalue);
        h = solve_eigenfunction(&w, &init, *tol, *max_iter)?;
    }
    let mut body = json!({
        "eigenvalue": h.eigenvalue,
        "residual": h.residual,
        "iterations": h.iterations,
        "converged": h.converged,
        "rescaled_by": rescaled_by,
        "h_depth": h.h.depth(),
    });
    h.h.write_csv(create(cli, "h.csv")?)?;
    let nu_ok = match solve_eigenmeasure_with(&w, *tol, *max_iter) {
        Ok(MeasureRep::Cylinder(nu)) => {
            nu.write_csv(create(cli, "nu.csv")?)?;
            body["nu_depth"] = json!(nu.depth());
            true
        }
        Ok(_) => unreachable!("eigenmeasure is a cylinder measure"),
        Err(e @ (CoreError::Eigenvalue { .. } | CoreError::NotConverged { .. })) => {
            body["nu_error"] = json!(e.to_string());
            false
        }
        Err(e) => return Err(e.into()),
    };
    let pass = nu_ok && h.converged && h.residual <= *tol;
    report.finish(cli, pass, body)
}

fn measure_check(cli: &Cli) -> Result<bool> {
    let Command::MeasureCheck { measure, mode, depth, tol, sigmas } = &cli.command else { unreachable!() };
    let report = Report::start("measure_check");
    let sys = load_system(cli)?;
    let m = load_measure(measure, &sys, cli.common.seed)?;
    let kind = match mode {
        Mode::Invariance => InvarianceKind::Invariance,
        Mode::Strong => InvarianceKind::StrongInvariance,
    };
    let r = invariance_residual(&sys, &m.measure, kind, *depth)?;
    if let Some(cloud) = &m.generated {
        cloud.write_csv(create(cli, "cloud.csv")?)?;
    }
    let pass = r.passes(*tol, *sigmas);
    let body = json!({
        "measure": m.spec,
        "report": r,
        "total_mass": m.measure.total_mass(),
        "root_failures": m.root_failures,
    });
    report.finish(cli, pass, body)
}

fn harmonic_context(sys: &System, w: &dilation_core::Weight, mu: MeasureRep) -> Result<(PathContext, dilation_core::Harmonic)> {
    let h = solve_eigenfunction(w, &one(sys)?, 1e-13, 10_000)?;
    if (h.eigenvalue - 1.0).abs() > EIGENVALUE_TOL {
        return Err(CoreError::Eigenvalue { eigenvalue: h.eigenvalue }.into());
    }
    Ok((PathContext::new(sys, w, &h, mu)?, h))
}

fn format_point(sys: &System, p: &Point) -> String {
    match p {
        Point::Symbolic(x) => x.format(sys.symbol_space().expect("symbolic")),
        Point::Complex(z) => format!("{:?}{:+?}i", z.re, z.im),
    }
}

fn paths_sample(cli: &Cli) -> Result<bool> {
    let Command::PathsSample { source, measure, depth, n, count, tol } = &cli.command else { unreachable!() };
    let report = Report::start("paths_sample");
    let sys = load_system(cli)?;
    let (w, _) = load_weight(source, &sys, *depth)?;
    let (mu, mu_spec) = measure_or_default(measure.as_ref(), &sys, cli.common.seed, *depth)?;
    let (ctx, h) = harmonic_context(&sys, &w, mu)?;
    let paths = sample_paths(&ctx, *n, *count, cli.common.seed)?;

    let mut out = std::io::BufWriter::new(create(cli, "paths.csv")?);
    let header: Vec<String> = (0..=*n).map(|k| format!("x{k}")).collect();
    writeln!(out, "path,{}", header.join(","))?;
    for (i, p) in paths.iter().enumerate() {
        let cells: Vec<String> = (0..p.len()).map(|k| format_point(&sys, p.theta(k))).collect();
        writeln!(out, "{i},{}", cells.join(","))?;
    }
    out.flush()?;

    // empirical frequency of each depth-1 cylinder at each level against omega_k
    let space = ctx.space();
    let mut checks = Vec::new();
    let mut worst_z: f64 = 0.0;
    for a in 0..space.word_count(1) {
        let word = space.word(1, a);
        let f = CylinderFunction::indicator(space, &word)?;
        for k in 0..=*n {
            let hits = paths.iter().filter(|p| p.theta(k).as_symbolic().is_some_and(|x| x.symbol(0) == word[0])).count();
            let freq = hits as f64 / *count as f64;
            let target = omega_n(&ctx, &f, k)?.re;
            let se = (target * (1.0 - target) / *count as f64).sqrt();
            let z = if se > 0.0 { (freq - target).abs() / se } else { 0.0 };
            worst_z = worst_z.max(z);
            checks.push(json!({"word": space.format_word(&word), "level": k, "frequency": freq, "omega": target, "z": z}));
        }
    }
    let body = json!({
        "measure": mu_spec,
        "harmonic": h.summary(),
        "h_scale": ctx.h_scale(),
        "paths": paths.len(),
        "frequencies": checks,
        "worst_z": worst_z,
    });
    report.finish(cli, ctx.harmonic_residual() <= *tol, body)
}

fn martingale_verify(cli: &Cli) -> Result<bool> {
    let Command::MartingaleVerify { filter, measure, depth, n, count, tol } = &cli.command else { unreachable!() };
    let report = Report::start("martingale_verify");
    let sys = load_system(cli)?;
    let space = Arc::clone(symbolic(&sys)?);
    let m0 = load_filter(filter, &sys)?;
    let w = weight_from_filter(&sys, &m0, *depth)?;
    let m0c = m0.sample(&space, *depth)?;
    let (mu, mu_spec) = measure_or_default(measure.as_ref(), &sys, cli.common.seed, *depth)?;
    let (ctx, h) = harmonic_context(&sys, &w, mu)?;
    let ctx = Arc::new(ctx);

    let mut consistency: f64 = 0.0;
    for d in 1..=3 {
        for i in 0..space.word_count(d) {
            let f = CylinderFunction::indicator(&space, &space.word(d, i))?;
            for k in 0..=*n {
                consistency = consistency.max(consistency_residual(&ctx, &f, k)?);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cli.common.seed);
    let (mut isometry, mut covariance, mut compat, mut monotone): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..*count {
        let d = rng.random_range(1..=3);
        let vals: Vec<f64> = (0..space.word_count(d)).map(|_| rng.random_range(-2.0..2.0)).collect();
        let xi = CylinderFunction::from_real_values(&space, d, &vals)?;
        let a = martingale_from_level(&ctx, &xi, rng.random_range(0..=(*n).min(3)), *n + 1)?;
        let ua = apply_u(&m0c, &a)?;
        let (na, nu) = (a.level_norms()?, ua.level_norms()?);
        for k in 0..=*n {
            isometry = isometry.max((nu[k] - na[k + 1]).abs());
        }
        for win in na.windows(2) {
            monotone = monotone.max(win[0] - win[1]);
        }
        let gd = rng.random_range(1..=2);
        let g = CylinderFunction::indicator(&space, &space.word(gd, rng.random_range(0..space.word_count(gd))))?;
        let lhs = apply_u(&m0c, &apply_pi(&g, &a)?)?;
        let rhs = apply_pi(&g.compose_r(), &ua)?;
        for k in 0..lhs.len() {
            covariance = covariance.max(lhs.level(k).sup_distance(rhs.level(k)));
        }
        compat = compat.max(a.compat_residual()).max(ua.compat_residual());
    }
    let residuals = json!({
        "harmonic": h.residual,
        "consistency": consistency,
        "u_isometry": isometry,
        "covariance": covariance,
        "compatibility": compat,
        "norm_decrease": monotone,
    });
    let pass = [h.residual, consistency, isometry, covariance, compat, monotone].iter().all(|&r| r <= *tol);
    report.finish(cli, pass, json!({"measure": mu_spec, "martingales": count, "levels": n + 2, "residuals": residuals}))
}

/// Points for pointwise checks: cell midpoints when the system has a real
/// coordinate, otherwise evenly spaced admissible words.
fn sample_points(sys: &System, count: usize) -> Result<Vec<Point>> {
    let space = symbolic(sys)?;
    if space.midpoints(0).is_some() {
        return (0..count).map(|k| Ok(sys.real_point((k as f64 + 0.37) / count as f64, 40)?)).collect();
    }
    let mut d = 1;
    while space.word_count(d) < count {
        d += 1;
    }
    let wc = space.word_count(d);
    (0..count).map(|k| Ok(Point::Symbolic(SymbolicPoint::from_word(space, &space.word(d, k * wc / count))?))).collect()
}

fn filter_check(cli: &Cli) -> Result<bool> {
    let Command::FilterCheck { filter, measure, depth, count, tol } = &cli.command else { unreachable!() };
    let report = Report::start("filter_check");
    let sys = load_system(cli)?;
    let space = Arc::clone(symbolic(&sys)?);
    let m0 = load_filter(filter, &sys)?;
    let pts = sample_points(&sys, *count)?;
    let mf = {
        let (m0, space) = (m0.clone(), Arc::clone(&space));
        MatrixFilter::scalar(move |x| m0.eval(&space, x).unwrap_or(Complex64::new(f64::NAN, 0.0)))
    };
    let qmf = qmf_matrix_residual(&sys, &mf, &pts)?;
    let w = weight_from_filter(&sys, &m0, *depth)?;
    let h = solve_eigenfunction(&w, &one(&sys)?, 1e-13, 10_000)?;
    let (mu, mu_spec) = measure_or_default(measure.as_ref(), &sys, cli.common.seed, *depth)?;
    let iso = isometry_residual(&sys, &m0, &h, &mu, *depth)?;
    let normalization = match (&m0, space.radix()) {
        (Filter::TrigPoly { .. }, Some(n)) => Some((m0.eval_real(0.0)? - Complex64::new((n as f64).sqrt(), 0.0)).norm()),
        _ => None,
    };
    let pass = qmf.residual <= *tol && iso.residual <= *tol;
    let body = json!({
        "measure": mu_spec,
        "qmf": qmf,
        "isometry": iso,
        "harmonic": h.summary(),
        "normalization_defect": normalization,
    });
    report.finish(cli, pass, body)
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().context("grid is start:stop:step")?;
    let [a, b, h] = parts[..] else { bail!("grid is start:stop:step") };
    if h.is_nan() || h <= 0.0 || b < a {
        bail!("grid needs step > 0 and stop >= start");
    }
    let m = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=m).map(|i| a + i as f64 * h).collect())
}

fn scaling_function(cli: &Cli) -> Result<bool> {
    let Command::ScalingFunction { filter, k, x_grid, cascade: iters, tol, x_max } = &cli.command else { unreachable!() };
    let report = Report::start("scaling_function");
    let sys = load_system(cli)?;
    let space = symbolic(&sys)?;
    let n = space.radix().filter(|_| space.is_full()).context("scaling functions need the circle map")?;
    let m0 = load_filter(filter, &sys)?;
    let xs = parse_grid(x_grid)?;
    let vals = scaling_hat_grid(&m0, n, &xs, *k)?;
    let mut out = std::io::BufWriter::new(create(cli, "scaling_function.csv")?);
    writeln!(out, "x,re,im,tail_bound")?;
    for (x, v) in xs.iter().zip(&vals) {
        let tail = v.tail_bound.map_or("inf".to_string(), |t| format!("{t:?}"));
        writeln!(out, "{x:?},{:?},{:?},{tail}", v.value.re, v.value.im)?;
    }
    out.flush()?;

    let q = PsiQuadrature { x_max: *x_max, points: (*x_max * 1000.0) as usize + 1, k: (*k).max(30), ..PsiQuadrature::default() };
    let p = psi_isometry_residual(&m0, n, &one(&sys)?, 0, &q)?;
    let defect = (1.0 - p.rhs).abs();
    let mut body = json!({
        "points": xs.len(),
        "max_tail_bound": vals.iter().map(|v| v.tail_bound.unwrap_or(f64::INFINITY)).fold(0.0, f64::max),
        "l2_norm_squared": p.rhs,
        "l2_defect": defect,
        "quadrature_tail": p.tail_estimate,
        "product_tail": p.product_tail,
    });
    if *iters > 0 {
        let c = cascade(&m0, n, *iters, 256)?;
        let mut out = std::io::BufWriter::new(create(cli, "cascade.csv")?);
        writeln!(out, "t,re,im")?;
        for (i, v) in c.values.iter().enumerate() {
            writeln!(out, "{:?},{:?},{:?}", c.t0 + (i as f64 + 0.5) * c.spacing(), v.re, v.im)?;
        }
        out.flush()?;
        body["cascade"] = json!({"iterations": iters, "t0": c.t0, "sup_differences": c.sup_differences});
    }
    report.finish(cli, defect <= *tol, body)
}

fn multiplicity(cli: &Cli) -> Result<bool> {
    let Command::Multiplicity { input, op } = &cli.command else { unreachable!() };
    let report = Report::start("multiplicity");
    let sys = load_system(cli)?;
    let space = symbolic(&sys)?;
    let file = std::fs::File::open(input).with_context(|| format!("reading {}", input.display()))?;
    let d0 = MultiplicityFunction::read_csv(space, file)?;
    let lift = lift_multiplicity(&d0)?;
    let (result, name, consistent) = match op {
        Op::Lift => (lift, "multiplicity_lift.csv", true),
        Op::Detail => {
            let detail = detail_multiplicity(&d0)?;
            let l = lift.refine(detail.depth())?;
            let d = d0.refine(detail.depth())?;
            let ok = (0..detail.values().len()).all(|i| l.values()[i] == d.values()[i] + detail.values()[i]);
            (detail, "multiplicity_detail.csv", ok)
        }
    };
    result.write_csv(create(cli, name)?)?;
    let body = json!({
        "op": op,
        "input_depth": d0.depth(),
        "output_depth": result.depth(),
        "values": result.values().iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        "lift_equals_d0_plus_detail": consistent,
    });
    report.finish(cli, consistent, body)
}
