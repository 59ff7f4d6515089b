//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use sdelab::drift::{
    indicator, lipschitz_bump, make_holder_bump, make_step_drift, sobolev_seminorm, RealFn,
    SeminormOptions,
};
use sdelab::experiment::{
    run_strong_convergence, run_strong_convergence_with, ExperimentConfig, Reference,
    ReferenceChoice,
};
use sdelab::grid::is_nested;
use sdelab::path::InitialValue;
use sdelab::quadrature::{quadrature_rate_study, QuadratureStudyConfig};
use sdelab::transform::{build_zvonkin, lamperti_reduce, DEFAULT_KNOT_SPACING};
use sdelab::{Grid, GridKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn constant_drift_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for c in [0.0, 1.0, -2.0] {
        let mut cfg = ExperimentConfig::new(format!("constant:{c}").parse().unwrap(), vec![4, 64, 1024]);
        cfg.replications = 100;
        for kind in [GridKind::Equidistant, GridKind::Quadratic] {
            let run = run_strong_convergence_with(&cfg, kind, ReferenceChoice::Auto).map_err(|e| e.to_string())?;
            ensure(run.reference == Reference::ExactOracle, || format!("c = {c}: reference {}", run.reference))?;
            for p in &run.estimate.points {
                worst = worst.max(p.error);
                ensure(p.error <= 1e-12, || format!("c = {c}, {kind:?}, n = {}: gap {:e}", p.n, p.error))?;
            }
        }
    }
    Ok(format!("max gap {worst:.1e}"))
}

fn zvonkin_suite() -> Outcome {
    let drifts = [
        make_step_drift(&[(1.0, 0.0)], 2.0).unwrap(),
        make_step_drift(&[(1.5, -3.0), (-0.5, 1.0)], 0.75).unwrap(),
        make_holder_bump(0.75, 1.0).unwrap(),
        make_holder_bump(0.5, 2.0).unwrap(),
        lipschitz_bump(1.0).unwrap(),
        indicator(0.0, 1.0).unwrap(),
    ];
    let mut worst_residual = 0.0f64;
    let mut worst_round_trip = 0.0f64;
    for spec in &drifts {
        let b = &spec.irregular;
        let t = build_zvonkin(b, DEFAULT_KNOT_SPACING).map_err(|e| e.to_string())?;
        let (lo, hi) = t.derivative_bounds();
        ensure(
            lo >= (-2.0 * t.l1_bound()).exp() && hi <= (2.0 * t.l1_bound()).exp(),
            || format!("{}: bounds ({lo}, {hi}) wider than exp(±2|b|_1)", spec.label),
        )?;
        for i in 0..10_000 {
            let x = -25.0 + 50.0 * (f64::from(i) + 0.5) / 10_000.0;
            let d = t.phi_prime(x);
            ensure(lo <= d && d <= hi, || format!("{}: phi'({x}) = {d} outside [{lo}, {hi}]", spec.label))?;
            if b.breakpoints.iter().all(|&p| (x - p).abs() > 1e-9) {
                let bx = b.eval(x);
                let residual = (bx * d + 0.5 * t.phi_double_prime(x)).abs();
                worst_residual = worst_residual.max(residual / (1.0 + bx.abs()));
                ensure(residual <= 1e-8 * (1.0 + bx.abs()), || format!("{}: ODE residual {residual:e} at {x}", spec.label))?;
            }
        }
        for i in 0..1_000 {
            let x = -50.0 + 100.0 * f64::from(i) / 999.0;
            let err = (t.phi_inv(t.phi(x)) - x).abs();
            worst_round_trip = worst_round_trip.max(err);
            ensure(err <= 1e-9, || format!("{}: round trip error {err:e} at {x}", spec.label))?;
        }
    }

    // Closed form for the unit indicator, plus a derivative check of phi'
    // that does not go through the tabulated phi''.
    let b = indicator(0.0, 1.0).unwrap().irregular;
    let t = build_zvonkin(&b, DEFAULT_KNOT_SPACING).map_err(|e| e.to_string())?;
    let expected = 0.5 * (1.0 + (-2.0f64).exp());
    let phi2 = t.phi(2.0);
    ensure((phi2 - expected).abs() <= 1e-8, || format!("phi(2) = {phi2}, expected {expected}"))?;
    ensure((t.phi_inv(expected) - 2.0).abs() <= 1e-9, || "phi_inv of phi(2)".into())?;
    let h = 1e-6;
    for i in 0..10_000 {
        let x = -3.0 + 6.0 * (f64::from(i) + 0.5) / 10_000.0;
        if x.abs() < 1e-4 || (x - 1.0).abs() < 1e-4 {
            continue;
        }
        let fd = (t.phi_prime(x + h) - t.phi_prime(x - h)) / (2.0 * h);
        let residual = (b.eval(x) * t.phi_prime(x) + 0.5 * fd).abs();
        ensure(residual <= 1e-8 * (1.0 + b.eval(x).abs()) + 1e-9, || format!("difference residual {residual:e} at {x}"))?;
    }
    Ok(format!(
        "residual {worst_residual:.1e}, round trip {worst_round_trip:.1e}, phi(2) error {:.1e}",
        (phi2 - expected).abs()
    ))
}

fn seminorm_suite() -> Outcome {
    let b = indicator(0.0, 1.0).unwrap().irregular;
    let f = |x: f64| b.eval(x);
    let opts = SeminormOptions::for_support(b.support).map_err(|e| e.to_string())?;
    let (r, n) = (opts.truncation_radius, opts.grid_points);
    let base = sobolev_seminorm(f, 0.25, r, n).map_err(|e| e.to_string())?.value;
    ensure((base - 4.0).abs() <= 0.02 * 4.0, || format!("default resolution gives {base}"))?;
    let fine_opts = opts.refined(4);
    let fine = sobolev_seminorm(f, 0.25, fine_opts.truncation_radius, fine_opts.grid_points)
        .map_err(|e| e.to_string())?
        .value;
    ensure((fine - 4.0).abs() <= 0.005 * 4.0, || format!("4x resolution gives {fine}"))?;

    for c in [-3.0, 0.5, 7.0] {
        let scaled = sobolev_seminorm(|x| c * f(x), 0.25, r, n).map_err(|e| e.to_string())?.value;
        let target = f64::abs(c) * base;
        ensure((scaled - target).abs() <= 1e-12 * target, || format!("homogeneity with c = {c}: {scaled} vs {target}"))?;
    }
    let h = 2.0 * r / n as f64;
    for cells in [-300.0, -1.0, 17.0, 512.0] {
        let s = cells * h;
        let shifted = sobolev_seminorm(|x| f(x + s), 0.25, r, n).map_err(|e| e.to_string())?.value;
        ensure((shifted - base).abs() <= 1e-12 * base, || format!("grid shift {s}: {shifted}"))?;
    }
    for s in [-4.3, 0.123, 2.71] {
        let shifted = sobolev_seminorm(|x| f(x + s), 0.25, r, n).map_err(|e| e.to_string())?.value;
        ensure((shifted - base).abs() <= 0.02 * base, || format!("shift {s}: {shifted}"))?;
    }

    let coarse = sobolev_seminorm(f, 0.6, r, n).map_err(|e| e.to_string())?;
    let finer = sobolev_seminorm(f, 0.6, r, 4 * n).map_err(|e| e.to_string())?;
    ensure(coarse.band_omitted() && finer.band_omitted(), || "kappa = 0.6 not flagged divergent".into())?;
    ensure(finer.value > coarse.value, || format!("kappa = 0.6: {} then {}", coarse.value, finer.value))?;
    Ok(format!("default {base:.5}, 4x {fine:.5}, kappa 0.6: {:.2} -> {:.2}", coarse.value, finer.value))
}

fn grid_suite() -> Outcome {
    let mut worst_ratio = 0.0f64;
    for kind in [GridKind::Equidistant, GridKind::Quadratic] {
        for horizon in [0.5, 1.0, 3.0] {
            for e in 1..=14 {
                let n = 1usize << e;
                let g = kind.build(n, horizon).map_err(|e| e.to_string())?;
                for p in (1..=9).map(|i| f64::from(i) / 10.0) {
                    let sum = g.weighted_mesh_sum(p).map_err(|e| e.to_string())?;
                    let bound = 1.5 * horizon.powf(1.0 - p) / (1.0 - p);
                    worst_ratio = worst_ratio.max(sum / bound);
                    ensure(sum <= bound, || format!("{kind:?} n = {n} T = {horizon} p = {p}: {sum} > {bound}"))?;
                }
                let (mesh, closed) = match kind {
                    GridKind::Quadratic => (g.mesh_norm(), (2 * n - 1) as f64 * horizon / (n * n) as f64),
                    _ => (g.mesh_norm(), horizon / n as f64),
                };
                ensure(mesh.to_bits() == closed.to_bits(), || format!("{kind:?} n = {n}: mesh {mesh} vs {closed}"))?;
                ensure(mesh <= 2.0 * horizon / n as f64, || format!("{kind:?} n = {n}: mesh above 2T/n"))?;
                ensure((g.max_gap() - mesh).abs() <= 1e-15 * horizon, || format!("{kind:?} n = {n}: stored gaps"))?;
            }
        }
    }
    for n in 1..=64 {
        let coarse = Grid::quadratic(n, 1.0).unwrap();
        for m in 1..=64 {
            let fine = Grid::quadratic(m * n, 1.0).unwrap();
            ensure(is_nested(&coarse, &fine).unwrap(), || format!("quadratic({n}) not in quadratic({})", m * n))?;
            let map = coarse.embedding(&fine).unwrap();
            ensure(map.iter().enumerate().all(|(k, &j)| j == m * k), || format!("index map for m = {m}, n = {n}"))?;
        }
    }
    Ok(format!("largest sum/bound {worst_ratio:.3}"))
}

fn quadrature_decay() -> Outcome {
    let mut slopes = Vec::new();
    for kind in [GridKind::Equidistant, GridKind::Quadratic] {
        let cfg = QuadratureStudyConfig {
            drift: "indicator:0:1".parse().unwrap(),
            kind,
            n_list: vec![8, 16, 32, 64, 128],
            horizon: 1.0,
            xi: InitialValue::Deterministic(0.0),
            replications: 20_000,
            substeps: 32,
            master_seed: 0,
        };
        let study = quadrature_rate_study(&cfg).map_err(|e| e.to_string())?;
        let slope = study.rate.slope().ok_or("degenerate quadrature errors")?;
        ensure(slope <= -1.0, || format!("{kind:?} slope {slope:.3}"))?;
        slopes.push(format!("{} {slope:.3}", kind.short_name()));
    }
    Ok(format!("slopes {}", slopes.join(", ")))
}

fn em_rates() -> Outcome {
    let study = |drift: &str, xi: f64, kind: GridKind| -> Result<f64, String> {
        let mut cfg = ExperimentConfig::new(drift.parse().unwrap(), vec![8, 16, 32, 64, 128, 256]);
        cfg.replications = 4000;
        cfg.refinement_factor = 4;
        cfg.xi = Some(InitialValue::Deterministic(xi));
        let run = run_strong_convergence(&cfg, kind).map_err(|e| e.to_string())?;
        run.estimate.slope().ok_or_else(|| format!("{drift}: no fitted slope"))
    };
    let lip = study("lipschitz_bump:1", 0.0, GridKind::Equidistant)?;
    ensure(lip <= -0.7, || format!("Lipschitz bump slope {lip:.3}"))?;
    let sign = study("sign:2", 0.5, GridKind::Equidistant)?;
    ensure(sign <= -0.4, || format!("sign slope {sign:.3}"))?;
    let equi = study("holder:0.75:1", 0.0, GridKind::Equidistant)?;
    let quad = study("holder:0.75:1", 0.0, GridKind::Quadratic)?;
    ensure(quad <= equi + 0.05, || format!("Hoelder: quad {quad:.3} vs equi {equi:.3}"))?;
    Ok(format!("lipschitz {lip:.3}, sign {sign:.3}, hoelder equi {equi:.3} quad {quad:.3}"))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn cli_determinism() -> Outcome {
    let runs: [&[&str]; 5] = [
        &["simulate", "--drift", "sign:2", "--grid", "quad:64", "--xi", "uniform:-1:1", "--replication", "3"],
        &["converge", "--drift", "holder:0.75:1", "--grid", "both", "--n-list", "4,8,16,32", "--reps", "400"],
        &["converge", "--drift", "sign:2", "--grid", "equi", "--n-list", "4,8,16", "--reps", "300", "--xi", "uniform:0:1", "--norm", "terminal"],
        &["quadrature", "--grid", "quad", "--n-list", "4,8,16", "--reps", "500", "--substeps", "8"],
        &["transform-dump", "--drift", "step:[(1.5,-3),(-0.5,1)]:0.75", "--knot-spacing", "0.01"],
    ];
    let mut files = 0;
    for args in runs {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let out = Command::new(env!("CARGO_BIN_EXE_sdelab"))
                .args(["--threads", threads, "--seed", "5", "--out-dir"])
                .arg(dir.path())
                .args(args)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(out.status.success(), || format!("{}: {}", args[0], String::from_utf8_lossy(&out.stderr)))?;
            outputs.push((out.stdout, read_dir_sorted(dir.path())));
        }
        ensure(!outputs[0].1.is_empty(), || format!("{}: no output files", args[0]))?;
        ensure(outputs[0] == outputs[1], || format!("{} differs between 1 and 8 threads", args.join(" ")))?;
        files += outputs[0].1.len();
    }
    Ok(format!("{} commands, {files} files identical", runs.len()))
}

fn lamperti_suite() -> Outcome {
    let mut worst = 0.0f64;
    for c in [0.5, 1.0, 3.0] {
        let mu: RealFn = Arc::new(|x: f64| x.sin() + 0.25 * x.cos());
        let red = lamperti_reduce(Arc::clone(&mu), Arc::new(move |_| c), Arc::new(|_| 0.0), 0.0, (-20.0, 20.0))
            .map_err(|e| e.to_string())?;
        for i in 0..1_000 {
            let y = -5.0 + 10.0 * f64::from(i) / 999.0;
            let err = (red.g(y) - mu(c * y) / c).abs();
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("sigma = {c}: g({y}) off by {err:e}"))?;
        }
    }
    let red = lamperti_reduce(
        Arc::new(|_| 0.0),
        Arc::new(|x: f64| 2.0 + x.sin()),
        Arc::new(|x: f64| x.cos()),
        0.0,
        (-10.0, 10.0),
    )
    .map_err(|e| e.to_string())?;
    for i in 0..1_000 {
        let x = -9.5 + 19.0 * f64::from(i) / 999.0;
        let err = (red.lambda_inv(red.lambda(x)) - x).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("round trip off by {err:e} at {x}"))?;
    }
    let g0 = red.g(0.0);
    ensure((g0 + 0.5).abs() <= 1e-9, || format!("g(0) = {g0}"))?;
    Ok(format!("max deviation {worst:.1e}, g(0) = {g0}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 constant-drift exactness", Duration::from_secs(5), constant_drift_exactness),
        ("2 zvonkin transform", Duration::from_secs(10), zvonkin_suite),
        ("3 seminorm", Duration::from_secs(30), seminorm_suite),
        ("4 grids", Duration::from_secs(5), grid_suite),
        ("5 quadrature decay", Duration::from_secs(600), quadrature_decay),
        ("6 EM strong rates", Duration::from_secs(1200), em_rates),
        ("7 CLI determinism", Duration::from_secs(600), cli_determinism),
        ("8 lamperti", Duration::from_secs(5), lamperti_suite),
    ];
    let mut failures = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; over budget of {budget:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS {name} ({:.2}s): {detail}", elapsed.as_secs_f64()),
            Err(why) => {
                failures += 1;
                println!("FAIL {name} ({:.2}s): {why}", elapsed.as_secs_f64());
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
