//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on failure.

use std::time::{Duration, Instant};

use idewave_core::{
    construct_wave, initial_phi, shift_sample, simulate, spreading_speed, track_front, verify_wave,
    AnalysisError, DegenerateKind, DensityField, Fecundity, Grid, KernelSpec, ModelParams,
    OperatorContext, OperatorError, VerifyOptions, WaveOptions, WaveProfile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const M: f64 = 100.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn gauss(sigma: f64) -> KernelSpec {
    KernelSpec::gaussian(sigma).unwrap()
}

fn ctx_with(p_a: f64, p_j: f64, k_a: KernelSpec, k_j: KernelSpec, grid: Grid) -> OperatorContext {
    OperatorContext::new(
        ModelParams::new(0.5, 2.0, M, p_a, p_j).unwrap(),
        Fecundity::BevertonHolt,
        k_a,
        k_j,
        grid,
    )
    .unwrap()
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams::new(
        rng.gen_range(0.0..0.95),
        rng.gen_range(1.05..5.0),
        rng.gen_range(1.0..1000.0),
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..=1.0),
    )
    .unwrap()
}

/// Random non-increasing field with values in `[0, top]`.
fn random_monotone(rng: &mut ChaCha8Rng, grid: Grid, top: f64) -> DensityField {
    let mut steps: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>().powi(4)).collect();
    let total: f64 = steps.iter().sum();
    let scale = top * rng.gen_range(0.2..=1.0) / total;
    let mut acc = 0.0;
    for s in steps.iter_mut().rev() {
        acc += *s * scale;
        *s = acc.min(top);
    }
    let left = steps[0];
    DensityField::new(grid, steps, left, 0.0).unwrap()
}

fn sup_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn anchors() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid = Grid::from_range(-50.0, 50.0, 2048).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = random_params(&mut rng);
        let m = p.carrying_capacity();
        let ctx =
            OperatorContext::single_kernel(p, Fecundity::BevertonHolt, gauss(1.0), grid).unwrap();
        let z = ctx.apply_q(&DensityField::constant(grid, 0.0)).unwrap();
        let f = ctx.apply_q(&DensityField::constant(grid, m)).unwrap();
        let e0 = z.values.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / m;
        let e1 = f.values.iter().fold(0.0_f64, |a, v| a.max((v - m).abs())) / m;
        worst = worst.max(e0).max(e1);
    }
    outcome(
        worst <= 1e-8,
        format!("max |Q[c]-c|/M = {worst:.2e} over 20 parameter sets"),
    )
}

fn order_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = Grid::from_range(-20.0, 20.0, 401).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let p = ModelParams::new(
            rng.gen_range(0.0..0.95),
            rng.gen_range(1.05..5.0),
            M,
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.0..=1.0),
        )
        .unwrap();
        let ctx = OperatorContext::new(
            p,
            Fecundity::BevertonHolt,
            gauss(rng.gen_range(0.3..2.0)),
            gauss(rng.gen_range(0.3..2.0)),
            grid,
        )
        .unwrap();
        let lo: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..M)).collect();
        let hi: Vec<f64> = lo.iter().map(|v| rng.gen_range(*v..=M)).collect();
        let (el, er) = (rng.gen_range(0.0..M), rng.gen_range(0.0..M));
        let v = DensityField::new(grid, lo, el, er).unwrap();
        let u = DensityField::new(grid, hi, rng.gen_range(el..=M), rng.gen_range(er..=M)).unwrap();
        let c = rng.gen_range(-3.0..=3.0);
        let phi = initial_phi(&ctx, rng.gen_range(1.0..M), rng.gen_range(0.1..5.0)).unwrap();
        let pairs = [
            (ctx.apply_q(&v).unwrap(), ctx.apply_q(&u).unwrap()),
            (ctx.apply_bc(&v, c).unwrap(), ctx.apply_bc(&u, c).unwrap()),
            (ctx.apply_cc(&v, c).unwrap(), ctx.apply_cc(&u, c).unwrap()),
            (
                ctx.apply_rc(&v, c, &phi).unwrap(),
                ctx.apply_rc(&u, c, &phi).unwrap(),
            ),
        ];
        for (a, b) in pairs {
            for (x, y) in a.values.iter().zip(&b.values) {
                worst = worst.max(x - y);
            }
        }
    }
    outcome(
        worst <= 0.0,
        format!("max (op[v] - op[u]) = {worst:.2e} over 200 pairs x {{Q, B_c, C_c, R_c}}"),
    )
}

fn constant_orbit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = Grid::from_range(-20.0, 20.0, 401).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let p = random_params(&mut rng);
        let m = p.carrying_capacity();
        let ctx =
            OperatorContext::single_kernel(p, Fecundity::BevertonHolt, gauss(1.0), grid).unwrap();
        let alpha0 = rng.gen_range(0.01..0.99) * m;
        let traj = simulate(&DensityField::constant(grid, alpha0), &ctx, 50).unwrap();
        let mut alpha = alpha0;
        for u in &traj {
            for v in &u.values {
                worst = worst.max((v - alpha).abs() / m);
            }
            // Independent scalar recursion with the closed-form fecundity.
            let (s, r) = (p.s(), p.r());
            alpha = s * alpha + (1.0 - s) * r * m * alpha / (m + (r - 1.0) * alpha);
        }
    }
    outcome(
        worst <= 1e-8,
        format!("max deviation from scalar orbit / M = {worst:.2e} (5 runs x 50 steps)"),
    )
}

fn contraction_solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = Grid::from_range(-20.0, 20.0, 401).unwrap();
    let tol = 1e-8 * M;
    let (mut ok, mut worst_res, mut worst_slack) = (0, 0.0_f64, f64::INFINITY);
    while ok < 50 {
        let p = ModelParams::new(
            rng.gen_range(0.0..0.95),
            rng.gen_range(1.05..5.0),
            M,
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.0..=1.0),
        )
        .unwrap();
        let pc = p.contraction_constant();
        if pc > 0.9 {
            continue;
        }
        let ctx =
            OperatorContext::single_kernel(p, Fecundity::BevertonHolt, gauss(1.0), grid).unwrap();
        let w = random_monotone(&mut rng, grid, (1.0 - pc) * M);
        let c = rng.gen_range(-3.0..=3.0);
        let sol = ctx.solve_gc(&w, c, tol, 100_000).unwrap();
        let b = ctx.apply_bc(&sol.field, c).unwrap();
        let res = sol
            .field
            .values
            .iter()
            .zip(&b.values)
            .zip(&w.values)
            .map(|((u, b), w)| (u - b - w).abs())
            .fold(0.0, f64::max);
        let wn = w.values.iter().fold(w.ext_left, |a, v| a.max(*v));
        let bound = if pc == 0.0 {
            1.0
        } else {
            ((tol / wn).ln() / pc.ln()).ceil() + 1.0
        };
        worst_res = worst_res.max(res / M);
        worst_slack = worst_slack.min(bound - sol.iterations as f64);
        ok += 1;
    }
    let mut violations_caught = 0;
    let mut tried = 0;
    while tried < 20 {
        let p = ModelParams::new(
            rng.gen_range(0.0..0.95),
            rng.gen_range(1.05..5.0),
            M,
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.0..=1.0),
        )
        .unwrap();
        if p.contraction_constant() < 1.0 {
            continue;
        }
        tried += 1;
        let ctx =
            OperatorContext::single_kernel(p, Fecundity::BevertonHolt, gauss(1.0), grid).unwrap();
        let w = random_monotone(&mut rng, grid, M);
        if let Err(OperatorError::ContractionViolated { .. }) = ctx.solve_gc(&w, 0.5, tol, 10) {
            violations_caught += 1;
        }
    }
    outcome(
        worst_res <= 1e-8 && worst_slack >= 0.0 && violations_caught == 20,
        format!(
            "max residual / M = {worst_res:.2e}, min (bound - iterations) = {worst_slack}, ContractionViolated {violations_caught}/20"
        ),
    )
}

fn all_dispersing(grid: Grid) -> OperatorContext {
    ctx_with(1.0, 1.0, gauss(1.0), gauss(1.0), grid)
}

fn c_star(ctx: &OperatorContext) -> f64 {
    spreading_speed(ctx, 10.0, 1e-10).unwrap().c_star
}

fn speed_closed_form() -> Outcome {
    let ctx = all_dispersing(Grid::from_range(-10.0, 10.0, 201).unwrap());
    let res = spreading_speed(&ctx, 10.0, 1e-10).unwrap();
    let exact = (2.0 * 1.5_f64.ln()).sqrt();
    let err = (res.c_star - exact).abs();
    outcome(
        err <= 1e-6,
        format!(
            "c* = {:.9}, closed form {exact:.9}, |error| = {err:.1e}",
            res.c_star
        ),
    )
}

fn front_speed(ctx: &OperatorContext) -> (f64, f64, f64) {
    let u0 = DensityField::step(ctx.grid(), M, 0.0);
    let traj = simulate(&u0, ctx, 60).unwrap();
    let tr = track_front(&traj, M / 2.0, (30, 60)).unwrap();
    (c_star(ctx), tr.fitted_speed, tr.linear_speed)
}

fn speed_vs_simulation(sets: &[(f64, f64, f64, f64)], limit: Duration) -> Outcome {
    let grid = Grid::from_range(-50.0, 150.0, 4096).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for &(p_a, p_j, sa, sj) in sets {
        let start = Instant::now();
        let ctx = ctx_with(p_a, p_j, gauss(sa), gauss(sj), grid);
        let (cs, fit, lin) = front_speed(&ctx);
        let rel = (fit - cs).abs() / cs;
        let took = start.elapsed();
        pass &= rel <= 0.02 && took < limit;
        parts.push(format!(
            "(p_A,p_J)=({p_a},{p_j}) K_A=G({sa}) K_J=G({sj}): c*={cs:.5} fitted={fit:.5} rel={rel:.4} [line slope {lin:.5}] {:.1}s",
            took.as_secs_f64()
        ));
    }
    outcome(pass, parts.join("; "))
}

struct Waves {
    cs: f64,
    ctx: OperatorContext,
    at_cstar: Result<WaveProfile, AnalysisError>,
    above: Result<WaveProfile, AnalysisError>,
    times: [Duration; 2],
}

fn build_waves() -> Waves {
    let ctx = all_dispersing(Grid::from_range(-30.0, 40.0, 1401).unwrap());
    let cs = c_star(&ctx);
    let t = Instant::now();
    let at_cstar = construct_wave(cs, &ctx, &WaveOptions::default());
    let t0 = t.elapsed();
    let t = Instant::now();
    let above = construct_wave(1.2 * cs, &ctx, &WaveOptions::default());
    let t1 = t.elapsed();
    Waves {
        cs,
        ctx,
        at_cstar,
        above,
        times: [t0, t1],
    }
}

fn wave_existence(w: &Waves) -> Outcome {
    let opts = VerifyOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, res, took) in [
        ("c*", &w.at_cstar, w.times[0]),
        ("1.2c*", &w.above, w.times[1]),
    ] {
        match res {
            Ok(wave) => {
                let rep = verify_wave(wave, &w.ctx, &opts).unwrap();
                let ok = rep.monotonicity_violation <= 1e-10 * M
                    && rep.boundary_ok
                    && rep.residual <= 1e-4 * M
                    && took < Duration::from_secs(120);
                pass &= ok;
                parts.push(format!(
                    "{name}: residual/M={:.1e} monotone viol={:.1e} boundary L/R={:.1e}/{:.1e} iters a/phi={}/{} {:.1}s",
                    rep.residual / M,
                    rep.monotonicity_violation,
                    rep.boundary_left,
                    rep.boundary_right,
                    wave.iterations_a,
                    wave.iterations_phi,
                    took.as_secs_f64()
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn nonexistence(w: &Waves) -> Outcome {
    match construct_wave(0.5 * w.cs, &w.ctx, &WaveOptions::default()) {
        Err(AnalysisError::DegenerateWave {
            kind: DegenerateKind::Saturated,
            ..
        }) => outcome(true, "c = 0.5c*: DegenerateWave (saturated)".into()),
        Err(e) => outcome(false, format!("c = 0.5c*: unexpected error {e}")),
        Ok(p) => outcome(
            false,
            format!("c = 0.5c*: wave returned, residual {:.2e}", p.residual),
        ),
    }
}

fn translation(w: &Waves) -> Outcome {
    let opts = VerifyOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, res) in [("c*", &w.at_cstar), ("1.2c*", &w.above)] {
        match res {
            Ok(wave) => {
                let rep = verify_wave(wave, &w.ctx, &opts).unwrap();
                pass &= rep.drift <= 1e-2 * M;
                parts.push(format!(
                    "{name}: drift/M after {} generations = {:.2e}",
                    rep.n_gen,
                    rep.drift / M
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: no wave ({e})"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn crossing(u: &DensityField, level: f64) -> f64 {
    let v = &u.values;
    let i = (0..v.len() - 1)
        .rev()
        .find(|&i| v[i] >= level && v[i + 1] < level)
        .expect("profile crosses level");
    u.grid.x(i) + (v[i] - level) / (v[i] - v[i + 1]) * u.grid.dx()
}

fn phi_independence(w: &Waves) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, c, reference) in [("c*", w.cs, &w.at_cstar), ("1.2c*", 1.2 * w.cs, &w.above)] {
        let other = construct_wave(
            c,
            &w.ctx,
            &WaveOptions {
                half_height: Some(M / 4.0),
                ramp_width: Some(3.0),
                ..WaveOptions::default()
            },
        );
        match (reference, other) {
            (Ok(a), Ok(b)) => {
                let d = crossing(&b.w, M / 2.0) - crossing(&a.w, M / 2.0);
                let b_aligned = shift_sample(&b.w, d);
                let n = a.w.len();
                let e = n / 20;
                let diff = sup_abs(&a.w.values[e..n - e], &b_aligned.values[e..n - e]);
                pass &= diff <= 1e-3 * M;
                parts.push(format!(
                    "{name}: sup|W_(M/2) - W_(M/4)|/M = {:.2e}",
                    diff / M
                ));
            }
            (a, b) => {
                pass = false;
                parts.push(format!(
                    "{name}: construction failed ({:?} / {:?})",
                    a.is_ok(),
                    b.err()
                ));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn scale_equivariance() -> Outcome {
    let grid = Grid::from_range(-10.0, 10.0, 201).unwrap();
    let a = c_star(&ctx_with(1.0, 1.0, gauss(1.0), gauss(1.0), grid));
    let b = c_star(&ctx_with(1.0, 1.0, gauss(2.0), gauss(2.0), grid));
    let rel = (b / a - 2.0).abs() / 2.0;
    outcome(
        rel <= 1e-8,
        format!("c*(2σ)/c*(σ) = {:.12}, relative error {rel:.1e}", b / a),
    )
}

fn main() {
    type Check<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);
    let waves = std::cell::OnceCell::new();
    let waves = || waves.get_or_init(build_waves);
    let criteria: Vec<Check> = vec![
        ("1 fixed-point anchors", Box::new(anchors)),
        ("2 order preservation", Box::new(order_preservation)),
        ("3 constant-orbit oracle", Box::new(constant_orbit)),
        ("4 contraction solver", Box::new(contraction_solver)),
        ("5 speed vs closed form", Box::new(speed_closed_form)),
        (
            "6 speed vs simulation",
            Box::new(|| {
                speed_vs_simulation(
                    &[
                        (1.0, 1.0, 1.0, 1.0),
                        (0.8, 0.8, 1.0, 1.0),
                        (0.9, 0.5, 1.0, 1.0),
                    ],
                    Duration::from_secs(60),
                )
            }),
        ),
        (
            "7 wave existence at and above c*",
            Box::new(|| wave_existence(waves())),
        ),
        (
            "8 nonexistence below c*",
            Box::new(|| nonexistence(waves())),
        ),
        ("9 translation", Box::new(|| translation(waves()))),
        (
            "10 phi-independence",
            Box::new(|| phi_independence(waves())),
        ),
        ("11 kernel scale equivariance", Box::new(scale_equivariance)),
        (
            "12 two-kernel speed",
            Box::new(|| {
                speed_vs_simulation(
                    &[(0.8, 0.8, 0.5, 1.5), (1.0, 1.0, 0.5, 1.5)],
                    Duration::from_secs(60),
                )
            }),
        ),
    ];
    let limits: [Option<u64>; 12] = [
        Some(5),
        Some(30),
        None,
        None,
        Some(1),
        None,
        None,
        None,
        None,
        None,
        None,
        None,
    ];
    let mut failed = 0;
    for ((name, run), limit) in criteria.iter().zip(limits) {
        let start = Instant::now();
        let mut out = run();
        let took = start.elapsed();
        if let Some(secs) = limit {
            if took > Duration::from_secs(secs) {
                out.passed = false;
                out.detail.push_str(&format!(" (exceeded {secs}s)"));
            }
        }
        if !out.passed {
            failed += 1;
        }
        println!(
            "{} [{name}] {} ({:.2}s)",
            if out.passed { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
