//! The four subcommands.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::Serialize;
use serde_json::{json, Value};

use idewave_core::{
    construct_wave, simulate as run_simulation, spreading_speed, track_front, validate_fecundity,
    validate_params, verify_wave, AnalysisError, OperatorContext, OperatorError, SpeedResult,
};

use crate::config::{self, parse_speed, ConfigFile, Entry, RunConfig, Speed};
use crate::io::write_table;
use crate::report::{emit_json, Metadata};
use crate::CliError;

/// Runs `f` on every index with up to `jobs` worker threads, keeping order.
fn run_parallel<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                *slots[i].lock().expect("result slot poisoned") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("result slot poisoned")
                .expect("entry not run")
        })
        .collect()
}

fn grid_or_config_error(c: &RunConfig) -> Result<idewave_core::Grid, CliError> {
    config::grid(c).map_err(|e| CliError::Config(format!("grid: {e}")))
}

fn prefix(entry: &Entry) -> String {
    entry
        .index
        .map(|i| format!("entry {i}: "))
        .unwrap_or_default()
}

fn single(file: &ConfigFile, command: &str) -> Result<Entry, CliError> {
    match file.entries.as_slice() {
        [e] if e.index.is_none() => Ok(e.clone()),
        _ => Err(CliError::Config(format!(
            "`{command}` takes a single config object, not a list"
        ))),
    }
}

/// Output path for entry `i` of a sweep: `name_i.ext`.
fn entry_path(path: &Path, index: Option<usize>) -> PathBuf {
    match index {
        None => path.to_path_buf(),
        Some(i) => {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let name = match path.extension() {
                Some(ext) => format!("{stem}_{i}.{}", ext.to_string_lossy()),
                None => format!("{stem}_{i}"),
            };
            path.with_file_name(name)
        }
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Operator(OperatorError::ContractionViolated { p_contr }) => {
            CliError::Domain(format!(
                "contraction condition violated: p_contr = {p_contr} >= 1"
            ))
        }
        AnalysisError::MinimizerAtBoundary { mu, c, clipped } => CliError::Domain(format!(
            "the speed function has no interior minimum: its smallest value c(mu) = {c} is at the \
             edge of the search interval (mu = {mu}){}; the spreading speed is not attained",
            if clipped {
                ", which was clipped to the kernel MGF domain"
            } else {
                ""
            }
        )),
        other => domain(other),
    }
}

fn emit_or_outputs(
    cli_path: Option<&Path>,
    config_path: Option<&PathBuf>,
    doc: &impl Serialize,
) -> Result<(), CliError> {
    emit_json(cli_path.or(config_path.map(PathBuf::as_path)), doc)
}

// validate

fn validate_entry(file: &ConfigFile, entry: &Entry) -> Result<(Value, bool), CliError> {
    let c = &entry.config;
    let grid = grid_or_config_error(c)?;
    let meta = Metadata::new("validate", &file.sha256, entry.index, grid)
        .tolerance("fecundity_check_points", c.run.fecundity_check_points);
    let params = config::raw_params(c);
    let prep = validate_params(&params);
    let fec = if prep.failures().next().is_none() {
        let f = config::fecundity(c)?;
        Some(validate_fecundity(
            &f,
            &params,
            c.run.fecundity_check_points,
        ))
    } else {
        None
    };
    let pre = prefix(entry);
    for check in prep.failures().chain(fec.iter().flat_map(|r| r.failures())) {
        eprintln!("{pre}{}: {}", check.name, check.detail);
    }
    if let (Some(false), Some(p)) = (prep.contraction_ok, prep.p_contr) {
        eprintln!("{pre}contraction condition violated: p_contr = {p} >= 1");
    }
    let passed = prep.passed() && fec.as_ref().is_some_and(|r| r.passed());
    let doc = json!({
        "metadata": meta,
        "params": prep,
        "fecundity": fec,
        "passed": passed,
    });
    Ok((doc, passed))
}

pub fn validate(path: &Path, out: Option<&Path>, jobs: usize) -> Result<(), CliError> {
    let file = config::load(path)?;
    let results = run_parallel(file.entries.len(), jobs, |i| {
        validate_entry(&file, &file.entries[i])
    });
    let mut docs = Vec::with_capacity(results.len());
    let mut all_passed = true;
    for r in results {
        let (doc, passed) = r?;
        all_passed &= passed;
        docs.push(doc);
    }
    let sweep = file.entries[0].index.is_some();
    let doc = if sweep {
        Value::Array(docs)
    } else {
        docs.pop().unwrap_or(Value::Null)
    };
    emit_json(out, &doc)?;
    if all_passed {
        Ok(())
    } else {
        Err(CliError::Domain("validation failed".into()))
    }
}

// speed

fn speed_meta(file: &ConfigFile, entry: &Entry) -> Result<Metadata, CliError> {
    let c = &entry.config;
    Ok(
        Metadata::new("speed", &file.sha256, entry.index, grid_or_config_error(c)?)
            .tolerance("mu_max", c.run.mu_max)
            .tolerance("speed_tol", c.run.speed_tol),
    )
}

fn compute_speed(c: &RunConfig, ctx: &OperatorContext) -> Result<SpeedResult, CliError> {
    spreading_speed(ctx, c.run.mu_max, c.run.speed_tol).map_err(analysis_error)
}

fn write_scan(path: &Path, meta: &Metadata, res: &SpeedResult) -> Result<(), CliError> {
    write_table(
        path,
        meta,
        &["mu".into(), "c".into()],
        res.scan.iter().map(|&(mu, c)| [mu, c]),
    )
}

/// `Ok(doc)` on success, `Err` for usage errors; domain failures are folded
/// into the document so that a sweep reports every entry.
fn speed_entry(
    file: &ConfigFile,
    entry: &Entry,
    scan_out: Option<&Path>,
) -> Result<(Value, Option<CliError>), CliError> {
    let c = &entry.config;
    let meta = speed_meta(file, entry)?;
    let ctx = config::context(c)?;
    let pre = prefix(entry);
    match compute_speed(c, &ctx) {
        Ok(res) => {
            if res.clipped {
                eprintln!(
                    "{pre}note: the search interval was clipped to mu <= {} by the kernel MGF domain",
                    res.mu_upper
                );
            }
            let scan_path = scan_out
                .map(Path::to_path_buf)
                .or_else(|| c.run.outputs.scan.clone());
            if let Some(p) = scan_path {
                write_scan(&entry_path(&p, entry.index), &meta, &res)?;
            }
            Ok((json!({ "metadata": meta, "result": res }), None))
        }
        Err(e) => {
            if entry.index.is_some() {
                eprintln!("{pre}{e}");
            }
            Ok((json!({ "metadata": meta, "error": e.to_string() }), Some(e)))
        }
    }
}

pub fn speed(
    path: &Path,
    out: Option<&Path>,
    scan_out: Option<&Path>,
    jobs: usize,
) -> Result<(), CliError> {
    let file = config::load(path)?;
    let results = run_parallel(file.entries.len(), jobs, |i| {
        speed_entry(&file, &file.entries[i], scan_out)
    });
    let mut docs = Vec::with_capacity(results.len());
    let mut failure = None;
    for r in results {
        let (doc, err) = r?;
        docs.push(doc);
        if failure.is_none() {
            failure = err;
        }
    }
    let sweep = file.entries[0].index.is_some();
    let config_out = if sweep {
        None
    } else {
        file.entries[0].config.run.outputs.speed.clone()
    };
    let doc = if sweep {
        Value::Array(docs)
    } else {
        docs.pop().unwrap_or(Value::Null)
    };
    emit_or_outputs(out, config_out.as_ref(), &doc)?;
    match failure {
        None => Ok(()),
        Some(e) if sweep => Err(CliError::Domain(format!("at least one entry failed ({e})"))),
        Some(e) => Err(e),
    }
}

// wave

pub fn wave(
    path: &Path,
    speed_arg: Option<&str>,
    out: Option<&Path>,
    report: Option<&Path>,
) -> Result<(), CliError> {
    let file = config::load(path)?;
    let entry = single(&file, "wave")?;
    let c = &entry.config;
    let spec = match speed_arg {
        Some(t) => parse_speed(t).map_err(CliError::Config)?,
        None => match &c.run.c {
            Some(s) => s.parse().map_err(CliError::Config)?,
            None => Speed::MultipleOfCStar(1.0),
        },
    };
    let ctx = config::context(c)?;
    let wopts = c.run.wave.options();
    let vopts = c.run.verify.options();
    let report_path = report
        .map(Path::to_path_buf)
        .or_else(|| c.run.outputs.report.clone());
    let wave_path = out
        .map(Path::to_path_buf)
        .or_else(|| c.run.outputs.wave.clone());

    let base_meta = |grid| {
        Metadata::new("wave", &file.sha256, None, grid)
            .tolerance("tol", wopts.tol)
            .tolerance("max_iter", wopts.max_iter)
            .tolerance("a_tol", wopts.a_tol)
            .tolerance("a_max_iter", wopts.a_max_iter)
            .tolerance("edge_tol", wopts.edge_tol)
            .tolerance("edge_margin", wopts.edge_margin)
            .tolerance("align_grid", wopts.align_grid)
            .tolerance("residual_tol", vopts.residual_tol)
            .tolerance("monotonicity_tol", vopts.monotonicity_tol)
            .tolerance("boundary_tol", vopts.boundary_tol)
            .tolerance("drift_tol", vopts.drift_tol)
            .tolerance("verify_n_gen", vopts.n_gen)
    };
    let fail = |meta: Metadata, speed: Value, e: CliError| -> Result<(), CliError> {
        let doc = json!({ "metadata": meta, "speed": speed, "error": e.to_string() });
        emit_json(report_path.as_deref(), &doc)?;
        Err(e)
    };

    let (c_wave, c_star) = match spec {
        Speed::Value(v) => (v, None),
        Speed::MultipleOfCStar(f) => match compute_speed(c, &ctx) {
            Ok(res) => (f * res.c_star, Some(res.c_star)),
            Err(e) => return fail(base_meta(ctx.grid()), Value::Null, e),
        },
    };
    if !(c_wave.is_finite() && c_wave >= 0.0) {
        return Err(CliError::Config(format!(
            "wave speed must be finite and non-negative, got {c_wave}"
        )));
    }
    let speed_doc = json!({ "c": c_wave, "c_star": c_star });

    let profile = match construct_wave(c_wave, &ctx, &wopts) {
        Ok(p) => p,
        Err(e) => return fail(base_meta(ctx.grid()), speed_doc, analysis_error(e)),
    };
    let meta = base_meta(profile.w.grid);
    let ver = match verify_wave(&profile, &ctx, &vopts) {
        Ok(v) => v,
        Err(e) => return fail(meta, speed_doc, analysis_error(e)),
    };
    if let Some(p) = &wave_path {
        let g = profile.w.grid;
        write_table(
            p,
            &meta,
            &["x".into(), "W".into()],
            g.points().zip(&profile.w.values).map(|(x, &w)| [x, w]),
        )?;
    }
    let doc = json!({
        "metadata": meta,
        "speed": speed_doc,
        "wave": {
            "residual": profile.residual,
            "iterations_a": profile.iterations_a,
            "iterations_phi": profile.iterations_phi,
            "tail": profile.tail,
            "max_increase": profile.max_increase,
        },
        "verification": ver,
    });
    emit_json(report_path.as_deref(), &doc)?;
    if ver.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = [
            (ver.residual_ok, "residual"),
            (ver.monotone_ok, "monotonicity"),
            (ver.boundary_ok, "boundary"),
            (ver.drift_ok, "drift"),
        ]
        .into_iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, name)| name)
        .collect();
        Err(CliError::Domain(format!(
            "wave verification failed: {}",
            failed.join(", ")
        )))
    }
}

// simulate

pub fn simulate(
    path: &Path,
    n_gen: Option<usize>,
    out: Option<&Path>,
    front_out: Option<&Path>,
) -> Result<(), CliError> {
    let file = config::load(path)?;
    let entry = single(&file, "simulate")?;
    let c = &entry.config;
    let n_gen = n_gen.unwrap_or(c.run.n_gen);
    let window = match c.run.fit_window {
        Some(w) => w,
        None => ((n_gen / 2).max(1), n_gen),
    };
    if window.1 > n_gen || window.1 < window.0 + 2 {
        return Err(CliError::Config(format!(
            "fit window [{}, {}] needs n_gen >= {} and at least 3 generations (n_gen = {n_gen})",
            window.0, window.1, window.1
        )));
    }
    let ctx = config::context(c)?;
    let m = ctx.params().carrying_capacity();
    let level = c.run.level.unwrap_or(0.5 * m);
    let u0 = config::initial_field(c, &ctx)?;
    let meta = Metadata::new("simulate", &file.sha256, None, ctx.grid())
        .tolerance("n_gen", n_gen)
        .tolerance("level", level)
        .tolerance("fit_window", window);

    let traj = run_simulation(&u0, &ctx, n_gen).map_err(analysis_error)?;
    let traj_path = out
        .map(Path::to_path_buf)
        .or_else(|| c.run.outputs.trajectory.clone());
    if let Some(p) = &traj_path {
        let mut header = vec!["x".to_string()];
        header.extend((0..=n_gen).map(|g| format!("gen_{g}")));
        let grid = ctx.grid();
        let rows = grid
            .points()
            .enumerate()
            .map(|(i, x)| std::iter::once(x).chain(traj.iter().map(move |u| u.values[i])));
        write_table(p, &meta, &header, rows)?;
    }

    let front_path = front_out
        .map(Path::to_path_buf)
        .or_else(|| c.run.outputs.front.clone());
    let front = match track_front(&traj, level, window) {
        Ok(f) => f,
        Err(e) => {
            let e = analysis_error(e);
            let doc = json!({ "metadata": meta, "error": e.to_string() });
            emit_json(front_path.as_deref(), &doc)?;
            return Err(e);
        }
    };
    let reach = ctx
        .stencil_adult()
        .reach()
        .max(ctx.stencil_juvenile().reach());
    let edge_limit = ctx.grid().x_max() - reach;
    let near_edge = front.positions[window.0..=window.1]
        .iter()
        .any(|&(_, x)| x > edge_limit);
    if near_edge {
        eprintln!(
            "warning: the front comes within one kernel reach ({reach}) of x_max inside the fit \
             window; the fitted speed is unreliable, widen the grid or shorten the run"
        );
    }
    let (c_star, deviation) = match compute_speed(c, &ctx) {
        Ok(res) => (
            Some(res.c_star),
            Some((front.fitted_speed - res.c_star).abs() / res.c_star),
        ),
        Err(e) => {
            eprintln!("note: no spreading speed to compare against: {e}");
            (None, None)
        }
    };
    let doc = json!({
        "metadata": meta,
        "front": front,
        "c_star": c_star,
        "relative_deviation": deviation,
        "front_near_edge": near_edge,
    });
    emit_json(front_path.as_deref(), &doc)
}
