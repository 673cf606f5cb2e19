use core::fmt;

use super::simulate::simulate;
use super::speed::golden_section;
use super::AnalysisError;
use crate::operators::{OperatorContext, OperatorError};
use crate::spatial::{shift_sample, sup_diff, DensityField, Grid, SpatialError, Tail, View};

/// How a wave construction degenerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum DegenerateKind {
    /// The profile vanished.
    Collapsed,
    /// The profile filled the domain at the carrying capacity; the frame moves
    /// slower than the invasion.
    Saturated,
}

impl fmt::Display for DegenerateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegenerateKind::Collapsed => "collapsed",
            DegenerateKind::Saturated => "saturated",
        })
    }
}

/// Continuation of a wave profile to the right of the grid during
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum TailModel {
    /// `W ~ e^{-rate·x}`.
    Exponential { rate: f64 },
    /// `W ~ (a + b x) e^{-rate·x}`, the critical-speed decay.
    LinearLog { rate: f64 },
}

impl TailModel {
    pub fn rate(&self) -> f64 {
        match *self {
            TailModel::Exponential { rate } | TailModel::LinearLog { rate } => rate,
        }
    }

    fn tail(&self) -> Tail {
        match *self {
            TailModel::Exponential { rate } => Tail::Exponential { rate },
            TailModel::LinearLog { rate } => Tail::LinearLog { rate },
        }
    }
}

/// Settings for [`construct_wave`]. Tolerances are relative to `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveOptions {
    /// Sup-norm increment at which the profile iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Sup-norm increment at which the Weinberger iteration stops.
    pub a_tol: f64,
    pub a_max_iter: usize,
    pub edge_tol: f64,
    /// Fraction of grid points at each end excluded from interior checks.
    pub edge_margin: f64,
    /// Plateau of the initial function; `M/2` when unset.
    pub half_height: Option<f64>,
    /// Ramp of the initial function; `10·dx` when unset.
    pub ramp_width: Option<f64>,
    /// Refine `dx` so that `c` is a whole number of cells.
    pub align_grid: bool,
}

impl Default for WaveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            a_tol: 1e-8,
            a_max_iter: 20_000,
            edge_tol: 1e-2,
            edge_margin: 0.05,
            half_height: None,
            ramp_width: None,
            align_grid: true,
        }
    }
}

/// A constructed traveling wave `W` with `W(-∞) = M`, `W(+∞) = 0`, pinned so
/// that `W` crosses `M/2` at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveProfile {
    pub c: f64,
    pub w: DensityField,
    /// `‖W - Q_c[W]‖_∞` away from the edge margin.
    pub residual: f64,
    pub iterations_a: usize,
    pub iterations_phi: usize,
    pub tail: TailModel,
    /// Largest pointwise increase `Q_c[φ_n] - φ_n` seen in the interior.
    /// Non-positive up to rounding for a non-increasing sequence.
    pub max_increase: f64,
}

/// Converged Weinberger iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct WeinbergerLimit {
    pub field: DensityField,
    pub iterations: usize,
    pub increment: f64,
    /// Largest pointwise decrease `a_n - a_{n+1}` seen; zero for a
    /// non-decreasing sequence.
    pub max_decrease: f64,
}

/// Grid with the same left end and roughly the same extent whose spacing
/// divides `c`, so that shifting by `c` needs no interpolation. Returned
/// unchanged when `c` is below half a cell.
pub fn aligned_grid(grid: Grid, c: f64) -> Result<Grid, SpatialError> {
    let cells = libm::round(c / grid.dx());
    if !(cells >= 1.0) {
        return Ok(grid);
    }
    let dx = c / cells;
    let n = libm::round((grid.x_max() - grid.x_min()) / dx) as usize + 1;
    Grid::new(grid.x_min(), dx, n)
}

/// `φ = half_height` for `x <= -ramp_width`, linear down to zero at `x = 0`,
/// zero beyond. Extensions `half_height` and `0`.
pub fn initial_phi(
    ctx: &OperatorContext,
    half_height: f64,
    ramp_width: f64,
) -> Result<DensityField, AnalysisError> {
    let m = ctx.params().carrying_capacity();
    if !(half_height > 0.0 && half_height < m) {
        return Err(AnalysisError::InvalidArgument(alloc::format!(
            "half_height must lie in (0, M), got {half_height}"
        )));
    }
    if !(ramp_width > 0.0 && ramp_width.is_finite()) {
        return Err(AnalysisError::InvalidArgument(alloc::format!(
            "ramp_width must be positive, got {ramp_width}"
        )));
    }
    Ok(DensityField::from_fn(
        ctx.grid(),
        |x| half_height * (-x / ramp_width).clamp(0.0, 1.0),
        half_height,
        0.0,
    ))
}

fn increment(a: &DensityField, b: &DensityField) -> f64 {
    sup_diff(&a.values, &b.values, 0..a.len())
        .max(libm::fabs(a.ext_left - b.ext_left))
        .max(libm::fabs(a.ext_right - b.ext_right))
}

/// Iterates `a_{n+1} = R_c[a_n] = max(φ, Q[a_n(· + c)])` from `a_0 = φ` until
/// the sup-norm increment is at most `tol`.
pub fn weinberger_limit(
    c: f64,
    ctx: &OperatorContext,
    phi: &DensityField,
    tol: f64,
    max_iter: usize,
) -> Result<WeinbergerLimit, AnalysisError> {
    let mut a = phi.clone();
    let mut max_decrease: f64 = 0.0;
    let mut inc = f64::INFINITY;
    for it in 1..=max_iter {
        let next = ctx.apply_rc(&a, c, phi)?;
        for (old, new) in a.values.iter().zip(&next.values) {
            max_decrease = max_decrease.max(old - new);
        }
        inc = increment(&a, &next);
        a = next;
        if inc <= tol {
            return Ok(WeinbergerLimit {
                field: a,
                iterations: it,
                increment: inc,
                max_decrease,
            });
        }
    }
    Err(AnalysisError::NoConvergence {
        stage: "Weinberger iteration",
        iterations: max_iter,
        increment: inc,
    })
}

fn margin(n: usize, frac: f64) -> usize {
    ((frac * n as f64) as usize).min((n - 1) / 2)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(*x), hi.max(*x))
        })
}

fn crossing(values: &[f64], grid: &Grid, level: f64) -> Option<f64> {
    (0..values.len() - 1)
        .rev()
        .find(|&i| values[i] >= level && values[i + 1] < level)
        .map(|i| grid.x(i) + (values[i] - level) / (values[i] - values[i + 1]) * grid.dx())
}

/// Decay model for the leading edge from the lattice dispersion relation
/// `h(λ) = ln κ_d(λ) - λc`, where `κ_d` uses the discrete stencil MGFs.
///
/// A decaying solution `e^{-λx}` of the linearized wave equation needs
/// `h(λ) = 0`. With two well separated roots the slower one governs the
/// edge. When the roots merge (critical speed) or the relation has no root
/// (the discretized critical speed sits slightly above `c`), the edge
/// follows `x·e^{-λ_min x}` at the minimizer of `h`.
fn tail_model(ctx: &OperatorContext, c: f64) -> TailModel {
    let p = ctx.params();
    let (sa, sj) = (ctx.stencil_adult(), ctx.stencil_juvenile());
    let (wa, wj) = (p.s() * p.p_a(), p.p_j() * p.k() * p.r());
    let base = p.contraction_constant();
    let h = |l: f64| libm::log(wa * sa.mgf(l) + wj * sj.mgf(l) + base) - l * c;
    let reach = sa.reach().max(sj.reach()).max(ctx.grid().dx());
    let cap = 600.0 / reach;

    let mut b = 1e-2_f64.min(cap);
    while b < cap && h(2.0 * b) < h(b) {
        b *= 2.0;
    }
    let b = (2.0 * b).min(cap);
    let (l_min, h_min) =
        golden_section(|l| Ok::<_, ()>(h(l)), 0.0, b, |l| 1e-12 * (1.0 + l)).unwrap_or((b, h(b)));
    if !(h_min < 0.0) {
        return TailModel::LinearLog { rate: l_min };
    }
    let bisect = |mut lo: f64, mut hi: f64| {
        // h(lo) and h(hi) have opposite signs.
        let lo_pos = h(lo) > 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (h(mid) > 0.0) == lo_pos {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let l1 = bisect(0.0, l_min);
    let mut hi = 2.0 * l_min;
    while hi < cap && h(hi) < 0.0 {
        hi *= 2.0;
    }
    let l2 = if h(hi) >= 0.0 {
        bisect(l_min, hi)
    } else {
        f64::INFINITY
    };
    if l2 - l1 < 0.05 * l_min {
        TailModel::LinearLog { rate: l_min }
    } else {
        TailModel::Exponential { rate: l1 }
    }
}

/// Builds a monotone traveling wave of speed `c`.
///
/// 1. `a(c;·)` is the limit of the Weinberger iteration from `φ`
///    ([`initial_phi`]). If it fills the near field at `M` the speed is below
///    the spreading speed and the wave is reported as saturated.
/// 2. Beyond its last point above `edge_tol·M`, the leading edge of `a` is
///    raised to the decay given by the lattice dispersion relation. This
///    gives `φ_1`.
/// 3. `φ_{n+1} = Q_c[φ_n]`, each iterate re-centered so that it crosses
///    `M/2` at `x = 0`. The field is continued past the right edge by the
///    same decay model, and past the left edge by the scalar orbit.
///
/// With `align_grid` the computation runs on [`aligned_grid`], which the
/// returned profile carries.
pub fn construct_wave(
    c: f64,
    ctx: &OperatorContext,
    opts: &WaveOptions,
) -> Result<WaveProfile, AnalysisError> {
    let m = ctx.params().carrying_capacity();
    let p_contr = ctx.contraction_constant();
    if p_contr >= 1.0 {
        return Err(OperatorError::ContractionViolated { p_contr }.into());
    }
    let ctx = if opts.align_grid {
        ctx.with_grid(aligned_grid(ctx.grid(), c)?)?
    } else {
        ctx.clone()
    };
    let grid = ctx.grid();
    let (n, dx) = (grid.len(), grid.dx());
    let e = margin(n, opts.edge_margin);
    let edge = opts.edge_tol * m;

    let phi = initial_phi(
        &ctx,
        opts.half_height.unwrap_or(0.5 * m),
        opts.ramp_width.unwrap_or(10.0 * dx),
    )?;
    let lim = weinberger_limit(c, &ctx, &phi, opts.a_tol * m, opts.a_max_iter)?;
    let a = lim.field;

    let reach = ctx
        .stencil_adult()
        .reach()
        .max(ctx.stencil_juvenile().reach());
    let near = e..=grid.index_at_or_below(reach).clamp(e, n - 1 - e);
    let (inf_near, _) = min_max(&a.values[near]);
    let (inf_a, sup_a) = min_max(&a.values);
    if inf_near >= m - edge {
        return Err(AnalysisError::DegenerateWave {
            kind: DegenerateKind::Saturated,
            sup: sup_a,
            inf: inf_a,
        });
    }
    if sup_a <= edge {
        return Err(AnalysisError::DegenerateWave {
            kind: DegenerateKind::Collapsed,
            sup: sup_a,
            inf: inf_a,
        });
    }
    if !(c > 0.0) {
        return Err(AnalysisError::InvalidArgument(alloc::format!(
            "no decaying front for non-positive speed {c}"
        )));
    }

    let tail = tail_model(&ctx, c);
    let rate = tail.rate();
    let mut cur = a.values.clone();
    if let Some(t) = (0..n).rev().find(|&i| a.values[i] >= edge) {
        let (xt, at) = (grid.x(t), a.values[t]);
        for (i, v) in cur.iter_mut().enumerate().skip(t + 1) {
            *v = v.max(at * libm::exp(-rate * (grid.x(i) - xt)));
        }
    }
    let mut ext_left = a.ext_left;

    let level = 0.5 * m;
    let offset = c / dx;
    let mut max_increase = f64::NEG_INFINITY;
    let mut inc = f64::INFINITY;
    let mut iterations_phi = 0;
    for it in 1..=opts.max_iter {
        let view = View::new(&cur, ext_left, tail.tail(), dx);
        let v = ctx.q_view(&view, offset, 0, n);
        let v_left = ctx.scalar_q(ext_left);
        for i in e..n - e {
            max_increase = max_increase.max(v[i] - cur[i]);
        }
        let Some(xd) = crossing(&v, &grid, level) else {
            let (lo, hi) = min_max(&v);
            let kind = if lo >= level {
                DegenerateKind::Saturated
            } else {
                DegenerateKind::Collapsed
            };
            return Err(AnalysisError::DegenerateWave {
                kind,
                sup: hi,
                inf: lo,
            });
        };
        let next = View::new(&v, v_left, tail.tail(), dx).shifted(xd / dx, 0, n);
        inc = sup_diff(&next, &cur, 0..n).max(libm::fabs(v_left - ext_left));
        cur = next;
        ext_left = v_left;
        if inc <= opts.tol * m {
            iterations_phi = it;
            break;
        }
    }
    if iterations_phi == 0 {
        return Err(AnalysisError::NoConvergence {
            stage: "wave iteration",
            iterations: opts.max_iter,
            increment: inc,
        });
    }

    let w = DensityField {
        grid,
        values: cur,
        ext_left: m,
        ext_right: 0.0,
    };
    let (inf_w, sup_w) = min_max(&w.values[e..n - e]);
    if sup_w <= edge || inf_w >= m - edge {
        let kind = if sup_w <= edge {
            DegenerateKind::Collapsed
        } else {
            DegenerateKind::Saturated
        };
        return Err(AnalysisError::DegenerateWave {
            kind,
            sup: sup_w,
            inf: inf_w,
        });
    }
    let qw = ctx.apply_qc(&w, c)?;
    let residual = sup_diff(&w.values, &qw.values, e..n - e);
    Ok(WaveProfile {
        c,
        w,
        residual,
        iterations_a: lim.iterations,
        iterations_phi,
        tail,
        max_increase,
    })
}

/// Thresholds for [`verify_wave`], relative to `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub edge_margin: f64,
    pub residual_tol: f64,
    pub monotonicity_tol: f64,
    pub boundary_tol: f64,
    pub drift_tol: f64,
    /// Generations simulated for the translation check.
    pub n_gen: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            edge_margin: 0.05,
            residual_tol: 1e-4,
            monotonicity_tol: 1e-10,
            boundary_tol: 1e-2,
            drift_tol: 1e-2,
            n_gen: 10,
        }
    }
}

/// Four-part check of a wave profile. Quantities are in density units.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VerificationReport {
    /// `‖W - B_c[W] - C_c[W]‖_∞` away from the edge margin.
    pub residual: f64,
    /// Largest `W(x_{i+1}) - W(x_i)`, or zero.
    pub monotonicity_violation: f64,
    /// `|W(x_min) - M|`.
    pub boundary_left: f64,
    /// `|W(x_max)|`.
    pub boundary_right: f64,
    /// `‖Q^n[W] - W(· - n c)‖_∞` away from the edge margin.
    pub drift: f64,
    pub n_gen: usize,
    pub residual_ok: bool,
    pub monotone_ok: bool,
    pub boundary_ok: bool,
    pub drift_ok: bool,
    pub passed: bool,
}

/// Checks a profile against the wave equation, monotonicity, the boundary
/// limits and a direct simulation. Runs on the profile's own grid.
pub fn verify_wave(
    w: &WaveProfile,
    ctx: &OperatorContext,
    opts: &VerifyOptions,
) -> Result<VerificationReport, AnalysisError> {
    let ctx = ctx.with_grid(w.w.grid)?;
    let m = ctx.params().carrying_capacity();
    let field = &w.w;
    let n = field.len();
    let e = margin(n, opts.edge_margin);

    let b = ctx.apply_bc(field, w.c)?;
    let cc = ctx.apply_cc(field, w.c)?;
    let residual = (e..n - e)
        .map(|i| libm::fabs(field.values[i] - b.values[i] - cc.values[i]))
        .fold(0.0, f64::max);
    let monotonicity_violation = field
        .values
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(0.0, f64::max);
    let boundary_left = libm::fabs(field.values[0] - m);
    let boundary_right = libm::fabs(field.values[n - 1]);

    let traj = simulate(field, &ctx, opts.n_gen)?;
    let target = shift_sample(field, -(opts.n_gen as f64) * w.c);
    let drift = sup_diff(&traj[opts.n_gen].values, &target.values, e..n - e);

    let residual_ok = residual <= opts.residual_tol * m;
    let monotone_ok = monotonicity_violation <= opts.monotonicity_tol * m;
    let boundary_ok =
        boundary_left <= opts.boundary_tol * m && boundary_right <= opts.boundary_tol * m;
    let drift_ok = drift <= opts.drift_tol * m;
    Ok(VerificationReport {
        residual,
        monotonicity_violation,
        boundary_left,
        boundary_right,
        drift,
        n_gen: opts.n_gen,
        residual_ok,
        monotone_ok,
        boundary_ok,
        drift_ok,
        passed: residual_ok && monotone_ok && boundary_ok && drift_ok,
    })
}
