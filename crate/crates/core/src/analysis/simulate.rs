use alloc::vec::Vec;

use super::AnalysisError;
use crate::operators::OperatorContext;
use crate::spatial::DensityField;

/// `[u0, Q[u0], ..., Q^n_gen[u0]]`.
pub fn simulate(
    u0: &DensityField,
    ctx: &OperatorContext,
    n_gen: usize,
) -> Result<Vec<DensityField>, AnalysisError> {
    let mut traj = Vec::with_capacity(n_gen + 1);
    traj.push(u0.clone());
    for _ in 0..n_gen {
        let next = ctx.apply_q(&traj[traj.len() - 1])?;
        traj.push(next);
    }
    Ok(traj)
}

/// Front positions of a trajectory and the speed fitted to them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FrontTrace {
    pub level: f64,
    /// `(generation, position)` for every snapshot.
    pub positions: Vec<(usize, f64)>,
    /// Slope `c` of the fit `x_n = c·n + a·ln n + b` over `fit_window`.
    pub fitted_speed: f64,
    /// Log coefficient `a` of that fit.
    pub log_coefficient: f64,
    /// Slope of the plain least-squares line over `fit_window`.
    pub linear_speed: f64,
    /// Inclusive generation range used by the fits.
    pub fit_window: (usize, usize),
}

/// Rightmost down-crossing of `level`, linearly interpolated.
pub(crate) fn front_position(u: &DensityField, level: f64) -> Option<f64> {
    let v = &u.values;
    (0..v.len() - 1)
        .rev()
        .find(|&i| v[i] >= level && v[i + 1] < level)
        .map(|i| u.grid.x(i) + (v[i] - level) / (v[i] - v[i + 1]) * u.grid.dx())
}

/// Tracks the rightmost down-crossing of `level` in every snapshot and fits
/// the positions over the generations `fit_window.0 ..= fit_window.1`.
///
/// Pulled fronts lag a constant-speed line by a term logarithmic in time, so
/// the reported speed comes from `x_n = c·n + a·ln n + b`; the plain
/// line slope is kept in `linear_speed`. For exact translates `a = 0` and both
/// agree.
pub fn track_front(
    traj: &[DensityField],
    level: f64,
    fit_window: (usize, usize),
) -> Result<FrontTrace, AnalysisError> {
    let (lo, hi) = fit_window;
    if lo < 1 || hi >= traj.len() || hi < lo + 2 {
        return Err(AnalysisError::InvalidArgument(alloc::format!(
            "fit window {lo}..={hi} must start at 1 or later, hold at least 3 generations and end before {}",
            traj.len()
        )));
    }
    let mut positions = Vec::with_capacity(traj.len());
    for (generation, u) in traj.iter().enumerate() {
        let x = front_position(u, level).ok_or(AnalysisError::LevelNotCrossed { generation })?;
        positions.push((generation, x));
    }

    let window = &positions[lo..=hi];
    let len = window.len() as f64;
    let mean = |f: &dyn Fn(&(usize, f64)) -> f64| window.iter().map(f).sum::<f64>() / len;
    let t_bar = mean(&|p| p.0 as f64);
    let l_bar = mean(&|p| libm::log(p.0 as f64));
    let x_bar = mean(&|p| p.1);
    let t: Vec<f64> = window.iter().map(|p| p.0 as f64 - t_bar).collect();
    let l: Vec<f64> = window
        .iter()
        .map(|p| libm::log(p.0 as f64) - l_bar)
        .collect();
    let x: Vec<f64> = window.iter().map(|p| p.1 - x_bar).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();

    let tt = dot(&t, &t);
    let linear_speed = dot(&x, &t) / tt;
    // Gram-Schmidt: remove the linear trend from ln n, fit the remainder.
    let proj = dot(&l, &t) / tt;
    let l_perp: Vec<f64> = l.iter().zip(&t).map(|(l, t)| l - proj * t).collect();
    let log_coefficient = dot(&x, &l_perp) / dot(&l_perp, &l_perp);
    let fitted_speed = linear_speed - log_coefficient * proj;

    Ok(FrontTrace {
        level,
        positions,
        fitted_speed,
        log_coefficient,
        linear_speed,
        fit_window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Fecundity, ModelParams};
    use crate::spatial::{Grid, KernelSpec};

    const M: f64 = 100.0;

    fn ctx() -> OperatorContext {
        OperatorContext::single_kernel(
            ModelParams::new(0.5, 2.0, M, 0.8, 0.8).unwrap(),
            Fecundity::BevertonHolt,
            KernelSpec::gaussian(1.0).unwrap(),
            Grid::from_range(-20.0, 20.0, 401).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_orbits() {
        let c = ctx();
        let g = c.grid();
        for (start, check) in [(0.0, 0.0), (M, M)] {
            let traj = simulate(&DensityField::constant(g, start), &c, 5).unwrap();
            assert_eq!(traj.len(), 6);
            for u in &traj {
                assert!(u.values.iter().all(|v| (v - check).abs() <= 1e-8 * M));
            }
        }
        let traj = simulate(&DensityField::constant(g, 10.0), &c, 20).unwrap();
        let mut alpha = 10.0;
        for u in &traj {
            assert!(u.values.iter().all(|v| (v - alpha).abs() <= 1e-8 * M));
            let next = 0.5 * alpha + 0.5 * 2.0 * M * alpha / (M + alpha);
            assert!(next > alpha);
            alpha = next;
        }
    }

    #[test]
    fn exact_translates_give_exact_speed() {
        let g = Grid::from_range(-20.0, 60.0, 801).unwrap();
        let c = 0.7;
        let traj: Vec<DensityField> = (0..40)
            .map(|n| {
                let shift = c * n as f64;
                DensityField::from_fn(g, |x| M / (1.0 + libm::exp(x - shift)), M, 0.0)
            })
            .collect();
        let tr = track_front(&traj, M / 2.0, (10, 39)).unwrap();
        assert!((tr.fitted_speed - c).abs() < 1e-10);
        assert!((tr.linear_speed - c).abs() < 1e-10);
        assert!((tr.positions[0].1).abs() < 1e-3);
    }

    #[test]
    fn level_not_crossed() {
        let c = ctx();
        let flat = simulate(&DensityField::constant(c.grid(), M), &c, 3).unwrap();
        assert_eq!(
            track_front(&flat, M / 2.0, (1, 3)),
            Err(AnalysisError::LevelNotCrossed { generation: 0 })
        );
    }

    #[test]
    fn bad_window() {
        let c = ctx();
        let traj = simulate(&DensityField::step(c.grid(), M, 0.0), &c, 3).unwrap();
        assert!(track_front(&traj, M / 2.0, (0, 3)).is_err());
        assert!(track_front(&traj, M / 2.0, (2, 3)).is_err());
        assert!(track_front(&traj, M / 2.0, (1, 4)).is_err());
    }
}
