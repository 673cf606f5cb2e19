use alloc::vec::Vec;

use super::AnalysisError;
use crate::operators::OperatorContext;

pub const DEFAULT_MU_MAX: f64 = 10.0;
pub const DEFAULT_SPEED_TOL: f64 = 1e-10;

const SCAN_POINTS: usize = 64;
const MU_MIN: f64 = 1e-3;
/// Gap kept between the search interval and the edge of a kernel MGF domain.
const DOMAIN_GAP: f64 = 1e-6;

/// Minimum of the speed function `c(mu) = ln κ(mu) / mu`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpeedResult {
    pub c_star: f64,
    pub mu_star: f64,
    pub kappa_at_mu: f64,
    /// Coarse scan `(mu, c(mu))`.
    pub scan: Vec<(f64, f64)>,
    /// Upper end of the searched interval.
    pub mu_upper: f64,
    /// Whether `mu_upper` was lowered to stay inside a kernel MGF domain.
    pub clipped: bool,
}

/// `κ(mu) = s p_A m_A(mu) + p_J k r m_J(mu) + s(1-p_A) + (1-p_J) k r`, where
/// `m_A`, `m_J` are the kernel MGFs.
pub fn kappa(mu: f64, ctx: &OperatorContext) -> Result<f64, AnalysisError> {
    let p = ctx.params();
    let kr = p.k() * p.r();
    let (wa, wj) = (p.s() * p.p_a(), p.p_j() * kr);
    let ma = if wa > 0.0 {
        ctx.kernel_adult().mgf(mu)?
    } else {
        0.0
    };
    let mj = if wj > 0.0 {
        ctx.kernel_juvenile().mgf(mu)?
    } else {
        0.0
    };
    Ok(wa * ma + wj * mj + p.contraction_constant())
}

fn speed_at(mu: f64, ctx: &OperatorContext) -> Result<f64, AnalysisError> {
    Ok(libm::log(kappa(mu, ctx)?) / mu)
}

/// Minimizes `ln κ(mu) / mu` over `(0, mu_max]`.
///
/// A scan over 64 log-spaced points of `[1e-3, mu_max]` brackets the minimum,
/// which golden-section search then refines. `mu_max` is lowered to stay
/// `1e-6` inside the MGF domain of any kernel that carries weight.
pub fn spreading_speed(
    ctx: &OperatorContext,
    mu_max: f64,
    tol: f64,
) -> Result<SpeedResult, AnalysisError> {
    if !(mu_max > MU_MIN && tol > 0.0) {
        return Err(AnalysisError::InvalidArgument(alloc::format!(
            "need mu_max > {MU_MIN} and tol > 0 (got {mu_max}, {tol})"
        )));
    }
    let p = ctx.params();
    let mut mu_upper = mu_max;
    let mut clipped = false;
    let weighted = [
        (p.s() * p.p_a(), ctx.kernel_adult()),
        (p.p_j(), ctx.kernel_juvenile()),
    ];
    for (w, k) in weighted {
        if let (true, Some(limit)) = (w > 0.0, k.mgf_limit()) {
            if limit - DOMAIN_GAP < mu_upper {
                mu_upper = limit - DOMAIN_GAP;
                clipped = true;
            }
        }
    }
    if !(mu_upper > MU_MIN) {
        return Err(AnalysisError::InvalidArgument(alloc::format!(
            "MGF domain leaves no room to search (mu_upper = {mu_upper})"
        )));
    }

    let ratio = libm::log(mu_upper / MU_MIN) / (SCAN_POINTS - 1) as f64;
    let mut scan = Vec::with_capacity(SCAN_POINTS);
    for i in 0..SCAN_POINTS {
        let mu = if i == SCAN_POINTS - 1 {
            mu_upper
        } else {
            MU_MIN * libm::exp(ratio * i as f64)
        };
        scan.push((mu, speed_at(mu, ctx)?));
    }
    let best = (0..SCAN_POINTS)
        .min_by(|&a, &b| scan[a].1.total_cmp(&scan[b].1))
        .unwrap_or(0);
    if best == 0 || best == SCAN_POINTS - 1 {
        let (mu, c) = scan[best];
        return Err(AnalysisError::MinimizerAtBoundary { mu, c, clipped });
    }

    let (lo, hi) = (scan[best - 1].0, scan[best + 1].0);
    let width_tol = |mu: f64| (libm::sqrt(tol) * 1e-2).max(1e-14) * (1.0 + mu);
    let (mut mu_star, mut c_star) = golden_section(|mu| speed_at(mu, ctx), lo, hi, width_tol)?;
    if scan[best].1 < c_star {
        (mu_star, c_star) = scan[best];
    }
    Ok(SpeedResult {
        c_star,
        mu_star,
        kappa_at_mu: kappa(mu_star, ctx)?,
        scan,
        mu_upper,
        clipped,
    })
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
/// Returns the best point seen and its value.
pub(crate) fn golden_section<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    mut a: f64,
    mut b: f64,
    width_tol: impl Fn(f64) -> f64,
) -> Result<(f64, f64), E> {
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..200 {
        if b - a <= width_tol(0.5 * (a + b)) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}
