//! Demographic parameters and fecundity maps.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("fecundity evaluated at negative density {0}")]
    NegativeDensity(f64),
    #[error("invalid fecundity table: {0}")]
    InvalidTable(String),
}

/// Demographic constants of the model.
///
/// Juvenile survival `k` is not stored: it is always `1 - s`, so the
/// constraint `k + s = 1` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    s: f64,
    r: f64,
    m: f64,
    p_a: f64,
    p_j: f64,
}

impl ModelParams {
    /// Builds validated parameters.
    ///
    /// `s` is adult survival, `r` the low-density offspring factor, `m` the
    /// carrying capacity and `p_a`/`p_j` the dispersing adult and juvenile
    /// fractions.
    pub fn new(s: f64, r: f64, m: f64, p_a: f64, p_j: f64) -> Result<Self, ModelError> {
        let p = Self::unvalidated(s, r, m, p_a, p_j);
        let report = validate_params(&p);
        match report.checks.iter().find(|c| !c.passed) {
            Some(failed) => Err(ModelError::InvalidParams(failed.detail.clone())),
            None => Ok(p),
        }
    }

    /// Stores the values as given. Use [`validate_params`] to inspect them.
    pub const fn unvalidated(s: f64, r: f64, m: f64, p_a: f64, p_j: f64) -> Self {
        Self { s, r, m, p_a, p_j }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn k(&self) -> f64 {
        1.0 - self.s
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Carrying capacity `M`.
    pub fn carrying_capacity(&self) -> f64 {
        self.m
    }

    pub fn p_a(&self) -> f64 {
        self.p_a
    }

    pub fn p_j(&self) -> f64 {
        self.p_j
    }

    /// `s(1-p_A) + (1-p_J) k r`: the Lipschitz constant of the sedentary part
    /// of the map for Beverton-Holt fecundity.
    pub fn contraction_constant(&self) -> f64 {
        self.s * (1.0 - self.p_a) + (1.0 - self.p_j) * self.k() * self.r
    }

    /// Returns a copy with the given dispersal fractions.
    pub fn with_dispersal(&self, p_a: f64, p_j: f64) -> Self {
        Self { p_a, p_j, ..*self }
    }

    pub fn with_r(&self, r: f64) -> Self {
        Self { r, ..*self }
    }
}

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Result of a report-style validation. Never an error; inspect `passed()`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// `s(1-p_A) + (1-p_J) k r`, when the report concerns model parameters.
    pub p_contr: Option<f64>,
    pub contraction_ok: Option<bool>,
}

impl ValidationReport {
    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }

    /// True when every check passed, including the contraction condition if
    /// it was evaluated.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.contraction_ok.unwrap_or(true)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks every parameter invariant and evaluates the contraction condition
/// `s(1-p_A) + (1-p_J) k r < 1` needed for traveling-wave construction.
pub fn validate_params(p: &ModelParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    let finite = [p.s, p.r, p.m, p.p_a, p.p_j].iter().all(|v| v.is_finite());
    report.push(
        "finite",
        finite,
        if finite {
            "all parameters finite".into()
        } else {
            "non-finite parameter".into()
        },
    );
    let s_ok = (0.0..1.0).contains(&p.s);
    report.push(
        "s",
        s_ok,
        if s_ok {
            format!("s = {} in [0,1), k = {}", p.s, p.k())
        } else {
            format!("s out of [0,1): s = {}", p.s)
        },
    );
    let r_ok = p.r > 1.0;
    report.push("r", r_ok, format!("r = {} (must exceed 1)", p.r));
    let m_ok = p.m > 0.0;
    report.push("M", m_ok, format!("M = {} (must be positive)", p.m));
    let pa_ok = (0.0..=1.0).contains(&p.p_a);
    report.push("p_A", pa_ok, format!("p_A = {} (must lie in [0,1])", p.p_a));
    let pj_ok = (0.0..=1.0).contains(&p.p_j);
    report.push("p_J", pj_ok, format!("p_J = {} (must lie in [0,1])", p.p_j));

    let p_contr = p.contraction_constant();
    report.p_contr = Some(p_contr);
    report.contraction_ok = Some(p_contr < 1.0);
    report
}

/// Beverton-Holt fecundity `k r M u / (M + (r-1) u)`.
pub fn beverton_holt(u: f64, p: &ModelParams) -> Result<f64, ModelError> {
    if !(u >= 0.0) {
        return Err(ModelError::NegativeDensity(u));
    }
    Ok(bh(u, p))
}

#[inline]
fn bh(u: f64, p: &ModelParams) -> f64 {
    p.k() * p.r * p.m * u / (p.m + (p.r - 1.0) * u)
}

#[inline]
fn bh_derivative(u: f64, p: &ModelParams) -> f64 {
    let d = p.m + (p.r - 1.0) * u;
    p.k() * p.r * p.m * p.m / (d * d)
}

/// `sup_{[0,M]} g'` for `g(x) = s(1-p_A) x + (1-p_J) F(x)` with Beverton-Holt
/// `F`. `F'` is largest at zero, so this is `s(1-p_A) + (1-p_J) k r`.
pub fn growth_lipschitz_bound(p: &ModelParams) -> f64 {
    p.s * (1.0 - p.p_a) + (1.0 - p.p_j) * bh_derivative(0.0, p)
}

/// Fecundity samples on `[0, u_max]`, interpolated piecewise-linearly.
///
/// Beyond the last sample the map is held constant at the last value.
#[derive(Debug, Clone, PartialEq)]
pub struct FecundityTable {
    u: Vec<f64>,
    f: Vec<f64>,
}

impl FecundityTable {
    pub fn new(u: Vec<f64>, f: Vec<f64>) -> Result<Self, ModelError> {
        if u.len() != f.len() {
            return Err(ModelError::InvalidTable(format!(
                "{} densities but {} values",
                u.len(),
                f.len()
            )));
        }
        if u.len() < 2 {
            return Err(ModelError::InvalidTable("need at least two samples".into()));
        }
        if u[0] != 0.0 {
            return Err(ModelError::InvalidTable(format!(
                "first density must be 0, got {}",
                u[0]
            )));
        }
        if let Some(i) = (1..u.len()).find(|&i| !(u[i] > u[i - 1])) {
            return Err(ModelError::InvalidTable(format!(
                "densities must be strictly increasing (row {i})"
            )));
        }
        if let Some(i) = f.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::InvalidTable(format!(
                "value at row {i} is negative or not finite"
            )));
        }
        if !u[u.len() - 1].is_finite() {
            return Err(ModelError::InvalidTable("non-finite density".into()));
        }
        Ok(Self { u, f })
    }

    /// Samples `func` at `n` equispaced densities on `[0, u_max]`.
    pub fn sample(func: impl Fn(f64) -> f64, u_max: f64, n: usize) -> Result<Self, ModelError> {
        let n = n.max(2);
        let u: Vec<f64> = (0..n).map(|i| u_max * i as f64 / (n - 1) as f64).collect();
        let f = u.iter().map(|&x| func(x)).collect();
        Self::new(u, f)
    }

    pub fn densities(&self) -> &[f64] {
        &self.u
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn eval(&self, x: f64) -> f64 {
        let last = self.u.len() - 1;
        if x <= 0.0 {
            return self.f[0];
        }
        if x >= self.u[last] {
            return self.f[last];
        }
        let j = self.u.partition_point(|&v| v <= x) - 1;
        let t = (x - self.u[j]) / (self.u[j + 1] - self.u[j]);
        self.f[j] + t * (self.f[j + 1] - self.f[j])
    }

    fn slope(&self, j: usize) -> f64 {
        (self.f[j + 1] - self.f[j]) / (self.u[j + 1] - self.u[j])
    }

    /// Largest segment slope over the segments meeting `[0, hi]`.
    fn max_slope_on(&self, hi: f64) -> f64 {
        (0..self.u.len() - 1)
            .take_while(|&j| self.u[j] < hi)
            .map(|j| self.slope(j))
            .fold(0.0, f64::max)
    }
}

/// The fecundity map `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum Fecundity {
    BevertonHolt,
    Tabulated(FecundityTable),
}

impl Fecundity {
    /// Evaluates `F(u)` for `u >= 0`.
    #[inline]
    pub fn eval(&self, u: f64, p: &ModelParams) -> f64 {
        debug_assert!(u >= -1e-12, "fecundity at negative density {u}");
        match self {
            Fecundity::BevertonHolt => bh(u, p),
            Fecundity::Tabulated(t) => t.eval(u),
        }
    }

    /// `sup_{[0,M]} g'` for `g(x) = s(1-p_A) x + (1-p_J) F(x)`.
    pub fn growth_lipschitz_bound(&self, p: &ModelParams) -> f64 {
        match self {
            Fecundity::BevertonHolt => growth_lipschitz_bound(p),
            Fecundity::Tabulated(t) => p.s * (1.0 - p.p_a) + (1.0 - p.p_j) * t.max_slope_on(p.m),
        }
    }
}

/// Relative tolerance for the derivative-based fecundity checks.
pub const FECUNDITY_REL_TOL: f64 = 1e-6;

/// Checks the standing assumptions on `F` at `n_check` equispaced points of
/// `[0, M]`:
///
/// * H1 `F` is C¹: no isolated kinks. At each interior point the jump between
///   the left and right difference quotients may not exceed twice the jump at
///   either neighbour (plus `1e-6·kr`). A smooth map gives jumps that vary
///   slowly; a kink shows up as a spike.
/// * H2 `F(0) = 0`, `F(M) = kM`.
/// * H3 `F(u) > ku` on `(0, M)`.
/// * H4 `F` nondecreasing and `F'(0) = kr` (Richardson-extrapolated forward
///   difference, relative tolerance `1e-6`).
/// * H5 `F(u) <= kru`.
/// * H6 central-difference `F'` nonincreasing (tolerance `1e-6·kr`).
pub fn validate_fecundity(f: &Fecundity, p: &ModelParams, n_check: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    if n_check < 2 {
        report.push(
            "n_check",
            false,
            format!("n_check = {n_check}, need at least 2"),
        );
        return report;
    }
    let k = p.k();
    let m = p.m;
    let kr = k * p.r;
    let abs_tol = 1e-12 * k * m;
    let h = m / (n_check - 1) as f64;
    let pts: Vec<f64> = (0..n_check).map(|i| i as f64 * h).collect();
    let vals: Vec<f64> = pts.iter().map(|&u| f.eval(u, p)).collect();

    // H1
    let finite = vals.iter().all(|v| v.is_finite());
    let jumps: Vec<f64> = (1..n_check.saturating_sub(1))
        .map(|i| {
            let right = (vals[i + 1] - vals[i]) / h;
            let left = (vals[i] - vals[i - 1]) / h;
            (right - left).abs()
        })
        .collect();
    let kink = (0..jumps.len()).find(|&i| {
        let prev = if i > 0 { jumps[i - 1] } else { 0.0 };
        let next = jumps.get(i + 1).copied().unwrap_or(0.0);
        let neighbour = if jumps.len() == 1 {
            jumps[i]
        } else {
            prev.max(next)
        };
        jumps[i] > 2.0 * neighbour + FECUNDITY_REL_TOL * kr
    });
    report.push(
        "H1",
        finite && kink.is_none(),
        match (finite, kink) {
            (false, _) => "non-finite value".into(),
            (true, Some(i)) => format!("derivative kink near u = {}", pts[i + 1]),
            (true, None) => "no derivative kinks detected".into(),
        },
    );

    // H2
    let f0 = vals[0];
    let fm = f.eval(m, p);
    let h2 =
        f0.abs() <= FECUNDITY_REL_TOL * k * m && (fm - k * m).abs() <= FECUNDITY_REL_TOL * k * m;
    report.push(
        "H2",
        h2,
        format!("F(0) = {f0}, F(M) = {fm}, kM = {}", k * m),
    );

    // H3
    let h3_fail = (1..n_check - 1).find(|&i| !(vals[i] - k * pts[i] > abs_tol));
    report.push(
        "H3",
        h3_fail.is_none(),
        match h3_fail {
            Some(i) => format!("F(u) <= ku at u = {}", pts[i]),
            None => "F(u) > ku on (0, M)".into(),
        },
    );

    // H4
    let decreasing = (1..n_check).find(|&i| vals[i] < vals[i - 1] - abs_tol);
    let step = 1e-5 * m;
    let d1 = (f.eval(step, p) - f0) / step;
    let d2 = (f.eval(step / 2.0, p) - f0) / (step / 2.0);
    let slope0 = 2.0 * d2 - d1;
    let slope_ok = (slope0 - kr).abs() <= FECUNDITY_REL_TOL * kr;
    report.push(
        "H4",
        decreasing.is_none() && slope_ok,
        match decreasing {
            Some(i) => format!("F decreases near u = {}", pts[i]),
            None => format!("F'(0) = {slope0}, kr = {kr}"),
        },
    );

    // H5
    let h5_fail = (0..n_check).find(|&i| vals[i] > kr * pts[i] * (1.0 + 1e-12) + abs_tol);
    report.push(
        "H5",
        h5_fail.is_none(),
        match h5_fail {
            Some(i) => format!("F(u) > kru at u = {}", pts[i]),
            None => "F(u) <= kru".into(),
        },
    );

    // H6
    let central: Vec<f64> = (1..n_check.saturating_sub(1))
        .map(|i| (vals[i + 1] - vals[i - 1]) / (2.0 * h))
        .collect();
    let h6_fail =
        (1..central.len()).find(|&i| central[i] > central[i - 1] + FECUNDITY_REL_TOL * kr);
    report.push(
        "H6",
        h6_fail.is_none(),
        match h6_fail {
            Some(i) => format!("F' increases near u = {}", pts[i + 1]),
            None => "F' nonincreasing".into(),
        },
    );
    report
}
