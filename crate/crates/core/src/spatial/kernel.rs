use alloc::format;
use alloc::vec::Vec;

use super::SpatialError;

/// Two-sided kernel mass dropped when a kernel is cut to a finite stencil.
pub const KERNEL_TAIL_MASS: f64 = 1e-10;

/// Symmetric dispersal kernel `K(|x|)` with unit mass.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Gaussian {
        sigma: f64,
    },
    /// `exp(-|x|/b) / (2b)`.
    Laplace {
        b: f64,
    },
    Tabulated(KernelTable),
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self, SpatialError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(SpatialError::InvalidKernel(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self::Gaussian { sigma })
    }

    pub fn laplace(b: f64) -> Result<Self, SpatialError> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(SpatialError::InvalidKernel(format!(
                "laplace scale must be positive, got {b}"
            )));
        }
        Ok(Self::Laplace { b })
    }

    pub fn tabulated(x: Vec<f64>, k: Vec<f64>) -> Result<Self, SpatialError> {
        KernelTable::new(x, k).map(Self::Tabulated)
    }

    /// `K(|x|)`.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            KernelSpec::Gaussian { sigma } => {
                let z = x / sigma;
                libm::exp(-0.5 * z * z) / (sigma * libm::sqrt(2.0 * core::f64::consts::PI))
            }
            KernelSpec::Laplace { b } => libm::exp(-libm::fabs(x) / b) / (2.0 * b),
            KernelSpec::Tabulated(t) => t.density(x),
        }
    }

    /// Half-width of the MGF domain: the MGF is finite for `|mu| < limit`.
    /// `None` when it is finite for every `mu`.
    pub fn mgf_limit(&self) -> Option<f64> {
        match self {
            KernelSpec::Laplace { b } => Some(1.0 / b),
            _ => None,
        }
    }

    /// Moment generating function `∫ e^{mu x} K(|x|) dx`.
    pub fn mgf(&self, mu: f64) -> Result<f64, SpatialError> {
        match self {
            KernelSpec::Gaussian { sigma } => Ok(libm::exp(0.5 * sigma * sigma * mu * mu)),
            KernelSpec::Laplace { b } => {
                if !(libm::fabs(mu) < 1.0 / b) {
                    return Err(SpatialError::Domain { mu, limit: 1.0 / b });
                }
                Ok(1.0 / (1.0 - b * b * mu * mu))
            }
            KernelSpec::Tabulated(t) => Ok(t.mgf(mu)),
        }
    }

    /// `∫_a^∞ K(|x|) dx`.
    pub fn mass_tail(&self, a: f64) -> f64 {
        match self {
            KernelSpec::Gaussian { sigma } => {
                0.5 * libm::erfc(a / (sigma * core::f64::consts::SQRT_2))
            }
            KernelSpec::Laplace { b } => {
                if a >= 0.0 {
                    0.5 * libm::exp(-a / b)
                } else {
                    1.0 - 0.5 * libm::exp(a / b)
                }
            }
            KernelSpec::Tabulated(t) => t.mass_tail(a),
        }
    }

    /// Smallest `x >= 0` with `mass_tail(x) <= KERNEL_TAIL_MASS / 2`.
    pub fn effective_reach(&self) -> f64 {
        let target = 0.5 * KERNEL_TAIL_MASS;
        match self {
            KernelSpec::Laplace { b } => b * libm::log(0.5 / target),
            KernelSpec::Tabulated(t) => t.support(),
            KernelSpec::Gaussian { sigma } => {
                let (mut lo, mut hi) = (0.0, 10.0 * sigma);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if self.mass_tail(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// The same kernel with lengths multiplied by `factor`:
    /// `K(x) -> K(x/factor)/factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, SpatialError> {
        match self {
            KernelSpec::Gaussian { sigma } => Self::gaussian(sigma * factor),
            KernelSpec::Laplace { b } => Self::laplace(b * factor),
            KernelSpec::Tabulated(t) => {
                KernelSpec::tabulated(t.x.iter().map(|x| x * factor).collect(), t.k.clone())
            }
        }
    }
}

/// Kernel samples on a grid symmetric about zero, symmetrized and
/// normalized to unit trapezoidal mass at construction. Linear in between,
/// zero outside the sampled interval.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    x: Vec<f64>,
    k: Vec<f64>,
}

impl KernelTable {
    pub fn new(x: Vec<f64>, k: Vec<f64>) -> Result<Self, SpatialError> {
        let bad = |msg: &str| Err(SpatialError::InvalidKernel(msg.into()));
        if x.len() != k.len() {
            return bad("x and K columns differ in length");
        }
        let n = x.len();
        if n < 3 {
            return bad("need at least three samples");
        }
        if x.iter().chain(&k).any(|v| !v.is_finite()) {
            return bad("non-finite sample");
        }
        if (1..n).any(|i| !(x[i] > x[i - 1])) {
            return bad("x must be strictly increasing");
        }
        if k.iter().any(|v| *v < 0.0) {
            return bad("kernel values must be non-negative");
        }
        let span = x[n - 1] - x[0];
        if (0..n).any(|i| libm::fabs(x[i] + x[n - 1 - i]) > 1e-9 * span) {
            return bad("sample points must be symmetric about 0");
        }
        let mut sym: Vec<f64> = (0..n).map(|i| 0.5 * (k[i] + k[n - 1 - i])).collect();
        let mass: f64 = (0..n - 1)
            .map(|i| 0.5 * (sym[i] + sym[i + 1]) * (x[i + 1] - x[i]))
            .sum();
        if !(mass > 0.0) {
            return bad("kernel has zero mass");
        }
        for v in &mut sym {
            *v /= mass;
        }
        Ok(Self { x, k: sym })
    }

    pub fn points(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.k
    }

    fn support(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    fn density(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x < self.x[0] || x > self.x[n - 1] {
            return 0.0;
        }
        let j = (self.x.partition_point(|&v| v <= x) - 1).min(n - 2);
        let t = (x - self.x[j]) / (self.x[j + 1] - self.x[j]);
        self.k[j] + t * (self.k[j + 1] - self.k[j])
    }

    fn mgf(&self, mu: f64) -> f64 {
        let g = |i: usize| libm::exp(mu * self.x[i]) * self.k[i];
        (0..self.x.len() - 1)
            .map(|i| 0.5 * (g(i) + g(i + 1)) * (self.x[i + 1] - self.x[i]))
            .sum()
    }

    /// Exact integral of the piecewise-linear interpolant over `[a, ∞)`.
    fn mass_tail(&self, a: f64) -> f64 {
        let n = self.x.len();
        let mut total = 0.0;
        for i in 0..n - 1 {
            let (x0, x1) = (self.x[i], self.x[i + 1]);
            if x1 <= a {
                continue;
            }
            let lo = if x0 < a { a } else { x0 };
            let (f_lo, f_hi) = (self.density(lo), self.k[i + 1]);
            total += 0.5 * (f_lo + f_hi) * (x1 - lo);
        }
        total
    }
}
