//! Uniform 1-D grids, density fields, dispersal kernels and convolution.
//!
//! A [`DensityField`] samples a function on a truncated interval and carries a
//! constant value on each side standing in for the rest of the line. All
//! quadrature treats the field as a sequence on the infinite lattice
//! `x_min + i·dx`, `i ∈ ℤ`, padded with those constants.

mod convolve;
mod kernel;

pub(crate) use convolve::wide_kernel_warning;
pub use convolve::{convolve, Convolution, Stencil};
pub use kernel::{KernelSpec, KernelTable, KERNEL_TAIL_MASS};

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpatialError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid kernel: {0}")]
    InvalidKernel(alloc::string::String),
    #[error("mu = {mu} outside the kernel MGF domain (-{limit}, {limit})")]
    Domain { mu: f64, limit: f64 },
    #[error("field has {got} values but the grid has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field value at index {0} is negative or not finite")]
    InvalidValue(usize),
}

/// Uniform grid `x_i = x_min + i·dx`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    dx: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, dx: f64, n: usize) -> Result<Self, SpatialError> {
        if !x_min.is_finite() || !dx.is_finite() {
            return Err(SpatialError::InvalidGrid("non-finite coordinate"));
        }
        if dx <= 0.0 {
            return Err(SpatialError::InvalidGrid("dx must be positive"));
        }
        if n < 2 {
            return Err(SpatialError::InvalidGrid("need at least two points"));
        }
        Ok(Self { x_min, dx, n })
    }

    /// `n` points spanning `[x_min, x_max]`.
    pub fn from_range(x_min: f64, x_max: f64, n: usize) -> Result<Self, SpatialError> {
        if n < 2 {
            return Err(SpatialError::InvalidGrid("need at least two points"));
        }
        if !(x_max > x_min) {
            return Err(SpatialError::InvalidGrid("x_max must exceed x_min"));
        }
        Self::new(x_min, (x_max - x_min) / (n - 1) as f64, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Largest index whose point is `<= x`, clamped to the grid.
    pub fn index_at_or_below(&self, x: f64) -> usize {
        let t = libm::floor((x - self.x_min) / self.dx);
        if t <= 0.0 {
            0
        } else {
            (t as usize).min(self.n - 1)
        }
    }
}

/// Population density sampled on a [`Grid`], with constant extensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub ext_left: f64,
    pub ext_right: f64,
}

impl DensityField {
    /// Checks length, finiteness and non-negativity.
    pub fn new(
        grid: Grid,
        values: Vec<f64>,
        ext_left: f64,
        ext_right: f64,
    ) -> Result<Self, SpatialError> {
        if values.len() != grid.len() {
            return Err(SpatialError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SpatialError::InvalidValue(i));
        }
        if !(ext_left.is_finite() && ext_left >= 0.0) {
            return Err(SpatialError::InvalidValue(0));
        }
        if !(ext_right.is_finite() && ext_right >= 0.0) {
            return Err(SpatialError::InvalidValue(values.len() - 1));
        }
        Ok(Self {
            grid,
            values,
            ext_left,
            ext_right,
        })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: alloc::vec![value; grid.len()],
            ext_left: value,
            ext_right: value,
        }
    }

    /// Samples `f` on the grid. Extensions are `f(-inf)`/`f(+inf)` as given.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64, ext_left: f64, ext_right: f64) -> Self {
        Self {
            grid,
            values: grid.points().map(f).collect(),
            ext_left,
            ext_right,
        }
    }

    /// `level` for `x < at`, zero for `x > at`, `level/2` on a grid point equal to `at`.
    pub fn step(grid: Grid, level: f64, at: f64) -> Self {
        Self::from_fn(
            grid,
            |x| {
                if x < at {
                    level
                } else if x > at {
                    0.0
                } else {
                    level / 2.0
                }
            },
            level,
            0.0,
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether `0 <= u <= cap` everywhere, extensions included.
    pub fn is_bounded_by(&self, cap: f64) -> bool {
        self.values
            .iter()
            .chain([&self.ext_left, &self.ext_right])
            .all(|v| (0.0..=cap).contains(v))
    }

    /// Largest `u[i+1] - u[i]`, including the steps to the extensions
    /// (zero or negative for a non-increasing field).
    pub fn max_increase(&self) -> f64 {
        let n = self.values.len();
        let mut worst = self.values[0] - self.ext_left;
        for w in self.values.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
        worst.max(self.ext_right - self.values[n - 1])
    }

    pub(crate) fn view(&self) -> View<'_> {
        View::new(
            &self.values,
            self.ext_left,
            Tail::Constant(self.ext_right),
            self.grid.dx,
        )
    }
}

/// Sup-norm of `a - b` over the index range `range`.
pub(crate) fn sup_diff(a: &[f64], b: &[f64], range: core::ops::Range<usize>) -> f64 {
    a[range.clone()]
        .iter()
        .zip(&b[range])
        .map(|(x, y)| libm::fabs(x - y))
        .fold(0.0, f64::max)
}

/// How a field continues to the right of its last sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Tail {
    Constant(f64),
    /// `u_last · exp(-rate·(x - x_last))`.
    Exponential {
        rate: f64,
    },
    /// `exp(-rate·x)·ψ(x)` with `ψ` continued linearly from the last two samples.
    LinearLog {
        rate: f64,
    },
}

/// Read-only access to a field on the whole lattice.
#[derive(Debug, Clone, Copy)]
pub(crate) struct View<'a> {
    values: &'a [f64],
    left: f64,
    right: Tail,
    dx: f64,
    /// Per-cell ratio of `ψ` at the right edge, for [`Tail::LinearLog`].
    psi_ratio: f64,
}

impl<'a> View<'a> {
    pub(crate) fn new(values: &'a [f64], left: f64, right: Tail, dx: f64) -> Self {
        let n = values.len();
        let psi_ratio = match right {
            Tail::LinearLog { rate } if n >= 2 && values[n - 2] > 0.0 => {
                let grow = libm::exp(rate * dx);
                (values[n - 1] / values[n - 2] * grow).min(grow)
            }
            _ => 1.0,
        };
        Self {
            values,
            left,
            right,
            dx,
            psi_ratio,
        }
    }

    #[inline]
    pub(crate) fn at(&self, j: isize) -> f64 {
        let n = self.values.len() as isize;
        if j < 0 {
            self.left
        } else if j < n {
            self.values[j as usize]
        } else {
            let last = self.values[(n - 1) as usize];
            let steps = (j - n + 1) as f64;
            match self.right {
                Tail::Constant(v) => v,
                Tail::Exponential { rate } => last * libm::exp(-rate * steps * self.dx),
                Tail::LinearLog { rate } => {
                    let psi = (1.0 + steps * (self.psi_ratio - 1.0)).max(0.0);
                    last * psi * libm::exp(-rate * steps * self.dx)
                }
            }
        }
    }

    /// Samples `u(x_i + offset·dx)` for `i = start .. start + len`, linearly
    /// interpolating between lattice values.
    pub(crate) fn shifted(&self, offset: f64, start: isize, len: usize) -> Vec<f64> {
        let whole = libm::floor(offset);
        let mut frac = offset - whole;
        let mut base = whole as isize;
        // Grid-aligned shifts are exact.
        if frac < 1e-9 {
            frac = 0.0;
        } else if frac > 1.0 - 1e-9 {
            frac = 0.0;
            base += 1;
        }
        let mut out = Vec::with_capacity(len);
        let n = self.values.len() as isize;
        for i in 0..len as isize {
            let j = start + i + base;
            let v = if frac == 0.0 {
                self.at(j)
            } else if j >= 0 && j + 1 < n {
                let a = self.values[j as usize];
                let b = self.values[j as usize + 1];
                a + frac * (b - a)
            } else {
                let a = self.at(j);
                a + frac * (self.at(j + 1) - a)
            };
            out.push(v);
        }
        out
    }
}

/// `w(x_i) = u(x_i + c)`, linearly interpolated; beyond the grid the
/// extensions are used. Extensions of the result are those of `u`.
pub fn shift_sample(u: &DensityField, c: f64) -> DensityField {
    let values = u.view().shifted(c / u.grid.dx, 0, u.len());
    DensityField {
        grid: u.grid,
        values,
        ext_left: u.ext_left,
        ext_right: u.ext_right,
    }
}
