use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{DensityField, KernelSpec, SpatialError, View};

/// Kernel weights on the lattice `m·dx`, `|m| <= half_width`.
///
/// The weights are the trapezoidal samples `dx·K(m·dx)` renormalized to sum to
/// one, so constants are reproduced exactly and the dropped tail mass (at most
/// [`super::KERNEL_TAIL_MASS`]) is redistributed rather than lost.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    weights: Vec<f64>,
    half_width: usize,
    dx: f64,
}

impl Stencil {
    pub fn new(kernel: &KernelSpec, dx: f64) -> Result<Self, SpatialError> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(SpatialError::InvalidGrid("dx must be positive"));
        }
        let half_width = libm::ceil(kernel.effective_reach() / dx) as usize;
        let mut weights: Vec<f64> = (0..=2 * half_width)
            .map(|i| kernel.density((i as f64 - half_width as f64) * dx))
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(SpatialError::InvalidKernel(format!(
                "kernel has no mass on the lattice with spacing {dx}"
            )));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self {
            weights,
            half_width,
            dx,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Distance covered by the stencil.
    pub fn reach(&self) -> f64 {
        self.half_width as f64 * self.dx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Discrete MGF `Σ w_m e^{λ m dx}`.
    pub fn mgf(&self, lambda: f64) -> f64 {
        let h = self.half_width as f64;
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * libm::exp(lambda * (i as f64 - h) * self.dx))
            .sum()
    }

    /// Convolves a padded sequence: `out[i] = Σ_m w_m · padded[i + 2L - m]`,
    /// i.e. the stencil centered on `padded[i + L]`. `padded` must hold
    /// `out_len + 2L` values.
    pub(crate) fn apply_padded(&self, padded: &[f64], out_len: usize) -> Vec<f64> {
        debug_assert!(padded.len() >= out_len + 2 * self.half_width);
        let span = self.weights.len();
        // The stencil is symmetric, so a plain dot product with the window suffices.
        (0..out_len)
            .map(|i| {
                padded[i..i + span]
                    .iter()
                    .zip(&self.weights)
                    .map(|(u, w)| u * w)
                    .sum()
            })
            .collect()
    }

    /// Convolution of `view` sampled at lattice indices `start .. start + len`.
    pub(crate) fn apply_view(&self, view: &View<'_>, start: isize, len: usize) -> Vec<f64> {
        let l = self.half_width as isize;
        let padded: Vec<f64> = (start - l..start + len as isize + l)
            .map(|j| view.at(j))
            .collect();
        self.apply_padded(&padded, len)
    }
}

/// Result of [`convolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Convolution {
    pub field: DensityField,
    /// Set when the kernel stencil is wider than the grid, so most of the
    /// result comes from the constant extensions.
    pub warning: Option<String>,
}

/// `v(x_i) = ∫ K(|x_i - y|) u(y) dy` by trapezoidal quadrature over the
/// lattice, with the constant extensions of `u` standing in beyond the grid.
pub fn convolve(u: &DensityField, kernel: &KernelSpec) -> Result<Convolution, SpatialError> {
    let stencil = Stencil::new(kernel, u.grid.dx())?;
    let values = stencil.apply_view(&u.view(), 0, u.len());
    Ok(Convolution {
        field: DensityField {
            grid: u.grid,
            values,
            ext_left: u.ext_left,
            ext_right: u.ext_right,
        },
        warning: wide_kernel_warning(&stencil, u.len()),
    })
}

pub(crate) fn wide_kernel_warning(stencil: &Stencil, n: usize) -> Option<String> {
    (stencil.half_width() >= n).then(|| {
        format!(
            "kernel reach {:.4} exceeds the grid length {:.4}; results are dominated by the boundary extensions",
            stencil.reach(),
            (n - 1) as f64 * stencil.dx()
        )
    })
}
