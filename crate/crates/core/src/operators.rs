//! The one-generation map `Q`, its traveling-frame split `Q_c = B_c + C_c`,
//! the contraction inverse `G_c = (I - B_c)^{-1}` and the Weinberger map `R_c`.
//!
//! All operators act on a [`DensityField`] over the grid stored in the
//! [`OperatorContext`] and transform the constant extensions alongside the grid
//! values, so that a constant field stays a constant field.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{validate_params, Fecundity, ModelParams};
use crate::spatial::{
    sup_diff, wide_kernel_warning, DensityField, Grid, KernelSpec, SpatialError, Stencil, View,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("field grid {got:?} differs from the context grid {expected:?}")]
    GridMismatch { expected: Grid, got: Grid },
    #[error("contraction condition violated: p_contr = {p_contr} >= 1")]
    ContractionViolated { p_contr: f64 },
    #[error("no convergence after {iterations} iterations (last increment {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// Everything needed to apply the model on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorContext {
    params: ModelParams,
    fecundity: Fecundity,
    k_a: KernelSpec,
    k_j: KernelSpec,
    grid: Grid,
    st_a: Stencil,
    st_j: Stencil,
    pad: usize,
    warning: Option<String>,
}

/// Output of [`OperatorContext::solve_gc`].
#[derive(Debug, Clone, PartialEq)]
pub struct GcSolution {
    pub field: DensityField,
    pub iterations: usize,
    /// `‖u - B_c[u] - w‖_∞`, extensions included.
    pub residual: f64,
}

impl OperatorContext {
    pub fn new(
        params: ModelParams,
        fecundity: Fecundity,
        k_a: KernelSpec,
        k_j: KernelSpec,
        grid: Grid,
    ) -> Result<Self, OperatorError> {
        let report = validate_params(&params);
        if let Some(c) = report.failures().next() {
            return Err(OperatorError::InvalidParams(c.detail.clone()));
        }
        let st_a = Stencil::new(&k_a, grid.dx())?;
        let st_j = Stencil::new(&k_j, grid.dx())?;
        let pad = st_a.half_width().max(st_j.half_width());
        let widest = if st_a.half_width() >= st_j.half_width() {
            &st_a
        } else {
            &st_j
        };
        let warning = wide_kernel_warning(widest, grid.len());
        Ok(Self {
            params,
            fecundity,
            k_a,
            k_j,
            grid,
            st_a,
            st_j,
            pad,
            warning,
        })
    }

    /// Adults and juveniles share one kernel.
    pub fn single_kernel(
        params: ModelParams,
        fecundity: Fecundity,
        kernel: KernelSpec,
        grid: Grid,
    ) -> Result<Self, OperatorError> {
        Self::new(params, fecundity, kernel.clone(), kernel, grid)
    }

    /// The same model on another grid.
    pub fn with_grid(&self, grid: Grid) -> Result<Self, OperatorError> {
        if grid == self.grid {
            return Ok(self.clone());
        }
        Self::new(
            self.params,
            self.fecundity.clone(),
            self.k_a.clone(),
            self.k_j.clone(),
            grid,
        )
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn fecundity(&self) -> &Fecundity {
        &self.fecundity
    }

    pub fn kernel_adult(&self) -> &KernelSpec {
        &self.k_a
    }

    pub fn kernel_juvenile(&self) -> &KernelSpec {
        &self.k_j
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn stencil_adult(&self) -> &Stencil {
        &self.st_a
    }

    pub fn stencil_juvenile(&self) -> &Stencil {
        &self.st_j
    }

    /// Accuracy warning from the kernel stencils, if any.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Lipschitz constant of `B_c`.
    pub fn contraction_constant(&self) -> f64 {
        self.fecundity.growth_lipschitz_bound(&self.params)
    }

    #[inline]
    pub(crate) fn f(&self, u: f64) -> f64 {
        self.fecundity.eval(u, &self.params)
    }

    /// `Q` on a spatially constant density: `s·u + F(u)`.
    pub fn scalar_q(&self, u: f64) -> f64 {
        self.params.s() * u + self.f(u)
    }

    fn scalar_b(&self, u: f64) -> f64 {
        let p = &self.params;
        p.s() * (1.0 - p.p_a()) * u + (1.0 - p.p_j()) * self.f(u)
    }

    fn scalar_c(&self, u: f64) -> f64 {
        let p = &self.params;
        p.s() * p.p_a() * u + p.p_j() * self.f(u)
    }

    fn check(&self, u: &DensityField) -> Result<(), OperatorError> {
        if u.grid != self.grid {
            return Err(OperatorError::GridMismatch {
                expected: self.grid,
                got: u.grid,
            });
        }
        Ok(())
    }

    /// Padded samples `u(x_j + offset·dx)` for `j = -pad .. n + pad`.
    fn padded(&self, view: &View<'_>, offset: f64, start: isize, len: usize) -> Vec<f64> {
        view.shifted(offset, start - self.pad as isize, len + 2 * self.pad)
    }

    /// Dispersal part `s p_A K_A*u + p_J K_J*F(u)` of padded samples.
    fn dispersal(&self, padded: &[f64], fu: &[f64], len: usize) -> Vec<f64> {
        let p = &self.params;
        let (ca, cj) = (p.s() * p.p_a(), p.p_j());
        if self.st_a == self.st_j {
            let mix: Vec<f64> = padded
                .iter()
                .zip(fu)
                .map(|(u, f)| ca * u + cj * f)
                .collect();
            return self.st_a.apply_padded(&mix, len);
        }
        let mut out = alloc::vec![0.0; len];
        for (st, src, coef) in [(&self.st_a, padded, ca), (&self.st_j, fu, cj)] {
            if coef == 0.0 {
                continue;
            }
            let skip = self.pad - st.half_width();
            for (o, v) in out.iter_mut().zip(st.apply_padded(&src[skip..], len)) {
                *o += coef * v;
            }
        }
        out
    }

    /// `Q` of padded samples (`pad` extra values on each side).
    fn q_padded(&self, padded: &[f64], len: usize) -> Vec<f64> {
        let fu: Vec<f64> = padded.iter().map(|&u| self.f(u)).collect();
        let mut out = self.dispersal(padded, &fu, len);
        let p = &self.params;
        let (la, lj) = (p.s() * (1.0 - p.p_a()), 1.0 - p.p_j());
        for (i, o) in out.iter_mut().enumerate() {
            let j = i + self.pad;
            *o += la * padded[j] + lj * fu[j];
        }
        out
    }

    /// `Q[u(· + offset·dx)]` at lattice indices `start .. start + len`, with
    /// the shift taken on the whole lattice (tails included).
    pub(crate) fn q_view(
        &self,
        view: &View<'_>,
        offset: f64,
        start: isize,
        len: usize,
    ) -> Vec<f64> {
        self.q_padded(&self.padded(view, offset, start, len), len)
    }

    /// `shift_sample(u, c)` padded with the constant extensions of `u`.
    fn shifted_padded(&self, u: &DensityField, c: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(u.len() + 2 * self.pad);
        out.extend(core::iter::repeat_n(u.ext_left, self.pad));
        out.extend(u.view().shifted(c / self.grid.dx(), 0, u.len()));
        out.extend(core::iter::repeat_n(u.ext_right, self.pad));
        out
    }

    fn field(&self, values: Vec<f64>, ext_left: f64, ext_right: f64) -> DensityField {
        DensityField {
            grid: self.grid,
            values,
            ext_left,
            ext_right,
        }
    }

    /// `Q[u] = s(1-p_A)u + (1-p_J)F(u) + s p_A K_A*u + p_J K_J*F(u)`.
    pub fn apply_q(&self, u: &DensityField) -> Result<DensityField, OperatorError> {
        self.apply_qc(u, 0.0)
    }

    /// `Q_c[u] = Q[shift_sample(u, c)] = B_c[u] + C_c[u]`.
    pub fn apply_qc(&self, u: &DensityField, c: f64) -> Result<DensityField, OperatorError> {
        self.check(u)?;
        let values = self.q_padded(&self.shifted_padded(u, c), u.len());
        Ok(self.field(
            values,
            self.scalar_q(u.ext_left),
            self.scalar_q(u.ext_right),
        ))
    }

    /// `B_c[u] = s(1-p_A)u(·+c) + (1-p_J)F(u(·+c))`.
    pub fn apply_bc(&self, u: &DensityField, c: f64) -> Result<DensityField, OperatorError> {
        self.check(u)?;
        let shifted = u.view().shifted(c / self.grid.dx(), 0, u.len());
        let values = shifted.into_iter().map(|v| self.scalar_b(v)).collect();
        Ok(self.field(
            values,
            self.scalar_b(u.ext_left),
            self.scalar_b(u.ext_right),
        ))
    }

    /// `C_c[u] = s p_A (K_A*u)(·+c) + p_J (K_J*F(u))(·+c)`.
    ///
    /// Evaluated as the dispersal part of `Q` applied to `shift_sample(u, c)`,
    /// so `B_c + C_c` and `Q_c` agree exactly.
    pub fn apply_cc(&self, u: &DensityField, c: f64) -> Result<DensityField, OperatorError> {
        self.check(u)?;
        let padded = self.shifted_padded(u, c);
        let fu: Vec<f64> = padded.iter().map(|&v| self.f(v)).collect();
        let values = self.dispersal(&padded, &fu, u.len());
        Ok(self.field(
            values,
            self.scalar_c(u.ext_left),
            self.scalar_c(u.ext_right),
        ))
    }

    /// `R_c[u] = max(φ, Q[u(· + c)])`.
    pub fn apply_rc(
        &self,
        u: &DensityField,
        c: f64,
        phi: &DensityField,
    ) -> Result<DensityField, OperatorError> {
        self.check(phi)?;
        let mut q = self.apply_qc(u, c)?;
        for (v, p) in q.values.iter_mut().zip(&phi.values) {
            *v = v.max(*p);
        }
        q.ext_left = q.ext_left.max(phi.ext_left);
        q.ext_right = q.ext_right.max(phi.ext_right);
        Ok(q)
    }

    /// Solves `u = B_c[u] + w` by Picard iteration from `u_0 = w`.
    ///
    /// Returns the first iterate `u_k` whose increment `‖u_{k+1} - u_k‖_∞`
    /// (which equals the residual `‖u_k - B_c[u_k] - w‖_∞`) is at most `tol`.
    pub fn solve_gc(
        &self,
        w: &DensityField,
        c: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<GcSolution, OperatorError> {
        self.check(w)?;
        let p_contr = self.contraction_constant();
        if !(p_contr < 1.0) {
            return Err(OperatorError::ContractionViolated { p_contr });
        }
        let mut u = w.clone();
        let mut residual = f64::INFINITY;
        for k in 0..=max_iter {
            let b = self.apply_bc(&u, c)?;
            let next = self.field(
                b.values.iter().zip(&w.values).map(|(x, y)| x + y).collect(),
                b.ext_left + w.ext_left,
                b.ext_right + w.ext_right,
            );
            residual = sup_diff(&next.values, &u.values, 0..u.len())
                .max(libm::fabs(next.ext_left - u.ext_left))
                .max(libm::fabs(next.ext_right - u.ext_right));
            if residual <= tol {
                return Ok(GcSolution {
                    field: u,
                    iterations: k,
                    residual,
                });
            }
            u = next;
        }
        Err(OperatorError::NoConvergence {
            iterations: max_iter,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const M: f64 = 100.0;

    fn grid() -> Grid {
        Grid::from_range(-20.0, 20.0, 401).unwrap()
    }

    fn ctx(p_a: f64, p_j: f64) -> OperatorContext {
        OperatorContext::single_kernel(
            ModelParams::new(0.5, 2.0, M, p_a, p_j).unwrap(),
            Fecundity::BevertonHolt,
            KernelSpec::gaussian(1.0).unwrap(),
            grid(),
        )
        .unwrap()
    }

    fn two_kernel(p_a: f64, p_j: f64) -> OperatorContext {
        OperatorContext::new(
            ModelParams::new(0.5, 2.0, M, p_a, p_j).unwrap(),
            Fecundity::BevertonHolt,
            KernelSpec::gaussian(0.5).unwrap(),
            KernelSpec::laplace(1.5).unwrap(),
            grid(),
        )
        .unwrap()
    }

    fn monotone(steps: &[f64], left: f64) -> DensityField {
        let mut vals = alloc::vec![0.0; steps.len()];
        let mut acc = 0.0;
        for i in (0..steps.len()).rev() {
            acc += steps[i];
            vals[i] = acc.min(left);
        }
        DensityField::new(grid(), vals, left, 0.0).unwrap()
    }

    #[test]
    fn fixed_points_of_q() {
        for c in [ctx(0.8, 0.8), two_kernel(0.3, 0.9)] {
            let z = c.apply_q(&DensityField::constant(grid(), 0.0)).unwrap();
            assert!(z.values.iter().all(|v| *v == 0.0));
            let m = c.apply_q(&DensityField::constant(grid(), M)).unwrap();
            assert!(m.values.iter().all(|v| (v - M).abs() <= 1e-8 * M));
            assert!((m.ext_left - M).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_is_scalar_map() {
        let c = ctx(0.3, 0.6);
        let q = c.apply_q(&DensityField::constant(grid(), 50.0)).unwrap();
        let expect = 25.0 + 100.0 / 3.0;
        assert!(q.values.iter().all(|v| (v - expect).abs() < 1e-9));
        assert!(expect > 50.0);
        let big = c.apply_q(&DensityField::constant(grid(), 150.0)).unwrap();
        assert!(big.values.iter().all(|v| *v < 150.0));
    }

    #[test]
    fn bc_and_cc_on_constants() {
        let c = ctx(0.8, 0.6);
        let m = DensityField::constant(grid(), M);
        let b = c.apply_bc(&m, 0.37).unwrap();
        let expect_b = (0.5 * 0.2 + 0.4 * 0.5) * M;
        assert!(b.values.iter().all(|v| (v - expect_b).abs() < 1e-12));
        let cc = c.apply_cc(&m, 0.37).unwrap();
        let expect_c = (0.5 * 0.8 + 0.6 * 0.5) * M;
        assert!(cc.values.iter().all(|v| (v - expect_c).abs() <= 1e-8 * M));
        let full = ctx(1.0, 1.0);
        let step = DensityField::step(grid(), M, 0.0);
        assert!(full
            .apply_bc(&step, 0.0)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == 0.0));
        let zero = DensityField::constant(grid(), 0.0);
        assert!(c
            .apply_cc(&zero, 1.0)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn solve_gc_constant_examples() {
        let c = ctx(0.8, 0.8);
        let zero = DensityField::constant(grid(), 0.0);
        let sol = c.solve_gc(&zero, 0.5, 1e-8 * M, 100).unwrap();
        assert!(sol.field.values.iter().all(|v| *v == 0.0));
        assert_eq!(sol.iterations, 0);
        let w = DensityField::constant(grid(), M * (1.0 - 0.5 * 0.2 - 0.2 * 0.5));
        let sol = c.solve_gc(&w, 0.5, 1e-10 * M, 1000).unwrap();
        assert!(sol.field.values.iter().all(|v| (v - M).abs() < 1e-8 * M));
    }

    #[test]
    fn solve_gc_rejects_non_contraction() {
        let c = ctx(0.0, 0.0);
        let w = DensityField::constant(grid(), 1.0);
        assert_eq!(
            c.solve_gc(&w, 0.0, 1e-8, 10),
            Err(OperatorError::ContractionViolated { p_contr: 1.5 })
        );
    }

    #[test]
    fn rc_examples() {
        let c = ctx(0.8, 0.8);
        let phi = DensityField::from_fn(grid(), |x| if x < 0.0 { 30.0 } else { 0.0 }, 30.0, 0.0);
        let r = c
            .apply_rc(&DensityField::constant(grid(), 0.0), 0.7, &phi)
            .unwrap();
        assert_eq!(r.values, phi.values);
        let r = c
            .apply_rc(&DensityField::constant(grid(), M), 0.7, &phi)
            .unwrap();
        assert!(r.values.iter().all(|v| (v - M).abs() <= 1e-8 * M));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let c = ctx(0.8, 0.8);
        let other = DensityField::constant(Grid::from_range(0.0, 1.0, 11).unwrap(), 1.0);
        assert!(matches!(
            c.apply_q(&other),
            Err(OperatorError::GridMismatch { .. })
        ));
    }

    fn steps() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..1.0f64, 401)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn split_identity(st in steps(), c in -3.0..3.0f64, p_a in 0.0..1.0f64, p_j in 0.0..1.0f64) {
            for cx in [ctx(p_a, p_j), two_kernel(p_a, p_j)] {
                let u = monotone(&st, M);
                let b = cx.apply_bc(&u, c).unwrap();
                let cc = cx.apply_cc(&u, c).unwrap();
                let q = cx.apply_q(&crate::spatial::shift_sample(&u, c)).unwrap();
                let qc = cx.apply_qc(&u, c).unwrap();
                for i in 0..u.len() {
                    prop_assert!((b.values[i] + cc.values[i] - q.values[i]).abs() <= 1e-12 * M);
                    prop_assert!((qc.values[i] - q.values[i]).abs() <= 1e-12 * M);
                }
            }
        }

        #[test]
        fn order_preservation(st in steps(), d in steps(), c in -3.0..3.0f64) {
            let cx = two_kernel(0.7, 0.4);
            let lo = monotone(&st, 80.0);
            let mut hi = lo.clone();
            for (h, e) in hi.values.iter_mut().zip(&d) {
                *h = (*h + 20.0 * e).min(M);
            }
            hi.ext_left = M;
            let phi = crate::analysis::initial_phi(&cx, 30.0, 1.0).unwrap();
            let ops: [&dyn Fn(&DensityField) -> DensityField; 4] = [
                &|u| cx.apply_q(u).unwrap(),
                &|u| cx.apply_bc(u, c).unwrap(),
                &|u| cx.apply_cc(u, c).unwrap(),
                &|u| cx.apply_rc(u, c, &phi).unwrap(),
            ];
            for op in ops {
                let (a, b) = (op(&lo), op(&hi));
                for (x, y) in a.values.iter().zip(&b.values) {
                    prop_assert!(x <= y);
                }
            }
        }

        #[test]
        fn upper_linearization_bound(st in steps()) {
            let cx = two_kernel(0.6, 0.7);
            let u = monotone(&st, M);
            let p = cx.params();
            let q = cx.apply_q(&u).unwrap();
            let a = crate::spatial::convolve(&u, cx.kernel_adult()).unwrap().field;
            let j = crate::spatial::convolve(&u, cx.kernel_juvenile()).unwrap().field;
            let lin = p.contraction_constant();
            let kr = p.k() * p.r();
            for i in 0..u.len() {
                let bound = lin * u.values[i] + p.s() * p.p_a() * a.values[i] + p.p_j() * kr * j.values[i];
                prop_assert!(q.values[i] <= bound + 1e-9 * M);
            }
        }

        #[test]
        fn gc_residual_and_iteration_bound(st in steps(), c in -2.0..2.0f64, p_a in 0.5..1.0f64, p_j in 0.6..1.0f64) {
            let cx = ctx(p_a, p_j);
            let p = cx.contraction_constant();
            prop_assume!(p > 0.0 && p <= 0.9);
            let w = monotone(&st, (1.0 - p) * M);
            let tol = 1e-8 * M;
            let sol = cx.solve_gc(&w, c, tol, 10_000).unwrap();
            let b = cx.apply_bc(&sol.field, c).unwrap();
            let direct = sol.field.values.iter().zip(&b.values).zip(&w.values)
                .map(|((u, b), w)| (u - b - w).abs()).fold(0.0, f64::max);
            prop_assert!(direct <= tol * (1.0 + 1e-9));
            let wn = w.values.iter().fold(w.ext_left, |a, b| a.max(*b));
            let bound = libm::ceil(libm::log(tol / wn) / libm::log(p)) + 1.0;
            prop_assert!(sol.iterations as f64 <= bound.max(0.0));
            prop_assert!(sol.field.is_bounded_by(M * (1.0 + 1e-12)));
        }
    }
}
