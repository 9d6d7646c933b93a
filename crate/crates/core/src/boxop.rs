//! Finite-difference `□^λ_{LL}` on tensor grids, and the kernel checks built on it.
//!
//! In adapted coordinates the operator is
//!
//! ```text
//! □^λ_{LL} = −¼Δ + Σ_k iμ_k (y_k ∂_{x_k} − x_k ∂_{y_k}) + Σ_k μ_k² (x_k² + y_k²)
//!            − (Σ_{k∈L} μ_k − Σ_{k∉L} μ_k),
//! ```
//!
//! with axes ordered `x_1, y_1, …, x_n, y_n`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::{FormIndex, Phase, RhoHat, WeightedHeatKernel};
use crate::quadrature::{integrate, integrate_indexed, QuadratureSpec, Rule, MAX_NODES};
use crate::spectral::SpectralData;
use crate::{Error, Result};

/// Equispaced tensor grid on `Π_i [−R_i, R_i]` with the same node count per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: Vec<f64>,
    points: usize,
}

impl GridSpec {
    pub fn new(half_width: Vec<f64>, points: usize) -> Result<Self> {
        if half_width.is_empty() || !half_width.len().is_multiple_of(2) {
            return Err(Error::input("grid needs an even, nonzero number of axes (x_k, y_k pairs)"));
        }
        if half_width.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::input("grid half-widths must be positive and finite"));
        }
        if points < 8 {
            return Err(Error::input("grid needs at least 8 points per axis"));
        }
        Ok(Self { half_width, points })
    }

    /// `[−R, R]^{2n}`.
    pub fn cube(n: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::new(vec![half_width; 2 * n], points)
    }

    /// Axis count `2n`.
    pub fn dim(&self) -> usize {
        self.half_width.len()
    }

    pub fn n(&self) -> usize {
        self.dim() / 2
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> &[f64] {
        &self.half_width
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / (self.points - 1) as f64
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        -self.half_width[axis] + self.spacing(axis) * i as f64
    }

    /// Node count, or `None` on overflow.
    pub fn len(&self) -> Option<usize> {
        (0..self.dim()).try_fold(1usize, |acc, _| acc.checked_mul(self.points))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of a lexicographic node index (axis 0 slowest).
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for ax in (0..self.dim()).rev() {
            out[ax] = idx % self.points;
            idx /= self.points;
        }
        out
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn node(&self, multi: &[usize]) -> Vec<f64> {
        multi.iter().enumerate().map(|(ax, &i)| self.coord(ax, i)).collect()
    }

    /// The same box with the spacing halved.
    pub fn refined(&self) -> Self {
        Self { half_width: self.half_width.clone(), points: 2 * (self.points - 1) + 1 }
    }

    /// The trapezoid quadrature on this grid.
    pub fn quadrature(&self, tail_rate: f64) -> QuadratureSpec {
        QuadratureSpec {
            half_width: self.half_width.clone(),
            points: vec![self.points; self.dim()],
            rule: Rule::Trapezoid,
            tail_rate,
        }
    }
}

/// Complex samples on a [`GridSpec`], lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if grid.len() != Some(values.len()) {
            return Err(Error::input(format!("grid has {:?} nodes but {} values were given", grid.len(), values.len())));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let len = grid.len().filter(|&l| l <= MAX_NODES).ok_or_else(|| {
            Error::input(format!("grid with {} points on {} axes exceeds the node budget", grid.points, grid.dim()))
        })?;
        let values = (0..len)
            .into_par_iter()
            .map(|i| f(&grid.node(&grid.multi_index(i))))
            .collect();
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, multi: &[usize]) -> Complex64 {
        self.values[self.grid.linear_index(multi)]
    }
}

/// Central difference order for derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// 3-point stencils, one invalid boundary layer.
    Second,
    /// 5-point stencils, two invalid boundary layers.
    Fourth,
}

impl Stencil {
    /// Width of the boundary ring where the stencil does not fit.
    pub fn ring(self) -> usize {
        match self {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
        }
    }

    // (f'', f') along one axis from samples at offsets −2..=2.
    fn derivatives(self, h: f64, sample: impl Fn(i32) -> Complex64, center: Complex64) -> (Complex64, Complex64) {
        match self {
            Stencil::Second => {
                let (p, m) = (sample(1), sample(-1));
                ((p - 2.0 * center + m) / (h * h), (p - m) / (2.0 * h))
            }
            Stencil::Fourth => {
                let (p1, m1, p2, m2) = (sample(1), sample(-1), sample(2), sample(-2));
                (
                    (-p2 + 16.0 * p1 - 30.0 * center + 16.0 * m1 - m2) / (12.0 * h * h),
                    (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h),
                )
            }
        }
    }
}

/// Coefficients of `□^λ_{LL}`: `μ_k` with the zero block set to 0, and the constant shift.
#[derive(Debug, Clone, PartialEq)]
struct BoxCoefficients {
    mu: Vec<f64>,
    shift: f64,
}

impl BoxCoefficients {
    fn new(spectral: &SpectralData, form: &FormIndex) -> Result<Self> {
        if form.n() != spectral.n() {
            return Err(Error::input("form index and spectral data have different n"));
        }
        let mut mu = spectral.nonzero_mu().to_vec();
        mu.resize(spectral.n(), 0.0);
        let shift = mu
            .iter()
            .enumerate()
            .map(|(k, m)| if form.contains(k + 1) { *m } else { -*m })
            .sum();
        Ok(Self { mu, shift })
    }

    // □ at one node; `sample(axis, offset)` reads the function at a stencil neighbour.
    fn apply(
        &self,
        coords: &[f64],
        h: &[f64],
        stencil: Stencil,
        center: Complex64,
        sample: impl Fn(usize, i32) -> Complex64,
    ) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let mut lap = Complex64::new(0.0, 0.0);
        let mut rest = Complex64::new(0.0, 0.0);
        for (k, &mu) in self.mu.iter().enumerate() {
            let (ax, ay) = (2 * k, 2 * k + 1);
            let (dxx, dx) = stencil.derivatives(h[ax], |o| sample(ax, o), center);
            let (dyy, dy) = stencil.derivatives(h[ay], |o| sample(ay, o), center);
            lap += dxx + dyy;
            let (x, y) = (coords[ax], coords[ay]);
            rest += i * mu * (y * dx - x * dy) + mu * mu * (x * x + y * y) * center;
        }
        -0.25 * lap + rest - self.shift * center
    }
}

/// `□^λ_{LL} f` with second-order stencils; the boundary ring is NaN.
pub fn apply_box_ll_lambda(f: &GridFunction, spectral: &SpectralData, form: &FormIndex) -> Result<GridFunction> {
    apply_box_ll_lambda_with(f, spectral, form, Stencil::Second)
}

/// `□^λ_{LL} f` with the chosen stencil; the boundary ring is NaN.
pub fn apply_box_ll_lambda_with(
    f: &GridFunction,
    spectral: &SpectralData,
    form: &FormIndex,
    stencil: Stencil,
) -> Result<GridFunction> {
    let grid = f.grid();
    if grid.n() != spectral.n() {
        return Err(Error::input(format!("grid has {} axes, expected 2n = {}", grid.dim(), 2 * spectral.n())));
    }
    let coef = BoxCoefficients::new(spectral, form)?;
    let ring = stencil.ring();
    let p = grid.points();
    let h: Vec<f64> = (0..grid.dim()).map(|a| grid.spacing(a)).collect();
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let values = (0..f.values.len())
        .into_par_iter()
        .map(|idx| {
            let multi = grid.multi_index(idx);
            if multi.iter().any(|&i| i < ring || i + ring >= p) {
                return nan;
            }
            let coords = grid.node(&multi);
            coef.apply(&coords, &h, stencil, f.values[idx], |ax, o| {
                let mut m = multi.clone();
                m[ax] = (m[ax] as i64 + o as i64) as usize;
                f.get(&m)
            })
        })
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// Settings for [`pde_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualOptions {
    /// Step of the central difference in `s`.
    pub hs: f64,
    pub stencil: Stencil,
    /// Largest number of probe nodes; the probe stride grows until this fits.
    pub max_probes: usize,
    /// Fixed probe stride, overriding `max_probes`.
    pub stride: Option<usize>,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self { hs: 1e-4, stencil: Stencil::Second, max_probes: 2_500_000, stride: None }
    }
}

/// Output of [`pde_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `max |∂_sρ + □ρ| / max |∂_sρ|` over the probes.
    pub residual: f64,
    pub max_abs_residual: f64,
    pub max_time_derivative: f64,
    pub probes: usize,
    pub stride: usize,
}

// Interior indices on one axis, on a lattice of the given stride through the centre node.
fn probe_axis(points: usize, ring: usize, stride: usize) -> Vec<usize> {
    let c = (points - 1) / 2;
    (ring..points - ring).filter(|&i| (i as i64 - c as i64).rem_euclid(stride as i64) == 0).collect()
}

/// Normalized residual of `∂_s ρ̂ + □^λ_{LL} ρ̂` at `s`, evaluated node by node.
///
/// The kernel is sampled directly at each probe and its stencil neighbours,
/// so no grid array is stored; in high dimension only a strided lattice of
/// interior nodes through the centre is probed.
pub fn pde_residual(
    s: f64,
    spectral: &SpectralData,
    form: &FormIndex,
    grid: &GridSpec,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    if grid.n() != spectral.n() {
        return Err(Error::input(format!("grid has {} axes, expected 2n = {}", grid.dim(), 2 * spectral.n())));
    }
    if !(opts.hs > 0.0) || opts.hs >= s {
        return Err(Error::input("time step must satisfy 0 < hs < s"));
    }
    let rho = RhoHat::new(spectral.clone(), form.clone())?;
    let coef = BoxCoefficients::new(spectral, form)?;
    let d = grid.dim();
    let ring = opts.stencil.ring();
    if grid.points() <= 2 * ring {
        return Err(Error::input("grid too small for the stencil"));
    }
    let stride = match opts.stride {
        Some(st) if st >= 1 => st,
        Some(_) => return Err(Error::input("probe stride must be at least 1")),
        None => (1..grid.points())
            .find(|&st| {
                let k = probe_axis(grid.points(), ring, st).len();
                (0..d).try_fold(1usize, |acc, _| acc.checked_mul(k)).is_some_and(|c| c <= opts.max_probes)
            })
            .unwrap_or(grid.points()),
    };
    let axis = probe_axis(grid.points(), ring, stride);
    let k = axis.len();
    let probes = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(k)).filter(|&c| c <= MAX_NODES).ok_or_else(|| {
        Error::input("probe lattice exceeds the node budget")
    })?;
    let h: Vec<f64> = (0..d).map(|a| grid.spacing(a)).collect();
    let n = grid.n();

    let eval = |pt: &[f64], t: f64| -> Result<f64> {
        let x: Vec<f64> = (0..n).map(|j| pt[2 * j]).collect();
        let y: Vec<f64> = (0..n).map(|j| pt[2 * j + 1]).collect();
        rho.eval_adapted(t, &x, &y)
    };

    let per_probe: Vec<(f64, f64)> = (0..probes)
        .into_par_iter()
        .map(|pi| -> Result<(f64, f64)> {
            let mut rem = pi;
            let mut multi = vec![0usize; d];
            for ax in (0..d).rev() {
                multi[ax] = axis[rem % k];
                rem /= k;
            }
            let coords = grid.node(&multi);
            let center = eval(&coords, s)?;
            let dt = (eval(&coords, s + opts.hs)? - eval(&coords, s - opts.hs)?) / (2.0 * opts.hs);
            let failure = std::cell::RefCell::new(None);
            let boxed = coef.apply(&coords, &h, opts.stencil, Complex64::new(center, 0.0), |ax, o| {
                let mut p = coords.clone();
                p[ax] = grid.coord(ax, (multi[ax] as i64 + o as i64) as usize);
                match eval(&p, s) {
                    Ok(v) => Complex64::new(v, 0.0),
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        Complex64::new(f64::NAN, 0.0)
                    }
                }
            });
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            Ok(((boxed + dt).norm(), dt.abs()))
        })
        .collect::<Result<_>>()?;

    let max_abs_residual = per_probe.iter().map(|p| p.0).fold(0.0, f64::max);
    let max_time_derivative = per_probe.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(ResidualReport {
        residual: max_abs_residual / max_time_derivative,
        max_abs_residual,
        max_time_derivative,
        probes,
        stride,
    })
}

/// Residuals on `grid` and on its refinement, probed at the same physical nodes.
pub fn residual_refinement(
    s: f64,
    spectral: &SpectralData,
    form: &FormIndex,
    grid: &GridSpec,
    opts: &ResidualOptions,
) -> Result<(ResidualReport, ResidualReport)> {
    let coarse = pde_residual(s, spectral, form, grid, opts)?;
    let fine_opts = ResidualOptions { stride: Some(2 * coarse.stride), ..*opts };
    let fine = pde_residual(s, spectral, form, &grid.refined(), &fine_opts)?;
    Ok((coarse, fine))
}

/// Settings for [`heat_apply`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatApplyOptions {
    pub tol: f64,
    pub phase: Phase,
}

impl Default for HeatApplyOptions {
    fn default() -> Self {
        Self { tol: 1e-8, phase: Phase::Standard }
    }
}

/// `∫ H(s, z, w) f(w) dw` at each output point, trapezoid rule on the grid of `f`.
///
/// The grid of `f` is in original coordinates: axes `Re w_1, Im w_1, …`.
/// Fails with a numeric error if the spacing cannot resolve the kernel at
/// `s` or the boundary tail exceeds `tol·max(1, max|f|)`.
pub fn heat_apply(
    f: &GridFunction,
    s: f64,
    kernel: &WeightedHeatKernel,
    points: &[Vec<Complex64>],
    opts: &HeatApplyOptions,
) -> Result<Vec<Complex64>> {
    let grid = f.grid();
    let n = kernel.quadric().n();
    if grid.n() != n {
        return Err(Error::input(format!("grid has {} axes, expected 2n = {}", grid.dim(), 2 * n)));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("time s must be positive and finite, got {s}")));
    }
    let (rate_min, rate_max) = kernel.rate_bounds(s);
    let log_tol = (1.0 / opts.tol).ln();
    for ax in 0..grid.dim() {
        let h = grid.spacing(ax);
        let margin = std::f64::consts::PI.powi(2) / (rate_max * h * h);
        if margin < log_tol {
            return Err(Error::numeric(
                format!("grid spacing {h:.3e} cannot resolve the kernel at s = {s}"),
                (-margin).exp(),
            ));
        }
    }
    let fmax = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let quad = grid.quadrature(rate_min);
    points
        .iter()
        .map(|z| {
            if z.len() != n {
                return Err(Error::input(format!("output point has length {}, expected {n}", z.len())));
            }
            let res = integrate_indexed(
                |w, idx| {
                    let fv = f.values[idx];
                    if fv == Complex64::new(0.0, 0.0) {
                        return fv;
                    }
                    let wz: Vec<Complex64> = (0..n).map(|k| Complex64::new(w[2 * k], w[2 * k + 1])).collect();
                    kernel.eval_with(s, z, &wz, opts.phase).map(|h| h * fv).unwrap_or(Complex64::new(f64::NAN, 0.0))
                },
                &quad,
            )?;
            if res.tail_estimate > opts.tol * fmax.max(1.0) {
                return Err(Error::numeric(
                    format!("heat integral tail {:.3e} exceeds tolerance at s = {s}", res.tail_estimate),
                    res.tail_estimate,
                ));
            }
            Ok(res.value)
        })
        .collect()
}

/// Settings for [`semigroup_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupOptions {
    /// Box around the midpoint `(z + z̃)/2`, over the `2n` real axes.
    pub quad: QuadratureSpec,
    /// Phase used inside the integrand; the reference always uses the standard phase.
    pub phase: Phase,
    /// Largest accepted tail estimate relative to the reference value.
    pub tail_tol: f64,
}

impl SemigroupOptions {
    /// Box and spacing sized from the kernel rates and the phase frequency.
    pub fn auto(kernel: &WeightedHeatKernel, s1: f64, s2: f64, z: &[Complex64], zt: &[Complex64], tol: f64) -> Self {
        let (a1, b1) = kernel.rate_bounds(s1);
        let (a2, b2) = kernel.rate_bounds(s2);
        let log_tol = (1.0 / tol).ln();
        let dist = z.iter().zip(zt).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let r = 0.5 * dist + (log_tol / (a1 + a2)).sqrt();
        let norm_a = kernel
            .quadric()
            .phi_lambda_matrix(kernel.lambda())
            .map(|a| a.norm())
            .unwrap_or(0.0);
        let zn = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let k = 2.0 * norm_a * (zn(z) + zn(zt) + r);
        let h = 2.0 * std::f64::consts::PI / (k + 2.0 * ((b1 + b2) * log_tol).sqrt());
        let points = ((2.0 * r / h).ceil() as usize + 1) | 1;
        Self {
            quad: QuadratureSpec::uniform(2 * z.len(), r, points, Rule::Trapezoid, a1 + a2),
            phase: Phase::Standard,
            tail_tol: tol,
        }
    }
}

/// Output of [`semigroup_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemigroupReport {
    pub integral: Complex64,
    pub reference: Complex64,
    pub relative_error: f64,
    pub tail_estimate: f64,
    pub nodes: usize,
}

/// Compares `∫ H(s₁, z, w) H(s₂, w, z̃) dw` with `H(s₁ + s₂, z, z̃)`.
pub fn semigroup_check(
    kernel: &WeightedHeatKernel,
    s1: f64,
    s2: f64,
    z: &[Complex64],
    zt: &[Complex64],
    opts: &SemigroupOptions,
) -> Result<SemigroupReport> {
    let n = kernel.quadric().n();
    if z.len() != n || zt.len() != n {
        return Err(Error::input(format!("points must have length n = {n}")));
    }
    if opts.quad.dim() != 2 * n {
        return Err(Error::input(format!("quadrature must have 2n = {} axes", 2 * n)));
    }
    let mid: Vec<Complex64> = z.iter().zip(zt).map(|(a, b)| 0.5 * (a + b)).collect();
    let reference = kernel.eval(s1 + s2, z, zt)?;
    let res = integrate(
        |u| {
            let w: Vec<Complex64> = (0..n).map(|k| mid[k] + Complex64::new(u[2 * k], u[2 * k + 1])).collect();
            let a = kernel.eval_with(s1, z, &w, opts.phase);
            let b = kernel.eval_with(s2, &w, zt, opts.phase);
            match (a, b) {
                (Ok(a), Ok(b)) => a * b,
                _ => Complex64::new(f64::NAN, 0.0),
            }
        },
        &opts.quad,
    )?;
    let scale = reference.norm();
    if res.tail_estimate > opts.tail_tol * scale {
        return Err(Error::numeric(
            format!("semigroup integral tail {:.3e} exceeds tolerance", res.tail_estimate),
            res.tail_estimate,
        ));
    }
    Ok(SemigroupReport {
        integral: res.value,
        reference,
        relative_error: (res.value - reference).norm() / scale,
        tail_estimate: res.tail_estimate,
        nodes: res.nodes,
    })
}

/// One time of [`initial_condition_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialConditionSample {
    pub s: f64,
    pub value: Complex64,
    pub error: f64,
    pub points_per_axis: usize,
}

/// `|H{f}(s, z) − f(z)|` for each `s`, on grids sized from the kernel rates at `s`.
///
/// `f_rate` bounds the Gaussian curvature of `f` (`1` for `e^{−|z|²}`).
pub fn initial_condition_check(
    kernel: &WeightedHeatKernel,
    f: &(dyn Fn(&[Complex64]) -> Complex64 + Sync),
    f_rate: f64,
    point: &[Complex64],
    s_list: &[f64],
    tol: f64,
) -> Result<Vec<InitialConditionSample>> {
    let n = kernel.quadric().n();
    if point.len() != n {
        return Err(Error::input(format!("point must have length n = {n}")));
    }
    let log_tol = (1.0 / tol).ln() + 4.0;
    let reach = point.iter().map(|c| c.re.abs().max(c.im.abs())).fold(0.0, f64::max);
    let target = f(point);
    s_list
        .iter()
        .map(|&s| {
            let (rate_min, rate_max) = kernel.rate_bounds(s);
            let r = reach + (log_tol / rate_min).sqrt();
            let h = std::f64::consts::PI / ((rate_max + f_rate) * log_tol).sqrt();
            let points = (((2.0 * r / h).ceil() as usize + 1) | 1).max(9);
            let grid = GridSpec::cube(n, r, points)?;
            let fg = GridFunction::from_fn(grid, |x| {
                let w: Vec<Complex64> = (0..n).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect();
                f(&w)
            })?;
            let value = heat_apply(&fg, s, kernel, &[point.to_vec()], &HeatApplyOptions { tol, phase: Phase::Standard })?[0];
            Ok(InitialConditionSample { s, value, error: (value - target).norm(), points_per_axis: points })
        })
        .collect()
}
