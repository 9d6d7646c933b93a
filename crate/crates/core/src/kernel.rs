//! Closed-form heat kernels for `□_{b,L}` and their transform-side oracle.
//!
//! In adapted coordinates `z = (z′, z″)`, with `z′_j = x_j + i y_j`,
//!
//! ```text
//! ρ̂(s, z) = 2^{n−ν} (2π)^{−(m/2+n)} s^{−(n−ν)} e^{−|z″|²/s}
//!           · Π_{j≤ν} 2 e^{sε_j|μ_j|} |μ_j| / sinh(s|μ_j|) · e^{−|μ_j| coth(|μ_j|s)(x_j²+y_j²)}
//! ```
//!
//! and the weighted kernel is `H(s, z, z̃) = (2π)^{m/2} ρ̂(s, z − z̃) e^{−2iλ·Im φ(z, z̃)}`.
//! Everything is evaluated in log space.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::hermite::{mode_closed, mode_shorthand, u_tilde_log_prefactor};
use crate::quadrature::{integrate, tail_bound, QuadratureSpec, Rule};
use crate::quadric::QuadricForm;
use crate::spectral::SpectralData;
use crate::{Error, Result};

/// Below this value of `s|μ|` the series branches replace the exact expressions.
pub const SMALL_ARGUMENT: f64 = 1e-8;

/// A strictly increasing subset `L ⊂ {1, …, n}` (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormIndex {
    n: usize,
    indices: Vec<usize>,
}

impl FormIndex {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j == 0 || j > n) {
            return Err(Error::input(format!("form index {bad} is outside 1..={n}")));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input(format!("form indices {indices:?} are not strictly increasing")));
        }
        Ok(Self { n, indices })
    }

    /// `L = ∅`.
    pub fn empty(n: usize) -> Self {
        Self { n, indices: Vec::new() }
    }

    /// `L = {1, …, n}`.
    pub fn full(n: usize) -> Self {
        Self { n, indices: (1..=n).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `q = |L|`.
    pub fn q(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Whether the 1-based index `j` lies in `L`.
    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }
}

impl Serialize for FormIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.indices.serialize(serializer)
    }
}

/// Signs `ε_j ∈ {±1}` for the nonzero modes `j = 1..ν`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EpsilonVector(Vec<i8>);

impl EpsilonVector {
    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `ε_j = sgn μ_j` for `j ∈ L`, `−sgn μ_j` otherwise, over the nonzero block.
pub fn epsilon(form: &FormIndex, spectral: &SpectralData) -> EpsilonVector {
    EpsilonVector(
        spectral
            .nonzero_mu()
            .iter()
            .enumerate()
            .map(|(j, mu)| {
                let sign = if *mu > 0.0 { 1 } else { -1 };
                if form.contains(j + 1) {
                    sign
                } else {
                    -sign
                }
            })
            .collect(),
    )
}

/// `log(2 e^{sε|μ|} |μ| / sinh(s|μ|))`, switching to the series below [`SMALL_ARGUMENT`].
pub fn log_mu_sinh_factor(s: f64, mu_abs: f64, eps: i8) -> f64 {
    if s * mu_abs < SMALL_ARGUMENT {
        log_mu_sinh_factor_series(s, mu_abs, eps)
    } else {
        log_mu_sinh_factor_exact(s, mu_abs, eps)
    }
}

/// `log(4|μ|) + s(ε−1)|μ| − log(1 − e^{−2s|μ|})`.
pub fn log_mu_sinh_factor_exact(s: f64, mu_abs: f64, eps: i8) -> f64 {
    let x = s * mu_abs;
    let log_one_minus = if 2.0 * x < std::f64::consts::LN_2 {
        (-(-2.0 * x).exp_m1()).ln()
    } else {
        (-(-2.0 * x).exp()).ln_1p()
    };
    (4.0 * mu_abs).ln() + s * (eps as f64 - 1.0) * mu_abs - log_one_minus
}

/// `log(2/s) + sε|μ| − (s|μ|)²/6`.
pub fn log_mu_sinh_factor_series(s: f64, mu_abs: f64, eps: i8) -> f64 {
    let x = s * mu_abs;
    (2.0 / s).ln() + s * eps as f64 * mu_abs - x * x / 6.0
}

/// `|μ| coth(|μ|s)`, switching to the series below [`SMALL_ARGUMENT`].
pub fn mu_coth(s: f64, mu_abs: f64) -> f64 {
    if s * mu_abs < SMALL_ARGUMENT {
        mu_coth_series(s, mu_abs)
    } else {
        mu_coth_exact(s, mu_abs)
    }
}

pub fn mu_coth_exact(s: f64, mu_abs: f64) -> f64 {
    mu_abs / (s * mu_abs).tanh()
}

/// `1/s + sμ²/3`.
pub fn mu_coth_series(s: f64, mu_abs: f64) -> f64 {
    1.0 / s + s * mu_abs * mu_abs / 3.0
}

fn check_time(s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("time s must be positive and finite, got {s}")));
    }
    Ok(())
}

/// The closed-form kernel `ρ̂^λ_{L}` at fixed `λ` and `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoHat {
    spectral: SpectralData,
    form: FormIndex,
    eps: EpsilonVector,
}

impl RhoHat {
    pub fn new(spectral: SpectralData, form: FormIndex) -> Result<Self> {
        if form.n() != spectral.n() {
            return Err(Error::input(format!(
                "form index is over n = {} but the quadric has n = {}",
                form.n(),
                spectral.n()
            )));
        }
        let eps = epsilon(&form, &spectral);
        Ok(Self { spectral, form, eps })
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn form(&self) -> &FormIndex {
        &self.form
    }

    pub fn eps(&self) -> &EpsilonVector {
        &self.eps
    }

    fn log_constant(&self, s: f64) -> f64 {
        let (n, m, nu) = (self.spectral.n() as f64, self.spectral.m() as f64, self.spectral.nu() as f64);
        (n - nu) * 2f64.ln() - (0.5 * m + n) * (2.0 * PI).ln() - (n - nu) * s.ln()
    }

    /// Per-mode Gaussian rates of `ρ̂(s, ·)`: `|μ_j| coth(|μ_j|s)` then `1/s` for the kernel block.
    pub fn rates(&self, s: f64) -> Vec<f64> {
        let mut r: Vec<f64> = self.spectral.nonzero_mu().iter().map(|m| mu_coth(s, m.abs())).collect();
        r.resize(self.spectral.n(), 1.0 / s);
        r
    }

    /// `log ρ̂` from adapted real coordinates `x_j, y_j`, `j = 1..n`.
    pub fn log_eval_adapted(&self, s: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        check_time(s)?;
        let n = self.spectral.n();
        if x.len() != n || y.len() != n {
            return Err(Error::input(format!("adapted coordinates must have length n = {n}")));
        }
        let nu = self.spectral.nu();
        let mut acc = self.log_constant(s);
        for j in 0..nu {
            let mu = self.spectral.mu()[j].abs();
            acc += log_mu_sinh_factor(s, mu, self.eps.0[j]) - mu_coth(s, mu) * (x[j] * x[j] + y[j] * y[j]);
        }
        let r2: f64 = (nu..n).map(|j| x[j] * x[j] + y[j] * y[j]).sum();
        Ok(acc - r2 / s)
    }

    pub fn eval_adapted(&self, s: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.log_eval_adapted(s, x, y)?.exp())
    }

    /// `log ρ̂(s, z)` for `z` in the original coordinates of ℂⁿ.
    pub fn log_eval(&self, s: f64, z: &[Complex64]) -> Result<f64> {
        let p = self.spectral.to_adapted(z)?;
        let x: Vec<f64> = p.zp.iter().chain(&p.zpp).map(|c| c.re).collect();
        let y: Vec<f64> = p.zp.iter().chain(&p.zpp).map(|c| c.im).collect();
        self.log_eval_adapted(s, &x, &y)
    }

    pub fn eval(&self, s: f64, z: &[Complex64]) -> Result<f64> {
        Ok(self.log_eval(s, z)?.exp())
    }

    /// `ρ̂` with the kernel block resolved in frequency:
    /// `(2π)^{−(m/2+n)} e^{−s|η|²/4} Π_{j≤ν}(…)` at `(x′, y′, η)`.
    pub fn eval_eta(&self, s: f64, xp: &[f64], yp: &[f64], eta: &[Complex64]) -> Result<f64> {
        check_time(s)?;
        let (n, m, nu) = (self.spectral.n(), self.spectral.m(), self.spectral.nu());
        if xp.len() != nu || yp.len() != nu || eta.len() != n - nu {
            return Err(Error::input(format!("expected x′, y′ of length {nu} and η of length {}", n - nu)));
        }
        let eta2: f64 = eta.iter().map(|e| e.norm_sqr()).sum();
        let mut acc = -(0.5 * m as f64 + n as f64) * (2.0 * PI).ln() - 0.25 * s * eta2;
        for j in 0..nu {
            let mu = self.spectral.mu()[j].abs();
            acc += log_mu_sinh_factor(s, mu, self.eps.0[j]) - mu_coth(s, mu) * (xp[j] * xp[j] + yp[j] * yp[j]);
        }
        Ok(acc.exp())
    }

    /// `ρ̂^{λ,η}` by numerical inverse Fourier transform of the Mehler closed form.
    ///
    /// Computes `e^{−2iΣμ_j x_j y_j} F⁻¹_{a,b}[e^{−(i/4)Σ a_j b_j/μ_j} ũ(s, a, b)](x′, y′)`.
    /// The transform factorizes over modes; each 2-D factor is integrated on
    /// its own box, sized so the integrand at the boundary is below
    /// `1e-3·tol` of its peak unless a half-width is given.
    pub fn via_inversion(&self, s: f64, xp: &[f64], yp: &[f64], eta: &[Complex64], opts: &InversionOptions) -> Result<Inversion> {
        check_time(s)?;
        let (n, m, nu) = (self.spectral.n(), self.spectral.m(), self.spectral.nu());
        if xp.len() != nu || yp.len() != nu || eta.len() != n - nu {
            return Err(Error::input(format!("expected x′, y′ of length {nu} and η of length {}", n - nu)));
        }
        if opts.points < 16 || !(opts.tol > 0.0) {
            return Err(Error::input("inversion needs at least 16 points per axis and a positive tolerance"));
        }
        let eta2: f64 = eta.iter().map(|e| e.norm_sqr()).sum();
        let prefactor = u_tilde_log_prefactor(n, m, nu, s, eta2).exp();
        let peak = self.eval_eta(s, &vec![0.0; nu], &vec![0.0; nu], eta)?;

        let mut value = Complex64::new(prefactor, 0.0);
        let mut half_widths = Vec::with_capacity(nu);
        let mut mode_values = Vec::with_capacity(nu);
        let mut mode_tails = Vec::with_capacity(nu);
        for j in 0..nu {
            let mu = self.spectral.mu()[j];
            let eps = self.eps.0[j];
            let (sj, _, _) = mode_shorthand(s, mu, 0.0, 0.0);
            let q = (1.0 - sj * sj) / (1.0 + sj * sj);
            let rate = q / (8.0 * mu.abs());
            let r = opts
                .half_width
                .unwrap_or_else(|| ((1.0 / (1e-3 * opts.tol)).ln() / rate).sqrt());

            let spec = QuadratureSpec::uniform(2, r, opts.points, opts.rule, rate);
            // Poisson aliasing: the trapezoid result is periodized with period 2π/h.
            if opts.rule == Rule::Trapezoid {
                let h = 2.0 * r / (opts.points - 1) as f64;
                let reach = 2.0 * PI / h - xp[j].abs().max(yp[j].abs());
                let alias = peak * (-mu_coth(s, mu.abs()) * reach.max(0.0).powi(2)).exp();
                if reach <= 0.0 || alias > opts.tol {
                    return Err(Error::numeric(
                        format!("inversion grid too coarse for mode {}: spacing {h:.3e}", j + 1),
                        alias,
                    ));
                }
            }
            let (x, y) = (xp[j], yp[j]);
            let res = integrate(
                |ab| {
                    let (_, alpha, beta) = mode_shorthand(s, mu, ab[0], ab[1]);
                    let phase = -ab[0] * ab[1] / (4.0 * mu) + ab[0] * x + ab[1] * y;
                    mode_closed(sj, alpha, beta, eps) * Complex64::from_polar(1.0, phase)
                },
                &spec,
            )?;
            let envelope = sj.powf(0.5 * (1.0 - eps as f64)) / (1.0 + sj * sj).sqrt();
            let mode = res.value / (2.0 * PI);
            let tail = tail_bound(&spec, envelope).max(res.tail_estimate) / (2.0 * PI);
            value *= mode;
            half_widths.push(r);
            mode_values.push(mode);
            mode_tails.push(tail);
        }
        let xy: f64 = (0..nu).map(|j| self.spectral.mu()[j] * xp[j] * yp[j]).sum();
        value *= Complex64::from_polar(1.0, -2.0 * xy);

        let tail_estimate = (0..nu)
            .map(|j| {
                let others: f64 = (0..nu).filter(|&k| k != j).map(|k| mode_values[k].norm()).product();
                prefactor * mode_tails[j] * others
            })
            .sum::<f64>();
        if tail_estimate > opts.tol {
            return Err(Error::numeric(
                format!("inversion tail estimate {tail_estimate:.3e} exceeds tolerance {:.3e}", opts.tol),
                tail_estimate,
            ));
        }
        Ok(Inversion { value, tail_estimate, half_width: half_widths })
    }
}

/// Settings for [`RhoHat::via_inversion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    pub points: usize,
    pub tol: f64,
    pub half_width: Option<f64>,
    pub rule: Rule,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self { points: 512, tol: 1e-8, half_width: None, rule: Rule::Trapezoid }
    }
}

/// Output of [`RhoHat::via_inversion`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inversion {
    pub value: Complex64,
    pub tail_estimate: f64,
    pub half_width: Vec<f64>,
}

/// Sign of the phase factor in the weighted kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// `e^{−2iλ·Im φ(z, z̃)}`.
    Standard,
    /// `e^{+2iλ·Im φ(z, z̃)}`.
    Conjugated,
    /// No phase factor.
    Omitted,
}

/// `H(s, z, z̃) = (2π)^{m/2} ρ̂(s, z − z̃) e^{−2iλ·Im φ(z, z̃)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedHeatKernel {
    quadric: QuadricForm,
    rho: RhoHat,
}

impl WeightedHeatKernel {
    pub fn new(quadric: QuadricForm, lambda: &[f64], form: FormIndex) -> Result<Self> {
        let spectral = SpectralData::new(&quadric, lambda)?;
        Self::from_rho(quadric, RhoHat::new(spectral, form)?)
    }

    /// Uses the `λ` stored in the spectral data of `rho`.
    pub fn from_rho(quadric: QuadricForm, rho: RhoHat) -> Result<Self> {
        if quadric.n() != rho.spectral.n() || quadric.m() != rho.spectral.m() {
            return Err(Error::input("kernel and quadric dimensions differ"));
        }
        Ok(Self { quadric, rho })
    }

    pub fn quadric(&self) -> &QuadricForm {
        &self.quadric
    }

    pub fn rho(&self) -> &RhoHat {
        &self.rho
    }

    pub fn lambda(&self) -> &[f64] {
        self.rho.spectral.lambda()
    }

    pub fn eval(&self, s: f64, z: &[Complex64], zt: &[Complex64]) -> Result<Complex64> {
        self.eval_with(s, z, zt, Phase::Standard)
    }

    pub fn eval_with(&self, s: f64, z: &[Complex64], zt: &[Complex64], phase: Phase) -> Result<Complex64> {
        if z.len() != zt.len() {
            return Err(Error::input("z and z̃ have different lengths"));
        }
        let d: Vec<Complex64> = z.iter().zip(zt).map(|(a, b)| a - b).collect();
        let m = self.quadric.m() as f64;
        let log = self.rho.log_eval(s, &d)? + 0.5 * m * (2.0 * PI).ln();
        let angle = match phase {
            Phase::Standard => -2.0 * self.quadric.lambda_im_phi(self.lambda(), z, zt)?,
            Phase::Conjugated => 2.0 * self.quadric.lambda_im_phi(self.lambda(), z, zt)?,
            Phase::Omitted => 0.0,
        };
        Ok(Complex64::from_polar(log.exp(), angle))
    }

    /// Smallest and largest Gaussian rate of `|H(s, z, z̃)|` in `|z − z̃|`.
    pub fn rate_bounds(&self, s: f64) -> (f64, f64) {
        let r = self.rho.rates(s);
        (r.iter().cloned().fold(f64::INFINITY, f64::min), r.iter().cloned().fold(0.0, f64::max))
    }
}

/// `ρ̂^λ_{L}(s, z)` from the quadric, `λ` and `L`.
pub fn rho_hat(s: f64, z: &[Complex64], q: &QuadricForm, lambda: &[f64], form: &FormIndex) -> Result<f64> {
    RhoHat::new(SpectralData::new(q, lambda)?, form.clone())?.eval(s, z)
}

/// `ρ̂^{λ,η}(s, x′, y′)`.
pub fn rho_hat_eta(s: f64, xp: &[f64], yp: &[f64], eta: &[Complex64], spectral: &SpectralData, form: &FormIndex) -> Result<f64> {
    RhoHat::new(spectral.clone(), form.clone())?.eval_eta(s, xp, yp, eta)
}

/// `H(s, z, z̃)` from the quadric, `λ` and `L`.
pub fn weighted_heat_kernel(
    s: f64,
    z: &[Complex64],
    zt: &[Complex64],
    q: &QuadricForm,
    lambda: &[f64],
    form: &FormIndex,
) -> Result<Complex64> {
    WeightedHeatKernel::new(q.clone(), lambda, form.clone())?.eval(s, z, zt)
}

/// Inversion oracle for `ρ̂^{λ,η}`; see [`RhoHat::via_inversion`].
pub fn rho_via_inversion(
    s: f64,
    xp: &[f64],
    yp: &[f64],
    eta: &[Complex64],
    spectral: &SpectralData,
    form: &FormIndex,
    opts: &InversionOptions,
) -> Result<Inversion> {
    RhoHat::new(spectral.clone(), form.clone())?.via_inversion(s, xp, yp, eta, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn heis(lambda: f64, form: &[usize]) -> RhoHat {
        let q = QuadricForm::heisenberg(1);
        RhoHat::new(SpectralData::new(&q, &[lambda]).unwrap(), FormIndex::new(form.to_vec(), 1).unwrap()).unwrap()
    }

    // Direct transcription with sinh/coth, valid for moderate s|μ|.
    fn naive(s: f64, mu: &[f64], eps: &[i8], m: usize, x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let nu = mu.len();
        let mut v = 2f64.powi((n - nu) as i32) * (2.0 * PI).powf(-(0.5 * m as f64 + n as f64)) / s.powi((n - nu) as i32);
        for j in 0..nu {
            let a = mu[j].abs();
            v *= 2.0 * (s * eps[j] as f64 * a).exp() * a / (s * a).sinh();
            v *= (-a / (a * s).tanh() * (x[j] * x[j] + y[j] * y[j])).exp();
        }
        let r2: f64 = (nu..n).map(|j| x[j] * x[j] + y[j] * y[j]).sum();
        v * (-r2 / s).exp()
    }

    #[test]
    fn form_index_validation() {
        assert!(FormIndex::new(vec![1, 3], 3).is_ok());
        assert!(matches!(FormIndex::new(vec![0], 3), Err(Error::Input(_))));
        assert!(matches!(FormIndex::new(vec![4], 3), Err(Error::Input(_))));
        assert!(matches!(FormIndex::new(vec![2, 2], 3), Err(Error::Input(_))));
        assert!(matches!(FormIndex::new(vec![3, 1], 3), Err(Error::Input(_))));
        assert_eq!(FormIndex::full(3).q(), 3);
        assert!(FormIndex::full(2).contains(2) && !FormIndex::empty(2).contains(1));
    }

    #[test]
    fn epsilon_examples() {
        let sd = SpectralData::diagonal(vec![1.0], vec![2.0, -1.0, 0.0]).unwrap();
        assert_eq!(epsilon(&FormIndex::new(vec![1], 3).unwrap(), &sd).as_slice(), &[1, 1]);
        assert_eq!(epsilon(&FormIndex::new(vec![2, 3], 3).unwrap(), &sd).as_slice(), &[-1, -1]);
        assert_eq!(epsilon(&FormIndex::empty(3), &sd).as_slice(), &[-1, 1]);
    }

    #[test]
    fn heisenberg_value_at_origin() {
        let r = heis(1.0, &[1]);
        let v = r.eval(1.0, &[c(0.0, 0.0)]).unwrap();
        let expected = (2.0 * PI).powf(-1.5) * 2.0 * 1f64.exp() / 1f64.sinh();
        assert!((v - expected).abs() < 1e-15 * expected);
        let r = heis(1.0, &[]);
        let v = r.eval(1.0, &[c(0.0, 0.0)]).unwrap();
        let expected = (2.0 * PI).powf(-1.5) * 2.0 * (-1f64).exp() / 1f64.sinh();
        assert!((v - expected).abs() < 1e-15 * expected);
    }

    #[test]
    fn euclidean_limit() {
        let q = QuadricForm::diagonal(&[1.0, -1.0]).unwrap();
        let r = RhoHat::new(SpectralData::new(&q, &[0.0]).unwrap(), FormIndex::new(vec![1], 2).unwrap()).unwrap();
        let z = [c(0.3, -0.2), c(1.1, 0.4)];
        let s = 0.8f64;
        let r2: f64 = z.iter().map(|w| w.norm_sqr()).sum();
        let expected = 4.0 * (2.0 * PI).powf(-2.5) / (s * s) * (-r2 / s).exp();
        assert!((r.eval(s, &z).unwrap() - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn matches_naive_transcription() {
        let sd = SpectralData::diagonal(vec![0.5, 1.0], vec![1.7, -0.6, 0.0]).unwrap();
        for form in [vec![], vec![1], vec![2], vec![1, 2, 3]] {
            let r = RhoHat::new(sd.clone(), FormIndex::new(form, 3).unwrap()).unwrap();
            let (x, y) = ([0.3, -0.9, 0.2], [0.5, 0.1, -0.4]);
            for &s in &[0.2, 1.0, 3.0] {
                let v = r.eval_adapted(s, &x, &y).unwrap();
                let e = naive(s, &[1.7, -0.6], r.eps().as_slice(), 2, &x, &y);
                assert!((v - e).abs() < 1e-13 * e, "s = {s}");
            }
        }
    }

    #[test]
    fn small_argument_branches_are_continuous() {
        for &eps in &[1i8, -1] {
            for &mu in &[1.0, 3.0] {
                let s = SMALL_ARGUMENT / mu;
                let a = log_mu_sinh_factor_exact(s, mu, eps);
                let b = log_mu_sinh_factor_series(s, mu, eps);
                assert!((a - b).abs() <= 1e-12 * a.abs());
                let a = mu_coth_exact(s, mu);
                let b = mu_coth_series(s, mu);
                assert!((a - b).abs() <= 1e-12 * a);
            }
        }
        // Series matches the exact expression in the overlap.
        let (s, mu) = (1e-5, 1.0);
        assert!((log_mu_sinh_factor_exact(s, mu, 1) - log_mu_sinh_factor_series(s, mu, 1)).abs() < 1e-12);
    }

    #[test]
    fn large_time_is_finite() {
        let r = heis(1.0, &[1]);
        let v = r.log_eval(800.0, &[c(0.5, 0.5)]).unwrap();
        assert!(v.is_finite());
        // ε = +1: log factor tends to log(4|μ|).
        assert!((log_mu_sinh_factor(800.0, 1.0, 1) - 4f64.ln()).abs() < 1e-15);
        assert!((log_mu_sinh_factor(800.0, 1.0, -1) - (4f64.ln() - 1600.0)).abs() < 1e-12);
    }

    #[test]
    fn time_must_be_positive() {
        let r = heis(1.0, &[1]);
        assert!(matches!(r.eval(0.0, &[c(0.0, 0.0)]), Err(Error::Domain(_))));
        assert!(matches!(r.eval(-1.0, &[c(0.0, 0.0)]), Err(Error::Domain(_))));
        assert!(matches!(r.eval(f64::NAN, &[c(0.0, 0.0)]), Err(Error::Domain(_))));
        assert!(matches!(r.eval(1.0, &[c(0.0, 0.0), c(1.0, 0.0)]), Err(Error::Input(_))));
    }

    #[test]
    fn degenerate_basis_invariance() {
        let q = QuadricForm::heisenberg(2);
        let sd = SpectralData::new(&q, &[1.0]).unwrap();
        let h = 0.5f64.sqrt();
        let u = DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)]);
        let rotated = SpectralData::from_parts(vec![1.0], sd.mu().to_vec(), sd.basis() * u, sd.tol()).unwrap();
        let form = FormIndex::new(vec![1, 2], 2).unwrap();
        let a = RhoHat::new(sd, form.clone()).unwrap();
        let b = RhoHat::new(rotated, form).unwrap();
        let z = [c(0.4, -0.3), c(-1.0, 0.2)];
        let (va, vb) = (a.eval(0.6, &z).unwrap(), b.eval(0.6, &z).unwrap());
        assert!((va - vb).abs() < 1e-13 * va);
    }

    #[test]
    fn eta_form_at_zero_eta() {
        let sd = SpectralData::diagonal(vec![1.0], vec![1.0, 0.0]).unwrap();
        let r = RhoHat::new(sd, FormIndex::new(vec![1], 2).unwrap()).unwrap();
        let v = r.eval_eta(0.5, &[0.2], &[0.1], &[c(0.0, 0.0)]).unwrap();
        let expected = (2.0 * PI).powf(-2.5)
            * 2.0
            * (0.5f64).exp()
            / 0.5f64.sinh()
            * (-(0.05) / 0.5f64.tanh()).exp();
        assert!((v - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn inversion_matches_closed_form() {
        let r = heis(1.0, &[1]);
        for &s in &[0.3, 1.0] {
            for &(x, y) in &[(0.0, 0.0), (0.5, -0.3)] {
                let inv = r.via_inversion(s, &[x], &[y], &[], &InversionOptions::default()).unwrap();
                let exact = r.eval_adapted(s, &[x], &[y]).unwrap();
                assert!((inv.value.re - exact).abs() < 1e-8, "s = {s}: {} vs {exact}", inv.value.re);
                assert!(inv.value.im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn inversion_rejects_small_box() {
        let r = heis(1.0, &[1]);
        let opts = InversionOptions { half_width: Some(2.0), ..InversionOptions::default() };
        assert!(matches!(r.via_inversion(0.5, &[0.0], &[0.0], &[], &opts), Err(Error::Numeric { .. })));
        let opts = InversionOptions { points: 24, half_width: Some(60.0), ..InversionOptions::default() };
        assert!(matches!(r.via_inversion(0.5, &[0.0], &[0.0], &[], &opts), Err(Error::Numeric { .. })));
    }

    #[test]
    fn weighted_kernel_phase_variants() {
        let k = WeightedHeatKernel::new(QuadricForm::heisenberg(1), &[1.0], FormIndex::full(1)).unwrap();
        let (z, zt) = ([c(0.3, 0.4)], [c(-0.2, 0.7)]);
        let a = k.eval_with(0.5, &z, &zt, Phase::Standard).unwrap();
        let b = k.eval_with(0.5, &z, &zt, Phase::Conjugated).unwrap();
        let o = k.eval_with(0.5, &z, &zt, Phase::Omitted).unwrap();
        assert!((a - b.conj()).norm() < 1e-16);
        assert!((a.norm() - o.norm()).abs() < 1e-16 && o.im == 0.0);
        // Heisenberg: φ(z, z̃) = conj(z̃)·z.
        let im_phi = (zt[0].conj() * z[0]).im;
        assert!((a.arg() + 2.0 * im_phi).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn kernel_is_positive_and_even(
            x in -3.0f64..3.0, y in -3.0f64..3.0, u in -3.0f64..3.0, v in -3.0f64..3.0,
            s in 0.05f64..5.0, lam in -2.0f64..2.0,
        ) {
            let q = QuadricForm::diagonal(&[1.0, -0.5]).unwrap();
            let sd = SpectralData::new(&q, &[lam]).unwrap();
            let r = RhoHat::new(sd, FormIndex::new(vec![2], 2).unwrap()).unwrap();
            let z = [c(x, y), c(u, v)];
            let zm = [c(-x, -y), c(-u, -v)];
            let a = r.eval(s, &z).unwrap();
            let b = r.eval(s, &zm).unwrap();
            prop_assert!(a > 0.0);
            prop_assert!((a - b).abs() <= 1e-14 * a.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn kernel_has_gaussian_decay(x in -1.0f64..1.0, y in -1.0f64..1.0, s in 0.1f64..4.0, t in 1.0f64..3.0) {
            let r = heis(1.0, &[1]);
            let a = r.log_eval(s, &[c(x, y)]).unwrap();
            let b = r.log_eval(s, &[c(t * x, t * y)]).unwrap();
            let rate = mu_coth(s, 1.0);
            prop_assert!((a - b - rate * (t * t - 1.0) * (x * x + y * y)).abs() < 1e-11);
        }

        #[test]
        fn depends_on_mu_only_through_modulus(s in 0.1f64..3.0, x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let plus = SpectralData::diagonal(vec![1.0], vec![1.3]).unwrap();
            let minus = SpectralData::diagonal(vec![1.0], vec![-1.3]).unwrap();
            // Same ε: L = {1} for μ > 0 and L = ∅ for μ < 0 both give ε = +1.
            let a = RhoHat::new(plus, FormIndex::full(1)).unwrap().eval_adapted(s, &[x], &[y]).unwrap();
            let b = RhoHat::new(minus, FormIndex::empty(1)).unwrap().eval_adapted(s, &[x], &[y]).unwrap();
            prop_assert!((a - b).abs() <= 1e-15 * a);
        }
    }
}
