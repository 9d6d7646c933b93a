//! Hermite functions, Mehler's formula and the transform-side solution `ũ^{λ,η}`.
//!
//! `ũ` is available two ways: the truncated Hermite series
//! `Σ_ℓ (−iS_j)^ℓ ψ_ℓ(α_j) ψ_ℓ(β_j)` per mode, and its Mehler closed form.
//! The two share only the scalar shorthand `(S_j, α_j, β_j, ε_j)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::kernel::{EpsilonVector, FormIndex};
use crate::spectral::SpectralData;
use crate::{Error, Result};

/// Largest Hermite order accepted by [`psi`].
pub const MAX_ORDER: usize = 10_000;

/// Default truncation tolerance for [`default_series_terms`].
pub const SERIES_TOL: f64 = 1e-12;

// Rescale threshold for the recurrence; keeps the running values in range.
const RESCALE: f64 = 1e200;

/// `ψ_0 … ψ_{l_max}` at `x` by the normalized three-term recurrence.
///
/// The recurrence runs on `ψ_ℓ / ψ_0`-scaled values with a separate log
/// scale, so large `|x|` does not underflow before the turning point.
pub fn psi_all(l_max: usize, x: f64) -> Result<Vec<f64>> {
    if l_max > MAX_ORDER {
        return Err(Error::input(format!("Hermite order {l_max} exceeds {MAX_ORDER}")));
    }
    if !x.is_finite() {
        return Err(Error::domain("Hermite argument must be finite"));
    }
    let mut out = Vec::with_capacity(l_max + 1);
    let mut log_scale = -0.5 * x * x - 0.25 * PI.ln();
    let mut scale = log_scale.exp();
    let emit = |p: f64, log_scale: f64, scale: f64| -> f64 {
        if p == 0.0 {
            0.0
        } else if scale > 1e-280 {
            p * scale
        } else {
            p.signum() * (p.abs().ln() + log_scale).exp()
        }
    };

    let mut prev = 1.0;
    out.push(emit(prev, log_scale, scale));
    if l_max == 0 {
        return Ok(out);
    }
    let mut cur = std::f64::consts::SQRT_2 * x;
    out.push(emit(cur, log_scale, scale));
    for l in 1..l_max {
        let lf = l as f64;
        let next = (2.0 / (lf + 1.0)).sqrt() * x * cur - (lf / (lf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
            scale = log_scale.exp();
        }
        out.push(emit(cur, log_scale, scale));
    }
    Ok(out)
}

/// The normalized Hermite function `ψ_l(x)`.
pub fn psi(l: usize, x: f64) -> Result<f64> {
    Ok(psi_all(l, x)?[l])
}

/// `ψ_l(√μ·ξ)·μ^{1/4}`, unit `L²` norm in `ξ`.
pub fn psi_scaled(l: usize, mu_abs: f64, xi: f64) -> Result<f64> {
    if !(mu_abs > 0.0) || !mu_abs.is_finite() {
        return Err(Error::domain("psi_scaled needs |μ| > 0"));
    }
    Ok(psi(l, mu_abs.sqrt() * xi)? * mu_abs.powf(0.25))
}

/// Mehler's closed form of `Σ_ℓ w^ℓ ψ_ℓ(x) ψ_ℓ(y)` for `|w| < 1`.
pub fn mehler_closed(w: Complex64, x: f64, y: f64) -> Result<Complex64> {
    if !(w.norm() < 1.0) {
        return Err(Error::domain(format!("Mehler kernel needs |w| < 1, got {}", w.norm())));
    }
    let one = Complex64::new(1.0, 0.0);
    let w2 = w * w;
    let d = one - w2;
    let exponent = -0.5 * (one + w2) / d * (x * x + y * y) + 2.0 * w * x * y / d;
    Ok(exponent.exp() / (d.sqrt() * PI.sqrt()))
}

/// `Σ_{ℓ=0}^{terms} w^ℓ ψ_ℓ(x) ψ_ℓ(y)`.
pub fn mehler_series(w: Complex64, x: f64, y: f64, terms: usize) -> Result<Complex64> {
    let px = psi_all(terms, x)?;
    let py = psi_all(terms, y)?;
    let mut wl = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in px.iter().zip(&py) {
        acc += wl * (a * b);
        wl *= w;
    }
    Ok(acc)
}

/// Per-mode shorthand `S_j = e^{−2|μ_j|s}`, `α_j = a_j/(2|μ_j|^{1/2})`,
/// `β_j = −b_j|μ_j|^{1/2}/(2μ_j)` and the signs `ε_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MehlerFactors {
    pub s: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: Vec<i8>,
}

impl MehlerFactors {
    pub fn new(time: f64, a: &[f64], b: &[f64], mu: &[f64], eps: &EpsilonVector) -> Result<Self> {
        let nu = mu.len();
        if a.len() != nu || b.len() != nu || eps.len() != nu {
            return Err(Error::input(format!("a, b and ε must have length ν = {nu}")));
        }
        let mut out = MehlerFactors {
            s: Vec::with_capacity(nu),
            alpha: Vec::with_capacity(nu),
            beta: Vec::with_capacity(nu),
            eps: eps.as_slice().to_vec(),
        };
        for j in 0..nu {
            let (sj, al, be) = mode_shorthand(time, mu[j], a[j], b[j]);
            out.s.push(sj);
            out.alpha.push(al);
            out.beta.push(be);
        }
        Ok(out)
    }
}

/// `(S, α, β)` for one mode.
pub fn mode_shorthand(time: f64, mu: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let m = mu.abs();
    let root = m.sqrt();
    ((-2.0 * m * time).exp(), a / (2.0 * root), -b * root / (2.0 * mu))
}

/// One factor of the Mehler closed form:
/// `S^{(1−ε)/2} (1+S²)^{−1/2} exp(−½ (1−S²)/(1+S²) (α²+β²) − 2iSαβ/(1+S²))`.
pub fn mode_closed(s: f64, alpha: f64, beta: f64, eps: i8) -> Complex64 {
    let s2 = s * s;
    let denom = 1.0 + s2;
    let re = -0.5 * ((1.0 - s2) / denom) * (alpha * alpha + beta * beta) - 0.5 * denom.ln()
        + if eps < 0 { s.ln() } else { 0.0 };
    let im = -2.0 * s * alpha * beta / denom;
    Complex64::from_polar(re.exp(), im)
}

/// Inputs of `ũ^{λ,η}(s, a, b)`.
#[derive(Debug, Clone)]
pub struct UTildeParams<'a> {
    pub s: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub eta: Vec<Complex64>,
    pub spectral: &'a SpectralData,
    pub form: &'a FormIndex,
}

impl UTildeParams<'_> {
    fn validate(&self) -> Result<EpsilonVector> {
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(Error::domain(format!("time s must be positive, got {}", self.s)));
        }
        let sd = self.spectral;
        if self.a.len() != sd.nu() || self.b.len() != sd.nu() {
            return Err(Error::input(format!("a and b must have length ν = {}", sd.nu())));
        }
        if self.eta.len() != sd.n() - sd.nu() {
            return Err(Error::input(format!("η must have length n − ν = {}", sd.n() - sd.nu())));
        }
        Ok(crate::kernel::epsilon(self.form, sd))
    }

    fn eta_norm_sqr(&self) -> f64 {
        self.eta.iter().map(|e| e.norm_sqr()).sum()
    }

    fn factors(&self, eps: &EpsilonVector) -> Result<MehlerFactors> {
        MehlerFactors::new(self.s, &self.a, &self.b, self.spectral.nonzero_mu(), eps)
    }
}

/// Log of the constant `(2π)^{−(m/2+n)} 2^{ν/2} e^{−s|η|²/4}` in front of the closed form.
pub fn u_tilde_log_prefactor(n: usize, m: usize, nu: usize, s: f64, eta_norm_sqr: f64) -> f64 {
    -(0.5 * m as f64 + n as f64) * (2.0 * PI).ln() + 0.5 * nu as f64 * 2f64.ln() - 0.25 * s * eta_norm_sqr
}

/// Mehler closed form of `ũ^{λ,η}(s, a, b)`.
pub fn u_tilde_closed(p: &UTildeParams<'_>) -> Result<Complex64> {
    let eps = p.validate()?;
    let f = p.factors(&eps)?;
    let sd = p.spectral;
    let log_pref = u_tilde_log_prefactor(sd.n(), sd.m(), sd.nu(), p.s, p.eta_norm_sqr());
    let mut acc = Complex64::new(log_pref.exp(), 0.0);
    for j in 0..sd.nu() {
        acc *= mode_closed(f.s[j], f.alpha[j], f.beta[j], f.eps[j]);
    }
    Ok(acc)
}

/// Hermite-series form of `ũ^{λ,η}(s, a, b)`, each mode truncated after `ℓ = terms`.
pub fn u_tilde_series(p: &UTildeParams<'_>, terms: usize) -> Result<Complex64> {
    let eps = p.validate()?;
    let f = p.factors(&eps)?;
    let sd = p.spectral;
    let (n, m, nu) = (sd.n() as f64, sd.m() as f64, sd.nu() as f64);
    let log_pref = -0.5 * (n + m + (n - nu)) * (2.0 * PI).ln() - 0.25 * p.s * p.eta_norm_sqr();
    let mut acc = Complex64::new(log_pref.exp(), 0.0);
    for j in 0..sd.nu() {
        let sj = f.s[j];
        let lead = if f.eps[j] < 0 { sj } else { 1.0 };
        let w = Complex64::new(0.0, -sj);
        acc *= lead * mehler_series(w, f.alpha[j], f.beta[j], terms)?;
    }
    Ok(acc)
}

/// `max(50, ⌈−ln(tol)/(2s·min_j|μ_j|)⌉)`: the geometric tail `S^N` falls below `tol`.
pub fn default_series_terms(s: f64, spectral: &SpectralData, tol: f64) -> usize {
    let min_mu = spectral
        .nonzero_mu()
        .iter()
        .map(|m| m.abs())
        .fold(f64::INFINITY, f64::min);
    if !min_mu.is_finite() {
        return 50;
    }
    let n = (-tol.ln() / (2.0 * s * min_mu)).ceil();
    if n.is_finite() {
        (n as usize).clamp(50, MAX_ORDER)
    } else {
        MAX_ORDER
    }
}
