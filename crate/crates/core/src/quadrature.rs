//! Tensor-product quadrature on axis-aligned boxes with tail estimates.
//!
//! Sums are deterministic: nodes are split into fixed chunks, each chunk is
//! summed pairwise and the chunk totals are combined pairwise, so the result
//! does not depend on the thread count.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hard cap on the number of tensor-product nodes.
pub const MAX_NODES: usize = 100_000_000;

const CHUNK: usize = 4096;
const GL_PANEL: usize = 8;

/// One-dimensional rule used on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Composite trapezoid on `points` equispaced nodes.
    Trapezoid,
    /// Composite 8-point Gauss–Legendre; `points` is rounded up to a multiple of 8.
    GaussLegendre,
}

/// Box `Π_i [−R_i, R_i]`, nodes per axis, rule, and the Gaussian decay rate
/// assumed outside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub half_width: Vec<f64>,
    pub points: Vec<usize>,
    pub rule: Rule,
    pub tail_rate: f64,
}

impl QuadratureSpec {
    /// The same half-width and node count on all `d` axes.
    pub fn uniform(d: usize, half_width: f64, points: usize, rule: Rule, tail_rate: f64) -> Self {
        Self { half_width: vec![half_width; d], points: vec![points; d], rule, tail_rate }
    }

    /// Box and trapezoid grid for an integrand bounded by `e^{−decay·|x|²}` and
    /// oscillating no faster than a Gaussian of rate `resolve`, accurate to `tol`.
    pub fn for_gaussian(d: usize, decay: f64, resolve: f64, tol: f64) -> Self {
        let log_tol = (1.0 / tol).ln().max(1.0) + 3.0;
        let r = (log_tol / decay).sqrt();
        let h = PI / (resolve * log_tol).sqrt();
        let points = ((2.0 * r / h).ceil() as usize + 1).max(9);
        Self::uniform(d, r, points, Rule::Trapezoid, decay)
    }

    pub fn dim(&self) -> usize {
        self.half_width.len()
    }

    /// Total node count after rule rounding.
    pub fn node_count(&self) -> usize {
        self.points
            .iter()
            .map(|&p| effective_points(self.rule, p))
            .fold(1usize, |acc, p| acc.saturating_mul(p))
    }

    fn validate(&self) -> Result<()> {
        if self.half_width.is_empty() || self.half_width.len() != self.points.len() {
            return Err(Error::input("quadrature needs matching, nonempty half_width and points"));
        }
        if self.half_width.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::input("quadrature half-widths must be positive and finite"));
        }
        if self.points.iter().any(|&p| p < 8) {
            return Err(Error::input("quadrature needs at least 8 points per axis"));
        }
        if !(self.tail_rate > 0.0) {
            return Err(Error::input("tail_rate must be positive"));
        }
        let nodes = self.node_count();
        if nodes > MAX_NODES {
            return Err(Error::input(format!("{nodes} quadrature nodes exceed the budget of {MAX_NODES}")));
        }
        Ok(())
    }
}

/// Result of [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: Complex64,
    /// Out-of-box estimate from the largest boundary magnitude and `tail_rate`.
    pub tail_estimate: f64,
    pub boundary_max: f64,
    pub nodes: usize,
}

fn effective_points(rule: Rule, points: usize) -> usize {
    match rule {
        Rule::Trapezoid => points,
        Rule::GaussLegendre => points.div_ceil(GL_PANEL) * GL_PANEL,
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let step = p / d;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        dp = if d != 0.0 { d } else { dp };
        let wt = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Nodes and weights of the one-dimensional rule on `[−r, r]`.
pub fn axis_rule(rule: Rule, half_width: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    match rule {
        Rule::Trapezoid => {
            let h = 2.0 * half_width / (points - 1) as f64;
            let x = (0..points).map(|i| -half_width + h * i as f64).collect();
            let mut w = vec![h; points];
            w[0] = 0.5 * h;
            w[points - 1] = 0.5 * h;
            (x, w)
        }
        Rule::GaussLegendre => {
            let panels = points.div_ceil(GL_PANEL);
            let (gx, gw) = gauss_legendre(GL_PANEL);
            let width = 2.0 * half_width / panels as f64;
            let mut x = Vec::with_capacity(panels * GL_PANEL);
            let mut w = Vec::with_capacity(panels * GL_PANEL);
            for p in 0..panels {
                let mid = -half_width + width * (p as f64 + 0.5);
                for (t, wt) in gx.iter().zip(&gw) {
                    x.push(mid + 0.5 * width * t);
                    w.push(0.5 * width * wt);
                }
            }
            (x, w)
        }
    }
}

/// Pairwise (cascade) sum.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `Σ_{i<count} term(i)`, parallel and independent of the thread count.
pub fn deterministic_sum<F>(count: usize, term: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let chunks: Vec<Complex64> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(count);
            let vals: Vec<Complex64> = (lo..hi).map(&term).collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&chunks)
}

/// Tensor-product integral of `f` over the box of `spec`.
pub fn integrate<F>(f: F, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    integrate_indexed(|x, _| f(x), spec)
}

/// As [`integrate`], with the node's lexicographic index (axis 0 slowest)
/// passed to the integrand.
pub fn integrate_indexed<F>(f: F, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(&[f64], usize) -> Complex64 + Sync,
{
    spec.validate()?;
    let d = spec.dim();
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|i| axis_rule(spec.rule, spec.half_width[i], spec.points[i]))
        .collect();
    let sizes: Vec<usize> = axes.iter().map(|a| a.0.len()).collect();
    let count = spec.node_count();

    let chunks: Vec<(Complex64, f64)> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(count);
            let mut point = vec![0.0; d];
            let mut vals = Vec::with_capacity(hi - lo);
            let mut bmax: f64 = 0.0;
            for idx in lo..hi {
                let mut rem = idx;
                let mut weight = 1.0;
                let mut boundary = false;
                for ax in (0..d).rev() {
                    let k = rem % sizes[ax];
                    rem /= sizes[ax];
                    point[ax] = axes[ax].0[k];
                    weight *= axes[ax].1[k];
                    boundary |= k == 0 || k + 1 == sizes[ax];
                }
                let v = f(&point, idx);
                if boundary {
                    bmax = bmax.max(v.norm());
                }
                vals.push(v * weight);
            }
            (pairwise_sum(&vals), bmax)
        })
        .collect();
    let sums: Vec<Complex64> = chunks.iter().map(|c| c.0).collect();
    let boundary_max = chunks.iter().map(|c| c.1).fold(0.0, f64::max);
    let value = pairwise_sum(&sums);
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::numeric("integrand produced a non-finite sum", f64::INFINITY));
    }
    Ok(QuadResult {
        value,
        tail_estimate: boundary_tail(spec, boundary_max),
        boundary_max,
        nodes: count,
    })
}

// Integrand ~ B·e^{−rate(t²−R²)} past each face; one face pair per axis.
fn boundary_tail(spec: &QuadratureSpec, boundary_max: f64) -> f64 {
    let d = spec.dim();
    (0..d)
        .map(|i| {
            let cross: f64 = (0..d).filter(|&k| k != i).map(|k| 2.0 * spec.half_width[k]).product();
            boundary_max * cross / (spec.tail_rate * spec.half_width[i])
        })
        .sum()
}

/// Bound on `∫_{ℝ^d∖box} |f|` for `|f(x)| ≤ envelope·e^{−rate|x|²}`.
pub fn tail_bound(spec: &QuadratureSpec, envelope: f64) -> f64 {
    let d = spec.dim() as f64;
    let rate = spec.tail_rate;
    spec.half_width
        .iter()
        .map(|&r| envelope * (PI / rate).powf(0.5 * (d - 1.0)) * (-rate * r * r).exp() / (rate * r))
        .sum()
}
