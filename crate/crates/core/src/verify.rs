//! Packaged verification checks with pass/fail against fixed tolerances.
//!
//! Each check compares the closed forms with an independent computation:
//! a direct Gaussian, the Hermite series, numerical Fourier inversion, the
//! finite-difference operator, or quadrature of kernel compositions. Checks
//! that depend on a quadric use [`VerifySettings`]; the others run the fixed
//! configurations listed on each function.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boxop::{
    initial_condition_check, residual_refinement, semigroup_check, GridSpec, ResidualOptions, SemigroupOptions,
    Stencil,
};
use crate::hermite::{u_tilde_closed, u_tilde_series, UTildeParams};
use crate::kernel::{
    log_mu_sinh_factor, log_mu_sinh_factor_exact, log_mu_sinh_factor_series, mu_coth_exact, mu_coth_series,
    InversionOptions, SMALL_ARGUMENT,
};
use crate::quadrature::{QuadratureSpec, Rule};
use crate::spectral::{eigendecompose, DEFAULT_RANK_TOL};
use crate::{Error, FormIndex, Phase, QuadricForm, Result, RhoHat, SpectralData, WeightedHeatKernel};

/// The available checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Euclidean,
    Mehler,
    Inversion,
    PdeResidual,
    Semigroup,
    InitialCondition,
    Evenness,
    Stability,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        CheckKind::Euclidean,
        CheckKind::Mehler,
        CheckKind::Inversion,
        CheckKind::PdeResidual,
        CheckKind::Semigroup,
        CheckKind::InitialCondition,
        CheckKind::Evenness,
        CheckKind::Stability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Euclidean => "euclidean",
            CheckKind::Mehler => "mehler",
            CheckKind::Inversion => "inversion",
            CheckKind::PdeResidual => "pde_residual",
            CheckKind::Semigroup => "semigroup",
            CheckKind::InitialCondition => "initial_condition",
            CheckKind::Evenness => "evenness",
            CheckKind::Stability => "stability",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::input(format!("unknown check `{s}`")))
    }
}

/// Pass thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub euclidean_rel: f64,
    pub mehler_abs: f64,
    pub inversion_abs: f64,
    pub inversion_imag: f64,
    pub pde_residual: f64,
    pub pde_order: (f64, f64),
    pub semigroup_rel: f64,
    pub initial_condition: f64,
    /// Errors below this floor count as equal when checking monotone decrease.
    pub monotone_floor: f64,
    pub symmetry_rel: f64,
    pub stability_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            euclidean_rel: 1e-14,
            mehler_abs: 1e-9,
            inversion_abs: 1e-6,
            inversion_imag: 1e-8,
            pde_residual: 1e-5,
            pde_order: (3.5, 4.5),
            semigroup_rel: 1e-5,
            initial_condition: 5e-3,
            monotone_floor: 1e-12,
            symmetry_rel: 1e-12,
            stability_rel: 1e-12,
        }
    }
}

/// Configuration for the quadric-dependent checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub quadric: QuadricForm,
    pub lambda: Vec<f64>,
    pub form: FormIndex,
    /// Flip the phase inside the semigroup integrand (negative control).
    pub corrupt_phase: bool,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl Default for VerifySettings {
    /// Heisenberg `n = m = 1`, `λ = 1`, `L = {1}`.
    fn default() -> Self {
        Self {
            quadric: QuadricForm::heisenberg(1),
            lambda: vec![1.0],
            form: FormIndex::full(1),
            corrupt_phase: false,
            tolerances: Tolerances::default(),
            seed: 20240611,
        }
    }
}

impl VerifySettings {
    fn kernel(&self) -> Result<WeightedHeatKernel> {
        WeightedHeatKernel::new(self.quadric.clone(), &self.lambda, self.form.clone())
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub error: f64,
    pub tolerance: f64,
    pub runtime_s: f64,
    pub detail: String,
}

/// All check outcomes; `passed` is true iff every check passed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Runs the checks in the given order.
pub fn run(kinds: &[CheckKind], settings: &VerifySettings) -> VerificationReport {
    let checks: Vec<CheckResult> = kinds.iter().map(|&k| run_check(k, settings)).collect();
    VerificationReport { passed: checks.iter().all(|c| c.passed), checks }
}

/// Runs one check; numeric failures are recorded as a failed result.
pub fn run_check(kind: CheckKind, settings: &VerifySettings) -> CheckResult {
    let start = Instant::now();
    let tol = &settings.tolerances;
    let outcome = match kind {
        CheckKind::Euclidean => euclidean(settings.seed).map(|e| Measured::max(e, tol.euclidean_rel)),
        CheckKind::Mehler => mehler().map(|e| Measured::max(e, tol.mehler_abs)),
        CheckKind::Inversion => inversion(settings.seed).map(|r| {
            let ok = r.max_abs <= tol.inversion_abs && r.max_imag <= tol.inversion_imag;
            Measured {
                error: r.max_abs,
                tolerance: tol.inversion_abs,
                passed: ok,
                detail: format!("{} points, max |Im| = {:.3e} (tolerance {:.0e})", r.samples, r.max_imag, tol.inversion_imag),
            }
        }),
        CheckKind::PdeResidual => pde_residual(settings).map(|r| {
            let ok = r.fourth_order <= tol.pde_residual && (tol.pde_order.0..=tol.pde_order.1).contains(&r.order_ratio);
            Measured {
                error: r.fourth_order,
                tolerance: tol.pde_residual,
                passed: ok,
                detail: format!(
                    "fourth-order residual {:.3e}; second-order residual {:.3e} -> {:.3e} on refinement, ratio {:.3} (range [{}, {}]); {} probes",
                    r.fourth_order, r.second_order, r.second_order_fine, r.order_ratio, tol.pde_order.0, tol.pde_order.1, r.probes
                ),
            }
        }),
        CheckKind::Semigroup => {
            let phase = if settings.corrupt_phase { Phase::Conjugated } else { Phase::Standard };
            semigroup_errors(settings, phase).map(|e| {
                let mut m = Measured::max(e.iter().cloned().fold(0.0, f64::max), tol.semigroup_rel);
                m.detail = format!("phase {phase:?}, errors [{}]", sci(&e));
                m
            })
        }
        CheckKind::InitialCondition => initial_condition_errors(settings).map(|e| {
            let last = *e.last().unwrap_or(&f64::NAN);
            let monotone = e.windows(2).all(|w| w[1] < w[0] || w[1] <= tol.monotone_floor);
            Measured {
                error: last,
                tolerance: tol.initial_condition,
                passed: monotone && last <= tol.initial_condition,
                detail: format!("s = {INITIAL_TIMES:?}, errors [{}], non-increasing: {monotone}", sci(&e)),
            }
        }),
        CheckKind::Evenness => symmetry(settings.seed).map(|e| Measured::max(e, tol.symmetry_rel)),
        CheckKind::Stability => stability().map(|e| Measured::max(e, tol.stability_rel)),
    };
    let runtime_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(m) => CheckResult {
            name: kind.name().to_string(),
            passed: m.passed,
            error: m.error,
            tolerance: m.tolerance,
            runtime_s,
            detail: m.detail,
        },
        Err(e) => CheckResult {
            name: kind.name().to_string(),
            passed: false,
            error: match &e {
                Error::Numeric { estimate, .. } => *estimate,
                _ => f64::NAN,
            },
            tolerance: f64::NAN,
            runtime_s,
            detail: e.to_string(),
        },
    }
}

struct Measured {
    error: f64,
    tolerance: f64,
    passed: bool,
    detail: String,
}

impl Measured {
    fn max(error: f64, tolerance: f64) -> Self {
        Self { error, tolerance, passed: error <= tolerance, detail: String::new() }
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Random Hermitian `n×n` matrix with entries in the unit box.
pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..n {
            let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
    a
}

/// Random quadric with `m` Hermitian components.
pub fn random_quadric(rng: &mut impl Rng, n: usize, m: usize) -> QuadricForm {
    QuadricForm::new((0..m).map(|_| random_hermitian(rng, n)).collect()).expect("Hermitian by construction")
}

fn random_form(rng: &mut impl Rng, n: usize) -> FormIndex {
    FormIndex::new((1..=n).filter(|_| rng.gen_bool(0.5)).collect(), n).expect("increasing by construction")
}

fn random_point(rng: &mut impl Rng, n: usize, r: f64) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-r..r), rng.gen_range(-r..r))).collect()
}

/// `λ = 0` against `2ⁿ(2π)^{−(m/2+n)} s^{−n} e^{−|z|²/s}`: 1000 random
/// `(n ≤ 4, m ≤ 3, s ∈ [0.5, 4], z ∈ [−1.5, 1.5]^{2n})`. Returns the max relative error.
pub fn euclidean(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=4usize);
        let m = rng.gen_range(1..=3usize);
        let q = random_quadric(&mut rng, n, m);
        let form = random_form(&mut rng, n);
        let s = rng.gen_range(0.5..4.0);
        let z = random_point(&mut rng, n, 1.5);
        let rho = RhoHat::new(SpectralData::new(&q, &vec![0.0; m])?, form)?;
        let v = rho.eval(s, &z)?;
        let r2: f64 = z.iter().map(|c| c.re * c.re + c.im * c.im).sum();
        let nf = n as i32;
        let expected = 2f64.powi(nf) * (2.0 * PI).powf(-(0.5 * m as f64 + n as f64)) / s.powi(nf) * (-r2 / s).exp();
        worst = worst.max(rel(v, expected));
    }
    Ok(worst)
}

/// Closed form against the 300-term Hermite series for `n = m = 1`,
/// `s ∈ {0.1, 0.3, 1}`, `μ ∈ {0.5, 1, 3}`, `a, b` on a 9×9 grid in `[−4, 4]²`,
/// both signs of `ε`. Returns the max absolute difference.
pub fn mehler() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &s in &[0.1, 0.3, 1.0] {
        for &mu in &[0.5, 1.0, 3.0] {
            let sd = SpectralData::diagonal(vec![1.0], vec![mu])?;
            for form in [FormIndex::full(1), FormIndex::empty(1)] {
                for i in 0..9 {
                    for k in 0..9 {
                        let p = UTildeParams {
                            s,
                            a: vec![-4.0 + i as f64],
                            b: vec![-4.0 + k as f64],
                            eta: vec![],
                            spectral: &sd,
                            form: &form,
                        };
                        worst = worst.max((u_tilde_closed(&p)? - u_tilde_series(&p, 300)?).norm());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Summary of [`inversion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionSummary {
    pub max_abs: f64,
    pub max_imag: f64,
    pub samples: usize,
}

/// Numerical Fourier inversion against the closed form for `n = ν = m = 1`,
/// `μ ∈ {0.5, 2}`, `s ∈ {0.3, 0.7}`, `L ∈ {∅, {1}}`, 20 random points each
/// in `[−1.5, 1.5]²`.
pub fn inversion(seed: u64) -> Result<InversionSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1f);
    let opts = InversionOptions { tol: 1e-9, ..InversionOptions::default() };
    let mut out = InversionSummary { max_abs: 0.0, max_imag: 0.0, samples: 0 };
    for &mu in &[0.5, 2.0] {
        for &s in &[0.3, 0.7] {
            for form in [FormIndex::empty(1), FormIndex::full(1)] {
                let rho = RhoHat::new(SpectralData::diagonal(vec![1.0], vec![mu])?, form)?;
                for _ in 0..20 {
                    let (x, y) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
                    let inv = rho.via_inversion(s, &[x], &[y], &[], &opts)?;
                    let exact = rho.eval_eta(s, &[x], &[y], &[])?;
                    out.max_abs = out.max_abs.max((inv.value.re - exact).abs());
                    out.max_imag = out.max_imag.max(inv.value.im.abs());
                    out.samples += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Summary of [`pde_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeSummary {
    pub fourth_order: f64,
    pub second_order: f64,
    pub second_order_fine: f64,
    pub order_ratio: f64,
    pub probes: usize,
}

/// Residual of `∂_sρ̂ + □ρ̂` at `s = 0.7` on `[−2, 2]^{2n}` with 201 points
/// per axis and `hs = 1e-4`: the fourth-order stencil on that grid, and the
/// second-order stencil on that grid and its refinement.
pub fn pde_residual(settings: &VerifySettings) -> Result<PdeSummary> {
    let spectral = SpectralData::new(&settings.quadric, &settings.lambda)?;
    let grid = GridSpec::cube(spectral.n(), 2.0, 201)?;
    let s = 0.7;
    let fourth = crate::boxop::pde_residual(
        s,
        &spectral,
        &settings.form,
        &grid,
        &ResidualOptions { stencil: Stencil::Fourth, ..ResidualOptions::default() },
    )?;
    let (coarse, fine) = residual_refinement(s, &spectral, &settings.form, &grid, &ResidualOptions::default())?;
    Ok(PdeSummary {
        fourth_order: fourth.residual,
        second_order: coarse.residual,
        second_order_fine: fine.residual,
        order_ratio: coarse.residual / fine.residual,
        probes: coarse.probes,
    })
}

/// Point pairs used by [`semigroup_errors`] (the first two coordinates are used for `n = 1`).
pub const SEMIGROUP_PAIRS: [([f64; 4], [f64; 4]); 2] = [
    ([0.3, -0.2, 0.1, 0.2], [-0.5, 0.6, -0.2, 0.0]),
    ([1.0, 0.5, -0.3, 0.1], [0.2, -0.7, 0.2, -0.4]),
];

/// Relative errors of `∫H(0.4, z, w)H(0.4, w, z̃)dw` against `H(0.8, z, z̃)` at
/// [`SEMIGROUP_PAIRS`], with `phase` inside the integrand only. For `n = 1` the
/// box is `[−6, 6]²` with 400 points per axis; otherwise it is sized from the
/// kernel rates.
pub fn semigroup_errors(settings: &VerifySettings, phase: Phase) -> Result<Vec<f64>> {
    let kernel = settings.kernel()?;
    let n = settings.quadric.n();
    if n > 2 {
        return Err(Error::input("the semigroup check supports n ≤ 2"));
    }
    let (s1, s2) = (0.4, 0.4);
    SEMIGROUP_PAIRS
        .iter()
        .map(|(a, b)| {
            let z: Vec<Complex64> = (0..n).map(|k| Complex64::new(a[2 * k], a[2 * k + 1])).collect();
            let zt: Vec<Complex64> = (0..n).map(|k| Complex64::new(b[2 * k], b[2 * k + 1])).collect();
            let mut opts = if n == 1 {
                SemigroupOptions {
                    quad: QuadratureSpec::uniform(2, 6.0, 400, Rule::Trapezoid, kernel.rate_bounds(s1).0),
                    phase,
                    tail_tol: 1e-8,
                }
            } else {
                SemigroupOptions::auto(&kernel, s1, s2, &z, &zt, 1e-9)
            };
            opts.phase = phase;
            Ok(semigroup_check(&kernel, s1, s2, &z, &zt, &opts)?.relative_error)
        })
        .collect()
}

/// Times used by [`initial_condition_errors`].
pub const INITIAL_TIMES: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// `|H{f}(s, 0) − f(0)|` for `f = e^{−|z|²}` at [`INITIAL_TIMES`].
pub fn initial_condition_errors(settings: &VerifySettings) -> Result<Vec<f64>> {
    let kernel = settings.kernel()?;
    let n = settings.quadric.n();
    let f = |z: &[Complex64]| Complex64::new((-z.iter().map(|c| c.norm_sqr()).sum::<f64>()).exp(), 0.0);
    let res = initial_condition_check(&kernel, &f, 1.0, &vec![Complex64::new(0.0, 0.0); n], &INITIAL_TIMES, 1e-12)?;
    Ok(res.iter().map(|r| r.error).collect())
}

/// Symmetries on 1000 random configurations (`n ≤ 3`, `m ≤ 2`): conjugate
/// symmetry `H(s, z̃, z) = conj H(s, z, z̃)`, positivity, evenness in every adapted
/// coordinate, invariance under `μ_j → −μ_j` with `ε_j` fixed, and `μ(−λ) = −μ(λ)`.
/// Returns the largest relative deviation (infinite if positivity fails).
pub fn symmetry(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=3usize);
        let m = rng.gen_range(1..=2usize);
        let q = random_quadric(&mut rng, n, m);
        let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let form = random_form(&mut rng, n);
        let s = rng.gen_range(0.1..3.0);
        let kernel = WeightedHeatKernel::new(q.clone(), &lambda, form.clone())?;
        let z = random_point(&mut rng, n, 2.0);
        let zt = random_point(&mut rng, n, 2.0);

        let a = kernel.eval(s, &z, &zt)?;
        let b = kernel.eval(s, &zt, &z)?;
        worst = worst.max((a - b.conj()).norm() / a.norm());

        let rho = kernel.rho();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let v = rho.eval_adapted(s, &x, &y)?;
        if !(v > 0.0) {
            return Ok(f64::INFINITY);
        }
        for j in 0..n {
            let mut xf = x.clone();
            xf[j] = -xf[j];
            worst = worst.max(rel(rho.eval_adapted(s, &xf, &y)?, v));
            let mut yf = y.clone();
            yf[j] = -yf[j];
            worst = worst.max(rel(rho.eval_adapted(s, &x, &yf)?, v));
        }

        // μ_j → −μ_j with j moved in or out of L leaves ε_j, hence ρ̂, unchanged.
        let sd = rho.spectral();
        if sd.nu() > 0 {
            let j = rng.gen_range(0..sd.nu());
            let mut mu = sd.mu().to_vec();
            mu[j] = -mu[j];
            let toggled: Vec<usize> = (1..=n).filter(|&k| form.contains(k) != (k == j + 1)).collect();
            let flipped = RhoHat::new(
                SpectralData::from_parts(lambda.clone(), mu, sd.basis().clone(), sd.tol())?,
                FormIndex::new(toggled, n)?,
            )?;
            let w = flipped.eval_adapted(s, &x, &y)?;
            let ulps = (w.to_bits() as i64 - v.to_bits() as i64).unsigned_abs();
            if ulps > 1 {
                worst = worst.max(rel(w, v));
            }
        }

        let neg: Vec<f64> = lambda.iter().map(|l| -l).collect();
        let a_plus = eigendecompose(&q.phi_lambda_matrix(&lambda)?, DEFAULT_RANK_TOL)?;
        let a_minus = eigendecompose(&q.phi_lambda_matrix(&neg)?, DEFAULT_RANK_TOL)?;
        let mut p: Vec<f64> = a_plus.mu().iter().map(|m| -m).collect();
        let mut mneg = a_minus.mu().to_vec();
        p.sort_by(f64::total_cmp);
        mneg.sort_by(f64::total_cmp);
        let scale = p.iter().map(|m| m.abs()).fold(1.0, f64::max);
        for (u, w) in p.iter().zip(&mneg) {
            worst = worst.max((u - w).abs() / scale);
        }
    }
    Ok(worst)
}

/// Finiteness of the log factor and of `ρ̂` for `s|μ| ∈ [1e-12, 1e4]`, and
/// agreement of the series and exact branches at `s|μ| = 1e-8·(1 ± 0.5)`.
/// Returns the largest branch mismatch (infinite on a non-finite value).
pub fn stability() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &mu in &[0.5, 1.0, 3.0] {
        let sd = SpectralData::diagonal(vec![1.0], vec![mu])?;
        for form in [FormIndex::full(1), FormIndex::empty(1)] {
            let rho = RhoHat::new(sd.clone(), form)?;
            let eps = rho.eps().as_slice()[0];
            for k in 0..=160 {
                let x = 10f64.powf(-12.0 + 0.1 * k as f64);
                let s = x / mu;
                let l = log_mu_sinh_factor(s, mu, eps);
                let r = rho.eval_adapted(s, &[0.3], &[-0.2])?;
                let lr = rho.log_eval_adapted(s, &[0.3], &[-0.2])?;
                if !l.is_finite() || !r.is_finite() || !lr.is_finite() {
                    return Ok(f64::INFINITY);
                }
            }
            for factor in [0.5, 1.5] {
                let s = factor * SMALL_ARGUMENT / mu;
                worst = worst.max(rel(log_mu_sinh_factor_series(s, mu, eps), log_mu_sinh_factor_exact(s, mu, eps)));
                worst = worst.max(rel(mu_coth_series(s, mu), mu_coth_exact(s, mu)));
            }
        }
    }
    Ok(worst)
}
