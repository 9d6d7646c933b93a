//! The four commands: `eval`, `scan`, `verify` and `evolve`.

use std::f64::consts::{LN_10, PI};
use std::fmt::Write as _;
use std::path::Path;

use qheat::boxop::{heat_apply, GridFunction, GridSpec, HeatApplyOptions};
use qheat::verify::{self, CheckKind, VerifySettings};
use qheat::{Complex64, Phase, QuadricForm, RhoHat, SpectralData, WeightedHeatKernel};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{GridBlock, JobConfig};
use crate::error::CliError;
use crate::expr::Expr;
use crate::output::{emit, fmt_f64, fmt_list, sha256_hex};

fn kernel(cfg: &JobConfig) -> Result<WeightedHeatKernel, CliError> {
    let q = cfg.quadric()?;
    let spectral = SpectralData::new(q, cfg.lambda()?)?;
    let rho = RhoHat::new(spectral, cfg.form()?.clone())?;
    Ok(WeightedHeatKernel::from_rho(q.clone(), rho)?)
}

fn grid_spec(block: &GridBlock, n: usize) -> Result<GridSpec, CliError> {
    Ok(GridSpec::new(block.half_widths(2 * n), block.points)?)
}

fn pairs(z: &[Complex64]) -> Vec<[f64; 2]> {
    z.iter().map(|c| [c.re, c.im]).collect()
}

fn header(out: &mut String, command: &str, cfg: &JobConfig, kernel: &WeightedHeatKernel) {
    let rho = kernel.rho();
    let spectral = rho.spectral();
    let eps: Vec<String> = rho.eps().as_slice().iter().map(|e| e.to_string()).collect();
    let form: Vec<String> = rho.form().indices().iter().map(|j| j.to_string()).collect();
    let _ = writeln!(out, "# qheat {command}");
    let _ = writeln!(out, "# config_sha256: {}", sha256_hex(&cfg.raw));
    let _ = writeln!(out, "# n: {}, m: {}", spectral.n(), spectral.m());
    let _ = writeln!(out, "# lambda: {}", fmt_list(spectral.lambda()));
    let _ = writeln!(out, "# L: [{}]", form.join(", "));
    let _ = writeln!(out, "# mu: {}", fmt_list(spectral.mu()));
    let _ = writeln!(out, "# nu: {}", spectral.nu());
    let _ = writeln!(out, "# eps: [{}]", eps.join(", "));
}

fn coordinate_columns(n: usize) -> Vec<String> {
    (1..=n).flat_map(|j| [format!("x{j}"), format!("y{j}")]).collect()
}

#[derive(Serialize)]
struct EvalRecord<'a> {
    s: f64,
    z: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zt: Option<Vec<[f64; 2]>>,
    lambda: &'a [f64],
    #[serde(rename = "L")]
    form: &'a [usize],
    mu: &'a [f64],
    nu: usize,
    eps: &'a [i8],
    re: f64,
    im: f64,
    log_abs: f64,
}

/// One JSON record per `(s, point)`: `ρ̂(s, z)`, or `H(s, z, z̃)` when `zt` is set.
pub fn eval(cfg: &JobConfig, out: Option<&Path>) -> Result<(), CliError> {
    let kernel = kernel(cfg)?;
    let points = cfg.points.as_ref().ok_or_else(|| CliError::Input("field `points`: missing".into()))?;
    let rho = kernel.rho();
    let spectral = rho.spectral();
    let log_weight = 0.5 * spectral.m() as f64 * (2.0 * PI).ln();
    let mut text = String::new();
    for &s in cfg.times()? {
        for z in points {
            let (value, log_abs) = match &cfg.zt {
                Some(zt) => {
                    let d: Vec<Complex64> = z.iter().zip(zt).map(|(a, b)| a - b).collect();
                    (kernel.eval(s, z, zt)?, rho.log_eval(s, &d)? + log_weight)
                }
                None => {
                    let log = rho.log_eval(s, z)?;
                    (Complex64::new(log.exp(), 0.0), log)
                }
            };
            let record = EvalRecord {
                s,
                z: pairs(z),
                zt: cfg.zt.as_deref().map(pairs),
                lambda: spectral.lambda(),
                form: rho.form().indices(),
                mu: spectral.mu(),
                nu: spectral.nu(),
                eps: rho.eps().as_slice(),
                re: value.re,
                im: value.im,
                log_abs,
            };
            let line = serde_json::to_string(&record).map_err(|e| CliError::Numeric(e.to_string()))?;
            text.push_str(&line);
            text.push('\n');
        }
    }
    Ok(emit(out, &text)?)
}

/// `ρ̂(s, ·)` on a grid in adapted coordinates, one CSV row per node.
pub fn scan(cfg: &JobConfig, out: Option<&Path>) -> Result<(), CliError> {
    let kernel = kernel(cfg)?;
    let n = kernel.quadric().n();
    let s = match cfg.times()? {
        [s] => *s,
        many => return Err(CliError::Input(format!("field `s`: scan takes a single time, got {}", many.len()))),
    };
    let block = cfg.grid.as_ref().ok_or_else(|| CliError::Input("field `grid`: missing".into()))?;
    let grid = grid_spec(block, n)?;
    let len = grid
        .len()
        .filter(|&l| l <= qheat::quadrature::MAX_NODES)
        .ok_or_else(|| CliError::Input("field `grid`: too many nodes".into()))?;
    let rho = kernel.rho();
    let rows: Vec<Result<String, qheat::Error>> = (0..len)
        .into_par_iter()
        .map(|i| {
            let c = grid.node(&grid.multi_index(i));
            let x: Vec<f64> = c.iter().step_by(2).copied().collect();
            let y: Vec<f64> = c.iter().skip(1).step_by(2).copied().collect();
            let log = rho.log_eval_adapted(s, &x, &y)?;
            let mut row: Vec<String> = c.iter().map(|&v| fmt_f64(v)).collect();
            row.extend([fmt_f64(log.exp()), fmt_f64(0.0), fmt_f64(log / LN_10)]);
            Ok(row.join(","))
        })
        .collect();
    let mut text = String::new();
    header(&mut text, "scan", cfg, &kernel);
    let _ = writeln!(text, "# s: {}", fmt_f64(s));
    let _ = writeln!(text, "# coordinates: adapted");
    let mut cols = coordinate_columns(n);
    cols.extend(["re", "im", "log10_abs"].map(String::from));
    text.push_str(&cols.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row?);
        text.push('\n');
    }
    Ok(emit(out, &text)?)
}

/// Runs the selected checks and writes the JSON report; fails if any check fails.
pub fn verify(cfg: Option<&JobConfig>, corrupt_phase: bool, out: Option<&Path>) -> Result<(), CliError> {
    let mut settings = VerifySettings::default();
    let mut checks = CheckKind::ALL.to_vec();
    if let Some(cfg) = cfg {
        if cfg.quadric.is_some() {
            settings.quadric = cfg.quadric()?.clone();
            settings.lambda = cfg.lambda()?.to_vec();
            settings.form = cfg.form()?.clone();
        }
        if let Some(block) = &cfg.verify {
            if let Some(list) = &block.checks {
                checks = list.clone();
            }
            settings.corrupt_phase = block.corrupt_phase;
            settings.tolerances = block.tolerances;
            if let Some(seed) = block.seed {
                settings.seed = seed;
            }
        }
    }
    settings.corrupt_phase |= corrupt_phase;
    let report = verify::run(&checks, &settings);
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Numeric(e.to_string()))?;
    text.push('\n');
    emit(out, &text)?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("checks failed: {}", failed.join(", "))))
    }
}

/// `H{f}(s, z)` for each time and output point, `f` sampled from an expression.
pub fn evolve(cfg: &JobConfig, tol: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    let kernel = kernel(cfg)?;
    let q: &QuadricForm = kernel.quadric();
    let n = q.n();
    let init = cfg.initial.as_ref().ok_or_else(|| CliError::Input("field `initial`: missing".into()))?;
    let expr = Expr::parse(&init.expr, n).map_err(|e| CliError::Input(format!("field `initial.expr`: {e}")))?;
    let grid = grid_spec(&init.grid, n)?;
    let f = GridFunction::from_fn(grid.clone(), |c| Complex64::new(expr.eval(c), 0.0))?;
    if let Some(bad) = f.values().iter().find(|v| !v.re.is_finite()) {
        return Err(CliError::Input(format!("field `initial.expr`: evaluates to {} on the grid", bad.re)));
    }
    let points: Vec<Vec<Complex64>> = match &cfg.points {
        Some(p) => p.clone(),
        None => (0..grid.len().unwrap_or(0))
            .map(|i| {
                let c = grid.node(&grid.multi_index(i));
                (0..n).map(|k| Complex64::new(c[2 * k], c[2 * k + 1])).collect()
            })
            .collect(),
    };
    let mut opts = HeatApplyOptions { phase: Phase::Standard, ..HeatApplyOptions::default() };
    if let Some(tol) = tol {
        opts.tol = tol;
    }
    let mut text = String::new();
    header(&mut text, "evolve", cfg, &kernel);
    let _ = writeln!(text, "# expr: {}", init.expr);
    let _ = writeln!(text, "# coordinates: original");
    let mut cols = vec!["s".to_string()];
    cols.extend(coordinate_columns(n));
    cols.extend(["re", "im"].map(String::from));
    text.push_str(&cols.join(","));
    text.push('\n');
    for &s in cfg.times()? {
        let values = heat_apply(&f, s, &kernel, &points, &opts)?;
        for (z, v) in points.iter().zip(values) {
            let mut row = vec![fmt_f64(s)];
            row.extend(z.iter().flat_map(|c| [fmt_f64(c.re), fmt_f64(c.im)]));
            row.extend([fmt_f64(v.re), fmt_f64(v.im)]);
            text.push_str(&row.join(","));
            text.push('\n');
        }
    }
    Ok(emit(out, &text)?)
}
