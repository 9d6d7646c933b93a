//! Acceptance suite: one line per criterion, each at its stated tolerance and runtime bound.
//!
//! All criteria run sequentially; the process exits non-zero if any fails.

use std::time::Instant;

use qheat::verify::{self, Tolerances, VerifySettings};
use qheat::{FormIndex, Phase, QuadricForm};

struct Line {
    label: &'static str,
    passed: bool,
    summary: String,
}

struct Suite {
    lines: Vec<Line>,
}

impl Suite {
    fn record(&mut self, label: &'static str, passed: bool, summary: String) {
        println!("[{}] {label}: {summary}", if passed { "PASS" } else { "FAIL" });
        self.lines.push(Line { label, passed, summary });
    }

    fn info(&self, label: &str, summary: String) {
        println!("[INFO] {label}: {summary}");
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn rank_deficient() -> VerifySettings {
    VerifySettings {
        quadric: QuadricForm::diagonal(&[1.0, 0.0]).unwrap(),
        lambda: vec![1.0],
        form: FormIndex::new(vec![1], 2).unwrap(),
        ..VerifySettings::default()
    }
}

fn main() {
    let tol = Tolerances::default();
    let heis = VerifySettings::default();
    let mut suite = Suite { lines: Vec::new() };

    // 1. Euclidean reduction.
    let (res, t) = timed(|| verify::euclidean(heis.seed));
    let err = res.expect("euclidean check failed to run");
    suite.record(
        "1 euclidean reduction",
        err <= tol.euclidean_rel && t < 1.0,
        format!("max rel error {err:.3e} (tol {:.0e}), {t:.3} s (limit 1 s), 1000 samples", tol.euclidean_rel),
    );

    // 2. Mehler closed form against the Hermite series.
    let (res, t) = timed(verify::mehler);
    let err = res.expect("mehler check failed to run");
    suite.record(
        "2 mehler/series oracle",
        err <= tol.mehler_abs && t < 10.0,
        format!("max abs diff {err:.3e} (tol {:.0e}), {t:.3} s (limit 10 s)", tol.mehler_abs),
    );

    // 3. Fourier inversion.
    let (res, t) = timed(|| verify::inversion(heis.seed));
    let r = res.expect("inversion check failed to run");
    suite.record(
        "3 fourier-inversion oracle",
        r.max_abs <= tol.inversion_abs && r.max_imag <= tol.inversion_imag && t < 60.0,
        format!(
            "max abs error {:.3e} (tol {:.0e}), max |Im| {:.3e} (tol {:.0e}), {} points, {t:.2} s (limit 60 s)",
            r.max_abs, tol.inversion_abs, r.max_imag, tol.inversion_imag, r.samples
        ),
    );

    // 4. PDE residual, Heisenberg and rank-deficient.
    let start = Instant::now();
    let heis_pde = verify::pde_residual(&heis).expect("pde residual failed to run");
    let rank_pde = verify::pde_residual(&rank_deficient()).expect("rank-deficient pde residual failed to run");
    let t = start.elapsed().as_secs_f64();
    let order_ok = |r: f64| (tol.pde_order.0..=tol.pde_order.1).contains(&r);
    suite.record(
        "4a pde residual (heisenberg)",
        heis_pde.fourth_order <= tol.pde_residual && order_ok(heis_pde.order_ratio),
        format!(
            "residual {:.3e} (tol {:.0e}, 201², fourth-order stencil), second-order h/(h/2) ratio {:.3} (range [{}, {}])",
            heis_pde.fourth_order, tol.pde_residual, heis_pde.order_ratio, tol.pde_order.0, tol.pde_order.1
        ),
    );
    suite.record(
        "4b pde residual (n=2, A=diag(1,0))",
        rank_pde.fourth_order <= tol.pde_residual && order_ok(rank_pde.order_ratio) && t < 120.0,
        format!(
            "residual {:.3e} (tol {:.0e}, 201⁴ strided, {} probes), ratio {:.3}, criterion total {t:.1} s (limit 120 s)",
            rank_pde.fourth_order, tol.pde_residual, rank_pde.probes, rank_pde.order_ratio
        ),
    );
    suite.info(
        "4 second-order residual on 201²",
        format!(
            "heisenberg {:.3e} -> {:.3e} at 401²; rank-deficient {:.3e} -> {:.3e}",
            heis_pde.second_order, heis_pde.second_order_fine, rank_pde.second_order, rank_pde.second_order_fine
        ),
    );

    // 5. Semigroup with its phase ablation.
    let start = Instant::now();
    let good = verify::semigroup_errors(&heis, Phase::Standard).expect("semigroup failed to run");
    let ablated = verify::semigroup_errors(&heis, Phase::Omitted).expect("ablated semigroup failed to run");
    let t = start.elapsed().as_secs_f64();
    let worst = good.iter().cloned().fold(0.0, f64::max);
    let weakest = ablated.iter().cloned().fold(f64::INFINITY, f64::min);
    suite.record(
        "5 semigroup",
        worst <= tol.semigroup_rel && weakest >= 1e-2 && t < 120.0,
        format!(
            "rel errors [{}] (tol {:.0e}); without phase [{}] (need ≥ 1e-2); {t:.2} s (limit 120 s)",
            sci(&good),
            tol.semigroup_rel,
            sci(&ablated)
        ),
    );

    // 6. Initial condition.
    let (res, t) = timed(|| verify::initial_condition_errors(&heis));
    let errs = res.expect("initial condition failed to run");
    let monotone = errs.windows(2).all(|w| w[1] < w[0] || w[1] <= tol.monotone_floor);
    let last = *errs.last().unwrap();
    suite.record(
        "6 initial condition (L={1})",
        monotone && last <= tol.initial_condition && t < 60.0,
        format!(
            "errors at s = 1e-1, 1e-2, 1e-3: [{}]; non-increasing above {:.0e}: {monotone}; final ≤ {:.0e}; {t:.2} s",
            sci(&errs),
            tol.monotone_floor, tol.initial_condition
        ),
    );
    let empty = VerifySettings { form: FormIndex::empty(1), ..VerifySettings::default() };
    let errs = verify::initial_condition_errors(&empty).expect("L = ∅ initial condition failed to run");
    let strict = errs.windows(2).all(|w| w[1] < w[0]);
    suite.record(
        "6s initial condition (L=∅)",
        strict && *errs.last().unwrap() <= tol.initial_condition,
        format!("errors [{}]; strictly decreasing: {strict}", sci(&errs)),
    );

    // 7. Symmetries.
    let (res, t) = timed(|| verify::symmetry(heis.seed));
    let err = res.expect("symmetry check failed to run");
    suite.record(
        "7 symmetry suite",
        err <= tol.symmetry_rel && t < 5.0,
        format!("max rel deviation {err:.3e} (tol {:.0e}), {t:.3} s (limit 5 s)", tol.symmetry_rel),
    );

    // 8. Stability.
    let (res, t) = timed(verify::stability);
    let err = res.expect("stability check failed to run");
    suite.record(
        "8 stability",
        err <= tol.stability_rel && t < 1.0,
        format!("all values finite: {}, branch mismatch {err:.3e} (tol {:.0e}), {t:.3} s (limit 1 s)", err.is_finite(), tol.stability_rel),
    );

    let failed: Vec<String> = suite.lines.iter().filter(|l| !l.passed).map(|l| format!("{} ({})", l.label, l.summary)).collect();
    println!("acceptance: {} of {} criteria passed", suite.lines.len() - failed.len(), suite.lines.len());
    if !failed.is_empty() {
        eprintln!("failed criteria:\n{}", failed.join("\n"));
        std::process::exit(1);
    }
}
