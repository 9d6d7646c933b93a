//! Shared fixtures for the benchmarks.

use qheat::{Complex64, DMatrix, FormIndex, QuadricForm, WeightedHeatKernel};

/// The Heisenberg kernel `n = m = 1`, `λ = 1`, `L = {1}`.
pub fn heisenberg_kernel() -> WeightedHeatKernel {
    WeightedHeatKernel::new(QuadricForm::heisenberg(1), &[1.0], FormIndex::full(1)).expect("valid kernel")
}

/// A dense Hermitian quadric with `m = 2` and a full-rank `A^λ` at `λ = (1, 0.5)`.
pub fn dense_quadric(n: usize) -> QuadricForm {
    let entry = |k: usize, i: usize, j: usize| {
        let t = (1 + i + 2 * j + 5 * k) as f64;
        if i == j {
            Complex64::new(t.sin() + 2.0 * (i as f64 + 1.0), 0.0)
        } else if i < j {
            Complex64::new(t.cos(), (0.7 * t).sin())
        } else {
            let u = (1 + j + 2 * i + 5 * k) as f64;
            Complex64::new(u.cos(), -(0.7 * u).sin())
        }
    };
    let mats = (0..2)
        .map(|k| DMatrix::from_fn(n, n, |i, j| entry(k, i, j)))
        .collect();
    QuadricForm::new(mats).expect("Hermitian by construction")
}

/// Deterministic points of ℂⁿ spread over `[-1.5, 1.5]^{2n}`.
pub fn sample_points(n: usize, count: usize) -> Vec<Vec<Complex64>> {
    (0..count)
        .map(|p| {
            (0..n)
                .map(|k| {
                    let t = (p * n + k) as f64;
                    Complex64::new(1.5 * (0.37 * t).sin(), 1.5 * (0.61 * t + 1.0).cos())
                })
                .collect()
        })
        .collect()
}
