//! Diagonalization of `φ^λ` and the adapted coordinates it induces.
//!
//! The eigensolver is a cyclic complex Jacobi iteration. Its output is made
//! deterministic: nonzero eigenvalues come first by descending `|μ|`
//! (positive before negative on ties, then by original index), the zero block
//! last; vectors inside numerically degenerate clusters are re-orthonormalized
//! in index order and every column is phased so its largest entry is real and
//! positive.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::quadric::QuadricForm;
use crate::{Error, Result};

/// Default relative rank cut: `tol = 1e-10·max(1, ‖A^λ‖_F)`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 64;
const OFF_DIAGONAL_TARGET: f64 = 1e-14;
const CLUSTER_GAP: f64 = 1e-8;

/// Eigen-structure of `A^λ` at a fixed `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    v: DMatrix<Complex64>,
    nu: usize,
    tol: f64,
}

impl SpectralData {
    /// Diagonalizes `φ^λ` for the given quadric with the default rank tolerance.
    pub fn new(q: &QuadricForm, lambda: &[f64]) -> Result<Self> {
        let a = q.phi_lambda_matrix(lambda)?;
        let mut sd = eigendecompose(&a, DEFAULT_RANK_TOL)?;
        sd.lambda = lambda.to_vec();
        Ok(sd)
    }

    /// Assembles spectral data from an explicit eigenbasis.
    ///
    /// `mu` must already be in nonzero-first order and `v` must be unitary
    /// to `1e-10`. Used for alternative bases inside degenerate eigenspaces.
    pub fn from_parts(lambda: Vec<f64>, mu: Vec<f64>, v: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        let n = mu.len();
        if v.nrows() != n || v.ncols() != n {
            return Err(Error::input("eigenvector matrix must be n×n"));
        }
        let defect = (v.adjoint() * &v - DMatrix::<Complex64>::identity(n, n)).norm();
        if defect > 1e-10 {
            return Err(Error::input(format!("eigenbasis is not unitary (defect {defect:e})")));
        }
        let nu = rank_nu(&mu, tol);
        if mu[nu..].iter().any(|m| m.abs() > tol) {
            return Err(Error::input("eigenvalues must list the nonzero block first"));
        }
        Ok(Self { lambda, mu, v, nu, tol })
    }

    /// Spectral data of `diag(mu)` with the identity basis.
    pub fn diagonal(lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let n = mu.len();
        let norm = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
        Self::from_parts(lambda, mu, DMatrix::identity(n, n), DEFAULT_RANK_TOL * norm.max(1.0))
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `m`, the number of central variables.
    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// The nonzero eigenvalues `μ_1..μ_ν`.
    pub fn nonzero_mu(&self) -> &[f64] {
        &self.mu[..self.nu]
    }

    /// Eigenvectors as columns.
    pub fn basis(&self) -> &DMatrix<Complex64> {
        &self.v
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Coefficients `c_j = v_jᴴ z`, split into the nonzero and zero blocks.
    pub fn to_adapted(&self, z: &[Complex64]) -> Result<AdaptedPoint> {
        let n = self.n();
        if z.len() != n {
            return Err(Error::input(format!("z has length {}, expected n = {n}", z.len())));
        }
        let mut coeffs: Vec<Complex64> = (0..n)
            .map(|j| z.iter().enumerate().map(|(i, zi)| self.v[(i, j)].conj() * zi).sum())
            .collect();
        let zpp = coeffs.split_off(self.nu);
        Ok(AdaptedPoint { zp: coeffs, zpp })
    }

    /// Reassembles `z = Σ c_j v_j`.
    pub fn from_adapted(&self, p: &AdaptedPoint) -> Result<Vec<Complex64>> {
        let n = self.n();
        if p.zp.len() != self.nu || p.zp.len() + p.zpp.len() != n {
            return Err(Error::input("adapted point does not match the spectral split"));
        }
        let coeffs: Vec<Complex64> = p.zp.iter().chain(&p.zpp).copied().collect();
        Ok((0..n)
            .map(|i| (0..n).map(|j| self.v[(i, j)] * coeffs[j]).sum())
            .collect())
    }
}

impl Serialize for SpectralData {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.n();
        let v: Vec<Vec<[f64; 2]>> = (0..n)
            .map(|i| (0..n).map(|j| [self.v[(i, j)].re, self.v[(i, j)].im]).collect())
            .collect();
        let mut st = serializer.serialize_struct("SpectralData", 5)?;
        st.serialize_field("lambda", &self.lambda)?;
        st.serialize_field("mu", &self.mu)?;
        st.serialize_field("V", &v)?;
        st.serialize_field("nu", &self.nu)?;
        st.serialize_field("tol", &self.tol)?;
        st.end()
    }
}

/// A point of ℂⁿ in the eigenbasis of `φ^λ`: `z′` (rank block) and `z″` (kernel block).
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedPoint {
    pub zp: Vec<Complex64>,
    pub zpp: Vec<Complex64>,
}

impl AdaptedPoint {
    pub fn xp(&self) -> Vec<f64> {
        self.zp.iter().map(|c| c.re).collect()
    }

    pub fn yp(&self) -> Vec<f64> {
        self.zp.iter().map(|c| c.im).collect()
    }

    pub fn xpp(&self) -> Vec<f64> {
        self.zpp.iter().map(|c| c.re).collect()
    }

    pub fn ypp(&self) -> Vec<f64> {
        self.zpp.iter().map(|c| c.im).collect()
    }
}

/// Number of eigenvalues with `|μ_j| > tol`.
pub fn rank_nu(mu: &[f64], tol: f64) -> usize {
    mu.iter().filter(|m| m.abs() > tol).count()
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// The rank cut is `tol_rel·max(1, ‖A‖_F)`. The returned data carries no `λ`;
/// see [`SpectralData::new`].
pub fn eigendecompose(a: &DMatrix<Complex64>, tol_rel: f64) -> Result<SpectralData> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::input("eigendecompose needs a nonempty square matrix"));
    }
    let norm = a.norm();
    if (a - a.adjoint()).norm() > crate::quadric::HERMITIAN_TOLERANCE * norm.max(1.0) {
        return Err(Error::input("matrix is not Hermitian"));
    }
    let (mu_raw, v_raw) = jacobi(a)?;

    let tol = tol_rel * norm.max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (mi, mj) = (mu_raw[i], mu_raw[j]);
        let (zi, zj) = (mi.abs() <= tol, mj.abs() <= tol);
        zi.cmp(&zj)
            .then_with(|| {
                if zi {
                    std::cmp::Ordering::Equal
                } else {
                    mj.abs()
                        .total_cmp(&mi.abs())
                        .then_with(|| (mi < 0.0).cmp(&(mj < 0.0)))
                }
            })
            .then_with(|| i.cmp(&j))
    });
    let mu: Vec<f64> = order.iter().map(|&i| mu_raw[i]).collect();
    let mut v = DMatrix::from_fn(n, n, |r, c| v_raw[(r, order[c])]);

    // Re-orthonormalize within clusters of numerically equal eigenvalues.
    let gap = CLUSTER_GAP * norm.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (mu[end] - mu[end - 1]).abs() < gap {
            end += 1;
        }
        if end - start > 1 {
            gram_schmidt(&mut v, start, end);
        }
        start = end;
    }
    for j in 0..n {
        normalize_phase(&mut v, j);
    }

    let nu = rank_nu(&mu, tol);
    Ok(SpectralData {
        lambda: Vec::new(),
        mu,
        v,
        nu,
        tol,
    })
}

fn off_diagonal_norm(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Raw Jacobi iteration: eigenvalues in diagonal order and the accumulated basis.
fn jacobi(a0: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = a0.nrows();
    let mut a = a0.clone();
    let mut v = DMatrix::<Complex64>::identity(n, n);
    let target = OFF_DIAGONAL_TARGET * a0.norm();

    let mut converged = off_diagonal_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::numeric(
                format!("Jacobi did not converge in {MAX_SWEEPS} sweeps"),
                off_diagonal_norm(&a),
            ));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                // Phase e^{iφ} = apq / r makes the (p, q) block real symmetric.
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U = diag(1, e^{-iφ})·[[c, s], [-s, c]] restricted to (p, q).
                let u_pp = Complex64::new(c, 0.0);
                let u_pq = Complex64::new(s, 0.0);
                let u_qp = -phase.conj() * s;
                let u_qq = phase.conj() * c;
                rotate(&mut a, &mut v, p, q, u_pp, u_pq, u_qp, u_qq);
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
            }
        }
        converged = off_diagonal_norm(&a) <= target;
    }
    Ok(((0..n).map(|i| a[(i, i)].re).collect(), v))
}

/// `A ← Uᴴ A U`, `V ← V U` where `U` is the identity outside rows/cols p, q.
#[allow(clippy::too_many_arguments)]
fn rotate(
    a: &mut DMatrix<Complex64>,
    v: &mut DMatrix<Complex64>,
    p: usize,
    q: usize,
    u_pp: Complex64,
    u_pq: Complex64,
    u_qp: Complex64,
    u_qq: Complex64,
) {
    let n = a.nrows();
    // A ← A U
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * u_pp + aiq * u_qp;
        a[(i, q)] = aip * u_pq + aiq * u_qq;
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * u_pp + viq * u_qp;
        v[(i, q)] = vip * u_pq + viq * u_qq;
    }
    // A ← Uᴴ A
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = u_pp.conj() * apj + u_qp.conj() * aqj;
        a[(q, j)] = u_pq.conj() * apj + u_qq.conj() * aqj;
    }
}

fn gram_schmidt(v: &mut DMatrix<Complex64>, start: usize, end: usize) {
    let n = v.nrows();
    for j in start..end {
        for k in start..j {
            let proj: Complex64 = (0..n).map(|i| v[(i, k)].conj() * v[(i, j)]).sum();
            for i in 0..n {
                let vik = v[(i, k)];
                v[(i, j)] -= proj * vik;
            }
        }
        let norm = (0..n).map(|i| v[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            v[(i, j)] /= norm;
        }
    }
}

fn normalize_phase(v: &mut DMatrix<Complex64>, j: usize) {
    let n = v.nrows();
    let mut best = 0;
    let mut best_abs = -1.0;
    for i in 0..n {
        let a = v[(i, j)].norm();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if best_abs <= 0.0 {
        return;
    }
    let phase = v[(best, j)].conj() / best_abs;
    for i in 0..n {
        v[(i, j)] *= phase;
    }
    v[(best, j)] = Complex64::new(v[(best, j)].norm(), 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        let m = DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&m + m.adjoint()).scale(0.5)
    }

    fn diag_real(d: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(d.len(), d.len(), |i, j| if i == j { c(d[i], 0.0) } else { c(0.0, 0.0) })
    }

    fn check_invariants(a: &DMatrix<Complex64>, sd: &SpectralData) {
        let n = a.nrows();
        let v = sd.basis();
        let unit = (v.adjoint() * v - DMatrix::<Complex64>::identity(n, n)).norm();
        assert!(unit < 1e-10, "unitarity defect {unit}");
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { c(sd.mu()[i], 0.0) } else { c(0.0, 0.0) });
        let resid = (a * v - v * &d).norm();
        assert!(resid < 1e-10 * a.norm().max(1.0), "eigen residual {resid}");
        for (j, m) in sd.mu().iter().enumerate() {
            if j < sd.nu() {
                assert!(m.abs() > sd.tol());
            } else {
                assert!(m.abs() <= sd.tol());
            }
        }
    }

    #[test]
    fn identity_and_diagonal() {
        let sd = eigendecompose(&DMatrix::identity(2, 2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(sd.mu(), &[1.0, 1.0]);
        assert_eq!(sd.nu(), 2);

        let a = diag_real(&[2.0, -1.0, 0.0]);
        let sd = eigendecompose(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(sd.mu(), &[2.0, -1.0, 0.0]);
        assert_eq!(sd.nu(), 2);
        check_invariants(&a, &sd);
    }

    #[test]
    fn ordering_puts_positive_first_on_ties_and_zeros_last() {
        let a = diag_real(&[0.0, -3.0, 1.0, 3.0]);
        let sd = eigendecompose(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(sd.mu(), &[3.0, -3.0, 1.0, 0.0]);
        assert_eq!(sd.nu(), 3);
        // eigenvector of 3 is e_4, of -3 is e_2
        assert_eq!(sd.basis()[(3, 0)], c(1.0, 0.0));
        assert_eq!(sd.basis()[(1, 1)], c(1.0, 0.0));
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=8 {
            for _ in 0..5 {
                let a = random_hermitian(n, &mut rng);
                let sd = eigendecompose(&a, DEFAULT_RANK_TOL).unwrap();
                check_invariants(&a, &sd);
                let d = diag_real(sd.mu());
                let recon = sd.basis() * d * sd.basis().adjoint();
                assert!((recon - &a).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn agrees_with_reference_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 4, 7, 16] {
            let a = random_hermitian(n, &mut rng);
            let ours = eigendecompose(&a, DEFAULT_RANK_TOL).unwrap();
            let mut reference: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
            let mut mine = ours.mu().to_vec();
            reference.sort_by(f64::total_cmp);
            mine.sort_by(f64::total_cmp);
            for (x, y) in mine.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-12 * a.norm().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn phase_convention_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(5, &mut rng);
        let s1 = eigendecompose(&a, DEFAULT_RANK_TOL).unwrap();
        let s2 = eigendecompose(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s1, s2);
        for j in 0..5 {
            let col: Vec<Complex64> = (0..5).map(|i| s1.basis()[(i, j)]).collect();
            let (k, big) = col
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bk, bv), (i, z)| if z.norm() > bv { (i, z.norm()) } else { (bk, bv) });
            assert_eq!(col[k].im, 0.0);
            assert!(col[k].re > 0.0 && (col[k].re - big).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_cluster_is_orthonormal() {
        // Heisenberg-like 5·I rotated by a random unitary, plus a rank-one perturbation.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(4, &mut rng);
        let u = eigendecompose(&h, DEFAULT_RANK_TOL).unwrap().basis().clone();
        let a = &u * diag_real(&[2.0, 2.0, 2.0, -1.0]) * u.adjoint();
        let sd = eigendecompose(&a, DEFAULT_RANK_TOL).unwrap();
        check_invariants(&a, &sd);
        assert!((sd.mu()[0] - 2.0).abs() < 1e-12 && (sd.mu()[3] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_nu(&[0.0, 0.0], 1e-10), 0);
        assert_eq!(rank_nu(&[3.0, -2.0, 1e-16], 1e-10), 2);
        let q = QuadricForm::heisenberg(2);
        let sd = SpectralData::new(&q, &[5.0]).unwrap();
        assert_eq!(sd.nu(), 2);
        assert_eq!(sd.mu(), &[5.0, 5.0]);
        let zero = SpectralData::new(&q, &[0.0]).unwrap();
        assert_eq!(zero.nu(), 0);
        assert_eq!(zero.basis(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn adapted_coordinates() {
        let sd = SpectralData::diagonal(vec![1.0], vec![2.0, 0.0]).unwrap();
        let z = vec![c(1.0, 2.0), c(-3.0, 0.5)];
        let p = sd.to_adapted(&z).unwrap();
        assert_eq!(p.zp, vec![z[0]]);
        assert_eq!(p.zpp, vec![z[1]]);
        assert_eq!(p.xp(), vec![1.0]);
        assert_eq!(p.ypp(), vec![0.5]);
        assert_eq!(sd.from_adapted(&p).unwrap(), z);
        assert!(sd.to_adapted(&z[..1]).is_err());
    }

    #[test]
    fn adapted_coordinates_with_hadamard_basis() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v = DMatrix::from_row_slice(2, 2, &[c(r, 0.0), c(0.0, r), c(r, 0.0), c(0.0, -r)]);
        let sd = SpectralData::from_parts(vec![1.0], vec![1.0, -1.0], v.clone(), 1e-10).unwrap();
        let p = sd.to_adapted(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        // c_j = conj(V[0, j]) for z = e_1
        assert!((p.zp[0] - v[(0, 0)].conj()).norm() < 1e-15);
        assert!((p.zp[1] - v[(0, 1)].conj()).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = eigendecompose(&random_hermitian(3, &mut rng), DEFAULT_RANK_TOL).unwrap();
        for _ in 0..20 {
            let z: Vec<Complex64> = (0..3).map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
            let p = u.to_adapted(&z).unwrap();
            let n2: f64 = z.iter().map(|x| x.norm_sqr()).sum();
            let c2: f64 = p.zp.iter().chain(&p.zpp).map(|x| x.norm_sqr()).sum();
            assert!((n2 - c2).abs() < 1e-12 * n2.max(1.0));
            let back = u.from_adapted(&p).unwrap();
            for (a, b) in back.iter().zip(&z) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn negated_lambda_negates_spectrum_with_same_eigenspaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let a = random_hermitian(4, &mut rng);
            let plus = eigendecompose(&a, DEFAULT_RANK_TOL).unwrap();
            let minus = eigendecompose(&(-a.clone()), DEFAULT_RANK_TOL).unwrap();
            for &mp in plus.mu() {
                let (k, mm) = minus
                    .mu()
                    .iter()
                    .enumerate()
                    .min_by(|x, y| (x.1 + mp).abs().total_cmp(&(y.1 + mp).abs()))
                    .unwrap();
                assert!((mm + mp).abs() < 1e-12);
                let j = plus.mu().iter().position(|x| *x == mp).unwrap();
                let vp = plus.basis().column(j);
                let vm = minus.basis().column(k);
                let pp = vp * vp.adjoint();
                let pm = vm * vm.adjoint();
                assert!((pp - pm).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn serializes_debug_fields() {
        let sd = SpectralData::diagonal(vec![1.0], vec![1.0]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&sd).unwrap();
        assert_eq!(v["nu"], 1);
        assert_eq!(v["mu"][0], 1.0);
        assert!(v["V"].is_array());
        assert!(v["tol"].is_number());
    }
}
