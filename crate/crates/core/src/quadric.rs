//! The quadric form `φ: ℂⁿ×ℂⁿ → ℂᵐ` and the group law it induces on ℂⁿ×ℝᵐ.
//!
//! Component `k` of the form is `φ_k(z, w) = wᴴ A_k z` for a Hermitian
//! matrix `A_k`: linear in the first slot, conjugate-linear in the second.
//! With this convention the eigenvectors of `A^λ = Σ λ_k A_k` diagonalize
//! `φ^λ(z, w) = φ(z, w)·λ` directly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative Hermitian defect accepted (and symmetrized away) on construction.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// `m` Hermitian `n×n` matrices defining `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuadricJson", into = "QuadricJson")]
pub struct QuadricForm {
    n: usize,
    a: Vec<DMatrix<Complex64>>,
}

impl QuadricForm {
    /// Builds a form from its component matrices.
    ///
    /// Matrices whose Hermitian defect `‖A − Aᴴ‖_F` is at most
    /// `1e-10·max(1, ‖A‖_F)` are replaced by `(A + Aᴴ)/2`; larger defects are
    /// rejected.
    pub fn new(a: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let first = a
            .first()
            .ok_or_else(|| Error::input("quadric needs at least one component matrix (m ≥ 1)"))?;
        let n = first.nrows();
        if n == 0 {
            return Err(Error::input("quadric dimension n must be positive"));
        }
        let mut sym = Vec::with_capacity(a.len());
        for (k, mat) in a.into_iter().enumerate() {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::input(format!(
                    "A[{k}] is {}×{}, expected {n}×{n}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if mat.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::input(format!("A[{k}] has non-finite entries")));
            }
            let adj = mat.adjoint();
            let defect = (&mat - &adj).norm();
            if defect > HERMITIAN_TOLERANCE * mat.norm().max(1.0) {
                return Err(Error::input(format!(
                    "A[{k}] is not Hermitian (defect {defect:e})"
                )));
            }
            sym.push((mat + adj).scale(0.5));
        }
        Ok(Self { n, a: sym })
    }

    /// The Heisenberg group `φ(z, w) = wᴴz` in ℂⁿ (m = 1, A₁ = I).
    pub fn heisenberg(n: usize) -> Self {
        Self {
            n,
            a: vec![DMatrix::identity(n, n)],
        }
    }

    /// A single-component form with real diagonal `A₁ = diag(d)`.
    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mat = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(vec![mat])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.a
    }

    fn check_vec(&self, name: &str, v: &[Complex64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::input(format!(
                "{name} has length {}, expected n = {}",
                v.len(),
                self.n
            )));
        }
        Ok(())
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.m() {
            return Err(Error::input(format!(
                "lambda has length {}, expected m = {}",
                lambda.len(),
                self.m()
            )));
        }
        Ok(())
    }

    /// `(φ_1(z, w), …, φ_m(z, w))` with `φ_k(z, w) = wᴴ A_k z`.
    pub fn phi_eval(&self, z: &[Complex64], w: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_vec("z", z)?;
        self.check_vec("w", w)?;
        Ok(self.a.iter().map(|ak| sesquilinear(ak, z, w)).collect())
    }

    /// `λ·Im φ(z, w)`, the quantity entering the twisted-convolution phase.
    pub fn lambda_im_phi(&self, lambda: &[f64], z: &[Complex64], w: &[Complex64]) -> Result<f64> {
        self.check_lambda(lambda)?;
        let phi = self.phi_eval(z, w)?;
        Ok(phi.iter().zip(lambda).map(|(p, l)| p.im * l).sum())
    }

    /// The Hermitian matrix `A^λ = Σ_k λ_k A_k` of the scalar form `φ^λ`.
    pub fn phi_lambda_matrix(&self, lambda: &[f64]) -> Result<DMatrix<Complex64>> {
        self.check_lambda(lambda)?;
        let mut out = DMatrix::zeros(self.n, self.n);
        for (ak, &l) in self.a.iter().zip(lambda) {
            if l != 0.0 {
                out += ak.scale(l);
            }
        }
        Ok(out)
    }

    /// Group law `(z, t)(z′, t′) = (z + z′, t + t′ + 2 Im φ(z, z′))`.
    pub fn group_mul(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check_element(g)?;
        self.check_element(h)?;
        let phi = self.phi_eval(&g.z, &h.z)?;
        let z = g.z.iter().zip(&h.z).map(|(a, b)| a + b).collect();
        let t = g
            .t
            .iter()
            .zip(&h.t)
            .zip(&phi)
            .map(|((a, b), p)| a + b + 2.0 * p.im)
            .collect();
        Ok(GroupElement { z, t })
    }

    fn check_element(&self, g: &GroupElement) -> Result<()> {
        self.check_vec("z", &g.z)?;
        if g.t.len() != self.m() {
            return Err(Error::input(format!(
                "t has length {}, expected m = {}",
                g.t.len(),
                self.m()
            )));
        }
        Ok(())
    }
}

/// `wᴴ A z`.
fn sesquilinear(a: &DMatrix<Complex64>, z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let n = z.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..n {
            row += a[(i, j)] * z[j];
        }
        acc += w[i].conj() * row;
    }
    acc
}

/// A point `g = (z, t)` of ℂⁿ×ℝᵐ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub z: Vec<Complex64>,
    pub t: Vec<f64>,
}

impl GroupElement {
    pub fn new(z: Vec<Complex64>, t: Vec<f64>) -> Self {
        Self { z, t }
    }

    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            z: vec![Complex64::new(0.0, 0.0); n],
            t: vec![0.0; m],
        }
    }
}

/// The inverse `(−z, −t)`.
pub fn group_inverse(g: &GroupElement) -> GroupElement {
    GroupElement {
        z: g.z.iter().map(|c| -c).collect(),
        t: g.t.iter().map(|x| -x).collect(),
    }
}

// JSON layout: {"n": int, "m": int, "A": [matrix, ...]} with each matrix a
// row-major list of [re, im] pairs. Nested row lists are accepted on input.

#[derive(Serialize, Deserialize)]
struct QuadricJson {
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<MatrixJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixJson {
    Flat(Vec<[f64; 2]>),
    Rows(Vec<Vec<[f64; 2]>>),
}

impl TryFrom<QuadricJson> for QuadricForm {
    type Error = Error;

    fn try_from(raw: QuadricJson) -> Result<Self> {
        if raw.a.len() != raw.m {
            return Err(Error::input(format!(
                "field A has {} matrices but m = {}",
                raw.a.len(),
                raw.m
            )));
        }
        let n = raw.n;
        let mut mats = Vec::with_capacity(raw.m);
        for (k, mj) in raw.a.into_iter().enumerate() {
            let flat: Vec<[f64; 2]> = match mj {
                MatrixJson::Flat(v) => v,
                MatrixJson::Rows(rows) => {
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(Error::input(format!("A[{k}] must have {n} rows of {n} entries")));
                    }
                    rows.into_iter().flatten().collect()
                }
            };
            if flat.len() != n * n {
                return Err(Error::input(format!(
                    "A[{k}] has {} entries, expected n² = {}",
                    flat.len(),
                    n * n
                )));
            }
            mats.push(DMatrix::from_row_iterator(
                n,
                n,
                flat.into_iter().map(|[re, im]| Complex64::new(re, im)),
            ));
        }
        let q = QuadricForm::new(mats)?;
        if q.n != n {
            return Err(Error::input("field n does not match the matrices"));
        }
        Ok(q)
    }
}

impl From<QuadricForm> for QuadricJson {
    fn from(q: QuadricForm) -> Self {
        let n = q.n;
        let a = q
            .a
            .iter()
            .map(|mat| {
                let mut flat = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let c = mat[(i, j)];
                        flat.push([c.re, c.im]);
                    }
                }
                MatrixJson::Flat(flat)
            })
            .collect();
        QuadricJson { n, m: q.a.len(), a }
    }
}
