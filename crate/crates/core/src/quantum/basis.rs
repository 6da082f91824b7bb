//! Hermitian operator bases and the coordinate convention used for quantum spaces.
//!
//! States are written `(tr ρ, sqrt(d/2) tr(λ_k ρ))` and effects
//! `(tr E / d, tr(E λ_k) / sqrt(2d))`, where `λ_k` are generalized Gell-Mann
//! matrices normalized to `tr(λ_j λ_k) = 2 δ_jk`. The plain dot product of the
//! two coordinate vectors is `tr(E ρ)`, the unit effect is `(1, 0, …, 0)`, and a
//! pure effect `E = tr(E) ρ` has effect coordinates `w · (state coordinates of ρ)`
//! with `w = tr(E)/d`. For `d = 2` this reduces to `(1, ⟨σ⟩)` for states and
//! `(tr E/2, tr(Eσ)/2)` for effects.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Number field of the underlying Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Complex,
    Real,
}

impl Field {
    /// Real dimension of the Hermitian (or real symmetric) operators on `C^d` (or `R^d`).
    pub fn operator_dim(self, d: usize) -> usize {
        match self {
            Field::Complex => d * d,
            Field::Real => d * (d + 1) / 2,
        }
    }
}

/// Traceless generalized Gell-Mann matrices, ordered as (symmetric, antisymmetric)
/// pairs for each `j < k`, followed by the diagonal ones. The real field keeps only
/// the symmetric and diagonal members. For `d = 2` this yields `σx, σy, σz`.
pub fn gell_mann(field: Field, d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(field.operator_dim(d) - 1);
    for j in 0..d {
        for k in (j + 1)..d {
            let mut s = CMatrix::zeros(d, d);
            s[(j, k)] = ONE;
            s[(k, j)] = ONE;
            out.push(s);
            if field == Field::Complex {
                let mut a = CMatrix::zeros(d, d);
                a[(j, k)] = -I;
                a[(k, j)] = I;
                out.push(a);
            }
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = Complex64::new(norm, 0.0);
        }
        m[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
        out.push(m);
    }
    out
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `tr(A† B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `tr(A B)` for Hermitian `A` (no conjugation needed), real part.
fn tr_prod_re(a: &CMatrix, b: &CMatrix) -> f64 {
    // tr(AB) = Σ_ij A_ij B_ji
    let d = a.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// State coordinates `(tr ρ, sqrt(d/2) tr(λ_k ρ))`.
pub fn state_coords(basis: &[CMatrix], rho: &CMatrix) -> DVector<f64> {
    let d = rho.nrows() as f64;
    let scale = (d / 2.0).sqrt();
    let mut v = DVector::zeros(basis.len() + 1);
    v[0] = trace(rho).re;
    for (k, lam) in basis.iter().enumerate() {
        v[k + 1] = scale * tr_prod_re(lam, rho);
    }
    v
}

/// Effect coordinates `(tr E / d, tr(E λ_k) / sqrt(2d))`.
pub fn effect_coords(basis: &[CMatrix], e: &CMatrix) -> DVector<f64> {
    let d = e.nrows() as f64;
    let scale = 1.0 / (2.0 * d).sqrt();
    let mut v = DVector::zeros(basis.len() + 1);
    v[0] = trace(e).re / d;
    for (k, lam) in basis.iter().enumerate() {
        v[k + 1] = scale * tr_prod_re(lam, e);
    }
    v
}

/// Inverse of [`state_coords`].
pub fn state_operator(basis: &[CMatrix], d: usize, coords: &DVector<f64>) -> CMatrix {
    effect_operator(basis, d, coords) / Complex64::new(d as f64, 0.0)
}

/// Inverse of [`effect_coords`].
pub fn effect_operator(basis: &[CMatrix], d: usize, coords: &DVector<f64>) -> CMatrix {
    let scale = (d as f64 / 2.0).sqrt();
    let mut m = identity(d) * Complex64::new(coords[0], 0.0);
    for (k, lam) in basis.iter().enumerate() {
        m += lam * Complex64::new(scale * coords[k + 1], 0.0);
    }
    m
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// An operator on `C^d` together with its row vectorization.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRep {
    pub matrix: CMatrix,
}

impl OperatorRep {
    pub fn new(matrix: CMatrix) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "operator must be square");
        Self { matrix }
    }

    pub fn d(&self) -> usize {
        self.matrix.nrows()
    }

    /// `|A)`: the rows of `A` laid end to end.
    pub fn vectorized(&self) -> DVector<Complex64> {
        let d = self.d();
        DVector::from_fn(d * d, |idx, _| self.matrix[(idx / d, idx % d)])
    }

    pub fn from_vectorized(v: &DVector<Complex64>) -> Self {
        let d = (v.len() as f64).sqrt().round() as usize;
        assert_eq!(d * d, v.len(), "vector length must be a square");
        Self::new(CMatrix::from_fn(d, d, |i, j| v[i * d + j]))
    }

    /// `(A|B) = tr(A† B)`.
    pub fn inner(&self, other: &OperatorRep) -> Complex64 {
        hs_inner(&self.matrix, &other.matrix)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn purity(&self) -> f64 {
        tr_prod_re(&self.matrix, &self.matrix)
    }

    pub fn to_json(&self) -> OperatorJson {
        let d = self.d();
        OperatorJson {
            re: (0..d).map(|i| (0..d).map(|j| self.matrix[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| self.matrix[(i, j)].im).collect()).collect(),
        }
    }

    pub fn from_json(j: &OperatorJson) -> Option<Self> {
        let d = j.re.len();
        if j.im.len() != d || j.re.iter().chain(j.im.iter()).any(|r| r.len() != d) {
            return None;
        }
        Some(Self::new(CMatrix::from_fn(d, d, |a, b| {
            Complex64::new(j.re[a][b], j.im[a][b])
        })))
    }
}

/// Serialized operator: real and imaginary parts as row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// Identity followed by the traceless Gell-Mann operators: `d²` elements for the
/// complex field and `d(d+1)/2` for the real one, pairwise Hilbert–Schmidt orthogonal.
pub fn operator_basis(field: Field, d: usize) -> Vec<OperatorRep> {
    std::iter::once(identity(d))
        .chain(gell_mann(field, d))
        .map(OperatorRep::new)
        .collect()
}

/// Ket outer product `|ψ⟩⟨ψ|`.
pub fn projector(psi: &DVector<Complex64>) -> CMatrix {
    psi * psi.adjoint()
}

pub fn zero_matrix(d: usize) -> CMatrix {
    CMatrix::from_element(d, d, ZERO)
}
