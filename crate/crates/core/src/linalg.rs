//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector, Dyn, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative singular-value cutoff used for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

/// Full SVD with singular values in descending order.
///
/// nalgebra's default convergence threshold occasionally stops early on matrices
/// with clustered singular values (the factors then fail to recompose the input),
/// so this runs with a machine-epsilon threshold and checks the recomposition,
/// falling back to the SVD of the transpose.
pub fn svd(m: &DMatrix<f64>) -> SVD<f64, Dyn, Dyn> {
    let scale = 1.0 + m.amax();
    let accurate = |s: &SVD<f64, Dyn, Dyn>| {
        s.clone().recompose().is_ok_and(|r| (r - m).amax() <= SVD_RECOMPOSE_TOL * scale)
    };
    let mut best = None;
    if let Some(s) = SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_ITER) {
        if accurate(&s) {
            return sorted(s);
        }
        best = Some(s);
    }
    if let Some(t) = SVD::try_new(m.transpose(), true, true, f64::EPSILON, SVD_MAX_ITER) {
        let s = SVD {
            u: t.v_t.map(|v| v.transpose()),
            v_t: t.u.map(|u| u.transpose()),
            singular_values: t.singular_values,
        };
        if accurate(&s) || best.is_none() {
            return sorted(s);
        }
    }
    sorted(best.unwrap_or_else(|| m.clone().svd(true, true)))
}

const SVD_RECOMPOSE_TOL: f64 = 1e-12;
const SVD_MAX_ITER: usize = 100_000;

fn sorted(mut s: SVD<f64, Dyn, Dyn>) -> SVD<f64, Dyn, Dyn> {
    s.sort_by_singular_values();
    s
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    svd(m).singular_values
}

/// Number of singular values above `RANK_RTOL * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let top = sv.iter().cloned().fold(0.0_f64, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * top).count()
}

/// Moore–Penrose pseudoinverse with the same relative cutoff as [`numerical_rank`].
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = svd(m);
    let top = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if top > 0.0 && s > RANK_RTOL * top {
            out += (v_t.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    out
}

/// Eigenvalues via a real Schur decomposition with a bounded iteration count.
/// `None` when the QR iteration does not converge.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<DVector<Complex64>> {
    Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER).map(|s| s.complex_eigenvalues())
}

const SCHUR_EPS: f64 = 1e-12;
const SCHUR_MAX_ITER: usize = 10_000;

/// Schatten p-norm from singular values; `p = f64::INFINITY` gives the spectral norm.
pub fn schatten(m: &DMatrix<f64>, p: f64) -> f64 {
    let sv = singular_values(m);
    if p.is_infinite() {
        sv.iter().cloned().fold(0.0_f64, f64::max)
    } else if p == 1.0 {
        sv.iter().sum()
    } else {
        sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Modified Gram–Schmidt over `candidates`, keeping vectors that are
/// independent of everything already accepted (including `against`).
/// Returns the accepted vectors, normalized, in order.
fn gram_schmidt(
    against: &[DVector<f64>],
    candidates: impl IntoIterator<Item = DVector<f64>>,
    want: usize,
) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = against.iter().map(|v| v.normalize()).collect();
    let fixed = basis.len();
    for mut c in candidates {
        if basis.len() - fixed == want {
            break;
        }
        let scale = c.norm();
        // two passes keep the result orthogonal to machine precision
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&c);
                c -= b * proj;
            }
        }
        let n = c.norm();
        if n > 1e-8 * scale.max(1e-300) {
            basis.push(c / n);
        }
    }
    basis.split_off(fixed)
}

/// Deterministic orthonormal completion: `dim - 1` orthonormal rows orthogonal to `v`,
/// obtained by sweeping the standard basis.
pub fn orthonormal_complement(v: &DVector<f64>) -> DMatrix<f64> {
    let dim = v.len();
    let cands = (0..dim).map(|i| {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        e
    });
    rows_to_matrix(&gram_schmidt(std::slice::from_ref(v), cands, dim - 1), dim)
}

/// `count` random orthonormal rows of length `dim`, orthogonal to every vector in
/// `against`, drawn by Gram–Schmidt on standard-normal vectors.
pub fn random_orthonormal_rows<R: Rng + ?Sized>(
    count: usize,
    dim: usize,
    against: &[DVector<f64>],
    rng: &mut R,
) -> DMatrix<f64> {
    let mut rows = Vec::with_capacity(count);
    while rows.len() < count {
        let cands = (0..count - rows.len()).map(|_| random_normal_vector(dim, rng));
        let mut all: Vec<DVector<f64>> = against.to_vec();
        all.extend(rows.iter().cloned());
        rows.extend(gram_schmidt(&all, cands, count - rows.len()));
    }
    rows_to_matrix(&rows, dim)
}

pub fn random_normal_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

pub fn random_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn rows_to_matrix(rows: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j])
}

/// Orthogonal projector onto the column span of `m`.
pub fn column_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    m * pinv(m)
}

/// Largest `t` in `[0, hi]` with `feasible(t)`, assuming feasibility is an interval
/// containing 0. `feasible(0)` is assumed true. Uses `iters` rounds of bisection.
pub fn bisect_feasible(feasible: impl Fn(f64) -> bool, hi: f64, iters: usize) -> f64 {
    if feasible(hi) {
        return hi;
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let v = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
        let b = orthonormal_complement(&v);
        assert_eq!(b.shape(), (3, 4));
        assert!((&b * b.transpose() - DMatrix::identity(3, 3)).norm() < 1e-14);
        assert!((&b * &v).norm() < 1e-14);
    }

    #[test]
    fn complement_of_unit_vector_is_standard_basis() {
        let mut v = DVector::zeros(4);
        v[0] = 1.0;
        let b = orthonormal_complement(&v);
        let mut expect = DMatrix::zeros(3, 4);
        for i in 0..3 {
            expect[(i, i + 1)] = 1.0;
        }
        assert!((b - expect).norm() < 1e-15);
    }

    #[test]
    fn random_rows_respect_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = ones(7);
        let r = random_orthonormal_rows(4, 7, std::slice::from_ref(&u), &mut rng);
        assert!((&r * r.transpose() - DMatrix::identity(4, 4)).norm() < 1e-13);
        assert!((&r * &u).norm() < 1e-13);
    }

    #[test]
    fn pinv_of_tall_matrix_is_left_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_normal_matrix(6, 3, &mut rng);
        let p = pinv(&a);
        assert!((&p * &a - DMatrix::identity(3, 3)).norm() < 1e-12);
        assert_eq!(numerical_rank(&a), 3);
    }

    #[test]
    fn eigenvalues_of_repeated_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_normal_matrix(5, 5, &mut rng).qr().q();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0, 3.0, 3.0]));
        let mut ev: Vec<f64> = eigenvalues(&(&q * d * q.transpose())).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([0.0, 0.0, 1.0, 3.0, 3.0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn svd_recomposes_clustered_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let u = random_normal_matrix(8, 8, &mut rng).qr().q();
            let v = random_normal_matrix(8, 8, &mut rng).qr().q();
            let s = DVector::from_vec(vec![1.0, 0.04, 0.04, 0.04, 1e-17, 0.0, 0.0, 0.0]);
            let m = &u * DMatrix::from_diagonal(&s) * v.transpose();
            let f = svd(&m);
            assert!((f.recompose().unwrap() - &m).amax() < 1e-12);
            assert!((&m * pinv(&m) * &m - &m).amax() < 1e-12);
            assert_eq!(numerical_rank(&m), 4);
        }
    }

    #[test]
    fn schatten_norms_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -4.0, 0.0]));
        assert!((schatten(&m, 1.0) - 7.0).abs() < 1e-12);
        assert!((schatten(&m, 2.0) - 5.0).abs() < 1e-12);
        assert!((schatten(&m, f64::INFINITY) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bisection_finds_boundary() {
        let t = bisect_feasible(|x| x <= 0.3, 1.0, 60);
        assert!((t - 0.3).abs() < 1e-15);
        assert_eq!(bisect_feasible(|x| x <= 2.0, 1.0, 60), 1.0);
    }
}
