//! Born matrices: {1}-inverses `Φ` of the self-conditional matrix `P = P(E|E)`,
//! the Born rule `P(A) = P(A|E) Φ P(E)`, Protourgleichung checks and the LTP
//! deformation `‖I − Φ‖`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{depolarizing_fit, ReferenceDevice, MEASUREMENT_TOL};
use crate::error::{Error, Result};
use crate::linalg;

/// Verification threshold for Born identities and Protourgleichung residuals.
pub const VERIFY_TOL: f64 = 1e-8;
/// A Protourgleichung is disproved only when the residual exceeds this.
pub const DISPROOF_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Natural,
    Simple,
    MinimalFrobenius,
    /// Best-effort Schatten-1 or Schatten-∞ minimizer, no optimality certificate.
    MinimalSchatten,
    GenericOneInverse,
    MicInverse,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Natural => "natural",
            Provenance::Simple => "simple",
            Provenance::MinimalFrobenius => "minimal_frobenius",
            Provenance::MinimalSchatten => "minimal_schatten",
            Provenance::GenericOneInverse => "generic_one_inverse",
            Provenance::MicInverse => "mic_inverse",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BornMatrix {
    pub phi: DMatrix<f64>,
    pub provenance: Provenance,
}

impl BornMatrix {
    fn new(phi: DMatrix<f64>, provenance: Provenance) -> Self {
        Self { phi, provenance }
    }
}

/// Quasi-probability vector `W(E)`; entries may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiProbability {
    pub w: DVector<f64>,
}

impl QuasiProbability {
    pub fn total(&self) -> f64 {
        self.w.sum()
    }

    pub fn min(&self) -> f64 {
        self.w.min()
    }
}

/// `Φ = P⁻¹` for a minimal IC device.
pub fn mic_born_matrix(device: &ReferenceDevice) -> Result<BornMatrix> {
    let (n, r) = (device.n(), device.r());
    if n != r {
        return Err(Error::NotMic { n, r });
    }
    let p = device.self_conditional();
    let rank = linalg::numerical_rank(p);
    if rank < n {
        return Err(Error::RankMismatch { expected: n, found: rank });
    }
    let inv = p.clone().try_inverse().ok_or(Error::Singular)?;
    Ok(BornMatrix::new(inv, Provenance::MicInverse))
}

/// `Φ = w uᵀ + α² Zt X`, the group inverse of `P`.
pub fn natural_born_matrix(device: &ReferenceDevice) -> Result<BornMatrix> {
    let alpha = device.require_alpha("natural Born matrix")?;
    let m = device.measurement();
    let phi = m.w() * linalg::ones(m.n()).transpose() + device.zt_x() * (alpha * alpha);
    Ok(BornMatrix::new(phi, Provenance::Natural))
}

/// `Φ = I + α(α − 1) Zt X`.
pub fn simple_born_matrix(device: &ReferenceDevice) -> Result<BornMatrix> {
    let alpha = device.require_alpha("simple Born matrix")?;
    let n = device.n();
    let phi = DMatrix::identity(n, n) + device.zt_x() * (alpha * (alpha - 1.0));
    Ok(BornMatrix::new(phi, Provenance::Simple))
}

/// Closed-form Frobenius minimizer of `‖I − Φ‖` for unbiased depolarizing devices:
/// `Φ = I + ((α − 1)/α) Xᵀ (X Xᵀ)⁻¹ (Z Zᵀ)⁻¹ Z`.
pub fn minimal_frobenius_born_matrix(device: &ReferenceDevice) -> Result<BornMatrix> {
    let alpha = device.require_alpha("closed-form minimal Born matrix")?;
    let m = device.measurement();
    if !m.is_unbiased(MEASUREMENT_TOL) {
        return Err(Error::UnsupportedBias { deviation: m.bias_deviation() });
    }
    let x = device.states().x();
    let z = m.z();
    let xxt = (&x * x.transpose()).try_inverse().ok_or(Error::Singular)?;
    let zzt = (&z * z.transpose()).try_inverse().ok_or(Error::Singular)?;
    let n = m.n();
    let phi = DMatrix::identity(n, n) + x.transpose() * xxt * zzt * z * ((alpha - 1.0) / alpha);
    Ok(BornMatrix::new(phi, Provenance::MinimalFrobenius))
}

/// Thin SVD pieces of `P` restricted to its numerical rank.
struct RankedSvd {
    u_r: DMatrix<f64>,
    v_r: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

fn ranked_svd(p: &DMatrix<f64>, expected_rank: Option<usize>) -> Result<RankedSvd> {
    if !p.is_square() {
        return Err(Error::DimensionMismatch { expected: p.nrows(), found: p.ncols() });
    }
    let rank = linalg::numerical_rank(p);
    if let Some(expected) = expected_rank {
        if rank != expected {
            return Err(Error::RankMismatch { expected, found: rank });
        }
    }
    let svd = linalg::svd(p);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    Ok(RankedSvd { u_r: u.columns(0, rank).into_owned(), v_r: v.columns(0, rank).into_owned(), pinv: linalg::pinv(p) })
}

/// Orthogonal projection of `psi` onto the affine set `{Φ : P Φ P = P}`.
fn project_onto_one_inverses(psi: &DMatrix<f64>, svd: &RankedSvd) -> DMatrix<f64> {
    let vv = &svd.v_r * svd.v_r.transpose();
    let uu = &svd.u_r * svd.u_r.transpose();
    psi - vv * (psi - &svd.pinv) * uu
}

/// Numeric minimizer of the Schatten-`p` deformation `‖I − Φ‖_p` subject to `P Φ P = P`.
///
/// `p = 2` is solved exactly by projecting `I` onto the affine constraint set.
/// `p = 1` and `p = ∞` run projected subgradient descent started from the `p = 2`
/// solution and return the best iterate found.
pub fn minimal_born_matrix_numeric(p_matrix: &DMatrix<f64>, norm_p: f64, expected_rank: Option<usize>) -> Result<BornMatrix> {
    let svd = ranked_svd(p_matrix, expected_rank)?;
    let n = p_matrix.nrows();
    let id = DMatrix::identity(n, n);
    let frob = project_onto_one_inverses(&id, &svd);
    if norm_p == 2.0 {
        return Ok(BornMatrix::new(frob, Provenance::MinimalFrobenius));
    }
    if norm_p != 1.0 && !norm_p.is_infinite() {
        return Err(Error::Precondition(format!("Schatten p = {norm_p} is not supported (use 1, 2 or inf)")));
    }
    let objective = |phi: &DMatrix<f64>| linalg::schatten(&(&id - phi), norm_p);
    let mut best = frob.clone();
    let mut best_val = objective(&best);
    let mut phi = frob;
    for k in 0..2000 {
        let d = &id - &phi;
        let svd_d = linalg::svd(&d);
        let (u, vt) = (svd_d.u.expect("u"), svd_d.v_t.expect("v_t"));
        let s = &svd_d.singular_values;
        let top = s.max();
        // subgradient of ‖I − Φ‖ with respect to Φ is −G
        let mut g = DMatrix::zeros(n, n);
        for i in 0..s.len() {
            let include = if norm_p.is_infinite() { s[i] >= top - 1e-12 } else { s[i] > 1e-14 };
            if include {
                g += u.column(i) * vt.row(i);
            }
        }
        let step = 0.5 * best_val.max(1e-3) / (n as f64 * (1.0 + k as f64).sqrt());
        phi = project_onto_one_inverses(&(&phi + g * step), &svd);
        let val = objective(&phi);
        if val < best_val {
            best_val = val;
            best = phi.clone();
        }
    }
    Ok(BornMatrix::new(best, Provenance::MinimalSchatten))
}

/// Free blocks of a generic {1}-inverse `Φ = V [Σ_r⁻¹, A; B, C] Uᵀ`.
#[derive(Debug, Clone, Default)]
pub struct OneInverseBlocks {
    /// `r × (n − r)`.
    pub a: Option<DMatrix<f64>>,
    /// `(n − r) × r`.
    pub b: Option<DMatrix<f64>>,
    /// `(n − r) × (n − r)`.
    pub c: Option<DMatrix<f64>>,
}

impl OneInverseBlocks {
    /// Standard-normal blocks sized for an `n × n` matrix of rank `r`.
    pub fn random<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Self {
        let k = n - r;
        Self {
            a: Some(linalg::random_normal_matrix(r, k, rng)),
            b: Some(linalg::random_normal_matrix(k, r, rng)),
            c: Some(linalg::random_normal_matrix(k, k, rng)),
        }
    }
}

/// Generic {1}-inverse of `P` from its SVD. All-zero blocks give the Moore–Penrose inverse.
pub fn generic_one_inverse(p_matrix: &DMatrix<f64>, blocks: &OneInverseBlocks) -> Result<BornMatrix> {
    if !p_matrix.is_square() {
        return Err(Error::DimensionMismatch { expected: p_matrix.nrows(), found: p_matrix.ncols() });
    }
    let n = p_matrix.nrows();
    let r = linalg::numerical_rank(p_matrix);
    let k = n - r;
    let svd = linalg::svd(p_matrix);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    let mut core = DMatrix::zeros(n, n);
    for i in 0..r {
        core[(i, i)] = 1.0 / svd.singular_values[i];
    }
    let mut place = |m: &Option<DMatrix<f64>>, row: usize, col: usize, shape: (usize, usize)| -> Result<()> {
        if let Some(m) = m {
            if m.shape() != shape {
                return Err(Error::DimensionMismatch { expected: shape.0 * shape.1, found: m.len() });
            }
            core.view_mut((row, col), shape).copy_from(m);
        }
        Ok(())
    };
    place(&blocks.a, 0, r, (r, k))?;
    place(&blocks.b, r, 0, (k, r))?;
    place(&blocks.c, r, r, (k, k))?;
    Ok(BornMatrix::new(v * core * u.transpose(), Provenance::GenericOneInverse))
}

/// `max(‖S Φ E − I‖_F, ‖P Φ P − P‖_F)`.
pub fn verify_born_identity(device: &ReferenceDevice, phi: &DMatrix<f64>) -> f64 {
    let r = device.r();
    let s = device.states().matrix();
    let e = device.measurement().effects();
    let p = device.self_conditional();
    let born = (s * phi * e - DMatrix::identity(r, r)).norm();
    let one_inverse = (p * phi * p - p).norm();
    born.max(one_inverse)
}

/// `P(A|E)` for a measurement with Bloch effect rows `a_effects`: entry `(k, j)` is `(A_k|S_j)`.
pub fn conditional_matrix(device: &ReferenceDevice, a_effects: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a_effects.ncols() != device.r() {
        return Err(Error::DimensionMismatch { expected: device.r(), found: a_effects.ncols() });
    }
    Ok(a_effects * device.states().matrix())
}

/// `P(A) = P(A|E) Φ P(E)`.
pub fn apply_born_rule(conditional: &DMatrix<f64>, phi: &DMatrix<f64>, p_e: &DVector<f64>) -> Result<DVector<f64>> {
    let n = phi.nrows();
    if !phi.is_square() {
        return Err(Error::DimensionMismatch { expected: n, found: phi.ncols() });
    }
    if conditional.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: conditional.ncols() });
    }
    if p_e.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p_e.len() });
    }
    Ok(conditional * phi * p_e)
}

/// `W = α P(E) + (1 − α) w` for a depolarizing device.
pub fn quasi_probability(device: &ReferenceDevice, state: &DVector<f64>) -> Result<QuasiProbability> {
    let alpha = device.require_alpha("quasi-probability")?;
    if state.len() != device.r() {
        return Err(Error::DimensionMismatch { expected: device.r(), found: state.len() });
    }
    let p = device.measurement().probabilities(state);
    Ok(QuasiProbability { w: p * alpha + device.measurement().w() * (1.0 - alpha) })
}

fn candidate_alpha(device: &ReferenceDevice) -> f64 {
    device.alpha().unwrap_or_else(|| depolarizing_fit(device).alpha)
}

/// `max_ρ ‖Φ P(E) − [α P(E) + (1 − α) w]‖_∞` over the given Bloch states. `α` is the
/// device's own, or the fitted one when the device does not carry it.
pub fn protourgleichung_residual(device: &ReferenceDevice, phi: &DMatrix<f64>, sample_states: &[DVector<f64>]) -> f64 {
    let alpha = candidate_alpha(device);
    let m = device.measurement();
    let w = m.w();
    sample_states
        .iter()
        .map(|rho| {
            let p = m.probabilities(rho);
            let target = &p * alpha + &w * (1.0 - alpha);
            linalg::max_abs_vec(&(phi * p - target))
        })
        .fold(0.0, f64::max)
}

/// State-independent Protourgleichung defect `max(‖Φ w − w‖_∞, max|(Φ − αI) Zt|)`.
/// Zero exactly when the sampled residual vanishes on every state, since
/// `P(E) = w + Zt ρ₀` and the traceless parts `ρ₀` span.
pub fn protourgleichung_defect(device: &ReferenceDevice, phi: &DMatrix<f64>) -> f64 {
    let alpha = candidate_alpha(device);
    let m = device.measurement();
    let n = m.n();
    let w = m.w();
    let a = linalg::max_abs_vec(&(phi * &w - &w));
    let b = linalg::max_abs(&((phi - DMatrix::identity(n, n) * alpha) * m.zt()));
    a.max(b)
}

/// Schatten-`p` norm of `I − Φ`.
pub fn ltp_deformation(phi: &DMatrix<f64>, p: f64) -> f64 {
    let n = phi.nrows();
    linalg::schatten(&(DMatrix::identity(n, n) - phi), p)
}

/// Key used in deformation maps: `p1`, `p2`, `pinf`.
pub fn schatten_key(p: f64) -> String {
    if p.is_infinite() {
        "pinf".to_string()
    } else {
        format!("p{p}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BornResiduals {
    pub born_identity: f64,
    pub protourgleichung: f64,
}

/// JSON view of a Born matrix with its residuals and deformations.
#[derive(Debug, Clone, Serialize)]
pub struct BornReport {
    pub phi: Vec<Vec<f64>>,
    pub provenance: Provenance,
    pub residuals: BornResiduals,
    pub deformation: BTreeMap<String, f64>,
}

/// Residuals use [`verify_born_identity`] and [`protourgleichung_defect`].
pub fn born_report(device: &ReferenceDevice, born: &BornMatrix, schatten_p: &[f64]) -> BornReport {
    BornReport {
        phi: linalg::to_rows(&born.phi),
        provenance: born.provenance,
        residuals: BornResiduals {
            born_identity: verify_born_identity(device, &born.phi),
            protourgleichung: protourgleichung_defect(device, &born.phi),
        },
        deformation: schatten_p.iter().map(|&p| (schatten_key(p), ltp_deformation(&born.phi, p))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{
        classical_identity_measurement, depolarizing_device, parallel_update_device,
        random_ic_measurement, LeftInverse, Sign,
    };
    use crate::quantum;
    use crate::space::{make_space, SpaceKind};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn uut(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, n, 1.0)
    }

    fn random_device(kind: SpaceKind, n: usize, seed: u64) -> ReferenceDevice {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = Arc::new(make_space(kind).unwrap());
        let m = random_ic_measurement(space, n, None, &mut rng).unwrap();
        depolarizing_device(m, &LeftInverse::Pseudoinverse, Sign::Plus).unwrap()
    }

    #[test]
    fn qubit_sic_mic_inverse() {
        let dev = quantum::sic_d2();
        let phi = mic_born_matrix(&dev).unwrap().phi;
        // Sherman–Morrison: ((1/3) I + (1/6) uuᵀ)⁻¹ = 3I − (1/2) uuᵀ
        let expect = DMatrix::identity(4, 4) * 3.0 - uut(4) * 0.5;
        assert!((&phi - &expect).amax() < 1e-12);
        assert!((dev.self_conditional() * &phi - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn d3_sic_mic_inverse() {
        let dev = quantum::wh_sic(3, None).unwrap();
        let phi = mic_born_matrix(&dev).unwrap().phi;
        let expect = DMatrix::identity(9, 9) * 4.0 - uut(9) / 3.0;
        assert!((phi - expect).amax() < 1e-10);
    }

    #[test]
    fn classical_identity_born_matrix_is_identity() {
        let space = Arc::new(make_space(SpaceKind::Classical { m: 3 }).unwrap());
        let m = classical_identity_measurement(space).unwrap();
        let dev = depolarizing_device(m, &LeftInverse::Pseudoinverse, Sign::Plus).unwrap();
        assert!((mic_born_matrix(&dev).unwrap().phi - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!((simple_born_matrix(&dev).unwrap().phi - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!((natural_born_matrix(&dev).unwrap().phi - dev.self_conditional()).amax() < 1e-12);
    }

    #[test]
    fn mic_errors() {
        assert!(matches!(mic_born_matrix(&quantum::pauli6()), Err(Error::NotMic { n: 6, r: 4 })));
    }

    #[test]
    fn mic_collapse_on_sic() {
        let dev = quantum::sic_d2();
        let mic = mic_born_matrix(&dev).unwrap().phi;
        for phi in [
            natural_born_matrix(&dev).unwrap().phi,
            simple_born_matrix(&dev).unwrap().phi,
            minimal_frobenius_born_matrix(&dev).unwrap().phi,
            minimal_born_matrix_numeric(dev.self_conditional(), 2.0, Some(4)).unwrap().phi,
        ] {
            assert!((phi - &mic).amax() < 1e-10);
        }
    }

    #[test]
    fn pauli_natural_spectrum_and_simple() {
        let dev = quantum::pauli6();
        let nat = natural_born_matrix(&dev).unwrap().phi;
        let mut ev: Vec<f64> = linalg::eigenvalues(&nat).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        let expect = [0.0, 0.0, 1.0, 3.0, 3.0, 3.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{ev:?}");
        }
        let simple = simple_born_matrix(&dev).unwrap().phi;
        let p = dev.self_conditional();
        assert!((p * &simple * p - p).amax() < 1e-10);
        assert!((&simple - &nat).amax() > 0.1);
        // group inverse
        assert!((&nat * p * &nat - &nat).amax() < 1e-10);
        assert!((&nat * p - p * &nat).amax() < 1e-10);
    }

    #[test]
    fn closed_form_minimizer_matches_projection() {
        for seed in 0..5 {
            let dev = random_device(SpaceKind::QuantumComplex { d: 2 }, 6, seed);
            let closed = minimal_frobenius_born_matrix(&dev).unwrap().phi;
            let numeric = minimal_born_matrix_numeric(dev.self_conditional(), 2.0, Some(4)).unwrap().phi;
            assert!((&closed - &numeric).amax() < 1e-8, "seed {seed}");
            assert!(verify_born_identity(&dev, &closed) < 1e-9);
        }
    }

    /// Brute-force Frobenius minimizer: least squares over all `Φ` with
    /// `(P ⊗ Pᵀ) vec Φ = vec P`, solved via the pseudoinverse of the `n² × n²` system.
    fn kronecker_minimizer(p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = p.nrows();
        // row-major vec: vec(P Φ P) = (P ⊗ Pᵀ) vec(Φ)
        let a = p.kronecker(&p.transpose());
        let vec = |m: &DMatrix<f64>| DVector::from_iterator(n * n, m.transpose().iter().cloned());
        let id = DMatrix::<f64>::identity(n, n);
        let rhs = vec(p) - &a * vec(&id);
        let delta = linalg::pinv(&a) * rhs;
        let phi_vec = vec(&id) + delta;
        DMatrix::from_row_slice(n, n, phi_vec.as_slice())
    }

    #[test]
    fn projection_matches_kronecker_oracle_on_biased_devices() {
        for (kind, n, seed) in [(SpaceKind::QuantumComplex { d: 2 }, 6, 3), (SpaceKind::Square, 5, 4), (SpaceKind::Classical { m: 3 }, 5, 8)] {
            let dev = random_device(kind, n, seed);
            let p = dev.self_conditional();
            let ours = minimal_born_matrix_numeric(p, 2.0, Some(dev.r())).unwrap().phi;
            let oracle = kronecker_minimizer(p);
            assert!((&ours - &oracle).amax() < 1e-8);
            let nat = natural_born_matrix(&dev).unwrap().phi;
            let simple = simple_born_matrix(&dev).unwrap().phi;
            let d_min = ltp_deformation(&ours, 2.0);
            assert!(d_min <= ltp_deformation(&nat, 2.0) + 1e-9);
            assert!(d_min <= ltp_deformation(&simple, 2.0) + 1e-9);
        }
    }

    #[test]
    fn closed_form_rejects_biased() {
        let dev = random_device(SpaceKind::QuantumComplex { d: 2 }, 6, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let space = dev.space().clone();
        let w = DVector::from_vec(vec![0.3, 0.2, 0.1, 0.1, 0.2, 0.1]);
        let m = random_ic_measurement(space, 6, Some(&w), &mut rng).unwrap();
        let biased = depolarizing_device(m, &LeftInverse::Pseudoinverse, Sign::Plus).unwrap();
        assert!(matches!(minimal_frobenius_born_matrix(&biased), Err(Error::UnsupportedBias { .. })));
    }

    #[test]
    fn generic_inverse_family() {
        let dev = quantum::pauli6();
        let p = dev.self_conditional();
        let mp = generic_one_inverse(p, &OneInverseBlocks::default()).unwrap().phi;
        assert!((&mp - linalg::pinv(p)).amax() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let phi = generic_one_inverse(p, &OneInverseBlocks::random(6, 4, &mut rng)).unwrap().phi;
            assert!(verify_born_identity(&dev, &phi) < 1e-9);
            let min = minimal_born_matrix_numeric(p, 2.0, None).unwrap().phi;
            assert!(ltp_deformation(&min, 2.0) <= ltp_deformation(&phi, 2.0) + 1e-12);
        }
    }

    #[test]
    fn born_identity_residual_edge_cases() {
        let dev = quantum::sic_d2();
        let zero = DMatrix::zeros(4, 4);
        let res = verify_born_identity(&dev, &zero);
        assert!(res >= 2.0 - 1e-12); // ‖I₄‖_F = 2 and ‖P‖_F
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = mic_born_matrix(&dev).unwrap().phi;
        let noise = linalg::random_normal_matrix(4, 4, &mut rng) * 1e-3;
        let res = verify_born_identity(&dev, &(phi + &noise));
        assert!(res > 1e-5 && res < 10.0 * noise.norm());
    }

    #[test]
    fn born_rule_reconstructs_computational_basis() {
        let dev = quantum::sic_d2();
        let space = dev.space().clone();
        let phi = mic_born_matrix(&dev).unwrap().phi;
        let rho = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        let a = DMatrix::from_row_slice(2, 4, &[0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, -0.5]);
        let cond = conditional_matrix(&dev, &a).unwrap();
        let pa = apply_born_rule(&cond, &phi, &dev.measurement().probabilities(&rho)).unwrap();
        assert_relative_eq!(pa[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(pa[1], 0.0, epsilon = 1e-12);
        // maximally mixed input
        let mm = space.maximally_mixed().0;
        let pa = apply_born_rule(&cond, &phi, &dev.measurement().probabilities(&mm)).unwrap();
        assert_relative_eq!(pa[0], 0.5, epsilon = 1e-12);
        // Φ = I is the classical law of total probability, which is wrong here
        let ltp = apply_born_rule(&cond, &DMatrix::identity(4, 4), &dev.measurement().probabilities(&rho)).unwrap();
        assert!((ltp[0] - 1.0).abs() > 0.1);
    }

    #[test]
    fn quasi_probabilities_of_sic() {
        let dev = quantum::sic_d2();
        let mm = dev.space().maximally_mixed().0;
        let w = quasi_probability(&dev, &mm).unwrap();
        assert!((w.w - DVector::from_element(4, 0.25)).amax() < 1e-15);
        let up = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        let w = quasi_probability(&dev, &up).unwrap();
        let hi = (1.0 + 3f64.sqrt()) / 4.0;
        let lo = (1.0 - 3f64.sqrt()) / 4.0;
        // third column of Zt has signs (+, -, +, -)
        let expect = DVector::from_vec(vec![hi, lo, hi, lo]);
        assert!((&w.w - expect).amax() < 1e-12);
        assert_relative_eq!(w.total(), 1.0, epsilon = 1e-12);
        let p = dev.measurement().probabilities(&up);
        assert!((&w.w - (p * 3.0 - DVector::from_element(4, 0.5))).amax() < 1e-12);
    }

    #[test]
    fn quasi_probability_needs_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let space = Arc::new(make_space(SpaceKind::QuantumComplex { d: 2 }).unwrap());
        let m = random_ic_measurement(space, 5, None, &mut rng).unwrap();
        let dev = parallel_update_device(m, Sign::Plus).unwrap();
        assert!(dev.alpha().is_none());
        let mm = dev.space().maximally_mixed().0;
        assert!(matches!(quasi_probability(&dev, &mm), Err(Error::Precondition(_))));
    }

    #[test]
    fn natural_and_simple_are_protourgleichung() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (kind, n) in [(SpaceKind::QuantumComplex { d: 2 }, 7), (SpaceKind::Ball { k: 3 }, 6)] {
            let dev = random_device(kind, n, 13);
            let states: Vec<_> = (0..20).map(|_| dev.space().sample_state(&mut rng).0).collect();
            for phi in [natural_born_matrix(&dev).unwrap().phi, simple_born_matrix(&dev).unwrap().phi] {
                assert!(protourgleichung_residual(&dev, &phi, &states) < 1e-10);
                assert!(protourgleichung_defect(&dev, &phi) < 1e-10);
            }
            let nat = ltp_deformation(&natural_born_matrix(&dev).unwrap().phi, 2.0);
            let simple = ltp_deformation(&simple_born_matrix(&dev).unwrap().phi, 2.0);
            assert!((nat - simple).abs() > 1e-3);
        }
    }

    #[test]
    fn sic_deformation_values() {
        let phi = mic_born_matrix(&quantum::sic_d2()).unwrap().phi;
        assert_relative_eq!(ltp_deformation(&phi, 2.0), 2.0 * 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(ltp_deformation(&phi, 1.0), 6.0, epsilon = 1e-12);
        assert_relative_eq!(ltp_deformation(&phi, f64::INFINITY), 2.0, epsilon = 1e-12);
        assert_eq!(ltp_deformation(&DMatrix::identity(3, 3), 2.0), 0.0);
    }

    #[test]
    fn schatten_minimizers_are_best_effort_one_inverses() {
        let dev = quantum::pauli6();
        let p = dev.self_conditional();
        let frob = minimal_born_matrix_numeric(p, 2.0, Some(4)).unwrap().phi;
        for norm in [1.0, f64::INFINITY] {
            let b = minimal_born_matrix_numeric(p, norm, Some(4)).unwrap();
            assert_eq!(b.provenance, Provenance::MinimalSchatten);
            assert!(verify_born_identity(&dev, &b.phi) < 1e-8);
            assert!(ltp_deformation(&b.phi, norm) <= ltp_deformation(&frob, norm) + 1e-12);
        }
        assert!(minimal_born_matrix_numeric(p, 3.0, None).is_err());
        assert!(matches!(
            minimal_born_matrix_numeric(p, 2.0, Some(5)),
            Err(Error::RankMismatch { expected: 5, found: 4 })
        ));
    }

    #[test]
    fn report_shape() {
        let dev = quantum::sic_d2();
        let born = mic_born_matrix(&dev).unwrap();
        let rep = born_report(&dev, &born, &[2.0]);
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["provenance"], "mic_inverse");
        assert!((json["deformation"]["p2"].as_f64().unwrap() - 12f64.sqrt()).abs() < 1e-12);
        assert!(json["residuals"]["born_identity"].as_f64().unwrap() < 1e-12);
    }
}
