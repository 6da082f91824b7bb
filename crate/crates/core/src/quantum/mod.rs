//! Quantum specializations: operator conversions, SIC fixtures, Weyl–Heisenberg
//! orbits, projective 2-design checks and the vectorized Born identity.

pub mod basis;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

pub use basis::{operator_basis, CMatrix, Field, OperatorJson, OperatorRep};

use crate::device::{
    decompose_measurement, parallel_update_device, ReferenceDevice, ReferenceMeasurement, ReferenceStates,
    Sign,
};
use crate::error::{Error, Result};
use crate::space::{make_space, GptSpace, SpaceKind};

/// Equiangularity and design certification threshold.
pub const DESIGN_TOL: f64 = 1e-8;
/// Minimum `tr(S²)` accepted as pure.
pub const PURITY_TOL: f64 = 1e-10;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn quantum_parts(space: &GptSpace) -> Result<(Field, usize, &[CMatrix])> {
    space
        .quantum_basis()
        .ok_or_else(|| Error::Precondition(format!("{:?} is not a quantum space", space.kind())))
}

/// Complex or real quantum space of Hilbert dimension `d`.
pub fn quantum_space(field: Field, d: usize) -> Result<Arc<GptSpace>> {
    let kind = match field {
        Field::Complex => SpaceKind::QuantumComplex { d },
        Field::Real => SpaceKind::QuantumReal { d },
    };
    Ok(Arc::new(make_space(kind)?))
}

/// Bloch coordinates of a density operator.
pub fn state_from_operator(space: &GptSpace, rho: &CMatrix) -> Result<DVector<f64>> {
    let (_, _, gm) = quantum_parts(space)?;
    Ok(basis::state_coords(gm, rho))
}

pub fn effect_from_operator(space: &GptSpace, e: &CMatrix) -> Result<DVector<f64>> {
    let (_, _, gm) = quantum_parts(space)?;
    Ok(basis::effect_coords(gm, e))
}

pub fn state_operator(space: &GptSpace, coords: &DVector<f64>) -> Result<CMatrix> {
    let (_, d, gm) = quantum_parts(space)?;
    Ok(basis::state_operator(gm, d, coords))
}

pub fn effect_operator(space: &GptSpace, coords: &DVector<f64>) -> Result<CMatrix> {
    let (_, d, gm) = quantum_parts(space)?;
    Ok(basis::effect_operator(gm, d, coords))
}

/// Measurement from POVM elements.
pub fn measurement_from_operators(space: Arc<GptSpace>, povm: &[CMatrix]) -> Result<ReferenceMeasurement> {
    let rows: Vec<_> = povm
        .iter()
        .map(|e| effect_from_operator(&space, e).map(|v| v.transpose()))
        .collect::<Result<_>>()?;
    decompose_measurement(space, DMatrix::from_rows(&rows))
}

/// Pure parallel-update device: effects `E_i = d w_i |ψ_i⟩⟨ψ_i|`, states `|ψ_i⟩⟨ψ_i|`.
pub fn device_from_pure_states(space: Arc<GptSpace>, kets: &[DVector<Complex64>], weights: &[f64]) -> Result<ReferenceDevice> {
    let (_, d, _) = quantum_parts(&space)?;
    if kets.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: kets.len(), found: weights.len() });
    }
    let povm: Vec<CMatrix> = kets
        .iter()
        .zip(weights)
        .map(|(k, &w)| basis::projector(&k.normalize()) * c(d as f64 * w))
        .collect();
    let m = measurement_from_operators(space, &povm)?;
    parallel_update_device(m, Sign::Plus)
}

/// The tetrahedral qubit SIC with states proportional to effects and `α = 3`,
/// written down exactly rather than searched for.
pub fn sic_d2() -> ReferenceDevice {
    let space = quantum_space(Field::Complex, 2).expect("qubit space");
    let k = 1.0 / (4.0 * 3f64.sqrt());
    let signs = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, -1.0, 1.0], [-1.0, 1.0, -1.0]];
    let e = DMatrix::from_fn(4, 4, |i, j| if j == 0 { 0.25 } else { k * signs[i][j - 1] });
    let m = decompose_measurement(space.clone(), e).expect("SIC is a measurement");
    let x = m.z() * 4.0;
    let states = ReferenceStates::from_traceless(&space, &x).expect("SIC states are pure");
    ReferenceDevice::new(m, states, Some(3.0)).expect("SIC device is depolarizing")
}

/// Shift `X|j⟩ = |j+1⟩` and clock `Z|j⟩ = ω^j |j⟩`.
fn clock_and_shift(d: usize) -> (CMatrix, CMatrix) {
    let mut x = CMatrix::zeros(d, d);
    let mut z = CMatrix::zeros(d, d);
    for j in 0..d {
        x[((j + 1) % d, j)] = c(1.0);
        z[(j, j)] = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / d as f64);
    }
    (x, z)
}

/// Weyl–Heisenberg orbit `X^a Z^b |ψ⟩`, `a, b = 0..d`.
pub fn weyl_heisenberg_orbit(fiducial: &DVector<Complex64>) -> Vec<DVector<Complex64>> {
    let d = fiducial.len();
    let (x, z) = clock_and_shift(d);
    let psi = fiducial.normalize();
    let mut out = Vec::with_capacity(d * d);
    let mut xa = CMatrix::identity(d, d);
    for _ in 0..d {
        let mut zb = CMatrix::identity(d, d);
        for _ in 0..d {
            out.push(&xa * &zb * &psi);
            zb = &z * zb;
        }
        xa = &x * xa;
    }
    out
}

/// Known fiducial vectors for `d = 2` (tetrahedral) and `d = 3` (Hesse).
pub fn bundled_fiducial(d: usize) -> Option<DVector<Complex64>> {
    match d {
        2 => {
            // Bloch vector (1,1,1)/√3: cos θ = 1/√3, φ = π/4
            let cos_t = 1.0 / 3f64.sqrt();
            let a = ((1.0 + cos_t) / 2.0).sqrt();
            let b = ((1.0 - cos_t) / 2.0).sqrt();
            Some(DVector::from_vec(vec![c(a), Complex64::from_polar(b, PI / 4.0)]))
        }
        3 => {
            let h = 1.0 / 2f64.sqrt();
            Some(DVector::from_vec(vec![c(0.0), c(h), c(-h)]))
        }
        _ => None,
    }
}

/// Largest deviation of `|⟨ψ_i|ψ_j⟩|²` (`i ≠ j`) from `1/(d+1)`.
pub fn sic_overlap_deviation(kets: &[DVector<Complex64>]) -> f64 {
    let d = kets.first().map_or(1, |k| k.len());
    let target = 1.0 / (d as f64 + 1.0);
    let mut worst = 0.0_f64;
    for (i, a) in kets.iter().enumerate() {
        for b in kets.iter().skip(i + 1) {
            worst = worst.max((a.dotc(b).norm_sqr() - target).abs());
        }
    }
    worst
}

/// SIC device from the Weyl–Heisenberg orbit of `fiducial` (or the bundled one for
/// `d ∈ {2, 3}`), with effects `|ψ_i⟩⟨ψ_i|/d` and parallel-update states.
pub fn wh_sic(d: usize, fiducial: Option<DVector<Complex64>>) -> Result<ReferenceDevice> {
    let fid = match fiducial {
        Some(f) => f,
        None => bundled_fiducial(d)
            .ok_or_else(|| Error::Precondition(format!("no bundled fiducial for d = {d}; supply one")))?,
    };
    if fid.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: fid.len() });
    }
    let orbit = weyl_heisenberg_orbit(&fid);
    let deviation = sic_overlap_deviation(&orbit);
    if deviation > DESIGN_TOL {
        return Err(Error::NotASic { deviation });
    }
    let weights = vec![1.0 / (d * d) as f64; d * d];
    device_from_pure_states(quantum_space(Field::Complex, d)?, &orbit, &weights)
}

/// Six Pauli eigenstates, effects `(I ± σ_k)/6`.
pub fn pauli6() -> ReferenceDevice {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::new(0.0, s);
    let kets = [
        [c(s), c(s)],
        [c(s), c(-s)],
        [c(s), i],
        [c(s), -i],
        [c(1.0), c(0.0)],
        [c(0.0), c(1.0)],
    ]
    .map(|k| DVector::from_vec(k.to_vec()));
    device_from_pure_states(quantum_space(Field::Complex, 2).expect("qubit"), &kets, &[1.0 / 6.0; 6])
        .expect("Pauli device")
}

/// Minimal real projective 2-designs: the trine in `d = 2` and the six icosahedral
/// lines in `d = 3`, as uniform-weight pure parallel-update devices.
pub fn real_sic(d: usize) -> Result<ReferenceDevice> {
    let kets: Vec<DVector<Complex64>> = match d {
        2 => (0..3)
            .map(|k| {
                let t = k as f64 * PI / 3.0;
                DVector::from_vec(vec![c(t.cos()), c(t.sin())])
            })
            .collect(),
        3 => {
            let g = (1.0 + 5f64.sqrt()) / 2.0;
            [[0.0, 1.0, g], [0.0, -1.0, g], [1.0, g, 0.0], [-1.0, g, 0.0], [g, 0.0, 1.0], [g, 0.0, -1.0]]
                .iter()
                .map(|v| DVector::from_vec(v.iter().map(|&x| c(x)).collect::<Vec<_>>()).normalize())
                .collect()
        }
        _ => return Err(Error::Precondition(format!("no bundled real design for d = {d}"))),
    };
    let n = kets.len();
    device_from_pure_states(quantum_space(Field::Real, d)?, &kets, &vec![1.0 / n as f64; n])
}

/// `α` of a pure weight-morphophoric device: `d + 1` over ℂ, `(d + 2)/2` over ℝ.
pub fn pure_parallel_alpha(d: usize, field: Field) -> f64 {
    match field {
        Field::Complex => d as f64 + 1.0,
        Field::Real => (d as f64 + 2.0) / 2.0,
    }
}

/// Complete positivity of a depolarizing channel on `C^d`: `-1/(d²-1) <= 1/α <= 1`.
pub fn depolarizing_bounds_check(alpha: f64, d: usize) -> bool {
    parameter_within_cp_bounds(1.0 / alpha, d)
}

pub(crate) fn parameter_within_cp_bounds(parameter: f64, d: usize) -> bool {
    let lower = -1.0 / ((d * d) as f64 - 1.0);
    parameter >= lower - 1e-9 && parameter <= 1.0 + 1e-9
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// SWAP on `C^d ⊗ C^d`.
pub fn swap(d: usize) -> CMatrix {
    let mut s = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            s[(j * d + i, i * d + j)] = c(1.0);
        }
    }
    s
}

/// Projector onto the symmetric subspace, `(I + SWAP)/2`.
pub fn sym_projector(d: usize) -> CMatrix {
    (CMatrix::identity(d * d, d * d) + swap(d)) * c(0.5)
}

/// `|I)(I| = Σ_jk |jj⟩⟨kk|`.
pub fn vec_identity_dyad(d: usize) -> CMatrix {
    let v = OperatorRep::new(CMatrix::identity(d, d)).vectorized();
    &v * v.adjoint()
}

/// Partial transpose on the second tensor factor of a `d² × d²` matrix.
pub fn partial_transpose_second(m: &CMatrix, d: usize) -> CMatrix {
    CMatrix::from_fn(d * d, d * d, |row, col| {
        let (i, j) = (row / d, row % d);
        let (k, l) = (col / d, col % d);
        m[(i * d + l, k * d + j)]
    })
}

/// Outcome of a weighted projective 2-design test.
#[derive(Debug, Clone)]
pub struct DesignReport {
    pub t: usize,
    pub d: usize,
    pub field: Field,
    /// `Σ w_i S_i ⊗ S_i`.
    pub lhs: CMatrix,
    /// `2/(d(d+1)) Π_sym²` over ℂ, `(I + SWAP + |I)(I|)/(d(d+2))` over ℝ.
    pub target: CMatrix,
    pub residual: f64,
}

impl DesignReport {
    pub fn certified(&self) -> bool {
        self.residual <= DESIGN_TOL
    }

    pub fn summary(&self) -> DesignSummary {
        DesignSummary { t: self.t, d: self.d, field: self.field, residual: self.residual, certified: self.certified() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignSummary {
    pub t: usize,
    pub d: usize,
    pub field: Field,
    pub residual: f64,
    pub certified: bool,
}

/// Compares `Σ w_i S_i ⊗ S_i` against the Haar second moment of pure states.
pub fn two_design_check(states: &[OperatorRep], weights: &[f64], field: Field) -> Result<DesignReport> {
    if states.is_empty() {
        return Err(Error::Precondition("no states given".into()));
    }
    if states.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: states.len(), found: weights.len() });
    }
    if weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidWeights("weights must be nonnegative and sum to 1".into()));
    }
    let d = states[0].d();
    for (index, s) in states.iter().enumerate() {
        if s.d() != d {
            return Err(Error::DimensionMismatch { expected: d, found: s.d() });
        }
        let purity = s.purity();
        if purity < 1.0 - PURITY_TOL {
            return Err(Error::Purity { index, purity });
        }
    }
    let mut lhs = CMatrix::zeros(d * d, d * d);
    for (s, &w) in states.iter().zip(weights) {
        lhs += kron(&s.matrix, &s.matrix) * c(w);
    }
    let df = d as f64;
    let target = match field {
        Field::Complex => sym_projector(d) * c(2.0 / (df * (df + 1.0))),
        Field::Real => {
            (CMatrix::identity(d * d, d * d) + swap(d) + vec_identity_dyad(d)) * c(1.0 / (df * (df + 2.0)))
        }
    };
    let residual = (&lhs - &target).norm();
    Ok(DesignReport { t: 2, d, field, lhs, target, residual })
}

/// Reference states of a quantum device as operators, with weights `w_i = tr(E_i)/d`.
pub fn device_design_input(device: &ReferenceDevice) -> Result<(Vec<OperatorRep>, Vec<f64>, Field)> {
    let space = device.space();
    let (field, _, _) = quantum_parts(space)?;
    let states = device
        .states()
        .matrix()
        .column_iter()
        .map(|col| state_operator(space, &col.into_owned()).map(OperatorRep::new))
        .collect::<Result<Vec<_>>>()?;
    Ok((states, device.measurement().w().iter().cloned().collect(), field))
}

/// [`two_design_check`] on a device's reference states.
pub fn device_two_design_check(device: &ReferenceDevice) -> Result<DesignReport> {
    let (states, weights, field) = device_design_input(device)?;
    two_design_check(&states, &weights, field)
}

/// Whether every reference state is proportional to its effect (`E_i = tr(E_i) S_i`).
pub fn is_parallel_update(device: &ReferenceDevice, tol: f64) -> bool {
    let m = device.measurement();
    let y = m.z_winv();
    (device.states().x() - y).amax() <= tol
}

/// Which identity the vectorized Born product should reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorizedTarget {
    /// `I_{d²}` (complex field: full-rank factorization).
    Identity,
    /// `Π_sym²` (real field: vectorized symmetric matrices).
    SymmetricProjector,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VectorizedIdentity {
    pub target: VectorizedTarget,
    pub residual: f64,
}

/// `S Φ E` built from vectorized operators (rows `(E_i|`, columns `|S_i)`), compared
/// with `I_{d²}` for complex spaces and `Π_sym²` for real ones.
pub fn vectorized_born_identity(device: &ReferenceDevice, phi: &DMatrix<f64>) -> Result<VectorizedIdentity> {
    let space = device.space();
    let (field, d, _) = quantum_parts(space)?;
    let n = device.n();
    let e = device.measurement().effects();
    let s = device.states().matrix();
    let mut e_vec = CMatrix::zeros(n, d * d);
    let mut s_vec = CMatrix::zeros(d * d, n);
    for i in 0..n {
        let ev = OperatorRep::new(effect_operator(space, &e.row(i).transpose())?).vectorized();
        let sv = OperatorRep::new(state_operator(space, &s.column(i).into_owned())?).vectorized();
        e_vec.row_mut(i).copy_from(&ev.adjoint());
        s_vec.column_mut(i).copy_from(&sv);
    }
    let phi_c = phi.map(c);
    let product = s_vec * phi_c * e_vec;
    let (target, target_kind) = match field {
        Field::Complex => (CMatrix::identity(d * d, d * d), VectorizedTarget::Identity),
        Field::Real => (sym_projector(d), VectorizedTarget::SymmetricProjector),
    };
    Ok(VectorizedIdentity { target: target_kind, residual: (product - target).norm() })
}

/// Born identity of a real-field device: in the minimal `d(d+1)/2` basis against
/// `I` (`vectorized = false`), or in vectorized coordinates against `Π_sym²`.
pub fn real_born_identity_check(device: &ReferenceDevice, phi: &DMatrix<f64>, vectorized: bool) -> Result<f64> {
    if vectorized {
        return Ok(vectorized_born_identity(device, phi)?.residual);
    }
    let r = device.r();
    let sfe = device.states().matrix() * phi * device.measurement().effects();
    Ok((sfe - DMatrix::identity(r, r)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{depolarizing_fit, equiangularity_check};
    use crate::space::SpaceKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sic_d2_fixture() {
        let dev = sic_d2();
        let sum = dev.measurement().effects().row_sum();
        assert!((sum - DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]).transpose()).norm() < 1e-15);
        let eq = equiangularity_check(dev.self_conditional(), 1e-14);
        assert!(eq.is_equiangular);
        assert!((eq.diag_value - 0.5).abs() < 1e-15 && (eq.offdiag_value - 1.0 / 6.0).abs() < 1e-15);
        assert!(device_two_design_check(&dev).unwrap().residual < 1e-12);
    }

    #[test]
    fn wh_sic_d2_matches_tetrahedron() {
        let dev = wh_sic(2, None).unwrap();
        assert!(sic_overlap_deviation(&weyl_heisenberg_orbit(&bundled_fiducial(2).unwrap())) < 1e-14);
        let fit = depolarizing_fit(&dev);
        assert!((fit.alpha - 3.0).abs() < 1e-12);
        // same effect set as the exact fixture, possibly reordered
        let fixture = sic_d2();
        for row in dev.measurement().effects().row_iter() {
            let hit = fixture.measurement().effects().row_iter().any(|f| (f - row).norm() < 1e-14);
            assert!(hit);
        }
    }

    #[test]
    fn wh_sic_d3_is_a_sic() {
        let dev = wh_sic(3, None).unwrap();
        assert_eq!(dev.n(), 9);
        assert!((dev.alpha().unwrap() - 4.0).abs() < 1e-12);
        assert!((depolarizing_fit(&dev).alpha - 4.0).abs() < 1e-12);
    }

    #[test]
    fn random_fiducial_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ket = crate::space::random_ket(Field::Complex, 3, &mut rng);
        assert!(matches!(wh_sic(3, Some(ket)), Err(Error::NotASic { .. })));
        assert!(wh_sic(5, None).is_err());
    }

    #[test]
    fn pauli_states_form_a_design() {
        let dev = pauli6();
        assert!(device_two_design_check(&dev).unwrap().residual < 1e-12);
        assert!((dev.alpha().unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_pure_states_are_not_a_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let states: Vec<_> = (0..4)
            .map(|_| OperatorRep::new(basis::projector(&crate::space::random_ket(Field::Complex, 2, &mut rng))))
            .collect();
        let rep = two_design_check(&states, &[0.25; 4], Field::Complex).unwrap();
        assert!(rep.residual > 1e-3);
    }

    #[test]
    fn mixed_states_fail_purity() {
        let mixed = OperatorRep::new(CMatrix::identity(2, 2) * c(0.5));
        assert!(matches!(two_design_check(&[mixed], &[1.0], Field::Complex), Err(Error::Purity { .. })));
    }

    #[test]
    fn alpha_formulas() {
        assert_eq!(pure_parallel_alpha(2, Field::Complex), 3.0);
        assert_eq!(pure_parallel_alpha(3, Field::Complex), 4.0);
        assert_eq!(pure_parallel_alpha(2, Field::Real), 2.0);
    }

    #[test]
    fn cp_bounds() {
        assert!(depolarizing_bounds_check(3.0, 2));
        assert!(depolarizing_bounds_check(-3.0, 2));
        assert!(depolarizing_bounds_check(-5.0, 2));
        assert!(!depolarizing_bounds_check(-1.5, 2));
        assert!(!depolarizing_bounds_check(0.5, 2));
    }

    #[test]
    fn partial_transpose_gives_symmetric_projector() {
        for d in 2..=4 {
            let m = (CMatrix::identity(d * d, d * d) + vec_identity_dyad(d)) * c(0.5);
            assert!((partial_transpose_second(&m, d) - sym_projector(d)).norm() < 1e-12);
        }
    }

    #[test]
    fn real_designs_have_expected_alpha() {
        for d in [2, 3] {
            let dev = real_sic(d).unwrap();
            assert_eq!(dev.space().kind(), SpaceKind::QuantumReal { d });
            let a = dev.alpha().unwrap();
            assert!((a - pure_parallel_alpha(d, Field::Real)).abs() < 1e-12, "d={d} alpha={a}");
            assert!(device_two_design_check(&dev).unwrap().residual < 1e-12);
        }
    }

    #[test]
    fn vectorized_identity_targets() {
        let dev = sic_d2();
        let phi = dev.self_conditional().clone().try_inverse().unwrap();
        let v = vectorized_born_identity(&dev, &phi).unwrap();
        assert_eq!(v.target, VectorizedTarget::Identity);
        assert!(v.residual < 1e-12);

        let real = real_sic(2).unwrap();
        let phi = real.self_conditional().clone().try_inverse().unwrap();
        assert!(real_born_identity_check(&real, &phi, false).unwrap() < 1e-12);
        assert!(real_born_identity_check(&real, &phi, true).unwrap() < 1e-12);
        let v = vectorized_born_identity(&real, &phi).unwrap();
        assert_eq!(v.target, VectorizedTarget::SymmetricProjector);
    }
}
