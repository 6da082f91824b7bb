//! Finite-dimensional GPT state and effect spaces, and their Bloch form.
//!
//! Every space carries a real coordinate system (its *native* coordinates), a
//! normalization covector `(I|`, and membership oracles for the state cone and the
//! effect interval `[0, (I|]`. A [`BlochForm`] is an invertible change of basis
//! whose first row is `(I|`, so that normalized states read `(1, ρ₀)`. The rest of
//! the crate works in the canonical Bloch form of the space.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quantum::basis::{self, CMatrix, Field};

/// Slack allowed on the boundary of every cone test.
pub const CONE_SLACK: f64 = 1e-9;

/// Space descriptor, serialized as e.g. `{"kind": "quantum_complex", "d": 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    Classical { m: usize },
    QuantumComplex { d: usize },
    QuantumReal { d: usize },
    Square,
    Ball { k: usize },
    Custom { r: usize },
}

impl SpaceKind {
    pub fn dimension(&self) -> usize {
        match *self {
            SpaceKind::Classical { m } => m,
            SpaceKind::QuantumComplex { d } => d * d,
            SpaceKind::QuantumReal { d } => d * (d + 1) / 2,
            SpaceKind::Square => 3,
            SpaceKind::Ball { k } => k + 1,
            SpaceKind::Custom { r } => r,
        }
    }

    /// Hilbert dimension and field for the quantum kinds.
    pub fn quantum(&self) -> Option<(Field, usize)> {
        match *self {
            SpaceKind::QuantumComplex { d } => Some((Field::Complex, d)),
            SpaceKind::QuantumReal { d } => Some((Field::Real, d)),
            _ => None,
        }
    }

    /// Short label such as `classical3`, `qc2`, `qr3`, `square`, `ball3`.
    pub fn label(&self) -> String {
        match *self {
            SpaceKind::Classical { m } => format!("classical{m}"),
            SpaceKind::QuantumComplex { d } => format!("qc{d}"),
            SpaceKind::QuantumReal { d } => format!("qr{d}"),
            SpaceKind::Square => "square".into(),
            SpaceKind::Ball { k } => format!("ball{k}"),
            SpaceKind::Custom { r } => format!("custom{r}"),
        }
    }

    /// Inverse of [`SpaceKind::label`] (custom spaces excluded).
    pub fn parse_label(s: &str) -> Option<SpaceKind> {
        let num = |prefix: &str| s.strip_prefix(prefix).and_then(|t| t.parse::<usize>().ok());
        if s == "square" {
            Some(SpaceKind::Square)
        } else if let Some(m) = num("classical") {
            Some(SpaceKind::Classical { m })
        } else if let Some(d) = num("qc") {
            Some(SpaceKind::QuantumComplex { d })
        } else if let Some(d) = num("qr") {
            Some(SpaceKind::QuantumReal { d })
        } else {
            num("ball").map(|k| SpaceKind::Ball { k })
        }
    }
}

pub type ConeOracle = Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>;

#[derive(Clone)]
enum Cones {
    Classical,
    Quantum { field: Field, d: usize, gell_mann: Vec<CMatrix> },
    Square,
    Ball,
    Custom { state: ConeOracle, effect: ConeOracle },
}

impl fmt::Debug for Cones {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cones::Classical => write!(f, "Classical"),
            Cones::Quantum { field, d, .. } => write!(f, "Quantum({field:?}, {d})"),
            Cones::Square => write!(f, "Square"),
            Cones::Ball => write!(f, "Ball"),
            Cones::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// Invertible change of basis `B` with first row `(I|`.
///
/// States map as `|ρ) ↦ B|ρ)` and effects as `(η| ↦ (η|B⁻¹`, which preserves every
/// pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochForm {
    b: DMatrix<f64>,
    b_inv: DMatrix<f64>,
    traceless_basis: DMatrix<f64>,
}

impl BlochForm {
    /// Builds `B` from the normalization covector and `r - 1` orthonormal rows
    /// orthogonal to it.
    pub fn from_parts(normalization: &DVector<f64>, traceless_basis: DMatrix<f64>) -> Result<Self> {
        let r = normalization.len();
        if traceless_basis.shape() != (r - 1, r) {
            return Err(Error::DimensionMismatch { expected: r - 1, found: traceless_basis.nrows() });
        }
        let gram = &traceless_basis * traceless_basis.transpose();
        let ortho = (gram - DMatrix::identity(r - 1, r - 1)).norm();
        let overlap = (&traceless_basis * normalization).norm();
        if ortho > 1e-10 || overlap > 1e-10 * normalization.norm() {
            return Err(Error::Construction("traceless basis is not orthonormal to (I|".into()));
        }
        let mut b = DMatrix::zeros(r, r);
        b.row_mut(0).copy_from(&normalization.transpose());
        b.rows_mut(1, r - 1).copy_from(&traceless_basis);
        // B⁻¹ = [ |I)/(I|I) | b_1ᵀ … b_{r-1}ᵀ ]
        let mut b_inv = DMatrix::zeros(r, r);
        b_inv.column_mut(0).copy_from(&(normalization / normalization.norm_squared()));
        b_inv.columns_mut(1, r - 1).copy_from(&traceless_basis.transpose());
        Ok(Self { b, b_inv, traceless_basis })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.b_inv
    }

    pub fn traceless_basis(&self) -> &DMatrix<f64> {
        &self.traceless_basis
    }

    pub fn state_to_bloch(&self, native: &DVector<f64>) -> DVector<f64> {
        &self.b * native
    }

    pub fn state_from_bloch(&self, bloch: &DVector<f64>) -> DVector<f64> {
        &self.b_inv * bloch
    }

    /// `(η|B⁻¹`, returned as a column vector.
    pub fn effect_to_bloch(&self, native: &DVector<f64>) -> DVector<f64> {
        self.b_inv.tr_mul(native)
    }

    pub fn effect_from_bloch(&self, bloch: &DVector<f64>) -> DVector<f64> {
        self.b.tr_mul(bloch)
    }
}

/// A finite-dimensional GPT.
#[derive(Debug, Clone)]
pub struct GptSpace {
    kind: SpaceKind,
    normalization: DVector<f64>,
    bloch: BlochForm,
    cones: Cones,
}

/// Builds a built-in space from its descriptor.
pub fn make_space(kind: SpaceKind) -> Result<GptSpace> {
    let (normalization, cones) = match kind {
        SpaceKind::Classical { m } => {
            if m < 2 {
                return Err(Error::Construction(format!("classical space needs m >= 2, got {m}")));
            }
            (linalg::ones(m), Cones::Classical)
        }
        SpaceKind::QuantumComplex { d } | SpaceKind::QuantumReal { d } => {
            if d < 2 {
                return Err(Error::Construction(format!("quantum space needs d >= 2, got {d}")));
            }
            let field = kind.quantum().expect("quantum kind").0;
            let mut n = DVector::zeros(field.operator_dim(d));
            n[0] = 1.0;
            (n, Cones::Quantum { field, d, gell_mann: basis::gell_mann(field, d) })
        }
        SpaceKind::Square => (DVector::from_vec(vec![1.0, 0.0, 0.0]), Cones::Square),
        SpaceKind::Ball { k } => {
            if k < 1 {
                return Err(Error::Construction("ball space needs k >= 1".into()));
            }
            let mut n = DVector::zeros(k + 1);
            n[0] = 1.0;
            (n, Cones::Ball)
        }
        SpaceKind::Custom { .. } => {
            return Err(Error::Construction(
                "custom spaces need explicit oracles; use GptSpace::custom".into(),
            ))
        }
    };
    let bloch = BlochForm::from_parts(&normalization, linalg::orthonormal_complement(&normalization))?;
    Ok(GptSpace { kind, normalization, bloch, cones })
}

/// Bloch form of `space`. With `basis_seed = None` the canonical deterministic
/// completion is used (the one every other module relies on); a seed draws a random
/// orthonormal traceless basis instead.
pub fn bloch_transform(space: &GptSpace, basis_seed: Option<u64>) -> BlochForm {
    match basis_seed {
        None => space.bloch.clone(),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = space.r();
            let rows = linalg::random_orthonormal_rows(r - 1, r, std::slice::from_ref(&space.normalization), &mut rng);
            BlochForm::from_parts(&space.normalization, rows).expect("random completion is orthonormal")
        }
    }
}

impl GptSpace {
    /// A space defined by user-supplied oracles on native coordinates. The state
    /// oracle tests cone membership; the effect oracle tests membership of the
    /// effect interval `[0, (I|]`.
    pub fn custom(normalization: DVector<f64>, state_oracle: ConeOracle, effect_oracle: ConeOracle) -> Result<Self> {
        let r = normalization.len();
        if r < 2 || normalization.norm() == 0.0 {
            return Err(Error::Construction("custom space needs r >= 2 and nonzero (I|".into()));
        }
        let bloch = BlochForm::from_parts(&normalization, linalg::orthonormal_complement(&normalization))?;
        let space = Self {
            kind: SpaceKind::Custom { r },
            normalization,
            bloch,
            cones: Cones::Custom { state: state_oracle, effect: effect_oracle },
        };
        let m = space.maximally_mixed_native();
        if !space.state_in_cone(&m) {
            return Err(Error::Construction("maximally mixed state rejected by state oracle".into()));
        }
        if !space.effect_valid(&space.normalization) || !space.effect_valid(&DVector::zeros(r)) {
            return Err(Error::Construction("trivial effects rejected by effect oracle".into()));
        }
        Ok(space)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn r(&self) -> usize {
        self.normalization.len()
    }

    pub fn normalization(&self) -> &DVector<f64> {
        &self.normalization
    }

    /// `(I|I)` with `|I) = (I|ᵀ`.
    pub fn unit_trace(&self) -> f64 {
        self.normalization.norm_squared()
    }

    /// The canonical Bloch form.
    pub fn bloch(&self) -> &BlochForm {
        &self.bloch
    }

    /// Quantum field, Hilbert dimension and traceless basis, if this is a quantum space.
    pub fn quantum_basis(&self) -> Option<(Field, usize, &[CMatrix])> {
        match &self.cones {
            Cones::Quantum { field, d, gell_mann } => Some((*field, *d, gell_mann.as_slice())),
            _ => None,
        }
    }

    /// `|M) = |I)/(I|I)` in native coordinates.
    pub fn maximally_mixed_native(&self) -> DVector<f64> {
        &self.normalization / self.unit_trace()
    }

    /// State-cone membership in native coordinates (not normalization).
    pub fn state_in_cone(&self, v: &DVector<f64>) -> bool {
        if v.len() != self.r() {
            return false;
        }
        match &self.cones {
            Cones::Classical => v.iter().all(|&x| x >= -CONE_SLACK),
            Cones::Quantum { d, gell_mann, .. } => {
                let rho = basis::state_operator(gell_mann, *d, v);
                basis::hermitian_eigenvalues(&rho)[0] >= -CONE_SLACK
            }
            Cones::Square => v[0] - v[1].abs().max(v[2].abs()) >= -CONE_SLACK,
            Cones::Ball => v[0] - v.rows(1, v.len() - 1).norm() >= -CONE_SLACK,
            Cones::Custom { state, .. } => state(v),
        }
    }

    /// Effect validity in native coordinates: `e` and `(I| - e` both lie in the dual cone.
    pub fn effect_valid(&self, e: &DVector<f64>) -> bool {
        if e.len() != self.r() {
            return false;
        }
        match &self.cones {
            Cones::Classical => e.iter().all(|&x| (-CONE_SLACK..=1.0 + CONE_SLACK).contains(&x)),
            Cones::Quantum { d, gell_mann, .. } => {
                let op = basis::effect_operator(gell_mann, *d, e);
                let ev = basis::hermitian_eigenvalues(&op);
                ev[0] >= -CONE_SLACK && ev[ev.len() - 1] <= 1.0 + CONE_SLACK
            }
            Cones::Square => {
                let spread = e[1].abs() + e[2].abs();
                e[0] - spread >= -CONE_SLACK && 1.0 - e[0] - spread >= -CONE_SLACK
            }
            Cones::Ball => {
                let spread = e.rows(1, e.len() - 1).norm();
                e[0] - spread >= -CONE_SLACK && 1.0 - e[0] - spread >= -CONE_SLACK
            }
            Cones::Custom { effect, .. } => effect(e),
        }
    }

    pub fn bloch_state_valid(&self, s: &DVector<f64>) -> bool {
        self.state_in_cone(&self.bloch.state_from_bloch(s))
    }

    pub fn bloch_effect_valid(&self, e: &DVector<f64>) -> bool {
        self.effect_valid(&self.bloch.effect_from_bloch(e))
    }

    /// `(1, 0, …, 0)` in Bloch coordinates.
    pub fn maximally_mixed(&self) -> State {
        let mut v = DVector::zeros(self.r());
        v[0] = 1.0;
        State(v)
    }

    pub fn unit_effect(&self) -> Effect {
        let mut v = DVector::zeros(self.r());
        v[0] = 1.0;
        Effect(v)
    }

    /// Random normalized state, Bloch coordinates. Quantum spaces use Ginibre
    /// sampling; other kinds sample along a random ray from `|M)` to the boundary.
    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        match &self.cones {
            Cones::Quantum { field, d, gell_mann } => {
                let g = random_operator(*field, *d, rng);
                let rho = &g * g.adjoint();
                let tr = basis::trace(&rho).re;
                State(basis::state_coords(gell_mann, &(rho / Complex64::new(tr, 0.0))))
            }
            _ => {
                let r = self.r();
                let dir = linalg::random_normal_vector(r - 1, rng);
                let point = |t: f64| {
                    let mut v = DVector::zeros(r);
                    v[0] = 1.0;
                    v.rows_mut(1, r - 1).copy_from(&(&dir * t));
                    v
                };
                let tmax = radial_limit(|t| self.bloch_state_valid(&point(t)));
                State(point(tmax * rng.random::<f64>()))
            }
        }
    }

    /// Random pure state, for quantum spaces only.
    pub fn sample_pure_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<State> {
        let (field, d, gm) = self.quantum_basis()?;
        let psi = random_ket(field, d, rng);
        Some(State(basis::state_coords(gm, &basis::projector(&psi))))
    }

    /// Random valid effect, Bloch coordinates.
    pub fn sample_effect<R: Rng + ?Sized>(&self, rng: &mut R) -> Effect {
        match &self.cones {
            Cones::Quantum { field, d, gell_mann } => {
                let g = random_operator(*field, *d, rng);
                let pos = &g * g.adjoint();
                let top = *basis::hermitian_eigenvalues(&pos).last().expect("nonempty");
                let scale = rng.random::<f64>() / top;
                Effect(basis::effect_coords(gell_mann, &(pos * Complex64::new(scale, 0.0))))
            }
            _ => {
                let r = self.r();
                let weight: f64 = rng.random();
                let dir = linalg::random_normal_vector(r - 1, rng);
                let point = |t: f64| {
                    let mut v = DVector::zeros(r);
                    v[0] = weight;
                    v.rows_mut(1, r - 1).copy_from(&(&dir * t));
                    v
                };
                let tmax = radial_limit(|t| self.bloch_effect_valid(&point(t)));
                Effect(point(tmax * rng.random::<f64>()))
            }
        }
    }
}

/// Largest `t >= 0` (bisection, capped at 1e6) with `ok(t)`.
fn radial_limit(ok: impl Fn(f64) -> bool) -> f64 {
    let mut hi = 1.0;
    while ok(hi) && hi < 1e6 {
        hi *= 2.0;
    }
    linalg::bisect_feasible(ok, hi, 60)
}

fn random_operator<R: Rng + ?Sized>(field: Field, d: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = match field {
            Field::Complex => rng.sample(StandardNormal),
            Field::Real => 0.0,
        };
        Complex64::new(re, im)
    })
}

pub(crate) fn random_ket<R: Rng + ?Sized>(field: Field, d: usize, rng: &mut R) -> DVector<Complex64> {
    let v = DVector::from_fn(d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = match field {
            Field::Complex => rng.sample(StandardNormal),
            Field::Real => 0.0,
        };
        Complex64::new(re, im)
    });
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// A state in Bloch coordinates, `(1, ρ₀)` when normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct State(pub DVector<f64>);

impl State {
    pub fn trace(&self) -> f64 {
        self.0[0]
    }

    /// `ρ₀`, the traceless part.
    pub fn traceless(&self) -> DVector<f64> {
        self.0.rows(1, self.0.len() - 1).into_owned()
    }
}

/// An effect in Bloch coordinates, `(η₁, η₀ᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect(pub DVector<f64>);

impl Effect {
    /// `η₁ = (η|M)`.
    pub fn weight(&self) -> f64 {
        self.0[0]
    }

    pub fn traceless(&self) -> DVector<f64> {
        self.0.rows(1, self.0.len() - 1).into_owned()
    }
}

/// `(η|ρ)`.
pub fn pair(effect: &Effect, state: &State) -> Result<f64> {
    if effect.0.len() != state.0.len() {
        return Err(Error::DimensionMismatch { expected: effect.0.len(), found: state.0.len() });
    }
    Ok(effect.0.dot(&state.0))
}
