//! Informationally complete reference measurements, post-measurement states, and
//! the measure-and-prepare devices they form.
//!
//! Everything here is expressed in the canonical Bloch form of the underlying
//! space: effects are rows `(w_i, z_iᵀ)` of `E = [w | Zt]`, states are columns
//! `(1, x_i)` of `S = [uᵀ; X]`. A device is depolarizing with parameter `1/α`
//! when `X w = 0` and `α X Zt = I`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quantum;
use crate::space::GptSpace;

/// Tolerance for `uᵀE = (I|`.
pub const MEASUREMENT_TOL: f64 = 1e-10;
/// Tolerance for `X w = 0` and `α X Zt = I`.
pub const DEPOLARIZING_TOL: f64 = 1e-9;
/// Channel fits at or below this Frobenius residual count as depolarizing.
pub const FIT_TOL: f64 = 1e-8;
/// Multiplicative margin applied to the bisected scale `|α|`.
pub const ALPHA_MARGIN: f64 = 1e-6;
const BISECTION_STEPS: usize = 60;
const MAX_SCALE: f64 = 1e12;

/// A measurement with `n` outcomes, effects as the rows of `E` (Bloch coordinates).
#[derive(Debug, Clone)]
pub struct ReferenceMeasurement {
    space: Arc<GptSpace>,
    effects: DMatrix<f64>,
}

impl ReferenceMeasurement {
    pub fn space(&self) -> &Arc<GptSpace> {
        &self.space
    }

    /// `E`, `n × r`.
    pub fn effects(&self) -> &DMatrix<f64> {
        &self.effects
    }

    pub fn n(&self) -> usize {
        self.effects.nrows()
    }

    pub fn r(&self) -> usize {
        self.effects.ncols()
    }

    /// Biases `w = E|M)`.
    pub fn w(&self) -> DVector<f64> {
        self.effects.column(0).into_owned()
    }

    /// Traceless block `Zt`, `n × (r-1)`.
    pub fn zt(&self) -> DMatrix<f64> {
        self.effects.columns(1, self.r() - 1).into_owned()
    }

    /// `Z = Ztᵀ`.
    pub fn z(&self) -> DMatrix<f64> {
        self.zt().transpose()
    }

    /// Largest deviation of the biases from `1/n`.
    pub fn bias_deviation(&self) -> f64 {
        let uniform = 1.0 / self.n() as f64;
        self.w().iter().fold(0.0_f64, |acc, &x| acc.max((x - uniform).abs()))
    }

    pub fn is_unbiased(&self, tol: f64) -> bool {
        self.bias_deviation() <= tol
    }

    /// `P(E) = E|ρ)` for a Bloch state.
    pub fn probabilities(&self, state: &DVector<f64>) -> DVector<f64> {
        &self.effects * state
    }

    /// `Z W⁻¹`, the traceless part of states proportional to the effects.
    pub fn z_winv(&self) -> DMatrix<f64> {
        let w = self.w();
        let mut y = self.z();
        for (i, mut col) in y.column_iter_mut().enumerate() {
            col /= w[i];
        }
        y
    }
}

/// Splits `effects` (rows, Bloch coordinates) into biases and traceless block after
/// checking that they form an informationally complete measurement.
pub fn decompose_measurement(space: Arc<GptSpace>, effects: DMatrix<f64>) -> Result<ReferenceMeasurement> {
    let r = space.r();
    if effects.ncols() != r {
        return Err(Error::DimensionMismatch { expected: r, found: effects.ncols() });
    }
    let n = effects.nrows();
    let mut unit = DVector::zeros(r);
    unit[0] = 1.0;
    let sum = effects.row_sum().transpose();
    let residual = (sum - unit).amax();
    if residual > MEASUREMENT_TOL {
        return Err(Error::NotAMeasurement { residual });
    }
    for i in 0..n {
        if !space.bloch_effect_valid(&effects.row(i).transpose()) {
            return Err(Error::InvalidEffect { index: i });
        }
    }
    for i in 0..n {
        if effects[(i, 0)] <= 1e-12 {
            return Err(Error::ZeroBias { index: i });
        }
    }
    let rank = if n < r { n.min(linalg::numerical_rank(&effects)) } else { linalg::numerical_rank(&effects) };
    if rank < r {
        return Err(Error::NotInformationallyComplete { rank, required: r });
    }
    Ok(ReferenceMeasurement { space, effects })
}

/// Measurement from effects given in the space's native coordinates.
pub fn measurement_from_native(space: Arc<GptSpace>, native_rows: &DMatrix<f64>) -> Result<ReferenceMeasurement> {
    let bloch = space.bloch().clone();
    let rows: Vec<_> = native_rows
        .row_iter()
        .map(|row| bloch.effect_to_bloch(&row.transpose()).transpose())
        .collect();
    decompose_measurement(space, DMatrix::from_rows(&rows))
}

/// The identity measurement of a classical space (effects are the vertex indicators).
pub fn classical_identity_measurement(space: Arc<GptSpace>) -> Result<ReferenceMeasurement> {
    let r = space.r();
    measurement_from_native(space, &DMatrix::identity(r, r))
}

/// Random informationally complete measurement with `n` outcomes.
///
/// Effects are `(w_i, s·z_i)` with `z_i` centered standard-normal draws and `s` a
/// random fraction (between one half and 0.95) of the largest scale that keeps
/// every effect valid. `weights = None` gives an unbiased measurement.
pub fn random_ic_measurement<R: Rng + ?Sized>(
    space: Arc<GptSpace>,
    n: usize,
    weights: Option<&DVector<f64>>,
    rng: &mut R,
) -> Result<ReferenceMeasurement> {
    let r = space.r();
    if n < r {
        return Err(Error::NotInformationallyComplete { rank: n, required: r });
    }
    let w = match weights {
        Some(w) => {
            check_weights(w, n)?;
            w.clone()
        }
        None => DVector::from_element(n, 1.0 / n as f64),
    };
    let mut z = linalg::random_normal_matrix(n, r - 1, rng);
    let mean = z.row_mean();
    for mut row in z.row_iter_mut() {
        row -= &mean;
    }
    let build = |s: f64| {
        let mut e = DMatrix::zeros(n, r);
        e.column_mut(0).copy_from(&w);
        e.columns_mut(1, r - 1).copy_from(&(&z * s));
        e
    };
    let valid = |s: f64| {
        let e = build(s);
        (0..n).all(|i| space.bloch_effect_valid(&e.row(i).transpose()))
    };
    let mut hi = 1.0;
    while valid(hi) && hi < MAX_SCALE {
        hi *= 2.0;
    }
    let smax = linalg::bisect_feasible(valid, hi, BISECTION_STEPS);
    let s = smax * rng.random_range(0.5..0.95);
    decompose_measurement(space, build(s))
}

pub(crate) fn check_weights(w: &DVector<f64>, n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.len() });
    }
    if w.iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidWeights("weights must be positive".into()));
    }
    if (w.sum() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidWeights(format!("weights sum to {}", w.sum())));
    }
    Ok(())
}

/// Post-measurement states as the columns of `S` (Bloch coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceStates {
    states: DMatrix<f64>,
}

impl ReferenceStates {
    /// Checks first row all ones, every column a valid state, and rank `r`.
    pub fn new(space: &GptSpace, states: DMatrix<f64>) -> Result<Self> {
        let r = space.r();
        if states.nrows() != r {
            return Err(Error::DimensionMismatch { expected: r, found: states.nrows() });
        }
        for (i, col) in states.column_iter().enumerate() {
            if (col[0] - 1.0).abs() > MEASUREMENT_TOL || !space.bloch_state_valid(&col.into_owned()) {
                return Err(Error::InvalidState { index: i });
            }
        }
        let rank = linalg::numerical_rank(&states);
        if rank < r {
            return Err(Error::NotInformationallyComplete { rank, required: r });
        }
        Ok(Self { states })
    }

    /// Builds `S = [uᵀ; X]` from its traceless block.
    pub fn from_traceless(space: &GptSpace, x: &DMatrix<f64>) -> Result<Self> {
        Self::new(space, with_unit_row(x))
    }

    /// `S`, `r × n`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.states
    }

    /// `X`, `(r-1) × n`.
    pub fn x(&self) -> DMatrix<f64> {
        self.states.rows(1, self.states.nrows() - 1).into_owned()
    }

    pub fn n(&self) -> usize {
        self.states.ncols()
    }
}

fn with_unit_row(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(x.nrows() + 1, x.ncols());
    s.row_mut(0).fill(1.0);
    s.rows_mut(1, x.nrows()).copy_from(x);
    s
}

/// A measure-and-prepare reference device.
#[derive(Debug, Clone)]
pub struct ReferenceDevice {
    measurement: ReferenceMeasurement,
    states: ReferenceStates,
    alpha: Option<f64>,
    channel: DMatrix<f64>,
    self_conditional: DMatrix<f64>,
}

impl ReferenceDevice {
    /// Assembles a device. When `alpha` is given, `X w = 0` and `α X Zt = I` are
    /// enforced to [`DEPOLARIZING_TOL`].
    pub fn new(measurement: ReferenceMeasurement, states: ReferenceStates, alpha: Option<f64>) -> Result<Self> {
        if states.n() != measurement.n() {
            return Err(Error::DimensionMismatch { expected: measurement.n(), found: states.n() });
        }
        let channel = states.matrix() * measurement.effects();
        let self_conditional = measurement.effects() * states.matrix();
        let dev = Self { measurement, states, alpha, channel, self_conditional };
        if let Some(a) = alpha {
            let defect = dev.depolarizing_defect(a);
            if !a.is_finite() || defect > DEPOLARIZING_TOL {
                return Err(Error::NotDepolarizing { residual: defect });
            }
        }
        Ok(dev)
    }

    /// Keeps a declared `alpha` without checking it. For auditing device files whose
    /// declaration may be wrong; [`depolarizing_fit`] and the Born identity then expose
    /// the inconsistency.
    pub fn with_declared_alpha(measurement: ReferenceMeasurement, states: ReferenceStates, alpha: Option<f64>) -> Result<Self> {
        let mut dev = Self::new(measurement, states, None)?;
        dev.alpha = alpha;
        Ok(dev)
    }

    /// `max(‖X w‖_∞, max|α X Zt − I|)` for a candidate `α`.
    pub fn depolarizing_defect(&self, alpha: f64) -> f64 {
        let x = self.states.x();
        let r = self.r();
        let xw = linalg::max_abs_vec(&(&x * self.measurement.w()));
        let bi = linalg::max_abs(&(&x * self.measurement.zt() * alpha - DMatrix::identity(r - 1, r - 1)));
        xw.max(bi)
    }

    pub fn measurement(&self) -> &ReferenceMeasurement {
        &self.measurement
    }

    pub fn states(&self) -> &ReferenceStates {
        &self.states
    }

    pub fn space(&self) -> &Arc<GptSpace> {
        self.measurement.space()
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// `α`, or a precondition error naming `what` when the device is not depolarizing.
    pub fn require_alpha(&self, what: &str) -> Result<f64> {
        self.alpha
            .ok_or_else(|| Error::Precondition(format!("{what} requires a depolarizing device with known alpha")))
    }

    /// Channel operator `C = S E`, `r × r`.
    pub fn channel(&self) -> &DMatrix<f64> {
        &self.channel
    }

    /// `P(E|E) = E S`, `n × n`.
    pub fn self_conditional(&self) -> &DMatrix<f64> {
        &self.self_conditional
    }

    pub fn n(&self) -> usize {
        self.measurement.n()
    }

    pub fn r(&self) -> usize {
        self.measurement.r()
    }

    /// `Zt X`, the traceless part of `P(E|E)`.
    pub fn zt_x(&self) -> DMatrix<f64> {
        self.measurement.zt() * self.states.x()
    }
}

/// `P(E|E) = E S`.
pub fn self_conditional(device: &ReferenceDevice) -> DMatrix<f64> {
    device.self_conditional().clone()
}

/// Which left inverse of `Zt` furnishes the reference states.
#[derive(Debug, Clone, PartialEq)]
pub enum LeftInverse {
    Pseudoinverse,
    /// `Zt⁺ + K`, with `K Zt = 0` (and `K w = 0`).
    PseudoinversePlusNullspace(DMatrix<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// The left inverse `L` of `Zt` selected by `choice`, adjusted so that `L w = 0`.
pub fn left_inverse(measurement: &ReferenceMeasurement, choice: &LeftInverse) -> Result<DMatrix<f64>> {
    let zt = measurement.zt();
    let mut l = linalg::pinv(&zt);
    if let LeftInverse::PseudoinversePlusNullspace(k) = choice {
        if k.shape() != l.shape() {
            return Err(Error::DimensionMismatch { expected: l.ncols(), found: k.ncols() });
        }
        let residual = linalg::max_abs(&(k * &zt));
        if residual > 1e-9 * (1.0 + linalg::max_abs(k)) {
            return Err(Error::InvalidNullspace { residual });
        }
        l += k;
    }
    // L (I - w uᵀ): keeps L Zt = I because uᵀ Zt = 0, and forces L w = 0.
    let lw = &l * measurement.w();
    l -= lw * linalg::ones(measurement.n()).transpose();
    Ok(l)
}

/// Smallest `|α| >= 1` (with the given sign) for which `(1, L_i/α)` are valid states.
fn smallest_feasible_alpha(space: &GptSpace, l: &DMatrix<f64>, sign: Sign) -> Result<f64> {
    let s = sign.value();
    let feasible = |mag: f64| {
        let x = l / (s * mag);
        x.column_iter().all(|col| {
            let mut v = DVector::zeros(col.len() + 1);
            v[0] = 1.0;
            v.rows_mut(1, col.len()).copy_from(&col);
            space.bloch_state_valid(&v)
        })
    };
    if feasible(1.0) {
        return Ok(s);
    }
    let mut hi = 2.0;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > MAX_SCALE {
            return Err(match sign {
                Sign::Minus => Error::NoNegativeBranch,
                Sign::Plus => Error::NoFeasibleScale { limit: MAX_SCALE },
            });
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(s * hi * (1.0 + ALPHA_MARGIN))
}

/// Depolarizing reference states `X = L/α` for an arbitrary IC measurement.
pub fn construct_depolarizing_states(
    measurement: &ReferenceMeasurement,
    choice: &LeftInverse,
    sign: Sign,
) -> Result<(ReferenceStates, f64)> {
    let l = left_inverse(measurement, choice)?;
    let space = measurement.space();
    let alpha = smallest_feasible_alpha(space, &l, sign)?;
    let states = ReferenceStates::from_traceless(space, &(l / alpha))?;
    Ok((states, alpha))
}

/// [`construct_depolarizing_states`] assembled into a device.
pub fn depolarizing_device(
    measurement: ReferenceMeasurement,
    choice: &LeftInverse,
    sign: Sign,
) -> Result<ReferenceDevice> {
    let (states, alpha) = construct_depolarizing_states(&measurement, choice, sign)?;
    ReferenceDevice::new(measurement, states, Some(alpha))
}

/// Result of [`parallel_update_states`].
#[derive(Debug, Clone)]
pub struct ParallelUpdate {
    pub states: ReferenceStates,
    /// Present only when the measurement is weight-morphophoric.
    pub alpha: Option<f64>,
    pub c: f64,
}

/// Tolerance on `Z W⁻¹ Zt ∝ I`.
pub const MORPHO_TOL: f64 = 1e-8;

/// `Z W⁻¹ Zt`, its proportionality constant `λ` (mean eigenvalue) and `‖G - λI‖_F`.
pub(crate) fn weighted_gram(measurement: &ReferenceMeasurement) -> (DMatrix<f64>, f64, f64) {
    let g = measurement.z_winv() * measurement.zt();
    let k = g.nrows();
    let lambda = g.trace() / k as f64;
    let residual = (&g - DMatrix::identity(k, k) * lambda).norm();
    (g, lambda, residual)
}

/// States proportional to the effects, `X = ±c Z W⁻¹`, with `c` the value closest
/// to 1 (from below) that keeps every state valid.
pub fn parallel_update_states(measurement: &ReferenceMeasurement, sign: Sign) -> Result<ParallelUpdate> {
    let w = measurement.w();
    if let Some(i) = w.iter().position(|&x| x <= 1e-12) {
        return Err(Error::ZeroBias { index: i });
    }
    let space = measurement.space();
    let y = measurement.z_winv() * sign.value();
    let feasible = |c: f64| {
        with_unit_row(&(&y * c)).column_iter().all(|col| space.bloch_state_valid(&col.into_owned()))
    };
    let c = linalg::bisect_feasible(feasible, 1.0, BISECTION_STEPS);
    if c <= 0.0 {
        return Err(match sign {
            Sign::Minus => Error::NoNegativeBranch,
            Sign::Plus => Error::NoFeasibleScale { limit: 1.0 },
        });
    }
    let states = ReferenceStates::from_traceless(space, &(&y * c))?;
    let (_, lambda, residual) = weighted_gram(measurement);
    let alpha = (residual <= MORPHO_TOL).then(|| sign.value() / (c * lambda));
    Ok(ParallelUpdate { states, alpha, c })
}

/// [`parallel_update_states`] assembled into a device.
pub fn parallel_update_device(measurement: ReferenceMeasurement, sign: Sign) -> Result<ReferenceDevice> {
    let pu = parallel_update_states(&measurement, sign)?;
    ReferenceDevice::new(measurement, pu.states, pu.alpha)
}

/// Least-squares fit of the channel to `(1/α) I + (1 - 1/α) |I)(I|/(I|I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolarizingFit {
    pub alpha: f64,
    /// Fitted depolarizing parameter `1/α`.
    pub parameter: f64,
    pub residual: f64,
    pub depolarizing: bool,
    /// For complex quantum spaces: whether `-1/(d²-1) <= 1/α <= 1`.
    pub completely_positive: Option<bool>,
}

pub fn depolarizing_fit(device: &ReferenceDevice) -> DepolarizingFit {
    fit_channel(device.channel(), device.space())
}

pub(crate) fn fit_channel(channel: &DMatrix<f64>, space: &GptSpace) -> DepolarizingFit {
    let r = channel.nrows();
    // in Bloch form |I)(I|/(I|I) is the projector onto the first coordinate
    let mut pi1 = DMatrix::zeros(r, r);
    pi1[(0, 0)] = 1.0;
    let parameter = (channel.trace() - channel[(0, 0)]) / (r - 1) as f64;
    let model = &pi1 + (DMatrix::identity(r, r) - &pi1) * parameter;
    let residual = (channel - model).norm();
    let completely_positive = match space.kind() {
        crate::space::SpaceKind::QuantumComplex { d } => Some(quantum::parameter_within_cp_bounds(parameter, d)),
        _ => None,
    };
    DepolarizingFit {
        alpha: 1.0 / parameter,
        parameter,
        residual,
        depolarizing: residual <= FIT_TOL,
        completely_positive,
    }
}

/// Diagonal / off-diagonal structure of a square matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equiangularity {
    pub is_equiangular: bool,
    pub diag_value: f64,
    pub offdiag_value: f64,
}

pub fn equiangularity_check(p: &DMatrix<f64>, tolerance: f64) -> Equiangularity {
    let n = p.nrows();
    let diag: Vec<f64> = (0..n).map(|i| p[(i, i)]).collect();
    let off: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|ij| p[ij])
        .collect();
    let spread = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if v.is_empty() { 0.0 } else { hi - lo }
    };
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Equiangularity {
        is_equiangular: p.is_square() && spread(&diag) <= tolerance && spread(&off) <= tolerance,
        diag_value: mean(&diag),
        offdiag_value: mean(&off),
    }
}
