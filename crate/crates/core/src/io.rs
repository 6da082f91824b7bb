//! JSON device files and fixed-precision JSON output.
//!
//! A device file looks like
//!
//! ```json
//! {"space": {"kind": "quantum_complex", "d": 2},
//!  "effects": [[0.25, 0.14, 0.14, 0.14], ...],
//!  "states": [[1.0, 0.57, 0.57, 0.57], ...],
//!  "alpha": 3.0}
//! ```
//!
//! `effects` holds one row per outcome and `states` one array per reference state,
//! both in Bloch coordinates unless `"coordinates": "native"` is given. `states`
//! and `alpha` are optional: missing states are built with the pseudoinverse
//! depolarizing construction, and a missing `alpha` is filled from the
//! depolarizing fit when the channel is depolarizing.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::device::{
    depolarizing_device, depolarizing_fit, ReferenceDevice, ReferenceMeasurement, ReferenceStates, LeftInverse,
    Sign, DEPOLARIZING_TOL, MEASUREMENT_TOL,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::space::{make_space, GptSpace, SpaceKind};

/// Significant digits kept in JSON output.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    #[default]
    Bloch,
    Native,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceFile {
    pub space: SpaceKind,
    pub effects: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "is_bloch")]
    pub coordinates: Coordinates,
}

fn is_bloch(c: &Coordinates) -> bool {
    *c == Coordinates::Bloch
}

/// A named invariant that a device file violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

fn violation(invariant: &'static str, detail: impl Into<String>) -> Violation {
    Violation { invariant, detail: detail.into() }
}

impl DeviceFile {
    pub fn from_device(device: &ReferenceDevice) -> Self {
        Self {
            space: device.space().kind(),
            effects: linalg::to_rows(device.measurement().effects()),
            states: Some(linalg::to_rows(&device.states().matrix().transpose())),
            alpha: device.alpha(),
            coordinates: Coordinates::Bloch,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    fn effect_matrix(&self, space: &GptSpace) -> std::result::Result<DMatrix<f64>, Violation> {
        let e = linalg::from_rows(&self.effects)
            .ok_or_else(|| violation("effects_shape", "effect rows have different lengths"))?;
        if e.ncols() != space.r() {
            return Err(violation("effects_shape", format!("effects have {} columns, space dimension is {}", e.ncols(), space.r())));
        }
        Ok(match self.coordinates {
            Coordinates::Bloch => e,
            Coordinates::Native => {
                let rows: Vec<_> =
                    e.row_iter().map(|row| space.bloch().effect_to_bloch(&row.transpose()).transpose()).collect();
                DMatrix::from_rows(&rows)
            }
        })
    }

    fn state_matrix(&self, space: &GptSpace, n: usize) -> std::result::Result<Option<DMatrix<f64>>, Violation> {
        let Some(states) = &self.states else { return Ok(None) };
        let st = linalg::from_rows(states).ok_or_else(|| violation("states_shape", "state arrays have different lengths"))?;
        if st.nrows() != n || st.ncols() != space.r() {
            return Err(violation(
                "states_shape",
                format!("expected {n} states of dimension {}, found {} of dimension {}", space.r(), st.nrows(), st.ncols()),
            ));
        }
        let cols: Vec<DVector<f64>> = st
            .row_iter()
            .map(|row| match self.coordinates {
                Coordinates::Bloch => row.transpose(),
                Coordinates::Native => space.bloch().state_to_bloch(&row.transpose()),
            })
            .collect();
        Ok(Some(DMatrix::from_columns(&cols)))
    }

    /// Every violated invariant, in a fixed order. Empty when the file describes a valid device.
    pub fn validate(&self) -> Vec<Violation> {
        self.collect_violations(true)
    }

    /// [`DeviceFile::validate`] without the checks tying a declared `alpha` to the states.
    pub fn validate_structure(&self) -> Vec<Violation> {
        self.collect_violations(false)
    }

    fn collect_violations(&self, check_alpha: bool) -> Vec<Violation> {
        let space = match make_space(self.space) {
            Ok(s) => s,
            Err(e) => return vec![violation("space", e.to_string())],
        };
        let mut out = Vec::new();
        let e = match self.effect_matrix(&space) {
            Ok(e) => e,
            Err(v) => return vec![v],
        };
        let (n, r) = e.shape();
        let sum = e.row_sum().transpose();
        let mut unit = DVector::zeros(r);
        unit[0] = 1.0;
        let residual = (sum - unit).amax();
        if residual > MEASUREMENT_TOL {
            out.push(violation("effects_sum_to_unit", format!("residual {residual:e}")));
        }
        for i in 0..n {
            if !space.bloch_effect_valid(&e.row(i).transpose()) {
                out.push(violation("effect_valid", format!("effect {i} lies outside the effect space")));
            }
            if e[(i, 0)] <= 1e-12 {
                out.push(violation("nonzero_bias", format!("outcome {i} has zero bias")));
            }
        }
        let rank = linalg::numerical_rank(&e);
        if rank < r {
            out.push(violation("informationally_complete", format!("rank {rank}, need {r}")));
        }
        let s = match self.state_matrix(&space, n) {
            Ok(s) => s,
            Err(v) => {
                out.push(v);
                return out;
            }
        };
        if let Some(s) = &s {
            for (j, col) in s.column_iter().enumerate() {
                if (col[0] - 1.0).abs() > MEASUREMENT_TOL {
                    out.push(violation("state_normalized", format!("state {j} has trace {}", col[0])));
                } else if !space.bloch_state_valid(&col.into_owned()) {
                    out.push(violation("state_valid", format!("state {j} lies outside the state cone")));
                }
            }
            if let Some(alpha) = self.alpha.filter(|_| check_alpha) {
                let x = s.rows(1, r - 1).into_owned();
                let w = e.column(0).into_owned();
                let zt = e.columns(1, r - 1).into_owned();
                let xw = linalg::max_abs_vec(&(&x * w));
                if xw > DEPOLARIZING_TOL {
                    out.push(violation("states_average_to_maximally_mixed", format!("max |X w| = {xw:e}")));
                }
                let bi = linalg::max_abs(&(&x * &zt * alpha - DMatrix::identity(r - 1, r - 1)));
                if bi > DEPOLARIZING_TOL {
                    out.push(violation("depolarizing_alpha", format!("max |alpha X Zt - I| = {bi:e}")));
                }
            }
        } else if self.alpha.is_some() && check_alpha {
            out.push(violation("states_present", "alpha given without states"));
        }
        out
    }

    /// Builds the device, reporting every violated invariant at once.
    pub fn into_device(&self) -> Result<ReferenceDevice> {
        self.build(true)
    }

    /// Builds the device after structural validation only, keeping a declared
    /// `alpha` unchecked so that an audit can report the inconsistency.
    pub fn into_declared_device(&self) -> Result<ReferenceDevice> {
        self.build(false)
    }

    fn build(&self, check_alpha: bool) -> Result<ReferenceDevice> {
        let violations = self.collect_violations(check_alpha);
        if !violations.is_empty() {
            let names: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::Format(names.join("; ")));
        }
        let space: Arc<GptSpace> = Arc::new(make_space(self.space)?);
        let e = self.effect_matrix(&space).map_err(|v| Error::Format(v.to_string()))?;
        let n = e.nrows();
        let measurement = crate::device::decompose_measurement(space.clone(), e)?;
        match self.state_matrix(&space, n).map_err(|v| Error::Format(v.to_string()))? {
            None => depolarizing_device(measurement, &LeftInverse::Pseudoinverse, Sign::Plus),
            Some(s) => {
                let states = ReferenceStates::new(&space, s)?;
                match self.alpha {
                    Some(a) if !check_alpha => ReferenceDevice::with_declared_alpha(measurement, states, Some(a)),
                    Some(a) => ReferenceDevice::new(measurement, states, Some(a)),
                    None => with_fitted_alpha(measurement, states),
                }
            }
        }
    }
}

fn with_fitted_alpha(measurement: ReferenceMeasurement, states: ReferenceStates) -> Result<ReferenceDevice> {
    let plain = ReferenceDevice::new(measurement.clone(), states.clone(), None)?;
    let fit = depolarizing_fit(&plain);
    if fit.depolarizing && fit.alpha.is_finite() {
        if let Ok(dev) = ReferenceDevice::new(measurement, states, Some(fit.alpha)) {
            return Ok(dev);
        }
    }
    Ok(plain)
}

pub fn read_device(path: &std::path::Path) -> Result<ReferenceDevice> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    DeviceFile::from_json(&text)?.into_device()
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits; `-0` becomes `0`.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let y: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses");
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

/// Applies [`round_significant`] to every number in a JSON tree.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => serde_json::Number::from_f64(round_significant(x)).map_or(Value::Null, Value::Number),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with every float rounded to [`SIGNIFICANT_DIGITS`] digits.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = round_value(serde_json::to_value(value)?);
    Ok(serde_json::to_string_pretty(&v)?)
}
