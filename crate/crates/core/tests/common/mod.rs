#![allow(dead_code)]

use std::sync::Arc;

use gptkit::device::{depolarizing_device, random_ic_measurement, LeftInverse, ReferenceDevice, Sign};
use gptkit::space::{make_space, GptSpace, SpaceKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEVICES_PER_KIND: u64 = 20;

pub fn suite_kinds() -> Vec<SpaceKind> {
    vec![
        SpaceKind::Classical { m: 3 },
        SpaceKind::Classical { m: 4 },
        SpaceKind::Classical { m: 5 },
        SpaceKind::QuantumComplex { d: 2 },
        SpaceKind::QuantumComplex { d: 3 },
        SpaceKind::QuantumReal { d: 2 },
        SpaceKind::QuantumReal { d: 3 },
        SpaceKind::Square,
        SpaceKind::Ball { k: 3 },
    ]
}

pub fn space(kind: SpaceKind) -> Arc<GptSpace> {
    Arc::new(make_space(kind).unwrap())
}

pub struct SuiteDevice {
    pub kind: SpaceKind,
    pub seed: u64,
    pub device: ReferenceDevice,
}

/// Seeded random IC measurement with `n` drawn from `[r, 2r]`.
pub fn suite_measurement(kind: SpaceKind, seed: u64) -> gptkit::Result<gptkit::device::ReferenceMeasurement> {
    let sp = space(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = sp.r();
    let n = rng.random_range(r..=2 * r);
    random_ic_measurement(sp, n, None, &mut rng)
}

/// Pseudoinverse depolarizing devices for every suite kind, or the first failure.
pub fn suite() -> Result<Vec<SuiteDevice>, String> {
    let mut out = Vec::new();
    for kind in suite_kinds() {
        for i in 0..DEVICES_PER_KIND {
            let seed = 1000 * kind.dimension() as u64 + i;
            let m = suite_measurement(kind, seed).map_err(|e| format!("{} seed {seed}: {e}", kind.label()))?;
            let device = depolarizing_device(m, &LeftInverse::Pseudoinverse, Sign::Plus)
                .map_err(|e| format!("{} seed {seed}: {e}", kind.label()))?;
            out.push(SuiteDevice { kind, seed, device });
        }
    }
    Ok(out)
}

/// Random nullspace corrector `K = R (I − Q)` where `Q` projects onto span{Zt, w}.
pub fn nullspace_corrector(device_zt: &DMatrix<f64>, w: &DVector<f64>, scale: f64, seed: u64) -> DMatrix<f64> {
    let n = device_zt.nrows();
    let k = device_zt.ncols();
    let mut span = DMatrix::zeros(n, k + 1);
    span.columns_mut(0, k).copy_from(device_zt);
    span.column_mut(k).copy_from(w);
    let q = gptkit::linalg::column_projector(&span);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gptkit::linalg::random_normal_matrix(k, n, &mut rng) * (DMatrix::identity(n, n) - q) * scale
}
