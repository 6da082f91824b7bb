//! Weight-morphophoric measurements (`Z W⁻¹ Zᵀ ∝ I`), the similarity they induce
//! between state space and probability simplex, the sign ambiguity of their
//! depolarizing states, and the `α = 1` simplex-embedding criterion.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::device::{
    check_weights, decompose_measurement, depolarizing_fit, weighted_gram, ReferenceDevice, ReferenceMeasurement,
    Sign, MEASUREMENT_TOL, MORPHO_TOL,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::space::GptSpace;

const BISECTION_STEPS: usize = 60;

/// Weight-morphophoricity of a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MorphoReport {
    pub is_weight_morphophoric: bool,
    /// `αc` with `Z W⁻¹ Zᵀ = (1/αc) I`, from the mean eigenvalue.
    pub alpha_c_product: f64,
    /// Weight-morphophoric and unbiased.
    pub is_morphophoric: bool,
    /// Squared Euclidean distance scale `1/(αc n)` for unbiased measurements.
    pub similarity_ratio: Option<f64>,
    /// `‖Z W⁻¹ Zᵀ − λ I‖_F`.
    pub residual: f64,
}

pub fn weight_morphophoricity_check(measurement: &ReferenceMeasurement) -> Result<MorphoReport> {
    if let Some(index) = measurement.w().iter().position(|&x| x <= 1e-12) {
        return Err(Error::ZeroBias { index });
    }
    let (_, lambda, residual) = weighted_gram(measurement);
    let is_weight_morphophoric = residual <= MORPHO_TOL;
    let unbiased = measurement.is_unbiased(MEASUREMENT_TOL);
    let alpha_c_product = 1.0 / lambda;
    Ok(MorphoReport {
        is_weight_morphophoric,
        alpha_c_product,
        is_morphophoric: is_weight_morphophoric && unbiased,
        similarity_ratio: unbiased.then(|| 1.0 / (alpha_c_product * measurement.n() as f64)),
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityReport {
    /// `max |‖P_ρ − P_σ‖²_M − ‖ρ₀ − σ₀‖²|` with `M = αc W⁻¹`.
    pub metric_residual: f64,
    /// Unbiased only: `max |‖P_ρ − P_σ‖² − ‖ρ₀ − σ₀‖²/(αc n)|`.
    pub euclidean_residual: Option<f64>,
    pub similarity_ratio: Option<f64>,
}

/// Distance preservation over Bloch state pairs.
pub fn similarity_residual(
    measurement: &ReferenceMeasurement,
    state_pairs: &[(DVector<f64>, DVector<f64>)],
) -> Result<SimilarityReport> {
    let report = weight_morphophoricity_check(measurement)?;
    if !report.is_weight_morphophoric {
        return Err(Error::NotWeightMorphophoric { residual: report.residual });
    }
    let ac = report.alpha_c_product;
    let w = measurement.w();
    let mut metric_residual = 0.0_f64;
    let mut euclidean_residual = 0.0_f64;
    for (rho, sigma) in state_pairs {
        let dp = measurement.probabilities(rho) - measurement.probabilities(sigma);
        let metric: f64 = dp.iter().zip(w.iter()).map(|(x, wi)| x * x / wi).sum::<f64>() * ac;
        let delta = (rho - sigma).rows(1, rho.len() - 1).norm_squared();
        metric_residual = metric_residual.max((metric - delta).abs());
        if let Some(ratio) = report.similarity_ratio {
            euclidean_residual = euclidean_residual.max((dp.norm_squared() - ratio * delta).abs());
        }
    }
    Ok(SimilarityReport {
        metric_residual,
        euclidean_residual: report.similarity_ratio.map(|_| euclidean_residual),
        similarity_ratio: report.similarity_ratio,
    })
}

/// Random weight-morphophoric measurement in any space.
///
/// `r − 1` orthonormal `n`-vectors orthogonal to `√w` form `Q`; the traceless block
/// is `Z = κ Q W^{1/2}`, so `Z W⁻¹ Zᵀ = κ² I` and `Σ_i Zt_i = 0`. `κ` is the
/// largest scale keeping every effect valid, which leaves the most room for
/// parallel-update states with `c` close to 1.
pub fn construct_weight_morphophoric(
    space: Arc<GptSpace>,
    n: usize,
    weights: Option<&DVector<f64>>,
    seed: u64,
) -> Result<ReferenceMeasurement> {
    let r = space.r();
    if n < r {
        return Err(Error::RankMismatch { expected: r, found: n });
    }
    let w = match weights {
        Some(w) => {
            check_weights(w, n)?;
            w.clone()
        }
        None => DVector::from_element(n, 1.0 / n as f64),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_w = w.map(f64::sqrt);
    let q = linalg::random_orthonormal_rows(r - 1, n, std::slice::from_ref(&sqrt_w), &mut rng);
    let z = DMatrix::from_fn(r - 1, n, |k, i| q[(k, i)] * sqrt_w[i]);
    let build = |kappa: f64| {
        let mut e = DMatrix::zeros(n, r);
        e.column_mut(0).copy_from(&w);
        e.columns_mut(1, r - 1).copy_from(&(z.transpose() * kappa));
        e
    };
    let valid = |kappa: f64| {
        let e = build(kappa);
        (0..n).all(|i| space.bloch_effect_valid(&e.row(i).transpose()))
    };
    let mut hi = 1.0;
    while valid(hi) {
        hi *= 2.0;
    }
    let kappa = linalg::bisect_feasible(valid, hi, BISECTION_STEPS);
    decompose_measurement(space, build(kappa))
}

/// One depolarizing state choice for a weight-morphophoric MIC.
#[derive(Debug, Clone)]
pub struct SignSolution {
    pub sign: Sign,
    pub x: DMatrix<f64>,
    pub alpha: f64,
    pub c: f64,
}

/// Enumerates `X = ±c Z W⁻¹` with `α = ±1/(c λ)` and keeps the branches whose
/// states pass the state oracle. `c` is the largest valid scale of the `+` branch.
pub fn fixed_up_to_sign_check(measurement: &ReferenceMeasurement) -> Result<Vec<SignSolution>> {
    let (n, r) = (measurement.n(), measurement.r());
    if n != r {
        return Err(Error::NotMic { n, r });
    }
    let report = weight_morphophoricity_check(measurement)?;
    if !report.is_weight_morphophoric {
        return Err(Error::NotWeightMorphophoric { residual: report.residual });
    }
    let lambda = 1.0 / report.alpha_c_product;
    let space = measurement.space();
    let y = measurement.z_winv();
    let states_valid = |x: &DMatrix<f64>| {
        x.column_iter().all(|col| {
            let mut v = DVector::zeros(r);
            v[0] = 1.0;
            v.rows_mut(1, r - 1).copy_from(&col);
            space.bloch_state_valid(&v)
        })
    };
    let c = linalg::bisect_feasible(|c| states_valid(&(&y * c)), 1.0, BISECTION_STEPS);
    if c <= 0.0 {
        return Ok(Vec::new());
    }
    Ok([Sign::Plus, Sign::Minus]
        .into_iter()
        .map(|sign| SignSolution { sign, x: &y * (c * sign.value()), alpha: sign.value() / (c * lambda), c })
        .filter(|s| states_valid(&s.x))
        .collect())
}

/// Outcome of [`simplex_embedding_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimplexEmbedding {
    pub embeddable: bool,
    pub alpha: f64,
    /// `‖P² − P‖_F`, when embeddable.
    pub idempotency_residual: Option<f64>,
    /// `max |(η|ρ) − P(S)·P(E)|` over sampled effect/state pairs, when embeddable.
    pub probability_residual: Option<f64>,
}

pub const EMBEDDING_TOL: f64 = 1e-9;

/// A device with `α = 1` embeds the state space in the probability simplex via
/// `ρ ↦ P(E)` and each effect `η` in the hypercube via `η ↦ P(S) = ((η|S_i))_i`.
pub fn simplex_embedding_check(device: &ReferenceDevice, seed: u64) -> SimplexEmbedding {
    let fit = depolarizing_fit(device);
    let embeddable = fit.depolarizing && (fit.alpha - 1.0).abs() <= 1e-8;
    if !embeddable {
        return SimplexEmbedding { embeddable, alpha: fit.alpha, idempotency_residual: None, probability_residual: None };
    }
    let p = device.self_conditional();
    let idem = (p * p - p).norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = device.space();
    let s = device.states().matrix();
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let rho = space.sample_state(&mut rng).0;
        let eta = space.sample_effect(&mut rng).0;
        let ps = s.transpose() * &eta;
        let pe = device.measurement().probabilities(&rho);
        worst = worst.max((eta.dot(&rho) - ps.dot(&pe)).abs());
    }
    SimplexEmbedding {
        embeddable: idem <= EMBEDDING_TOL && worst <= EMBEDDING_TOL,
        alpha: fit.alpha,
        idempotency_residual: Some(idem),
        probability_residual: Some(worst),
    }
}
