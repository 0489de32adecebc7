//! Variance-based sensitivity indices estimated on a surrogate, plus the
//! linear correlation coefficient on raw samples.
//!
//! Two independent LHS matrices `A` and `B` are drawn; `AB_i` is `A` with
//! column `i` taken from `B`. With `f` the surrogate:
//!
//! ```text
//! V(E(Y|X_i))   ≈ V̂(Y) − 1/(2n) Σ (f(B)_j − f(AB_i)_j)²
//! V_Ti          ≈ 1/(2n) Σ (f(A)_j − f(AB_i)_j)²
//! ```
//!
//! which costs `(k + 2)·n` surrogate evaluations.

use serde::{Deserialize, Serialize};

use crate::error::{MopError, Result};
use crate::par;
use crate::sampling::{sample_lhs, CorrelationSpec, VariableDef};
use crate::stats;
use crate::surrogate::Surrogate;

pub const MIN_MC_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityIndices {
    /// First-order indices, negative estimates clamped to 0.
    pub first_order: Vec<f64>,
    /// Total-effect indices, negative estimates clamped to 0.
    pub total_effect: Vec<f64>,
    pub first_order_raw: Vec<f64>,
    pub total_effect_raw: Vec<f64>,
    pub output_variance: f64,
    pub n_mc: usize,
    pub seed: u64,
}

impl SensitivityIndices {
    /// Monte Carlo tolerance `3/√n` used by the consistency checks.
    pub fn tolerance(&self) -> f64 {
        3.0 / (self.n_mc as f64).sqrt()
    }
}

/// Sample linear correlation coefficient.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(MopError::param("correlation needs vectors of equal length"));
    }
    if x.len() < 2 {
        return Err(MopError::param("correlation needs at least two observations"));
    }
    stats::pearson(x, y).ok_or_else(|| MopError::degenerate("correlation of a constant vector"))
}

/// SplitMix64 step, used to derive independent stream seeds.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First-order and total-effect indices of `model` under independent inputs
/// with the marginals `vars` (one per model input).
///
/// Correlated inputs are refused: `correlation` must be absent or the
/// identity.
pub fn sobol_indices<S: Surrogate + ?Sized>(
    model: &S,
    vars: &[VariableDef],
    n_mc: usize,
    seed: u64,
    correlation: Option<&CorrelationSpec>,
) -> Result<SensitivityIndices> {
    if let Some(c) = correlation {
        if !c.is_identity() {
            return Err(MopError::Unsupported(
                "variance-based indices assume independent inputs; correlated inputs are not supported"
                    .into(),
            ));
        }
    }
    if n_mc < MIN_MC_SAMPLES {
        return Err(MopError::param(format!(
            "n_mc must be at least {MIN_MC_SAMPLES}, got {n_mc}"
        )));
    }
    let k = vars.len();
    if k != model.input_dim() {
        return Err(MopError::param(format!(
            "{k} marginals given for a model with {} inputs",
            model.input_dim()
        )));
    }
    let a = sample_lhs(vars, n_mc, derive_seed(seed, 0), None)?;
    let b = sample_lhs(vars, n_mc, derive_seed(seed, 1), None)?;
    let (a, b) = (a.inputs(), b.inputs());
    let row = |m: &nalgebra::DMatrix<f64>, j: usize| -> Vec<f64> { m.row(j).iter().cloned().collect() };

    let f_a = par::try_map_indices(n_mc, |j| model.predict_point(&row(a, j)))?;
    let f_b = par::try_map_indices(n_mc, |j| model.predict_point(&row(b, j)))?;

    let mut pooled = f_a.clone();
    pooled.extend_from_slice(&f_b);
    let variance = stats::sum_sq_dev(&pooled) / pooled.len() as f64;
    let mean = stats::mean(&pooled);
    if !(variance > 0.0) || variance.sqrt() <= 1e-10 * mean.abs() {
        return Err(MopError::degenerate("surrogate output has zero variance"));
    }

    let mut first_raw = Vec::with_capacity(k);
    let mut total_raw = Vec::with_capacity(k);
    for i in 0..k {
        let f_ab = par::try_map_indices(n_mc, |j| {
            let mut x = row(a, j);
            x[i] = b[(j, i)];
            model.predict_point(&x)
        })?;
        let mut sum_first = 0.0;
        let mut sum_total = 0.0;
        for j in 0..n_mc {
            let db = f_b[j] - f_ab[j];
            let da = f_a[j] - f_ab[j];
            sum_first += db * db;
            sum_total += da * da;
        }
        let half_n = 2.0 * n_mc as f64;
        first_raw.push((variance - sum_first / half_n) / variance);
        total_raw.push(sum_total / half_n / variance);
    }
    Ok(SensitivityIndices {
        first_order: first_raw.iter().map(|v| v.max(0.0)).collect(),
        total_effect: total_raw.iter().map(|v| v.max(0.0)).collect(),
        first_order_raw: first_raw,
        total_effect_raw: total_raw,
        output_variance: variance,
        n_mc,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Result;

    struct Func<F>(usize, F, Vec<usize>);

    impl<F: Fn(&[f64]) -> f64 + Send + Sync> Surrogate for Func<F> {
        fn input_dim(&self) -> usize {
            self.0
        }
        fn subspace(&self) -> &[usize] {
            &self.2
        }
        fn predict_point(&self, x: &[f64]) -> Result<f64> {
            Ok((self.1)(x))
        }
    }

    fn func<F: Fn(&[f64]) -> f64 + Send + Sync>(k: usize, f: F) -> Func<F> {
        Func(k, f, (0..k).collect())
    }

    fn sym_uniform(k: usize) -> Vec<VariableDef> {
        (0..k).map(|i| VariableDef::uniform(format!("x{i}"), -1.0, 1.0)).collect()
    }

    #[test]
    fn correlation_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let yn: Vec<f64> = x.iter().map(|v| 5.0 - v).collect();
        assert!((correlation(&x, &y2).unwrap() - 1.0).abs() < 1e-12);
        assert!((correlation(&x, &yn).unwrap() + 1.0).abs() < 1e-12);
        // cov = 0.5, var = 1 for both -> 0.5
        assert!((correlation(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MopError::DegenerateResponse(_))
        ));
    }

    #[test]
    fn additive_model_has_no_interaction() {
        let m = func(2, |x: &[f64]| x[0] + x[1]);
        let s = sobol_indices(&m, &sym_uniform(2), 20_000, 5, None).unwrap();
        for i in 0..2 {
            assert!((s.total_effect[i] - s.first_order[i]).abs() <= 0.02);
            assert!((s.total_effect[i] - 0.5).abs() < 0.03);
        }
    }

    #[test]
    fn product_model_is_all_interaction() {
        let m = func(2, |x: &[f64]| x[0] * x[1]);
        let s = sobol_indices(&m, &sym_uniform(2), 20_000, 8, None).unwrap();
        for i in 0..2 {
            assert!(s.first_order[i] < 0.05, "{:?}", s.first_order);
            assert!((s.total_effect[i] - 1.0).abs() < 0.05, "{:?}", s.total_effect);
        }
    }

    #[test]
    fn unused_input_has_zero_index() {
        let m = func(3, |x: &[f64]| x[0].sin() + 2.0 * x[2]);
        let s = sobol_indices(&m, &sym_uniform(3), 5_000, 1, None).unwrap();
        assert!(s.first_order[1] <= s.tolerance());
        assert!(s.total_effect[1] <= s.tolerance());
    }

    #[test]
    fn refuses_correlated_inputs() {
        let m = func(2, |x: &[f64]| x[0]);
        let c = CorrelationSpec::pairwise(2, 0, 1, 0.5).unwrap();
        assert!(matches!(
            sobol_indices(&m, &sym_uniform(2), 2000, 1, Some(&c)),
            Err(MopError::Unsupported(_))
        ));
        assert!(sobol_indices(&m, &sym_uniform(2), 2000, 1, Some(&CorrelationSpec::identity(2))).is_ok());
    }

    #[test]
    fn refuses_constant_model_and_small_n() {
        let m = func(1, |_: &[f64]| 3.0);
        assert!(matches!(
            sobol_indices(&m, &sym_uniform(1), 2000, 1, None),
            Err(MopError::DegenerateResponse(_))
        ));
        assert!(sobol_indices(&m, &sym_uniform(1), 10, 1, None).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let m = func(2, |x: &[f64]| x[0] * x[0] + x[1]);
        let a = sobol_indices(&m, &sym_uniform(2), 2000, 3, None).unwrap();
        let b = sobol_indices(&m, &sym_uniform(2), 2000, 3, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_are_distinct() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
