//! Cross-validation and the Coefficient of Prognosis (CoP).
//!
//! `CoP = 1 − SS_E^pred / SS_T`, where the prediction errors come from
//! q-fold cross-validation and `SS_T` is taken once over the full response.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{MopError, Result};
use crate::par;
use crate::regression::{cod, cod_adjusted, total_sum_of_squares};
use crate::sampling::SampleSet;
use crate::surrogate::Surrogate;

pub const DEFAULT_FOLDS: usize = 10;

/// Balanced random assignment of `n` samples to `q` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub q: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Training (complement) and held-out indices of fold `f`, ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::with_capacity(self.n());
        let mut test = Vec::new();
        for (i, &a) in self.assignment.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.q];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Shuffles `0..n` and deals the samples round-robin into `q` folds.
pub fn make_folds(n: usize, q: usize, seed: u64) -> Result<FoldAssignment> {
    if q < 2 || q > n {
        return Err(MopError::param(format!(
            "fold count must satisfy 2 <= q <= n (q = {q}, n = {n})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % q;
    }
    Ok(FoldAssignment { q, assignment, seed })
}

/// A model-fitting procedure usable inside cross-validation.
pub trait Fitter: Sync {
    type Model: Surrogate;

    fn fit(&self, inputs: &DMatrix<f64>, y: &[f64]) -> Result<Self::Model>;

    /// Number of free coefficients, when the notion applies (for adjusted CoD).
    fn term_count(&self) -> Option<usize> {
        None
    }
}

/// Raw cross-validation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub cop: f64,
    pub ss_e_prediction: f64,
    pub ss_t: f64,
    /// Held-out prediction for every sample.
    pub predictions: Vec<f64>,
}

/// Runs q-fold cross-validation of `fitter` on raw data.
///
/// Folds are fitted independently (in parallel when enabled); the squared
/// errors are summed in sample order so the result does not depend on
/// scheduling.
pub fn cross_validate<F: Fitter>(
    fitter: &F,
    inputs: &DMatrix<f64>,
    y: &[f64],
    folds: &FoldAssignment,
) -> Result<CvOutcome> {
    if folds.n() != y.len() || inputs.nrows() != y.len() {
        return Err(MopError::param(format!(
            "fold assignment covers {} samples but data has {}",
            folds.n(),
            y.len()
        )));
    }
    let ss_t = total_sum_of_squares(y)?;
    let per_fold = par::try_map_indices(folds.q, |f| {
        let (train, test) = folds.split(f);
        let x_train = inputs.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let wrap = |e| MopError::Fold {
            fold: f,
            source: Box::new(e),
        };
        let model = fitter.fit(&x_train, &y_train).map_err(wrap)?;
        let preds = model.predict_rows(&inputs.select_rows(&test)).map_err(wrap)?;
        Ok::<_, MopError>((test, preds))
    })?;
    let mut predictions = vec![0.0; y.len()];
    for (test, preds) in per_fold {
        for (i, p) in test.into_iter().zip(preds) {
            predictions[i] = p;
        }
    }
    let ss_e_prediction: f64 = y
        .iter()
        .zip(&predictions)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(CvOutcome {
        cop: 1.0 - ss_e_prediction / ss_t,
        ss_e_prediction,
        ss_t,
        predictions,
    })
}

/// Quality measures of one model family on one data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub cop: f64,
    pub cod: Option<f64>,
    pub cod_adjusted: Option<f64>,
    pub ss_e_prediction: f64,
    pub ss_t: f64,
    pub per_variable_coi: Option<BTreeMap<String, f64>>,
    pub folds: FoldAssignment,
    /// Set when the CoP is negative.
    pub no_predictive_power: bool,
}

impl QualityReport {
    /// JSON with every number rounded to 12 significant digits.
    pub fn to_json(&self) -> Result<String> {
        to_json_rounded(self)
    }
}

/// Coefficient of Prognosis of `fitter` on a response of `samples`.
///
/// The report also carries the in-sample CoD of the model fitted on all
/// samples, and its adjusted form when the fitter has a coefficient count.
pub fn cop<F: Fitter>(
    fitter: &F,
    samples: &SampleSet,
    response: &str,
    folds: &FoldAssignment,
) -> Result<QualityReport> {
    let y = samples.response(response)?;
    let cv = cross_validate(fitter, samples.inputs(), y, folds)?;
    let full = fitter.fit(samples.inputs(), y)?;
    let fitted = full.predict_rows(samples.inputs())?;
    let r2 = cod(y, &fitted)?.r2;
    let adjusted = fitter
        .term_count()
        .filter(|&p| y.len() > p)
        .map(|p| cod_adjusted(r2, y.len(), p))
        .transpose()?;
    Ok(QualityReport {
        cop: cv.cop,
        cod: Some(r2),
        cod_adjusted: adjusted,
        ss_e_prediction: cv.ss_e_prediction,
        ss_t: cv.ss_t,
        per_variable_coi: None,
        folds: folds.clone(),
        no_predictive_power: cv.cop < 0.0,
    })
}

/// `1 − SS_E/SS_T` of `model` on held-out data.
pub fn explained_variation_on_testset<S: Surrogate + ?Sized>(
    model: &S,
    test: &SampleSet,
    response: &str,
) -> Result<f64> {
    explained_variation(model, test.inputs(), test.response(response)?)
}

pub fn explained_variation<S: Surrogate + ?Sized>(
    model: &S,
    inputs: &DMatrix<f64>,
    y: &[f64],
) -> Result<f64> {
    let ss_t = total_sum_of_squares(y)?;
    let preds = model.predict_rows(inputs)?;
    let ss_e: f64 = y.iter().zip(&preds).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_e / ss_t)
}

/// Rounds to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Serializes `value` as pretty JSON with numbers rounded to 12 significant
/// digits. Objects under a `"model"` key keep full precision so that
/// embedded surrogates still predict exactly.
pub fn to_json_rounded<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn round_value(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(f) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_significant(f, 12)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => {
            for (k, item) in map.iter_mut() {
                if k != "model" {
                    round_value(item);
                }
            }
        }
        _ => {}
    }
}
