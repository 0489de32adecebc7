//! Moving Least Squares approximation.
//!
//! At a point `x` the local polynomial minimizes the weighted squared error
//! with Gaussian weights `w(d) = exp(−d² / (α² D²))`, where `d` is the
//! distance to a support point in scaled [-1, 1] coordinates, `D` is the
//! influence radius and `α` is fixed at [`DEFAULT_ALPHA`].
//!
//! The local system is assembled in coordinates centred on `x`, so the
//! prediction is simply the constant coefficient; this is algebraically the
//! same as `pᵀ(x)(PᵀWP)⁻¹PᵀWy` but much better conditioned.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MopError, Result};
use crate::par;
use crate::quality::{cross_validate, FoldAssignment, Fitter};
use crate::regression::{check_subspace, PolynomialBasis};
use crate::sampling::SampleSet;
use crate::surrogate::{dimension_mismatch, InputScaling, Surrogate};

/// Weight shape constant.
pub const DEFAULT_ALPHA: f64 = 1.0 / 3.0;
/// Weights below this value are ignored.
pub const WEIGHT_CUTOFF: f64 = 1e-12;
/// Number of radii tried by the automatic search.
pub const RADIUS_GRID_POINTS: usize = 20;
/// Search interval as fractions of the scaled-domain diagonal `2√k`.
pub const RADIUS_GRID_RANGE: (f64, f64) = (0.1, 2.0);

const PIVOT_TOLERANCE: f64 = 1e-12;

/// Gaussian weight for squared distance `dist_sq`.
#[inline]
pub fn gaussian_weight(dist_sq: f64, radius: f64, alpha: f64) -> f64 {
    (-dist_sq / (alpha * alpha * radius * radius)).exp()
}

/// How an MLS prediction was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlsFallback {
    /// The requested basis was solvable.
    None,
    /// Local system singular; linear basis used instead.
    Linear,
    /// Linear system also singular; weighted mean of the supports.
    WeightedMean,
    /// Every weight underflowed; value of the nearest support.
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlsPrediction {
    pub value: f64,
    pub fallback: MlsFallback,
}

/// Stored support set plus the weighting parameters. Support coordinates are
/// scaled and stored row-major (`support_values.len()` rows of
/// `subspace.len()` columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlsModel {
    pub subspace: Vec<usize>,
    pub input_dim: usize,
    pub input_scaling: InputScaling,
    pub support_inputs: Vec<f64>,
    pub support_values: Vec<f64>,
    pub basis: PolynomialBasis,
    pub influence_radius: f64,
    pub alpha: f64,
}

/// Influence radius selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusChoice {
    Fixed(f64),
    /// Maximize the q-fold CoP over the logarithmic radius grid.
    Auto { folds: usize, seed: u64 },
}

/// CoP of every radius tried by the search, and the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSearch {
    pub grid: Vec<(f64, f64)>,
    pub best_radius: f64,
    pub best_cop: f64,
}

fn is_shift_invariant(basis: &PolynomialBasis) -> bool {
    let idx = basis.multi_indices();
    let has_linear = |v: usize| {
        idx.iter()
            .any(|m| m[v] == 1 && m.iter().filter(|&&e| e > 0).count() == 1)
    };
    idx.iter().all(|m| {
        let nz: Vec<usize> = (0..m.len()).filter(|&v| m[v] > 0).collect();
        let total: u8 = m.iter().sum();
        total <= 1 || nz.iter().all(|&v| has_linear(v))
    })
}

impl MlsModel {
    pub(crate) fn validate(&self) -> Result<()> {
        let k = self.subspace.len();
        if !(self.influence_radius > 0.0 && self.influence_radius.is_finite()) {
            return Err(MopError::param("influence radius must be positive and finite"));
        }
        if !(self.alpha > 0.0) {
            return Err(MopError::param("alpha must be positive"));
        }
        if self.basis.dim() != k || self.input_scaling.center.len() != k {
            return Err(MopError::param("inconsistent MLS subspace dimensions"));
        }
        if self.support_inputs.len() != self.support_values.len() * k {
            return Err(MopError::param("support matrix does not match support values"));
        }
        if self.support_values.len() < self.basis.len() {
            return Err(MopError::InsufficientData {
                required: self.basis.len(),
                available: self.support_values.len(),
                context: "MLS support count".into(),
            });
        }
        if !is_shift_invariant(&self.basis) {
            return Err(MopError::param(
                "MLS basis must contain the linear term of every variable it uses",
            ));
        }
        if self.subspace.iter().any(|&j| j >= self.input_dim) {
            return Err(MopError::param("subspace index out of range"));
        }
        Ok(())
    }

    pub fn n_supports(&self) -> usize {
        self.support_values.len()
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self {
            influence_radius: radius,
            ..self.clone()
        }
    }

    /// Prediction together with the fallback level that produced it.
    pub fn predict_detailed(&self, x: &[f64]) -> Result<MlsPrediction> {
        if x.len() != self.input_dim {
            return Err(dimension_mismatch(self.input_dim, x.len()));
        }
        let k = self.subspace.len();
        let mut z = vec![0.0; k];
        self.input_scaling.apply(x, &self.subspace, &mut z);
        Ok(self.predict_scaled(&z))
    }

    fn predict_scaled(&self, z: &[f64]) -> MlsPrediction {
        let k = z.len();
        let n = self.n_supports();
        let mut active: Vec<(usize, f64)> = Vec::with_capacity(n);
        let mut nearest = (0usize, f64::INFINITY);
        for i in 0..n {
            let s = &self.support_inputs[i * k..(i + 1) * k];
            let d2: f64 = s.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < nearest.1 {
                nearest = (i, d2);
            }
            let w = gaussian_weight(d2, self.influence_radius, self.alpha);
            if w >= WEIGHT_CUTOFF {
                active.push((i, w));
            }
        }
        if active.is_empty() {
            return MlsPrediction {
                value: self.support_values[nearest.0],
                fallback: MlsFallback::Nearest,
            };
        }
        if let Some(v) = self.local_solve(&self.basis, z, &active) {
            return MlsPrediction {
                value: v,
                fallback: MlsFallback::None,
            };
        }
        if self.basis.degree() > 1 || self.basis.len() > k + 1 {
            let linear = PolynomialBasis::linear(k);
            if let Some(v) = self.local_solve(&linear, z, &active) {
                return MlsPrediction {
                    value: v,
                    fallback: MlsFallback::Linear,
                };
            }
        }
        let (num, den) = active
            .iter()
            .fold((0.0, 0.0), |(a, b), &(i, w)| (a + w * self.support_values[i], b + w));
        MlsPrediction {
            value: num / den,
            fallback: MlsFallback::WeightedMean,
        }
    }

    /// Weighted least squares in coordinates centred on `z`; returns the
    /// constant coefficient, or `None` when the local system is singular.
    fn local_solve(&self, basis: &PolynomialBasis, z: &[f64], active: &[(usize, f64)]) -> Option<f64> {
        let k = z.len();
        let p = basis.len();
        let m = active.len();
        if m < p {
            return None;
        }
        let mut a = DMatrix::<f64>::zeros(m, p);
        let mut b = DVector::<f64>::zeros(m);
        let mut u = vec![0.0; k];
        let mut row = vec![0.0; p];
        for (r, &(i, w)) in active.iter().enumerate() {
            let s = &self.support_inputs[i * k..(i + 1) * k];
            for c in 0..k {
                u[c] = s[c] - z[c];
            }
            basis.eval_into(&u, &mut row);
            let sw = w.sqrt();
            for c in 0..p {
                a[(r, c)] = sw * row[c];
            }
            b[r] = sw * self.support_values[i];
        }
        // Unit column norms, so the pivot test is scale free.
        let scale: Vec<f64> = (0..p).map(|c| a.column(c).norm()).collect();
        if scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return None;
        }
        for (c, s) in scale.iter().enumerate() {
            a.column_mut(c).unscale_mut(*s);
        }
        let qr = a.qr();
        let r = qr.r();
        if (0..p).any(|i| r[(i, i)] * r[(i, i)] < PIVOT_TOLERANCE) {
            return None;
        }
        qr.q_tr_mul(&mut b);
        let coef = r.solve_upper_triangular(&b.rows(0, p).into_owned())?;
        let value = coef[0] / scale[0];
        value.is_finite().then_some(value)
    }
}

impl Surrogate for MlsModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn subspace(&self) -> &[usize] {
        &self.subspace
    }

    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_detailed(x)?.value)
    }
}

/// MLS with a fixed influence radius.
#[derive(Debug, Clone)]
pub struct MlsFitter {
    pub subspace: Vec<usize>,
    pub basis: PolynomialBasis,
    pub radius: f64,
    pub alpha: f64,
}

impl MlsFitter {
    pub fn new(subspace: Vec<usize>, basis: PolynomialBasis, radius: f64) -> Self {
        Self {
            subspace,
            basis,
            radius,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl Fitter for MlsFitter {
    type Model = MlsModel;

    fn fit(&self, inputs: &DMatrix<f64>, y: &[f64]) -> Result<MlsModel> {
        build_model(inputs, y, &self.subspace, &self.basis, self.radius, self.alpha)
    }
}

fn build_model(
    inputs: &DMatrix<f64>,
    y: &[f64],
    subspace: &[usize],
    basis: &PolynomialBasis,
    radius: f64,
    alpha: f64,
) -> Result<MlsModel> {
    check_subspace(subspace, inputs.ncols())?;
    if y.len() != inputs.nrows() {
        return Err(MopError::param("response length differs from sample count"));
    }
    if basis.dim() != subspace.len() {
        return Err(MopError::param(format!(
            "basis over {} variables used with a subspace of {}",
            basis.dim(),
            subspace.len()
        )));
    }
    let input_scaling = InputScaling::from_data(inputs, subspace);
    let model = MlsModel {
        subspace: subspace.to_vec(),
        input_dim: inputs.ncols(),
        support_inputs: input_scaling.apply_rows(inputs, subspace),
        input_scaling,
        support_values: y.to_vec(),
        basis: basis.clone(),
        influence_radius: radius,
        alpha,
    };
    model.validate()?;
    Ok(model)
}

/// The logarithmic radius grid for a `k`-dimensional subspace.
pub fn radius_grid(k: usize) -> Vec<f64> {
    let diag = 2.0 * (k.max(1) as f64).sqrt();
    let (lo, hi) = (RADIUS_GRID_RANGE.0 * diag, RADIUS_GRID_RANGE.1 * diag);
    let steps = RADIUS_GRID_POINTS - 1;
    (0..RADIUS_GRID_POINTS)
        .map(|i| lo * (hi / lo).powf(i as f64 / steps as f64))
        .collect()
}

/// Cross-validated CoP for every radius of [`radius_grid`]; ties go to the
/// larger radius.
pub fn search_radius(
    inputs: &DMatrix<f64>,
    y: &[f64],
    subspace: &[usize],
    basis: &PolynomialBasis,
    folds: &FoldAssignment,
) -> Result<RadiusSearch> {
    let grid = radius_grid(subspace.len());
    // Surface shape errors once instead of per fold.
    build_model(inputs, y, subspace, basis, grid[0], DEFAULT_ALPHA)?;
    let scores = par::try_map_slice(&grid, |&d| {
        let fitter = MlsFitter::new(subspace.to_vec(), basis.clone(), d);
        cross_validate(&fitter, inputs, y, folds).map(|cv| cv.cop)
    })?;
    let mut best = 0;
    for (i, &c) in scores.iter().enumerate() {
        if c >= scores[best] - 1e-12 {
            best = i;
        }
    }
    Ok(RadiusSearch {
        grid: grid.iter().cloned().zip(scores.iter().cloned()).collect(),
        best_radius: grid[best],
        best_cop: scores[best],
    })
}

/// Fits an MLS model of `response` over `subspace`.
pub fn mls_fit(
    samples: &SampleSet,
    response: &str,
    subspace: &[usize],
    basis: &PolynomialBasis,
    radius: RadiusChoice,
) -> Result<MlsModel> {
    let y = samples.response(response)?;
    let d = match radius {
        RadiusChoice::Fixed(d) => d,
        RadiusChoice::Auto { folds, seed } => {
            let f = crate::quality::make_folds(y.len(), folds, seed)?;
            search_radius(samples.inputs(), y, subspace, basis, &f)?.best_radius
        }
    };
    build_model(samples.inputs(), y, subspace, basis, d, DEFAULT_ALPHA)
}

/// Single-point prediction.
pub fn mls_predict(model: &MlsModel, point: &[f64]) -> Result<f64> {
    model.predict_point(point)
}
