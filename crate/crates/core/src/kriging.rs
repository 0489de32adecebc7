//! Ordinary Kriging: constant trend plus a Gaussian-correlated residual.
//!
//! `Ψ_ij = exp(−θ‖x_i − x_j‖²)` on scaled coordinates with a single isotropic
//! `θ`; the trend is the generalized least-squares constant
//! `μ̂ = 1ᵀΨ⁻¹y / 1ᵀΨ⁻¹1` and predictions are `μ̂ + ψ(x)ᵀΨ⁻¹(y − 1μ̂)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{MopError, Result};
use crate::par;
use crate::quality::{cross_validate, make_folds, FoldAssignment, Fitter};
use crate::regression::check_subspace;
use crate::sampling::SampleSet;
use crate::stats;
use crate::surrogate::{dimension_mismatch, InputScaling, Surrogate};

pub const THETA_GRID_POINTS: usize = 20;
pub const THETA_GRID_RANGE: (f64, f64) = (1e-3, 1e3);
/// First nugget tried by [`NuggetChoice::Auto`].
pub const NUGGET_START: f64 = 1e-10;
/// Largest nugget [`NuggetChoice::Auto`] escalates to.
pub const NUGGET_MAX: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaChoice {
    Fixed(f64),
    /// Maximize q-fold CoP over the logarithmic θ grid.
    Auto { folds: usize, seed: u64 },
}

/// Diagonal augmentation of the correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuggetChoice {
    /// Start at [`NUGGET_START`] and raise tenfold up to [`NUGGET_MAX`] until
    /// the factorization succeeds.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingModel {
    pub subspace: Vec<usize>,
    pub input_dim: usize,
    pub input_scaling: InputScaling,
    /// Scaled support coordinates, row-major.
    pub support_inputs: Vec<f64>,
    pub theta: f64,
    pub mu_hat: f64,
    pub weights: Vec<f64>,
    pub nugget: f64,
    /// Lower Cholesky factor of `Ψ + nugget·I`, row-major.
    pub gram_factor: Vec<f64>,
}

impl KrigingModel {
    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        let k = self.subspace.len();
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(MopError::param("theta must be positive and finite"));
        }
        if !(self.nugget >= 0.0) {
            return Err(MopError::param("nugget must be non-negative"));
        }
        if self.support_inputs.len() != n * k
            || self.gram_factor.len() != n * n
            || self.input_scaling.center.len() != k
            || self.subspace.iter().any(|&j| j >= self.input_dim)
        {
            return Err(MopError::param("inconsistent Kriging model dimensions"));
        }
        Ok(())
    }

    pub fn n_supports(&self) -> usize {
        self.weights.len()
    }

    /// Correlation vector ψ(x) at scaled coordinates.
    fn correlations(&self, z: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let k = z.len();
        let z = z.to_vec();
        (0..self.n_supports()).map(move |i| {
            let s = &self.support_inputs[i * k..(i + 1) * k];
            let d2: f64 = s.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
            (-self.theta * d2).exp()
        })
    }
}

impl Surrogate for KrigingModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn subspace(&self) -> &[usize] {
        &self.subspace
    }

    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(dimension_mismatch(self.input_dim, x.len()));
        }
        let mut z = vec![0.0; self.subspace.len()];
        self.input_scaling.apply(x, &self.subspace, &mut z);
        let r: f64 = self
            .correlations(&z)
            .zip(&self.weights)
            .map(|(psi, w)| psi * w)
            .sum();
        Ok(self.mu_hat + r)
    }
}

/// Ordinary Kriging with a fixed θ.
#[derive(Debug, Clone)]
pub struct KrigingFitter {
    pub subspace: Vec<usize>,
    pub theta: f64,
    pub nugget: NuggetChoice,
}

impl Fitter for KrigingFitter {
    type Model = KrigingModel;

    fn fit(&self, inputs: &DMatrix<f64>, y: &[f64]) -> Result<KrigingModel> {
        build_model(inputs, y, &self.subspace, self.theta, self.nugget)
    }
}

fn factorize(
    scaled: &[f64],
    n: usize,
    k: usize,
    theta: f64,
    nugget: NuggetChoice,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut psi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        psi[(i, i)] = 1.0;
        let a = &scaled[i * k..(i + 1) * k];
        for j in 0..i {
            let b = &scaled[j * k..(j + 1) * k];
            let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
            let c = (-theta * d2).exp();
            psi[(i, j)] = c;
            psi[(j, i)] = c;
        }
    }
    let attempt = |nug: f64| {
        let mut m = psi.clone();
        for i in 0..n {
            m[(i, i)] += nug;
        }
        m.cholesky()
    };
    match nugget {
        NuggetChoice::Fixed(nug) => attempt(nug).map(|c| (c, nug)).ok_or_else(|| {
            MopError::numerical(format!(
                "correlation matrix not positive definite (theta = {theta:e}, nugget = {nug:e})"
            ))
        }),
        NuggetChoice::Auto => {
            let mut nug = NUGGET_START;
            loop {
                if let Some(c) = attempt(nug) {
                    return Ok((c, nug));
                }
                if nug >= NUGGET_MAX {
                    return Err(MopError::numerical(format!(
                        "correlation matrix singular even with nugget {NUGGET_MAX:e} (theta = {theta:e})"
                    )));
                }
                let next = (nug * 10.0).min(NUGGET_MAX);
                log::warn!("kriging: factorization failed with nugget {nug:e}, retrying with {next:e}");
                nug = next;
            }
        }
    }
}

fn build_model(
    inputs: &DMatrix<f64>,
    y: &[f64],
    subspace: &[usize],
    theta: f64,
    nugget: NuggetChoice,
) -> Result<KrigingModel> {
    check_subspace(subspace, inputs.ncols())?;
    let n = inputs.nrows();
    if n < 2 {
        return Err(MopError::param("Kriging requires at least 2 support points"));
    }
    if y.len() != n {
        return Err(MopError::param("response length differs from sample count"));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(MopError::param(format!("theta must be positive, got {theta}")));
    }
    if let NuggetChoice::Fixed(v) = nugget {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(MopError::param(format!("nugget must be non-negative, got {v}")));
        }
    }
    let k = subspace.len();
    let input_scaling = InputScaling::from_data(inputs, subspace);
    let scaled = input_scaling.apply_rows(inputs, subspace);
    if nugget == NuggetChoice::Fixed(0.0) {
        for i in 0..n {
            for j in 0..i {
                if scaled[i * k..(i + 1) * k] == scaled[j * k..(j + 1) * k] {
                    return Err(MopError::param(format!(
                        "support points {j} and {i} coincide; a positive nugget is required"
                    )));
                }
            }
        }
    }
    let (chol, nug) = factorize(&scaled, n, k, theta, nugget)?;
    let ones = DVector::from_element(n, 1.0);
    let yv = DVector::from_column_slice(y);
    let psi_inv_one = chol.solve(&ones);
    let psi_inv_y = chol.solve(&yv);
    let denom = ones.dot(&psi_inv_one);
    let mu_hat = if denom.abs() > 0.0 {
        ones.dot(&psi_inv_y) / denom
    } else {
        stats::mean(y)
    };
    let weights = chol.solve(&(yv - DVector::from_element(n, mu_hat)));
    if !mu_hat.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(MopError::numerical(format!(
            "Kriging system produced non-finite weights (theta = {theta:e})"
        )));
    }
    let l = chol.l();
    let mut gram_factor = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            gram_factor.push(l[(i, j)]);
        }
    }
    Ok(KrigingModel {
        subspace: subspace.to_vec(),
        input_dim: inputs.ncols(),
        input_scaling,
        support_inputs: scaled,
        theta,
        mu_hat,
        weights: weights.iter().cloned().collect(),
        nugget: nug,
        gram_factor,
    })
}

pub fn theta_grid() -> Vec<f64> {
    let (lo, hi) = THETA_GRID_RANGE;
    let steps = THETA_GRID_POINTS - 1;
    (0..THETA_GRID_POINTS)
        .map(|i| lo * (hi / lo).powf(i as f64 / steps as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSearch {
    /// `(θ, CoP)`; θ values whose factorization failed are omitted.
    pub grid: Vec<(f64, f64)>,
    pub best_theta: f64,
    pub best_cop: f64,
}

/// Cross-validated CoP over [`theta_grid`]; ties go to the smaller θ.
pub fn search_theta(
    inputs: &DMatrix<f64>,
    y: &[f64],
    subspace: &[usize],
    nugget: NuggetChoice,
    folds: &FoldAssignment,
) -> Result<ThetaSearch> {
    let grid = theta_grid();
    let results = par::map_slice(&grid, |&theta| {
        let fitter = KrigingFitter {
            subspace: subspace.to_vec(),
            theta,
            nugget,
        };
        cross_validate(&fitter, inputs, y, folds).map(|cv| cv.cop)
    });
    let mut scored = Vec::new();
    let mut last_err = None;
    for (theta, r) in grid.iter().zip(results) {
        match r {
            Ok(c) if c.is_finite() => scored.push((*theta, c)),
            Ok(_) => {}
            Err(e @ MopError::DegenerateResponse(_)) | Err(e @ MopError::Parameter(_)) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    let Some(&(mut best_theta, mut best_cop)) = scored.first() else {
        return Err(last_err.unwrap_or_else(|| MopError::numerical("no admissible theta")));
    };
    for &(t, c) in &scored[1..] {
        if c > best_cop + 1e-12 {
            best_theta = t;
            best_cop = c;
        }
    }
    Ok(ThetaSearch {
        grid: scored,
        best_theta,
        best_cop,
    })
}

/// Fits ordinary Kriging to `response` over `subspace`.
pub fn kriging_fit(
    samples: &SampleSet,
    response: &str,
    subspace: &[usize],
    theta: ThetaChoice,
    nugget: NuggetChoice,
) -> Result<KrigingModel> {
    let y = samples.response(response)?;
    let theta = match theta {
        ThetaChoice::Fixed(t) => t,
        ThetaChoice::Auto { folds, seed } => {
            if y.len() < 2 {
                return Err(MopError::param("Kriging requires at least 2 support points"));
            }
            let f = make_folds(y.len(), folds, seed)?;
            search_theta(samples.inputs(), y, subspace, nugget, &f)?.best_theta
        }
    };
    build_model(samples.inputs(), y, subspace, theta, nugget)
}

pub fn kriging_predict(model: &KrigingModel, point: &[f64]) -> Result<f64> {
    model.predict_point(point)
}
