//! Input-space designs: Monte Carlo, Latin Hypercube with Iman–Conover
//! correlation control, and full-factorial grids.
//!
//! All random designs use [`ChaCha8Rng`] seeded with `seed_from_u64`, so a
//! given seed produces the same design on every platform.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{MopError, Result};
use crate::stats;

/// Default cap on the number of full-factorial rows.
pub const DEFAULT_FACTORIAL_BUDGET: usize = 1_000_000;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Marginal distribution of one input variable, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Distribution {
    Uniform {
        lower: f64,
        upper: f64,
    },
    Normal {
        mean: f64,
        std_dev: f64,
    },
    TruncatedNormal {
        mean: f64,
        std_dev: f64,
        lower: f64,
        upper: f64,
    },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(MopError::param(format!("{what} must be finite")))
            }
        };
        match *self {
            Distribution::Uniform { lower, upper } => {
                finite(lower, "lower bound")?;
                finite(upper, "upper bound")?;
                if lower >= upper {
                    return Err(MopError::param(format!(
                        "uniform requires lower < upper, got [{lower}, {upper}]"
                    )));
                }
            }
            Distribution::Normal { mean, std_dev } => {
                finite(mean, "mean")?;
                if !(std_dev > 0.0 && std_dev.is_finite()) {
                    return Err(MopError::param(format!(
                        "normal requires std_dev > 0, got {std_dev}"
                    )));
                }
            }
            Distribution::TruncatedNormal {
                mean,
                std_dev,
                lower,
                upper,
            } => {
                finite(mean, "mean")?;
                if !(std_dev > 0.0 && std_dev.is_finite()) {
                    return Err(MopError::param(format!(
                        "truncated normal requires std_dev > 0, got {std_dev}"
                    )));
                }
                if !(lower < upper) {
                    return Err(MopError::param(format!(
                        "truncated normal requires lower < upper, got [{lower}, {upper}]"
                    )));
                }
                let (pa, pb) = truncated_probabilities(mean, std_dev, lower, upper);
                if !(pb > pa) {
                    return Err(MopError::param(
                        "truncated normal has no probability mass inside its bounds",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Quantile function. `p` must lie in the open interval (0, 1).
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => lower + p * (upper - lower),
            Distribution::Normal { mean, std_dev } => mean + std_dev * std_normal().inverse_cdf(p),
            Distribution::TruncatedNormal {
                mean,
                std_dev,
                lower,
                upper,
            } => {
                let (pa, pb) = truncated_probabilities(mean, std_dev, lower, upper);
                let z = std_normal().inverse_cdf(pa + p * (pb - pa));
                (mean + std_dev * z).clamp(lower, upper)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Distribution::Normal { mean, std_dev } => std_normal().cdf((x - mean) / std_dev),
            Distribution::TruncatedNormal {
                mean,
                std_dev,
                lower,
                upper,
            } => {
                if x <= lower {
                    return 0.0;
                }
                if x >= upper {
                    return 1.0;
                }
                let (pa, pb) = truncated_probabilities(mean, std_dev, lower, upper);
                (std_normal().cdf((x - mean) / std_dev) - pa) / (pb - pa)
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Distribution::Uniform { lower, upper }
            | Distribution::TruncatedNormal { lower, upper, .. } => x >= lower && x <= upper,
            Distribution::Normal { .. } => x.is_finite(),
        }
    }

    pub fn median(&self) -> f64 {
        self.inverse_cdf(0.5)
    }

    /// Finite support bounds, if the distribution has them.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Distribution::Uniform { lower, upper }
            | Distribution::TruncatedNormal { lower, upper, .. } => Some((lower, upper)),
            Distribution::Normal { .. } => None,
        }
    }
}

fn truncated_probabilities(mean: f64, std_dev: f64, lower: f64, upper: f64) -> (f64, f64) {
    let n = std_normal();
    (n.cdf((lower - mean) / std_dev), n.cdf((upper - mean) / std_dev))
}

/// One named input variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDef {
    pub name: String,
    pub distribution: Distribution,
}

impl VariableDef {
    pub fn new(name: impl Into<String>, distribution: Distribution) -> Self {
        Self {
            name: name.into(),
            distribution,
        }
    }

    pub fn uniform(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self::new(name, Distribution::Uniform { lower, upper })
    }

    pub fn normal(name: impl Into<String>, mean: f64, std_dev: f64) -> Self {
        Self::new(name, Distribution::Normal { mean, std_dev })
    }

    pub fn truncated_normal(
        name: impl Into<String>,
        mean: f64,
        std_dev: f64,
        lower: f64,
        upper: f64,
    ) -> Self {
        Self::new(
            name,
            Distribution::TruncatedNormal {
                mean,
                std_dev,
                lower,
                upper,
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(MopError::param("variable name must not be empty"));
        }
        self.distribution
            .validate()
            .map_err(|e| MopError::param(format!("variable '{}': {e}", self.name)))
    }
}

/// Target matrix of pairwise linear correlation coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CorrelationSpec {
    matrix: DMatrix<f64>,
}

impl CorrelationSpec {
    /// Validates unit diagonal, symmetry, range and positive semi-definiteness.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let m = matrix.nrows();
        if m == 0 || matrix.ncols() != m {
            return Err(MopError::param("correlation matrix must be square and non-empty"));
        }
        for i in 0..m {
            if (matrix[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(MopError::param(format!(
                    "correlation matrix diagonal entry {i} is {} (must be 1)",
                    matrix[(i, i)]
                )));
            }
            for j in 0..m {
                let v = matrix[(i, j)];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(MopError::param(format!(
                        "correlation entry ({i},{j}) = {v} outside [-1, 1]"
                    )));
                }
                if (v - matrix[(j, i)]).abs() > 1e-12 {
                    return Err(MopError::param(format!(
                        "correlation matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let min_eig = SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(MopError::param(format!(
                "target correlation matrix is not positive semi-definite (smallest eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: DMatrix::identity(m, m),
        }
    }

    /// Identity except for one symmetric pair.
    pub fn pairwise(m: usize, i: usize, j: usize, rho: f64) -> Result<Self> {
        if i >= m || j >= m || i == j {
            return Err(MopError::param("pairwise correlation needs two distinct indices < m"));
        }
        let mut c = DMatrix::identity(m, m);
        c[(i, j)] = rho;
        c[(j, i)] = rho;
        Self::new(c)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        let m = self.dim();
        (0..m).all(|i| (0..m).all(|j| i == j || self.matrix[(i, j)] == 0.0))
    }

    /// Any `F` with `F Fᵀ = C`; Cholesky when definite, eigen-based otherwise.
    fn factor(&self) -> DMatrix<f64> {
        if let Some(ch) = self.matrix.clone().cholesky() {
            return ch.l();
        }
        let eig = SymmetricEigen::new(self.matrix.clone());
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
    }
}

impl TryFrom<Vec<Vec<f64>>> for CorrelationSpec {
    type Error = MopError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(MopError::param("correlation matrix rows must all have length m"));
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }
}

impl From<CorrelationSpec> for Vec<Vec<f64>> {
    fn from(c: CorrelationSpec) -> Self {
        c.matrix.row_iter().map(|r| r.iter().cloned().collect()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingScheme {
    Mcs,
    Lhs,
    FullFactorial,
    /// Data imported without a sidecar describing how it was generated.
    External,
}

/// N×m input design plus named response vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    inputs: DMatrix<f64>,
    responses: BTreeMap<String, Vec<f64>>,
    variables: Vec<VariableDef>,
    seed: u64,
    scheme: SamplingScheme,
    correlation: Option<CorrelationSpec>,
}

impl SampleSet {
    /// Builds a sample set, checking shapes and that every value lies in the
    /// support of its variable.
    pub fn new(
        variables: Vec<VariableDef>,
        inputs: DMatrix<f64>,
        scheme: SamplingScheme,
        seed: u64,
    ) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(MopError::param("sample set needs at least one row"));
        }
        if inputs.ncols() != variables.len() {
            return Err(MopError::param(format!(
                "input matrix has {} columns but {} variables are defined",
                inputs.ncols(),
                variables.len()
            )));
        }
        for (j, v) in variables.iter().enumerate() {
            v.validate()?;
            for i in 0..inputs.nrows() {
                let x = inputs[(i, j)];
                if !v.distribution.contains(x) {
                    return Err(MopError::param(format!(
                        "row {i}: value {x} of '{}' lies outside its distribution support",
                        v.name
                    )));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for v in &variables {
            if !seen.insert(v.name.as_str()) {
                return Err(MopError::param(format!("duplicate variable name '{}'", v.name)));
            }
        }
        Ok(Self {
            inputs,
            responses: BTreeMap::new(),
            variables,
            seed,
            scheme,
            correlation: None,
        })
    }

    /// Attaches (or replaces) a response vector.
    pub fn with_response(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.len() != self.len() {
            return Err(MopError::param(format!(
                "response '{name}' has {} values, expected {}",
                values.len(),
                self.len()
            )));
        }
        if self.variables.iter().any(|v| v.name == name) {
            return Err(MopError::param(format!(
                "response name '{name}' collides with an input variable"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MopError::param(format!("response '{name}' contains non-finite values")));
        }
        self.responses.insert(name, values);
        Ok(self)
    }

    pub(crate) fn with_correlation(mut self, c: Option<CorrelationSpec>) -> Self {
        self.correlation = c;
        self
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_vars(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn variables(&self) -> &[VariableDef] {
        &self.variables
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    /// Target correlation the design was generated with, if any.
    pub fn correlation(&self) -> Option<&CorrelationSpec> {
        self.correlation.as_ref()
    }

    pub fn responses(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.responses
    }

    pub fn response_names(&self) -> Vec<String> {
        self.responses.keys().cloned().collect()
    }

    pub fn response(&self, name: &str) -> Result<&[f64]> {
        self.responses
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| MopError::param(format!("unknown response '{name}'")))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().cloned().collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.inputs.column(j).iter().cloned().collect()
    }

    /// Empirical Spearman rank-correlation matrix of the inputs.
    pub fn rank_correlation(&self) -> DMatrix<f64> {
        self.correlation_matrix(stats::spearman)
    }

    /// Empirical Pearson correlation matrix of the inputs.
    pub fn linear_correlation(&self) -> DMatrix<f64> {
        self.correlation_matrix(stats::pearson)
    }

    fn correlation_matrix(&self, f: fn(&[f64], &[f64]) -> Option<f64>) -> DMatrix<f64> {
        column_correlation(&self.inputs, f)
    }

}

fn validate_vars(vars: &[VariableDef]) -> Result<()> {
    if vars.is_empty() {
        return Err(MopError::param("at least one variable is required"));
    }
    vars.iter().try_for_each(VariableDef::validate)
}

/// Uniform draw from the open interval (0, 1).
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Plain Monte Carlo: independent draws from every marginal.
pub fn sample_mcs(vars: &[VariableDef], n: usize, seed: u64) -> Result<SampleSet> {
    validate_vars(vars)?;
    if n == 0 {
        return Err(MopError::param("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = vars.len();
    let mut inputs = DMatrix::zeros(n, m);
    for i in 0..n {
        for (j, v) in vars.iter().enumerate() {
            inputs[(i, j)] = v.distribution.inverse_cdf(open_unit(&mut rng));
        }
    }
    SampleSet::new(vars.to_vec(), inputs, SamplingScheme::Mcs, seed)
}

/// Latin Hypercube sample with stratum-median placement, followed by
/// Iman–Conover reordering toward `target` (identity when `None`).
pub fn sample_lhs(
    vars: &[VariableDef],
    n: usize,
    seed: u64,
    target: Option<&CorrelationSpec>,
) -> Result<SampleSet> {
    validate_vars(vars)?;
    if n < 2 {
        return Err(MopError::param("LHS requires n >= 2"));
    }
    let m = vars.len();
    if let Some(t) = target {
        if t.dim() != m {
            return Err(MopError::param(format!(
                "target correlation is {}x{} but there are {m} variables",
                t.dim(),
                t.dim()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = DMatrix::zeros(n, m);
    let mut strata: Vec<usize> = (0..n).collect();
    for (j, v) in vars.iter().enumerate() {
        strata.shuffle(&mut rng);
        for (i, &k) in strata.iter().enumerate() {
            inputs[(i, j)] = v.distribution.inverse_cdf((k as f64 + 0.5) / n as f64);
        }
    }
    let set = SampleSet::new(vars.to_vec(), inputs, SamplingScheme::Lhs, seed)?;
    if m < 2 {
        return Ok(set.with_correlation(target.cloned()));
    }
    let identity = CorrelationSpec::identity(m);
    let spec = target.unwrap_or(&identity);
    if n <= m {
        // Too few rows to estimate a correlation structure; keep the raw design.
        if spec.is_identity() {
            return Ok(set);
        }
        return Err(MopError::numerical(format!(
            "correlation control needs n > m (n = {n}, m = {m})"
        )));
    }
    let out = impose_correlation(&set, spec)?;
    Ok(out.with_correlation(target.cloned()))
}

/// Maximum number of Iman–Conover passes.
pub const IMAN_CONOVER_MAX_PASSES: usize = 20;

/// Iman–Conover rank reordering: each column keeps its multiset of values but
/// is reordered so that the rank structure follows the target correlation.
///
/// Van der Waerden scores arranged by the current column ranks form the
/// reference matrix `R`; with `E = corr(R) = QQᵀ` and `C = PPᵀ` the reordering
/// follows the ranks of `R (P Q⁻¹)ᵀ`. The pass is repeated on its own output
/// (at most [`IMAN_CONOVER_MAX_PASSES`] times) and the ordering whose Spearman
/// matrix is closest to the target is kept.
pub fn impose_correlation(samples: &SampleSet, target: &CorrelationSpec) -> Result<SampleSet> {
    let n = samples.len();
    let m = samples.n_vars();
    if target.dim() != m {
        return Err(MopError::param(format!(
            "target correlation is {0}x{0} but sample set has {m} variables",
            target.dim()
        )));
    }
    if n <= m {
        return Err(MopError::numerical(format!(
            "empirical rank correlation is singular: n = {n} rows cannot support {m} variables (need n > m)"
        )));
    }
    let normal = std_normal();
    let scores: Vec<f64> = (1..=n)
        .map(|k| normal.inverse_cdf(k as f64 / (n as f64 + 1.0)))
        .collect();
    let factor = target.factor();
    let sorted: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut c = samples.column(j);
            c.sort_by(f64::total_cmp);
            c
        })
        .collect();

    let mut current = samples.inputs.clone();
    let mut best = current.clone();
    let mut best_err = rank_error(&current, target);
    let mut stale = 0;
    for _ in 0..IMAN_CONOVER_MAX_PASSES {
        current = iman_conover_pass(&current, &scores, &factor, &sorted)?;
        let err = rank_error(&current, target);
        if err < best_err {
            best_err = err;
            best = current.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= 2 {
                break;
            }
        }
    }
    if best_err > SWAP_TARGET_ERROR {
        best = refine_by_swaps(&best, target, &sorted, samples.seed);
    }
    let mut set = samples.clone();
    set.inputs = best;
    set.correlation = Some(target.clone());
    // Responses no longer correspond to the reordered rows.
    set.responses.clear();
    Ok(set)
}

fn iman_conover_pass(
    inputs: &DMatrix<f64>,
    scores: &[f64],
    target_factor: &DMatrix<f64>,
    sorted: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    let (n, m) = inputs.shape();
    let mut reference = DMatrix::zeros(n, m);
    for j in 0..m {
        let col: Vec<f64> = inputs.column(j).iter().cloned().collect();
        for (pos, &i) in argsort(&col).iter().enumerate() {
            reference[(i, j)] = scores[pos];
        }
    }
    let empirical = column_correlation(&reference, stats::pearson);
    let q = empirical
        .cholesky()
        .ok_or_else(|| {
            MopError::numerical(format!(
                "empirical rank-correlation matrix of the design is singular (n = {n}, m = {m}); \
                 columns may be perfectly rank-dependent"
            ))
        })?
        .l();
    let q_inv = q
        .try_inverse()
        .ok_or_else(|| MopError::numerical("Cholesky factor of empirical correlation not invertible"))?;
    let transform = target_factor * q_inv;
    let adjusted = &reference * transform.transpose();

    let mut out = DMatrix::zeros(n, m);
    for j in 0..m {
        let target_col: Vec<f64> = adjusted.column(j).iter().cloned().collect();
        for (pos, &i) in argsort(&target_col).iter().enumerate() {
            out[(i, j)] = sorted[j][pos];
        }
    }
    Ok(out)
}

/// Swap refinement stops once every Spearman entry is this close to target.
const SWAP_TARGET_ERROR: f64 = 0.01;
const SWAP_MAX_SWEEPS: usize = 50;

/// Greedy pairwise swaps of values within a column, accepted whenever they
/// reduce `Σ (ρ_ij − c_ij)²` over the Spearman matrix. Works on the
/// within-column positions, so marginals are untouched.
fn refine_by_swaps(
    inputs: &DMatrix<f64>,
    target: &CorrelationSpec,
    sorted: &[Vec<f64>],
    seed: u64,
) -> DMatrix<f64> {
    let (n, m) = inputs.shape();
    let mut pos = vec![vec![0.0f64; n]; m];
    for (j, col_pos) in pos.iter_mut().enumerate() {
        let col: Vec<f64> = inputs.column(j).iter().cloned().collect();
        for (rank, &i) in argsort(&col).iter().enumerate() {
            col_pos[i] = rank as f64;
        }
    }
    let nf = n as f64;
    let mu = (nf - 1.0) / 2.0;
    let norm = nf * (nf * nf - 1.0) / 12.0;
    let c = target.matrix();
    let mut cross = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            cross[(a, b)] = (0..n).map(|k| pos[a][k] * pos[b][k]).sum();
        }
    }
    let rho = |s: f64| (s - nf * mu * mu) / norm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1c0f_fee5_u64);
    for _ in 0..SWAP_MAX_SWEEPS {
        let mut improved = false;
        for col in 0..m {
            for a in 0..n {
                let b = rng.random_range(0..n);
                if a == b {
                    continue;
                }
                let d = pos[col][b] - pos[col][a];
                let mut delta = 0.0;
                for j in (0..m).filter(|&j| j != col) {
                    let ds = d * (pos[j][a] - pos[j][b]);
                    let before = rho(cross[(col, j)]) - c[(col, j)];
                    let after = rho(cross[(col, j)] + ds) - c[(col, j)];
                    delta += after * after - before * before;
                }
                if delta < -1e-15 {
                    for j in (0..m).filter(|&j| j != col) {
                        let ds = d * (pos[j][a] - pos[j][b]);
                        cross[(col, j)] += ds;
                        cross[(j, col)] += ds;
                    }
                    pos[col].swap(a, b);
                    improved = true;
                }
            }
        }
        let worst = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .map(|(i, j)| (rho(cross[(i, j)]) - c[(i, j)]).abs())
            .fold(0.0f64, f64::max);
        if !improved || worst <= SWAP_TARGET_ERROR {
            break;
        }
    }
    DMatrix::from_fn(n, m, |i, j| sorted[j][pos[j][i] as usize])
}

fn column_correlation(x: &DMatrix<f64>, f: fn(&[f64], &[f64]) -> Option<f64>) -> DMatrix<f64> {
    let m = x.ncols();
    let cols: Vec<Vec<f64>> = (0..m).map(|j| x.column(j).iter().cloned().collect()).collect();
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0
        } else {
            f(&cols[i], &cols[j]).unwrap_or(0.0)
        }
    })
}

/// Largest absolute deviation of the Spearman matrix from the target.
fn rank_error(x: &DMatrix<f64>, target: &CorrelationSpec) -> f64 {
    let ranked = DMatrix::from_columns(
        &(0..x.ncols())
            .map(|j| {
                let col: Vec<f64> = x.column(j).iter().cloned().collect();
                nalgebra::DVector::from_vec(stats::ranks(&col))
            })
            .collect::<Vec<_>>(),
    );
    let r = column_correlation(&ranked, stats::pearson);
    (&r - target.matrix())
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn argsort(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    idx
}

/// Full-factorial grid with levels at the quantiles `(k - 0.5) / levels`,
/// capped at [`DEFAULT_FACTORIAL_BUDGET`] rows.
pub fn sample_full_factorial(vars: &[VariableDef], levels: usize) -> Result<SampleSet> {
    sample_full_factorial_with_budget(vars, levels, DEFAULT_FACTORIAL_BUDGET)
}

pub fn sample_full_factorial_with_budget(
    vars: &[VariableDef],
    levels: usize,
    budget: usize,
) -> Result<SampleSet> {
    validate_vars(vars)?;
    if levels < 2 {
        return Err(MopError::param("full factorial requires at least 2 levels"));
    }
    let m = vars.len();
    let rows = u32::try_from(m)
        .ok()
        .and_then(|e| levels.checked_pow(e))
        .filter(|&r| r <= budget)
        .ok_or_else(|| {
            let required = (levels as f64).powi(m as i32);
            MopError::param(format!(
                "full factorial with {levels}^{m} = {required:.0} rows exceeds the budget of {budget}"
            ))
        })?;
    let level_values: Vec<Vec<f64>> = vars
        .iter()
        .map(|v| {
            (0..levels)
                .map(|k| v.distribution.inverse_cdf((k as f64 + 0.5) / levels as f64))
                .collect()
        })
        .collect();
    let mut inputs = DMatrix::zeros(rows, m);
    for r in 0..rows {
        let mut rem = r;
        for j in (0..m).rev() {
            inputs[(r, j)] = level_values[j][rem % levels];
            rem /= levels;
        }
    }
    SampleSet::new(vars.to_vec(), inputs, SamplingScheme::FullFactorial, 0)
}
