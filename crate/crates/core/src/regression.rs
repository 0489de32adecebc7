//! Global polynomial least-squares approximation with the Coefficient of
//! Determination (CoD), its adjusted form and the Coefficient of Importance
//! (CoI).
//!
//! Inputs are mapped onto [-1, 1] per variable before the basis is evaluated,
//! and the least-squares problem is solved through an SVD of the design
//! matrix rather than the normal equations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MopError, Result};
use crate::quality::Fitter;
use crate::sampling::SampleSet;
use crate::stats;
use crate::surrogate::{dimension_mismatch, InputScaling, Surrogate};

/// Singular values below this fraction of the largest flag rank deficiency.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// One basis monomial, compiled from its multi-index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Term {
    Constant,
    Linear(usize),
    Square(usize),
    Cross(usize, usize),
}

impl Term {
    #[inline]
    fn eval(self, z: &[f64]) -> f64 {
        match self {
            Term::Constant => 1.0,
            Term::Linear(i) => z[i],
            Term::Square(i) => z[i] * z[i],
            Term::Cross(i, j) => z[i] * z[j],
        }
    }

    fn involves(self, v: usize) -> bool {
        match self {
            Term::Constant => false,
            Term::Linear(i) | Term::Square(i) => i == v,
            Term::Cross(i, j) => i == v || j == v,
        }
    }

    fn from_multi_index(idx: &[u8]) -> Result<Self> {
        let nz: Vec<(usize, u8)> = idx
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| (i, e))
            .collect();
        match nz.as_slice() {
            [] => Ok(Term::Constant),
            [(i, 1)] => Ok(Term::Linear(*i)),
            [(i, 2)] => Ok(Term::Square(*i)),
            [(i, 1), (j, 1)] => Ok(Term::Cross(*i, *j)),
            _ => Err(MopError::param(format!(
                "multi-index {idx:?} is not a constant, linear, square or pairwise cross term"
            ))),
        }
    }

    fn multi_index(self, k: usize) -> Vec<u8> {
        let mut idx = vec![0u8; k];
        match self {
            Term::Constant => {}
            Term::Linear(i) => idx[i] = 1,
            Term::Square(i) => idx[i] = 2,
            Term::Cross(i, j) => {
                idx[i] = 1;
                idx[j] = 1;
            }
        }
        idx
    }

    fn label(self, names: &[String]) -> String {
        match self {
            Term::Constant => "1".to_string(),
            Term::Linear(i) => names[i].clone(),
            Term::Square(i) => format!("{}^2", names[i]),
            Term::Cross(i, j) => format!("{}*{}", names[i], names[j]),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BasisRepr {
    dim: usize,
    degree: u8,
    include_interactions: bool,
    terms: Vec<Vec<u8>>,
}

/// Ordered list of monomials over `dim` (subspace) variables.
///
/// Terms are ordered constant, linear, squares, then pairwise interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisRepr", into = "BasisRepr")]
pub struct PolynomialBasis {
    dim: usize,
    degree: u8,
    include_interactions: bool,
    terms: Vec<Term>,
}

impl PolynomialBasis {
    pub fn constant(dim: usize) -> Self {
        Self {
            dim,
            degree: 1,
            include_interactions: false,
            terms: vec![Term::Constant],
        }
    }

    pub fn linear(dim: usize) -> Self {
        let mut terms = vec![Term::Constant];
        terms.extend((0..dim).map(Term::Linear));
        Self {
            dim,
            degree: 1,
            include_interactions: false,
            terms,
        }
    }

    pub fn quadratic(dim: usize, include_interactions: bool) -> Self {
        let mut terms = vec![Term::Constant];
        terms.extend((0..dim).map(Term::Linear));
        terms.extend((0..dim).map(Term::Square));
        if include_interactions {
            for i in 0..dim {
                for j in i + 1..dim {
                    terms.push(Term::Cross(i, j));
                }
            }
        }
        Self {
            dim,
            degree: 2,
            include_interactions,
            terms,
        }
    }

    /// Linear basis plus pairwise interactions, without squares.
    pub fn linear_with_interactions(dim: usize) -> Self {
        let mut b = Self::linear(dim);
        for i in 0..dim {
            for j in i + 1..dim {
                b.terms.push(Term::Cross(i, j));
            }
        }
        b.degree = 2;
        b.include_interactions = true;
        b
    }

    /// Number of terms a basis of this shape would have, without building it.
    pub fn term_count(dim: usize, degree: u8, include_interactions: bool) -> usize {
        let cross = if include_interactions { dim * dim.saturating_sub(1) / 2 } else { 0 };
        match degree {
            1 => 1 + dim + cross,
            _ => 1 + 2 * dim + cross,
        }
    }

    /// Basis with every term that involves variable `var` removed.
    pub fn without_variable(&self, var: usize) -> Self {
        Self {
            terms: self.terms.iter().cloned().filter(|t| !t.involves(var)).collect(),
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn include_interactions(&self) -> bool {
        self.include_interactions
    }

    pub fn multi_indices(&self) -> Vec<Vec<u8>> {
        self.terms.iter().map(|t| t.multi_index(self.dim)).collect()
    }

    pub fn labels(&self, names: &[String]) -> Vec<String> {
        self.terms.iter().map(|t| t.label(names)).collect()
    }

    /// Evaluates every term at scaled coordinates `z`.
    #[inline]
    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = t.eval(z);
        }
    }

    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(z, &mut out);
        out
    }

    fn check(&self) -> Result<()> {
        if self.terms.first() != Some(&Term::Constant) {
            return Err(MopError::param("first basis term must be the constant"));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.terms {
            if !seen.insert(*t) {
                return Err(MopError::param(format!("duplicate basis term {t:?}")));
            }
            let in_range = match *t {
                Term::Constant => true,
                Term::Linear(i) | Term::Square(i) => i < self.dim,
                Term::Cross(i, j) => i < j && j < self.dim,
            };
            if !in_range {
                return Err(MopError::param(format!("basis term {t:?} out of range")));
            }
            if self.degree == 1 && matches!(t, Term::Square(_)) {
                return Err(MopError::param("degree-1 basis cannot contain square terms"));
            }
        }
        if !(1..=2).contains(&self.degree) {
            return Err(MopError::param("basis degree must be 1 or 2"));
        }
        Ok(())
    }
}

impl TryFrom<BasisRepr> for PolynomialBasis {
    type Error = MopError;

    fn try_from(r: BasisRepr) -> Result<Self> {
        let terms = r
            .terms
            .iter()
            .map(|idx| {
                if idx.len() != r.dim {
                    return Err(MopError::param("multi-index length differs from basis dimension"));
                }
                Term::from_multi_index(idx)
            })
            .collect::<Result<Vec<_>>>()?;
        let b = Self {
            dim: r.dim,
            degree: r.degree,
            include_interactions: r.include_interactions,
            terms,
        };
        b.check()?;
        Ok(b)
    }
}

impl From<PolynomialBasis> for BasisRepr {
    fn from(b: PolynomialBasis) -> Self {
        BasisRepr {
            dim: b.dim,
            degree: b.degree,
            include_interactions: b.include_interactions,
            terms: b.multi_indices(),
        }
    }
}

/// Fitted global polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub basis: PolynomialBasis,
    pub coefficients: Vec<f64>,
    pub subspace: Vec<usize>,
    pub input_scaling: InputScaling,
    pub input_dim: usize,
}

impl PolynomialModel {
    pub(crate) fn validate(&self) -> Result<()> {
        self.basis.check()?;
        if self.coefficients.len() != self.basis.len() {
            return Err(MopError::param(format!(
                "{} coefficients for {} basis terms",
                self.coefficients.len(),
                self.basis.len()
            )));
        }
        if self.subspace.len() != self.basis.dim()
            || self.input_scaling.center.len() != self.subspace.len()
            || self.subspace.iter().any(|&j| j >= self.input_dim)
        {
            return Err(MopError::param("inconsistent polynomial model subspace"));
        }
        Ok(())
    }

    /// Predicts every row of `points` (physical units).
    pub fn predict(&self, points: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.predict_rows(points)
    }
}

impl Surrogate for PolynomialModel {
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
        Ok(self
            .basis
            .terms
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| c * t.eval(&z))
            .sum())
    }
}

pub(crate) fn check_subspace(subspace: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    for &j in subspace {
        if j >= m {
            return Err(MopError::param(format!(
                "subspace index {j} out of range for {m} variables"
            )));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(MopError::param(format!("subspace index {j} listed twice")));
        }
    }
    Ok(())
}

/// Least-squares polynomial fit of `response` over the `subspace` columns.
pub fn fit_polynomial(
    samples: &SampleSet,
    response: &str,
    basis: &PolynomialBasis,
    subspace: &[usize],
) -> Result<PolynomialModel> {
    let y = samples.response(response)?;
    fit_polynomial_data(samples.inputs(), y, basis, subspace, &samples.variable_names())
}

/// Same as [`fit_polynomial`] on a raw input matrix; `names` label the input
/// columns in error messages.
pub fn fit_polynomial_data(
    inputs: &DMatrix<f64>,
    y: &[f64],
    basis: &PolynomialBasis,
    subspace: &[usize],
    names: &[String],
) -> Result<PolynomialModel> {
    check_subspace(subspace, inputs.ncols())?;
    if basis.dim() != subspace.len() {
        return Err(MopError::param(format!(
            "basis over {} variables used with a subspace of {}",
            basis.dim(),
            subspace.len()
        )));
    }
    if y.len() != inputs.nrows() {
        return Err(MopError::param("response length differs from sample count"));
    }
    let n = inputs.nrows();
    let p = basis.len();
    if n < p {
        return Err(MopError::InsufficientData {
            required: p,
            available: n,
            context: format!("polynomial basis with {p} terms"),
        });
    }
    let scaling = InputScaling::from_data(inputs, subspace);
    let k = subspace.len();
    let scaled = scaling.apply_rows(inputs, subspace);
    let mut design = DMatrix::zeros(n, p);
    let mut row = vec![0.0; p];
    for i in 0..n {
        basis.eval_into(&scaled[i * k..(i + 1) * k], &mut row);
        for (c, v) in row.iter().enumerate() {
            design[(i, c)] = *v;
        }
    }
    let coefficients = solve_least_squares(design, y, || {
        let sub_names: Vec<String> = subspace
            .iter()
            .map(|&j| names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1)))
            .collect();
        basis.labels(&sub_names)
    })?;
    Ok(PolynomialModel {
        basis: basis.clone(),
        coefficients,
        subspace: subspace.to_vec(),
        input_scaling: scaling,
        input_dim: inputs.ncols(),
    })
}

fn solve_least_squares(
    design: DMatrix<f64>,
    y: &[f64],
    labels: impl FnOnce() -> Vec<String>,
) -> Result<Vec<f64>> {
    let p = design.ncols();
    let svd = design.svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let (min_idx, s_min) = s
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if !(s_max > 0.0) || s_min < RANK_TOLERANCE * s_max {
        let names = labels();
        let v_t = svd.v_t.as_ref().expect("V computed");
        let null = v_t.row(min_idx);
        let peak = null.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let collinear: Vec<&str> = (0..p)
            .filter(|&c| null[c].abs() > 0.1 * peak)
            .map(|c| names[c].as_str())
            .collect();
        return Err(MopError::numerical(format!(
            "design matrix is rank deficient (singular value ratio {:.3e}); collinear columns: {}",
            if s_max > 0.0 { s_min / s_max } else { 0.0 },
            collinear.join(", ")
        )));
    }
    let rhs = DVector::from_column_slice(y);
    let beta = svd
        .solve(&rhs, 0.0)
        .map_err(|e| MopError::numerical(format!("least-squares solve failed: {e}")))?;
    Ok(beta.iter().cloned().collect())
}

/// Least-squares polynomial fitting as a cross-validation [`Fitter`].
#[derive(Debug, Clone)]
pub struct PolynomialFitter {
    pub subspace: Vec<usize>,
    pub basis: PolynomialBasis,
}

impl PolynomialFitter {
    pub fn new(subspace: Vec<usize>, basis: PolynomialBasis) -> Self {
        Self { subspace, basis }
    }
}

impl Fitter for PolynomialFitter {
    type Model = PolynomialModel;

    fn fit(&self, inputs: &DMatrix<f64>, y: &[f64]) -> Result<PolynomialModel> {
        fit_polynomial_data(inputs, y, &self.basis, &self.subspace, &[])
    }

    fn term_count(&self) -> Option<usize> {
        Some(self.basis.len())
    }
}

/// Sums of squares behind the coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodReport {
    pub r2: f64,
    pub ss_t: f64,
    pub ss_r: f64,
    pub ss_e: f64,
}

/// Total sum of squares of a response, rejecting responses without variation.
///
/// A response counts as constant when its standard deviation is below 1e-10
/// of its mean magnitude.
pub fn total_sum_of_squares(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(MopError::param("at least two response values are required"));
    }
    let ss_t = stats::sum_sq_dev(y);
    let sd = (ss_t / y.len() as f64).sqrt();
    if ss_t == 0.0 || !ss_t.is_finite() || sd <= 1e-10 * stats::mean(y).abs() {
        return Err(MopError::degenerate(
            "response is constant (no variation to explain)",
        ));
    }
    Ok(ss_t)
}

/// Coefficient of determination `R² = 1 − SS_E / SS_T`, clamped to [0, 1].
pub fn cod(y_true: &[f64], y_fit: &[f64]) -> Result<CodReport> {
    if y_true.len() != y_fit.len() {
        return Err(MopError::param("true and fitted vectors differ in length"));
    }
    let ss_t = total_sum_of_squares(y_true)?;
    let mean = stats::mean(y_true);
    let ss_r = y_fit.iter().map(|f| (f - mean) * (f - mean)).sum();
    let ss_e: f64 = y_true.iter().zip(y_fit).map(|(t, f)| (t - f) * (t - f)).sum();
    Ok(CodReport {
        r2: (1.0 - ss_e / ss_t).clamp(0.0, 1.0),
        ss_t,
        ss_r,
        ss_e,
    })
}

/// Adjusted CoD `1 − (n − 1)/(n − p)·(1 − R²)`; may be negative.
pub fn cod_adjusted(r2: f64, n: usize, p: usize) -> Result<f64> {
    if n <= p {
        return Err(MopError::param(format!(
            "adjusted CoD requires n > p (n = {n}, p = {p})"
        )));
    }
    Ok(1.0 - (n as f64 - 1.0) / (n as f64 - p as f64) * (1.0 - r2))
}

/// In-sample R² of a least-squares polynomial fit.
pub fn fit_r2(
    inputs: &DMatrix<f64>,
    y: &[f64],
    basis: &PolynomialBasis,
    subspace: &[usize],
) -> Result<f64> {
    Ok(fit_cod(inputs, y, basis, subspace)?.r2)
}

fn fit_cod(
    inputs: &DMatrix<f64>,
    y: &[f64],
    basis: &PolynomialBasis,
    subspace: &[usize],
) -> Result<CodReport> {
    let names: Vec<String> = (0..inputs.ncols()).map(|j| format!("x{}", j + 1)).collect();
    let model = fit_polynomial_data(inputs, y, basis, subspace, &names)?;
    let fitted = model.predict_rows(inputs)?;
    cod(y, &fitted)
}

fn unclamped_r2(report: &CodReport) -> f64 {
    1.0 - report.ss_e / report.ss_t
}

/// Coefficient of Importance of one input variable: the drop in R² when
/// every term involving it is removed from `basis`.
///
/// `basis` spans all variables of `samples`; `variable` is a column index.
/// Returns the raw value (tiny negative rounding artifacts are kept).
pub fn coi(
    samples: &SampleSet,
    response: &str,
    basis: &PolynomialBasis,
    variable: usize,
) -> Result<f64> {
    let y = samples.response(response)?;
    let subspace: Vec<usize> = (0..samples.n_vars()).collect();
    Ok(coi_all_data(samples.inputs(), y, basis, &subspace, &[variable])?[0])
}

/// CoI of several subspace positions with one shared full fit.
///
/// `positions` index into `subspace` (and therefore into `basis`).
pub fn coi_all_data(
    inputs: &DMatrix<f64>,
    y: &[f64],
    basis: &PolynomialBasis,
    subspace: &[usize],
    positions: &[usize],
) -> Result<Vec<f64>> {
    if let Some(&p) = positions.iter().find(|&&p| p >= subspace.len()) {
        return Err(MopError::param(format!("variable position {p} outside the basis")));
    }
    let full = fit_cod(inputs, y, basis, subspace)?;
    let r2_full = unclamped_r2(&full);
    positions
        .iter()
        .map(|&pos| {
            let reduced = fit_cod(inputs, y, &basis.without_variable(pos), subspace)?;
            Ok(r2_full - unclamped_r2(&reduced))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_lhs, SamplingScheme, VariableDef};

    fn line_data(xs: &[f64], f: impl Fn(f64) -> f64) -> (DMatrix<f64>, Vec<f64>) {
        let inputs = DMatrix::from_column_slice(xs.len(), 1, xs);
        (inputs, xs.iter().map(|&x| f(x)).collect())
    }

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|j| format!("x{}", j + 1)).collect()
    }

    #[test]
    fn basis_shapes() {
        assert_eq!(PolynomialBasis::linear(3).len(), 4);
        assert_eq!(PolynomialBasis::quadratic(3, false).len(), 7);
        assert_eq!(PolynomialBasis::quadratic(3, true).len(), 10);
        assert_eq!(PolynomialBasis::term_count(5, 2, true), 21);
        assert_eq!(PolynomialBasis::quadratic(5, true).len(), 21);
        let b = PolynomialBasis::quadratic(3, true).without_variable(1);
        assert_eq!(b.labels(&names(3)), vec!["1", "x1", "x3", "x1^2", "x3^2", "x1*x3"]);
    }

    #[test]
    fn basis_rejects_bad_multi_index() {
        let bad = r#"{"dim":2,"degree":2,"include_interactions":false,"terms":[[0,0],[3,0]]}"#;
        assert!(serde_json::from_str::<PolynomialBasis>(bad).is_err());
        let no_const = r#"{"dim":1,"degree":1,"include_interactions":false,"terms":[[1]]}"#;
        assert!(serde_json::from_str::<PolynomialBasis>(no_const).is_err());
        let dup = r#"{"dim":1,"degree":1,"include_interactions":false,"terms":[[0],[1],[1]]}"#;
        assert!(serde_json::from_str::<PolynomialBasis>(dup).is_err());
    }

    #[test]
    fn exact_line_recovered() {
        let (x, y) = line_data(&[0.0, 1.0, 2.0, 3.0, 4.5], |x| 3.0 + 2.0 * x);
        let m = fit_polynomial_data(&x, &y, &PolynomialBasis::linear(1), &[0], &names(1)).unwrap();
        for (xi, yi) in [0.0, 5.0, -1.0].iter().zip([3.0, 13.0, 1.0]) {
            assert!((m.predict_point(&[*xi]).unwrap() - yi).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_fit_when_n_equals_p() {
        let x = DMatrix::from_row_slice(3, 2, &[0.1, 0.7, 0.5, 0.2, 0.9, 0.95]);
        let y = vec![1.0, -2.0, 0.5];
        let m = fit_polynomial_data(&x, &y, &PolynomialBasis::linear(2), &[0, 1], &names(2)).unwrap();
        let fitted = m.predict_rows(&x).unwrap();
        for (a, b) in fitted.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((cod(&y, &fitted).unwrap().r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn insufficient_data_reports_requirement() {
        let (x, y) = line_data(&[0.0, 1.0], |x| x);
        let err = fit_polynomial_data(&x, &y, &PolynomialBasis::quadratic(1, false), &[0], &names(1))
            .unwrap_err();
        assert!(matches!(err, MopError::InsufficientData { required: 3, available: 2, .. }));
    }

    #[test]
    fn collinear_columns_named() {
        let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { i as f64 } else { 2.0 * i as f64 + 1.0 });
        let y: Vec<f64> = (0..6).map(|i| i as f64 * 0.3).collect();
        let err = fit_polynomial_data(&x, &y, &PolynomialBasis::linear(2), &[0, 1], &names(2)).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, MopError::Numerical(_)));
        assert!(msg.contains("x1") && msg.contains("x2"), "{msg}");
    }

    #[test]
    fn predict_dimension_mismatch() {
        let (x, y) = line_data(&[0.0, 1.0, 2.0], |x| x);
        let m = fit_polynomial_data(&x, &y, &PolynomialBasis::linear(1), &[0], &names(1)).unwrap();
        assert!(m.predict_point(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn constant_model_predicts_constant() {
        let (x, y) = line_data(&[0.0, 1.0, 2.0], |_| 4.25);
        let m = fit_polynomial_data(&x, &y, &PolynomialBasis::constant(1), &[0], &names(1)).unwrap();
        assert!((m.predict_point(&[17.0]).unwrap() - 4.25).abs() < 1e-12);
    }

    #[test]
    fn cod_examples() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(cod(&y, &y).unwrap().r2, 1.0);
        assert_eq!(cod(&y, &[2.5; 4]).unwrap().r2, 0.0);
        let r = cod(&y, &[1.1, 1.9, 3.1, 3.9]).unwrap();
        // SS_E = 4 * 0.01, SS_T = 5
        assert!((r.ss_e - 0.04).abs() < 1e-12);
        assert!((r.ss_t - 5.0).abs() < 1e-12);
        assert!((r.r2 - 0.992).abs() < 1e-12);
        assert!(matches!(cod(&[2.0, 2.0], &[2.0, 2.0]), Err(MopError::DegenerateResponse(_))));
    }

    #[test]
    fn cod_adjusted_examples() {
        assert_eq!(cod_adjusted(1.0, 12, 5).unwrap(), 1.0);
        assert!((cod_adjusted(0.9, 21, 11).unwrap() - 0.8).abs() < 1e-12);
        assert!(cod_adjusted(0.5, 10, 10).is_err());
    }

    #[test]
    fn coi_of_sole_driver_is_one() {
        let vars = vec![VariableDef::uniform("a", 0.0, 1.0)];
        let s = sample_lhs(&vars, 40, 2, None).unwrap();
        let y = s.column(0);
        let s = s.with_response("y", y).unwrap();
        let c1 = coi(&s, "y", &PolynomialBasis::linear(1), 0).unwrap();
        assert!((c1 - 1.0).abs() < 1e-6, "{c1}");

        // With a second, irrelevant input the driver keeps almost all of it
        // and the bystander gets nothing.
        let vars = vec![VariableDef::uniform("a", 0.0, 1.0), VariableDef::uniform("b", 0.0, 1.0)];
        let s = sample_lhs(&vars, 40, 2, None).unwrap();
        let y = s.column(0);
        let s = s.with_response("y", y).unwrap();
        let c1 = coi(&s, "y", &PolynomialBasis::linear(2), 0).unwrap();
        let c2 = coi(&s, "y", &PolynomialBasis::linear(2), 1).unwrap();
        assert!(c1 > 0.99, "{c1}");
        assert!(c2.abs() < 1e-9);
    }

    #[test]
    fn scheme_of_lhs() {
        let vars = vec![VariableDef::uniform("a", 0.0, 1.0)];
        assert_eq!(sample_lhs(&vars, 4, 0, None).unwrap().scheme(), SamplingScheme::Lhs);
    }
}
