//! Common interface over the fitted approximation models.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MopError, Result};
use crate::kriging::KrigingModel;
use crate::mls::MlsModel;
use crate::par;
use crate::regression::PolynomialModel;

/// Version of the JSON model document layout.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// A fitted approximation `y ≈ f(x)` over the full input space.
///
/// Points are always given in physical units with one coordinate per input
/// variable of the data the model was fitted on; models read only the
/// coordinates of their own subspace.
pub trait Surrogate: Send + Sync {
    /// Expected length of a point.
    fn input_dim(&self) -> usize;

    /// Indices of the input variables the model depends on.
    fn subspace(&self) -> &[usize];

    fn predict_point(&self, x: &[f64]) -> Result<f64>;

    /// Predicts every row of `points`.
    fn predict_rows(&self, points: &DMatrix<f64>) -> Result<Vec<f64>> {
        if points.ncols() != self.input_dim() {
            return Err(dimension_mismatch(self.input_dim(), points.ncols()));
        }
        par::try_map_indices(points.nrows(), |i| {
            let row: Vec<f64> = points.row(i).iter().cloned().collect();
            self.predict_point(&row)
        })
    }
}

pub(crate) fn dimension_mismatch(expected: usize, got: usize) -> MopError {
    MopError::param(format!(
        "dimension mismatch: model expects points with {expected} coordinates, got {got}"
    ))
}

/// Per-variable affine map onto [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub center: Vec<f64>,
    pub half_range: Vec<f64>,
}

impl InputScaling {
    /// Scaling from the sample min/max of the subspace columns.
    pub fn from_data(inputs: &DMatrix<f64>, subspace: &[usize]) -> Self {
        let mut center = Vec::with_capacity(subspace.len());
        let mut half_range = Vec::with_capacity(subspace.len());
        for &j in subspace {
            let col = inputs.column(j);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let half = 0.5 * (hi - lo);
            center.push(0.5 * (hi + lo));
            // Constant columns map to 0.
            half_range.push(if half > 0.0 { half } else { 1.0 });
        }
        Self { center, half_range }
    }

    /// Scaled subspace coordinates of a full-space point.
    pub fn apply(&self, x: &[f64], subspace: &[usize], out: &mut [f64]) {
        for (k, &j) in subspace.iter().enumerate() {
            out[k] = (x[j] - self.center[k]) / self.half_range[k];
        }
    }

    /// Scaled subspace coordinates of every row, row-major.
    pub fn apply_rows(&self, inputs: &DMatrix<f64>, subspace: &[usize]) -> Vec<f64> {
        let k = subspace.len();
        let mut out = vec![0.0; inputs.nrows() * k];
        for i in 0..inputs.nrows() {
            for (c, &j) in subspace.iter().enumerate() {
                out[i * k + c] = (inputs[(i, j)] - self.center[c]) / self.half_range[c];
            }
        }
        out
    }
}

/// Serializable union of the model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurrogateModel {
    Polynomial(PolynomialModel),
    Mls(MlsModel),
    Kriging(KrigingModel),
}

impl SurrogateModel {
    fn inner(&self) -> &dyn Surrogate {
        match self {
            SurrogateModel::Polynomial(m) => m,
            SurrogateModel::Mls(m) => m,
            SurrogateModel::Kriging(m) => m,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocumentRef {
            schema_version: MODEL_SCHEMA_VERSION,
            model: self,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(MopError::Format(format!(
                "unsupported model schema version {} (expected {MODEL_SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        doc.model.validate()?;
        Ok(doc.model)
    }

    fn validate(&self) -> Result<()> {
        match self {
            SurrogateModel::Polynomial(m) => m.validate(),
            SurrogateModel::Mls(m) => m.validate(),
            SurrogateModel::Kriging(m) => m.validate(),
        }
    }
}

impl Surrogate for SurrogateModel {
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }

    fn subspace(&self) -> &[usize] {
        self.inner().subspace()
    }

    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        self.inner().predict_point(x)
    }
}

impl From<PolynomialModel> for SurrogateModel {
    fn from(m: PolynomialModel) -> Self {
        SurrogateModel::Polynomial(m)
    }
}

impl From<MlsModel> for SurrogateModel {
    fn from(m: MlsModel) -> Self {
        SurrogateModel::Mls(m)
    }
}

impl From<KrigingModel> for SurrogateModel {
    fn from(m: KrigingModel) -> Self {
        SurrogateModel::Kriging(m)
    }
}

#[derive(Serialize)]
struct ModelDocumentRef<'a> {
    schema_version: u32,
    model: &'a SurrogateModel,
}

#[derive(Deserialize)]
struct ModelDocument {
    schema_version: u32,
    model: SurrogateModel,
}

/// Evaluates a model on a lower-dimensional view: the listed coordinates are
/// taken from the view point, all others are held at `anchor`.
pub struct EmbeddedView<'a, S: Surrogate + ?Sized> {
    model: &'a S,
    positions: Vec<usize>,
    anchor: Vec<f64>,
    local: Vec<usize>,
}

impl<'a, S: Surrogate + ?Sized> EmbeddedView<'a, S> {
    pub fn new(model: &'a S, positions: Vec<usize>, anchor: Vec<f64>) -> Result<Self> {
        if anchor.len() != model.input_dim() {
            return Err(dimension_mismatch(model.input_dim(), anchor.len()));
        }
        if let Some(&p) = positions.iter().find(|&&p| p >= anchor.len()) {
            return Err(MopError::param(format!("view position {p} out of range")));
        }
        let local = (0..positions.len()).collect();
        Ok(Self {
            model,
            positions,
            anchor,
            local,
        })
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.positions.len() {
            return Err(dimension_mismatch(self.positions.len(), z.len()));
        }
        let mut x = self.anchor.clone();
        for (&p, &v) in self.positions.iter().zip(z) {
            x[p] = v;
        }
        self.model.predict_point(&x)
    }
}

impl<S: Surrogate + ?Sized> Surrogate for EmbeddedView<'_, S> {
    fn input_dim(&self) -> usize {
        self.positions.len()
    }

    fn subspace(&self) -> &[usize] {
        &self.local
    }

    fn predict_point(&self, z: &[f64]) -> Result<f64> {
        self.eval(z)
    }
}
