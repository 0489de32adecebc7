//! Metamodel of Optimal Prognosis (MOP): a search over variable subspaces and
//! approximation classes for the combination with the highest cross-validated
//! CoP, followed by variance attribution `CoP(X_i) = CoP · S_T(X_i)`.
//!
//! Variables are first ranked by a cheap significance filter. Nested
//! subspaces of the top-ranked variables (plus the full space) are scored for
//! every model class on one shared fold assignment, and the best candidate is
//! then polished by single-variable removals and additions.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use log::{debug, info};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MopError, Result};
use crate::mls::{search_radius, MlsFitter};
use crate::par;
use crate::quality::{cross_validate, make_folds, to_json_rounded, FoldAssignment, Fitter, DEFAULT_FOLDS};
use crate::regression::{
    coi_all_data, cod_adjusted, fit_polynomial_data, fit_r2, total_sum_of_squares, PolynomialBasis, PolynomialFitter,
};
use crate::sampling::{CorrelationSpec, SampleSet, SamplingScheme, VariableDef};
use crate::sobol::{sobol_indices, MIN_MC_SAMPLES};
use crate::stats;
use crate::surrogate::{EmbeddedView, Surrogate, SurrogateModel};

pub const MOP_SCHEMA_VERSION: u32 = 1;
pub const MIN_SAMPLES: usize = 10;
pub const DEFAULT_MAX_SUBSPACE: usize = 10;
pub const DEFAULT_TIE_THRESHOLD: f64 = 0.005;
pub const DEFAULT_INTERACTION_THRESHOLD: f64 = 0.05;
pub const DEFAULT_SOBOL_SAMPLES: usize = 10_000;
/// Largest input count for which exhaustive subspace enumeration is allowed.
pub const EXHAUSTIVE_MAX_VARS: usize = 15;
/// CoP change per doubling of the sample count below which the CoP is
/// considered to have levelled off.
pub const PLATEAU_EPSILON: f64 = 0.02;
/// Plateau level separating a robust from a non-robust response.
pub const ROBUST_LEVEL: f64 = 0.9;

/// Approximation classes of the MOP, ordered from simplest to most complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    PolynomialLinear,
    PolynomialQuadratic,
    MlsLinear,
    MlsQuadratic,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::PolynomialLinear,
        ModelKind::PolynomialQuadratic,
        ModelKind::MlsLinear,
        ModelKind::MlsQuadratic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::PolynomialLinear => "polynomial-linear",
            ModelKind::PolynomialQuadratic => "polynomial-quadratic",
            ModelKind::MlsLinear => "mls-linear",
            ModelKind::MlsQuadratic => "mls-quadratic",
        }
    }

    pub fn is_mls(self) -> bool {
        matches!(self, ModelKind::MlsLinear | ModelKind::MlsQuadratic)
    }

    pub fn degree(self) -> u8 {
        match self {
            ModelKind::PolynomialLinear | ModelKind::MlsLinear => 1,
            ModelKind::PolynomialQuadratic | ModelKind::MlsQuadratic => 2,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = MopError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| MopError::param(format!("unknown model class '{s}'")))
    }
}

/// A resolved model class: kind, whether cross terms are present, and the
/// influence radius chosen for MLS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelClass {
    pub kind: ModelKind,
    pub interactions: bool,
    pub influence_radius: Option<f64>,
}

/// Search settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MopConfig {
    pub folds: usize,
    pub fold_seed: u64,
    pub classes: Vec<ModelKind>,
    /// Largest nested subspace built from the variable ranking.
    pub max_subspace: usize,
    /// Score every non-empty subspace instead of the nested ones.
    pub exhaustive: bool,
    /// Polish the best candidate with single-variable removals/additions.
    pub refine: bool,
    pub tie_threshold: f64,
    pub interaction_threshold: f64,
    pub n_mc: usize,
    pub sobol_seed: u64,
}

impl Default for MopConfig {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            fold_seed: 0,
            classes: ModelKind::ALL.to_vec(),
            max_subspace: DEFAULT_MAX_SUBSPACE,
            exhaustive: false,
            refine: true,
            tie_threshold: DEFAULT_TIE_THRESHOLD,
            interaction_threshold: DEFAULT_INTERACTION_THRESHOLD,
            n_mc: DEFAULT_SOBOL_SAMPLES,
            sobol_seed: 0,
        }
    }
}

impl MopConfig {
    pub fn validate(&self, n_vars: usize) -> Result<()> {
        if self.folds < 2 {
            return Err(MopError::param("at least two folds are required"));
        }
        if self.classes.is_empty() {
            return Err(MopError::param("no model classes selected"));
        }
        if self.max_subspace == 0 {
            return Err(MopError::param("max_subspace must be at least 1"));
        }
        if !(self.tie_threshold > 0.0) || !(self.interaction_threshold > 0.0) {
            return Err(MopError::param("thresholds must be positive"));
        }
        if self.n_mc < MIN_MC_SAMPLES {
            return Err(MopError::param(format!("n_mc must be at least {MIN_MC_SAMPLES}")));
        }
        if self.exhaustive && n_vars > EXHAUSTIVE_MAX_VARS {
            return Err(MopError::param(format!(
                "exhaustive search is limited to {EXHAUSTIVE_MAX_VARS} variables, got {n_vars}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingMethod {
    /// Coefficient of Importance on a quadratic basis without cross terms.
    Coi,
    /// Absolute Spearman correlation with the response.
    Spearman,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedVariable {
    pub name: String,
    pub index: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableRanking {
    pub method: RankingMethod,
    pub order: Vec<RankedVariable>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateStage {
    Nested,
    Full,
    Exhaustive,
    Refinement,
}

/// One scored (subspace, class) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub id: usize,
    pub stage: CandidateStage,
    pub subspace: Vec<usize>,
    pub variables: Vec<String>,
    pub kind: ModelKind,
    pub interactions: bool,
    pub terms: usize,
    pub influence_radius: Option<f64>,
    pub cop: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedCandidate {
    pub stage: CandidateStage,
    pub variables: Vec<String>,
    pub kind: ModelKind,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableContribution {
    pub name: String,
    pub index: usize,
    pub s_first: f64,
    pub s_total: f64,
    /// Unclamped total-effect estimate.
    pub s_total_raw: f64,
    pub cop_xi: f64,
}

/// Per-variable attribution plus the interaction verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub per_variable: Vec<VariableContribution>,
    pub sum_cop_xi: f64,
    pub interaction_flag: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub n_samples: usize,
    pub folds: usize,
    pub fold_seed: u64,
    pub sample_seed: u64,
    pub scheme: SamplingScheme,
    pub n_mc: usize,
    pub sobol_seed: u64,
    pub max_subspace: usize,
    pub exhaustive: bool,
    pub refine: bool,
    pub tie_threshold: f64,
    pub interaction_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MopResult {
    pub schema_version: u32,
    pub response: String,
    pub variables: Vec<String>,
    pub subspace: Vec<usize>,
    pub subspace_names: Vec<String>,
    pub model_class: ModelClass,
    pub cop_total: f64,
    pub unexplained_variation: f64,
    pub per_variable: Vec<VariableContribution>,
    pub sum_cop_xi: f64,
    pub interaction_flag: bool,
    pub candidates_evaluated: usize,
    pub candidates: Vec<CandidateScore>,
    pub skipped: Vec<SkippedCandidate>,
    pub ranking: VariableRanking,
    pub provenance: Provenance,
    pub model: SurrogateModel,
}

impl MopResult {
    /// JSON with every reported number rounded to 12 significant digits; the
    /// embedded model keeps full precision.
    pub fn to_json(&self) -> Result<String> {
        to_json_rounded(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: MopResult = serde_json::from_str(s)?;
        if r.schema_version != MOP_SCHEMA_VERSION {
            return Err(MopError::Format(format!(
                "unsupported MOP result schema version {} (expected {MOP_SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }

    /// `CoP(X_i)` of every input, zero outside the selected subspace.
    pub fn cop_by_variable(&self) -> Vec<(String, f64, f64)> {
        self.variables
            .iter()
            .enumerate()
            .map(|(j, name)| {
                match self.per_variable.iter().find(|c| c.index == j) {
                    Some(c) => (name.clone(), c.s_total, c.cop_xi),
                    None => (name.clone(), 0.0, 0.0),
                }
            })
            .collect()
    }
}

/// Ranks all inputs by the significance filter, most important first.
pub fn rank_variables(inputs: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<VariableRanking> {
    let m = inputs.ncols();
    let n = inputs.nrows();
    let basis = PolynomialBasis::quadratic(m, false);
    let all: Vec<usize> = (0..m).collect();
    let coi = if n >= 2 * basis.len() {
        match coi_all_data(inputs, y, &basis, &all, &all) {
            Ok(v) => Some(v),
            Err(e) => {
                debug!("importance filter falls back to rank correlation: {e}");
                None
            }
        }
    } else {
        None
    };
    let (method, scores) = match coi {
        Some(v) => (RankingMethod::Coi, v),
        None => {
            let scores = (0..m)
                .map(|j| {
                    let col: Vec<f64> = inputs.column(j).iter().cloned().collect();
                    stats::spearman(&col, y).map_or(0.0, f64::abs)
                })
                .collect();
            (RankingMethod::Spearman, scores)
        }
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(VariableRanking {
        method,
        order: order
            .into_iter()
            .map(|j| RankedVariable {
                name: names[j].clone(),
                index: j,
                score: scores[j],
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CandidateSpec {
    subspace: Vec<usize>,
    kind: ModelKind,
}

enum Outcome {
    Scored {
        interactions: bool,
        terms: usize,
        radius: Option<f64>,
        cop: f64,
    },
    Skipped(String),
}

struct SearchState<'a> {
    inputs: &'a DMatrix<f64>,
    y: &'a [f64],
    names: &'a [String],
    folds: FoldAssignment,
    min_train: usize,
    classes: &'a [ModelKind],
    seen: HashSet<CandidateSpec>,
    scored: Vec<CandidateScore>,
    skipped: Vec<SkippedCandidate>,
}

fn candidate_basis(k: usize, kind: ModelKind, n: usize) -> PolynomialBasis {
    match kind.degree() {
        1 => PolynomialBasis::linear(k),
        _ => {
            let with_cross = PolynomialBasis::term_count(k, 2, true);
            PolynomialBasis::quadratic(k, n >= 2 * with_cross)
        }
    }
}

impl SearchState<'_> {
    fn names_of(&self, subspace: &[usize]) -> Vec<String> {
        subspace.iter().map(|&j| self.names[j].clone()).collect()
    }

    fn evaluate(&self, spec: &CandidateSpec) -> Outcome {
        let basis = candidate_basis(spec.subspace.len(), spec.kind, self.y.len());
        if basis.len() > self.min_train {
            return Outcome::Skipped(format!(
                "{} terms need more than the {} samples of the smallest training fold",
                basis.len(),
                self.min_train
            ));
        }
        let interactions = basis.include_interactions();
        let terms = basis.len();
        if spec.kind.is_mls() {
            match search_radius(self.inputs, self.y, &spec.subspace, &basis, &self.folds) {
                Ok(s) => Outcome::Scored {
                    interactions,
                    terms,
                    radius: Some(s.best_radius),
                    cop: s.best_cop,
                },
                Err(e) => Outcome::Skipped(e.to_string()),
            }
        } else {
            let fitter = PolynomialFitter::new(spec.subspace.clone(), basis);
            match cross_validate(&fitter, self.inputs, self.y, &self.folds) {
                Ok(cv) => Outcome::Scored {
                    interactions,
                    terms,
                    radius: None,
                    cop: cv.cop,
                },
                Err(e) => Outcome::Skipped(e.to_string()),
            }
        }
    }

    /// Scores every subspace of `subspaces` with every configured class,
    /// skipping pairs already seen. Results are appended in enumeration
    /// order regardless of evaluation order.
    fn run(&mut self, stage: CandidateStage, subspaces: Vec<Vec<usize>>) {
        let mut specs = Vec::new();
        for mut s in subspaces {
            s.sort_unstable();
            for &kind in self.classes {
                let spec = CandidateSpec {
                    subspace: s.clone(),
                    kind,
                };
                if self.seen.insert(spec.clone()) {
                    specs.push(spec);
                }
            }
        }
        let outcomes = par::map_slice(&specs, |s| self.evaluate(s));
        for (spec, outcome) in specs.into_iter().zip(outcomes) {
            let variables = self.names_of(&spec.subspace);
            match outcome {
                Outcome::Scored {
                    interactions,
                    terms,
                    radius,
                    cop,
                } => {
                    debug!("candidate {:?} {}: CoP {cop:.4}", variables, spec.kind);
                    self.scored.push(CandidateScore {
                        id: self.scored.len(),
                        stage,
                        subspace: spec.subspace,
                        variables,
                        kind: spec.kind,
                        interactions,
                        terms,
                        influence_radius: radius,
                        cop,
                    });
                }
                Outcome::Skipped(reason) => {
                    info!("skipping {:?} {}: {reason}", variables, spec.kind);
                    self.skipped.push(SkippedCandidate {
                        stage,
                        variables,
                        kind: spec.kind,
                        reason,
                    });
                }
            }
        }
    }
}

/// Picks the best candidate: maximal CoP, where candidates within
/// `tie_threshold` of the maximum are resolved by fewer variables, then the
/// simpler class, then the higher CoP, then enumeration order.
pub fn select_candidate(candidates: &[CandidateScore], tie_threshold: f64) -> Option<&CandidateScore> {
    let best = candidates.iter().map(|c| c.cop).fold(f64::NEG_INFINITY, f64::max);
    candidates
        .iter()
        .filter(|c| c.cop >= best - tie_threshold)
        .min_by(|a, b| {
            a.subspace
                .len()
                .cmp(&b.subspace.len())
                .then(a.kind.cmp(&b.kind))
                .then(b.cop.total_cmp(&a.cop))
                .then(a.id.cmp(&b.id))
        })
}

fn all_subsets(m: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (1u32..(1u32 << m))
        .map(|mask| (0..m).filter(|&j| mask & (1 << j) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

/// Runs the MOP search on `response` of `samples`.
pub fn mop_search(samples: &SampleSet, response: &str, config: &MopConfig) -> Result<MopResult> {
    let m = samples.n_vars();
    config.validate(m)?;
    let y = samples.response(response)?;
    let n = y.len();
    if n < MIN_SAMPLES {
        return Err(MopError::InsufficientData {
            required: MIN_SAMPLES,
            available: n,
            context: "MOP search".into(),
        });
    }
    total_sum_of_squares(y)?;
    let inputs = samples.inputs();
    let names = samples.variable_names();
    let folds = make_folds(n, config.folds.min(n), config.fold_seed)?;
    let min_train = n - folds.fold_sizes().into_iter().max().unwrap_or(0);

    let ranking = rank_variables(inputs, y, &names)?;
    let ranked: Vec<usize> = ranking.order.iter().map(|r| r.index).collect();
    let cap = config.max_subspace.min(m);

    let mut state = SearchState {
        inputs,
        y,
        names: &names,
        folds,
        min_train,
        classes: &config.classes,
        seen: HashSet::new(),
        scored: Vec::new(),
        skipped: Vec::new(),
    };

    if config.exhaustive {
        state.run(CandidateStage::Exhaustive, all_subsets(m));
    } else {
        let nested = (1..=cap).map(|k| ranked[..k].to_vec()).collect();
        state.run(CandidateStage::Nested, nested);
        if cap < m {
            state.run(CandidateStage::Full, vec![(0..m).collect()]);
        }
        if config.refine {
            refine(&mut state, &ranked, cap, config.tie_threshold);
        }
    }

    let chosen = select_candidate(&state.scored, config.tie_threshold)
        .cloned()
        .ok_or_else(|| {
            let smallest = config
                .classes
                .iter()
                .map(|&k| candidate_basis(1, k, n).len())
                .min()
                .unwrap_or(1);
            MopError::InsufficientData {
                required: smallest,
                available: state.min_train,
                context: format!(
                    "no feasible MOP candidate ({} skipped)",
                    state.skipped.len()
                ),
            }
        })?;
    info!(
        "selected {:?} with {} (CoP {:.4}) out of {} candidates",
        chosen.variables,
        chosen.kind,
        chosen.cop,
        state.scored.len()
    );

    let basis = candidate_basis(chosen.subspace.len(), chosen.kind, n);
    let model: SurrogateModel = match chosen.influence_radius {
        Some(d) => MlsFitter::new(chosen.subspace.clone(), basis, d).fit(inputs, y)?.into(),
        None => fit_polynomial_data(inputs, y, &basis, &chosen.subspace, &names)?.into(),
    };

    let attribution = attribute_sensitivity(
        &model,
        chosen.cop,
        samples.variables(),
        config.n_mc,
        config.sobol_seed,
        config.interaction_threshold,
        samples.correlation(),
    )?;

    Ok(MopResult {
        schema_version: MOP_SCHEMA_VERSION,
        response: response.to_string(),
        variables: names.clone(),
        subspace: chosen.subspace.clone(),
        subspace_names: chosen.variables.clone(),
        model_class: ModelClass {
            kind: chosen.kind,
            interactions: chosen.interactions,
            influence_radius: chosen.influence_radius,
        },
        cop_total: chosen.cop,
        unexplained_variation: 1.0 - chosen.cop,
        per_variable: attribution.per_variable,
        sum_cop_xi: attribution.sum_cop_xi,
        interaction_flag: attribution.interaction_flag,
        candidates_evaluated: state.scored.len(),
        candidates: state.scored,
        skipped: state.skipped,
        ranking,
        provenance: Provenance {
            n_samples: n,
            folds: state.folds.q,
            fold_seed: config.fold_seed,
            sample_seed: samples.seed(),
            scheme: samples.scheme(),
            n_mc: config.n_mc,
            sobol_seed: config.sobol_seed,
            max_subspace: config.max_subspace,
            exhaustive: config.exhaustive,
            refine: config.refine,
            tie_threshold: config.tie_threshold,
            interaction_threshold: config.interaction_threshold,
        },
        model,
    })
}

/// Greedy polishing around the current winner: try dropping each of its
/// variables and adding each of the `2·cap` best-ranked others, until the
/// selection stops changing.
fn refine(state: &mut SearchState<'_>, ranked: &[usize], cap: usize, tie_threshold: f64) {
    let pool: Vec<usize> = ranked.iter().cloned().take(2 * cap).collect();
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    loop {
        let Some(current) = select_candidate(&state.scored, tie_threshold) else {
            return;
        };
        let current = current.subspace.clone();
        if !visited.insert(current.clone()) {
            return;
        }
        let mut moves = Vec::new();
        if current.len() > 1 {
            for &v in &current {
                moves.push(current.iter().cloned().filter(|&j| j != v).collect::<Vec<_>>());
            }
        }
        for &v in &pool {
            if !current.contains(&v) {
                let mut s = current.clone();
                s.push(v);
                moves.push(s);
            }
        }
        state.run(CandidateStage::Refinement, moves);
    }
}

/// `CoP(X_i) = cop_total · S_T(X_i)` for the variables of `model`'s subspace.
///
/// Indices are computed on the model restricted to its subspace, with the
/// remaining inputs held at their medians; `variables` lists the marginals
/// of all model inputs.
pub fn attribute_sensitivity<S: Surrogate + ?Sized>(
    model: &S,
    cop_total: f64,
    variables: &[VariableDef],
    n_mc: usize,
    seed: u64,
    interaction_threshold: f64,
    correlation: Option<&CorrelationSpec>,
) -> Result<Attribution> {
    if !(cop_total <= 1.0) {
        return Err(MopError::param(format!("CoP {cop_total} exceeds 1")));
    }
    if variables.len() != model.input_dim() {
        return Err(MopError::param(format!(
            "{} marginals for a model with {} inputs",
            variables.len(),
            model.input_dim()
        )));
    }
    let positions = model.subspace().to_vec();
    let anchor: Vec<f64> = variables.iter().map(|v| v.distribution.median()).collect();
    let view = EmbeddedView::new(model, positions.clone(), anchor)?;
    let marginals: Vec<VariableDef> = positions.iter().map(|&j| variables[j].clone()).collect();
    let s = sobol_indices(&view, &marginals, n_mc, seed, correlation)?;
    let per_variable: Vec<VariableContribution> = positions
        .iter()
        .enumerate()
        .map(|(i, &j)| VariableContribution {
            name: variables[j].name.clone(),
            index: j,
            s_first: s.first_order[i],
            s_total: s.total_effect[i],
            s_total_raw: s.total_effect_raw[i],
            cop_xi: cop_total * s.total_effect[i],
        })
        .collect();
    let sum_cop_xi: f64 = per_variable.iter().map(|c| c.cop_xi).sum();
    Ok(Attribution {
        interaction_flag: sum_cop_xi > cop_total + interaction_threshold,
        per_variable,
        sum_cop_xi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseVerdict {
    Robust,
    NonRobust,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub noise_fraction: f64,
    pub verdict: NoiseVerdict,
}

/// Unexplained share `1 − cop_total` and a robustness verdict from the CoP
/// history over growing sample counts.
///
/// The CoP has levelled off when each of the last two increments stays
/// below [`PLATEAU_EPSILON`] per doubling of `n` plus twice the combined
/// sampling error of the two estimates (a drop counts as no increase), or
/// when it is already within [`PLATEAU_EPSILON`] of 1. A plateau at or above
/// [`ROBUST_LEVEL`] is robust, one below it is not.
pub fn noise_estimate(cop_total: f64, history: &[(usize, f64)]) -> NoiseEstimate {
    let noise_fraction = (1.0 - cop_total).clamp(0.0, 1.0);
    let mut h = history.to_vec();
    h.sort_by_key(|&(n, _)| n);
    h.dedup_by_key(|&mut (n, _)| n);
    let verdict = if h.len() < 2 {
        NoiseVerdict::Undetermined
    } else {
        let tail = &h[h.len().saturating_sub(3)..];
        let last = tail[tail.len() - 1].1;
        let flat = last >= 1.0 - PLATEAU_EPSILON
            || tail.windows(2).all(|w| {
                let doublings = (w[1].0 as f64 / w[0].0 as f64).log2();
                let se = cop_standard_error(w[0].0, w[0].1).hypot(cop_standard_error(w[1].0, w[1].1));
                w[1].1 - w[0].1 < PLATEAU_EPSILON * doublings.max(1.0) + 2.0 * se
            });
        match (flat, last >= ROBUST_LEVEL) {
            (true, true) => NoiseVerdict::Robust,
            (true, false) => NoiseVerdict::NonRobust,
            (false, _) => NoiseVerdict::Undetermined,
        }
    };
    NoiseEstimate {
        noise_fraction,
        verdict,
    }
}

/// One row of a convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub cod_linear: Option<f64>,
    pub cod_quadratic: Option<f64>,
    pub cod_adj_linear: Option<f64>,
    pub cod_adj_quadratic: Option<f64>,
    pub cop_mop: f64,
    pub subspace: Vec<String>,
    pub model_class: ModelKind,
}

/// Full-space polynomial CoDs and the MOP of one sample set. CoDs whose
/// basis cannot be fitted on `samples` are left empty.
pub fn convergence_point(
    samples: &SampleSet,
    response: &str,
    config: &MopConfig,
) -> Result<(ConvergencePoint, MopResult)> {
    let result = mop_search(samples, response, config)?;
    let y = samples.response(response)?;
    let n = y.len();
    let m = samples.n_vars();
    let all: Vec<usize> = (0..m).collect();
    let cod = |kind: ModelKind| -> (Option<f64>, Option<f64>) {
        let basis = candidate_basis(m, kind, n);
        match fit_r2(samples.inputs(), y, &basis, &all) {
            Ok(r2) => (Some(r2), cod_adjusted(r2, n, basis.len()).ok()),
            Err(e) => {
                debug!("no {kind} CoD at n = {n}: {e}");
                (None, None)
            }
        }
    };
    let (cod_linear, cod_adj_linear) = cod(ModelKind::PolynomialLinear);
    let (cod_quadratic, cod_adj_quadratic) = cod(ModelKind::PolynomialQuadratic);
    Ok((
        ConvergencePoint {
            n,
            cod_linear,
            cod_quadratic,
            cod_adj_linear,
            cod_adj_quadratic,
            cop_mop: result.cop_total,
            subspace: result.subspace_names.clone(),
            model_class: result.model_class.kind,
        },
        result,
    ))
}

/// Approximate standard error of a CoP estimated from `n` samples: the
/// relative spread `√(2/n)` of a residual sum of squares, applied to `1 − CoP`.
pub fn cop_standard_error(n: usize, cop: f64) -> f64 {
    (1.0 - cop).max(0.0) * (2.0 / n.max(1) as f64).sqrt()
}

/// How inputs outside the plotted pair are fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorRule {
    Medians,
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub a: f64,
    pub b: Option<f64>,
    pub prediction: f64,
}

/// Regular grid of predictions over one or two inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceGrid {
    pub var_a: String,
    pub var_b: Option<String>,
    /// Row-major with `var_b` varying fastest.
    pub points: Vec<GridPoint>,
}

fn axis(var: &VariableDef, resolution: usize) -> Vec<f64> {
    let (lo, hi) = var.distribution.bounds().unwrap_or_else(|| {
        (
            var.distribution.inverse_cdf(0.001),
            var.distribution.inverse_cdf(0.999),
        )
    });
    let steps = (resolution - 1) as f64;
    (0..resolution).map(|i| lo + (hi - lo) * i as f64 / steps).collect()
}

/// Predictions of `model` on a `resolution`-point grid over `var_a` (and
/// `var_b`), spanning each variable's support.
pub fn subspace_grid<S: Surrogate + ?Sized>(
    model: &S,
    variables: &[VariableDef],
    var_a: usize,
    var_b: Option<usize>,
    anchor: &AnchorRule,
    resolution: usize,
) -> Result<SubspaceGrid> {
    if resolution < 2 {
        return Err(MopError::param("grid resolution must be at least 2"));
    }
    if variables.len() != model.input_dim() {
        return Err(MopError::param(format!(
            "{} marginals for a model with {} inputs",
            variables.len(),
            model.input_dim()
        )));
    }
    for v in std::iter::once(var_a).chain(var_b) {
        if !model.subspace().contains(&v) {
            let name = variables.get(v).map_or_else(|| format!("#{v}"), |d| d.name.clone());
            return Err(MopError::param(format!("variable {name} is not in the model subspace")));
        }
    }
    if var_b == Some(var_a) {
        return Err(MopError::param("grid axes must be two different variables"));
    }
    let base: Vec<f64> = match anchor {
        AnchorRule::Medians => variables.iter().map(|v| v.distribution.median()).collect(),
        AnchorRule::Values(v) if v.len() == variables.len() => v.clone(),
        AnchorRule::Values(v) => {
            return Err(MopError::param(format!(
                "anchor has {} values for {} inputs",
                v.len(),
                variables.len()
            )))
        }
    };
    let a_values = axis(&variables[var_a], resolution);
    let b_values: Vec<Option<f64>> = match var_b {
        Some(b) => axis(&variables[b], resolution).into_iter().map(Some).collect(),
        None => vec![None],
    };
    let cells: Vec<(f64, Option<f64>)> = a_values
        .iter()
        .flat_map(|&a| b_values.iter().map(move |&b| (a, b)))
        .collect();
    let preds = par::try_map_slice(&cells, |&(a, b)| {
        let mut x = base.clone();
        x[var_a] = a;
        if let (Some(j), Some(v)) = (var_b, b) {
            x[j] = v;
        }
        model.predict_point(&x)
    })?;
    Ok(SubspaceGrid {
        var_a: variables[var_a].name.clone(),
        var_b: var_b.map(|b| variables[b].name.clone()),
        points: cells
            .into_iter()
            .zip(preds)
            .map(|((a, b), prediction)| GridPoint { a, b, prediction })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_lhs;

    fn uniform_vars(m: usize) -> Vec<VariableDef> {
        (0..m)
            .map(|j| VariableDef::uniform(format!("X{}", j + 1), -1.0, 1.0))
            .collect()
    }

    fn with_response(m: usize, n: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> SampleSet {
        let s = sample_lhs(&uniform_vars(m), n, seed, None).unwrap();
        let y: Vec<f64> = (0..n).map(|i| f(&s.row(i))).collect();
        s.with_response("y", y).unwrap()
    }

    fn quick() -> MopConfig {
        MopConfig {
            n_mc: 2000,
            ..MopConfig::default()
        }
    }

    #[test]
    fn exact_linear_dependence_picks_single_linear_term() {
        let s = with_response(5, 50, 3, |x| x[0]);
        let r = mop_search(&s, "y", &quick()).unwrap();
        assert_eq!(r.subspace_names, vec!["X1"]);
        assert_eq!(r.model_class.kind, ModelKind::PolynomialLinear);
        assert!(r.cop_total >= 0.999);
        assert_eq!(r.unexplained_variation, 1.0 - r.cop_total);
    }

    #[test]
    fn constant_response_is_degenerate() {
        let s = with_response(3, 30, 1, |x| 7.0 + 1e-12 * x[0]);
        assert!(matches!(
            mop_search(&s, "y", &quick()),
            Err(MopError::DegenerateResponse(_))
        ));
    }

    #[test]
    fn too_few_samples() {
        let s = with_response(2, 8, 1, |x| x[0]);
        assert!(matches!(
            mop_search(&s, "y", &quick()),
            Err(MopError::InsufficientData { .. })
        ));
    }

    #[test]
    fn selection_is_argmax_up_to_tie_threshold() {
        let s = with_response(4, 60, 9, |x| x[0] * x[0] + 0.3 * x[1]);
        let cfg = quick();
        let r = mop_search(&s, "y", &cfg).unwrap();
        assert_eq!(r.candidates_evaluated, r.candidates.len());
        for c in &r.candidates {
            assert!(r.cop_total >= c.cop - cfg.tie_threshold);
        }
        for c in &r.per_variable {
            assert!(r.subspace.contains(&c.index));
            assert_eq!(c.cop_xi, r.cop_total * c.s_total);
        }
    }

    #[test]
    fn exhaustive_covers_every_subspace() {
        let s = with_response(3, 40, 2, |x| x[0] + x[1]);
        let cfg = MopConfig {
            exhaustive: true,
            classes: vec![ModelKind::PolynomialLinear],
            ..quick()
        };
        let r = mop_search(&s, "y", &cfg).unwrap();
        assert_eq!(r.candidates.len(), 7);
        assert_eq!(r.subspace, vec![0, 1]);
        let too_many = MopConfig {
            exhaustive: true,
            ..quick()
        };
        let wide = with_response(16, 40, 2, |x| x[0]);
        assert!(mop_search(&wide, "y", &too_many).is_err());
    }

    #[test]
    fn deterministic_and_round_trips() {
        let s = with_response(3, 40, 4, |x| (2.0 * x[0]).sin() + x[1] * x[2]);
        let a = mop_search(&s, "y", &quick()).unwrap();
        let b = mop_search(&s, "y", &quick()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back = MopResult::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back.subspace, a.subspace);
        assert_eq!(back.model, a.model);
    }

    #[test]
    fn tie_break_prefers_fewer_variables_then_simpler_class() {
        let c = |id, subspace: Vec<usize>, kind, cop| CandidateScore {
            id,
            stage: CandidateStage::Nested,
            variables: vec![],
            subspace,
            kind,
            interactions: false,
            terms: 1,
            influence_radius: None,
            cop,
        };
        let cands = vec![
            c(0, vec![0, 1], ModelKind::PolynomialLinear, 0.95),
            c(1, vec![0], ModelKind::MlsLinear, 0.948),
            c(2, vec![0], ModelKind::PolynomialQuadratic, 0.946),
            c(3, vec![1], ModelKind::PolynomialLinear, 0.90),
        ];
        assert_eq!(select_candidate(&cands, 0.005).unwrap().id, 2);
        assert_eq!(select_candidate(&cands, 0.001).unwrap().id, 0);
        assert!(select_candidate(&[], 0.005).is_none());
    }

    #[test]
    fn additive_exact_model_attributes_everything() {
        let s = with_response(2, 40, 5, |x| x[0] + 2.0 * x[1]);
        let model = fit_polynomial_data(
            s.inputs(),
            s.response("y").unwrap(),
            &PolynomialBasis::linear(2),
            &[0, 1],
            &s.variable_names(),
        )
        .unwrap();
        let n_mc = 10_000;
        let a = attribute_sensitivity(&model, 1.0, s.variables(), n_mc, 1, 0.05, None).unwrap();
        assert!((a.sum_cop_xi - 1.0).abs() <= 3.0 / (n_mc as f64).sqrt());
        assert!(!a.interaction_flag);
    }

    #[test]
    fn pure_interaction_raises_flag() {
        let s = with_response(2, 60, 5, |x| x[0] * x[1]);
        let model = fit_polynomial_data(
            s.inputs(),
            s.response("y").unwrap(),
            &PolynomialBasis::quadratic(2, true),
            &[0, 1],
            &s.variable_names(),
        )
        .unwrap();
        let a = attribute_sensitivity(&model, 1.0, s.variables(), 5000, 1, 0.05, None).unwrap();
        assert!(a.interaction_flag, "{a:?}");
        assert!(a.sum_cop_xi > 1.8);
    }

    #[test]
    fn noise_verdicts() {
        assert_eq!(noise_estimate(1.0, &[]).noise_fraction, 0.0);
        assert_eq!(noise_estimate(1.0, &[(100, 1.0)]).verdict, NoiseVerdict::Undetermined);
        let rising = noise_estimate(0.95, &[(100, 0.70), (200, 0.85), (400, 0.95)]);
        assert_eq!(rising.verdict, NoiseVerdict::Undetermined);
        let low = noise_estimate(0.63, &[(100, 0.62), (200, 0.63), (400, 0.63)]);
        assert_eq!(low.verdict, NoiseVerdict::NonRobust);
        assert!((low.noise_fraction - 0.37).abs() < 1e-12);
        let high = noise_estimate(0.97, &[(400, 0.97), (100, 0.95), (200, 0.96)]);
        assert_eq!(high.verdict, NoiseVerdict::Robust);
    }

    #[test]
    fn grid_of_identity_model_follows_axis() {
        let s = with_response(3, 30, 2, |x| x[0]);
        let model = fit_polynomial_data(
            s.inputs(),
            s.response("y").unwrap(),
            &PolynomialBasis::linear(1),
            &[0],
            &s.variable_names(),
        )
        .unwrap();
        let g = subspace_grid(&model, s.variables(), 0, None, &AnchorRule::Medians, 5).unwrap();
        let a: Vec<f64> = g.points.iter().map(|p| p.a).collect();
        assert_eq!(a, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        for p in &g.points {
            assert!((p.prediction - p.a).abs() < 1e-12);
        }
        assert!(subspace_grid(&model, s.variables(), 1, None, &AnchorRule::Medians, 5).is_err());
        assert!(subspace_grid(&model, s.variables(), 0, None, &AnchorRule::Medians, 1).is_err());
    }

    #[test]
    fn grid_of_constant_model_is_flat() {
        let s = with_response(2, 30, 2, |x| 1.0 + 0.0 * x[0]);
        let y = vec![4.0; 30];
        let model = fit_polynomial_data(s.inputs(), &y, &PolynomialBasis::constant(2), &[0, 1], &[]).unwrap();
        let g = subspace_grid(&model, s.variables(), 0, Some(1), &AnchorRule::Medians, 4).unwrap();
        assert_eq!(g.points.len(), 16);
        assert!(g.points.iter().all(|p| (p.prediction - 4.0).abs() < 1e-12));
    }
}
