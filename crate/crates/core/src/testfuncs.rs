//! Analytical benchmark functions with known sensitivity ground truth.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};

use crate::error::{MopError, Result};
use crate::sampling::{sample_lhs, SampleSet, VariableDef};
use crate::stats;
use crate::surrogate::{dimension_mismatch, Surrogate};

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Additive Gaussian noise, reproducible per (sample ordinal, seed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub std_dev: f64,
    pub seed: u64,
    /// Share of the total output variance the noise accounts for.
    pub variance_fraction: f64,
}

/// Deterministic test function over a box of uniform inputs.
#[derive(Clone)]
pub struct AnalyticFunction {
    pub name: String,
    pub domain: Vec<VariableDef>,
    evaluator: Evaluator,
    /// Closed-form output variance under the domain marginals.
    pub variance: Option<f64>,
    /// Closed-form first-order indices `S_i`.
    pub first_order: Option<Vec<f64>>,
    /// Closed-form total-effect indices `S_Ti` (may sum above 1).
    pub total_effect: Option<Vec<f64>>,
    pub noise: Option<NoiseSpec>,
    /// Inputs within the domain were required but not met at least once.
    pub(crate) out_of_domain: Arc<std::sync::atomic::AtomicBool>,
}

impl fmt::Debug for AnalyticFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticFunction")
            .field("name", &self.name)
            .field("dimension", &self.dimension())
            .field("noise", &self.noise)
            .finish()
    }
}

impl AnalyticFunction {
    pub fn new(
        name: impl Into<String>,
        domain: Vec<VariableDef>,
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            evaluator: Arc::new(evaluator),
            variance: None,
            first_order: None,
            total_effect: None,
            noise: None,
            out_of_domain: Arc::default(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.domain.len()
    }

    /// Noise-free value. Points outside the domain are still evaluated but
    /// recorded (see [`AnalyticFunction::saw_out_of_domain`]).
    pub fn eval(&self, x: &[f64]) -> f64 {
        if x
            .iter()
            .zip(&self.domain)
            .any(|(v, d)| !d.distribution.contains(*v))
        {
            self.out_of_domain
                .store(true, std::sync::atomic::Ordering::Relaxed);
        }
        (self.evaluator)(x)
    }

    pub fn saw_out_of_domain(&self) -> bool {
        self.out_of_domain.load(std::sync::atomic::Ordering::Relaxed)
    }

    /// Value at the `index`-th design point, including noise if configured.
    pub fn eval_indexed(&self, x: &[f64], index: u64) -> f64 {
        let clean = self.eval(x);
        match self.noise {
            Some(n) if n.std_dev > 0.0 => {
                let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
                rng.set_stream(index);
                let z: f64 = StandardNormal.sample(&mut rng);
                clean + n.std_dev * z
            }
            _ => clean,
        }
    }

    /// Evaluates every row of a design.
    pub fn evaluate_design(&self, inputs: &DMatrix<f64>) -> Vec<f64> {
        crate::par::map_indices(inputs.nrows(), |i| {
            let row: Vec<f64> = inputs.row(i).iter().cloned().collect();
            self.eval_indexed(&row, i as u64)
        })
    }

    /// Adds a response column `name` holding this function's values.
    pub fn attach_response(&self, samples: SampleSet, name: &str) -> Result<SampleSet> {
        if samples.n_vars() != self.dimension() {
            return Err(MopError::param(format!(
                "function '{}' has {} inputs, sample set has {}",
                self.name,
                self.dimension(),
                samples.n_vars()
            )));
        }
        let y = self.evaluate_design(samples.inputs());
        samples.with_response(name, y)
    }

    /// Output variance: closed form when known, otherwise estimated from a
    /// fixed 100 000-point LHS.
    pub fn output_variance(&self) -> Result<f64> {
        if let Some(v) = self.variance {
            return Ok(v);
        }
        let s = sample_lhs(&self.domain, 100_000, 0x7a11, None)?;
        let y: Vec<f64> = crate::par::map_indices(s.len(), |i| self.eval(&s.row(i)));
        Ok(stats::variance(&y))
    }
}

/// Noise-free view of an [`AnalyticFunction`] usable wherever a fitted
/// surrogate is expected.
pub struct ExactSurrogate<'a> {
    f: &'a AnalyticFunction,
    all: Vec<usize>,
}

impl AnalyticFunction {
    pub fn as_surrogate(&self) -> ExactSurrogate<'_> {
        ExactSurrogate {
            f: self,
            all: (0..self.dimension()).collect(),
        }
    }
}

impl Surrogate for ExactSurrogate<'_> {
    fn input_dim(&self) -> usize {
        self.all.len()
    }

    fn subspace(&self) -> &[usize] {
        &self.all
    }

    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.all.len() {
            return Err(dimension_mismatch(self.all.len(), x.len()));
        }
        Ok(self.f.eval(x))
    }
}

/// Variance of a uniform variable on [−π, π].
fn var_u() -> f64 {
    PI * PI / 3.0
}

fn box_domain(dim: usize) -> Vec<VariableDef> {
    (0..dim)
        .map(|i| VariableDef::uniform(format!("X{}", i + 1), -PI, PI))
        .collect()
}

/// `Y = 0.5·X1 + X2 + 0.5·X1·X2 + 5·sin(X3) + 0.2·X4 + 0.1·X5` with every
/// input uniform on [−π, π].
pub fn coupled5_eval(x: &[f64]) -> f64 {
    0.5 * x[0] + x[1] + 0.5 * x[0] * x[1] + 5.0 * x[2].sin() + 0.2 * x[3] + 0.1 * x[4]
}

/// Closed-form variance decomposition of [`coupled5`]: returns the partial
/// variances `(V1, V2, V12, V3, V4, V5)`.
pub fn coupled5_partial_variances() -> [f64; 6] {
    let v = var_u();
    [
        0.25 * v,
        v,
        0.25 * v * v,
        12.5,
        0.04 * v,
        0.01 * v,
    ]
}

/// The five-input coupled benchmark with its closed-form indices.
pub fn coupled5() -> AnalyticFunction {
    let [v1, v2, v12, v3, v4, v5] = coupled5_partial_variances();
    let total = v1 + v2 + v12 + v3 + v4 + v5;
    let mut f = AnalyticFunction::new("coupled5", box_domain(5), coupled5_eval);
    f.variance = Some(total);
    f.first_order = Some(vec![v1 / total, v2 / total, v3 / total, v4 / total, v5 / total]);
    f.total_effect = Some(vec![
        (v1 + v12) / total,
        (v2 + v12) / total,
        v3 / total,
        v4 / total,
        v5 / total,
    ]);
    f
}

/// Appends `extra` inputs, uniform on [−π, π], that the function ignores.
pub fn embed_inert(f: &AnalyticFunction, extra: usize) -> AnalyticFunction {
    if extra == 0 {
        return f.clone();
    }
    let base_dim = f.dimension();
    let mut domain = f.domain.clone();
    let start = base_dim + 1;
    domain.extend((start..start + extra).map(|i| VariableDef::uniform(format!("X{i}"), -PI, PI)));
    let inner = f.evaluator.clone();
    let mut g = AnalyticFunction::new(
        if f.name.contains("+inert") {
            format!("{}+{}", f.name, extra)
        } else {
            format!("{}+inert{}", f.name, extra)
        },
        domain,
        move |x: &[f64]| inner(&x[..base_dim]),
    );
    g.variance = f.variance;
    g.first_order = f.first_order.as_ref().map(|v| pad(v, extra));
    g.total_effect = f.total_effect.as_ref().map(|v| pad(v, extra));
    g.noise = f.noise;
    g
}

fn pad(v: &[f64], extra: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.extend(std::iter::repeat_n(0.0, extra));
    out
}

/// Adds zero-mean Gaussian noise whose share of the total output variance is
/// `fraction`: the noise variance is `fraction / (1 − fraction)` times the
/// clean function variance.
pub fn add_noise(f: &AnalyticFunction, fraction: f64, seed: u64) -> Result<AnalyticFunction> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(MopError::param(format!(
            "noise variance fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let mut g = f.clone();
    if fraction == 0.0 {
        g.noise = None;
        return Ok(g);
    }
    let clean = f.output_variance()?;
    let noise_var = fraction / (1.0 - fraction) * clean;
    g.noise = Some(NoiseSpec {
        std_dev: noise_var.sqrt(),
        seed,
        variance_fraction: fraction,
    });
    g.name = format!("{}+noise{}", f.name, fraction);
    // Sensitivity shares of the clean part shrink by (1 - fraction).
    g.first_order = f.first_order.as_ref().map(|v| v.iter().map(|s| s * (1.0 - fraction)).collect());
    g.total_effect = f.total_effect.as_ref().map(|v| v.iter().map(|s| s * (1.0 - fraction)).collect());
    g.variance = Some(clean + noise_var);
    Ok(g)
}

/// Built-in function by name, optionally with inert inputs and noise.
pub fn by_name(name: &str, inert: usize, noise: f64, noise_seed: u64) -> Result<AnalyticFunction> {
    let base = match name {
        "coupled5" => coupled5(),
        other => {
            return Err(MopError::param(format!(
                "unknown function '{other}' (available: coupled5)"
            )))
        }
    };
    add_noise(&embed_inert(&base, inert), noise, noise_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_mcs;

    #[test]
    fn coupled5_values() {
        let f = coupled5();
        assert_eq!(f.eval(&[0.0; 5]), 0.0);
        assert!((f.eval(&[0.0, 0.0, PI / 2.0, 0.0, 0.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn coupled5_shares_match_published_rounding() {
        let f = coupled5();
        let st = f.total_effect.unwrap();
        let published = [0.180, 0.306, 0.643, 0.007, 0.002];
        for (a, b) in st.iter().zip(published) {
            assert!((a - b).abs() < 0.005, "{a} vs {b}");
        }
    }

    #[test]
    fn x4_partial_derivative_is_constant() {
        let f = coupled5();
        let h = 1e-5;
        for x in [[0.1, -2.0, 1.0, 0.5, 3.0], [-3.0, 2.5, -1.2, -2.9, 0.0]] {
            let mut a = x;
            let mut b = x;
            a[3] += h;
            b[3] -= h;
            let d = (f.eval(&a) - f.eval(&b)) / (2.0 * h);
            assert!((d - 0.2).abs() < 1e-6);
        }
    }

    #[test]
    fn inert_embedding_ignores_extra_inputs() {
        let f = coupled5();
        assert_eq!(embed_inert(&f, 0).dimension(), 5);
        let g = embed_inert(&f, 15);
        assert_eq!(g.dimension(), 20);
        let mut x = vec![0.3, -1.1, 2.0, 0.7, -0.4];
        let base = f.eval(&x);
        x.extend((0..15).map(|i| i as f64 * 0.2 - 1.5));
        assert_eq!(g.eval(&x).to_bits(), base.to_bits());
        assert_eq!(embed_inert(&f, 41).dimension(), 46);
        assert_eq!(g.domain[19].name, "X20");
    }

    #[test]
    fn noise_fraction_zero_and_one() {
        let f = coupled5();
        let g = add_noise(&f, 0.0, 1).unwrap();
        let x = [0.4, 0.1, -0.3, 2.0, 1.0];
        assert_eq!(g.eval_indexed(&x, 5), f.eval(&x));
        assert!(add_noise(&f, 1.0, 1).is_err());
    }

    #[test]
    fn noise_share_matches_request() {
        let g = add_noise(&coupled5(), 0.37, 9).unwrap();
        let s = sample_mcs(&g.domain, 100_000, 4).unwrap();
        let noisy = g.evaluate_design(s.inputs());
        let clean: Vec<f64> = (0..s.len()).map(|i| g.eval(&s.row(i))).collect();
        let resid: Vec<f64> = noisy.iter().zip(&clean).map(|(a, b)| a - b).collect();
        let share = stats::variance(&resid) / stats::variance(&noisy);
        assert!((share - 0.37).abs() < 0.03, "{share}");
    }

    #[test]
    fn noise_reproducible() {
        let g = add_noise(&coupled5(), 0.2, 3).unwrap();
        let x = [0.0; 5];
        assert_eq!(g.eval_indexed(&x, 17), g.eval_indexed(&x, 17));
        assert_ne!(g.eval_indexed(&x, 17), g.eval_indexed(&x, 18));
    }

    #[test]
    fn out_of_domain_flagged() {
        let f = coupled5();
        assert!(!f.saw_out_of_domain());
        f.eval(&[4.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(f.saw_out_of_domain());
    }
}
