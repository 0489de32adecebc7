use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

/// Settings shared by every verb. Each field may come from `--config` or
/// from a flag; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Sample CSV to read (a `<name>.meta.json` sidecar is used when present)
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Response column to analyse
    #[arg(long)]
    pub response: Option<String>,

    /// Built-in test function used as the data source
    #[arg(long)]
    pub function: Option<String>,

    /// Inert inputs appended to the test function
    #[arg(long)]
    pub inert: Option<usize>,

    /// Share of the output variance replaced by noise, in [0, 1)
    #[arg(long)]
    pub noise: Option<f64>,

    /// Noise seed (defaults to --seed)
    #[arg(long)]
    pub noise_seed: Option<u64>,

    /// JSON file with a list of variable definitions
    #[arg(long)]
    pub variables: Option<PathBuf>,

    /// Sampling scheme: lhs, mcs or full-factorial
    #[arg(long)]
    pub scheme: Option<String>,

    /// Number of samples
    #[arg(long)]
    pub n: Option<usize>,

    /// Levels per variable for full-factorial designs
    #[arg(long)]
    pub levels: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output CSV of `sample` or `predict`
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Directory for reports
    #[arg(long)]
    pub out_dir: Option<PathBuf>,

    /// Cross-validation folds
    #[arg(long)]
    pub folds: Option<usize>,

    #[arg(long)]
    pub fold_seed: Option<u64>,

    /// Monte Carlo samples for the sensitivity indices
    #[arg(long)]
    pub n_mc: Option<usize>,

    #[arg(long)]
    pub sobol_seed: Option<u64>,

    /// Largest nested subspace in the MOP search
    #[arg(long)]
    pub max_subspace: Option<usize>,

    /// Score every subspace (at most 15 inputs)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub exhaustive: Option<bool>,

    /// Polish the best candidate by adding/removing single variables
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub refine: Option<bool>,

    #[arg(long)]
    pub tie_threshold: Option<f64>,

    #[arg(long)]
    pub interaction_threshold: Option<f64>,

    /// Model classes, comma separated (polynomial-linear, polynomial-quadratic, mls-linear, mls-quadratic)
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,

    /// Subspace plots as `A,B` or `A` (repeatable); defaults to the two most important inputs
    #[arg(long = "grid")]
    pub grids: Option<Vec<String>>,

    #[arg(long)]
    pub grid_resolution: Option<usize>,

    /// Sample counts of a convergence study, comma separated
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,

    /// Serialized model for `predict`
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// CSV of points for `predict`
    #[arg(long)]
    pub points: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| mop_core::error::MopError::Format(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// `self` with every value set in `flags` replaced.
    pub fn overlay(mut self, flags: &RunConfig) -> Self {
        overlay!(
            self, flags, input, response, function, inert, noise, noise_seed, variables, scheme, n,
            levels, seed, out, out_dir, folds, fold_seed, n_mc, sobol_seed, max_subspace, exhaustive,
            refine, tie_threshold, interaction_threshold, classes, grids, grid_resolution, ns, model,
            points
        );
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn check_source(&self) -> Result<()> {
        if self.input.is_some() && (self.function.is_some() || self.variables.is_some()) {
            bail!(usage("give either --input or a generated source (--function/--variables), not both"));
        }
        Ok(())
    }
}

/// A user error that is not a library error.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> Usage {
    Usage(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: RunConfig = serde_json::from_str(r#"{"n": 50, "seed": 3, "function": "coupled5"}"#).unwrap();
        let flags = RunConfig {
            n: Some(80),
            ..RunConfig::default()
        };
        let merged = file.overlay(&flags);
        assert_eq!(merged.n, Some(80));
        assert_eq!(merged.seed, Some(3));
        assert_eq!(merged.function.as_deref(), Some("coupled5"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"samples": 5}"#).is_err());
    }
}
