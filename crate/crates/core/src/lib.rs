//! Sampling, surrogate models and variance-based sensitivity for
//! Metamodel of Optimal Prognosis (MOP) studies.
//!
//! A typical run draws a [`sampling::SampleSet`], attaches responses, and
//! hands it to [`mop::mop_search`], which scores polynomial and Moving Least
//! Squares models on nested variable subspaces by their cross-validated
//! Coefficient of Prognosis and returns the best one together with per-input
//! Sobol attributions. [`kriging`] is available as a standalone model.
//!
//! Heavy loops go through [`par`], which uses rayon when the `parallel`
//! feature is on (the default) and plain iterators otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod kriging;
pub mod mls;
pub mod mop;
pub mod par;
pub mod quality;
pub mod regression;
pub mod sampling;
pub mod sobol;
pub mod stats;
pub mod surrogate;
pub mod testfuncs;
