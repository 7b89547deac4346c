//! Failure-unit localization for online service systems.
//!
//! Given the failure dependency graph (FDG) of a system and a metric window
//! for every failure unit, a trained [`model::LocalizerModel`] ranks units by
//! how likely they are to be the faulty one. Historical failures train the
//! model; [`interpret`] explains it globally (surrogate decision rules) and
//! locally (similar historical failures). [`baselines`] and [`eval`] provide
//! the comparison methods and the evaluation harness.

pub mod autodiff;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod fdg;
pub mod interpret;
pub mod model;
pub mod ranking;
pub mod dataset;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

/// 64-bit instantiations used by the tools.
pub type Model = model::LocalizerModel<f64>;
pub type Tensor = autodiff::Tensor<f64>;
pub type ParamStore = autodiff::ParamStore<f64>;
pub type Adam = autodiff::Adam<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type Localizer = model::Localizer<f64>;
