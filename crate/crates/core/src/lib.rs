//! Desk-scale laboratory for the chain from precision-limited mini-batch SGD
//! to linear combinations of random features.
//!
//! Modules mirror the stages of the chain:
//!
//! - [`domain`]: sign matrices, dyadic distributions, concept-class generators
//! - [`sqdim`]: statistical query dimension and the SQ query lower bound
//! - [`comm`]: discrepancy, 2-bit protocols, the 2-party norm `R₂`
//! - [`features`]: the `Predict` weak learner and its derandomized features
//! - [`boost`]: AdaBoost over random features and the adc estimator
//! - [`bsgd`]: clipped, rounded mini-batch SGD and its SQ simulation
//! - [`pipeline`]: named end-to-end experiments
//! - [`persistence`]: canonical JSON envelopes with content hashes

pub mod dyadic;
pub mod domain;
pub mod error;
pub mod seeds;
pub mod sqdim;
pub mod comm;
pub mod features;
pub mod boost;
pub mod bsgd;
pub mod pipeline;
pub mod persistence;

pub use dyadic::Dyadic;
pub use domain::{DyadicDistribution, LabeledSample, SignMatrix, SourceDistribution};
pub use error::{LabError, Result};
