//! Uncertainty quantification for neural-network surrogate models.
//!
//! Three ways to attach an uncertainty to a dense network's prediction:
//!
//! * [`mcd`] — Monte Carlo dropout: the spread of repeated dropout-masked forward passes.
//! * [`ensemble`] — deep ensembles of Gaussian-head networks, combined as a mixture.
//! * [`bnn`] — mean-field variational Bayesian networks (Bayes by Backprop).
//!
//! [`pca`] reduces curve-valued simulator outputs to a few principal-component scores and
//! maps score uncertainty back to the curves. [`data`] holds experiment designs, dataset
//! handling and the synthetic problems used for testing.

pub mod artifact;
pub mod bnn;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod mcd;
pub mod net;
pub mod objectives;
pub mod pca;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use mcd::{Method, PredictiveDistribution};
