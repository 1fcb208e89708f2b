//! Estimating how much a trained model reveals about whether a given record
//! was in its training set.
//!
//! The crate covers the whole loop: loading a record universe, training ridge
//! or small MLP models on random subsets, estimating per-record leakage with
//! Gaussian fits of the retrained parameters, running a threshold membership
//! attack, and calibrating Gaussian-mechanism noise against a privacy budget.

pub mod attack;
pub mod data;
pub mod error;
pub mod experiment;
pub mod leakage;
pub mod model;
pub mod privacy;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
