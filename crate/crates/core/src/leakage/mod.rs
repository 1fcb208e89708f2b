//! Monte-Carlo estimation of membership leakage.
//!
//! For each probe record the model is retrained many times with the record
//! forced into the training set and with it held out. Both parameter clouds
//! are approximated by Gaussians; the leakage of the record is the symmetric
//! KL divergence between the two fits, and the mixture of the fits gives an
//! estimate of the mutual information with the membership bit.

mod estimate;
mod gaussian;
mod mixture;
mod tv;

pub use estimate::{
    aggregate_leakage, conditional_training_set, estimate_leakage, parse_record_logs, probe_set,
    record_fits, record_kl_leakage, sample_conditional_params, Condition, LeakageConfig,
    LeakageEstimate, RecordFits, RecordLeakage,
};
pub use gaussian::{covariance_ridge, fit_gaussian, fit_gaussian_vectors, kl_gaussian, GaussianFit};
pub use mixture::{mi_mixture_estimate, MixtureMi};
pub use tv::{tv_gaussian_1d, Normal1d};
