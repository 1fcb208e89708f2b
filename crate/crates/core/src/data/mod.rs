//! Record universes: Adult ingestion, standardization and PCA, synthetic
//! generators, and uniform membership masks.

mod adult;
mod pca;
mod synthetic;
mod universe;

pub use adult::{load_adult_csv, parse_adult, AdultData, AdultSchema, ColumnKind};
pub use pca::{apply_pca, fit_pca, PcaOptions, PcaTransform};
pub use synthetic::{synthetic_universe, SyntheticSpec};
pub use universe::{sample_mask, DataUniverse, MembershipMask};

pub(crate) use universe::{check_subset_size, sample_excluding};
