//! Executable checks of the analytical results about random dropping:
//! sample variance, the regularization identity, information diversity,
//! message entropy and MADGap.

mod diversity;
mod entropy;
mod madgap;
mod regularization;
mod variance;

pub use diversity::{diversity_expectation_check, feature_diversity, topology_diversity, DiversityCheck};
pub use entropy::{entropy_clean, entropy_expected, entropy_ordering_scan, EntropyInputs, EntropyRow};
pub use madgap::{cosine_distance, madgap};
pub use regularization::{regularization_check, RegCheckReport, VarSource};
pub use variance::{variance_closed_form, variance_monte_carlo, VarianceReport};
