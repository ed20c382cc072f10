//! Dataset files, experiment drivers and the `droplab` command line on top
//! of `droplab-core`.

pub mod cli;
pub mod dataset;
pub mod experiments;
pub mod output;

pub use dataset::{load_dataset, save_dataset, DatasetError};
