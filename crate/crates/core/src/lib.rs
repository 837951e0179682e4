pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod kolmogorov;
pub mod measure;
pub mod oracle;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
