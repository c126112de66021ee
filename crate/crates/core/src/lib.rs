pub mod cli;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod quadrature;
pub mod stats;
pub mod special;

pub use error::{Error, Result};
