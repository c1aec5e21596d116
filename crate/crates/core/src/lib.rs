//! Joint forecasting of skill demand and supply trends.
//!
//! The crate turns time-stamped, skill-tagged job descriptions and work
//! experiences into demand/supply share series and co-occurrence graphs
//! ([`corpus`]), labels next-step movements with equal-frequency trend
//! classes ([`labels`]), and learns a cross-view hierarchical graph model
//! with a gap-conditioned hyper-decoder ([`model`]) trained by [`train`].
//! [`synth`] generates planted synthetic markets for testing.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod fsutil;
pub mod labels;
pub mod model;
pub mod report;
pub mod synth;
pub mod tape;
pub mod train;

pub use error::{Error, Result};
