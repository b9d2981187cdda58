//! Multicalibration of confidence scores: metrics, calibrators and a
//! synthetic benchmark harness.

pub mod bench;
pub mod calibrate;
pub mod cli;
pub mod data;
pub mod error;
pub mod grouping;
pub mod io;
pub mod metrics;
pub mod scoring;
pub mod synthetic;

pub use data::{BinDescriptor, CalibratedModel, Comparator, Grid, GroupMatrix, Method, ScoredDataset};
pub use error::{Error, Result};
