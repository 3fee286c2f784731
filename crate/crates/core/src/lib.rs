//! Object saliency ranking from eye-fixation data.
//!
//! The crate covers the whole flow: ground-truth rank generation from
//! fixations, proposal filtering and feature extraction, ranking over
//! circular windows with exclusive per-window classification, a small
//! trainable scorer, evaluation metrics and a seeded synthetic benchmark.

pub mod config;
pub mod domain;
pub mod error;
pub mod exec;
pub mod gtgen;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod rankcore;
pub mod scorer;
pub mod synth;

pub use domain::{BBox, FixationPoint, GrayMap, Proposal, Ranking, Scene};
pub use error::{Error, Result};
pub use exec::Execution;
