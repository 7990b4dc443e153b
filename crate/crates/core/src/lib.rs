//! Smartphone-sensing pipeline for inferring the social context of drinking
//! events: ingestion, slot aggregation, event matching, labeling, statistics,
//! learning and synthetic cohorts.

pub mod aggregate;
pub mod catalog;
pub mod error;
pub mod ingest;
pub mod labels;
pub mod learn;
pub mod manifest;
pub mod matching;
pub mod model;
pub mod night;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;
pub mod validate;

pub use error::{Error, Result};
