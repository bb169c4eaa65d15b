//! Detection of inappropriate toddler-targeted videos and audits of the
//! recommendation graphs that surface them.
//!
//! The crate covers the whole pipeline:
//!
//! * [`ingestion`] - seed collection, snowball crawling through
//!   recommendations, and availability audits against a pluggable
//!   [`ingestion::MetadataProvider`];
//! * [`annotation`] - task serving, majority aggregation and Fleiss' κ;
//! * [`features`] - text encodings, thumbnail embeddings, style features and
//!   descriptive reports;
//! * [`classifier`] - the four-branch fusion network, trained with Adam;
//! * [`evaluation`] - stratified folds, SMOTE, metrics, baselines and the
//!   feature ablation;
//! * [`graph`] - prevalence and class-transition counts on the
//!   recommendation graph;
//! * [`walker`] - keyword-seeded random walks and per-hop reports.

pub mod annotation;
pub mod classifier;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod graph;
pub mod ingestion;
pub mod io;
pub mod model;
pub mod nn;
pub mod run;
pub mod synthetic;
pub mod walker;

pub use error::{Error, Result};
pub use model::{
    collapse_label, merge_datasets, validate_record, AnnotationRecord, Availability, BinaryLabel, Dataset, Edge,
    GroundTruthEntry, Label, Strategy, Verdict, VideoRecord, Violation,
};
