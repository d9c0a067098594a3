//! Detection and categorization of violence depictions in historical text
//! corpora, with a human review loop.
//!
//! The pipeline runs in stages: [`ingest`] parses section-structured source
//! texts and aligns curated events to them, [`dataset`] builds held-out and
//! stratified splits and paraphrase-augmented training sets, [`models`]
//! trains and runs classifiers, [`eval`] scores them, and [`store`] keeps
//! predictions and reviewer verdicts for the review service.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod ingest;
pub mod llm;
pub mod models;
pub mod store;
pub mod text;

pub use error::{Error, Result};
