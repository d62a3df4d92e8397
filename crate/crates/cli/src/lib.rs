#![forbid(unsafe_code)]
//! Batch front door for the isometrize toolkit: load matrices and
//! representations from JSON, run the similarity analyses, and emit
//! text, CSV, or JSON reports with certificates.

pub mod inputs;
pub mod report;
pub mod run;
