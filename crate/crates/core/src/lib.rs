//! Two-stage treatment planning from orthodontic findings text.
//!
//! Step 1 extracts the set of orthodontic problems a certificate's findings
//! describe ([`classifier`]); step 2 orders those problems by treatment
//! priority ([`ranker`]). [`corpus`] holds the data model and a synthetic
//! corpus generator, [`features`] the text and label encodings, and
//! [`metrics`] the evaluation measures.

pub mod artifact;
pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod features;
pub mod metrics;
pub mod ranker;

pub use error::{Error, Result};
