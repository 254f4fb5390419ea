//! Harvest TLS certificates, extract fraud-indicative certificate features,
//! and train and evaluate classifiers over them.

pub mod cert;
pub mod corpus;
pub mod features;
pub mod harvest;
pub mod ml;
pub mod par;
pub mod report;
pub mod synthgen;
