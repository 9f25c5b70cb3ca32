//! Country-year panel analysis: principal-component factor construction with
//! varimax rotation, pooled/fixed/random-effects estimation with robust
//! covariances, specification tests, and k-means clustering with elbow
//! diagnostics.

pub mod cluster;
pub mod diagnostics;
pub mod estimators;
pub mod factor;
pub mod layout;
pub mod linalg;
pub mod panel;
pub mod report;
pub mod svg;
pub mod synth;
