//! Flow-cytometry CLL screening pipeline: FCS parsing, fixed-width case
//! featurization, tree-ensemble classifiers, evaluation, and a synthetic
//! cohort generator.

pub mod cli;
pub mod eval;
pub mod fcs;
pub mod featurize;
pub mod models;
pub mod seeds;
pub mod synth;
