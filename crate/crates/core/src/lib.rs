//! Churn scoring on relational customer data.
//!
//! The crate turns a star-schema dataset (one root table of customers plus
//! any number of event tables keyed back to it) into monthly churn scores:
//! temporal windowing and labeling, automatic construction of aggregate
//! features, MDL-based supervised discretization and value grouping, a
//! selective naive Bayes classifier with feature weighting, ranking-based
//! evaluation (AUC, lift, capture), per-customer score explanations, and
//! campaign list construction. A synthetic data generator with known
//! ground truth supports end-to-end validation.
//!
//! Everything is deterministic given a seed: training the same data with
//! the same configuration produces byte-identical model files. No internal
//! threading is used; all types are `Send + Sync` and callers may
//! parallelize across independent runs.

pub mod actionability;
pub mod classifier;
pub mod datagen;
pub mod evaluation;
pub mod featuregen;
pub mod month;
pub mod pipeline;
pub mod preprocess;
pub mod schema;
pub mod windowing;
