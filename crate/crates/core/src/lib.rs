//! Local discriminant bases on wavelet-packet dictionaries.
//!
//! The pipeline: analyze labeled signals in a coiflet wavelet-packet
//! dictionary ([`wavelet`]), score every dictionary coordinate with a
//! discrimination measure ([`measures`]), pick the best basis and its top-`K`
//! coordinates ([`best_basis`]), and grow a dyadic-cube oracle classifier in
//! those feature spaces ([`dcsa`]). Oracles are combined by weighted majority
//! ([`classify`]); [`datagen`] and [`experiment`] reproduce the synthetic
//! benchmarks end to end.

pub mod best_basis;
pub mod classify;
pub mod datagen;
pub mod dataset;
pub mod dcsa;
pub mod error;
pub mod experiment;
pub mod measures;
pub mod par;
pub mod wavelet;

pub use best_basis::{best_basis, project, top_k_features, Basis, Feature, FeatureSpace};
pub use classify::{
    classify_ensemble, classify_sample, make_one_vs_rest, score_dataset, train_ensemble,
    EnsembleSpec, Prediction, ScoreReport, Vote,
};
pub use datagen::{gen_experiment, Example, RngSpec, SplitSizes};
pub use dataset::Dataset;
pub use dcsa::{run_dcsa, training_trace, ClassName, DcsaParams, DyadicCube, Mode, Oracle};
pub use error::{Error, Result};
pub use experiment::{
    emit_report, run_experiment, ExperimentConfig, Method, ReportFormat, ResultTable,
};
pub use measures::{score_table, Measure, MeasureKind, ScoreTable, VarianceEstimator};
pub use wavelet::{build_filter, wpt_analyze, CoefficientTree, DictionaryConfig, NodeId, QmfPair};
