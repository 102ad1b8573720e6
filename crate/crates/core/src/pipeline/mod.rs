//! Feature selection, scaling, cross-validation, search, ensembles and evaluation.

mod curves;
mod ensemble;
mod folds;
mod run;
mod search;
mod select;

pub use curves::{
    average_curves, evaluate, pick_threshold, pr_curve, recall_grid, resample, soft_vote, AveragedCurve, Confusion, PrPoint, Scores,
    GRID_POINTS,
};
pub use ensemble::{
    distinct_final_estimators, meta_folds, stacked_oof, stacking_grid, stacking_search, voting_grid, voting_search, MetaFold,
    StackBase, StackingEntry, VotingEntry,
};
pub use folds::{split, stratified_kfold, validate_folds};
pub use run::{
    predict, predict_with, read_report, train, write_curve, EmbeddingReport, EnsembleModel, FoldSource, NestedFold, NestedReport, Prediction, RunOutput, RunReport,
    SavedPipeline, SearchRow, StackingReport, StackingRow, Summary, TrainConfig, VotingReport, VotingRow, ENSEMBLE_FORMAT,
    REPORT_FORMAT,
};
pub use search::{
    cross_validate, oof_scores, preprocess, random_search, score_oof, select_best, Candidate, CvResult, FittedPipeline, FoldResult,
    Preprocess, RfeParams, SearchConfig, SearchOutcome, Selection, RFE_KEEP, RFE_STEPS,
};
pub use select::{correlation_filter, pearson, prune_constant_duplicates, rfe, standard_scale, variance_select, Scaler};
