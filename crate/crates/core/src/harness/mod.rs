//! Datasets, model submissions, experiment runs and reports.

mod commands;
mod dataset;
mod eval;
mod submission;

pub use commands::{
    cmd_eval, cmd_gen, cmd_report, cmd_rod, cmd_solve, rod_cases, CostSource, EvalArgs, GenArgs,
    RodArgs, RodCmdArgs, RodResult, SolveMethod, Written,
};
pub use dataset::{Dataset, Manifest, ManifestEntry, MANIFEST_FILE, REFERENCES_FILE};
pub use eval::{
    evaluate, merge_reports, percent, Construction, EvalOptions, ExperimentReport, LocalSearch,
    ReportRow,
};
pub use submission::{ModelOutput, ModelSubmission, ResolvedSubmission, SubmissionEntry};
