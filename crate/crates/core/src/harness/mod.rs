//! Experiment harness: limit problems with known solutions, coupled
//! scenarios, distance estimators and the `(k, p)` tables.

pub mod config;
pub mod estimators;
pub mod experiment;
pub mod reference;
pub mod report;

pub use config::ExperimentConfig;
pub use estimators::{distance_estimators, scenario_distances, DistanceReport, Estimate, ScenarioDistances};
pub use experiment::{stability_experiment, Cell, ConvergenceTable, ExperimentVerdict, Quantity, RowResult};
pub use reference::{reference_solution, Problem, ProblemId, Reference, ReferenceScenario, Scheme};
pub use report::{emit_report, summary_text, ReportFiles};
