pub mod csv_io;
pub mod experiment;
pub mod report;
pub mod spec;

pub use experiment::{perturb_query, run_experiment, run_on_data, ExperimentConfig};
pub use report::{emit_report, emit_reports, ReportFormat};
pub use spec::{BaseExperiment, DirectionsSource, Experiment, Mechanism, ThetaSpec};
