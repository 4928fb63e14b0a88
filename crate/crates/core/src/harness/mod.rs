//! Convergence studies of the benchmark cases against closed-form
//! solutions, with rate fitting and machine-readable reports.

mod analytic;
mod case;
mod report;

pub use analytic::{
    AnalyticCase, ScalarFn, TensorFn, VectorFn, WssTraceFn, PIPE_LENGTH, PIPE_MAX_VELOCITY, PIPE_RADIUS,
    PIPE_VISCOSITY,
};
pub use case::{
    build_problem, compute_wss, default_levels, level_mesh, ns_config, run_level, run_on_mesh, CaseKind, CaseSpec,
    LevelMesh, LevelResult, NsLevel, Overrides, WssLevel, ERROR_NORM_DEGREE,
};
pub use report::{
    emit_report, fit_rate, report_csv, run_convergence, run_convergence_partial, ConvergenceReport, LevelFailure,
    RateFit, ReportFormat,
};
