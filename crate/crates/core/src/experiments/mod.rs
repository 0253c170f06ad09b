//! Reproducible studies on the two scalar model problems, with CSV output.
//!
//! Example 1 propagates `ẋ = a(Δ) x`, `a = -(1 + Δ)/2`, `Δ ~ U[-1, 1]`, and
//! compares with the exact moments. Example 2 only knows `a` at a few
//! points, fits it in the chosen basis and propagates `ẋ = -â(Δ) x` for
//! `Δ ~ U(0, 1)` against a Monte Carlo reference.

mod cases;
mod config;
mod example1;
mod example2;
mod reference;
mod report;

pub use cases::{maxent_matrix, ExperimentBasis};
pub use config::{BasisChoice, ExperimentConfig, ExperimentId};
pub use example1::{
    convergence_sweep, example1_basis, example1_case, example1_measure, example1_ode, repeat_seeds, run_example1,
    sample_size_study, ConvergenceReport, ConvergenceRow, Example1Case, Example1Report, SampleRow, SampleStudyReport,
};
pub use example2::{example2_coefficient, example2_nodes, run_example2, Example2Case, Example2Report};
pub use reference::{analytic_moments_example1, monte_carlo_reference, MonteCarloMoments, ReferenceKind};
pub use report::{CaseStats, ErrorSeries, JitterEvent, Meta, NewtonStats, RunOutput};

use crate::error::Result;

/// Runs the experiment selected by `config.experiment`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    match config.experiment {
        ExperimentId::Example1 => run_example1(config)?.to_output(config),
        ExperimentId::Example2 => run_example2(config)?.to_output(config),
        ExperimentId::Convergence => convergence_sweep(config)?.to_output(config),
        ExperimentId::SampleStudy => sample_size_study(config)?.to_output(config),
    }
}
