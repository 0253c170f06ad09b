use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{CaseStats, NewtonStats};
use crate::apc::PolyBasis;
use crate::basis::{Basis, BasisKind};
use crate::error::{Result, UqError};
use crate::maxent::MaxentBasis;
use crate::measure::EmpiricalMeasure;
use crate::surrogate::{build_surrogate_from_matrix, integrate, moments, time_grid, LinearStochasticOde, MomentSeries};

/// Either basis family behind one type.
#[derive(Debug, Clone)]
pub enum ExperimentBasis {
    Maxent(MaxentBasis<f64>),
    Apc(PolyBasis<f64>),
}

impl Basis<f64> for ExperimentBasis {
    fn len(&self) -> usize {
        match self {
            ExperimentBasis::Maxent(b) => b.len(),
            ExperimentBasis::Apc(b) => b.len(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            ExperimentBasis::Maxent(b) => b.dim(),
            ExperimentBasis::Apc(b) => b.dim(),
        }
    }

    fn kind(&self) -> BasisKind {
        match self {
            ExperimentBasis::Maxent(_) => BasisKind::Maxent,
            ExperimentBasis::Apc(_) => BasisKind::Apc,
        }
    }

    fn eval(&self, query: &[f64]) -> Result<DVector<f64>> {
        match self {
            ExperimentBasis::Maxent(b) => b.eval(query),
            ExperimentBasis::Apc(b) => b.eval(query),
        }
    }

    fn anchor(&self, index: usize) -> Option<Vec<f64>> {
        match self {
            ExperimentBasis::Maxent(b) => b.anchor(index),
            ExperimentBasis::Apc(b) => b.anchor(index),
        }
    }
}

/// Basis matrix of a maxent basis with the dual-solve iteration counts.
pub fn maxent_matrix(basis: &MaxentBasis<f64>, measure: &EmpiricalMeasure<f64>) -> Result<(DMatrix<f64>, NewtonStats)> {
    let evals: Vec<_> = (0..measure.len())
        .into_par_iter()
        .map(|j| {
            basis.evaluate(measure.point(j)).map_err(|e| UqError::Sample {
                index: j,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let phi = DMatrix::from_fn(evals.len(), basis.len(), |j, i| evals[j].psi[i]);
    let total: usize = evals.iter().map(|e| e.iterations).sum();
    let stats = NewtonStats {
        evaluations: evals.len(),
        max_iterations: evals.iter().map(|e| e.iterations).max().unwrap_or(0),
        mean_iterations: total as f64 / evals.len().max(1) as f64,
        max_residual: evals.iter().map(|e| e.residual_norm).fold(0.0, f64::max),
    };
    Ok((phi, stats))
}

/// Times at which moments are reported.
pub(crate) fn report_times(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let stride = config.report_stride();
    Ok(time_grid(0.0, config.t_end, config.step)?
        .into_iter()
        .step_by(stride)
        .collect())
}

/// Builds, integrates and reduces one surrogate; moments are reported
/// every `config.report_stride()` steps.
pub(crate) fn solve_case(
    ode: &LinearStochasticOde<f64>,
    basis: &ExperimentBasis,
    measure: &EmpiricalMeasure<f64>,
    config: &ExperimentConfig,
    label: String,
) -> Result<(MomentSeries<f64>, CaseStats)> {
    let (phi, newton) = match basis {
        ExperimentBasis::Maxent(b) => {
            let (phi, stats) = maxent_matrix(b, measure)?;
            (phi, Some(stats))
        }
        ExperimentBasis::Apc(b) => (measure.basis_matrix(b)?, None),
    };
    let surrogate = build_surrogate_from_matrix(ode, basis.kind(), &phi, measure)?;
    let trajectory = integrate(&surrogate, 0.0, config.t_end, config.step)?;
    let series = moments(&trajectory, &surrogate.stats, 1)?.every(config.report_stride());
    let stats = CaseStats {
        label,
        basis: basis.kind(),
        n_basis: basis.len(),
        n_samples: measure.len(),
        gram_condition: surrogate.condition,
        jitter: surrogate.jitter,
        newton,
        fit_residual: None,
        fit_rank_deficient: None,
    };
    Ok((series, stats))
}
