use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::cases::{report_times, solve_case, ExperimentBasis};
use super::config::ExperimentConfig;
use super::reference::{monte_carlo_reference, MonteCarloMoments, ReferenceKind};
use super::report::{csv_string, CaseStats, ErrorSeries, Meta, RunOutput};
use crate::apc::build_orthonormal;
use crate::approx::{fit_least_squares, normalized_error, Approximant, ErrorProfile, LabeledSet};
use crate::basis::BasisKind;
use crate::error::{Context, Result};
use crate::maxent::{MaxentBasis, NodeSet};
use crate::measure::{EmpiricalMeasure, SampleGenerator};
use crate::scalar::csv_row;
use crate::surrogate::{InitialCondition, LinearStochasticOde, MomentSeries, SystemMap};

/// `a(Δ) = Δ^(α-1) (1-Δ)^(γ-1)` with `α = 2`, `γ = 1/2`.
pub fn example2_coefficient(delta: f64) -> f64 {
    delta / (1.0 - delta).sqrt()
}

/// Labeled points: `count` uniformly spaced values spanning the sample grid
/// `j / (n_samples + 1)`, so every sample lies in their hull.
pub fn example2_nodes(count: usize, n_samples: usize) -> Vec<f64> {
    let lo = 1.0 / (n_samples as f64 + 1.0);
    let hi = n_samples as f64 / (n_samples as f64 + 1.0);
    (0..count)
        .map(|k| {
            if k + 1 == count {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (count - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Example2Case {
    pub kind: BasisKind,
    pub fit: Approximant<f64, ExperimentBasis>,
    pub fit_error: ErrorProfile<f64>,
    pub moments: MomentSeries<f64>,
    pub errors: ErrorSeries,
    pub stats: CaseStats,
}

#[derive(Debug, Clone)]
pub struct Example2Report {
    pub cases: Vec<Example2Case>,
    pub reference: MonteCarloMoments,
    pub warnings: Vec<String>,
}

/// Fits `a` from its values at the labeled nodes, then propagates
/// `ẋ = -â(Δ) x`, `x(0) = 1`, and compares with Monte Carlo on the true `a`.
pub fn run_example2(config: &ExperimentConfig) -> Result<Example2Report> {
    config.validate()?;
    let n_samples = config.n_samples;
    let measure = EmpiricalMeasure::generate(SampleGenerator::InteriorGrid {
        lo: 0.0,
        hi: 1.0,
        count: n_samples,
    })?;
    let nodes = example2_nodes(config.labeled_count(), n_samples);
    let labeled = LabeledSet::from_fn(EmpiricalMeasure::from_scalars(&nodes)?, |p| example2_coefficient(p[0]))?;

    let reference = monte_carlo_reference(
        |d| -example2_coefficient(d),
        0.0,
        1.0,
        config.monte_carlo_samples,
        &report_times(config)?,
        config.seed,
    )?;

    let mut cases = Vec::new();
    for kind in config.basis.kinds() {
        let label = format!("{kind} n_B={} n_D={n_samples}", nodes.len());
        let case = example2_case(config, kind, &nodes, &labeled, &measure, &reference, label.clone())
            .context(|| format!("example 2 ({label})"))?;
        cases.push(case);
    }
    let mut warnings: Vec<String> = reference.warning.iter().cloned().collect();
    for case in &cases {
        if case.fit.rank_deficient {
            warnings.push(format!(
                "{} fit is rank deficient; least-norm coefficients used",
                case.kind
            ));
        }
    }
    Ok(Example2Report {
        cases,
        reference,
        warnings,
    })
}

fn example2_case(
    config: &ExperimentConfig,
    kind: BasisKind,
    nodes: &[f64],
    labeled: &LabeledSet<f64>,
    measure: &EmpiricalMeasure<f64>,
    reference: &MonteCarloMoments,
    label: String,
) -> Result<Example2Case> {
    let basis = match kind {
        BasisKind::Maxent => ExperimentBasis::Maxent(MaxentBasis::new(NodeSet::from_scalars(nodes)?, config.beta)?),
        BasisKind::Apc => ExperimentBasis::Apc(build_orthonormal(measure, nodes.len() - 1)?),
    };
    let fit = fit_least_squares(basis.clone(), labeled)?;
    let fit_error = normalized_error(&fit, |p| example2_coefficient(p[0]), measure)?;

    let system: SystemMap<f64> = if config.oracle {
        Arc::new(|p: &[f64]| Ok(DMatrix::from_element(1, 1, -example2_coefficient(p[0]))))
    } else {
        let fitted = Arc::new(fit.clone());
        Arc::new(move |p: &[f64]| Ok(DMatrix::from_element(1, 1, -fitted.eval(p)?)))
    };
    let ode = LinearStochasticOde::new(
        1,
        system,
        InitialCondition::Deterministic(DVector::from_element(1, 1.0)),
        0.0,
        config.t_end,
        config.step,
    )?;
    let (moments, mut stats) = solve_case(&ode, &basis, measure, config, label)?;
    stats.fit_residual = Some(fit.residual_norm);
    stats.fit_rank_deficient = Some(fit.rank_deficient);
    let errors = ErrorSeries::new(
        &moments,
        &reference.mean,
        &reference.variance,
        ReferenceKind::MonteCarlo,
    );
    Ok(Example2Case {
        kind,
        fit,
        fit_error,
        moments,
        errors,
        stats,
    })
}

impl Example2Report {
    pub fn case(&self, kind: BasisKind) -> Option<&Example2Case> {
        self.cases.iter().find(|c| c.kind == kind)
    }

    /// `delta,a,err_<kind>...` on the sample grid.
    pub fn write_function_error<W: std::io::Write>(&self, mut writer: W) -> Result<()> {
        let Some(first) = self.cases.first() else { return Ok(()) };
        let names: Vec<String> = self.cases.iter().map(|c| format!("err_{}", c.kind)).collect();
        writeln!(writer, "delta,a,{}", names.join(","))?;
        for (j, p) in first.fit_error.points.iter().enumerate() {
            let mut row = vec![p[0], example2_coefficient(p[0])];
            row.extend(self.cases.iter().map(|c| c.fit_error.errors[j]));
            writeln!(writer, "{}", csv_row(&row))?;
        }
        Ok(())
    }

    pub fn to_output(&self, config: &ExperimentConfig) -> Result<RunOutput> {
        let mut files = Vec::new();
        for c in &self.cases {
            let refs = Some((self.reference.mean.as_slice(), self.reference.variance.as_slice()));
            files.push((
                format!("example2_{}.csv", c.kind),
                csv_string(|w| c.moments.write_csv(w, refs))?,
            ));
            files.push((
                format!("example2_{}_coefficients.csv", c.kind),
                csv_string(|w| c.fit.write_csv(w))?,
            ));
        }
        files.push((
            "example2_function_error.csv".into(),
            csv_string(|w| self.write_function_error(w))?,
        ));
        files.push((
            "example2_reference.csv".into(),
            csv_string(|w| self.reference.write_csv(w))?,
        ));
        let stats = self.cases.iter().map(|c| c.stats.clone()).collect();
        Ok(RunOutput {
            files,
            meta: Meta::new(config, stats, self.warnings.clone()),
        })
    }
}
