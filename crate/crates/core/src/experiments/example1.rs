use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cases::{solve_case, ExperimentBasis};
use super::config::ExperimentConfig;
use super::reference::{analytic_moments_example1, ReferenceKind};
use super::report::{csv_string, CaseStats, ErrorSeries, Meta, RunOutput};
use crate::apc::build_orthonormal;
use crate::basis::BasisKind;
use crate::error::{Context, Result};
use crate::maxent::{MaxentBasis, NodeSet};
use crate::measure::{EmpiricalMeasure, SampleGenerator};
use crate::scalar::csv_row;
use crate::surrogate::{LinearStochasticOde, MomentSeries};

/// `a(Δ) = -(1 + Δ) / 2`, or the configured constant.
pub fn example1_ode(config: &ExperimentConfig) -> Result<LinearStochasticOde<f64>> {
    match config.constant_rate {
        Some(c) => LinearStochasticOde::scalar(move |_| c, 1.0, config.t_end, config.step),
        None => LinearStochasticOde::scalar(|p| -(1.0 + p[0]) / 2.0, 1.0, config.t_end, config.step),
    }
}

/// Maxent on `n_basis` uniform nodes in `[-1, 1]`, or aPC of degree
/// `n_basis - 1` on the samples.
pub fn example1_basis(
    kind: BasisKind,
    n_basis: usize,
    measure: &EmpiricalMeasure<f64>,
    beta: f64,
) -> Result<ExperimentBasis> {
    Ok(match kind {
        BasisKind::Maxent => ExperimentBasis::Maxent(MaxentBasis::new(NodeSet::uniform(-1.0, 1.0, n_basis)?, beta)?),
        BasisKind::Apc => ExperimentBasis::Apc(build_orthonormal(measure, n_basis - 1)?),
    })
}

fn example1_reference(config: &ExperimentConfig, times: &[f64]) -> (Vec<f64>, Vec<f64>) {
    match config.constant_rate {
        Some(c) => (times.iter().map(|t| (c * t).exp()).collect(), vec![0.0; times.len()]),
        None => times.iter().map(|&t| analytic_moments_example1(t)).unzip(),
    }
}

#[derive(Debug, Clone)]
pub struct Example1Case {
    pub kind: BasisKind,
    pub n_basis: usize,
    pub moments: MomentSeries<f64>,
    pub mean_ref: Vec<f64>,
    pub var_ref: Vec<f64>,
    pub errors: ErrorSeries,
    pub stats: CaseStats,
}

/// One Example-1 surrogate against the exact moments.
pub fn example1_case(
    config: &ExperimentConfig,
    kind: BasisKind,
    n_basis: usize,
    measure: &EmpiricalMeasure<f64>,
) -> Result<Example1Case> {
    let label = format!("{kind} n_B={n_basis} n_D={}", measure.len());
    let run = || -> Result<Example1Case> {
        let basis = example1_basis(kind, n_basis, measure, config.beta)?;
        let ode = example1_ode(config)?;
        let (moments, stats) = solve_case(&ode, &basis, measure, config, label.clone())?;
        let (mean_ref, var_ref) = example1_reference(config, &moments.times);
        let errors = ErrorSeries::new(&moments, &mean_ref, &var_ref, ReferenceKind::Analytic);
        Ok(Example1Case {
            kind,
            n_basis,
            moments,
            mean_ref,
            var_ref,
            errors,
            stats,
        })
    };
    run().context(|| format!("example 1 ({label})"))
}

pub fn example1_measure(n_samples: usize) -> Result<EmpiricalMeasure<f64>> {
    EmpiricalMeasure::generate(SampleGenerator::UniformGrid {
        lo: -1.0,
        hi: 1.0,
        count: n_samples,
    })
}

#[derive(Debug, Clone)]
pub struct Example1Report {
    pub cases: Vec<Example1Case>,
}

pub fn run_example1(config: &ExperimentConfig) -> Result<Example1Report> {
    config.validate()?;
    let measure = example1_measure(config.n_samples)?;
    let cases = config
        .basis
        .kinds()
        .into_iter()
        .map(|kind| example1_case(config, kind, config.basis_count(), &measure))
        .collect::<Result<_>>()?;
    Ok(Example1Report { cases })
}

impl Example1Report {
    pub fn case(&self, kind: BasisKind) -> Option<&Example1Case> {
        self.cases.iter().find(|c| c.kind == kind)
    }

    pub fn to_output(&self, config: &ExperimentConfig) -> Result<RunOutput> {
        let mut files = Vec::new();
        for c in &self.cases {
            let text = csv_string(|w| c.moments.write_csv(w, Some((&c.mean_ref, &c.var_ref))))?;
            files.push((format!("example1_{}.csv", c.kind), text));
        }
        let stats = self.cases.iter().map(|c| c.stats.clone()).collect();
        Ok(RunOutput {
            files,
            meta: Meta::new(config, stats, Vec::new()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub kind: BasisKind,
    pub n_basis: usize,
    pub err_mean: f64,
    pub err_var: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub stats: Vec<CaseStats>,
}

/// Errors at `config.error_time` for every `n_B` in `config.basis_list`.
pub fn convergence_sweep(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let measure = example1_measure(config.n_samples)?;
    let jobs: Vec<(BasisKind, usize)> = config
        .basis
        .kinds()
        .into_iter()
        .flat_map(|k| config.basis_list.iter().map(move |&n| (k, n)))
        .collect();
    let cases: Vec<Example1Case> = jobs
        .par_iter()
        .map(|&(kind, n)| example1_case(config, kind, n, &measure))
        .collect::<Result<_>>()?;
    let rows = cases
        .iter()
        .map(|c| {
            let (err_mean, err_var) = c.errors.at(config.error_time);
            ConvergenceRow {
                kind: c.kind,
                n_basis: c.n_basis,
                err_mean,
                err_var,
            }
        })
        .collect();
    Ok(ConvergenceReport {
        rows,
        stats: cases.into_iter().map(|c| c.stats).collect(),
    })
}

impl ConvergenceReport {
    pub fn series(&self, kind: BasisKind) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.kind == kind).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "basis,n_B,err_mean,err_var")?;
        for r in &self.rows {
            writeln!(writer, "{},{},{}", r.kind, r.n_basis, csv_row(&[r.err_mean, r.err_var]))?;
        }
        Ok(())
    }

    pub fn to_output(&self, config: &ExperimentConfig) -> Result<RunOutput> {
        let files = vec![("convergence.csv".to_string(), csv_string(|w| self.write_csv(w))?)];
        Ok(RunOutput {
            files,
            meta: Meta::new(config, self.stats.clone(), Vec::new()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub kind: BasisKind,
    pub n_samples: usize,
    pub mean_err_mean: f64,
    pub var_err_mean: f64,
    pub mean_err_var: f64,
    pub var_err_var: f64,
}

#[derive(Debug, Clone)]
pub struct SampleStudyReport {
    pub rows: Vec<SampleRow>,
    pub stats: Vec<CaseStats>,
}

fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Per-repeat seeds: one stream drawn from the base seed, consumed in
/// `(n_D, repeat)` order.
pub fn repeat_seeds(seed: u64, sizes: usize, repeats: usize) -> Vec<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sizes)
        .map(|_| (0..repeats).map(|_| rng.next_u64()).collect())
        .collect()
}

/// Errors at `config.error_time` over `config.repeats` random sample sets of
/// each size in `config.sample_list`, drawn uniformly from `[-1, 1]`.
pub fn sample_size_study(config: &ExperimentConfig) -> Result<SampleStudyReport> {
    config.validate()?;
    let seeds = repeat_seeds(config.seed, config.sample_list.len(), config.repeats);
    let n_basis = config.basis_count();
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    for kind in config.basis.kinds() {
        for (&n_samples, seeds) in config.sample_list.iter().zip(&seeds) {
            let outcomes: Vec<((f64, f64), CaseStats)> = seeds
                .par_iter()
                .map(|&seed| {
                    let gen = SampleGenerator::UniformRandom {
                        lo: -1.0,
                        hi: 1.0,
                        count: n_samples,
                        seed,
                    };
                    let measure = EmpiricalMeasure::generate(gen)?;
                    let case = example1_case(config, kind, n_basis, &measure)
                        .context(|| format!("sample study repeat with seed {seed}"))?;
                    Ok((case.errors.at(config.error_time), case.stats))
                })
                .collect::<Result<_>>()?;
            let err_mean: Vec<f64> = outcomes.iter().map(|o| o.0 .0).collect();
            let err_var: Vec<f64> = outcomes.iter().map(|o| o.0 .1).collect();
            let (mean_err_mean, var_err_mean) = mean_and_variance(&err_mean);
            let (mean_err_var, var_err_var) = mean_and_variance(&err_var);
            rows.push(SampleRow {
                kind,
                n_samples,
                mean_err_mean,
                var_err_mean,
                mean_err_var,
                var_err_var,
            });
            let all: Vec<CaseStats> = outcomes.into_iter().map(|o| o.1).collect();
            let label = format!("{kind} n_B={n_basis} n_D={n_samples} ({} repeats)", config.repeats);
            stats.extend(CaseStats::merge_all(label, &all));
        }
    }
    Ok(SampleStudyReport { rows, stats })
}

impl SampleStudyReport {
    pub fn series(&self, kind: BasisKind) -> Vec<&SampleRow> {
        self.rows.iter().filter(|r| r.kind == kind).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut writer: W, kind: BasisKind) -> Result<()> {
        writeln!(writer, "n_D,mean_err_mean,var_err_mean,mean_err_var,var_err_var")?;
        for r in self.series(kind) {
            let stats = [r.mean_err_mean, r.var_err_mean, r.mean_err_var, r.var_err_var];
            writeln!(writer, "{},{}", r.n_samples, csv_row(&stats))?;
        }
        Ok(())
    }

    pub fn to_output(&self, config: &ExperimentConfig) -> Result<RunOutput> {
        let mut files = Vec::new();
        for kind in config.basis.kinds() {
            files.push((
                format!("sample_study_{kind}.csv"),
                csv_string(|w| self.write_csv(w, kind))?,
            ));
        }
        Ok(RunOutput {
            files,
            meta: Meta::new(config, self.stats.clone(), Vec::new()),
        })
    }
}
