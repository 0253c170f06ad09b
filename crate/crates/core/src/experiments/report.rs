use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::reference::ReferenceKind;
use crate::basis::BasisKind;
use crate::error::Result;
use crate::scalar::csv_row;
use crate::surrogate::{relative_error, MomentSeries};

/// Relative moment errors `|1 - estimate / reference|` over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub err_mean: Vec<f64>,
    pub err_var: Vec<f64>,
    pub reference: ReferenceKind,
}

impl ErrorSeries {
    pub fn new(series: &MomentSeries<f64>, mean_ref: &[f64], var_ref: &[f64], reference: ReferenceKind) -> Self {
        let mean = series.mean();
        let var = series.variance();
        Self {
            times: series.times.clone(),
            err_mean: mean.iter().zip(mean_ref).map(|(e, r)| relative_error(*e, *r)).collect(),
            err_var: var.iter().zip(var_ref).map(|(e, r)| relative_error(*e, *r)).collect(),
            reference,
        }
    }

    fn nearest(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }

    /// `(ε_μ, ε_σ²)` at the reported time closest to `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let k = self.nearest(t);
        (self.err_mean[k], self.err_var[k])
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "t,err_mean,err_variance")?;
        for k in 0..self.times.len() {
            writeln!(
                writer,
                "{}",
                csv_row(&[self.times[k], self.err_mean[k], self.err_var[k]])
            )?;
        }
        Ok(())
    }
}

/// Iteration counts of the maxent dual solves behind one basis matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonStats {
    pub evaluations: usize,
    pub max_iterations: usize,
    pub mean_iterations: f64,
    pub max_residual: f64,
}

impl NewtonStats {
    pub(crate) fn merge(&self, other: &Self) -> Self {
        let n = self.evaluations + other.evaluations;
        Self {
            evaluations: n,
            max_iterations: self.max_iterations.max(other.max_iterations),
            mean_iterations: (self.mean_iterations * self.evaluations as f64
                + other.mean_iterations * other.evaluations as f64)
                / n.max(1) as f64,
            max_residual: self.max_residual.max(other.max_residual),
        }
    }
}

/// Numerical diagnostics of one surrogate build.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStats {
    pub label: String,
    pub basis: BasisKind,
    pub n_basis: usize,
    pub n_samples: usize,
    pub gram_condition: f64,
    pub jitter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_rank_deficient: Option<bool>,
}

impl CaseStats {
    /// Worst-case summary of several builds sharing a label.
    pub(crate) fn merge_all(label: String, all: &[CaseStats]) -> Option<Self> {
        let first = all.first()?;
        let mut out = CaseStats { label, ..first.clone() };
        for s in &all[1..] {
            out.gram_condition = out.gram_condition.max(s.gram_condition);
            out.jitter = match (out.jitter, s.jitter) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
            out.newton = match (&out.newton, &s.newton) {
                (Some(a), Some(b)) => Some(a.merge(b)),
                (a, b) => a.clone().or(b.clone()),
            };
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JitterEvent {
    pub label: String,
    pub jitter: f64,
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub jitter_events: Vec<JitterEvent>,
    pub solver: Vec<CaseStats>,
    pub warnings: Vec<String>,
}

impl Meta {
    pub fn new(config: &ExperimentConfig, solver: Vec<CaseStats>, warnings: Vec<String>) -> Self {
        let jitter_events = solver
            .iter()
            .filter_map(|s| {
                s.jitter.map(|jitter| JitterEvent {
                    label: s.label.clone(),
                    jitter,
                })
            })
            .collect();
        Self {
            config: config.clone(),
            seed: config.seed,
            jitter_events,
            solver,
            warnings,
        }
    }
}

/// Named CSV documents plus metadata, written together into one directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub meta: Meta,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        let mut meta = serde_json::to_string_pretty(&self.meta)?;
        meta.push('\n');
        std::fs::write(dir.join("meta.json"), meta)?;
        Ok(())
    }
}

pub(crate) fn csv_string<F>(write: F) -> Result<String>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV writers emit UTF-8"))
}
