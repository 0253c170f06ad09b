use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::BasisKind;
use crate::error::{Result, UqError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Example1,
    Example2,
    Convergence,
    SampleStudy,
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentId::Example1 => "example1",
            ExperimentId::Example2 => "example2",
            ExperimentId::Convergence => "convergence",
            ExperimentId::SampleStudy => "sample-study",
        })
    }
}

/// Which bases an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisChoice {
    Maxent,
    Apc,
    Both,
}

impl BasisChoice {
    pub fn kinds(self) -> Vec<BasisKind> {
        match self {
            BasisChoice::Maxent => vec![BasisKind::Maxent],
            BasisChoice::Apc => vec![BasisKind::Apc],
            BasisChoice::Both => vec![BasisKind::Maxent, BasisKind::Apc],
        }
    }
}

impl std::str::FromStr for BasisChoice {
    type Err = UqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "maxent" => Ok(BasisChoice::Maxent),
            "apc" => Ok(BasisChoice::Apc),
            "both" => Ok(BasisChoice::Both),
            other => Err(UqError::InvalidInput(format!(
                "unknown basis '{other}' (expected maxent, apc or both)"
            ))),
        }
    }
}

/// Settings shared by all experiments. Unset fields in a JSON file take
/// the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub basis: BasisChoice,
    /// `n_B`; `None` picks the experiment default (8, 10, 5 for example 1,
    /// example 2 and the sample study).
    pub n_basis: Option<usize>,
    /// `n_D`.
    pub n_samples: usize,
    /// `n_D′` for example 2; defaults to `n_B`.
    pub n_labeled: Option<usize>,
    /// Gaussian prior sharpness for maxent.
    pub beta: f64,
    pub t_end: f64,
    pub step: f64,
    /// Spacing of the reported moment and error series.
    pub report_every: f64,
    /// Time at which sweeps read off errors.
    pub error_time: f64,
    pub seed: u64,
    pub repeats: usize,
    pub monte_carlo_samples: usize,
    pub basis_list: Vec<usize>,
    pub sample_list: Vec<usize>,
    /// Example 2: use the true coefficient function in the surrogate
    /// instead of the fitted one.
    pub oracle: bool,
    /// Example 1: replace the random rate by this constant.
    pub constant_rate: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentId::Example1,
            basis: BasisChoice::Both,
            n_basis: None,
            n_samples: 500,
            n_labeled: None,
            beta: 0.0,
            t_end: 30.0,
            step: 0.01,
            report_every: 0.1,
            error_time: 10.0,
            seed: 1,
            repeats: 100,
            monte_carlo_samples: 50_000,
            basis_list: vec![2, 3, 4, 5, 6, 7, 8, 9],
            sample_list: vec![50, 100, 200, 400],
            oracle: false,
            constant_rate: None,
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: ExperimentId) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn basis_count(&self) -> usize {
        self.n_basis.unwrap_or(match self.experiment {
            ExperimentId::Example1 | ExperimentId::Convergence => 8,
            ExperimentId::Example2 => 10,
            ExperimentId::SampleStudy => 5,
        })
    }

    pub fn labeled_count(&self) -> usize {
        self.n_labeled.unwrap_or_else(|| self.basis_count())
    }

    /// Number of integrator steps between reported points.
    pub fn report_stride(&self) -> usize {
        ((self.report_every / self.step).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(UqError::InvalidInput(msg));
        if self.basis_count() < 2 {
            return bad("n_basis must be at least 2".into());
        }
        if self.n_samples == 0 || self.repeats == 0 || self.monte_carlo_samples == 0 {
            return bad("n_samples, repeats and monte_carlo_samples must be positive".into());
        }
        if !(self.step > 0.0 && self.t_end > 0.0 && self.report_every > 0.0)
            || !self.step.is_finite()
            || !self.t_end.is_finite()
        {
            return bad("step, t_end and report_every must be positive and finite".into());
        }
        if !(self.error_time >= 0.0 && self.error_time <= self.t_end) {
            return bad(format!(
                "error_time {} lies outside [0, {}]",
                self.error_time, self.t_end
            ));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad("beta must be finite and non-negative".into());
        }
        if self.experiment == ExperimentId::Example2 && self.labeled_count() != self.basis_count() {
            return bad(format!(
                "example2 needs n_labeled = n_basis (got {} and {})",
                self.labeled_count(),
                self.basis_count()
            ));
        }
        if self.basis_list.iter().any(|&k| k < 2) || self.sample_list.contains(&0) {
            return bad("sweep lists must hold n_basis >= 2 and n_samples >= 1".into());
        }
        if let Some(c) = self.constant_rate {
            if !c.is_finite() {
                return bad("constant_rate must be finite".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "sample-study", "repeats": 7}"#).unwrap();
        assert_eq!(cfg.experiment, ExperimentId::SampleStudy);
        assert_eq!(cfg.repeats, 7);
        assert_eq!(cfg.n_samples, 500);
        assert_eq!(cfg.basis_count(), 5);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::for_experiment(ExperimentId::Example2);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.basis_count(), 10);
        cfg.n_labeled = Some(12);
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            step: 0.0,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(ExperimentConfig::default().report_stride(), 10);
    }
}
