use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, UqError};
use crate::measure::{EmpiricalMeasure, SampleGenerator};
use crate::scalar::csv_row;

/// Exact mean and variance of `x(t) = exp(-(1 + Δ) t / 2)`, `Δ ~ U[-1, 1]`.
pub fn analytic_moments_example1(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (1.0, 0.0);
    }
    let mean = -(-t).exp_m1() / t;
    if t < 1e-2 {
        // The closed form cancels catastrophically near zero.
        let c = [
            1.0 / 12.0,
            -1.0 / 12.0,
            17.0 / 360.0,
            -7.0 / 360.0,
            43.0 / 6720.0,
            -107.0 / 60480.0,
        ];
        let var = c.iter().rev().fold(0.0, |acc, ck| acc * t + ck) * t * t;
        return (mean, var);
    }
    let second = -(-2.0 * t).exp_m1() / (2.0 * t);
    (mean, second - mean * mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Analytic,
    MonteCarlo,
}

/// Sample moments of `exp(rate(Δ) t)` over `Δ ~ U[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloMoments {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Unbiased; zero when only one draw is available.
    pub variance: Vec<f64>,
    pub std_err_mean: Vec<f64>,
    pub std_err_variance: Vec<f64>,
    pub warning: Option<String>,
}

impl MonteCarloMoments {
    pub fn write_csv<W: std::io::Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "t,mean,variance,std_err_mean,std_err_variance")?;
        for k in 0..self.times.len() {
            let row = [
                self.times[k],
                self.mean[k],
                self.variance[k],
                self.std_err_mean[k],
                self.std_err_variance[k],
            ];
            writeln!(writer, "{}", csv_row(&row))?;
        }
        Ok(())
    }
}

/// Monte Carlo moments using the closed-form per-sample solution.
pub fn monte_carlo_reference<F>(
    rate: F,
    lo: f64,
    hi: f64,
    count: usize,
    times: &[f64],
    seed: u64,
) -> Result<MonteCarloMoments>
where
    F: Fn(f64) -> f64 + Sync,
{
    let draws = EmpiricalMeasure::<f64>::generate(SampleGenerator::UniformRandom { lo, hi, count, seed })?;
    let rates: Vec<f64> = draws.scalars().iter().map(|&d| rate(d)).collect();
    if let Some(j) = rates.iter().position(|r| !r.is_finite()) {
        return Err(UqError::Evaluation {
            index: j,
            detail: "rate is not finite".into(),
        });
    }
    let n = count as f64;
    let per_time: Vec<(f64, f64, f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let mean = rates.iter().map(|r| (r * t).exp()).sum::<f64>() / n;
            let (mut m2, mut m4) = (0.0, 0.0);
            for r in &rates {
                let d = (r * t).exp() - mean;
                let d2 = d * d;
                m2 += d2;
                m4 += d2 * d2;
            }
            if count < 2 {
                return (mean, 0.0, 0.0, 0.0);
            }
            let var = m2 / (n - 1.0);
            let pop = m2 / n;
            let se_var = ((m4 / n - pop * pop).max(0.0) / n).sqrt();
            (mean, var, (var / n).sqrt(), se_var)
        })
        .collect();
    Ok(MonteCarloMoments {
        times: times.to_vec(),
        mean: per_time.iter().map(|v| v.0).collect(),
        variance: per_time.iter().map(|v| v.1).collect(),
        std_err_mean: per_time.iter().map(|v| v.2).collect(),
        std_err_variance: per_time.iter().map(|v| v.3).collect(),
        warning: (count < 2).then(|| "a single Monte Carlo draw: variance reported as 0".to_string()),
    })
}
