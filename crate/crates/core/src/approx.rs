//! Least-squares approximation of a coefficient function from labeled samples.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::basis::{Basis, BasisKind};
use crate::error::{Result, UqError};
use crate::measure::EmpiricalMeasure;
use crate::scalar::{csv_row, fmt_f64, from_usize, Real};

/// Sample points `Δ_j` with known values `a_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet<T: Real> {
    inputs: EmpiricalMeasure<T>,
    values: Vec<T>,
}

impl<T: Real> LabeledSet<T> {
    pub fn new(inputs: EmpiricalMeasure<T>, values: Vec<T>) -> Result<Self> {
        if inputs.len() != values.len() {
            return Err(UqError::InvalidInput(format!(
                "{} inputs but {} values",
                inputs.len(),
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(UqError::InvalidInput(format!("value {j} is not finite")));
        }
        Ok(Self { inputs, values })
    }

    /// Labels `f(Δ_j)` for each point.
    pub fn from_fn<F: Fn(&[T]) -> T>(inputs: EmpiricalMeasure<T>, f: F) -> Result<Self> {
        let values = inputs.iter().map(f).collect();
        Self::new(inputs, values)
    }

    pub fn inputs(&self) -> &EmpiricalMeasure<T> {
        &self.inputs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `â(Δ) = Σ c_i φ_i(Δ)`.
#[derive(Debug, Clone)]
pub struct Approximant<T: Real, B> {
    pub basis: B,
    pub coefficients: DVector<T>,
    /// `‖Φc - a‖₂` on the fitted data.
    pub residual_norm: T,
    /// Set when the design matrix lacked full column rank and the
    /// least-norm solution was returned.
    pub rank_deficient: bool,
}

/// Fits `c` minimising `Σ_j (a_j - Σ_i c_i φ_i(Δ_j))²`.
pub fn fit_least_squares<T: Real, B: Basis<T>>(basis: B, data: &LabeledSet<T>) -> Result<Approximant<T, B>> {
    let design = data.inputs().basis_matrix(&basis)?;
    let rhs = DVector::from_column_slice(data.values());
    let (coefficients, rank_deficient) = solve_least_squares(&design, &rhs)?;
    let residual_norm = (&design * &coefficients - &rhs).norm();
    Ok(Approximant {
        basis,
        coefficients,
        residual_norm,
        rank_deficient,
    })
}

fn solve_least_squares<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> Result<(DVector<T>, bool)> {
    let (rows, cols) = a.shape();
    let tol = from_usize::<T>(rows.max(cols)) * T::EPSILON;
    if rows >= cols {
        let qr = a.clone().qr();
        let r = qr.r();
        let scale = r.diagonal().iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let full_rank = scale > T::zero() && r.diagonal().iter().all(|v| v.abs() > tol * scale);
        if full_rank {
            let qtb = qr.q().transpose() * b;
            if let Some(c) = r.solve_upper_triangular(&qtb) {
                return Ok((c, false));
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let cutoff = tol * svd.singular_values.max();
    let c = svd.solve(b, cutoff).map_err(|e| UqError::InvalidInput(e.to_string()))?;
    Ok((c, true))
}

impl<T: Real, B: Basis<T>> Approximant<T, B> {
    pub fn kind(&self) -> BasisKind {
        self.basis.kind()
    }

    /// `Σ c_i φ_i(query)`.
    pub fn eval(&self, query: &[T]) -> Result<T> {
        Ok(self.basis.eval(query)?.dot(&self.coefficients))
    }

    /// CSV of the coefficients: node/coefficient pairs when the basis
    /// functions have anchor nodes, `k,coefficient` rows otherwise.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        let anchored = (0..self.basis.len()).all(|i| self.basis.anchor(i).is_some());
        if anchored {
            let d = self.basis.dim();
            let header: Vec<String> = if d == 1 {
                vec!["node".into()]
            } else {
                (0..d).map(|k| format!("node{k}")).collect()
            };
            writeln!(writer, "{},coefficient", header.join(","))?;
            for (i, c) in self.coefficients.iter().enumerate() {
                let node = self.basis.anchor(i).expect("checked above");
                let mut row: Vec<f64> = node.iter().map(|v| v.as_f64()).collect();
                row.push(c.as_f64());
                writeln!(writer, "{}", csv_row(&row))?;
            }
        } else {
            writeln!(writer, "k,coefficient")?;
            for (k, c) in self.coefficients.iter().enumerate() {
                writeln!(writer, "{k},{}", fmt_f64(c.as_f64()))?;
            }
        }
        Ok(())
    }
}

/// Pointwise approximation error on an evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile<T: Real> {
    pub points: Vec<Vec<T>>,
    /// `|â(Δ) - a(Δ)| / max_grid |a|`.
    pub errors: Vec<T>,
    pub scale: T,
    pub rms: T,
}

impl<T: Real> ErrorProfile<T> {
    /// `delta,error` rows (first coordinate of each point).
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "delta,error")?;
        for (p, e) in self.points.iter().zip(&self.errors) {
            writeln!(writer, "{}", csv_row(&[p[0].as_f64(), e.as_f64()]))?;
        }
        Ok(())
    }
}

/// Error of `approx` against `truth` on `grid`, normalised by the largest
/// magnitude of `truth` there.
pub fn normalized_error<T, B, F>(
    approx: &Approximant<T, B>,
    truth: F,
    grid: &EmpiricalMeasure<T>,
) -> Result<ErrorProfile<T>>
where
    T: Real,
    B: Basis<T>,
    F: Fn(&[T]) -> T,
{
    let exact: Vec<T> = grid.iter().map(&truth).collect();
    if let Some(j) = exact.iter().position(|v| !v.is_finite()) {
        return Err(UqError::Evaluation {
            index: j,
            detail: "reference function is not finite".into(),
        });
    }
    let scale = exact.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return Err(UqError::DivisionGuard(
            "reference function vanishes on the whole grid".into(),
        ));
    }
    let mut errors = Vec::with_capacity(grid.len());
    for (j, (p, a)) in grid.iter().zip(&exact).enumerate() {
        let value = approx.eval(p).map_err(|e| UqError::Sample {
            index: j,
            source: Box::new(e),
        })?;
        errors.push((value - *a).abs() / scale);
    }
    let mean_sq = errors.iter().fold(T::zero(), |s, e| s + *e * *e) / from_usize::<T>(errors.len());
    Ok(ErrorProfile {
        points: grid.iter().map(<[T]>::to_vec).collect(),
        errors,
        scale,
        rms: mean_sq.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apc::build_orthonormal;
    use crate::maxent::{MaxentBasis, NodeSet};
    use crate::measure::SampleGenerator;

    fn interior(count: usize) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::generate(SampleGenerator::InteriorGrid {
            lo: 0.0,
            hi: 1.0,
            count,
        })
        .unwrap()
    }

    fn example2(d: f64) -> f64 {
        d / (1.0 - d).sqrt()
    }

    #[test]
    fn square_maxent_design_interpolates() {
        let nodes = [0.2f64, 0.5, 0.8];
        let labels = vec![1.0, -2.0, 0.5];
        let data = LabeledSet::new(EmpiricalMeasure::from_scalars(&nodes).unwrap(), labels.clone()).unwrap();
        let basis = MaxentBasis::new(NodeSet::from_scalars(&nodes).unwrap(), 0.0).unwrap();
        let fit = fit_least_squares(&basis, &data).unwrap();
        assert!(fit.residual_norm < 1e-12);
        assert!(!fit.rank_deficient);
        for (x, a) in nodes.iter().zip(&labels) {
            assert!((fit.eval(&[*x]).unwrap() - a).abs() < 1e-12);
        }
        // With a strongly localised prior the basis is nearly cardinal and
        // the coefficients approach the labels.
        let sharp = MaxentBasis::new(NodeSet::from_scalars(&nodes).unwrap(), 200.0).unwrap();
        let fit = fit_least_squares(&sharp, &data).unwrap();
        let gap = (fit.coefficients - DVector::from_vec(labels)).abs().max();
        assert!(gap < 1e-2, "{gap}");
    }

    #[test]
    fn affine_function_in_polynomial_span() {
        let m = interior(50);
        let data = LabeledSet::from_fn(m.clone(), |p| 2.0 * p[0] + 1.0).unwrap();
        let poly = build_orthonormal(&m, 1).unwrap();
        let fit = fit_least_squares(&poly, &data).unwrap();
        assert!(fit.residual_norm <= 1e-10);
        for x in [0.1, 0.37, 0.9] {
            assert!((fit.eval(&[x]).unwrap() - (2.0 * x + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn maxent_reproduces_affine_functions() {
        let nodes = NodeSet::uniform(0.0, 1.0, 6).unwrap();
        let data = LabeledSet::from_fn(
            EmpiricalMeasure::from_scalars(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]).unwrap(),
            |p| 3.0 - 2.0 * p[0],
        )
        .unwrap();
        let fit = fit_least_squares(MaxentBasis::new(nodes, 0.0).unwrap(), &data).unwrap();
        let profile = normalized_error(&fit, |p| 3.0 - 2.0 * p[0], &interior(200)).unwrap();
        assert!(profile.errors.iter().all(|e| *e <= 1e-8));
    }

    #[test]
    fn maxent_beats_polynomial_on_example_two() {
        let b: Vec<f64> = (1..=10)
            .map(|k| 1.0 / 501.0 + (k - 1) as f64 * (499.0 / 501.0) / 9.0)
            .collect();
        let data = LabeledSet::from_fn(EmpiricalMeasure::from_scalars(&b).unwrap(), |p| example2(p[0])).unwrap();
        let grid = interior(500);
        let maxent = fit_least_squares(
            MaxentBasis::new(NodeSet::from_scalars(&b).unwrap(), 0.0).unwrap(),
            &data,
        )
        .unwrap();
        assert!(maxent.residual_norm < 1e-10);
        let poly = fit_least_squares(build_orthonormal(&grid, 9).unwrap(), &data).unwrap();
        let e_max = normalized_error(&maxent, |p| example2(p[0]), &grid).unwrap();
        let e_poly = normalized_error(&poly, |p| example2(p[0]), &grid).unwrap();
        assert!(e_max.rms < e_poly.rms, "{} vs {}", e_max.rms, e_poly.rms);

        let mid = maxent.eval(&[0.5]).unwrap();
        let bound = e_max.errors.iter().cloned().fold(0.0, f64::max) * e_max.scale;
        assert!((mid - 0.5f64 / 0.5f64.sqrt()).abs() <= bound);
    }

    #[test]
    fn perturbing_a_coefficient_increases_residual() {
        let m = interior(40);
        let data = LabeledSet::from_fn(m.clone(), |p| (3.0 * p[0]).sin()).unwrap();
        let fit = fit_least_squares(build_orthonormal(&m, 3).unwrap(), &data).unwrap();
        let design = m.basis_matrix(&fit.basis).unwrap();
        let rhs = DVector::from_column_slice(data.values());
        for i in 0..4 {
            for s in [-1e-3, 1e-3] {
                let mut c = fit.coefficients.clone();
                c[i] += s;
                assert!((&design * c - &rhs).norm() > fit.residual_norm);
            }
        }
    }

    #[test]
    fn rank_deficiency_falls_back_to_least_norm() {
        let nodes = NodeSet::uniform(0.0, 1.0, 5).unwrap();
        // Two data points for five basis functions.
        let data = LabeledSet::new(EmpiricalMeasure::from_scalars(&[0.3, 0.6]).unwrap(), vec![1.0, 1.0]).unwrap();
        let fit = fit_least_squares(MaxentBasis::new(nodes, 0.0).unwrap(), &data).unwrap();
        assert!(fit.rank_deficient);
        assert!(fit.residual_norm < 1e-10);
    }

    #[test]
    fn error_profile_examples() {
        let nodes = NodeSet::uniform(0.0, 1.0, 3).unwrap();
        let m = EmpiricalMeasure::from_scalars(&[0.0, 0.5, 1.0]).unwrap();
        let zero = Approximant {
            basis: MaxentBasis::new(nodes.clone(), 0.0).unwrap(),
            coefficients: DVector::zeros(3),
            residual_norm: 0.0,
            rank_deficient: false,
        };
        assert_eq!(zero.eval(&[0.3]).unwrap(), 0.0);
        let p = normalized_error(&zero, |_| 4.0, &interior(20)).unwrap();
        assert!(p.errors.iter().all(|e| *e == 1.0));
        assert_eq!(p.rms, 1.0);
        assert!(matches!(
            normalized_error(&zero, |_| 0.0, &interior(20)),
            Err(UqError::DivisionGuard(_))
        ));

        let data = LabeledSet::from_fn(m, |p| p[0] * p[0]).unwrap();
        let fit = fit_least_squares(MaxentBasis::new(nodes, 0.0).unwrap(), &data).unwrap();
        let p = normalized_error(&fit, |q| fit.eval(q).unwrap(), &interior(20)).unwrap();
        assert!(p.errors.iter().all(|e| *e == 0.0));
        assert!(matches!(fit.eval(&[1.5]), Err(UqError::HullViolation { .. })));
    }

    #[test]
    fn csv_exports() {
        let m = EmpiricalMeasure::from_scalars(&[0.0, 1.0]).unwrap();
        let data = LabeledSet::new(m.clone(), vec![2.0, 3.0]).unwrap();
        let fit = fit_least_squares(
            MaxentBasis::new(NodeSet::from_scalars(&[0.0, 1.0]).unwrap(), 0.0).unwrap(),
            &data,
        )
        .unwrap();
        let mut buf = Vec::new();
        fit.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node,coefficient\n0,2\n1,3\n");

        let grid = interior(30);
        let fit = fit_least_squares(
            build_orthonormal(&grid, 1).unwrap(),
            &LabeledSet::from_fn(grid, |_| 1.0).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        fit.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,coefficient\n0,"));
        assert_eq!(text.lines().count(), 3);
    }
}
