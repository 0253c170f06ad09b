//! Galerkin surrogate for linear ODEs with random parameters.
//!
//! With `x(t, Δ) ≈ X(t) Φ(Δ)` and `x_c = vec(X)`, projecting the equation
//! error onto every basis function gives the deterministic system
//! `(E[ΦΦᵀ] ⊗ I_n) ẋ_c = E[(ΦΦᵀ) ⊗ A(Δ)] x_c`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::basis::{Basis, BasisKind};
use crate::error::{Result, UqError};
use crate::measure::{BasisStats, EmpiricalMeasure};
use crate::scalar::{csv_row, from_usize, Real};

pub type SystemMap<T> = Arc<dyn Fn(&[T]) -> Result<DMatrix<T>> + Send + Sync>;
pub type InitialMap<T> = Arc<dyn Fn(&[T]) -> Result<DVector<T>> + Send + Sync>;

/// Initial state `x(0, Δ)`.
#[derive(Clone)]
pub enum InitialCondition<T: Real> {
    Deterministic(DVector<T>),
    Random(InitialMap<T>),
}

impl<T: Real> std::fmt::Debug for InitialCondition<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialCondition::Deterministic(v) => f.debug_tuple("Deterministic").field(v).finish(),
            InitialCondition::Random(_) => f.write_str("Random(..)"),
        }
    }
}

/// `ẋ(t, Δ) = A(Δ) x(t, Δ)` on `[t0, t_end]` with step `step`.
#[derive(Clone)]
pub struct LinearStochasticOde<T: Real> {
    dim: usize,
    system: SystemMap<T>,
    initial: InitialCondition<T>,
    pub t0: T,
    pub t_end: T,
    pub step: T,
}

impl<T: Real> std::fmt::Debug for LinearStochasticOde<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearStochasticOde")
            .field("dim", &self.dim)
            .field("initial", &self.initial)
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("step", &self.step)
            .finish_non_exhaustive()
    }
}

impl<T: Real> LinearStochasticOde<T> {
    pub fn new(
        dim: usize,
        system: SystemMap<T>,
        initial: InitialCondition<T>,
        t0: T,
        t_end: T,
        step: T,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(UqError::InvalidInput("state dimension must be >= 1".into()));
        }
        check_span(t0, t_end, step)?;
        if let InitialCondition::Deterministic(x0) = &initial {
            if x0.len() != dim {
                return Err(UqError::InvalidInput(format!(
                    "initial state has length {}, expected {dim}",
                    x0.len()
                )));
            }
        }
        Ok(Self {
            dim,
            system,
            initial,
            t0,
            t_end,
            step,
        })
    }

    /// Scalar equation `ẋ = a(Δ) x` with deterministic `x(0) = x0`.
    pub fn scalar<F>(a: F, x0: T, t_end: T, step: T) -> Result<Self>
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
    {
        let system: SystemMap<T> = Arc::new(move |p: &[T]| Ok(DMatrix::from_element(1, 1, a(p))));
        Self::new(
            1,
            system,
            InitialCondition::Deterministic(DVector::from_element(1, x0)),
            T::zero(),
            t_end,
            step,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn initial(&self) -> &InitialCondition<T> {
        &self.initial
    }

    /// `A(Δ)`, checked for shape and finiteness.
    pub fn system_at(&self, point: &[T]) -> Result<DMatrix<T>> {
        let a = (self.system)(point)?;
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(UqError::InvalidInput(format!(
                "system map returned {}x{}, expected {}x{}",
                a.nrows(),
                a.ncols(),
                self.dim,
                self.dim
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(UqError::InvalidInput("system map returned a non-finite entry".into()));
        }
        Ok(a)
    }

    fn systems_on(&self, measure: &EmpiricalMeasure<T>) -> Result<Vec<DMatrix<T>>> {
        measure
            .iter()
            .enumerate()
            .map(|(j, p)| {
                self.system_at(p).map_err(|e| UqError::Evaluation {
                    index: j,
                    detail: e.to_string(),
                })
            })
            .collect()
    }
}

fn check_span<T: Real>(t0: T, t_end: T, step: T) -> Result<()> {
    if !(t0.is_finite() && t_end.is_finite() && step.is_finite()) || !(t_end > t0) || !(step > T::zero()) {
        return Err(UqError::InvalidInput(format!(
            "invalid time grid: t0 = {}, t_end = {}, step = {}",
            t0.as_f64(),
            t_end.as_f64(),
            step.as_f64()
        )));
    }
    Ok(())
}

/// Symmetric positive-definite factorisation of a Gram matrix.
#[derive(Debug, Clone)]
pub struct GramFactor<T: Real> {
    chol: Cholesky<T, Dyn>,
    /// Ridge added to the diagonal when the plain factorisation failed.
    pub jitter: Option<T>,
    /// Ratio of extreme eigenvalues of the factored matrix.
    pub condition: T,
}

impl<T: Real> GramFactor<T> {
    pub fn new(gram: &DMatrix<T>) -> Result<Self> {
        let n = gram.nrows();
        let (matrix, chol, jitter) = match gram.clone().cholesky() {
            Some(c) => (gram.clone(), c, None),
            None => {
                let ridge = T::lit(1e-12) * gram.trace() / from_usize::<T>(n);
                let shifted = gram + DMatrix::identity(n, n) * ridge;
                match shifted.clone().cholesky() {
                    Some(c) => (shifted, c, Some(ridge)),
                    None => {
                        return Err(UqError::IllConditionedGram {
                            condition: f64::INFINITY,
                        })
                    }
                }
            }
        };
        let eigen = matrix.symmetric_eigenvalues();
        let (lo, hi) = (eigen.min(), eigen.max());
        let condition = if lo > T::zero() {
            hi / lo
        } else {
            T::max_value().unwrap_or(hi / T::EPSILON)
        };
        let limit = T::one() / (T::lit(1e3) * T::EPSILON);
        if !(condition <= limit) {
            return Err(UqError::IllConditionedGram {
                condition: condition.as_f64(),
            });
        }
        Ok(Self {
            chol,
            jitter,
            condition,
        })
    }

    pub fn solve(&self, rhs: &DMatrix<T>) -> DMatrix<T> {
        self.chol.solve(rhs)
    }

    pub fn solve_vec(&self, rhs: &DVector<T>) -> DVector<T> {
        self.chol.solve(rhs)
    }

    /// The (possibly jittered) matrix that was factored.
    pub fn matrix(&self) -> DMatrix<T> {
        self.chol.l() * self.chol.l().transpose()
    }
}

/// Deterministic coefficient system `ẋ_c = M x_c`.
#[derive(Debug, Clone)]
pub struct Surrogate<T: Real> {
    pub state_dim: usize,
    pub kind: BasisKind,
    /// `M = (E[ΦΦᵀ] ⊗ I_n)⁻¹ E[(ΦΦᵀ) ⊗ A]`.
    pub system_matrix: DMatrix<T>,
    /// `E[(ΦΦᵀ) ⊗ A]`.
    pub projected_system: DMatrix<T>,
    pub stats: BasisStats<T>,
    /// `x_c(0)`.
    pub initial: DVector<T>,
    pub jitter: Option<T>,
    pub condition: T,
}

impl<T: Real> Surrogate<T> {
    pub fn n_basis(&self) -> usize {
        self.stats.len()
    }

    /// `M x_c`.
    pub fn rate(&self, x_c: &DVector<T>) -> DVector<T> {
        &self.system_matrix * x_c
    }
}

/// Assembles the Galerkin surrogate for `ode` in `basis` under `measure`.
pub fn build_surrogate<T, B>(
    ode: &LinearStochasticOde<T>,
    basis: &B,
    measure: &EmpiricalMeasure<T>,
) -> Result<Surrogate<T>>
where
    T: Real,
    B: Basis<T> + ?Sized,
{
    let phi = measure.basis_matrix(basis)?;
    build_surrogate_from_matrix(ode, basis.kind(), &phi, measure)
}

/// [`build_surrogate`] with the basis matrix `Φ` (row `j` = `Φ(Δ_j)ᵀ`) precomputed.
pub fn build_surrogate_from_matrix<T: Real>(
    ode: &LinearStochasticOde<T>,
    kind: BasisKind,
    phi: &DMatrix<T>,
    measure: &EmpiricalMeasure<T>,
) -> Result<Surrogate<T>> {
    if phi.nrows() != measure.len() {
        return Err(UqError::InvalidInput(format!(
            "basis matrix has {} rows for {} samples",
            phi.nrows(),
            measure.len()
        )));
    }
    let n = ode.dim();
    let n_b = phi.ncols();
    let systems = ode.systems_on(measure)?;

    let (stats, projected) = if n == 1 {
        let weights: Vec<T> = systems.iter().map(|a| a[(0, 0)]).collect();
        let stats = BasisStats::from_matrix(phi, Some(&weights))?;
        let projected = stats.weighted_gram.clone().expect("weights supplied");
        (stats, projected)
    } else {
        let stats = BasisStats::from_matrix(phi, None)?;
        let mut projected = DMatrix::<T>::zeros(n * n_b, n * n_b);
        for (row, a) in phi.row_iter().zip(&systems) {
            let outer = row.transpose() * row;
            projected += outer.kronecker(a);
        }
        projected /= from_usize::<T>(measure.len());
        (stats, projected)
    };

    let factor = GramFactor::new(&stats.gram)?;
    let system_matrix = if n == 1 {
        factor.solve(&projected)
    } else {
        let block = factor.matrix().kronecker(&DMatrix::<T>::identity(n, n));
        block
            .cholesky()
            .ok_or(UqError::IllConditionedGram {
                condition: factor.condition.as_f64(),
            })?
            .solve(&projected)
    };
    let initial = initial_coefficients_factored(kind, ode.initial(), measure, phi, &stats, &factor, n)?;

    Ok(Surrogate {
        state_dim: n,
        kind,
        system_matrix,
        projected_system: projected,
        stats,
        initial,
        jitter: factor.jitter,
        condition: factor.condition,
    })
}

/// Chaos coefficients `x_c(0)` of the initial state.
///
/// For a maxent basis and deterministic `x0`, partition of unity gives
/// `X(0) = x0 1ᵀ` directly. Otherwise `x0(Δ)` is Galerkin-projected:
/// `X(0) E[ΦΦᵀ] = E[x0(Δ) Φᵀ]`.
pub fn initial_coefficients<T: Real>(
    kind: BasisKind,
    initial: &InitialCondition<T>,
    measure: &EmpiricalMeasure<T>,
    phi: &DMatrix<T>,
) -> Result<DVector<T>> {
    let stats = BasisStats::from_matrix(phi, None)?;
    let factor = GramFactor::new(&stats.gram)?;
    let n = match initial {
        InitialCondition::Deterministic(x0) => x0.len(),
        InitialCondition::Random(f) => f(measure.point(0))?.len(),
    };
    initial_coefficients_factored(kind, initial, measure, phi, &stats, &factor, n)
}

fn initial_coefficients_factored<T: Real>(
    kind: BasisKind,
    initial: &InitialCondition<T>,
    measure: &EmpiricalMeasure<T>,
    phi: &DMatrix<T>,
    stats: &BasisStats<T>,
    factor: &GramFactor<T>,
    n: usize,
) -> Result<DVector<T>> {
    let n_b = phi.ncols();
    // `projection` is E[x0 Φᵀ], an n × n_B matrix.
    let projection = match initial {
        InitialCondition::Deterministic(x0) => {
            if kind == BasisKind::Maxent {
                let coeffs = DMatrix::from_fn(n, n_b, |r, _| x0[r]);
                return Ok(DVector::from_column_slice(coeffs.as_slice()));
            }
            x0 * stats.mean.transpose()
        }
        InitialCondition::Random(f) => {
            let mut acc = DMatrix::<T>::zeros(n, n_b);
            for (j, (p, row)) in measure.iter().zip(phi.row_iter()).enumerate() {
                let x0 = f(p).map_err(|e| UqError::Evaluation {
                    index: j,
                    detail: e.to_string(),
                })?;
                if x0.len() != n || x0.iter().any(|v| !v.is_finite()) {
                    return Err(UqError::Evaluation {
                        index: j,
                        detail: "initial condition is not a finite vector of the state dimension".into(),
                    });
                }
                acc += &x0 * row;
            }
            acc / from_usize::<T>(measure.len())
        }
    };
    let coeffs_t = factor.solve(&projection.transpose());
    let coeffs = coeffs_t.transpose();
    Ok(DVector::from_column_slice(coeffs.as_slice()))
}

/// Time grid and coefficient states of an integrated surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<DVector<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Output times of the fixed-step integrator: `t0 + k h`, with the last
/// step shortened to land on `t_end`.
pub fn time_grid<T: Real>(t0: T, t_end: T, step: T) -> Result<Vec<T>> {
    check_span(t0, t_end, step)?;
    let ratio = ((t_end - t0) / step).as_f64();
    let nearest = ratio.round();
    let steps = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    };
    Ok((0..=steps)
        .map(|k| {
            if k == steps {
                t_end
            } else {
                t0 + step * from_usize::<T>(k)
            }
        })
        .collect())
}

/// Classical fourth-order Runge-Kutta for `ẋ = M x` on a fixed grid.
pub fn integrate_linear<T: Real>(
    matrix: &DMatrix<T>,
    x0: &DVector<T>,
    t0: T,
    t_end: T,
    step: T,
) -> Result<Trajectory<T>> {
    let times = time_grid(t0, t_end, step)?;
    if matrix.nrows() != x0.len() || matrix.ncols() != x0.len() {
        return Err(UqError::InvalidInput("system matrix and state sizes differ".into()));
    }
    let mut states = Vec::with_capacity(times.len());
    states.push(x0.clone());
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);
    let mut x = x0.clone();
    for w in times.windows(2) {
        let (t_prev, t_next) = (w[0], w[1]);
        let h = t_next - t_prev;
        let k1 = matrix * &x;
        let k2 = matrix * (&x + &k1 * (h * half));
        let k3 = matrix * (&x + &k2 * (h * half));
        let k4 = matrix * (&x + &k3 * h);
        x += (k1 + k2 * two + k3 * two + k4) * (h * sixth);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(UqError::BlowUp { time: t_next.as_f64() });
        }
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

/// Integrates the surrogate from its initial coefficients.
pub fn integrate<T: Real>(surrogate: &Surrogate<T>, t0: T, t_end: T, step: T) -> Result<Trajectory<T>> {
    integrate_linear(&surrogate.system_matrix, &surrogate.initial, t0, t_end, step)
}

/// Estimated mean and covariance along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries<T: Real> {
    pub times: Vec<T>,
    pub means: Vec<DVector<T>>,
    pub covariances: Vec<DMatrix<T>>,
}

impl<T: Real> MomentSeries<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// First state component of the mean.
    pub fn mean(&self) -> Vec<T> {
        self.means.iter().map(|m| m[0]).collect()
    }

    /// Variance of the first state component.
    pub fn variance(&self) -> Vec<T> {
        self.covariances.iter().map(|c| c[(0, 0)]).collect()
    }

    /// Keeps every `stride`-th entry, starting with the first.
    pub fn every(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let pick = |k: &usize| k.is_multiple_of(stride);
        Self {
            times: self
                .times
                .iter()
                .enumerate()
                .filter(|(k, _)| pick(k))
                .map(|(_, v)| *v)
                .collect(),
            means: self
                .means
                .iter()
                .enumerate()
                .filter(|(k, _)| pick(k))
                .map(|(_, v)| v.clone())
                .collect(),
            covariances: self
                .covariances
                .iter()
                .enumerate()
                .filter(|(k, _)| pick(k))
                .map(|(_, v)| v.clone())
                .collect(),
        }
    }

    /// CSV of the first state component:
    /// `t,mean,variance[,mean_ref,variance_ref,err_mean,err_variance]`.
    pub fn write_csv<W: Write>(&self, mut writer: W, reference: Option<(&[f64], &[f64])>) -> Result<()> {
        let mean = self.mean();
        let var = self.variance();
        match reference {
            None => {
                writeln!(writer, "t,mean,variance")?;
                for k in 0..self.len() {
                    writeln!(
                        writer,
                        "{}",
                        csv_row(&[self.times[k].as_f64(), mean[k].as_f64(), var[k].as_f64()])
                    )?;
                }
            }
            Some((mean_ref, var_ref)) => {
                if mean_ref.len() != self.len() || var_ref.len() != self.len() {
                    return Err(UqError::InvalidInput("reference length does not match series".into()));
                }
                writeln!(writer, "t,mean,variance,mean_ref,variance_ref,err_mean,err_variance")?;
                for k in 0..self.len() {
                    let (m, v) = (mean[k].as_f64(), var[k].as_f64());
                    let row = [
                        self.times[k].as_f64(),
                        m,
                        v,
                        mean_ref[k],
                        var_ref[k],
                        relative_error(m, mean_ref[k]),
                        relative_error(v, var_ref[k]),
                    ];
                    writeln!(writer, "{}", csv_row(&row))?;
                }
            }
        }
        Ok(())
    }
}

/// `|1 - estimate / reference|`, or `|estimate|` when the reference is zero.
pub fn relative_error(estimate: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        estimate.abs()
    } else {
        (1.0 - estimate / reference).abs()
    }
}

/// `μ̂ = X E[Φ]` and `Σ̂ = X (E[ΦΦᵀ] - E[Φ]E[Φ]ᵀ) Xᵀ` at every step.
pub fn moments<T: Real>(
    trajectory: &Trajectory<T>,
    stats: &BasisStats<T>,
    state_dim: usize,
) -> Result<MomentSeries<T>> {
    let n_b = stats.len();
    let covariance = stats.covariance();
    let mut means = Vec::with_capacity(trajectory.len());
    let mut covariances = Vec::with_capacity(trajectory.len());
    for x_c in &trajectory.states {
        if x_c.len() != state_dim * n_b {
            return Err(UqError::InvalidInput(format!(
                "coefficient vector has length {}, expected {} x {}",
                x_c.len(),
                state_dim,
                n_b
            )));
        }
        let coeffs = DMatrix::from_column_slice(state_dim, n_b, x_c.as_slice());
        means.push(&coeffs * &stats.mean);
        let cov = &coeffs * &covariance * coeffs.transpose();
        covariances.push((&cov + cov.transpose()) * T::lit(0.5));
    }
    Ok(MomentSeries {
        times: trajectory.times.clone(),
        means,
        covariances,
    })
}

/// Sample-average projection of the equation error onto the basis,
/// with the basis and system values cached.
#[derive(Debug, Clone)]
pub struct ResidualProbe<T: Real> {
    phi: DMatrix<T>,
    systems: Vec<DMatrix<T>>,
    state_dim: usize,
}

impl<T: Real> ResidualProbe<T> {
    pub fn new<B: Basis<T> + ?Sized>(
        ode: &LinearStochasticOde<T>,
        basis: &B,
        measure: &EmpiricalMeasure<T>,
    ) -> Result<Self> {
        Ok(Self {
            phi: measure.basis_matrix(basis)?,
            systems: ode.systems_on(measure)?,
            state_dim: ode.dim(),
        })
    }

    /// `E[e(Δ) ⊗ Φ(Δ)]` arranged as `vec(E[e Φᵀ])`, where
    /// `e = Ẋ Φ - A(Δ) X Φ`.
    pub fn residual(&self, x_c: &DVector<T>, x_c_dot: &DVector<T>) -> Result<DVector<T>> {
        let n = self.state_dim;
        let n_b = self.phi.ncols();
        if x_c.len() != n * n_b || x_c_dot.len() != n * n_b {
            return Err(UqError::InvalidInput("coefficient vector length mismatch".into()));
        }
        let coeffs = DMatrix::from_column_slice(n, n_b, x_c.as_slice());
        let rates = DMatrix::from_column_slice(n, n_b, x_c_dot.as_slice());
        let mut acc = DMatrix::<T>::zeros(n, n_b);
        for (row, a) in self.phi.row_iter().zip(&self.systems) {
            let col = row.transpose();
            let error = &rates * &col - a * (&coeffs * &col);
            acc += error * row;
        }
        acc /= from_usize::<T>(self.phi.nrows());
        Ok(DVector::from_column_slice(acc.as_slice()))
    }
}

/// One-shot [`ResidualProbe::residual`].
pub fn galerkin_residual<T, B>(
    ode: &LinearStochasticOde<T>,
    basis: &B,
    measure: &EmpiricalMeasure<T>,
    x_c: &DVector<T>,
    x_c_dot: &DVector<T>,
) -> Result<DVector<T>>
where
    T: Real,
    B: Basis<T> + ?Sized,
{
    ResidualProbe::new(ode, basis, measure)?.residual(x_c, x_c_dot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apc::build_orthonormal;
    use crate::maxent::{MaxentBasis, NodeSet};
    use crate::measure::SampleGenerator;

    fn grid(count: usize) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::generate(SampleGenerator::UniformGrid {
            lo: -1.0,
            hi: 1.0,
            count,
        })
        .unwrap()
    }

    fn maxent(count: usize) -> MaxentBasis<f64> {
        MaxentBasis::new(NodeSet::uniform(-1.0, 1.0, count).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn constant_decay_gives_scaled_identity() {
        let ode = LinearStochasticOde::scalar(|_| -0.7, 1.0, 1.0, 0.01).unwrap();
        let s = build_surrogate(&ode, &maxent(4), &grid(200)).unwrap();
        let err = (&s.system_matrix - DMatrix::identity(4, 4) * -0.7).abs().max();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn two_hat_functions_match_exact_integrals() {
        // G and W from exact integrals of the hat functions against the
        // uniform density on [-1, 1]; W_ij = E[-(1+Δ)/2 ψ_i ψ_j].
        let g = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0]);
        let w = DMatrix::from_row_slice(2, 2, &[-1.0 / 12.0, -1.0 / 12.0, -1.0 / 12.0, -1.0 / 4.0]);
        let oracle = g.lu().solve(&w).unwrap();
        let ode = LinearStochasticOde::scalar(|p| -(1.0 + p[0]) / 2.0, 1.0, 1.0, 0.01).unwrap();
        let s = build_surrogate(&ode, &maxent(2), &grid(20_000)).unwrap();
        let err = (&s.system_matrix - &oracle).abs().max();
        assert!(err < 1e-3, "{err}\n{}\n{}", s.system_matrix, oracle);
        let closed = DMatrix::from_row_slice(2, 2, &[-1.0 / 6.0, 1.0 / 6.0, -1.0 / 6.0, -5.0 / 6.0]);
        assert!((&oracle - closed).abs().max() < 1e-14);
    }

    #[test]
    fn deterministic_matrix_gives_kronecker_identity() {
        let a0 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let a = a0.clone();
        let system: SystemMap<f64> = Arc::new(move |_| Ok(a.clone()));
        let ode = LinearStochasticOde::new(
            2,
            system,
            InitialCondition::Deterministic(DVector::from_vec(vec![1.0, 2.0])),
            0.0,
            1.0,
            0.01,
        )
        .unwrap();
        let s = build_surrogate(&ode, &maxent(3), &grid(100)).unwrap();
        let expected = DMatrix::<f64>::identity(3, 3).kronecker(&a0);
        assert!((&s.system_matrix - expected).abs().max() < 1e-10);
        assert_eq!(s.initial.as_slice(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn initial_coefficients_examples() {
        let m = grid(101);
        let b = maxent(5);
        let phi = m.basis_matrix(&b).unwrap();
        let one = InitialCondition::Deterministic(DVector::from_element(1, 1.0));
        let x = initial_coefficients(BasisKind::Maxent, &one, &m, &phi).unwrap();
        assert_eq!(x.as_slice(), &[1.0; 5]);
        let five = InitialCondition::Deterministic(DVector::from_element(1, 5.0));
        let x = initial_coefficients(BasisKind::Maxent, &five, &m, &phi).unwrap();
        assert_eq!(x.as_slice(), &[5.0; 5]);

        // Projection route agrees with the shortcut for maxent.
        let random: InitialMap<f64> = Arc::new(|_| Ok(DVector::from_element(1, 1.0)));
        let x = initial_coefficients(BasisKind::Maxent, &InitialCondition::Random(random), &m, &phi).unwrap();
        assert!((x - DVector::from_element(5, 1.0)).abs().max() < 1e-8);

        let poly = build_orthonormal(&m, 4).unwrap();
        let phi = m.basis_matrix(&poly).unwrap();
        let x = initial_coefficients(BasisKind::Apc, &one, &m, &phi).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10);
        assert!(x.rows(1, 4).abs().max() < 1e-8);
    }

    #[test]
    fn integrator_examples() {
        let zero = DMatrix::<f64>::zeros(2, 2);
        let v = DVector::from_vec(vec![1.5, -2.0]);
        let traj = integrate_linear(&zero, &v, 0.0, 3.0, 0.1).unwrap();
        assert_eq!(traj.len(), 31);
        assert!(traj.states.iter().all(|s| s == &v));

        let m = DMatrix::from_element(1, 1, -1.0f64);
        let traj = integrate_linear(&m, &DVector::from_element(1, 1.0), 0.0, 1.0, 0.01).unwrap();
        assert_eq!(traj.len(), 101);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
        assert!((traj.states[100][0] - (-1.0f64).exp()).abs() < 1e-9);

        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0f64, -1.0]));
        let traj = integrate_linear(&m, &DVector::from_vec(vec![1.0, 1.0]), 0.0, 2.0, 0.01).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert!((s[0] - 1.0).abs() < 1e-15);
            assert!((s[1] - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn final_step_is_shortened() {
        let m = DMatrix::from_element(1, 1, -1.0f64);
        let traj = integrate_linear(&m, &DVector::from_element(1, 1.0), 0.0, 1.0, 0.3).unwrap();
        assert_eq!(traj.len(), 5);
        assert_eq!(traj.times[4], 1.0);
        assert!((traj.times[3] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn blow_up_is_reported() {
        let m = DMatrix::from_element(1, 1, 800.0);
        let err = integrate_linear(&m, &DVector::from_element(1, 1.0), 0.0, 10.0, 0.01).unwrap_err();
        assert!(matches!(err, UqError::BlowUp { .. }));
    }

    #[test]
    fn moments_examples() {
        let m = grid(201);
        let b = maxent(4);
        let phi = m.basis_matrix(&b).unwrap();
        let stats = BasisStats::from_matrix(&phi, None).unwrap();
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![DVector::from_element(4, 1.0), DVector::zeros(4)],
        };
        let mom = moments(&traj, &stats, 1).unwrap();
        assert!((mom.mean()[0] - 1.0).abs() < 1e-14);
        assert!(mom.variance()[0].abs() < 1e-14);
        assert_eq!(mom.mean()[1], 0.0);
        assert_eq!(mom.variance()[1], 0.0);

        let ortho = BasisStats {
            gram: DMatrix::identity(3, 3),
            mean: DVector::from_vec(vec![1.0, 0.0, 0.0]),
            weighted_gram: None,
        };
        let traj = Trajectory {
            times: vec![0.0],
            states: vec![DVector::from_vec(vec![0.5, 2.0, -3.0])],
        };
        let mom = moments(&traj, &ortho, 1).unwrap();
        assert_eq!(mom.mean()[0], 0.5);
        assert_eq!(mom.variance()[0], 13.0);

        assert!(moments(&traj, &stats, 1).is_err());
    }

    #[test]
    fn residual_vanishes_for_surrogate_rates() {
        let m = grid(300);
        let b = maxent(5);
        let ode = LinearStochasticOde::scalar(|p| -(1.0 + p[0]) / 2.0, 1.0, 1.0, 0.01).unwrap();
        let s = build_surrogate(&ode, &b, &m).unwrap();
        let probe = ResidualProbe::new(&ode, &b, &m).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.5, -0.2, 0.3, 2.0]);
        let r = probe.residual(&x, &s.rate(&x)).unwrap();
        assert!(r.abs().max() < 1e-10);

        let delta = 1e-3;
        let mut perturbed = s.rate(&x);
        perturbed[0] += delta;
        let r = probe.residual(&x, &perturbed).unwrap();
        let smallest = s.stats.gram.clone().symmetric_eigenvalues().min();
        assert!(r.norm() >= delta * smallest / 2.0);

        let still = LinearStochasticOde::scalar(|_| 0.0, 1.0, 1.0, 0.01).unwrap();
        let r = galerkin_residual(&still, &b, &m, &x, &DVector::zeros(5)).unwrap();
        assert_eq!(r.abs().max(), 0.0);
    }

    #[test]
    fn csv_layout() {
        let series = MomentSeries {
            times: vec![0.0, 0.5],
            means: vec![DVector::from_element(1, 1.0), DVector::from_element(1, 0.5)],
            covariances: vec![DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 0.25)],
        };
        let mut buf = Vec::new();
        series.write_csv(&mut buf, None).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,mean,variance\n0,1,0\n0.5,0.5,0.25\n"
        );
        let mut buf = Vec::new();
        series.write_csv(&mut buf, Some((&[1.0, 1.0], &[0.0, 0.5]))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(2).unwrap(), "0.5,0.5,0.25,1,0.5,0.5,0.5");
    }
}
