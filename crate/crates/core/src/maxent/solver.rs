//! Dual (Lagrange-multiplier) solve for maximum-entropy barycentric coordinates.
//!
//! For a query `Δ` and nodes `Δ_i` with shifted coordinates `Δ̃_i = Δ_i - Δ`,
//! the coordinates are `ψ_i ∝ m_i exp(-λᵀΔ̃_i)`, where `λ` zeroes the dual
//! residual `r(λ) = Σ_i ψ_i(λ) Δ̃_i`. The residual is the negative gradient of
//! the convex log-partition function `log Σ_i m_i exp(-λᵀΔ̃_i)`, and its
//! Jacobian is minus the weighted covariance of the shifted nodes.

use nalgebra::{DMatrix, DVector};

use super::nodes::NodeSet;
use crate::basis::{Basis, BasisKind};
use crate::error::{Result, UqError};
use crate::scalar::{from_usize, Real};

/// Newton solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T: Real> {
    /// Residual tolerance, scaled by `1 + diameter` of the node set.
    pub tolerance: T,
    pub max_iterations: usize,
    /// `‖λ‖` above this is taken as divergence (query outside the hull).
    pub lambda_cap: T,
    /// Relative distance (in units of the diameter) under which a query is
    /// snapped onto a hull vertex.
    pub vertex_snap: T,
    /// Maximum number of step halvings per line search.
    pub max_halvings: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        let floor = T::EPSILON * T::lit(100.0);
        Self {
            tolerance: T::lit(1e-12).max(floor),
            max_iterations: 100,
            lambda_cap: T::lit(1e8),
            vertex_snap: T::lit(1e-12).max(floor),
            max_halvings: 60,
        }
    }
}

/// Converged Lagrange multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeSolution<T: Real> {
    pub lambda: DVector<T>,
    pub iterations: usize,
    pub residual_norm: T,
}

/// Result of evaluating the basis at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxentEvaluation<T: Real> {
    pub query: Vec<T>,
    pub lambda: DVector<T>,
    pub psi: DVector<T>,
    pub iterations: usize,
    pub residual_norm: T,
}

/// Gaussian prior `m_i ∝ exp(-β ‖Δ_i - Δ‖²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior<T: Real> {
    beta: T,
}

impl<T: Real> Prior<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !beta.is_finite() || beta < T::zero() {
            return Err(UqError::InvalidInput(format!(
                "locality parameter beta must be finite and >= 0, got {}",
                beta.as_f64()
            )));
        }
        Ok(Self { beta })
    }

    /// `β = 0`: the global maxent basis.
    pub fn uniform() -> Self {
        Self { beta: T::zero() }
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// Normalised prior weights at `query`.
    pub fn weights(&self, nodes: &NodeSet<T>, query: &[T]) -> Result<DVector<T>> {
        check_query(nodes, query)?;
        let exponents = self.exponents(nodes, query);
        let shift = exponents.max();
        let w = exponents.map(|e| (e - shift).exp());
        let total = w.sum();
        Ok(w / total)
    }

    /// Log of the normalised prior. Equal to `ln` of [`Prior::weights`] for
    /// `β = 0`, and free of underflow for large `β`.
    fn log_weights(&self, nodes: &NodeSet<T>, query: &[T]) -> DVector<T> {
        if self.beta == T::zero() {
            let uniform = T::one() / from_usize::<T>(nodes.len());
            return DVector::from_element(nodes.len(), uniform.ln());
        }
        let exponents = self.exponents(nodes, query);
        let shift = exponents.max();
        let log_total = exponents.map(|e| (e - shift).exp()).sum().ln();
        exponents.map(|e| e - shift - log_total)
    }

    fn exponents(&self, nodes: &NodeSet<T>, query: &[T]) -> DVector<T> {
        let q = DVector::from_column_slice(query);
        DVector::from_iterator(
            nodes.len(),
            nodes
                .matrix()
                .column_iter()
                .map(|c| -self.beta * (c - &q).norm_squared()),
        )
    }
}

/// Gaussian prior weights `m(Δ)` for locality parameter `beta`.
pub fn gaussian_prior<T: Real>(nodes: &NodeSet<T>, query: &[T], beta: T) -> Result<DVector<T>> {
    Prior::new(beta)?.weights(nodes, query)
}

fn check_query<T: Real>(nodes: &NodeSet<T>, query: &[T]) -> Result<()> {
    if query.len() != nodes.dim() {
        return Err(UqError::InvalidInput(format!(
            "query has dimension {}, nodes have dimension {}",
            query.len(),
            nodes.dim()
        )));
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(UqError::InvalidInput("query is not finite".into()));
    }
    Ok(())
}

fn hull_violation<T: Real>(query: &[T], detail: impl Into<String>) -> UqError {
    UqError::HullViolation {
        query: query.iter().map(|v| v.as_f64()).collect(),
        detail: detail.into(),
    }
}

/// Shifted node matrix `[Δ_1 - Δ, ..., Δ_N - Δ]`.
fn shifted_nodes<T: Real>(nodes: &NodeSet<T>, query: &[T]) -> DMatrix<T> {
    let q = DVector::from_column_slice(query);
    let mut shifted = nodes.matrix().clone();
    for mut col in shifted.column_iter_mut() {
        col -= &q;
    }
    shifted
}

/// Normalised coordinates for a given `λ`, with the exponent shift applied.
fn coordinates<T: Real>(shifted: &DMatrix<T>, log_prior: &DVector<T>, lambda: &DVector<T>) -> DVector<T> {
    let mut exponents = log_prior - shifted.tr_mul(lambda);
    let shift = exponents.max();
    exponents.apply(|e| *e = (*e - shift).exp());
    let total = exponents.sum();
    exponents / total
}

fn outside_bounding_box<T: Real>(nodes: &NodeSet<T>, query: &[T], slack: T) -> bool {
    let (lo, hi) = nodes.bounds();
    query
        .iter()
        .zip(lo.iter().zip(&hi))
        .any(|(&q, (&l, &h))| q < l - slack || q > h + slack)
}

/// Solves `H s = r`. A sharp prior can leave nearly all weight on one
/// node, making the covariance `H` numerically singular; a growing ridge
/// then turns the step towards the residual direction and the line search
/// picks its length.
fn damped_newton_step<T: Real>(hessian: &DMatrix<T>, residual: &DVector<T>, diameter: T) -> Option<DVector<T>> {
    if let Some(chol) = hessian.clone().cholesky() {
        return Some(chol.solve(residual));
    }
    let d = hessian.nrows();
    let mut ridge = T::lit(1e-10) * diameter * diameter;
    for _ in 0..20 {
        let damped = hessian + DMatrix::identity(d, d) * ridge;
        if let Some(chol) = damped.cholesky() {
            return Some(chol.solve(residual));
        }
        ridge *= T::lit(100.0);
    }
    None
}

fn solve_with_log_prior<T: Real>(
    nodes: &NodeSet<T>,
    query: &[T],
    log_prior: &DVector<T>,
    opts: &SolverOptions<T>,
) -> Result<LagrangeSolution<T>> {
    let diameter = nodes.diameter();
    if outside_bounding_box(nodes, query, T::zero()) {
        return Err(hull_violation(query, "outside the bounding box of the nodes"));
    }
    let tol = opts.tolerance * (T::one() + diameter);
    let shifted = shifted_nodes(nodes, query);
    let d = nodes.dim();

    let mut lambda = DVector::zeros(d);
    let mut psi = coordinates(&shifted, log_prior, &lambda);
    let mut residual = &shifted * &psi;
    let mut res_norm = residual.norm();

    for iteration in 0..opts.max_iterations {
        if res_norm <= tol {
            return Ok(LagrangeSolution {
                lambda,
                iterations: iteration,
                residual_norm: res_norm,
            });
        }

        // Weighted covariance of the shifted nodes.
        let mut weighted = shifted.clone();
        for (mut col, &w) in weighted.column_iter_mut().zip(psi.iter()) {
            col *= w;
        }
        let hessian = &weighted * shifted.transpose() - &residual * residual.transpose();
        let step = damped_newton_step(&hessian, &residual, diameter)
            .ok_or_else(|| hull_violation(query, "dual Hessian could not be factored"))?;

        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = &lambda + &step * t;
            let trial_psi = coordinates(&shifted, log_prior, &trial);
            let trial_residual = &shifted * &trial_psi;
            let trial_norm = trial_residual.norm();
            if trial_norm < res_norm {
                lambda = trial;
                psi = trial_psi;
                residual = trial_residual;
                res_norm = trial_norm;
                accepted = true;
                break;
            }
            t *= T::lit(0.5);
        }
        if !lambda.iter().all(|v| v.is_finite()) || lambda.norm() > opts.lambda_cap {
            return Err(hull_violation(query, "Lagrange multipliers diverged"));
        }
        if !accepted {
            return Err(UqError::Convergence {
                iterations: iteration + 1,
                residual: res_norm.as_f64(),
            });
        }
    }
    if res_norm <= tol {
        return Ok(LagrangeSolution {
            lambda,
            iterations: opts.max_iterations,
            residual_norm: res_norm,
        });
    }
    Err(UqError::Convergence {
        iterations: opts.max_iterations,
        residual: res_norm.as_f64(),
    })
}

/// Solves the dual system for `λ` given explicit prior weights `m`.
pub fn solve_lagrange<T: Real>(
    nodes: &NodeSet<T>,
    query: &[T],
    prior: &[T],
    opts: &SolverOptions<T>,
) -> Result<LagrangeSolution<T>> {
    check_query(nodes, query)?;
    if prior.len() != nodes.len() {
        return Err(UqError::InvalidInput(format!(
            "prior has {} weights for {} nodes",
            prior.len(),
            nodes.len()
        )));
    }
    if let Some(i) = prior.iter().position(|m| !(*m > T::zero()) || !m.is_finite()) {
        return Err(UqError::InvalidInput(format!(
            "prior weight {i} = {} must be strictly positive",
            prior[i].as_f64()
        )));
    }
    let log_prior = DVector::from_iterator(prior.len(), prior.iter().map(|m| m.ln()));
    solve_with_log_prior(nodes, query, &log_prior, opts)
}

/// Maximum-entropy basis on a fixed node set.
#[derive(Debug, Clone)]
pub struct MaxentBasis<T: Real> {
    nodes: NodeSet<T>,
    prior: Prior<T>,
    options: SolverOptions<T>,
    vertices: Vec<bool>,
}

impl<T: Real> MaxentBasis<T> {
    pub fn new(nodes: NodeSet<T>, beta: T) -> Result<Self> {
        Self::with_options(nodes, beta, SolverOptions::default())
    }

    pub fn with_options(nodes: NodeSet<T>, beta: T, options: SolverOptions<T>) -> Result<Self> {
        let prior = Prior::new(beta)?;
        let vertices = hull_vertices(&nodes, &options);
        Ok(Self {
            nodes,
            prior,
            options,
            vertices,
        })
    }

    pub fn nodes(&self) -> &NodeSet<T> {
        &self.nodes
    }

    pub fn beta(&self) -> T {
        self.prior.beta()
    }

    pub fn options(&self) -> &SolverOptions<T> {
        &self.options
    }

    /// Whether node `i` is an extreme point of the hull.
    pub fn is_vertex(&self, i: usize) -> bool {
        self.vertices[i]
    }

    /// Full evaluation, including multipliers and solver statistics.
    pub fn evaluate(&self, query: &[T]) -> Result<MaxentEvaluation<T>> {
        check_query(&self.nodes, query)?;
        if let Some(k) = self.snapped_vertex(query) {
            let mut psi = DVector::zeros(self.nodes.len());
            psi[k] = T::one();
            return Ok(MaxentEvaluation {
                query: query.to_vec(),
                lambda: DVector::zeros(self.nodes.dim()),
                psi,
                iterations: 0,
                residual_norm: T::zero(),
            });
        }
        let log_prior = if self.prior.beta() == T::zero() {
            // Same path as an explicit uniform prior.
            let m = self.prior.weights(&self.nodes, query)?;
            m.map(|v| v.ln())
        } else {
            self.prior.log_weights(&self.nodes, query)
        };
        let solution = solve_with_log_prior(&self.nodes, query, &log_prior, &self.options)?;
        let shifted = shifted_nodes(&self.nodes, query);
        let psi = coordinates(&shifted, &log_prior, &solution.lambda);
        Ok(MaxentEvaluation {
            query: query.to_vec(),
            lambda: solution.lambda,
            psi,
            iterations: solution.iterations,
            residual_norm: solution.residual_norm,
        })
    }

    /// Evaluation with caller-supplied prior weights instead of the Gaussian prior.
    pub fn evaluate_with_prior(&self, query: &[T], prior: &[T]) -> Result<MaxentEvaluation<T>> {
        check_query(&self.nodes, query)?;
        if let Some(k) = self.snapped_vertex(query) {
            let mut psi = DVector::zeros(self.nodes.len());
            psi[k] = T::one();
            return Ok(MaxentEvaluation {
                query: query.to_vec(),
                lambda: DVector::zeros(self.nodes.dim()),
                psi,
                iterations: 0,
                residual_norm: T::zero(),
            });
        }
        let solution = solve_lagrange(&self.nodes, query, prior, &self.options)?;
        let log_prior = DVector::from_iterator(prior.len(), prior.iter().map(|m| m.ln()));
        let shifted = shifted_nodes(&self.nodes, query);
        let psi = coordinates(&shifted, &log_prior, &solution.lambda);
        Ok(MaxentEvaluation {
            query: query.to_vec(),
            lambda: solution.lambda,
            psi,
            iterations: solution.iterations,
            residual_norm: solution.residual_norm,
        })
    }

    /// Hull membership: exact for `d = 1`, solve-based for `d >= 2`.
    pub fn in_hull(&self, query: &[T]) -> bool {
        if check_query(&self.nodes, query).is_err() {
            return false;
        }
        if self.nodes.dim() == 1 {
            let (lo, hi) = self.nodes.bounds();
            return lo[0] <= query[0] && query[0] <= hi[0];
        }
        self.evaluate(query).is_ok()
    }

    fn snapped_vertex(&self, query: &[T]) -> Option<usize> {
        let q = DVector::from_column_slice(query);
        let radius = self.options.vertex_snap * self.nodes.diameter();
        self.nodes
            .matrix()
            .column_iter()
            .enumerate()
            .find(|(k, col)| self.vertices[*k] && (col - &q).norm() <= radius)
            .map(|(k, _)| k)
    }
}

impl<T: Real> Basis<T> for MaxentBasis<T> {
    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn dim(&self) -> usize {
        self.nodes.dim()
    }

    fn kind(&self) -> BasisKind {
        BasisKind::Maxent
    }

    fn eval(&self, query: &[T]) -> Result<DVector<T>> {
        self.evaluate(query).map(|e| e.psi)
    }

    fn anchor(&self, index: usize) -> Option<Vec<T>> {
        Some(self.nodes.node(index))
    }
}

/// Marks the nodes that are extreme points of the convex hull.
///
/// In one dimension these are the two endpoints. Otherwise node `k` is a
/// vertex exactly when it is not a convex combination of the remaining nodes,
/// which is tested with the dual solve itself (it diverges outside the hull).
fn hull_vertices<T: Real>(nodes: &NodeSet<T>, opts: &SolverOptions<T>) -> Vec<bool> {
    let n = nodes.len();
    if nodes.dim() == 1 {
        let (lo, hi) = nodes.bounds();
        return (0..n)
            .map(|i| {
                let v = nodes.matrix()[(0, i)];
                v == lo[0] || v == hi[0]
            })
            .collect();
    }
    if n <= 3 {
        return vec![true; n];
    }
    (0..n)
        .map(|k| {
            let others: Vec<Vec<T>> = (0..n).filter(|&i| i != k).map(|i| nodes.node(i)).collect();
            let Ok(rest) = NodeSet::new(&others) else {
                return true;
            };
            let uniform = vec![T::one() / from_usize::<T>(rest.len()); rest.len()];
            solve_lagrange(&rest, &nodes.node(k), &uniform, opts).is_err()
        })
        .collect()
}

/// Evaluates the maxent basis with Gaussian prior parameter `beta`.
pub fn eval_basis<T: Real>(nodes: &NodeSet<T>, query: &[T], beta: T) -> Result<MaxentEvaluation<T>> {
    MaxentBasis::new(nodes.clone(), beta)?.evaluate(query)
}

/// Convex-hull membership of `query` with respect to `nodes`.
pub fn in_hull<T: Real>(nodes: &NodeSet<T>, query: &[T]) -> bool {
    match MaxentBasis::new(nodes.clone(), T::zero()) {
        Ok(basis) => basis.in_hull(query),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> NodeSet<f64> {
        NodeSet::from_scalars(values).unwrap()
    }

    #[test]
    fn prior_examples() {
        let nodes = line(&[-1.0, 1.0]);
        assert_eq!(gaussian_prior(&nodes, &[0.0], 0.0).unwrap().as_slice(), &[0.5, 0.5]);
        for beta in [0.1, 1.0, 50.0] {
            let m = gaussian_prior(&nodes, &[0.0], beta).unwrap();
            assert!((m[0] - 0.5).abs() < 1e-15 && (m[1] - 0.5).abs() < 1e-15);
        }
        let nodes = line(&[0.0, 1.0]);
        let m = gaussian_prior(&nodes, &[0.0], 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((m[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((m[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((m[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn prior_rejects_bad_input() {
        let nodes = line(&[-1.0, 1.0]);
        assert!(gaussian_prior(&nodes, &[f64::NAN], 0.0).is_err());
        assert!(gaussian_prior(&nodes, &[0.0], -1.0).is_err());
    }

    #[test]
    fn symmetric_configurations_need_no_iterations() {
        let opts = SolverOptions::default();
        let sol = solve_lagrange(&line(&[-1.0, 1.0]), &[0.0], &[0.5, 0.5], &opts).unwrap();
        assert_eq!(sol.lambda[0], 0.0);
        assert_eq!(sol.iterations, 0);
        let third = 1.0 / 3.0;
        let sol = solve_lagrange(&line(&[-1.0, 0.0, 1.0]), &[0.0], &[third; 3], &opts).unwrap();
        assert_eq!(sol.lambda[0], 0.0);
    }

    #[test]
    fn two_nodes_give_affine_coordinates() {
        let e = eval_basis(&line(&[-1.0, 1.0]), &[0.25], 0.0).unwrap();
        assert!((e.psi[0] - 0.375).abs() < 1e-13);
        assert!((e.psi[1] - 0.625).abs() < 1e-13);
    }

    #[test]
    fn three_node_example() {
        let nodes = line(&[-1.0, 0.0, 1.0]);
        let e = eval_basis(&nodes, &[0.0], 0.0).unwrap();
        for v in e.psi.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        // Closed form: ψ ∝ (1/q, 1, q) with q² - q - 3 = 0.
        let q = (1.0 + 13f64.sqrt()) / 2.0;
        let z = 1.0 / q + 1.0 + q;
        let e = eval_basis(&nodes, &[0.5], 0.0).unwrap();
        assert!((e.psi[0] - 1.0 / q / z).abs() < 1e-12);
        assert!((e.psi[1] - 1.0 / z).abs() < 1e-12);
        assert!((e.psi[2] - q / z).abs() < 1e-12);
        assert!((e.psi[0] - 0.1162).abs() < 1e-4);
        assert!((e.psi[2] - 0.6162).abs() < 1e-4);
        assert!((e.lambda[0] + q.ln()).abs() < 1e-10);
    }

    #[test]
    fn endpoints_return_indicator() {
        let nodes = line(&[-1.0, -0.2, 0.5, 1.0]);
        let basis = MaxentBasis::new(nodes, 0.0).unwrap();
        let e = basis.evaluate(&[1.0]).unwrap();
        assert_eq!(e.psi.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        let e = basis.evaluate(&[-1.0 + 1e-14]).unwrap();
        assert_eq!(e.psi.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert!(basis.is_vertex(0) && !basis.is_vertex(1));
    }

    #[test]
    fn outside_the_hull_is_rejected() {
        let nodes = line(&[-1.0, 1.0]);
        let err = eval_basis(&nodes, &[1.001], 0.0).unwrap_err();
        assert!(matches!(err, UqError::HullViolation { .. }));
        assert!(in_hull(&nodes, &[0.999]));
        assert!(!in_hull(&nodes, &[1.001]));
    }

    #[test]
    fn two_dimensional_hull() {
        let tri = NodeSet::<f64>::new(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(in_hull(&tri, &[0.25, 0.25]));
        assert!(!in_hull(&tri, &[0.8, 0.8]));
        assert!(!in_hull(&tri, &[-0.1, 0.3]));
        // Three nodes in 2-d: coordinates are the affine barycentric ones.
        let e = eval_basis(&tri, &[0.25, 0.25], 0.0).unwrap();
        assert!((e.psi[0] - 0.5).abs() < 1e-10);
        assert!((e.psi[1] - 0.25).abs() < 1e-10);
        assert!((e.psi[2] - 0.25).abs() < 1e-10);
    }

    #[test]
    fn square_vertices_and_centre() {
        let sq = NodeSet::new(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
        ])
        .unwrap();
        let basis = MaxentBasis::new(sq, 0.0).unwrap();
        assert!((0..4).all(|i| basis.is_vertex(i)));
        assert!(!basis.is_vertex(4));
        let e = basis.evaluate(&[1.0, 1.0]).unwrap();
        assert_eq!(e.psi[2], 1.0);
    }

    #[test]
    fn large_beta_localises() {
        let nodes = line(&[0.2, 0.5, 0.8]);
        let e = eval_basis(&nodes, &[0.5], 1000.0).unwrap();
        assert!((e.psi[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_uniform_prior_matches_beta_zero_bitwise() {
        let nodes = line(&[-1.0, -0.3, 0.4, 1.0]);
        let basis = MaxentBasis::new(nodes, 0.0).unwrap();
        let uniform = [0.25; 4];
        for q in [-0.9, -0.1, 0.33, 0.7] {
            let a = basis.evaluate(&[q]).unwrap();
            let b = basis.evaluate_with_prior(&[q], &uniform).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_precision_works() {
        let nodes = NodeSet::<f32>::from_scalars(&[-1.0, 0.0, 1.0]).unwrap();
        let e = eval_basis(&nodes, &[0.5f32], 0.0).unwrap();
        assert!((e.psi.sum() - 1.0).abs() < 1e-5);
        assert!((e.psi[2] - 0.6162).abs() < 1e-3);
    }
}
