//! Maximum-entropy basis functions (barycentric coordinates) on a node set.

mod entropy;
mod nodes;
mod solver;

pub use entropy::{entropy, relative_entropy};
pub use nodes::{read_points, NodeSet};
pub use solver::{
    eval_basis, gaussian_prior, in_hull, solve_lagrange, LagrangeSolution, MaxentBasis, MaxentEvaluation, Prior,
    SolverOptions,
};
