//! Common interface for the chaos-expansion bases.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Real;

/// Which family a basis belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Maximum-entropy barycentric coordinates (partition of unity).
    Maxent,
    /// Polynomials orthonormal under the empirical measure.
    Apc,
}

impl BasisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BasisKind::Maxent => "maxent",
            BasisKind::Apc => "apc",
        }
    }
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BasisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maxent" => Ok(BasisKind::Maxent),
            "apc" => Ok(BasisKind::Apc),
            other => Err(format!("unknown basis kind `{other}`")),
        }
    }
}

/// A finite family of functions `Φ(Δ) = (φ_1(Δ), ..., φ_n(Δ))`.
pub trait Basis<T: Real>: Sync {
    /// Number of basis functions.
    fn len(&self) -> usize;

    /// Dimension of the query points.
    fn dim(&self) -> usize;

    fn kind(&self) -> BasisKind;

    /// Evaluates every basis function at `query`.
    fn eval(&self, query: &[T]) -> Result<DVector<T>>;

    /// Point the i-th function is anchored to, if the basis is node-based.
    fn anchor(&self, _index: usize) -> Option<Vec<T>> {
        None
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: Real, B: Basis<T> + ?Sized> Basis<T> for &B {
    fn len(&self) -> usize {
        (**self).len()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn kind(&self) -> BasisKind {
        (**self).kind()
    }
    fn eval(&self, query: &[T]) -> Result<DVector<T>> {
        (**self).eval(query)
    }
    fn anchor(&self, index: usize) -> Option<Vec<T>> {
        (**self).anchor(index)
    }
}
