use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Result, UqError};
use crate::scalar::{from_usize, Real};

/// Basis nodes anchoring the maximum-entropy shape functions.
///
/// Stored column-wise: column `i` of [`NodeSet::matrix`] is node `Δ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet<T: Real> {
    nodes: DMatrix<T>,
    diameter: T,
}

impl<T: Real> NodeSet<T> {
    /// Builds a node set from explicit points, all of the same dimension.
    pub fn new(points: &[Vec<T>]) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| UqError::InvalidInput("node set is empty".into()))?;
        if dim == 0 {
            return Err(UqError::InvalidInput("nodes must have dimension >= 1".into()));
        }
        if points.len() < 2 {
            return Err(UqError::InvalidInput(format!(
                "at least two nodes are required, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(UqError::InvalidInput(format!(
                    "node {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(UqError::InvalidInput(format!("node {i} is not finite")));
            }
        }
        let nodes = DMatrix::from_fn(dim, points.len(), |r, c| points[c][r]);

        let mut diameter = T::zero();
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let dist = (nodes.column(i) - nodes.column(j)).norm();
                if dist == T::zero() {
                    return Err(UqError::InvalidInput(format!("nodes {i} and {j} coincide")));
                }
                if dist > diameter {
                    diameter = dist;
                }
            }
        }
        Ok(Self { nodes, diameter })
    }

    /// One-dimensional node set.
    pub fn from_scalars(values: &[T]) -> Result<Self> {
        let points: Vec<Vec<T>> = values.iter().map(|&v| vec![v]).collect();
        Self::new(&points)
    }

    /// `count` equally spaced nodes on `[lo, hi]`, endpoints included.
    pub fn uniform(lo: T, hi: T, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(UqError::InvalidInput("uniform node set needs count >= 2".into()));
        }
        if !(lo < hi) {
            return Err(UqError::InvalidInput("uniform node set needs lo < hi".into()));
        }
        let span = hi - lo;
        let last = from_usize::<T>(count - 1);
        let values: Vec<T> = (0..count)
            .map(|i| {
                if i + 1 == count {
                    hi
                } else {
                    lo + span * from_usize::<T>(i) / last
                }
            })
            .collect();
        Self::from_scalars(&values)
    }

    pub fn dim(&self) -> usize {
        self.nodes.nrows()
    }

    pub fn len(&self) -> usize {
        self.nodes.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.ncols() == 0
    }

    /// Largest pairwise distance between nodes.
    pub fn diameter(&self) -> T {
        self.diameter
    }

    /// `d × n_B` matrix whose columns are the nodes.
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> Vec<T> {
        self.nodes.column(index).iter().copied().collect()
    }

    /// Componentwise bounds of the nodes.
    pub fn bounds(&self) -> (Vec<T>, Vec<T>) {
        let lo = self.nodes.row_iter().map(|r| r.min()).collect();
        let hi = self.nodes.row_iter().map(|r| r.max()).collect();
        (lo, hi)
    }

    /// Reads whitespace-separated coordinates, one node per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let points = read_points(reader)?;
        Self::new(&points)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for col in self.nodes.column_iter() {
            let line: Vec<String> = col.iter().map(|v| v.as_f64().to_string()).collect();
            writeln!(writer, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Parses the plain-text point format shared by node sets and sample sets.
pub fn read_points<T: Real, R: BufRead>(reader: R) -> Result<Vec<Vec<T>>> {
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let point = trimmed
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map(T::lit).map_err(|e| UqError::Parse {
                    line: lineno + 1,
                    detail: format!("`{tok}`: {e}"),
                })
            })
            .collect::<Result<Vec<T>>>()?;
        points.push(point);
    }
    Ok(points)
}
