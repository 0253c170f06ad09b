//! Sample sets standing in for the unknown parameter density, and the
//! sample-average expectations built on them.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::error::{Result, UqError};
use crate::maxent::read_points;
use crate::scalar::{from_usize, Real};

/// Recipe for a one-dimensional sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleGenerator {
    /// `lo + j (hi - lo) / (count - 1)`, endpoints included.
    UniformGrid {
        lo: f64,
        hi: f64,
        count: usize,
    },
    /// `lo + j (hi - lo) / (count + 1)` for `j = 1..=count`; endpoints excluded.
    InteriorGrid {
        lo: f64,
        hi: f64,
        count: usize,
    },
    UniformRandom {
        lo: f64,
        hi: f64,
        count: usize,
        seed: u64,
    },
    GaussianRandom {
        mean: f64,
        std_dev: f64,
        count: usize,
        seed: u64,
    },
}

impl SampleGenerator {
    pub fn count(&self) -> usize {
        match *self {
            SampleGenerator::UniformGrid { count, .. }
            | SampleGenerator::InteriorGrid { count, .. }
            | SampleGenerator::UniformRandom { count, .. }
            | SampleGenerator::GaussianRandom { count, .. } => count,
        }
    }

    fn generate<T: Real>(&self) -> Result<Vec<T>> {
        match *self {
            SampleGenerator::UniformGrid { lo, hi, count } => {
                check_range(lo, hi)?;
                match count {
                    0 => Err(UqError::InvalidInput("sample count must be >= 1".into())),
                    1 => Ok(vec![T::lit(0.5 * (lo + hi))]),
                    _ => {
                        let (lo, hi) = (T::lit(lo), T::lit(hi));
                        let last = from_usize::<T>(count - 1);
                        Ok((0..count)
                            .map(|j| {
                                if j + 1 == count {
                                    hi
                                } else {
                                    lo + (hi - lo) * from_usize::<T>(j) / last
                                }
                            })
                            .collect())
                    }
                }
            }
            SampleGenerator::InteriorGrid { lo, hi, count } => {
                check_range(lo, hi)?;
                check_count(count)?;
                let (lo, hi) = (T::lit(lo), T::lit(hi));
                let cells = from_usize::<T>(count + 1);
                Ok((1..=count)
                    .map(|j| lo + (hi - lo) * from_usize::<T>(j) / cells)
                    .collect())
            }
            SampleGenerator::UniformRandom { lo, hi, count, seed } => {
                check_range(lo, hi)?;
                check_count(count)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..count).map(|_| T::lit(rng.random_range(lo..hi))).collect())
            }
            SampleGenerator::GaussianRandom {
                mean,
                std_dev,
                count,
                seed,
            } => {
                if !(std_dev > 0.0) || !std_dev.is_finite() || !mean.is_finite() {
                    return Err(UqError::InvalidInput(
                        "gaussian generator needs finite mean and std_dev > 0".into(),
                    ));
                }
                check_count(count)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..count)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        T::lit(mean + std_dev * z)
                    })
                    .collect())
            }
        }
    }
}

fn check_range(lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(UqError::InvalidInput(format!("invalid sample range [{lo}, {hi}]")))
    }
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        Err(UqError::InvalidInput("sample count must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Uniform probability measure on a finite sample set `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T: Real> {
    dim: usize,
    data: Vec<T>,
    generator: Option<SampleGenerator>,
}

impl<T: Real> EmpiricalMeasure<T> {
    pub fn new(points: &[Vec<T>]) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| UqError::InvalidInput("sample set is empty".into()))?;
        if dim == 0 {
            return Err(UqError::InvalidInput("samples must have dimension >= 1".into()));
        }
        let mut data = Vec::with_capacity(dim * points.len());
        for (j, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(UqError::InvalidInput(format!(
                    "sample {j} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(UqError::InvalidInput(format!("sample {j} is not finite")));
            }
            data.extend_from_slice(p);
        }
        Ok(Self {
            dim,
            data,
            generator: None,
        })
    }

    pub fn from_scalars(values: &[T]) -> Result<Self> {
        if values.is_empty() {
            return Err(UqError::InvalidInput("sample set is empty".into()));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(UqError::InvalidInput(format!("sample {j} is not finite")));
        }
        Ok(Self {
            dim: 1,
            data: values.to_vec(),
            generator: None,
        })
    }

    pub fn generate(generator: SampleGenerator) -> Result<Self> {
        let values = generator.generate::<T>()?;
        let mut measure = Self::from_scalars(&values)?;
        measure.generator = Some(generator);
        Ok(measure)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        Self::new(&read_points(reader)?)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for p in self.iter() {
            let line: Vec<String> = p.iter().map(|v| v.as_f64().to_string()).collect();
            writeln!(writer, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn generator(&self) -> Option<&SampleGenerator> {
        self.generator.as_ref()
    }

    pub fn point(&self, index: usize) -> &[T] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Scalar samples; only meaningful for `dim == 1`.
    pub fn scalars(&self) -> &[T] {
        &self.data
    }

    /// Componentwise extent of the samples.
    pub fn bounds(&self) -> (Vec<T>, Vec<T>) {
        let mut lo = self.point(0).to_vec();
        let mut hi = lo.clone();
        for p in self.iter() {
            for (k, &v) in p.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        (lo, hi)
    }

    /// FNV-1a digest of the sample bits, used to tie derived objects to the
    /// measure they were built on.
    pub fn fingerprint(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for &v in &self.data {
            for byte in v.as_f64().to_bits().to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hash
    }

    /// `(1/n_D) Σ_j f(Δ_j)`.
    pub fn expectation<F>(&self, f: F) -> Result<T>
    where
        F: Fn(&[T]) -> T,
    {
        let mut total = T::zero();
        for (j, p) in self.iter().enumerate() {
            let v = f(p);
            if !v.is_finite() {
                return Err(UqError::Evaluation {
                    index: j,
                    detail: format!("integrand is {}", v.as_f64()),
                });
            }
            total += v;
        }
        Ok(total / from_usize::<T>(self.len()))
    }

    /// Vector-valued [`EmpiricalMeasure::expectation`].
    pub fn expectation_vec<F>(&self, f: F) -> Result<DVector<T>>
    where
        F: Fn(&[T]) -> DVector<T>,
    {
        let mut total: Option<DVector<T>> = None;
        for (j, p) in self.iter().enumerate() {
            let v = f(p);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(UqError::Evaluation {
                    index: j,
                    detail: "integrand is not finite".into(),
                });
            }
            match total.as_mut() {
                Some(t) if t.len() == v.len() => *t += v,
                Some(t) => {
                    return Err(UqError::Evaluation {
                        index: j,
                        detail: format!("integrand length {} != {}", v.len(), t.len()),
                    })
                }
                None => total = Some(v),
            }
        }
        let total = total.expect("measure is non-empty");
        Ok(total / from_usize::<T>(self.len()))
    }

    /// `n_D × n_B` matrix with row `j` equal to `Φ(Δ_j)ᵀ`.
    ///
    /// Rows are evaluated in parallel and assembled in sample order.
    pub fn basis_matrix<B: Basis<T> + ?Sized>(&self, basis: &B) -> Result<DMatrix<T>> {
        if basis.dim() != self.dim {
            return Err(UqError::InvalidInput(format!(
                "basis expects dimension {}, samples have dimension {}",
                basis.dim(),
                self.dim
            )));
        }
        let rows: Vec<DVector<T>> = (0..self.len())
            .into_par_iter()
            .map(|j| {
                basis.eval(self.point(j)).map_err(|e| UqError::Sample {
                    index: j,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        let n_b = basis.len();
        Ok(DMatrix::from_fn(rows.len(), n_b, |j, i| rows[j][i]))
    }
}

/// Sample-average statistics of a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisStats<T: Real> {
    /// `E[ΦΦᵀ]`.
    pub gram: DMatrix<T>,
    /// `E[Φ]`.
    pub mean: DVector<T>,
    /// `E[a(Δ) ΦΦᵀ]`, when a weight was supplied.
    pub weighted_gram: Option<DMatrix<T>>,
}

impl<T: Real> BasisStats<T> {
    /// Statistics from a precomputed basis matrix and optional per-sample weights.
    pub fn from_matrix(phi: &DMatrix<T>, weights: Option<&[T]>) -> Result<Self> {
        let n = from_usize::<T>(phi.nrows());
        let gram = phi.tr_mul(phi) / n;
        let mean = DVector::from_iterator(phi.ncols(), phi.column_iter().map(|c| c.sum() / n));
        let weighted_gram = match weights {
            None => None,
            Some(w) => {
                if w.len() != phi.nrows() {
                    return Err(UqError::InvalidInput(format!(
                        "{} weights for {} samples",
                        w.len(),
                        phi.nrows()
                    )));
                }
                if let Some(j) = w.iter().position(|v| !v.is_finite()) {
                    return Err(UqError::Evaluation {
                        index: j,
                        detail: "weight is not finite".into(),
                    });
                }
                let mut scaled = phi.clone();
                for (mut row, &wj) in scaled.row_iter_mut().zip(w) {
                    row *= wj;
                }
                Some(scaled.tr_mul(phi) / n)
            }
        };
        Ok(Self {
            gram,
            mean,
            weighted_gram,
        })
    }

    /// `E[ΦΦᵀ] - E[Φ]E[Φ]ᵀ`.
    pub fn covariance(&self) -> DMatrix<T> {
        &self.gram - &self.mean * self.mean.transpose()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Gram matrix, mean and (optionally) weighted Gram matrix of `basis` under `measure`.
pub fn basis_stats<T, B, F>(measure: &EmpiricalMeasure<T>, basis: &B, weight: Option<F>) -> Result<BasisStats<T>>
where
    T: Real,
    B: Basis<T> + ?Sized,
    F: Fn(&[T]) -> T,
{
    let phi = measure.basis_matrix(basis)?;
    let weights: Option<Vec<T>> = weight.map(|f| measure.iter().map(f).collect());
    BasisStats::from_matrix(&phi, weights.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxent::{MaxentBasis, NodeSet};

    fn grid(count: usize) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::generate(SampleGenerator::UniformGrid {
            lo: -1.0,
            hi: 1.0,
            count,
        })
        .unwrap()
    }

    #[test]
    fn expectation_examples() {
        let m = EmpiricalMeasure::from_scalars(&[0.0, 1.0]).unwrap();
        assert_eq!(m.expectation(|p| p[0]).unwrap(), 0.5);
        let second = grid(500).expectation(|p| p[0] * p[0]).unwrap();
        assert!((second - 1.0 / 3.0).abs() < 1e-2);
        let single = EmpiricalMeasure::from_scalars(&[2.0]).unwrap();
        assert_eq!(single.expectation(|p| -(1.0 + p[0]) / 2.0).unwrap(), -1.5);
    }

    #[test]
    fn expectation_names_the_bad_sample() {
        let m = EmpiricalMeasure::from_scalars(&[1.0, 0.0, 2.0]).unwrap();
        let err = m.expectation(|p| 1.0 / p[0]).unwrap_err();
        assert!(matches!(err, UqError::Evaluation { index: 1, .. }));
    }

    #[test]
    fn grids() {
        let g = grid(5);
        assert_eq!(g.scalars(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let g = EmpiricalMeasure::<f64>::generate(SampleGenerator::InteriorGrid {
            lo: 0.0,
            hi: 1.0,
            count: 3,
        })
        .unwrap();
        assert_eq!(g.scalars(), &[0.25, 0.5, 0.75]);
    }

    #[test]
    fn seeded_generators_are_reproducible() {
        let gen = SampleGenerator::UniformRandom {
            lo: -1.0,
            hi: 1.0,
            count: 64,
            seed: 7,
        };
        let a = EmpiricalMeasure::<f64>::generate(gen.clone()).unwrap();
        let b = EmpiricalMeasure::<f64>::generate(gen).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert!(a.scalars().iter().all(|v| (-1.0..1.0).contains(v)));
        let c = EmpiricalMeasure::<f64>::generate(SampleGenerator::UniformRandom {
            lo: -1.0,
            hi: 1.0,
            count: 64,
            seed: 8,
        })
        .unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());

        let g = SampleGenerator::GaussianRandom {
            mean: 1.0,
            std_dev: 2.0,
            count: 20_000,
            seed: 3,
        };
        let m = EmpiricalMeasure::<f64>::generate(g).unwrap();
        let mean = m.expectation(|p| p[0]).unwrap();
        assert!((mean - 1.0).abs() < 0.05);
    }

    #[test]
    fn hat_function_statistics() {
        let basis = MaxentBasis::new(NodeSet::from_scalars(&[-1.0, 1.0]).unwrap(), 0.0).unwrap();
        let stats = basis_stats(&grid(500), &basis, None::<fn(&[f64]) -> f64>).unwrap();
        assert!((stats.gram[(0, 0)] - 1.0 / 3.0).abs() < 1e-2);
        assert!((stats.gram[(0, 1)] - 1.0 / 6.0).abs() < 1e-2);
        assert!((stats.gram[(1, 1)] - 1.0 / 3.0).abs() < 1e-2);
        assert!((stats.mean[0] - 0.5).abs() < 1e-12);
        // Row sums of the Gram matrix reproduce the mean.
        for i in 0..2 {
            assert!((stats.gram.row(i).sum() - stats.mean[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_weight_reproduces_gram_exactly() {
        let basis = MaxentBasis::new(NodeSet::uniform(-1.0, 1.0, 4).unwrap(), 0.0).unwrap();
        let stats = basis_stats(&grid(50), &basis, Some(|_: &[f64]| 1.0)).unwrap();
        assert_eq!(stats.weighted_gram.as_ref().unwrap(), &stats.gram);
    }

    #[test]
    fn samples_outside_hull_are_reported() {
        let basis = MaxentBasis::new(NodeSet::from_scalars(&[-0.5, 0.5]).unwrap(), 0.0).unwrap();
        let err = grid(11).basis_matrix(&basis).unwrap_err();
        assert!(matches!(err, UqError::Sample { index: 0, .. }));
    }

    #[test]
    fn point_file_round_trip() {
        let m = EmpiricalMeasure::<f64>::read("0.5\n-0.25\n# c\n1e-3\n".as_bytes()).unwrap();
        assert_eq!(m.scalars(), &[0.5, -0.25, 1e-3]);
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert_eq!(EmpiricalMeasure::<f64>::read(buf.as_slice()).unwrap(), m);
    }
}
