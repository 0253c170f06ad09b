//! Arbitrary polynomial chaos: polynomials orthonormal under an empirical
//! measure, built from the sample moments.
//!
//! Monomials of the standardised samples `z = (Δ - mean) / std` are
//! orthonormalised by modified Gram-Schmidt with one full re-orthogonalisation
//! pass, under the inner product `<u, v> = (1/n_D) Σ_j u(Δ_j) v(Δ_j)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::basis::{Basis, BasisKind};
use crate::error::{Result, UqError};
use crate::measure::EmpiricalMeasure;
use crate::scalar::{csv_row, from_usize, Real};

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 12;

/// Raw moments `μ_k = (1/n_D) Σ_j Δ_j^k` for `k = 0..=order`.
pub fn raw_moments<T: Real>(measure: &EmpiricalMeasure<T>, order: usize) -> Result<Vec<T>> {
    require_scalar(measure)?;
    let n = from_usize::<T>(measure.len());
    Ok((0..=order)
        .map(|k| {
            if k == 0 {
                return T::one();
            }
            measure
                .scalars()
                .iter()
                .fold(T::zero(), |acc, &x| acc + x.powi(k as i32))
                / n
        })
        .collect())
}

fn require_scalar<T: Real>(measure: &EmpiricalMeasure<T>) -> Result<()> {
    if measure.dim() != 1 {
        return Err(UqError::InvalidInput(format!(
            "polynomial chaos baseline is one-dimensional, samples have dimension {}",
            measure.dim()
        )));
    }
    Ok(())
}

/// Orthonormal polynomial basis `φ_0, ..., φ_P` with `φ_0 ≡ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis<T: Real> {
    degree: usize,
    coeffs: DMatrix<T>,
    standardized: DMatrix<T>,
    center: T,
    scale: T,
    measure_id: u64,
}

impl<T: Real> PolyBasis<T> {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Row `k` holds the monomial coefficients (ascending powers of `Δ`) of `φ_k`.
    pub fn coeffs(&self) -> &DMatrix<T> {
        &self.coeffs
    }

    /// Fingerprint of the measure the basis is orthonormal under.
    pub fn measure_id(&self) -> u64 {
        self.measure_id
    }

    /// `(φ_0(Δ), ..., φ_P(Δ))`.
    pub fn eval_at(&self, x: T) -> DVector<T> {
        let z = (x - self.center) / self.scale;
        DVector::from_iterator(
            self.degree + 1,
            self.standardized.row_iter().map(|row| horner(row.iter().copied(), z)),
        )
    }

    /// Same values computed from the exported monomial coefficients.
    pub fn eval_monomial(&self, x: T) -> DVector<T> {
        DVector::from_iterator(
            self.degree + 1,
            self.coeffs.row_iter().map(|row| horner(row.iter().copied(), x)),
        )
    }

    /// CSV with header `k,c0,...,cP`, one row per polynomial.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        let header: Vec<String> = (0..=self.degree).map(|i| format!("c{i}")).collect();
        writeln!(writer, "k,{}", header.join(","))?;
        for (k, row) in self.coeffs.row_iter().enumerate() {
            let values: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
            writeln!(writer, "{k},{}", csv_row(&values))?;
        }
        Ok(())
    }
}

fn horner<T: Real>(ascending: impl DoubleEndedIterator<Item = T>, x: T) -> T {
    ascending.rev().fold(T::zero(), |acc, c| acc * x + c)
}

/// Builds polynomials of degree `0..=degree` orthonormal under `measure`.
pub fn build_orthonormal<T: Real>(measure: &EmpiricalMeasure<T>, degree: usize) -> Result<PolyBasis<T>> {
    require_scalar(measure)?;
    if degree > MAX_DEGREE {
        return Err(UqError::InvalidInput(format!(
            "degree {degree} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    let n = measure.len();
    if n <= degree {
        return Err(UqError::Conditioning { degree, pivot: 0.0 });
    }
    let nf = from_usize::<T>(n);
    let xs = measure.scalars();
    let center = xs.iter().fold(T::zero(), |a, &x| a + x) / nf;
    let spread = (xs.iter().fold(T::zero(), |a, &x| a + (x - center) * (x - center)) / nf).sqrt();
    let scale = if spread > T::zero() { spread } else { T::one() };

    let z: Vec<T> = xs.iter().map(|&x| (x - center) / scale).collect();
    let inner = |u: &[T], v: &[T]| u.iter().zip(v).fold(T::zero(), |a, (&p, &q)| a + p * q) / nf;
    let threshold = T::EPSILON.sqrt() * T::lit(1e-2);

    let size = degree + 1;
    let mut columns: Vec<Vec<T>> = Vec::with_capacity(size);
    let mut std_coeffs = DMatrix::<T>::zeros(size, size);
    for k in 0..size {
        let mut v: Vec<T> = z.iter().map(|&zj| zj.powi(k as i32)).collect();
        let mut c = DVector::<T>::zeros(size);
        c[k] = T::one();
        let initial = inner(&v, &v).sqrt();
        for _pass in 0..2 {
            for (j, q) in columns.iter().enumerate() {
                let r = inner(q, &v);
                for (vi, &qi) in v.iter_mut().zip(q) {
                    *vi -= r * qi;
                }
                for i in 0..size {
                    let cij = std_coeffs[(j, i)];
                    c[i] -= r * cij;
                }
            }
        }
        let norm = inner(&v, &v).sqrt();
        let pivot = if initial > T::zero() { norm / initial } else { T::zero() };
        if !(pivot > threshold) {
            return Err(UqError::Conditioning {
                degree: k,
                pivot: pivot.as_f64(),
            });
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        for i in 0..size {
            std_coeffs[(k, i)] = c[i] / norm;
        }
        columns.push(v);
    }

    // Expand z^i = ((Δ - center)/scale)^i in powers of Δ.
    let mut coeffs = DMatrix::<T>::zeros(size, size);
    for k in 0..size {
        for i in 0..=k {
            let ci = std_coeffs[(k, i)];
            if ci == T::zero() {
                continue;
            }
            let denom = scale.powi(i as i32);
            let mut binom = T::one();
            for m in (0..=i).rev() {
                // binom = C(i, m); (-center)^(i - m)
                let term = ci * binom * (-center).powi((i - m) as i32) / denom;
                coeffs[(k, m)] += term;
                if m > 0 {
                    binom = binom * from_usize::<T>(m) / from_usize::<T>(i - m + 1);
                }
            }
        }
    }

    Ok(PolyBasis {
        degree,
        coeffs,
        standardized: std_coeffs,
        center,
        scale,
        measure_id: measure.fingerprint(),
    })
}

/// `(φ_0(Δ), ..., φ_P(Δ))` for a built basis.
pub fn eval_poly_basis<T: Real>(basis: &PolyBasis<T>, query: T) -> DVector<T> {
    basis.eval_at(query)
}

impl<T: Real> Basis<T> for PolyBasis<T> {
    fn len(&self) -> usize {
        self.degree + 1
    }

    fn dim(&self) -> usize {
        1
    }

    fn kind(&self) -> BasisKind {
        BasisKind::Apc
    }

    fn eval(&self, query: &[T]) -> Result<DVector<T>> {
        match query {
            [x] => Ok(self.eval_at(*x)),
            _ => Err(UqError::InvalidInput(format!(
                "polynomial basis takes scalar queries, got dimension {}",
                query.len()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{BasisStats, SampleGenerator};

    fn grid(count: usize) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::generate(SampleGenerator::UniformGrid {
            lo: -1.0,
            hi: 1.0,
            count,
        })
        .unwrap()
    }

    #[test]
    fn moments_of_uniform_grid() {
        let m = raw_moments(&grid(500), 2).unwrap();
        assert_eq!(m[0], 1.0);
        assert!(m[1].abs() < 1e-12);
        assert!((m[2] - 1.0 / 3.0).abs() < 1e-2);
    }

    #[test]
    fn degree_zero_is_constant() {
        let b = build_orthonormal(&grid(7), 0).unwrap();
        assert_eq!(b.coeffs().as_slice(), &[1.0]);
        assert_eq!(eval_poly_basis(&b, 123.0).as_slice(), &[1.0]);
    }

    #[test]
    fn recovers_normalised_legendre() {
        let b = build_orthonormal(&grid(500), 2).unwrap();
        let c = b.coeffs();
        assert!((c[(1, 0)]).abs() < 1e-10);
        assert!((c[(1, 1)] - 3f64.sqrt()).abs() < 1e-2);
        let s5 = 5f64.sqrt() / 2.0;
        assert!((c[(2, 0)] + s5).abs() < 2e-2);
        assert!((c[(2, 2)] - 3.0 * s5).abs() < 2e-2);
        assert_eq!(c[(0, 1)], 0.0);

        let at0 = eval_poly_basis(&b, 0.0);
        assert!((at0[0] - 1.0).abs() < 1e-15 && at0[1].abs() < 1e-10);
        let at1 = eval_poly_basis(&b, 1.0);
        assert!((at1[1] - 1.732).abs() < 1e-2);
    }

    #[test]
    fn empirical_gram_is_identity() {
        let m = grid(500);
        let b = build_orthonormal(&m, 9).unwrap();
        let phi = m.basis_matrix(&b).unwrap();
        let stats = BasisStats::from_matrix(&phi, None).unwrap();
        let err = (stats.gram - DMatrix::identity(10, 10)).abs().max();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn monomial_and_standardised_evaluation_agree() {
        let m = EmpiricalMeasure::<f64>::generate(SampleGenerator::InteriorGrid {
            lo: 0.0,
            hi: 1.0,
            count: 500,
        })
        .unwrap();
        let b = build_orthonormal(&m, 6).unwrap();
        for x in [0.01, 0.3, 0.77, 0.99] {
            let diff = (b.eval_at(x) - b.eval_monomial(x)).abs().max();
            assert!(diff < 1e-8, "{diff}");
        }
    }

    #[test]
    fn too_few_distinct_samples_is_a_conditioning_error() {
        let m = EmpiricalMeasure::from_scalars(&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let err = build_orthonormal(&m, 2).unwrap_err();
        assert!(matches!(err, UqError::Conditioning { degree: 2, .. }));
        assert!(build_orthonormal(&grid(3), 3).is_err());
        assert!(build_orthonormal(&grid(100), MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn csv_export_has_one_row_per_polynomial() {
        let b = build_orthonormal(&grid(50), 2).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,c0,c1,c2");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,1,0,0"));
    }
}
