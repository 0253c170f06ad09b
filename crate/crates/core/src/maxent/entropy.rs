//! Shannon entropy and Kullback-Leibler divergence of discrete distributions.

use crate::error::{Result, UqError};
use crate::scalar::Real;

fn check_probability<T: Real>(p: &[T], name: &str) -> Result<()> {
    if p.is_empty() {
        return Err(UqError::InvalidInput(format!("{name} is empty")));
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite() || *v < T::zero()) {
        return Err(UqError::InvalidInput(format!(
            "{name}[{i}] = {} is not a non-negative probability",
            p[i].as_f64()
        )));
    }
    let total: T = p.iter().fold(T::zero(), |acc, &v| acc + v);
    if (total - T::one()).abs() > T::lit(1e-9).max(T::EPSILON * T::lit(64.0)) {
        return Err(UqError::InvalidInput(format!(
            "{name} sums to {} instead of 1",
            total.as_f64()
        )));
    }
    Ok(())
}

/// `H(p) = -Σ p_i log p_i`, with `0 log 0 = 0`.
pub fn entropy<T: Real>(p: &[T]) -> Result<T> {
    check_probability(p, "p")?;
    Ok(p.iter()
        .filter(|v| **v > T::zero())
        .fold(T::zero(), |acc, &v| acc - v * v.ln()))
}

/// `H̄(p, m) = Σ p_i log(p_i / m_i)`.
pub fn relative_entropy<T: Real>(p: &[T], m: &[T]) -> Result<T> {
    check_probability(p, "p")?;
    if p.len() != m.len() {
        return Err(UqError::InvalidInput(format!(
            "length mismatch: p has {}, m has {}",
            p.len(),
            m.len()
        )));
    }
    if let Some(i) = m.iter().position(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(UqError::InvalidInput(format!(
            "prior m[{i}] = {} must be strictly positive",
            m[i].as_f64()
        )));
    }
    Ok(p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > T::zero())
        .fold(T::zero(), |acc, (&pi, &mi)| acc + pi * (pi / mi).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[1.0, 0.0]).unwrap(), 0.0);
        let h = entropy(&[0.25f64; 4]).unwrap();
        assert!((h - 4f64.ln()).abs() < 1e-15);
        let h = entropy(&[0.375f64, 0.625]).unwrap();
        let expected = -0.375f64 * 0.375f64.ln() - 0.625 * 0.625f64.ln();
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.661563).abs() < 1e-6);
    }

    #[test]
    fn entropy_rejects_bad_input() {
        assert!(entropy(&[-0.1, 1.1]).is_err());
        assert!(entropy(&[0.5, 0.6]).is_err());
        assert!(entropy::<f64>(&[]).is_err());
    }

    #[test]
    fn relative_entropy_examples() {
        assert_eq!(relative_entropy(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let d = relative_entropy(&[1.0f64, 0.0], &[0.5, 0.5]).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-15);
        let d = relative_entropy(&[0.5f64, 0.5], &[0.25, 0.75]).unwrap();
        assert!((d - (0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln())).abs() < 1e-15);
        assert!((d - 0.143841).abs() < 1e-6);
    }

    #[test]
    fn relative_entropy_needs_positive_prior() {
        assert!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0]).is_err());
        assert!(relative_entropy(&[0.5, 0.5], &[1.5, -0.5]).is_err());
    }
}
