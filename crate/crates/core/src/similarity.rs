//! Gaussian-kernel correntropy and the Correntropy-Induced Metric (CIM).
//!
//! The kernel carries no `1/(sqrt(2*pi)*sigma)` normalization, so the
//! estimated correntropy and the CIM both lie in `[0, 1]`. A CIM of exactly 1
//! only appears once every coordinate's kernel has underflowed to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel bandwidth. Always strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Bandwidth(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "bandwidth must be finite and > 0, got {value}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Bandwidth {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Bandwidth::new(value)
    }
}

impl From<Bandwidth> for f64 {
    fn from(b: Bandwidth) -> f64 {
        b.0
    }
}

/// `exp(-(a-b)^2 / (2 sigma^2))`.
pub fn gaussian_kernel(a: f64, b: f64, sigma: Bandwidth) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "kernel inputs must be finite, got ({a}, {b})"
        )));
    }
    Ok(kernel_raw(a, b, sigma.0))
}

/// Estimated correntropy: the mean of the coordinate-wise Gaussian kernel.
pub fn correntropy(x: &[f64], y: &[f64], sigma: Bandwidth) -> Result<f64> {
    check_pair(x, y)?;
    Ok(correntropy_raw(x, y, sigma.0))
}

/// `sqrt(1 - correntropy(x, y, sigma))`.
pub fn cim(x: &[f64], y: &[f64], sigma: Bandwidth) -> Result<f64> {
    check_pair(x, y)?;
    Ok(cim_raw(x, y, sigma.0))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("empty vector".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite coordinate".into()));
    }
    Ok(())
}

#[inline]
pub(crate) fn kernel_raw(a: f64, b: f64, sigma: f64) -> f64 {
    let diff = a - b;
    (-(diff * diff) / (2.0 * sigma * sigma)).exp()
}

#[inline]
pub(crate) fn correntropy_raw(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let mut sum = 0.0;
    for (a, b) in x.iter().zip(y) {
        sum += kernel_raw(*a, *b, sigma);
    }
    sum / x.len() as f64
}

/// Unchecked CIM used on hot paths once dimensions have been validated.
#[inline]
pub(crate) fn cim_raw(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    (1.0 - correntropy_raw(x, y, sigma)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bw(v: f64) -> Bandwidth {
        Bandwidth::new(v).unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(gaussian_kernel(0.0, 0.0, bw(1.0)).unwrap(), 1.0);
        assert!((gaussian_kernel(0.0, 1.0, bw(1.0)).unwrap() - 0.606531).abs() < 1e-6);
        assert_eq!(gaussian_kernel(2.0, 2.0, bw(0.1)).unwrap(), 1.0);
    }

    #[test]
    fn kernel_rejects_bad_input() {
        assert!(gaussian_kernel(f64::NAN, 0.0, bw(1.0)).is_err());
        assert!(gaussian_kernel(0.0, f64::INFINITY, bw(1.0)).is_err());
        assert!(Bandwidth::new(0.0).is_err());
        assert!(Bandwidth::new(-1.0).is_err());
        assert!(Bandwidth::new(f64::NAN).is_err());
    }

    #[test]
    fn correntropy_examples() {
        let x = [0.3, -1.2, 7.0];
        assert_eq!(correntropy(&x, &x, bw(0.5)).unwrap(), 1.0);
        let c = correntropy(&[0.0, 0.0], &[1.0, 1.0], bw(1.0)).unwrap();
        assert!((c - 0.606531).abs() < 1e-6);
        let c = correntropy(&[0.0, 0.0], &[1.0, 0.0], bw(1.0)).unwrap();
        assert!((c - 0.803265).abs() < 1e-6);
    }

    #[test]
    fn cim_examples() {
        let x = [4.0, 5.0];
        assert_eq!(cim(&x, &x, bw(3.0)).unwrap(), 0.0);
        // sqrt(1 - exp(-0.5)) = 0.6272713...
        assert!((cim(&[0.0], &[1.0], bw(1.0)).unwrap() - 0.627_271).abs() < 1e-6);
        assert!((cim(&[0.0, 0.0], &[1.0, 0.0], bw(1.0)).unwrap() - 0.443548).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(matches!(
            cim(&[0.0, 1.0], &[0.0], bw(1.0)),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(correntropy(&[], &[], bw(1.0)).is_err());
    }

    #[test]
    fn bandwidth_serde_rejects_zero() {
        assert!(serde_json::from_str::<Bandwidth>("0.0").is_err());
        let b: Bandwidth = serde_json::from_str("0.25").unwrap();
        assert_eq!(b.value(), 0.25);
    }
}
