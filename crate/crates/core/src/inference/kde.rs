use std::f64::consts::PI;

use crate::empirical::EmpiricalCdf;
use crate::error::{Error, Result};

/// Kernel mass beyond this many bandwidths is dropped (relative weight < 1e-21).
const WINDOW: f64 = 10.0;

/// `1.06 * sd * n^(-1/5)`, with the `n - 1` sample standard deviation.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateSample);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample);
    }
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

/// Gaussian kernel density estimate over one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDensity {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl KernelDensity {
    pub fn silverman(cdf: &EmpiricalCdf) -> Result<Self> {
        let bandwidth = silverman_bandwidth(cdf.values())?;
        Ok(KernelDensity {
            samples: cdf.values().to_vec(),
            bandwidth,
        })
    }

    pub fn with_bandwidth(cdf: &EmpiricalCdf, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if cdf.len() < 2 || cdf.min() == cdf.max() {
            return Err(Error::DegenerateSample);
        }
        Ok(KernelDensity {
            samples: cdf.values().to_vec(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    fn window(&self, y: f64) -> &[f64] {
        let reach = WINDOW * self.bandwidth;
        let lo = self.samples.partition_point(|v| *v < y - reach);
        let hi = self.samples.partition_point(|v| *v <= y + reach);
        &self.samples[lo..hi]
    }

    pub fn density(&self, y: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .window(y)
            .iter()
            .map(|x| {
                let z = (y - x) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        sum / (self.samples.len() as f64 * h * (2.0 * PI).sqrt())
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .window(y)
            .iter()
            .map(|x| {
                let z = (y - x) / h;
                -z * (-0.5 * z * z).exp()
            })
            .sum();
        sum / (self.samples.len() as f64 * h * h * (2.0 * PI).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kd(v: &[f64]) -> KernelDensity {
        KernelDensity::silverman(&EmpiricalCdf::new(v.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn symmetric_derivative_vanishes() {
        assert_eq!(kd(&[-1.0, 1.0]).derivative(0.0), 0.0);
    }

    #[test]
    fn constant_sample_rejected() {
        let c = EmpiricalCdf::new(vec![0.0; 5]).unwrap();
        assert_eq!(KernelDensity::silverman(&c), Err(Error::DegenerateSample));
        assert_eq!(KernelDensity::with_bandwidth(&c, 0.3), Err(Error::DegenerateSample));
    }

    #[test]
    fn integrates_to_one() {
        let k = kd(&[-2.0, -0.3, 0.1, 0.4, 1.7, 3.0, 3.1]);
        let (lo, hi, m) = (-15.0, 18.0, 20_000);
        let step = (hi - lo) / m as f64;
        let mut total = 0.0;
        for i in 0..=m {
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            total += w * k.density(lo + i as f64 * step);
        }
        assert_relative_eq!(total * step, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let k = kd(&[0.0, 0.5, 2.0, 2.2]);
        for y in [-1.0, 0.3, 1.1, 2.5] {
            let h = 1e-6;
            let fd = (k.density(y + h) - k.density(y - h)) / (2.0 * h);
            assert_relative_eq!(k.derivative(y), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn positive_on_sample_range() {
        let k = kd(&[0.0, 100.0, 200.0]);
        for y in [0.0, 50.0, 150.0, 200.0] {
            assert!(k.density(y) > 0.0);
        }
    }

    #[test]
    fn silverman_value() {
        // sd of [1,2,3,4] with n-1 divisor is sqrt(5/3).
        let h = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(h, 1.06 * (5.0f64 / 3.0).sqrt() * 4f64.powf(-0.2), epsilon = 1e-14);
    }
}
