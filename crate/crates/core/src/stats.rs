//! Small Monte Carlo helpers shared by the estimators.

use rayon::prelude::*;

use crate::error::Result;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_err: f64::NAN, sd: f64::NAN, n };
        }
        // Welford, in input order so results are reproducible bit for bit.
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (x - mean);
        }
        let sd = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { mean, std_err: sd / (n as f64).sqrt(), sd, n }
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Runs `n` independent replications in parallel, returning results in
/// replication order.
pub fn replicate<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Weights of the composite trapezoid rule on `k` uniform points over [a, b].
pub fn trapezoid_weights(a: f64, b: f64, k: usize) -> Vec<f64> {
    assert!(k >= 2, "trapezoid rule needs at least two points");
    let h = (b - a) / (k - 1) as f64;
    (0..k)
        .map(|i| if i == 0 || i == k - 1 { 0.5 * h } else { h })
        .collect()
}

/// `k` uniform points on [a, b], endpoints included.
pub fn uniform_grid(a: f64, b: f64, k: usize) -> Vec<f64> {
    assert!(k >= 2);
    let h = (b - a) / (k - 1) as f64;
    (0..k)
        .map(|i| if i == k - 1 { b } else { a + h * i as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let e = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert!((e.mean - 2.5).abs() < 1e-15);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.sd - sd).abs() < 1e-12);
        assert!((e.std_err - sd / 2.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = uniform_grid(0.0, 3.0, 7);
        let w = trapezoid_weights(0.0, 3.0, 7);
        let s: f64 = g.iter().zip(&w).map(|(t, w)| w * (2.0 * t + 1.0)).sum();
        assert!((s - 12.0).abs() < 1e-12);
    }

    #[test]
    fn replicate_preserves_order() {
        let v = replicate(100, |i| Ok(i * 2)).unwrap();
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
