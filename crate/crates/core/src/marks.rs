//! Jump-size (mark) distributions.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Law {
    PointMassOne,
    /// Value `a` with probability `p`, `b` otherwise.
    TwoPoint { a: f64, b: f64, p: f64 },
    Gaussian(Normal<f64>),
    Lognormal(LogNormal<f64>),
    Empirical(Vec<f64>),
}

/// Mark law `ν` with its first moment `m`, second moment `ϑ²` and third
/// absolute moment, computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkDistribution {
    law: Law,
    m: f64,
    theta2: f64,
    abs3: f64,
}

impl MarkDistribution {
    pub fn point_mass_one() -> Self {
        Self { law: Law::PointMassOne, m: 1.0, theta2: 1.0, abs3: 1.0 }
    }

    pub fn two_point(a: f64, b: f64, p: f64) -> Result<Self> {
        ensure_finite("a", a)?;
        ensure_finite("b", b)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("two-point probability {p} not in [0, 1]")));
        }
        if (a == 0.0 && p > 0.0) || (b == 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter("marks may not have an atom at 0".into()));
        }
        let q = 1.0 - p;
        let m = p * a + q * b;
        let theta2 = p * a * a + q * b * b;
        let abs3 = p * a.abs().powi(3) + q * b.abs().powi(3);
        Ok(Self { law: Law::TwoPoint { a, b, p }, m, theta2, abs3 })
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        ensure_finite("mean", mean)?;
        ensure_finite("sd", sd)?;
        if sd <= 0.0 {
            return Err(Error::InvalidParameter("gaussian marks need sd > 0".into()));
        }
        let normal = Normal::new(mean, sd)
            .map_err(|e| Error::InvalidParameter(format!("gaussian marks: {e}")))?;
        Ok(Self {
            law: Law::Gaussian(normal),
            m: mean,
            theta2: mean * mean + sd * sd,
            abs3: gaussian_abs3(mean, sd),
        })
    }

    pub fn lognormal(logmean: f64, logsd: f64) -> Result<Self> {
        ensure_finite("logmean", logmean)?;
        ensure_finite("logsd", logsd)?;
        if logsd < 0.0 {
            return Err(Error::InvalidParameter("lognormal marks need logsd >= 0".into()));
        }
        let law = LogNormal::new(logmean, logsd)
            .map_err(|e| Error::InvalidParameter(format!("lognormal marks: {e}")))?;
        let s2 = logsd * logsd;
        let moment = |k: f64| (k * logmean + 0.5 * k * k * s2).exp();
        let (m, theta2, abs3) = (moment(1.0), moment(2.0), moment(3.0));
        for (name, v) in [("mean", m), ("second moment", theta2), ("third moment", abs3)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("lognormal {name} overflows")));
            }
        }
        Ok(Self { law: Law::Lognormal(law), m, theta2, abs3 })
    }

    /// Uniform draw from a stored sample; moments are the sample moments.
    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empirical marks need at least one value".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("empirical marks must be finite".into()));
        }
        if values.contains(&0.0) {
            return Err(Error::InvalidParameter("marks may not have an atom at 0".into()));
        }
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        let theta2 = values.iter().map(|v| v * v).sum::<f64>() / n;
        let abs3 = values.iter().map(|v| v.abs().powi(3)).sum::<f64>() / n;
        if !(theta2.is_finite() && abs3.is_finite()) {
            return Err(Error::InvalidParameter("empirical mark moments overflow".into()));
        }
        Ok(Self { law: Law::Empirical(values), m, theta2, abs3 })
    }

    /// `m = ∫ x ν(dx)`.
    pub fn mean(&self) -> f64 {
        self.m
    }

    /// `ϑ² = ∫ x² ν(dx)`.
    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    /// `∫ |x|³ ν(dx)`.
    pub fn abs3(&self) -> f64 {
        self.abs3
    }

    /// `∫ |x| ν(dx)`.
    pub fn abs1(&self) -> f64 {
        match &self.law {
            Law::PointMassOne => 1.0,
            Law::TwoPoint { a, b, p } => p * a.abs() + (1.0 - p) * b.abs(),
            Law::Gaussian(n) => gaussian_abs1(n.mean(), n.std_dev()),
            Law::Lognormal(_) => self.m,
            Law::Empirical(v) => v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64,
        }
    }

    /// `∫ x|x| ν(dx)`.
    pub fn signed_square(&self) -> f64 {
        match &self.law {
            Law::PointMassOne => 1.0,
            Law::TwoPoint { a, b, p } => p * a * a.abs() + (1.0 - p) * b * b.abs(),
            Law::Gaussian(n) => gaussian_signed_square(n.mean(), n.std_dev()),
            Law::Lognormal(_) => self.theta2,
            Law::Empirical(v) => v.iter().map(|x| x * x.abs()).sum::<f64>() / v.len() as f64,
        }
    }

    /// `(m, ϑ², E|Y|³)`.
    pub fn moments(&self) -> (f64, f64, f64) {
        (self.m, self.theta2, self.abs3)
    }

    pub fn is_point_mass_one(&self) -> bool {
        matches!(self.law, Law::PointMassOne)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::PointMassOne => 1.0,
            Law::TwoPoint { a, b, p } => {
                if rng.random::<f64>() < *p {
                    *a
                } else {
                    *b
                }
            }
            Law::Gaussian(n) => n.sample(rng),
            Law::Lognormal(l) => l.sample(rng),
            Law::Empirical(v) => v[rng.random_range(0..v.len())],
        }
    }
}

/// `E|X|` for `X ~ N(mean, sd²)`.
fn gaussian_abs1(mean: f64, sd: f64) -> f64 {
    let r = mean / sd;
    let phi = StdNormal::standard();
    sd * ((2.0 / std::f64::consts::PI).sqrt() * (-0.5 * r * r).exp() + r * (2.0 * phi.cdf(r) - 1.0))
}

/// `E[X|X|]` for `X ~ N(mean, sd²)`.
fn gaussian_signed_square(mean: f64, sd: f64) -> f64 {
    let r = mean / sd;
    let phi = StdNormal::standard();
    let density = (-0.5 * r * r).exp() / (2.0 * std::f64::consts::PI).sqrt();
    sd * sd * ((1.0 + r * r) * (2.0 * phi.cdf(r) - 1.0) + 2.0 * r * density)
}

/// `E|X|³` for `X ~ N(mean, sd²)`.
fn gaussian_abs3(mean: f64, sd: f64) -> f64 {
    let r = mean / sd;
    let phi = StdNormal::standard();
    let tail = (2.0 / std::f64::consts::PI).sqrt() * (r * r + 2.0) * (-0.5 * r * r).exp();
    sd.powi(3) * (tail + r * (r * r + 3.0) * (2.0 * phi.cdf(r) - 1.0))
}
