//! Empirical 1-Wasserstein distance to a centered Gaussian and log-log rate
//! regression.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::moments::asymptotic_constants;
use crate::rng::{mix_seed, RandomState};
use crate::simulate::{check_horizon, HawkesModel};
use crate::stats::{replicate, MeanEstimate};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_PURPOSE: u64 = 0xB007;
const FLOOR_PURPOSE: u64 = 0xF100;
const FLOOR_REPLICATIONS: usize = 32;

/// Which normalized statistic a distance series is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// `F_T = (X_T − m∫λ)/√T`, limit variance `σ²ϑ²`.
    F,
    /// `Y_T = (H_T − E[H_T])/√T`, limit variance `σ̃²`.
    Y,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::F => "F",
            Statistic::Y => "Y",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "F" | "f" => Ok(Statistic::F),
            "Y" | "y" => Ok(Statistic::Y),
            other => Err(Error::InvalidParameter(format!("unknown statistic {other:?}"))),
        }
    }
}

impl Statistic {
    /// Variance of the Gaussian limit of this statistic under `model`.
    pub fn limit_variance(self, model: &HawkesModel) -> f64 {
        let c = asymptotic_constants(&model.kernel, model.mu, &model.marks);
        match self {
            Statistic::F => c.limit_variance,
            Statistic::Y => c.sigma2_tilde,
        }
    }

    pub fn evaluate(self, model: &HawkesModel, path: &crate::simulate::HawkesPath) -> f64 {
        match self {
            Statistic::F => model.statistic_f(path),
            Statistic::Y => model.statistic_y(path),
        }
    }
}

/// `Q((i − 0.5)/n)` for `i = 1..n`, with `Q` the standard normal quantile.
pub fn midpoint_quantiles(n: usize) -> Vec<f64> {
    let normal = Normal::standard();
    (1..=n).map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64)).collect()
}

fn check_gamma2(gamma2: f64) -> Result<()> {
    if gamma2 > 0.0 && gamma2.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("gamma2 must be positive, got {gamma2}")))
    }
}

fn w1_sorted(sorted: &[f64], gamma: f64, quantiles: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().zip(quantiles).map(|(x, q)| (x - gamma * q).abs()).sum::<f64>() / n
}

fn sort(samples: &mut [f64]) {
    samples.sort_unstable_by(f64::total_cmp);
}

/// `(1/n) Σ |x₍ᵢ₎ − γ Q((i − 0.5)/n)|` over the sorted sample.
pub fn empirical_w1_to_gaussian(samples: &[f64], gamma2: f64) -> Result<f64> {
    check_gamma2(gamma2)?;
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sort(&mut sorted);
    Ok(w1_sorted(&sorted, gamma2.sqrt(), &midpoint_quantiles(sorted.len())))
}

/// Bootstrap standard error of the W₁ estimate from `resamples` draws with
/// replacement.
pub fn bootstrap_w1_se(samples: &[f64], gamma2: f64, resamples: usize, state: &RandomState) -> Result<f64> {
    check_gamma2(gamma2)?;
    let n = samples.len();
    if n == 0 || resamples < 2 {
        return Err(Error::Domain("bootstrap needs samples and at least two resamples".into()));
    }
    let quantiles = midpoint_quantiles(n);
    let gamma = gamma2.sqrt();
    let values: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = state.derive(b as u64).generator();
            let mut draw: Vec<f64> = (0..n).map(|_| samples[rng.random_range(0..n)]).collect();
            sort(&mut draw);
            w1_sorted(&draw, gamma, &quantiles)
        })
        .collect();
    Ok(MeanEstimate::from_samples(&values).sd)
}

/// Mean W₁ between `n` exact `N(0, γ²)` draws and `N(0, γ²)`: the level
/// below which the estimator cannot resolve a distance.
pub fn w1_floor(n: usize, gamma2: f64, seed: u64) -> Result<f64> {
    check_gamma2(gamma2)?;
    if n == 0 {
        return Err(Error::Domain("no samples".into()));
    }
    let quantiles = midpoint_quantiles(n);
    let normal = rand_distr::StandardNormal;
    let values: Vec<f64> = (0..FLOOR_REPLICATIONS)
        .into_par_iter()
        .map(|r| {
            let mut rng = RandomState::new(mix_seed(seed, FLOOR_PURPOSE), r as u64).generator();
            let mut draw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(normal)).collect();
            sort(&mut draw);
            w1_sorted(&draw, 1.0, &quantiles)
        })
        .collect();
    Ok(gamma2.sqrt() * MeanEstimate::from_samples(&values).mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEntry {
    pub horizon: f64,
    pub n: usize,
    pub d_hat: f64,
    pub se_boot: f64,
    /// Estimator floor at this `n` and variance.
    pub floor: f64,
}

impl DistanceEntry {
    /// Whether the estimator floor exceeds a quarter of the estimate.
    pub fn floor_dominated(&self) -> bool {
        self.floor > 0.25 * self.d_hat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSeries {
    pub entries: Vec<DistanceEntry>,
    pub statistic: Statistic,
    pub gamma2: f64,
}

/// Simulates `n` paths at every horizon of `horizons` and measures the W₁
/// distance of the statistic to `N(0, γ²)`. `γ²` defaults to the limit
/// variance of the statistic. Horizon `j` uses grid point `j` of `seed`.
pub fn distance_curve(
    model: &HawkesModel,
    horizons: &[f64],
    n: usize,
    statistic: Statistic,
    gamma2: Option<f64>,
    seed: u64,
) -> Result<DistanceSeries> {
    if n < 2 {
        return Err(Error::Domain("at least two paths per horizon are needed".into()));
    }
    let gamma2 = gamma2.unwrap_or_else(|| statistic.limit_variance(model));
    check_gamma2(gamma2)?;
    for &t in horizons {
        check_horizon(t)?;
    }
    if horizons.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("horizons must be strictly increasing".into()));
    }
    let floor = w1_floor(n, gamma2, seed)?;
    let mut entries = Vec::with_capacity(horizons.len());
    for (j, &t) in horizons.iter().enumerate() {
        let samples = replicate(n, |r| {
            let path = model.simulate(t, &RandomState::for_replication(seed, r as u64, j as u64))?;
            Ok(statistic.evaluate(model, &path))
        })?;
        let d_hat = empirical_w1_to_gaussian(&samples, gamma2)?;
        let boot_state = RandomState::new(mix_seed(seed, BOOTSTRAP_PURPOSE), j as u64);
        let se_boot = bootstrap_w1_se(&samples, gamma2, BOOTSTRAP_RESAMPLES, &boot_state)?;
        entries.push(DistanceEntry { horizon: t, n, d_hat, se_boot, floor });
    }
    Ok(DistanceSeries { entries, statistic, gamma2 })
}

pub const DISTANCE_HEADER: &str = "T,n,d_hat,se_boot,gamma2,statistic";

pub fn write_distance_csv<W: Write>(mut w: W, series: &DistanceSeries) -> io::Result<()> {
    writeln!(w, "{DISTANCE_HEADER}")?;
    for e in &series.entries {
        writeln!(w, "{},{},{},{},{},{}", e.horizon, e.n, e.d_hat, e.se_boot, series.gamma2, series.statistic)?;
    }
    Ok(())
}

/// Least squares fit of `log d = intercept + slope · log T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(series: &DistanceSeries) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = series.entries.iter().map(|e| (e.horizon, e.d_hat)).collect();
    fit_power_law(&points)
}

/// Least squares on `(log x, log y)`; needs at least four points, all positive.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::Domain(format!("rate fit needs at least 4 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Domain(format!("rate fit needs positive values, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("rate fit needs distinct horizons".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept: my - slope * mx, r_squared })
}

pub const RATEFIT_HEADER: &str = "slope,intercept,r_squared";

pub fn write_ratefit_csv<W: Write>(mut w: W, fit: &RateFit) -> io::Result<()> {
    writeln!(w, "{RATEFIT_HEADER}")?;
    writeln!(w, "{},{},{}", fit.slope, fit.intercept, fit.r_squared)
}
