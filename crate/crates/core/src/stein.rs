//! Monte Carlo estimates of the Stein-Malliavin bound on `d_W(F_T, G)`.
//!
//! For `F_T = (X_T − m∫λ)/√T` and `G ~ N(0, σ²ϑ²)` the bound splits as
//!
//! ```text
//! A₁,₁ = |σ²ϑ² − (ϑ²/T) E[H_T]|                 exact
//! A₁,₂ = E|∫₀ᵀ (λ_t − E[λ_t]) dt| / T
//! A₁,₃ = E|∫₀ᵀ λ_t M̂ᵗ_T dt| / T
//! A₂,₁ = E[H_T] / T^{3/2}                       exact
//! A₂,₂ = E[∫₀ᵀ λ_t |M̂ᵗ_T|² dt] / T^{3/2}
//! ```
//!
//! and `d_W ≤ A₁,₁ + ϑ²A₁,₂ + |m|A₁,₃ + E|Y|³A₂,₁ + E|Y|A₂,₂`. The last two
//! terms are the exact value of the second-order Stein term: expanding
//! `|x + M̂|²` leaves a cross term `2E[Y|Y|]·E[∫λ_t M̂ᵗ_T dt]`, which is zero
//! because `M̂ᵗ` is a martingale started at 0 at time `t`.

use std::io::{self, Write};

use crate::coupled::{CoupledRun, ShiftPath, FIELD_PURPOSE};
use crate::error::{Error, Result};
use crate::moments::{asymptotic_constants, expected_count, expected_intensity};
use crate::rng::RandomState;
use crate::simulate::{check_horizon, HawkesModel, HawkesPath};
use crate::stats::{replicate, MeanEstimate};

/// Monte Carlo budget: outer base paths and shift grid size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub n_outer: usize,
    pub k_grid: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { n_outer: 5000, k_grid: 64 }
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermEstimate {
    pub value: f64,
    pub std_err: f64,
}

impl TermEstimate {
    pub const ZERO: TermEstimate = TermEstimate { value: 0.0, std_err: 0.0 };

    fn from_samples(samples: &[f64]) -> Self {
        let est = MeanEstimate::from_samples(samples);
        Self { value: est.mean, std_err: est.std_err }
    }
}

/// All terms of the bound at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub horizon: f64,
    pub a11: f64,
    pub a12: TermEstimate,
    pub a13: TermEstimate,
    pub a21: f64,
    pub a22: TermEstimate,
    /// `A₁,₁ + ϑ²A₁,₂ + |m|A₁,₃ + E|Y|³A₂,₁ + E|Y|A₂,₂`.
    pub total: f64,
    /// Standard error of `total`, from the per-path contributions.
    pub total_se: f64,
    /// The same terms with the second-order part doubled, as produced by
    /// the bound `|x + M̂|² ≤ 2x² + 2M̂²`.
    pub total_doubled: f64,
    /// `A₂,₂` evaluated exactly from the resolvent.
    pub a22_exact: f64,
    /// Deterministic upper bound `(1/T)∫₀ᵀ ψ(T − s) E[H_s]^{1/2} ds` on `A₁,₂`.
    pub a12_proof_bound: f64,
    pub n_outer: usize,
    pub k_grid: usize,
    pub seed: u64,
}

/// `|σ²ϑ² − (ϑ²/T) E[H_T]|`.
pub fn estimate_a11(model: &HawkesModel, horizon: f64) -> f64 {
    let c = asymptotic_constants(&model.kernel, model.mu, &model.marks);
    let theta2 = model.marks.theta2();
    (c.limit_variance - theta2 * expected_count(&model.kernel, model.mu, horizon) / horizon).abs()
}

/// `E[H_T] / T^{3/2}`.
pub fn estimate_a21(model: &HawkesModel, horizon: f64) -> f64 {
    expected_count(&model.kernel, model.mu, horizon) / horizon.powf(1.5)
}

fn check_budget(n: usize, k: Option<usize>) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain("at least two outer replications are needed".into()));
    }
    if k.is_some_and(|k| k < 2) {
        return Err(Error::Domain("shift grid needs at least two points".into()));
    }
    Ok(())
}

/// `|∫₀ᵀ(λ_t − E[λ_t]) dt| / T` for one path.
fn a12_sample(model: &HawkesModel, path: &HawkesPath) -> f64 {
    let expected = expected_count(&model.kernel, model.mu, path.horizon);
    (model.compensator(path) - expected).abs() / path.horizon
}

/// Monte Carlo `A₁,₂` over `n` paths, with exact compensators.
pub fn estimate_a12(model: &HawkesModel, horizon: f64, n: usize, seed: u64, grid_point: u64) -> Result<TermEstimate> {
    check_horizon(horizon)?;
    check_budget(n, None)?;
    let samples = replicate(n, |r| {
        let path = model.simulate(horizon, &RandomState::for_replication(seed, r as u64, grid_point))?;
        Ok(a12_sample(model, &path))
    })?;
    Ok(TermEstimate::from_samples(&samples))
}

/// Per-replication ingredients shared by every term.
#[derive(Debug, Clone, Copy)]
struct PathTerms {
    a12: f64,
    /// `∫λM̂ / T`, signed.
    a13_signed: f64,
    a22: f64,
}

fn coupled_terms(model: &HawkesModel, horizon: f64, k: usize, state: &RandomState) -> Result<PathTerms> {
    let base = model.simulate(horizon, state)?;
    let a12 = a12_sample(model, &base);
    let run = CoupledRun::simulate(model, base, k, &state.derive(FIELD_PURPOSE))?;
    Ok(PathTerms {
        a12,
        a13_signed: run.lambda_hat_m_integral() / horizon,
        a22: run.lambda_hat_m2_integral() / horizon.powf(1.5),
    })
}

fn coupled_samples(model: &HawkesModel, horizon: f64, budget: Budget, seed: u64, grid_point: u64) -> Result<Vec<PathTerms>> {
    check_horizon(horizon)?;
    check_budget(budget.n_outer, Some(budget.k_grid))?;
    replicate(budget.n_outer, |r| {
        coupled_terms(model, horizon, budget.k_grid, &RandomState::for_replication(seed, r as u64, grid_point))
    })
}

/// Monte Carlo `A₁,₃`: the mean of `|∫λ_t M̂ᵗ_T dt|/T` over base paths,
/// each with `k` coupled shifts.
pub fn estimate_a13(model: &HawkesModel, horizon: f64, budget: Budget, seed: u64, grid_point: u64) -> Result<TermEstimate> {
    let terms = coupled_samples(model, horizon, budget, seed, grid_point)?;
    let samples: Vec<f64> = terms.iter().map(|t| t.a13_signed.abs()).collect();
    Ok(TermEstimate::from_samples(&samples))
}

/// `(A₂,₁, A₂,₂)`: the first exact, the second by nested Monte Carlo.
pub fn estimate_a2(model: &HawkesModel, horizon: f64, budget: Budget, seed: u64, grid_point: u64) -> Result<(f64, TermEstimate)> {
    let terms = coupled_samples(model, horizon, budget, seed, grid_point)?;
    let samples: Vec<f64> = terms.iter().map(|t| t.a22).collect();
    Ok((estimate_a21(model, horizon), TermEstimate::from_samples(&samples)))
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn quadrature_intervals(horizon: f64) -> usize {
    ((200.0 * horizon) as usize).clamp(2000, 400_000)
}

/// `A₂,₂ = ϑ² T^{−3/2} ∫₀ᵀ E[λ_t] Ψ₁(T − t) dt`, using
/// `E[|M̂ᵗ_T|² | F_t] = ϑ² ∫ₜᵀ ψ(s − t) ds`.
pub fn a22_exact(model: &HawkesModel, horizon: f64) -> f64 {
    let k = &model.kernel;
    let f = |t: f64| expected_intensity(k, model.mu, t) * k.psi_integral(horizon - t);
    model.marks.theta2() * simpson(f, 0.0, horizon, quadrature_intervals(horizon)) / horizon.powf(1.5)
}

/// `(1/T) ∫₀ᵀ ψ(T − s) E[H_s]^{1/2} ds`, the deterministic bound on `A₁,₂`
/// obtained from `∫(λ − E[λ]) = ∫ψ(T − s)(H_s − ∫₀ˢλ) ds` and Cauchy-Schwarz.
pub fn a12_proof_bound(model: &HawkesModel, horizon: f64) -> f64 {
    let k = &model.kernel;
    // Substituting s = u² removes the square-root singularity at 0.
    let root = horizon.sqrt();
    let f = |u: f64| {
        let s = u * u;
        2.0 * u * k.psi_at(horizon - s) * expected_count(k, model.mu, s).sqrt()
    };
    simpson(f, 0.0, root, quadrature_intervals(horizon)) / horizon
}

/// Every term of the bound from one set of base paths and coupled shifts.
pub fn total_bound(model: &HawkesModel, horizon: f64, budget: Budget, seed: u64, grid_point: u64) -> Result<BoundReport> {
    let abs3 = model.marks.abs3();
    if !abs3.is_finite() {
        return Err(Error::Unsupported("the bound needs a finite third mark moment".into()));
    }
    let terms = coupled_samples(model, horizon, budget, seed, grid_point)?;
    let theta2 = model.marks.theta2();
    let m_abs = model.marks.mean().abs();
    let abs1 = model.marks.abs1();
    let col = |f: fn(&PathTerms) -> f64| -> Vec<f64> { terms.iter().map(f).collect() };
    let a12 = TermEstimate::from_samples(&col(|t| t.a12));
    let a13 = TermEstimate::from_samples(&col(|t| t.a13_signed.abs()));
    let a22 = TermEstimate::from_samples(&col(|t| t.a22));
    let contributions: Vec<f64> = terms
        .iter()
        .map(|t| theta2 * t.a12 + m_abs * t.a13_signed.abs() + abs1 * t.a22)
        .collect();
    let mc = MeanEstimate::from_samples(&contributions);
    let a11 = estimate_a11(model, horizon);
    let a21 = estimate_a21(model, horizon);
    let first = a11 + theta2 * a12.value + m_abs * a13.value;
    let second = abs3 * a21 + abs1 * a22.value;
    Ok(BoundReport {
        horizon,
        a11,
        a12,
        a13,
        a21,
        a22,
        total: first + second,
        total_se: mc.std_err,
        total_doubled: first + 2.0 * second,
        a22_exact: a22_exact(model, horizon),
        a12_proof_bound: a12_proof_bound(model, horizon),
        n_outer: budget.n_outer,
        k_grid: budget.k_grid,
        seed,
    })
}

pub const BOUND_HEADER: &str = "T,a11,a12,a12_se,a13,a13_se,a21,a22,a22_se,total,n_outer,k_grid,seed";

pub fn write_bound_csv<W: Write>(mut w: W, reports: &[BoundReport]) -> io::Result<()> {
    writeln!(w, "{BOUND_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.horizon,
            r.a11,
            r.a12.value,
            r.a12.std_err,
            r.a13.value,
            r.a13.std_err,
            r.a21,
            r.a22.value,
            r.a22.std_err,
            r.total,
            r.n_outer,
            r.k_grid,
            r.seed
        )?;
    }
    Ok(())
}

/// Monte Carlo check of the integration-by-parts identity for `F_T`:
/// `E[F_T²] = (1/T) E[∫₀ᵀ λ_t (ϑ² + m M̂ᵗ_T) dt]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpCheck {
    /// Mean of `F_T²`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// Mean of the per-path right-hand side.
    pub rhs: f64,
    /// Standard error of the paired difference `lhs − rhs`.
    pub combined_se: f64,
    /// `ϑ² E[H_T] / T`, the right-hand side with `E[λ_t M̂ᵗ_T] = 0`.
    pub exact_rhs: f64,
    /// Mean and standard error of `∫λ_t M̂ᵗ_T dt / T`.
    pub orthogonality: TermEstimate,
    pub pass: bool,
}

pub fn ibp_check(model: &HawkesModel, horizon: f64, budget: Budget, seed: u64, grid_point: u64) -> Result<IbpCheck> {
    check_horizon(horizon)?;
    check_budget(budget.n_outer, Some(budget.k_grid))?;
    let theta2 = model.marks.theta2();
    let m = model.marks.mean();
    let rows = replicate(budget.n_outer, |r| {
        let state = RandomState::for_replication(seed, r as u64, grid_point);
        let base = model.simulate(horizon, &state)?;
        let f = model.statistic_f(&base);
        let comp = model.compensator(&base);
        let run = CoupledRun::simulate(model, base, budget.k_grid, &state.derive(FIELD_PURPOSE))?;
        let cross = run.lambda_hat_m_integral() / horizon;
        Ok((f * f, (theta2 * comp) / horizon + m * cross, cross))
    })?;
    let lhs = MeanEstimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let rhs = MeanEstimate::from_samples(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let diff = MeanEstimate::from_samples(&rows.iter().map(|r| r.0 - r.1).collect::<Vec<_>>());
    let orth = TermEstimate::from_samples(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
    let exact_rhs = theta2 * expected_count(&model.kernel, model.mu, horizon) / horizon;
    let pass = diff.mean.abs() <= 4.0 * diff.std_err
        && lhs.within(exact_rhs, 4.0)
        && orth.value.abs() <= 4.0 * orth.std_err;
    Ok(IbpCheck {
        lhs: lhs.mean,
        lhs_se: lhs.std_err,
        rhs: rhs.mean,
        combined_se: diff.std_err,
        exact_rhs,
        orthogonality: orth,
        pass,
    })
}

pub const IBP_HEADER: &str = "lhs,rhs,combined_se,pass";

pub fn write_ibp_csv<W: Write>(mut w: W, check: &IbpCheck) -> io::Result<()> {
    writeln!(w, "{IBP_HEADER}")?;
    writeln!(w, "{},{},{},{}", check.lhs, check.rhs, check.combined_se, check.pass)
}

/// A deterministic weight `t ↦ α_t` for `F = ∫α dX − m∫αλ dt`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFunction {
    Constant(f64),
    /// Piecewise constant: `values[i]` on `[breaks[i], breaks[i + 1])`, the
    /// last value extending to infinity. `breaks[0] = 0`.
    Tabulated { breaks: Vec<f64>, values: Vec<f64> },
}

impl WeightFunction {
    /// `α_t = 1/√T`, which gives back `F_T`.
    pub fn canonical(horizon: f64) -> Self {
        WeightFunction::Constant(1.0 / horizon.sqrt())
    }

    pub fn tabulated(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() || breaks[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "weight table needs matching breaks and values, starting at 0".into(),
            ));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) || values.iter().chain(&breaks).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("weight breaks must be finite and increasing".into()));
        }
        Ok(WeightFunction::Tabulated { breaks, values })
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            WeightFunction::Constant(c) => *c,
            WeightFunction::Tabulated { breaks, values } => {
                values[breaks.partition_point(|&b| b <= t).saturating_sub(1)]
            }
        }
    }

    /// Pieces `(a, b, α)` of `[from, to]` on which the weight is constant.
    fn pieces(&self, from: f64, to: f64) -> Vec<(f64, f64, f64)> {
        match self {
            WeightFunction::Constant(c) => vec![(from, to, *c)],
            WeightFunction::Tabulated { breaks, values } => {
                let mut out = Vec::new();
                for (i, &v) in values.iter().enumerate() {
                    let a = breaks[i].max(from);
                    let b = breaks.get(i + 1).copied().unwrap_or(f64::INFINITY).min(to);
                    if b > a {
                        out.push((a, b, v));
                    }
                }
                out
            }
        }
    }
}

/// `∫_from^to g(α_t) λ̂_t dt` where `λ̂` is driven by `sources`, exactly.
fn weighted_source_integral(
    model: &HawkesModel,
    weight: &WeightFunction,
    g: impl Fn(f64) -> f64,
    sources: impl Iterator<Item = f64> + Clone,
    from: f64,
    to: f64,
) -> f64 {
    let k = &model.kernel;
    weight
        .pieces(from, to)
        .into_iter()
        .map(|(a, b, v)| {
            let mass: f64 = sources.clone().map(|s| k.phi_integral(b - s) - k.phi_integral(a - s)).sum();
            g(v) * mass
        })
        .sum()
}

/// `∫₀ᵀ α_t dX_t − m∫₀ᵀ α_t λ_t dt`.
pub fn weighted_statistic(model: &HawkesModel, path: &HawkesPath, weight: &WeightFunction) -> f64 {
    let jumps: f64 = path.event_times.iter().zip(&path.marks).map(|(&t, &x)| weight.value(t) * x).sum();
    let comp: f64 = weight
        .pieces(0.0, path.horizon)
        .into_iter()
        .map(|(a, b, v)| v * model.intensity_integral(path, a, b))
        .sum();
    jumps - model.marks.mean() * comp
}

/// `M̂ᵗ` integrated against the weight: `Σ α(T̂_i) x_i − m∫ₜᵀ α_s λ̂ᵗ_s ds`.
fn weighted_hat_martingale(model: &HawkesModel, shift: &ShiftPath, weight: &WeightFunction) -> f64 {
    let jumps: f64 = shift
        .hat_event_times
        .iter()
        .zip(&shift.hat_marks)
        .map(|(&t, &x)| weight.value(t) * x)
        .sum();
    let sources = std::iter::once(shift.shift_time).chain(shift.hat_event_times.iter().copied());
    let comp = weighted_source_integral(model, weight, |v| v, sources, shift.shift_time, shift.horizon);
    jumps - model.marks.mean() * comp
}

/// The two terms of the bound for a deterministic weight and a target
/// variance `γ²`:
///
/// ```text
/// first  = E|γ² − ∫ α_t λ_t ∫ x D_{(t,x)}F ν(dx) dt|
/// second = E ∫ |α_t| λ_t ∫ |x| |D_{(t,x)}F|² ν(dx) dt
/// ```
///
/// with `D_{(t,x)}F = α_t x + M̂ᵗ,α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedBound {
    pub horizon: f64,
    pub gamma2: f64,
    pub first: TermEstimate,
    pub second: TermEstimate,
    pub total: f64,
    pub total_se: f64,
}

pub fn weighted_bound(
    model: &HawkesModel,
    weight: &WeightFunction,
    gamma2: f64,
    horizon: f64,
    budget: Budget,
    seed: u64,
    grid_point: u64,
) -> Result<WeightedBound> {
    if !(gamma2 > 0.0 && gamma2.is_finite()) {
        return Err(Error::Domain(format!("gamma2 must be positive, got {gamma2}")));
    }
    check_horizon(horizon)?;
    check_budget(budget.n_outer, Some(budget.k_grid))?;
    let theta2 = model.marks.theta2();
    let m = model.marks.mean();
    let abs1 = model.marks.abs1();
    let abs3 = model.marks.abs3();
    let signed2 = model.marks.signed_square();
    let rows = replicate(budget.n_outer, |r| {
        let state = RandomState::for_replication(seed, r as u64, grid_point);
        let base = model.simulate(horizon, &state)?;
        let sq_integral: f64 = weight
            .pieces(0.0, horizon)
            .into_iter()
            .map(|(a, b, v)| v * v * model.intensity_integral(&base, a, b))
            .sum();
        let run = CoupledRun::simulate(model, base, budget.k_grid, &state.derive(FIELD_PURPOSE))?;
        let mut cross = 0.0;
        let mut second = 0.0;
        for (((w, l), s), &t) in run.weights.iter().zip(&run.base_intensity).zip(&run.shifts).zip(&run.grid) {
            let a = weight.value(t);
            let mh = weighted_hat_martingale(model, s, weight);
            cross += w * a * l * mh;
            second += w * a.abs() * l * (a * a * abs3 + 2.0 * a * mh * signed2 + mh * mh * abs1);
        }
        let first = (gamma2 - theta2 * sq_integral - m * cross).abs();
        Ok((first, second))
    })?;
    let first = TermEstimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let second = TermEstimate::from_samples(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let total = MeanEstimate::from_samples(&rows.iter().map(|r| r.0 + r.1).collect::<Vec<_>>());
    Ok(WeightedBound { horizon, gamma2, first, second, total: total.mean, total_se: total.std_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::marks::MarkDistribution;

    fn model(kernel: Kernel) -> HawkesModel {
        HawkesModel::new(kernel, 1.0, MarkDistribution::point_mass_one()).unwrap()
    }

    const SMALL: Budget = Budget { n_outer: 400, k_grid: 16 };

    #[test]
    fn poisson_bound_is_exact() {
        let m = model(Kernel::zero());
        for &t in &[25.0, 100.0, 400.0] {
            let r = total_bound(&m, t, SMALL, 1, 0).unwrap();
            assert_eq!(r.a11, 0.0);
            assert_eq!(r.a12, TermEstimate::ZERO);
            assert_eq!(r.a13, TermEstimate::ZERO);
            assert_eq!(r.a22, TermEstimate::ZERO);
            assert!((r.total - 1.0 / f64::sqrt(t)).abs() < 1e-12);
            assert!((r.a21 - 1.0 / f64::sqrt(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_bound_with_general_marks() {
        let marks = MarkDistribution::two_point(-1.0, 2.0, 0.5).unwrap();
        let m = HawkesModel::new(Kernel::zero(), 1.5, marks.clone()).unwrap();
        let r = total_bound(&m, 64.0, SMALL, 1, 0).unwrap();
        assert!((r.total - 1.5 * marks.abs3() / 8.0).abs() < 1e-12);
    }

    #[test]
    fn a11_exponential() {
        let m = model(Kernel::exponential(1.0, 2.0).unwrap());
        let a = estimate_a11(&m, 100.0);
        assert!((a - (1.0 - (-100.0f64).exp()) / 100.0).abs() < 1e-15);
        let b = estimate_a11(&m, 200.0);
        assert!((a / b - 2.0).abs() < 0.02);
    }

    #[test]
    fn a22_exact_matches_quadrature_identity() {
        // Exponential: E[λ_t] = 2 − e^{−t}, Ψ₁(u) = 1 − e^{−u}.
        let m = model(Kernel::exponential(1.0, 2.0).unwrap());
        let t: f64 = 10.0;
        let integral = 2.0 * t - 3.0 + 3.0 * (-t).exp() + t * (-t).exp();
        // ∫₀ᵀ (2 − e^{−s})(1 − e^{−(T−s)}) ds expanded by hand.
        let expected = integral / t.powf(1.5);
        assert!((a22_exact(&m, t) - expected).abs() < 1e-9);
    }

    #[test]
    fn a22_estimate_matches_exact() {
        let m = model(Kernel::exponential(1.0, 2.0).unwrap());
        let (a21, a22) = estimate_a2(&m, 20.0, Budget { n_outer: 2000, k_grid: 41 }, 5, 0).unwrap();
        assert!((a21 - expected_count(&m.kernel, 1.0, 20.0) / 20.0f64.powf(1.5)).abs() < 1e-15);
        let exact = a22_exact(&m, 20.0);
        assert!((a22.value - exact).abs() < 4.0 * a22.std_err + 0.02 * exact, "{a22:?} vs {exact}");
        // E[|M̂ᵗ_T|² | F_t] ≤ ϑ²‖ψ‖₁.
        let cap = m.kernel.psi_l1() * estimate_a21(&m, 20.0);
        assert!(exact <= cap);
    }

    #[test]
    fn a12_within_proof_bound() {
        let m = model(Kernel::erlang(1.0, 2.0).unwrap());
        let est = estimate_a12(&m, 50.0, 1000, 3, 0).unwrap();
        assert!(est.value <= a12_proof_bound(&m, 50.0));
        let zero = estimate_a12(&model(Kernel::zero()), 50.0, 100, 3, 0).unwrap();
        assert_eq!(zero, TermEstimate::ZERO);
    }

    #[test]
    fn a12_standard_error_scales() {
        let m = model(Kernel::exponential(1.0, 2.0).unwrap());
        let a = estimate_a12(&m, 25.0, 1000, 7, 0).unwrap();
        let b = estimate_a12(&m, 25.0, 4000, 8, 0).unwrap();
        let ratio = a.std_err / b.std_err;
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn canonical_weight_reproduces_statistic() {
        let m = HawkesModel::new(
            Kernel::erlang(1.0, 2.0).unwrap(),
            1.0,
            MarkDistribution::gaussian(0.3, 1.0).unwrap(),
        )
        .unwrap();
        let p = m.simulate(30.0, &RandomState::new(2, 2)).unwrap();
        let w = WeightFunction::canonical(30.0);
        assert!((weighted_statistic(&m, &p, &w) - m.statistic_f(&p)).abs() < 1e-12);
        let split = WeightFunction::tabulated(vec![0.0, 12.0], vec![w.value(0.0); 2]).unwrap();
        assert!((weighted_statistic(&m, &p, &split) - m.statistic_f(&p)).abs() < 1e-12);
    }

    #[test]
    fn canonical_weighted_bound_is_consistent() {
        let m = model(Kernel::exponential(1.0, 2.0).unwrap());
        let t = 25.0;
        let budget = Budget { n_outer: 600, k_grid: 17 };
        let w = weighted_bound(&m, &WeightFunction::canonical(t), 2.0, t, budget, 4, 0).unwrap();
        let r = total_bound(&m, t, budget, 4, 0).unwrap();
        // The first term never exceeds its triangle-inequality split.
        assert!(w.first.value <= r.a11 + r.a12.value + r.a13.value + 1e-12);
        assert!(w.second.value > 0.0);
        let poisson = model(Kernel::zero());
        let w = weighted_bound(&poisson, &WeightFunction::canonical(t), 1.0, t, budget, 4, 0).unwrap();
        assert!(w.first.value.abs() < 1e-12);
        assert!((w.total - 1.0 / t.sqrt()).abs() < 1e-12);
        assert!(weighted_bound(&poisson, &WeightFunction::canonical(t), 0.0, t, budget, 4, 0).is_err());
    }

    #[test]
    fn bound_csv_header() {
        let m = model(Kernel::zero());
        let r = total_bound(&m, 25.0, SMALL, 9, 0).unwrap();
        let mut buf = Vec::new();
        write_bound_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(BOUND_HEADER));
        assert_eq!(lines.next(), Some("25,0,0,0,0,0,0.2,0,0,0.2,400,16,9"));
    }
}
