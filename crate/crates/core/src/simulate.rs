//! Path simulation by thinning, and the statistics `F_T` and `Y_T`.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::excitation::Excitation;
use crate::kernel::{Kernel, KernelKind};
use crate::marks::MarkDistribution;
use crate::moments::expected_count;
use crate::rng::RandomState;

/// Relative slack allowed when checking a candidate against its majorant.
pub(crate) const MAJORANT_SLACK: f64 = 1e-12;

/// Baseline, kernel and marks of a compound Hawkes process.
#[derive(Debug, Clone)]
pub struct HawkesModel {
    pub kernel: Kernel,
    pub mu: f64,
    pub marks: MarkDistribution,
}

/// One trajectory on `[0, T]` started from an empty past.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesPath {
    pub horizon: f64,
    pub mu: f64,
    /// Strictly increasing, in `(0, T]`.
    pub event_times: Vec<f64>,
    pub marks: Vec<f64>,
    /// Left limit `λ_{T_i−}` at each event.
    pub intensity_pre: Vec<f64>,
    /// Auxiliary Markov coordinate at `T` as tracked during simulation
    /// (`ξ_T` for Erlang kernels, `λ_T − μ` for exponential ones).
    pub terminal_aux: Option<f64>,
    pub state: Option<RandomState>,
}

impl HawkesPath {
    pub fn count(&self) -> usize {
        self.event_times.len()
    }

    /// `X_T`, the sum of the marks.
    pub fn mark_sum(&self) -> f64 {
        self.marks.iter().sum()
    }
}

/// A point `(time, θ, mark)` of the driving Poisson measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub time: f64,
    pub theta: f64,
    pub mark: f64,
}

pub(crate) fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive and finite, got {horizon}")));
    }
    Ok(())
}

impl HawkesModel {
    pub fn new(kernel: Kernel, mu: f64, marks: MarkDistribution) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("baseline mu must be positive, got {mu}")));
        }
        Ok(Self { kernel, mu, marks })
    }

    /// Simulates on `[0, horizon]` by thinning a dominating Poisson process
    /// whose rate is a piecewise-constant majorant of the intensity.
    pub fn simulate(&self, horizon: f64, state: &RandomState) -> Result<HawkesPath> {
        check_horizon(horizon)?;
        let mut rng = state.generator();
        let mut exc = Excitation::new(&self.kernel, 0.0);
        let mut times = Vec::new();
        let mut marks = Vec::new();
        let mut pre = Vec::new();
        let mut t = 0.0;
        loop {
            let window = exc.window();
            let bound = self.mu + exc.sup_ahead(window);
            let gap: f64 = Exp1.sample(&mut rng);
            let gap = gap / bound;
            if gap > window {
                t += window;
                if t >= horizon {
                    break;
                }
                exc.advance_to(t);
                continue;
            }
            t += gap;
            if t > horizon {
                break;
            }
            exc.advance_to(t);
            let lambda = self.mu + exc.level();
            if lambda > bound * (1.0 + MAJORANT_SLACK) {
                return Err(Error::MajorantViolation { time: t, intensity: lambda, bound });
            }
            let u: f64 = rng.random();
            if u * bound < lambda {
                times.push(t);
                marks.push(self.marks.sample(&mut rng));
                pre.push(lambda);
                exc.excite();
            }
        }
        exc.advance_to(horizon);
        Ok(HawkesPath {
            horizon,
            mu: self.mu,
            event_times: times,
            marks,
            intensity_pre: pre,
            terminal_aux: exc.aux(),
            state: Some(*state),
        })
    }

    /// Solves the thinning equation for an explicit configuration of atoms:
    /// an atom at `(s, θ)` is an event iff `θ ≤ λ_{s−}`. A `forced` atom
    /// `(t, x)` is an extra event at `t` with mark `x`, as when a point is
    /// added below the intensity.
    pub fn solve_atoms(&self, horizon: f64, atoms: &[Atom], forced: Option<(f64, f64)>) -> Result<HawkesPath> {
        check_horizon(horizon)?;
        if atoms.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::Domain("atoms must be sorted by time".into()));
        }
        let mut exc = Excitation::new(&self.kernel, 0.0);
        let mut times = Vec::new();
        let mut marks = Vec::new();
        let mut pre = Vec::new();
        let mut forced = forced.filter(|(t, _)| *t > 0.0 && *t <= horizon);
        for atom in atoms.iter().filter(|a| a.time > 0.0 && a.time <= horizon) {
            if let Some((ft, fx)) = forced {
                if ft <= atom.time {
                    exc.advance_to(ft);
                    times.push(ft);
                    marks.push(fx);
                    pre.push(self.mu + exc.level());
                    exc.excite();
                    forced = None;
                }
            }
            exc.advance_to(atom.time);
            let lambda = self.mu + exc.level();
            if atom.theta <= lambda {
                times.push(atom.time);
                marks.push(atom.mark);
                pre.push(lambda);
                exc.excite();
            }
        }
        if let Some((ft, fx)) = forced {
            exc.advance_to(ft);
            times.push(ft);
            marks.push(fx);
            pre.push(self.mu + exc.level());
            exc.excite();
        }
        exc.advance_to(horizon);
        Ok(HawkesPath {
            horizon,
            mu: self.mu,
            event_times: times,
            marks,
            intensity_pre: pre,
            terminal_aux: exc.aux(),
            state: None,
        })
    }

    /// `λ_t = μ + Σ_{T_i < t} Φ(t − T_i)`.
    pub fn intensity_at(&self, path: &HawkesPath, t: f64) -> Result<f64> {
        if !(0.0..=path.horizon).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", path.horizon)));
        }
        let end = path.event_times.partition_point(|&e| e < t);
        let support = self.kernel.support_end().unwrap_or(f64::INFINITY);
        let mut excess = 0.0;
        for &e in path.event_times[..end].iter().rev() {
            if t - e > support {
                break;
            }
            excess += self.kernel.phi_at(t - e);
        }
        Ok(path.mu + excess)
    }

    /// Left-limit intensities at the nondecreasing times `grid`, in one sweep.
    pub fn intensity_on_grid(&self, path: &HawkesPath, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("intensity grid must be nondecreasing".into()));
        }
        if grid.first().is_some_and(|&t| t < 0.0) || grid.last().is_some_and(|&t| t > path.horizon) {
            return Err(Error::Domain("intensity grid outside the path horizon".into()));
        }
        let mut exc = Excitation::new(&self.kernel, 0.0);
        let mut next = 0;
        let mut out = Vec::with_capacity(grid.len());
        for &t in grid {
            while next < path.event_times.len() && path.event_times[next] < t {
                exc.advance_to(path.event_times[next]);
                exc.excite();
                next += 1;
            }
            exc.advance_to(t);
            out.push(path.mu + exc.level());
        }
        Ok(out)
    }

    /// `∫₀ᵀ λ_t dt = μT + Σ ∫₀^{T − T_i} Φ`, integrated exactly.
    pub fn compensator(&self, path: &HawkesPath) -> f64 {
        let t = path.horizon;
        let excess: f64 = path.event_times.iter().map(|&e| self.kernel.phi_integral(t - e)).sum();
        path.mu * t + excess
    }

    /// `∫ₐᵇ λ_t dt` for `0 ≤ a ≤ b ≤ T`, integrated exactly.
    pub fn intensity_integral(&self, path: &HawkesPath, a: f64, b: f64) -> f64 {
        let end = path.event_times.partition_point(|&e| e < b);
        let excess: f64 = path.event_times[..end]
            .iter()
            .map(|&e| self.kernel.phi_integral(b - e) - self.kernel.phi_integral(a - e))
            .sum();
        path.mu * (b - a) + excess
    }

    /// `F_T = (X_T − m∫₀ᵀλ_t dt)/√T`.
    pub fn statistic_f(&self, path: &HawkesPath) -> f64 {
        (path.mark_sum() - self.marks.mean() * self.compensator(path)) / path.horizon.sqrt()
    }

    /// `Y_T = (H_T − E[H_T])/√T`.
    pub fn statistic_y(&self, path: &HawkesPath) -> f64 {
        let expected = expected_count(&self.kernel, self.mu, path.horizon);
        (path.count() as f64 - expected) / path.horizon.sqrt()
    }

    /// `λ_T`, the left limit at the horizon.
    pub fn terminal_intensity(&self, path: &HawkesPath) -> f64 {
        self.intensity_at(path, path.horizon).expect("horizon lies in [0, T]")
    }

    /// `ξ_T = Σ αe^{−β(T − T_i)}` summed directly over events.
    pub fn terminal_aux_direct(&self, path: &HawkesPath) -> Option<f64> {
        let (alpha, beta) = self.kernel.alpha_beta()?;
        let t = path.horizon;
        Some(path.event_times.iter().filter(|&&e| e < t).map(|&e| alpha * (-beta * (t - e)).exp()).sum())
    }
}

/// Exact event-by-event simulation for an exponential kernel. Between
/// events the intensity decays deterministically, so the next event time is
/// the minimum of a baseline arrival and an arrival driven by the decaying
/// excess, both sampled by inversion.
pub fn simulate_markov_exponential(model: &HawkesModel, horizon: f64, state: &RandomState) -> Result<HawkesPath> {
    check_horizon(horizon)?;
    let (alpha, beta) = match (model.kernel.kind(), model.kernel.alpha_beta()) {
        (KernelKind::Exponential, Some(ab)) => ab,
        _ => return Err(Error::Unsupported("exact Markov simulation needs an exponential kernel".into())),
    };
    let mut rng = state.generator();
    let mut excess = 0.0;
    let mut t = 0.0;
    let mut times = Vec::new();
    let mut marks = Vec::new();
    let mut pre = Vec::new();
    loop {
        let base_gap = -(1.0 - rng.random::<f64>()).ln() / model.mu;
        let u: f64 = 1.0 - rng.random::<f64>();
        let decay_gap = if excess > 0.0 {
            let d = 1.0 + beta * u.ln() / excess;
            if d > 0.0 {
                -d.ln() / beta
            } else {
                f64::INFINITY
            }
        } else {
            f64::INFINITY
        };
        let gap = base_gap.min(decay_gap);
        if t + gap > horizon {
            excess *= (-beta * (horizon - t)).exp();
            break;
        }
        t += gap;
        excess *= (-beta * gap).exp();
        times.push(t);
        marks.push(model.marks.sample(&mut rng));
        pre.push(model.mu + excess);
        excess += alpha;
    }
    Ok(HawkesPath {
        horizon,
        mu: model.mu,
        event_times: times,
        marks,
        intensity_pre: pre,
        terminal_aux: Some(excess),
        state: Some(*state),
    })
}

pub const PATH_HEADER: &str = "event_index,time,mark,intensity_pre";

pub fn write_path_csv<W: Write>(mut w: W, path: &HawkesPath) -> io::Result<()> {
    writeln!(w, "{PATH_HEADER}")?;
    for (i, ((t, x), l)) in path.event_times.iter().zip(&path.marks).zip(&path.intensity_pre).enumerate() {
        writeln!(w, "{i},{t},{x},{l}")?;
    }
    Ok(())
}
