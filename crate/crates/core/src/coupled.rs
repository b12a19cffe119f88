//! Shifted processes coupled to a base path through the Poisson measure.
//!
//! Adding an atom at `(t, θ ≤ λ_t, x)` to the driving measure leaves every
//! base event in place and turns into events exactly those atoms lying in
//! the band `(λ_s, λ_s + λ̂ᵗ_s]` above the base intensity. In the excess
//! coordinate `η = θ − λ_s` the atoms above the base band form a unit-rate
//! Poisson field on `(0, T] × (0, ∞)`, independent of the base path. A
//! [`BandField`] realizes that field; every shift simulated against the
//! same field is jointly coupled to the same base path.

use std::cell::RefCell;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::excitation::Excitation;
use crate::marks::MarkDistribution;
use crate::rng::RandomState;
use crate::simulate::{Atom, HawkesModel, HawkesPath, MAJORANT_SLACK};
use crate::stats::{trapezoid_weights, uniform_grid};

/// Sub-stream tag of the above-band field attached to a base path.
pub const FIELD_PURPOSE: u64 = 0x0066_6965_6c64;

const LAYER_HEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Default)]
struct Layer {
    time: Vec<f64>,
    excess: Vec<f64>,
    mark: Vec<f64>,
}

impl Layer {
    fn push(&mut self, time: f64, excess: f64, mark: f64) {
        self.time.push(time);
        self.excess.push(excess);
        self.mark.push(mark);
    }

    /// Earliest point with time in `(after, until]` and excess `≤ cap`.
    fn first(&self, after: f64, until: f64, cap: f64) -> Option<(f64, f64, f64)> {
        let start = self.time.partition_point(|&s| s <= after);
        (start..self.time.len())
            .take_while(|&i| self.time[i] <= until)
            .find(|&i| self.excess[i] <= cap)
            .map(|i| (self.time[i], self.excess[i], self.mark[i]))
    }
}

#[derive(Debug)]
enum FieldSource {
    /// Generated lazily in horizontal layers of height [`LAYER_HEIGHT`],
    /// each from its own derived stream.
    Random {
        state: RandomState,
        horizon: f64,
        marks: MarkDistribution,
        layers: RefCell<Vec<Layer>>,
    },
    /// A stored configuration, complete up to `height`.
    Explicit { layer: Layer, height: f64 },
}

/// Poisson atoms above the base band, in excess coordinates.
#[derive(Debug)]
pub struct BandField {
    source: FieldSource,
}

impl BandField {
    pub fn random(state: RandomState, horizon: f64, marks: &MarkDistribution) -> Self {
        Self {
            source: FieldSource::Random {
                state,
                horizon,
                marks: marks.clone(),
                layers: RefCell::new(Vec::new()),
            },
        }
    }

    /// The rejected atoms of `base` lifted to excess coordinates. Only
    /// atoms below `ceiling` are known, so the field is complete up to
    /// `ceiling − sup λ`.
    pub fn above_base(model: &HawkesModel, base: &HawkesPath, atoms: &[Atom], ceiling: f64) -> Result<Self> {
        let sup_lambda = base.mu + base.count() as f64 * model.kernel.sup_phi();
        let height = ceiling - sup_lambda;
        if height <= 0.0 {
            return Err(Error::FieldExhausted { needed: sup_lambda, available: ceiling });
        }
        let mut layer = Layer::default();
        for a in atoms.iter().filter(|a| a.time > 0.0 && a.time <= base.horizon) {
            let eta = a.theta - model.intensity_at(base, a.time)?;
            if eta > 0.0 && eta <= height {
                layer.push(a.time, eta, a.mark);
            }
        }
        Ok(Self { source: FieldSource::Explicit { layer, height } })
    }

    fn first(&self, after: f64, until: f64, cap: f64) -> Result<Option<(f64, f64, f64)>> {
        match &self.source {
            FieldSource::Explicit { layer, height } => {
                if cap > *height {
                    return Err(Error::FieldExhausted { needed: cap, available: *height });
                }
                Ok(layer.first(after, until, cap))
            }
            FieldSource::Random { state, horizon, marks, layers } => {
                let needed = (cap / LAYER_HEIGHT).ceil() as usize;
                let mut layers = layers.borrow_mut();
                while layers.len() < needed {
                    let j = layers.len();
                    layers.push(generate_layer(state.derive(j as u64), *horizon, j, marks));
                }
                let mut best: Option<(f64, f64, f64)> = None;
                for layer in layers[..needed].iter() {
                    if let Some(p) = layer.first(after, best.map_or(until, |b| b.0), cap) {
                        if best.is_none_or(|b| p.0 < b.0) {
                            best = Some(p);
                        }
                    }
                }
                Ok(best)
            }
        }
    }
}

fn generate_layer(state: RandomState, horizon: f64, index: usize, marks: &MarkDistribution) -> Layer {
    let mut rng = state.generator();
    let mut layer = Layer::default();
    let floor = index as f64 * LAYER_HEIGHT;
    let mut t = 0.0;
    loop {
        let gap: f64 = Exp1.sample(&mut rng);
        t += gap / LAYER_HEIGHT;
        if t > horizon {
            break;
        }
        let u: f64 = rng.random();
        // Strictly above the floor: excess 0 would sit on the base band.
        let excess = floor + LAYER_HEIGHT * (1.0 - u);
        layer.push(t, excess, marks.sample(&mut rng));
    }
    layer
}

/// The cascade `(X̂ᵗ, Ĥᵗ, λ̂ᵗ)` triggered by an atom added at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftPath {
    pub shift_time: f64,
    pub horizon: f64,
    /// Strictly inside `(t, T]`.
    pub hat_event_times: Vec<f64>,
    pub hat_marks: Vec<f64>,
    pub hat_intensity_pre: Vec<f64>,
    /// `∫ₜᵀ λ̂ᵗ_u du`.
    pub hat_compensator: f64,
    /// `M̂ᵗ_T = X̂ᵗ_T − m∫ₜᵀ λ̂ᵗ_u du`.
    pub terminal_martingale: f64,
}

impl ShiftPath {
    pub fn count(&self) -> usize {
        self.hat_event_times.len()
    }

    /// `λ̂ᵗ_s = Φ(s − t) + Σ_{T̂_i < s} Φ(s − T̂_i)` for `s ≥ t`.
    pub fn intensity_at(&self, model: &HawkesModel, s: f64) -> Result<f64> {
        if !(self.shift_time..=self.horizon).contains(&s) {
            return Err(Error::Domain(format!("time {s} outside [{}, {}]", self.shift_time, self.horizon)));
        }
        let own: f64 = self
            .hat_event_times
            .iter()
            .take_while(|&&e| e < s)
            .map(|&e| model.kernel.phi_at(s - e))
            .sum();
        Ok(model.kernel.phi_at(s - self.shift_time) + own)
    }
}

/// `D_{(t, λ_t, x)} F_T = (x + M̂ᵗ_T)/√T`.
pub fn malliavin_derivative(shift: &ShiftPath, x: f64) -> f64 {
    (x + shift.terminal_martingale) / shift.horizon.sqrt()
}

/// Simulates the shift at `t` against a fresh field drawn from `state`.
pub fn simulate_shift(model: &HawkesModel, base: &HawkesPath, t: f64, state: &RandomState) -> Result<ShiftPath> {
    let field = BandField::random(*state, base.horizon, &model.marks);
    simulate_shift_in_field(model, base, t, &field)
}

/// Thinning of the field points under `λ̂ᵗ`: a point at `(s, η)` is a hat
/// event iff `η ≤ λ̂ᵗ_{s−}`.
pub fn simulate_shift_in_field(model: &HawkesModel, base: &HawkesPath, t: f64, field: &BandField) -> Result<ShiftPath> {
    let horizon = base.horizon;
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Domain(format!("shift time {t} outside [0, {horizon}]")));
    }
    let mut exc = Excitation::new(&model.kernel, t);
    exc.excite();
    let mut times = Vec::new();
    let mut marks = Vec::new();
    let mut pre = Vec::new();
    let mut cur = t;
    while cur < horizon {
        let window = exc.window();
        let until = (cur + window).min(horizon);
        let bound = exc.sup_ahead(until - cur);
        match field.first(cur, until, bound)? {
            None => {
                cur = until;
                exc.advance_to(cur);
            }
            Some((s, eta, x)) => {
                if eta <= 0.0 {
                    return Err(Error::Domain("field point inside the base band".into()));
                }
                exc.advance_to(s);
                let level = exc.level();
                if level > bound * (1.0 + MAJORANT_SLACK) {
                    return Err(Error::MajorantViolation { time: s, intensity: level, bound });
                }
                if eta <= level {
                    times.push(s);
                    marks.push(x);
                    pre.push(level);
                    exc.excite();
                }
                cur = s;
            }
        }
    }
    let kernel = &model.kernel;
    let hat_compensator = kernel.phi_integral(horizon - t)
        + times.iter().map(|&e| kernel.phi_integral(horizon - e)).sum::<f64>();
    let terminal_martingale = marks.iter().sum::<f64>() - model.marks.mean() * hat_compensator;
    Ok(ShiftPath {
        shift_time: t,
        horizon,
        hat_event_times: times,
        hat_marks: marks,
        hat_intensity_pre: pre,
        hat_compensator,
        terminal_martingale,
    })
}

/// A base path with shifts at `K` uniform times, all coupled through one
/// above-band field.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub base: HawkesPath,
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    /// `λ_{t_k}` on the grid.
    pub base_intensity: Vec<f64>,
    pub shifts: Vec<ShiftPath>,
}

impl CoupledRun {
    pub fn simulate(model: &HawkesModel, base: HawkesPath, k: usize, field_state: &RandomState) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain("shift grid needs at least two points".into()));
        }
        let field = BandField::random(*field_state, base.horizon, &model.marks);
        let grid = uniform_grid(0.0, base.horizon, k);
        let weights = trapezoid_weights(0.0, base.horizon, k);
        let base_intensity = model.intensity_on_grid(&base, &grid)?;
        let shifts = grid
            .iter()
            .map(|&t| simulate_shift_in_field(model, &base, t, &field))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { base, grid, weights, base_intensity, shifts })
    }

    fn weighted_sum(&self, f: impl Fn(&ShiftPath) -> f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.base_intensity)
            .zip(&self.shifts)
            .map(|((w, l), s)| w * l * f(s))
            .sum()
    }

    /// Trapezoid estimate of `∫₀ᵀ λ_t M̂ᵗ_T dt`.
    pub fn lambda_hat_m_integral(&self) -> f64 {
        self.weighted_sum(|s| s.terminal_martingale)
    }

    /// Trapezoid estimate of `∫₀ᵀ λ_t |M̂ᵗ_T|² dt`.
    pub fn lambda_hat_m2_integral(&self) -> f64 {
        self.weighted_sum(|s| s.terminal_martingale * s.terminal_martingale)
    }

    /// `∫₀ᵀ λ_t M̂ᵗ_T dt` on every other grid point, when `K` is odd.
    pub fn coarse_lambda_hat_m_integral(&self) -> Option<f64> {
        let k = self.grid.len();
        if k.is_multiple_of(2) || k < 3 {
            return None;
        }
        let coarse = trapezoid_weights(0.0, self.base.horizon, k.div_ceil(2));
        Some(
            coarse
                .iter()
                .enumerate()
                .map(|(i, w)| w * self.base_intensity[2 * i] * self.shifts[2 * i].terminal_martingale)
                .sum(),
        )
    }
}

/// `∫₀ᵀ λ_t M̂ᵗ_T dt` for a fixed base path, by trapezoid quadrature over
/// `k` shift times.
pub fn lambda_hat_m_integral(model: &HawkesModel, base: &HawkesPath, k: usize, state: &RandomState) -> Result<f64> {
    Ok(CoupledRun::simulate(model, base.clone(), k, state)?.lambda_hat_m_integral())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::stats::{replicate, MeanEstimate};

    fn model(kernel: Kernel) -> HawkesModel {
        HawkesModel::new(kernel, 1.0, MarkDistribution::point_mass_one()).unwrap()
    }

    #[test]
    fn zero_kernel_shift_is_empty() {
        let m = model(Kernel::zero());
        let base = m.simulate(10.0, &RandomState::new(1, 0)).unwrap();
        for &t in &[0.0, 3.3, 10.0] {
            let s = simulate_shift(&m, &base, t, &RandomState::new(2, 0)).unwrap();
            assert_eq!(s.count(), 0);
            assert_eq!(s.terminal_martingale, 0.0);
            assert_eq!(malliavin_derivative(&s, 2.5), 2.5 / 10.0f64.sqrt());
        }
        let run = CoupledRun::simulate(&m, base, 9, &RandomState::new(3, 0)).unwrap();
        assert_eq!(run.lambda_hat_m_integral(), 0.0);
    }

    #[test]
    fn shift_domain() {
        let m = model(Kernel::exponential(1.0, 2.0).unwrap());
        let base = m.simulate(5.0, &RandomState::new(1, 0)).unwrap();
        assert!(simulate_shift(&m, &base, 5.5, &RandomState::new(0, 0)).is_err());
        assert!(simulate_shift(&m, &base, -0.1, &RandomState::new(0, 0)).is_err());
    }

    #[test]
    fn shift_invariants() {
        let tab = Kernel::tabulated(vec![0.0, 0.5, 1.5], vec![0.3, 0.4, 0.0]).unwrap();
        for k in [Kernel::exponential(1.0, 2.0).unwrap(), Kernel::erlang(1.0, 2.0).unwrap(), tab] {
            let m = model(k);
            let base = m.simulate(20.0, &RandomState::new(5, 0)).unwrap();
            for r in 0..50 {
                let t = 0.3 * r as f64;
                let s = simulate_shift(&m, &base, t, &RandomState::new(6, r)).unwrap();
                assert!(s.hat_event_times.iter().all(|&e| e > t && e <= 20.0));
                assert!(s.hat_event_times.windows(2).all(|w| w[0] < w[1]));
                for (e, l) in s.hat_event_times.iter().zip(&s.hat_intensity_pre) {
                    assert!((s.intensity_at(&m, *e).unwrap() - l).abs() < 1e-12);
                }
                let first = s.hat_event_times.first().copied().unwrap_or(20.0);
                let probe = 0.5 * (t + first);
                assert_eq!(s.intensity_at(&m, probe).unwrap(), m.kernel.phi_at(probe - t));
            }
        }
    }

    #[test]
    fn shared_field_matches_fresh_field_law() {
        // Under a shared field each shift keeps the law of an isolated shift.
        let m = model(Kernel::exponential(1.0, 2.0).unwrap());
        let n = 4000;
        let counts = |shared: bool| -> Vec<f64> {
            replicate(n, |r| {
                let st = RandomState::for_replication(31, r as u64, 0);
                let base = m.simulate(12.0, &st).unwrap();
                if shared {
                    let run = CoupledRun::simulate(&m, base, 5, &st.derive(FIELD_PURPOSE))?;
                    Ok(run.shifts[1].count() as f64)
                } else {
                    Ok(simulate_shift(&m, &base, 3.0, &st.derive(7))?.count() as f64)
                }
            })
            .unwrap()
        };
        let a = MeanEstimate::from_samples(&counts(true));
        let b = MeanEstimate::from_samples(&counts(false));
        let exact = m.kernel.psi_integral(9.0);
        assert!(a.within(exact, 4.0), "{} vs {exact}", a.mean);
        assert!(b.within(exact, 4.0), "{} vs {exact}", b.mean);
    }

    #[test]
    fn resimulation_oracle() {
        // Add-one-cost on an explicit configuration equals the hat cascade.
        let m = HawkesModel::new(
            Kernel::exponential(0.9, 1.6).unwrap(),
            0.8,
            MarkDistribution::gaussian(0.5, 1.0).unwrap(),
        )
        .unwrap();
        let horizon = 5.0;
        let ceiling = 30.0;
        let mut checked = 0;
        for seed in 0..200u64 {
            let mut rng = RandomState::new(77, seed).generator();
            let n_atoms = {
                let mut c = 0;
                let mut s = 0.0;
                loop {
                    let g: f64 = Exp1.sample(&mut rng);
                    s += g / (ceiling * horizon);
                    if s > 1.0 {
                        break c;
                    }
                    c += 1;
                }
            };
            let mut atoms: Vec<Atom> = (0..n_atoms)
                .map(|_| Atom {
                    time: horizon * rng.random::<f64>(),
                    theta: ceiling * rng.random::<f64>(),
                    mark: m.marks.sample(&mut rng),
                })
                .collect();
            atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
            let base = m.solve_atoms(horizon, &atoms, None).unwrap();
            if base.count() > 10 {
                continue;
            }
            let t = horizon * rng.random::<f64>();
            let x = m.marks.sample(&mut rng);
            let plus = m.solve_atoms(horizon, &atoms, Some((t, x))).unwrap();
            let field = BandField::above_base(&m, &base, &atoms, ceiling).unwrap();
            let shift = simulate_shift_in_field(&m, &base, t, &field).unwrap();
            let lhs = m.statistic_f(&plus) - m.statistic_f(&base);
            let rhs = malliavin_derivative(&shift, x);
            assert!((lhs - rhs).abs() < 1e-12, "seed {seed}: {lhs} vs {rhs}");
            // Augmented events are the base events, the added atom and the cascade.
            let mut merged = base.event_times.clone();
            merged.push(t);
            merged.extend(&shift.hat_event_times);
            merged.sort_by(f64::total_cmp);
            assert_eq!(merged, plus.event_times);
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn explicit_field_reports_exhaustion() {
        let m = model(Kernel::exponential(1.0, 2.0).unwrap());
        let base = m.solve_atoms(2.0, &[], None).unwrap();
        let field = BandField::above_base(&m, &base, &[], 1.5).unwrap();
        assert!(matches!(
            simulate_shift_in_field(&m, &base, 0.5, &field),
            Err(Error::FieldExhausted { .. })
        ));
    }

    #[test]
    fn coarse_grid_is_consistent() {
        let m = model(Kernel::exponential(1.0, 2.0).unwrap());
        let base = m.simulate(10.0, &RandomState::new(8, 0)).unwrap();
        let run = CoupledRun::simulate(&m, base, 5, &RandomState::new(9, 0)).unwrap();
        let coarse = run.coarse_lambda_hat_m_integral().unwrap();
        let manual = 2.5 * run.base_intensity[0] * run.shifts[0].terminal_martingale
            + 5.0 * run.base_intensity[2] * run.shifts[2].terminal_martingale
            + 2.5 * run.base_intensity[4] * run.shifts[4].terminal_martingale;
        assert!((coarse - manual).abs() < 1e-12);
    }
}
