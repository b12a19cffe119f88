//! Running value of `Σ Φ(s − T_i)` over past events, advanced in time.
//!
//! Exponential and Erlang kernels are Markov: a fixed number of state
//! variables carries the whole past. Tabulated kernels keep the events that
//! are still inside the kernel support.

use std::collections::VecDeque;

use crate::kernel::{Kernel, KernelKind};

#[derive(Debug, Clone)]
enum State {
    Zero,
    /// `level = Σ α e^{−β(s−T_i)}`.
    Exponential { alpha: f64, beta: f64, level: f64 },
    /// `level = Σ α (s−T_i) e^{−β(s−T_i)}`, `aux = Σ α e^{−β(s−T_i)}`.
    Erlang { alpha: f64, beta: f64, level: f64, aux: f64 },
    Tabulated { events: VecDeque<f64>, support: f64 },
}

#[derive(Debug, Clone)]
pub(crate) struct Excitation<'k> {
    kernel: &'k Kernel,
    now: f64,
    state: State,
}

impl<'k> Excitation<'k> {
    /// Empty past at time `start`.
    pub(crate) fn new(kernel: &'k Kernel, start: f64) -> Self {
        let state = match kernel.kind() {
            KernelKind::Zero => State::Zero,
            KernelKind::Exponential => {
                let (alpha, beta) = kernel.alpha_beta().unwrap();
                State::Exponential { alpha, beta, level: 0.0 }
            }
            KernelKind::Erlang => {
                let (alpha, beta) = kernel.alpha_beta().unwrap();
                State::Erlang { alpha, beta, level: 0.0, aux: 0.0 }
            }
            KernelKind::Tabulated => State::Tabulated {
                events: VecDeque::new(),
                support: kernel.support_end().unwrap(),
            },
        };
        Self { kernel, now: start, state }
    }

    #[cfg(test)]
    pub(crate) fn now(&self) -> f64 {
        self.now
    }

    /// Moves the clock forward to `t` with no events in between.
    pub(crate) fn advance_to(&mut self, t: f64) {
        let dt = t - self.now;
        debug_assert!(dt >= 0.0, "excitation clock moved backwards");
        if dt <= 0.0 {
            return;
        }
        match &mut self.state {
            State::Zero => {}
            State::Exponential { beta, level, .. } => *level *= (-*beta * dt).exp(),
            State::Erlang { beta, level, aux, .. } => {
                let decay = (-*beta * dt).exp();
                *level = (*level + *aux * dt) * decay;
                *aux *= decay;
            }
            State::Tabulated { events, support } => {
                while events.front().is_some_and(|&e| t - e > *support) {
                    events.pop_front();
                }
            }
        }
        self.now = t;
    }

    /// `Σ Φ(now − T_i)` over registered events.
    pub(crate) fn level(&self) -> f64 {
        match &self.state {
            State::Zero => 0.0,
            State::Exponential { level, .. } | State::Erlang { level, .. } => *level,
            State::Tabulated { events, .. } => {
                events.iter().map(|&e| self.kernel.phi_at(self.now - e)).sum()
            }
        }
    }

    /// Erlang auxiliary `ξ = Σ α e^{−β(now − T_i)}`; the level itself for
    /// exponential kernels.
    pub(crate) fn aux(&self) -> Option<f64> {
        match &self.state {
            State::Exponential { level, .. } => Some(*level),
            State::Erlang { aux, .. } => Some(*aux),
            _ => None,
        }
    }

    /// Registers an event at the current time.
    pub(crate) fn excite(&mut self) {
        match &mut self.state {
            State::Zero => {}
            State::Exponential { alpha, level, .. } => *level += *alpha,
            State::Erlang { alpha, aux, .. } => *aux += *alpha,
            State::Tabulated { events, .. } => events.push_back(self.now),
        }
    }

    /// Length of the window over which [`Self::sup_ahead`] serves as a
    /// constant majorant. Infinite when the level cannot increase without
    /// a new event.
    pub(crate) fn window(&self) -> f64 {
        match &self.state {
            State::Zero | State::Exponential { .. } => f64::INFINITY,
            State::Erlang { beta, level, aux, .. } => {
                // (L + A s) e^{−βs} is nonincreasing once A ≤ βL.
                if *aux <= *beta * *level {
                    f64::INFINITY
                } else {
                    self.kernel.majorant_window()
                }
            }
            State::Tabulated { events, .. } => {
                if events.is_empty() {
                    f64::INFINITY
                } else {
                    self.kernel.majorant_window()
                }
            }
        }
    }

    /// Supremum of the level over `[now, now + w]` if no event occurs.
    pub(crate) fn sup_ahead(&self, w: f64) -> f64 {
        match &self.state {
            State::Zero => 0.0,
            State::Exponential { level, .. } => *level,
            State::Erlang { beta, level, aux, .. } => {
                if *aux <= *beta * *level {
                    return *level;
                }
                let peak = (1.0 / beta - level / aux).clamp(0.0, w);
                (level + aux * peak) * (-beta * peak).exp()
            }
            State::Tabulated { events, .. } => events
                .iter()
                .map(|&e| self.kernel.sup_on(self.now - e, self.now - e + w))
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(kernel: &Kernel, events: &[f64], t: f64) -> f64 {
        events.iter().filter(|&&e| e < t).map(|&e| kernel.phi_at(t - e)).sum()
    }

    #[test]
    fn tracks_direct_sum() {
        let kernels = [
            Kernel::exponential(0.8, 1.5).unwrap(),
            Kernel::erlang(1.0, 2.0).unwrap(),
            Kernel::tabulated(vec![0.0, 0.5, 1.5], vec![0.3, 0.4, 0.0]).unwrap(),
        ];
        let events = [0.2, 0.25, 1.1, 2.9, 3.0];
        for k in &kernels {
            let mut exc = Excitation::new(k, 0.0);
            let mut next = 0;
            for i in 1..=400 {
                let t = i as f64 * 0.01;
                while next < events.len() && events[next] < t {
                    exc.advance_to(events[next]);
                    exc.excite();
                    next += 1;
                }
                exc.advance_to(t);
                let d = direct(k, &events, t);
                assert!((exc.level() - d).abs() < 1e-12, "{:?} t={t}", k.kind());
            }
        }
    }

    #[test]
    fn sup_ahead_dominates() {
        let kernels = [
            Kernel::erlang(1.0, 2.0).unwrap(),
            Kernel::tabulated(vec![0.0, 0.5, 1.5], vec![0.3, 0.4, 0.0]).unwrap(),
        ];
        for k in &kernels {
            let mut exc = Excitation::new(k, 0.0);
            exc.excite();
            exc.advance_to(0.1);
            exc.excite();
            for step in 0..50 {
                let w = exc.window();
                let w_eff = if w.is_finite() { w } else { 2.0 };
                let sup = exc.sup_ahead(w_eff);
                let mut probe = exc.clone();
                for j in 1..=20 {
                    probe.advance_to(exc.now() + w_eff * j as f64 / 20.0);
                    assert!(probe.level() <= sup + 1e-14, "{:?} step {step}", k.kind());
                }
                exc.advance_to(exc.now() + w_eff.min(0.05));
            }
        }
    }
}
