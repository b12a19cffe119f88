//! Excitation kernels and their renewal resolvents.
//!
//! A [`Kernel`] is the excitation function `Φ` of a linear Hawkes process,
//! `λ_t = μ + Σ_{T_i < t} Φ(t − T_i)`. Every constructible kernel satisfies
//! the stability condition `‖Φ‖₁ < 1`, which makes the resolvent
//! `ψ = Σ_{n≥1} Φ^{*n}` integrable with `‖ψ‖₁ = ‖Φ‖₁ / (1 − ‖Φ‖₁)`.
//!
//! Exponential and Erlang kernels carry closed forms for `ψ` and its first
//! two antiderivatives. Tabulated kernels solve the renewal equation
//! `ψ = Φ + Φ∗ψ` numerically on a uniform grid.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{ensure_finite, Error, Result};

/// Tag of a kernel variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Exponential,
    Erlang,
    Zero,
    Tabulated,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Exponential => "exponential",
            KernelKind::Erlang => "erlang",
            KernelKind::Zero => "zero",
            KernelKind::Tabulated => "tabulated",
        })
    }
}

#[derive(Debug, Clone)]
enum Repr {
    /// `Φ(t) = α e^{−βt}`, `0 < α < β`.
    Exponential { alpha: f64, beta: f64 },
    /// `Φ(t) = α t e^{−βt}`, `0 < α < β²`.
    Erlang { alpha: f64, beta: f64 },
    Zero,
    Tabulated(Arc<TabulatedKernel>),
}

/// A validated, stable excitation kernel. Cheap to clone and share.
#[derive(Debug, Clone)]
pub struct Kernel {
    repr: Repr,
}

impl Kernel {
    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        ensure_finite("alpha", alpha)?;
        ensure_finite("beta", beta)?;
        if alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::InvalidParameter(
                "exponential kernel requires alpha > 0 and beta > 0".into(),
            ));
        }
        if alpha >= beta {
            return Err(Error::Stability("requires alpha < beta".into()));
        }
        Ok(Self { repr: Repr::Exponential { alpha, beta } })
    }

    pub fn erlang(alpha: f64, beta: f64) -> Result<Self> {
        ensure_finite("alpha", alpha)?;
        ensure_finite("beta", beta)?;
        if alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::InvalidParameter(
                "erlang kernel requires alpha > 0 and beta > 0".into(),
            ));
        }
        if alpha >= beta * beta {
            return Err(Error::Stability("requires alpha < beta^2".into()));
        }
        Ok(Self { repr: Repr::Erlang { alpha, beta } })
    }

    pub fn zero() -> Self {
        Self { repr: Repr::Zero }
    }

    /// Piecewise-linear kernel through `(grid[i], values[i])`, zero beyond
    /// the last grid point. The resolvent uses default grid settings.
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::tabulated_with(grid, values, ResolventGrid::default())
    }

    pub fn tabulated_with(grid: Vec<f64>, values: Vec<f64>, settings: ResolventGrid) -> Result<Self> {
        let table = TabulatedKernel::new(grid, values, settings)?;
        Ok(Self { repr: Repr::Tabulated(Arc::new(table)) })
    }

    pub fn kind(&self) -> KernelKind {
        match self.repr {
            Repr::Exponential { .. } => KernelKind::Exponential,
            Repr::Erlang { .. } => KernelKind::Erlang,
            Repr::Zero => KernelKind::Zero,
            Repr::Tabulated(_) => KernelKind::Tabulated,
        }
    }

    /// `(α, β)` for the exponential and Erlang kernels.
    pub fn alpha_beta(&self) -> Option<(f64, f64)> {
        match self.repr {
            Repr::Exponential { alpha, beta } | Repr::Erlang { alpha, beta } => Some((alpha, beta)),
            _ => None,
        }
    }

    pub fn tabulated_table(&self) -> Option<&TabulatedKernel> {
        match &self.repr {
            Repr::Tabulated(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero)
    }

    /// `Φ(t)`; negative `t` is a domain error.
    pub fn phi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("kernel evaluated at negative time {t}")));
        }
        Ok(self.phi_at(t))
    }

    pub(crate) fn phi_at(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Exponential { alpha, beta } => alpha * (-beta * t).exp(),
            Repr::Erlang { alpha, beta } => alpha * t * (-beta * t).exp(),
            Repr::Zero => 0.0,
            Repr::Tabulated(table) => table.value(t),
        }
    }

    /// `‖Φ‖₁`, always in `[0, 1)`.
    pub fn phi_l1(&self) -> f64 {
        match &self.repr {
            Repr::Exponential { alpha, beta } => alpha / beta,
            Repr::Erlang { alpha, beta } => alpha / (beta * beta),
            Repr::Zero => 0.0,
            Repr::Tabulated(table) => table.l1,
        }
    }

    /// `∫₀ˢ Φ(u) du`.
    pub fn phi_integral(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Exponential { alpha, beta } => alpha / beta * -(-beta * s).exp_m1(),
            Repr::Erlang { alpha, beta } => {
                // (α/β²)(1 − e^{−βs}(1 + βs))
                let x = beta * s;
                alpha / (beta * beta) * (-(-x).exp_m1() - x * (-x).exp())
            }
            Repr::Zero => 0.0,
            Repr::Tabulated(table) => table.integral(s),
        }
    }

    /// `sup_{u ≥ 0} Φ(u)`.
    pub fn sup_phi(&self) -> f64 {
        match &self.repr {
            Repr::Exponential { alpha, .. } => *alpha,
            Repr::Erlang { alpha, beta } => alpha / (beta * std::f64::consts::E),
            Repr::Zero => 0.0,
            Repr::Tabulated(table) => table.values.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// `sup_{u ∈ [a, b]} Φ(u)` for `0 ≤ a ≤ b`.
    pub(crate) fn sup_on(&self, a: f64, b: f64) -> f64 {
        match &self.repr {
            Repr::Exponential { .. } => self.phi_at(a),
            Repr::Erlang { beta, .. } => {
                let peak = 1.0 / beta;
                self.phi_at(peak.clamp(a, b))
            }
            Repr::Zero => 0.0,
            Repr::Tabulated(table) => table.sup_on(a, b),
        }
    }

    /// `ψ(t)`, the resolvent of the renewal equation `ψ = Φ + Φ∗ψ`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("resolvent evaluated at negative time {t}")));
        }
        Ok(self.psi_at(t))
    }

    pub(crate) fn psi_at(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Exponential { alpha, beta } => alpha * (-(beta - alpha) * t).exp(),
            Repr::Erlang { alpha, beta } => {
                let (a, p, q) = erlang_rates(*alpha, *beta);
                0.5 * a * ((-p * t).exp() - (-q * t).exp())
            }
            Repr::Zero => 0.0,
            Repr::Tabulated(table) => table.resolvent().value(t),
        }
    }

    /// `Ψ₁(t) = ∫₀ᵗ ψ(u) du`.
    pub fn psi_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Exponential { alpha, beta } => {
                let c = beta - alpha;
                alpha / c * -(-c * t).exp_m1()
            }
            Repr::Erlang { alpha, beta } => {
                let (a, p, q) = erlang_rates(*alpha, *beta);
                0.5 * a * (-(-p * t).exp_m1() / p + (-q * t).exp_m1() / q)
            }
            Repr::Zero => 0.0,
            Repr::Tabulated(table) => table.resolvent().integral(t),
        }
    }

    /// `Ψ₂(t) = ∫₀ᵗ Ψ₁(u) du = ∫₀ᵗ ψ(t − s) s ds`.
    pub fn psi_double_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Exponential { alpha, beta } => {
                let c = beta - alpha;
                alpha / c * (t + (-c * t).exp_m1() / c)
            }
            Repr::Erlang { alpha, beta } => {
                let (a, p, q) = erlang_rates(*alpha, *beta);
                let part = |r: f64| (t + (-r * t).exp_m1() / r) / r;
                0.5 * a * (part(p) - part(q))
            }
            Repr::Zero => 0.0,
            Repr::Tabulated(table) => table.resolvent().double_integral(t),
        }
    }

    /// `‖ψ‖₁ = ‖Φ‖₁ / (1 − ‖Φ‖₁)`.
    pub fn psi_l1(&self) -> f64 {
        let l1 = self.phi_l1();
        l1 / (1.0 - l1)
    }

    /// Time after which `Φ` vanishes identically, if any.
    pub fn support_end(&self) -> Option<f64> {
        match &self.repr {
            Repr::Zero => Some(0.0),
            Repr::Tabulated(table) => Some(table.support_end()),
            _ => None,
        }
    }

    /// Refresh interval of the piecewise-constant thinning majorant.
    pub(crate) fn majorant_window(&self) -> f64 {
        match &self.repr {
            Repr::Exponential { .. } | Repr::Zero => f64::INFINITY,
            Repr::Erlang { beta, .. } => 0.1 / beta,
            Repr::Tabulated(table) => table.min_spacing,
        }
    }
}

/// `(√α, β − √α, β + √α)`: the Erlang resolvent decays at rates `p` and `q`.
fn erlang_rates(alpha: f64, beta: f64) -> (f64, f64, f64) {
    let a = alpha.sqrt();
    (a, beta - a, beta + a)
}

/// Grid settings for the numeric resolvent of a tabulated kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventGrid {
    /// Target step; defaults to the smallest table spacing, capped so the
    /// kernel support spans at least 2000 steps. Rounded down so that the
    /// support is a whole number of steps.
    pub step: Option<f64>,
    /// Hard limit on the solved horizon. The solve stops earlier once `ψ`
    /// stays below `tail_tolerance` for a full kernel support.
    pub max_horizon: Option<f64>,
    pub tail_tolerance: f64,
}

impl Default for ResolventGrid {
    fn default() -> Self {
        Self { step: None, max_horizon: None, tail_tolerance: 1e-12 }
    }
}

/// Piecewise-linear kernel on a nonnegative grid.
#[derive(Debug)]
pub struct TabulatedKernel {
    grid: Vec<f64>,
    values: Vec<f64>,
    /// `∫₀^{grid[i]} Φ`, exact for the linear interpolant.
    cumulative: Vec<f64>,
    l1: f64,
    min_spacing: f64,
    settings: ResolventGrid,
    resolvent: OnceLock<Resolvent>,
}

impl TabulatedKernel {
    fn new(grid: Vec<f64>, values: Vec<f64>, settings: ResolventGrid) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidParameter(
                "tabulated kernel needs at least two (time, value) pairs of equal length".into(),
            ));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidParameter("tabulated kernel grid must start at 0".into()));
        }
        for w in grid.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidParameter(
                    "tabulated kernel grid must be finite and strictly increasing".into(),
                ));
            }
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "tabulated kernel values must be finite and nonnegative".into(),
            ));
        }
        if let Some(step) = settings.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidParameter("resolvent step must be positive".into()));
            }
        }
        let mut cumulative = Vec::with_capacity(grid.len());
        cumulative.push(0.0);
        for i in 1..grid.len() {
            let area = 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
            cumulative.push(cumulative[i - 1] + area);
        }
        let l1 = *cumulative.last().unwrap();
        if l1 >= 1.0 {
            return Err(Error::Stability(format!("requires ||phi||_1 < 1, table integrates to {l1}")));
        }
        let min_spacing = grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        Ok(Self { grid, values, cumulative, l1, min_spacing, settings, resolvent: OnceLock::new() })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Index `i` with `grid[i] <= t < grid[i + 1]`, for `t` inside the support.
    fn segment(&self, t: f64) -> usize {
        let i = self.grid.partition_point(|&g| g <= t);
        i.saturating_sub(1).min(self.grid.len() - 2)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.support_end() {
            return 0.0;
        }
        let i = self.segment(t);
        let (t0, t1) = (self.grid[i], self.grid[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    pub fn integral(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= self.support_end() {
            return self.l1;
        }
        let i = self.segment(s);
        let t0 = self.grid[i];
        self.cumulative[i] + 0.5 * (self.values[i] + self.value(s)) * (s - t0)
    }

    fn sup_on(&self, a: f64, b: f64) -> f64 {
        let end = self.support_end();
        if a > end {
            return 0.0;
        }
        let b = b.min(end);
        let mut sup = self.value(a).max(self.value(b));
        let lo = self.grid.partition_point(|&g| g <= a);
        let hi = self.grid.partition_point(|&g| g < b);
        for v in &self.values[lo..hi.max(lo)] {
            sup = sup.max(*v);
        }
        sup
    }

    /// The numeric resolvent, solved on first use.
    pub fn resolvent(&self) -> &Resolvent {
        self.resolvent.get_or_init(|| Resolvent::solve(self))
    }
}

/// `ψ` sampled on a uniform grid, with cumulative integrals.
#[derive(Debug, Clone)]
pub struct Resolvent {
    step: f64,
    values: Vec<f64>,
    integral: Vec<f64>,
    double_integral: Vec<f64>,
}

impl Resolvent {
    /// Solves the trapezoid discretization of `ψ = Φ + Φ∗ψ`,
    ///
    /// `ψ_n = φ_n + h(½φ_nψ_0 + Σ_{0<j<n} φ_{n−j}ψ_j + ½φ_0ψ_n)`,
    ///
    /// which is the fixed point of the Picard map on the same grid. The
    /// system is lower triangular, so it is solved by forward substitution.
    fn solve(table: &TabulatedKernel) -> Resolvent {
        let support = table.support_end();
        let target = table
            .settings
            .step
            .unwrap_or_else(|| table.min_spacing.min(support / 2000.0));
        // Align the grid with the end of the support, where Φ may jump to 0;
        // the trapezoid rule then takes the mean of the two one-sided limits.
        let m = (support / target).ceil() as usize;
        let step = support / m as f64;
        let mut phi: Vec<f64> = (0..m).map(|n| table.value(n as f64 * step)).collect();
        phi.push(0.5 * table.values.last().unwrap());

        let max_horizon = table.settings.max_horizon.unwrap_or(f64::INFINITY);
        let max_points = ((max_horizon / step).ceil() as usize).min(4_000_000);
        let tol = table.settings.tail_tolerance;
        let diag = 1.0 - 0.5 * step * phi[0];

        let mut psi: Vec<f64> = vec![phi[0]];
        let mut quiet = 0usize;
        let mut n = 1usize;
        while n <= max_points {
            let phi_n = phi.get(n).copied().unwrap_or(0.0);
            let mut acc = 0.5 * phi_n * psi[0];
            let lo = n.saturating_sub(m).max(1);
            for j in lo..n {
                acc += phi[n - j] * psi[j];
            }
            let value = (phi_n + step * acc) / diag;
            psi.push(value);
            if n > m && value < tol {
                quiet += 1;
                if quiet > m {
                    break;
                }
            } else {
                quiet = 0;
            }
            n += 1;
        }

        let mut integral = Vec::with_capacity(psi.len());
        let mut double_integral = Vec::with_capacity(psi.len());
        integral.push(0.0);
        double_integral.push(0.0);
        for i in 1..psi.len() {
            let a = integral[i - 1] + 0.5 * step * (psi[i] + psi[i - 1]);
            integral.push(a);
            double_integral.push(double_integral[i - 1] + 0.5 * step * (a + integral[i - 1]));
        }
        Resolvent { step, values: psi, integral, double_integral }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let x = t / self.step;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        (i, x - i as f64)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t > self.horizon() {
            return 0.0;
        }
        let (i, w) = self.locate(t);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    pub fn integral(&self, t: f64) -> f64 {
        let h = self.horizon();
        if t >= h {
            return *self.integral.last().unwrap();
        }
        let (i, w) = self.locate(t);
        let dt = w * self.step;
        self.integral[i] + 0.5 * dt * (self.values[i] + self.value(t))
    }

    pub fn double_integral(&self, t: f64) -> f64 {
        let h = self.horizon();
        if t >= h {
            return *self.double_integral.last().unwrap() + *self.integral.last().unwrap() * (t - h);
        }
        let (i, w) = self.locate(t);
        let dt = w * self.step;
        self.double_integral[i] + 0.5 * dt * (self.integral[i] + self.integral(t))
    }
}
