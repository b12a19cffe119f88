//! First and second moments of the intensity and the counting process.
//!
//! With an empty past at time 0, `E[λ_t] = μ(1 + Ψ₁(t))` and
//! `E[H_t] = μ(t + Ψ₂(t))`, where `Ψ₁, Ψ₂` are the first two antiderivatives
//! of the resolvent. Second moments come from the Dynkin generator of the
//! Markov state: `λ` for exponential kernels and `(λ, ξ)` for Erlang kernels.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelKind};
use crate::marks::MarkDistribution;

/// `E[λ_t] = μ + μ∫₀ᵗ ψ(s) ds`.
pub fn expected_intensity(kernel: &Kernel, mu: f64, t: f64) -> f64 {
    mu * (1.0 + kernel.psi_integral(t))
}

/// `E[H_t] = μt + μ∫₀ᵗ ψ(t − s) s ds`.
pub fn expected_count(kernel: &Kernel, mu: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    mu * (t + kernel.psi_double_integral(t))
}

/// `E[ξ_t]` for the auxiliary Markov coordinate: `ξ = Σ αe^{−β(t−T_i)}`
/// for Erlang kernels and `ξ = λ − μ` for exponential ones.
pub fn expected_aux(kernel: &Kernel, mu: f64, t: f64) -> Result<f64> {
    match kernel.kind() {
        KernelKind::Exponential => Ok(mu * kernel.psi_integral(t)),
        KernelKind::Erlang => {
            let (_, beta) = kernel.alpha_beta().unwrap();
            Ok(mu * (kernel.psi_at(t) + beta * kernel.psi_integral(t)))
        }
        kind => Err(Error::Unsupported(format!("no auxiliary process for {kind} kernel"))),
    }
}

/// Long-run constants of the Gaussian limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticConstants {
    /// `μ / (1 − ‖Φ‖₁)`, the long-run event rate.
    pub sigma2: f64,
    /// `μ / (1 − ‖Φ‖₁)³`, the limit variance of `Y_T`.
    pub sigma2_tilde: f64,
    /// `1 / (1 − ‖Φ‖₁)`.
    pub gamma: f64,
    /// `σ²ϑ²`, the limit variance of `F_T`.
    pub limit_variance: f64,
}

pub fn asymptotic_constants(kernel: &Kernel, mu: f64, marks: &MarkDistribution) -> AsymptoticConstants {
    let gamma = 1.0 / (1.0 - kernel.phi_l1());
    let sigma2 = mu * gamma;
    AsymptoticConstants {
        sigma2,
        sigma2_tilde: sigma2 * gamma * gamma,
        gamma,
        limit_variance: sigma2 * marks.theta2(),
    }
}

/// Moments of the intensity at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub t: f64,
    pub mean_intensity: f64,
    pub mean_count: f64,
    /// `E[λ_t²]`; only for Markov kernels.
    pub second_moment_intensity: Option<f64>,
    pub aux_mean: Option<f64>,
    /// `E[ξ_t²]`, Erlang only.
    pub aux_second_moment: Option<f64>,
    /// `E[λ_t ξ_t]`, Erlang only.
    pub cross_moment: Option<f64>,
}

/// The matrix of the Erlang second-moment system acting on
/// `(E[λ²], E[ξ²], E[λξ])`.
pub fn erlang_moment_matrix(alpha: f64, beta: f64) -> [[f64; 3]; 3] {
    [
        [-2.0 * beta, 0.0, 2.0],
        [0.0, -2.0 * beta, 2.0 * alpha],
        [alpha, 1.0, -2.0 * beta],
    ]
}

/// Eigenvalues of [`erlang_moment_matrix`]: `−2β` and `−2β ± 2√α`.
pub fn erlang_moment_eigenvalues(alpha: f64, beta: f64) -> [f64; 3] {
    let r = 2.0 * alpha.sqrt();
    [-2.0 * beta - r, -2.0 * beta, -2.0 * beta + r]
}

/// `lim E[λ_t²]` for an exponential kernel:
/// `(2βμ + α²) E[λ_∞] / (2(β − α))` with `E[λ_∞] = βμ/(β − α)`.
pub fn stationary_second_moment(kernel: &Kernel, mu: f64) -> Result<f64> {
    match kernel.kind() {
        KernelKind::Exponential => {
            let (alpha, beta) = kernel.alpha_beta().unwrap();
            let mean = beta * mu / (beta - alpha);
            Ok((2.0 * beta * mu + alpha * alpha) * mean / (2.0 * (beta - alpha)))
        }
        KernelKind::Zero => Ok(mu * mu),
        kind => Err(Error::Unsupported(format!("no stationary closed form for {kind} kernel"))),
    }
}

type Field<const N: usize> = fn(&[f64; N], f64, f64, f64) -> [f64; N];

fn rk4<const N: usize>(f: Field<N>, y: &mut [f64; N], h: f64, p: (f64, f64, f64)) {
    let (a, b, mu) = p;
    let add = |y: &[f64; N], k: &[f64; N], s: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += s * k[i];
        }
        out
    };
    let k1 = f(y, a, b, mu);
    let k2 = f(&add(y, &k1, 0.5 * h), a, b, mu);
    let k3 = f(&add(y, &k2, 0.5 * h), a, b, mu);
    let k4 = f(&add(y, &k3, h), a, b, mu);
    for i in 0..N {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// State `(E[λ], E[λ²])`.
fn exponential_field(y: &[f64; 2], alpha: f64, beta: f64, mu: f64) -> [f64; 2] {
    [
        (alpha - beta) * y[0] + beta * mu,
        2.0 * (alpha - beta) * y[1] + (2.0 * beta * mu + alpha * alpha) * y[0],
    ]
}

/// State `(E[λ], E[ξ], E[λ²], E[ξ²], E[λξ])`.
fn erlang_field(y: &[f64; 5], alpha: f64, beta: f64, mu: f64) -> [f64; 5] {
    let [l, x, l2, x2, lx] = *y;
    [
        x + beta * (mu - l),
        -beta * x + alpha * l,
        -2.0 * beta * l2 + 2.0 * lx + 2.0 * beta * mu * l,
        -2.0 * beta * x2 + 2.0 * alpha * lx + alpha * alpha * l,
        alpha * l2 + x2 - 2.0 * beta * lx + beta * mu * x,
    ]
}

/// Integrates `y` from `from` to `to` with steps no longer than `h`.
fn integrate<const N: usize>(f: Field<N>, y: &mut [f64; N], from: f64, to: f64, h: f64, p: (f64, f64, f64)) {
    if to <= from {
        return;
    }
    let steps = ((to - from) / h).ceil().max(1.0) as usize;
    let dt = (to - from) / steps as f64;
    for _ in 0..steps {
        rk4(f, y, dt, p);
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Domain("moment times must be finite and nonnegative".into()));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("moment times must be nondecreasing".into()));
    }
    Ok(())
}

/// Integrates the second-moment equations with RK4 at step `10⁻³/β`,
/// starting from `λ₀ = μ`, `ξ₀ = 0`, and reports at each time in `t_grid`.
pub fn second_moment_ode(kernel: &Kernel, mu: f64, t_grid: &[f64]) -> Result<Vec<MomentReport>> {
    check_grid(t_grid)?;
    let base = |t: f64| MomentReport {
        t,
        mean_intensity: expected_intensity(kernel, mu, t),
        mean_count: expected_count(kernel, mu, t),
        second_moment_intensity: None,
        aux_mean: None,
        aux_second_moment: None,
        cross_moment: None,
    };
    match kernel.kind() {
        KernelKind::Zero => Ok(t_grid
            .iter()
            .map(|&t| MomentReport { second_moment_intensity: Some(mu * mu), ..base(t) })
            .collect()),
        KernelKind::Exponential => {
            let (alpha, beta) = kernel.alpha_beta().unwrap();
            let h = 1e-3 / beta;
            let mut y = [mu, mu * mu];
            let mut now = 0.0;
            let mut out = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                integrate(exponential_field, &mut y, now, t, h, (alpha, beta, mu));
                now = t;
                out.push(MomentReport {
                    second_moment_intensity: Some(y[1]),
                    aux_mean: Some(y[0] - mu),
                    ..base(t)
                });
            }
            Ok(out)
        }
        KernelKind::Erlang => {
            let (alpha, beta) = kernel.alpha_beta().unwrap();
            let h = 1e-3 / beta;
            let mut y = [mu, 0.0, mu * mu, 0.0, 0.0];
            let mut now = 0.0;
            let mut out = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                integrate(erlang_field, &mut y, now, t, h, (alpha, beta, mu));
                now = t;
                out.push(MomentReport {
                    second_moment_intensity: Some(y[2]),
                    aux_mean: Some(y[1]),
                    aux_second_moment: Some(y[3]),
                    cross_moment: Some(y[4]),
                    ..base(t)
                });
            }
            Ok(out)
        }
        KernelKind::Tabulated => Err(Error::Unsupported(
            "second moments need an exponential or Erlang kernel".into(),
        )),
    }
}

/// First moments for any kernel, with second moments where available.
pub fn moment_series(kernel: &Kernel, mu: f64, t_grid: &[f64]) -> Result<Vec<MomentReport>> {
    match second_moment_ode(kernel, mu, t_grid) {
        Err(Error::Unsupported(_)) => Ok(t_grid
            .iter()
            .map(|&t| MomentReport {
                t,
                mean_intensity: expected_intensity(kernel, mu, t),
                mean_count: expected_count(kernel, mu, t),
                second_moment_intensity: None,
                aux_mean: None,
                aux_second_moment: None,
                cross_moment: None,
            })
            .collect()),
        other => other,
    }
}

pub const MOMENTS_HEADER: &str = "t,mean_intensity,mean_count,second_moment";

/// Writes `t,mean_intensity,mean_count,second_moment`; a missing second
/// moment is written as `NaN`.
pub fn write_moments_csv<W: Write>(mut w: W, reports: &[MomentReport]) -> io::Result<()> {
    writeln!(w, "{MOMENTS_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{}",
            r.t,
            r.mean_intensity,
            r.mean_count,
            r.second_moment_intensity.unwrap_or(f64::NAN)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp12() -> Kernel {
        Kernel::exponential(1.0, 2.0).unwrap()
    }

    fn erl12() -> Kernel {
        Kernel::erlang(1.0, 2.0).unwrap()
    }

    /// `E[λ_t]` by explicit Euler on the Volterra equation
    /// `m(t) = μ + ∫₀ᵗ Φ(t − s) m(s) ds`, integrated again for `E[H_t]`.
    fn volterra_means(kernel: &Kernel, mu: f64, t: f64, n: usize) -> (f64, f64) {
        let h = t / n as f64;
        let phi: Vec<f64> = (0..=n).map(|i| kernel.phi_at(i as f64 * h)).collect();
        let mut m = vec![mu; n + 1];
        for i in 1..=n {
            let mut acc = 0.5 * phi[i] * m[0];
            for j in 1..i {
                acc += phi[i - j] * m[j];
            }
            m[i] = (mu + h * acc) / (1.0 - 0.5 * h * phi[0]);
        }
        let count: f64 = (1..=n).map(|i| 0.5 * h * (m[i] + m[i - 1])).sum();
        (m[n], count)
    }

    #[test]
    fn zero_kernel_count() {
        assert_eq!(expected_count(&Kernel::zero(), 1.0, 7.0), 7.0);
        assert_eq!(expected_intensity(&Kernel::zero(), 3.0, 7.0), 3.0);
    }

    #[test]
    fn exponential_count_at_one() {
        let v = expected_count(&exp12(), 1.0, 1.0);
        assert!((v - (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 1.367879).abs() < 1e-6);
        let (_, oracle) = volterra_means(&exp12(), 1.0, 1.0, 4000);
        assert!((v - oracle).abs() < 1e-6);
    }

    #[test]
    fn renewal_means_match_volterra() {
        let tab = Kernel::tabulated(vec![0.0, 0.5, 1.5], vec![0.3, 0.4, 0.0]).unwrap();
        for k in [exp12(), erl12(), tab] {
            let (mean, count) = volterra_means(&k, 0.7, 6.0, 6000);
            assert!((expected_intensity(&k, 0.7, 6.0) - mean).abs() < 1e-5, "{:?}", k.kind());
            assert!((expected_count(&k, 0.7, 6.0) - count).abs() < 1e-5, "{:?}", k.kind());
        }
    }

    #[test]
    fn long_run_rate() {
        let k = exp12();
        let ratio = expected_count(&k, 1.0, 1e6) / 1e6;
        assert!((ratio - 2.0).abs() < 1e-5);
    }

    #[test]
    fn count_derivative_is_intensity() {
        let tab = Kernel::tabulated(vec![0.0, 0.5, 1.5], vec![0.3, 0.4, 0.0]).unwrap();
        for k in [exp12(), erl12(), tab] {
            for &t in &[0.5, 2.0, 10.0] {
                let h = 1e-4;
                let fd = (expected_count(&k, 1.0, t + h) - expected_count(&k, 1.0, t - h)) / (2.0 * h);
                let exact = expected_intensity(&k, 1.0, t);
                assert!((fd - exact).abs() <= 1e-4 * exact, "{:?} t={t}", k.kind());
            }
        }
    }

    #[test]
    fn rate_gap_decays_like_inverse_t() {
        for k in [exp12(), erl12()] {
            let c = asymptotic_constants(&k, 1.0, &MarkDistribution::point_mass_one());
            let scaled: Vec<f64> = [25.0, 50.0, 100.0, 200.0, 400.0]
                .iter()
                .map(|&t| t * (c.sigma2 - expected_count(&k, 1.0, t) / t).abs())
                .collect();
            let max = scaled.iter().cloned().fold(0.0, f64::max);
            let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(max / min < 1.01, "{scaled:?}");
        }
    }

    #[test]
    fn constants() {
        let one = MarkDistribution::point_mass_one();
        let c = asymptotic_constants(&exp12(), 1.0, &one);
        assert_eq!((c.sigma2, c.sigma2_tilde, c.gamma, c.limit_variance), (2.0, 8.0, 2.0, 2.0));
        let c = asymptotic_constants(&erl12(), 1.0, &one);
        assert!((c.sigma2 - 4.0 / 3.0).abs() < 1e-15);
        assert!((c.sigma2_tilde - 64.0 / 27.0).abs() < 1e-14);
        assert!((c.gamma - 4.0 / 3.0).abs() < 1e-15);
        assert!((c.limit_variance - 4.0 / 3.0).abs() < 1e-15);
        let two = MarkDistribution::two_point(-1.0, (3.0f64).sqrt(), 0.5).unwrap();
        assert!((two.theta2() - 2.0).abs() < 1e-15);
        let c = asymptotic_constants(&Kernel::zero(), 3.0, &two);
        assert_eq!((c.sigma2, c.sigma2_tilde, c.gamma), (3.0, 3.0, 1.0));
        assert!((c.limit_variance - 6.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_second_moment_start_and_limit() {
        let r = second_moment_ode(&exp12(), 1.0, &[0.0, 60.0]).unwrap();
        assert_eq!(r[0].second_moment_intensity, Some(1.0));
        assert!((r[1].second_moment_intensity.unwrap() - 5.0).abs() < 1e-6);
        assert_eq!(stationary_second_moment(&exp12(), 1.0).unwrap(), 5.0);
    }

    #[test]
    fn ode_first_moments_match_renewal() {
        for k in [exp12(), erl12()] {
            let grid = [0.5, 1.0, 3.0, 10.0];
            for r in second_moment_ode(&k, 1.3, &grid).unwrap() {
                let aux = expected_aux(&k, 1.3, r.t).unwrap();
                assert!((r.aux_mean.unwrap() - aux).abs() < 1e-9, "{:?}", k.kind());
            }
        }
    }

    #[test]
    fn erlang_eigenvalues_are_roots() {
        let m = erlang_moment_matrix(1.0, 2.0);
        let ev = erlang_moment_eigenvalues(1.0, 2.0);
        assert_eq!(ev, [-6.0, -4.0, -2.0]);
        let det = |v: f64| {
            let a = [
                [m[0][0] - v, m[0][1], m[0][2]],
                [m[1][0], m[1][1] - v, m[1][2]],
                [m[2][0], m[2][1], m[2][2] - v],
            ];
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        };
        for v in ev {
            assert!(det(v).abs() < 1e-12);
        }
        let trace = m[0][0] + m[1][1] + m[2][2];
        assert!((trace - ev.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn erlang_second_moment_converges_to_fixed_point() {
        // Stationary point of the 5-dimensional linear system, solved directly.
        let (a, b, mu) = (1.0, 2.0, 1.0);
        let l = b * b * mu / (b * b - a);
        let x = a * l / b;
        // −2b L2 + 2 LX = −2bμl ; −2b X2 + 2a LX = −a²l ; a L2 + X2 − 2b LX = −bμx
        let rhs = [-2.0 * b * mu * l, -a * a * l, -b * mu * x];
        let m = erlang_moment_matrix(a, b);
        // Cramer's rule.
        let det3 = |c: [[f64; 3]; 3]| {
            c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
                - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
                + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0])
        };
        let d = det3(m);
        let mut col0 = m;
        for i in 0..3 {
            col0[i][0] = rhs[i];
        }
        let l2 = det3(col0) / d;
        let r = second_moment_ode(&erl12(), mu, &[80.0]).unwrap();
        assert!((r[0].second_moment_intensity.unwrap() - l2).abs() < 1e-8);
    }

    #[test]
    fn jensen_holds() {
        for k in [exp12(), erl12()] {
            let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.4).collect();
            for r in second_moment_ode(&k, 1.0, &grid).unwrap() {
                assert!(r.second_moment_intensity.unwrap() >= r.mean_intensity.powi(2) - 1e-12);
                assert!(r.mean_intensity >= 1.0);
            }
        }
    }

    #[test]
    fn tabulated_second_moment_unsupported() {
        let tab = Kernel::tabulated(vec![0.0, 1.0], vec![0.5, 0.0]).unwrap();
        assert!(matches!(second_moment_ode(&tab, 1.0, &[1.0]), Err(Error::Unsupported(_))));
        let rows = moment_series(&tab, 1.0, &[1.0]).unwrap();
        let mut buf = Vec::new();
        write_moments_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,mean_intensity,mean_count,second_moment\n1,"));
        assert!(text.trim_end().ends_with(",NaN"));
    }
}
