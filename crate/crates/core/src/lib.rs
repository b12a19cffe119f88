//! Simulation of compound Hawkes processes and Monte Carlo estimation of
//! Stein-Malliavin bounds on their Gaussian approximation.
//!
//! The process is built as the solution of a thinning equation driven by a
//! Poisson measure on `time × height × mark`. Adding one atom to that
//! measure produces a shifted cascade coupled to the base path, which gives
//! the add-one-cost derivative of the normalized statistic
//! `F_T = (X_T − m∫λ)/√T` pathwise.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupled;
pub mod distance;
pub mod error;
mod excitation;
pub mod kernel;
pub mod marks;
pub mod moments;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod stein;

pub use coupled::{
    lambda_hat_m_integral, malliavin_derivative, simulate_shift, simulate_shift_in_field, BandField,
    CoupledRun, ShiftPath,
};
pub use error::{Error, Result};
pub use kernel::{Kernel, KernelKind, ResolventGrid};
pub use marks::MarkDistribution;
pub use moments::{asymptotic_constants, expected_count, expected_intensity, AsymptoticConstants, MomentReport};
pub use rng::RandomState;
pub use simulate::{Atom, HawkesModel, HawkesPath};
