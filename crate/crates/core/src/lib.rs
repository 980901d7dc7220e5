//! Exact rapidly oscillating periodic solutions of the delayed Duffing
//! equation `x''(t) + x(t - T) + x(t)^3 = 0`.
//!
//! Periodic orbits of the non-delayed oscillator `x'' ± x + x^3 = 0` whose
//! minimal period is `2T/n` also solve the delayed equation. This crate
//! evaluates those orbits through Jacobi elliptic functions, solves for their
//! amplitudes, evaluates the large-amplitude series, and integrates the
//! delayed equation to probe their stability.

pub mod amplitude;
pub mod dde;
pub mod duffing;
pub mod error;
pub mod experiments;
pub mod special;

pub use amplitude::{
    series_amplitude_of_period, series_period_of_amplitude, shared_amplitude, solve_amplitude, SeriesOrder,
};
pub use dde::{integrate, HistoryFunction, HistorySample, SolverConfig, Trajectory};
pub use duffing::{
    energy, exact_solution, lift_residual, minimal_period, modulus_frequency, DuffingOrbit, LiftResidual, OrbitSpec,
    Parity,
};
pub use error::{Error, Result};
pub use special::{elliptic_k, gamma_quarter_squared, jacobi_cn_sn_dn, EllipticModulus, Jacobi};
pub use experiments::{
    convergence_probe, floquet_estimate, heteroclinic_probe, orbit_distance, stability_region, FloquetEstimate,
    HeteroclinicReport, Outcome, ProbeConfig, ProbeRecord, Verdict,
};
