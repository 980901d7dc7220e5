//! Exact periodic solutions of the non-delayed Duffing oscillator
//! `x'' + s x + x^3 = 0` with `s = (-1)^n`, and their lift to the delayed
//! equation `x''(t) + x(t - T) + x(t)^3 = 0`.
//!
//! With `x(0) = A`, `x'(0) = 0` the solution is `x(t) = A cn(ω t | m)` where
//! `m = A² / (2(A² + s))` and `ω = sqrt(A² + s)`. Its minimal period is
//! `p = 4 K(m) / ω`. When `p = 2T/n` the orbit satisfies
//! `x(t - T) = (-1)^n x(t)` and therefore also solves the delayed equation.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{EllipticModulus, Jacobi};

/// Odd amplitudes must exceed `sqrt(2)` by at least this much.
pub const SEPARATRIX_MARGIN: f64 = 1e-12;

/// Relative mismatch between `4K/ω` and `2T/n` that [`OrbitSpec::from_amplitude`]
/// accepts. Loose enough for amplitudes quoted to eight digits.
pub const LIFT_PERIOD_TOL: f64 = 1e-6;

/// Parity of the lift index `n`: even orbits live in the single well,
/// odd orbits outside the separatrix of the double well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: u32) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `(-1)^n`.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            other => Err(Error::domain(format!("unknown parity '{other}', expected 'even' or 'odd'"))),
        }
    }
}

fn check_amplitude(amplitude: f64, parity: Parity) -> Result<()> {
    if !amplitude.is_finite() || amplitude <= 0.0 {
        return Err(Error::domain(format!("amplitude A = {amplitude} must be positive and finite")));
    }
    if parity == Parity::Odd && amplitude <= SQRT_2 + SEPARATRIX_MARGIN {
        return Err(Error::domain(format!(
            "odd amplitude A = {amplitude} is inside or on the separatrix (A <= sqrt(2), H <= 0)"
        )));
    }
    Ok(())
}

/// Elliptic parameter and angular frequency of the orbit with amplitude `A`.
pub fn modulus_frequency(amplitude: f64, parity: Parity) -> Result<(EllipticModulus, f64)> {
    check_amplitude(amplitude, parity)?;
    let a2 = amplitude * amplitude;
    let shifted = a2 + parity.sign();
    let m = EllipticModulus::new(a2 / (2.0 * shifted))?;
    Ok((m, shifted.sqrt()))
}

/// Minimal period `4 K(m) / ω`.
pub fn minimal_period(amplitude: f64, parity: Parity) -> Result<f64> {
    let (m, omega) = modulus_frequency(amplitude, parity)?;
    Ok(4.0 * crate::special::elliptic_k(m) / omega)
}

/// Hamiltonian `ẋ²/2 + (-1)^n x²/2 + x⁴/4`.
pub fn energy(x: f64, xdot: f64, parity: Parity) -> f64 {
    0.5 * xdot * xdot + 0.5 * parity.sign() * x * x + 0.25 * x * x * x * x
}

/// A positive-energy periodic orbit of the non-delayed oscillator, started at
/// its turning point `(A, 0)`.
#[derive(Debug, Clone)]
pub struct DuffingOrbit {
    amplitude: f64,
    parity: Parity,
    omega: f64,
    period: f64,
    jacobi: Jacobi,
}

impl DuffingOrbit {
    pub fn new(amplitude: f64, parity: Parity) -> Result<Self> {
        let (m, omega) = modulus_frequency(amplitude, parity)?;
        let jacobi = Jacobi::new(m);
        let period = 4.0 * jacobi.quarter_period() / omega;
        Ok(DuffingOrbit { amplitude, parity, omega, period, jacobi })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn modulus(&self) -> EllipticModulus {
        self.jacobi.modulus()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// `H = (-1)^n A²/2 + A⁴/4`, strictly positive.
    pub fn energy(&self) -> f64 {
        energy(self.amplitude, 0.0, self.parity)
    }

    /// `(A cn(ωt), -A ω sn(ωt) dn(ωt))`.
    pub fn state_at(&self, t: f64) -> (f64, f64) {
        let v = self.jacobi.eval(self.omega * t);
        (self.amplitude * v.cn, -self.amplitude * self.omega * v.sn * v.dn)
    }

    /// Right-hand side of the non-delayed oscillator, `ẍ = -(-1)^n x - x³`.
    #[inline]
    pub fn acceleration(&self, x: f64) -> f64 {
        -self.parity.sign() * x - x * x * x
    }
}

/// A lifted periodic orbit `x_n` of the delayed equation with delay `T`.
///
/// Only built by [`OrbitSpec::from_amplitude`] or by the amplitude solver,
/// both of which check that the minimal period equals `2T/n`.
#[derive(Debug, Clone)]
pub struct OrbitSpec {
    n: u32,
    delay: f64,
    orbit: DuffingOrbit,
}

impl OrbitSpec {
    /// Builds the lifted orbit from a known amplitude, rejecting amplitudes
    /// whose period differs from `2T/n` by more than [`LIFT_PERIOD_TOL`].
    pub fn from_amplitude(n: u32, delay: f64, amplitude: f64) -> Result<Self> {
        let spec = Self::unchecked(n, delay, amplitude)?;
        let mismatch = spec.period_mismatch();
        if mismatch > LIFT_PERIOD_TOL {
            return Err(Error::domain(format!(
                "amplitude {amplitude} has period {} but 2T/n = {} (relative mismatch {mismatch:.3e})",
                spec.period(),
                spec.target_period()
            )));
        }
        Ok(spec)
    }

    pub(crate) fn unchecked(n: u32, delay: f64, amplitude: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("lift index n must be at least 1"));
        }
        if !(delay.is_finite() && delay > 0.0) {
            return Err(Error::domain(format!("delay T = {delay} must be positive")));
        }
        let orbit = DuffingOrbit::new(amplitude, Parity::of(n))?;
        Ok(OrbitSpec { n, delay, orbit })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn parity(&self) -> Parity {
        self.orbit.parity()
    }

    pub fn amplitude(&self) -> f64 {
        self.orbit.amplitude()
    }

    pub fn modulus(&self) -> EllipticModulus {
        self.orbit.modulus()
    }

    pub fn omega(&self) -> f64 {
        self.orbit.omega()
    }

    /// `4K(m)/ω`.
    pub fn period(&self) -> f64 {
        self.orbit.period()
    }

    /// `2T/n`.
    pub fn target_period(&self) -> f64 {
        2.0 * self.delay / self.n as f64
    }

    /// `|4K/ω - 2T/n| / (2T/n)`.
    pub fn period_mismatch(&self) -> f64 {
        let target = self.target_period();
        (self.period() - target).abs() / target
    }

    pub fn energy(&self) -> f64 {
        self.orbit.energy()
    }

    pub fn orbit(&self) -> &DuffingOrbit {
        &self.orbit
    }

    /// True when an even orbit has collapsed towards the origin, i.e. `2T/n`
    /// is within rounding of `2π`.
    pub fn is_near_existence_boundary(&self) -> bool {
        self.parity() == Parity::Even && self.amplitude() < 1e-8
    }
}

/// `(x_n(t), ẋ_n(t))`.
pub fn exact_solution(orbit: &OrbitSpec, t: f64) -> (f64, f64) {
    orbit.orbit.state_at(t)
}

/// Maximum residuals of the lift identity over sampled times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftResidual {
    /// `max |ẍ(t) + x(t - T) + x(t)³|` with `ẍ` from the non-delayed equation.
    pub dde_residual: f64,
    /// `max |x(t - T) - (-1)^n x(t)|`.
    pub shift_residual: f64,
}

/// Checks that `orbit` solves the delayed equation over `sample_count`
/// equispaced times in `[0, 2T]`.
pub fn lift_residual(orbit: &OrbitSpec, sample_count: usize) -> Result<LiftResidual> {
    lift_residual_with_delay(&orbit.orbit, orbit.delay, sample_count)
}

/// Same as [`lift_residual`] for an arbitrary ODE orbit and delay, whether or
/// not its period matches.
pub fn lift_residual_with_delay(orbit: &DuffingOrbit, delay: f64, sample_count: usize) -> Result<LiftResidual> {
    if sample_count < 2 {
        return Err(Error::domain(format!("sample_count = {sample_count} must be at least 2")));
    }
    let sign = orbit.parity().sign();
    let step = 2.0 * delay / (sample_count - 1) as f64;
    let mut out = LiftResidual { dde_residual: 0.0, shift_residual: 0.0 };
    for i in 0..sample_count {
        let t = i as f64 * step;
        let (x, _) = orbit.state_at(t);
        let (x_delayed, _) = orbit.state_at(t - delay);
        let xddot = orbit.acceleration(x);
        out.dde_residual = out.dde_residual.max((xddot + x_delayed + x * x * x).abs());
        out.shift_residual = out.shift_residual.max((x_delayed - sign * x).abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_limit_for_small_even_amplitude() {
        let (m, omega) = modulus_frequency(1e-9, Parity::Even).unwrap();
        assert!(m.value() < 1e-17);
        assert!((omega - 1.0).abs() < 1e-15);
    }

    #[test]
    fn odd_amplitude_two() {
        let (m, omega) = modulus_frequency(2.0, Parity::Odd).unwrap();
        assert!((m.value() - 2.0 / 3.0).abs() < 1e-15);
        assert!((omega - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn separatrix_and_nonpositive_amplitudes_are_rejected() {
        assert!(matches!(modulus_frequency(SQRT_2, Parity::Odd), Err(Error::Domain(_))));
        assert!(matches!(modulus_frequency(1.0, Parity::Odd), Err(Error::Domain(_))));
        assert!(matches!(modulus_frequency(0.0, Parity::Even), Err(Error::Domain(_))));
        assert!(matches!(modulus_frequency(-2.0, Parity::Even), Err(Error::Domain(_))));
        assert!(modulus_frequency(SQRT_2 + 1e-9, Parity::Odd).is_ok());
    }

    #[test]
    fn period_tends_to_two_pi_at_small_amplitude() {
        let p = minimal_period(1e-8, Parity::Even).unwrap();
        assert!((p - 2.0 * PI).abs() < 1e-7);
    }

    #[test]
    fn period_at_amplitude_four_point_three() {
        let p = minimal_period(4.3, Parity::Odd).unwrap();
        assert!((p - 1.797_260_8).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn period_matches_quadrature_of_period_integral() {
        // p/4 = ∫₀^A dx / sqrt((A² - x²)(s + A²/2 + x²/2)); with x = A sin θ
        // the endpoint singularity disappears:
        // p/4 = ∫₀^{π/2} dθ / sqrt(s + A²/2 + A² sin²θ / 2).
        let (a, s) = (2.0f64, -1.0f64);
        let n = 20_000;
        let h = (PI / 2.0) / n as f64;
        let f = |th: f64| 1.0 / (s + 0.5 * a * a + 0.5 * a * a * th.sin().powi(2)).sqrt();
        // Composite Simpson; the integrand is smooth and periodic-ish.
        let mut sum = f(0.0) + f(PI / 2.0);
        for i in 1..n {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let quad = 4.0 * sum * h / 3.0;
        let p = minimal_period(a, Parity::Odd).unwrap();
        assert!((p - quad).abs() / quad < 1e-12, "p = {p}, quadrature = {quad}");
    }

    #[test]
    fn energy_values() {
        assert_eq!(energy(0.0, 0.0, Parity::Odd), 0.0);
        assert!(energy(SQRT_2, 0.0, Parity::Odd).abs() < 1e-15);
        let a = 1.7;
        assert_eq!(energy(a, 0.0, Parity::Even), a * a / 2.0 + a.powi(4) / 4.0);
    }

    #[test]
    fn exact_solution_landmarks() {
        let spec = OrbitSpec::from_amplitude(1, 0.5, 7.513_995_8).unwrap();
        let p = spec.period();
        assert_eq!(exact_solution(&spec, 0.0), (spec.amplitude(), 0.0));
        assert!(exact_solution(&spec, p / 4.0).0.abs() < 1e-10);
        let (x, v) = exact_solution(&spec, p / 2.0);
        assert!((x + spec.amplitude()).abs() < 1e-10);
        assert!(v.abs() < 1e-10 * spec.omega() * spec.amplitude());
    }

    #[test]
    fn mismatched_amplitude_is_rejected_by_factory() {
        assert!(OrbitSpec::from_amplitude(1, 0.5, 7.6).is_err());
        assert!(OrbitSpec::from_amplitude(0, 0.5, 7.5).is_err());
        assert!(OrbitSpec::from_amplitude(1, -0.5, 7.5).is_err());
    }

    #[test]
    fn eight_digit_amplitude_lifts_to_within_1e6() {
        let spec = OrbitSpec::from_amplitude(1, 0.5, 7.513_995_8).unwrap();
        let r = lift_residual(&spec, 1000).unwrap();
        assert!(r.dde_residual < 1e-6 && r.shift_residual < 1e-6, "{r:?}");
    }

    #[test]
    fn perturbed_amplitude_breaks_the_lift() {
        let orbit = DuffingOrbit::new(7.513_995_8 + 0.01, Parity::Odd).unwrap();
        let r = lift_residual_with_delay(&orbit, 0.5, 1000).unwrap();
        // Measured 2.68e-2 for this perturbation (mpmath, 1000 samples).
        assert!(r.shift_residual > 1e-4, "{r:?}");
        assert!(r.shift_residual > 1e-2 && r.shift_residual < 5e-2, "{r:?}");
    }

    #[test]
    fn lift_residual_needs_two_samples() {
        let spec = OrbitSpec::from_amplitude(1, 0.5, 7.513_995_8).unwrap();
        assert!(lift_residual(&spec, 1).is_err());
    }

    #[test]
    fn period_is_monotone_decreasing() {
        for parity in [Parity::Even, Parity::Odd] {
            let lo = if parity == Parity::Odd { SQRT_2 + 1e-3 } else { 1e-3 };
            let mut prev = f64::INFINITY;
            for i in 0..1000 {
                let a = lo + i as f64 * 0.05;
                let p = minimal_period(a, parity).unwrap();
                assert!(p < prev, "{parity}: p({a}) = {p} not below {prev}");
                prev = p;
            }
        }
    }

    fn arb_orbit() -> impl Strategy<Value = DuffingOrbit> {
        prop_oneof![
            (0.01f64..60.0).prop_map(|a| DuffingOrbit::new(a, Parity::Even).unwrap()),
            (1.45f64..60.0).prop_map(|a| DuffingOrbit::new(a, Parity::Odd).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn energy_is_conserved_along_orbit(orbit in arb_orbit(), t in -50.0f64..50.0) {
            let (x, v) = orbit.state_at(t);
            let h = energy(x, v, orbit.parity());
            prop_assert!((h - orbit.energy()).abs() <= 1e-9 * orbit.energy(), "H = {h}, H0 = {}", orbit.energy());
        }

        #[test]
        fn odd_orbits_flip_after_half_period(a in 1.45f64..60.0, t in -20.0f64..20.0) {
            let orbit = DuffingOrbit::new(a, Parity::Odd).unwrap();
            let p = orbit.period();
            let (x, v) = orbit.state_at(t);
            let (xs, vs) = orbit.state_at(t - p / 2.0);
            prop_assert!((xs + x).abs() < 1e-10);
            let (xf, vf) = orbit.state_at(t + p / 2.0);
            prop_assert!((xf + x).abs() < 1e-10);
            prop_assert!((vf + v).abs() < 1e-10 * (a * orbit.omega()).max(1.0));
            prop_assert!((vs + v).abs() < 1e-10 * (a * orbit.omega()).max(1.0));
        }

        #[test]
        fn even_orbits_repeat_after_one_period(a in 0.01f64..60.0, t in -20.0f64..20.0) {
            let orbit = DuffingOrbit::new(a, Parity::Even).unwrap();
            let (x, _) = orbit.state_at(t);
            let (xp, _) = orbit.state_at(t - orbit.period());
            prop_assert!((xp - x).abs() < 1e-10);
        }
    }
}
