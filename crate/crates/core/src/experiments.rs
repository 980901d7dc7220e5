//! Numerical stability experiments around the lifted orbits.
//!
//! Distances to an orbit are set distances in the `(x, ẋ)` plane: the
//! Euclidean distance from a state to the closest point of the closed curve,
//! minimized over the orbit's phase.

use std::f64::consts::PI;

use serde::Serialize;

use crate::amplitude::solve_amplitude;
use crate::dde::{integrate, HistoryFunction, SolverConfig, Trajectory, DEFAULT_MAX_STEP};
use crate::duffing::{DuffingOrbit, OrbitSpec, Parity};
use crate::error::{Error, Result};

const PHASE_GRID: usize = 256;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Closest point of an orbit to a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMatch {
    /// Time along the orbit, in `[0, p)`.
    pub phase: f64,
    pub distance: f64,
}

/// Phase-minimized distance from `state` to the closed orbit: a 256-point
/// grid over one period, golden-section refinement around the best grid
/// point, then a few Newton steps on the orthogonality condition
/// `(X(s) - state) · X'(s) = 0` so that distances down to rounding level are
/// resolved.
pub fn closest_point(state: (f64, f64), orbit: &DuffingOrbit) -> PhaseMatch {
    let p = orbit.period();
    let dist2 = |s: f64| {
        let (x, v) = orbit.state_at(s);
        let (dx, dv) = (x - state.0, v - state.1);
        dx * dx + dv * dv
    };

    let ds = p / PHASE_GRID as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..PHASE_GRID {
        let d = dist2(i as f64 * ds);
        if d < best {
            best = d;
            best_i = i;
        }
    }

    let (mut a, mut b) = ((best_i as f64 - 1.0) * ds, (best_i as f64 + 1.0) * ds);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (dist2(c), dist2(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = dist2(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = dist2(d);
        }
    }
    let (mut s, mut f) = if fc < fd { (c, fc) } else { (d, fd) };
    if best < f {
        s = best_i as f64 * ds;
        f = best;
    }

    let sign = orbit.parity().sign();
    for _ in 0..4 {
        let (x, v) = orbit.state_at(s);
        let acc = orbit.acceleration(x);
        let jerk = -(sign + 3.0 * x * x) * v;
        let (rx, rv) = (x - state.0, v - state.1);
        let g = rx * v + rv * acc;
        let dg = v * v + acc * acc + rx * acc + rv * jerk;
        if !(dg > 0.0) {
            break;
        }
        let candidate = s - g / dg;
        let fnew = dist2(candidate);
        if fnew < f {
            s = candidate;
            f = fnew;
        } else {
            break;
        }
    }

    PhaseMatch { phase: s.rem_euclid(p), distance: f.sqrt() }
}

/// Phase-minimized `(x, ẋ)` distance from `state` to the lifted orbit.
pub fn orbit_distance(state: (f64, f64), orbit: &OrbitSpec) -> f64 {
    closest_point(state, orbit.orbit()).distance
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ConvergedTo,
    EscapedFrom,
    Undecided,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::ConvergedTo => "converged_to",
            Outcome::EscapedFrom => "escaped_from",
            Outcome::Undecided => "undecided",
        })
    }
}

/// Thresholds and sampling for the probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ProbeConfig {
    pub max_step: f64,
    /// Final distance below which a run counts as converged.
    pub conv_tol: f64,
    /// Allowed gap between the tail amplitude and `A_n` for convergence.
    pub amp_tol: f64,
    /// Largest initial distance for a run to count as starting on an orbit.
    pub seed_tol: f64,
    /// Growth of the distance, relative to the initial one, that counts as escape.
    pub escape_factor: f64,
    /// Spacing of distance samples as a fraction of the delay.
    pub samples_per_delay: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            max_step: DEFAULT_MAX_STEP,
            conv_tol: 1e-2,
            amp_tol: 1e-3,
            seed_tol: 0.5,
            escape_factor: 10.0,
            samples_per_delay: 8,
        }
    }
}

/// Classification of one simulation relative to a lifted orbit `x_n`.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub target_n: u32,
    pub target_amplitude: f64,
    /// Tail amplitude over the last `2T`.
    pub final_amplitude: f64,
    /// Largest distance of the history segment `[-T, 0]`.
    pub initial_distance: f64,
    /// Largest distance over the last `2T`.
    pub final_distance: f64,
    pub max_distance: f64,
    /// First sample time at which the distance reached `escape_factor` times
    /// its initial value.
    pub escape_time: Option<f64>,
    pub distance_series: Vec<(f64, f64)>,
    pub diagnostic: Option<String>,
}

/// Flat JSON record of a probe: `{T, n, target_n, initial_A, outcome,
/// final_amplitude, eta, fit_residual}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    #[serde(rename = "T")]
    pub delay: f64,
    pub n: u32,
    pub target_n: u32,
    #[serde(rename = "initial_A")]
    pub initial_amplitude: f64,
    pub outcome: Outcome,
    pub final_amplitude: f64,
    pub final_distance: f64,
    pub eta: Option<f64>,
    pub fit_residual: Option<f64>,
}

impl Verdict {
    pub fn record(&self, delay: f64, n: u32, initial_amplitude: f64) -> ProbeRecord {
        ProbeRecord {
            delay,
            n,
            target_n: self.target_n,
            initial_amplitude,
            outcome: self.outcome,
            final_amplitude: self.final_amplitude,
            final_distance: self.final_distance,
            eta: None,
            fit_residual: None,
        }
    }
}

fn distance_series(traj: &Trajectory, orbit: &OrbitSpec, spacing: f64) -> Result<Vec<(f64, f64)>> {
    let t_end = traj.t_end();
    let count = (t_end / spacing).floor() as usize;
    let mut out = Vec::with_capacity(count + 2);
    for k in 0..=count {
        let t = k as f64 * spacing;
        out.push((t, orbit_distance(traj.state_at(t)?, orbit)));
    }
    if out.last().is_none_or(|&(t, _)| t < t_end) {
        out.push((t_end, orbit_distance(traj.state_at(t_end)?, orbit)));
    }
    Ok(out)
}

fn classify(traj: &Trajectory, target: &OrbitSpec, cfg: &ProbeConfig) -> Result<Verdict> {
    let delay = target.delay();
    let series = distance_series(traj, target, delay / cfg.samples_per_delay.max(1) as f64)?;
    let t_end = traj.t_end();
    let window = 2.0 * delay;
    let spacing = delay / cfg.samples_per_delay.max(1) as f64;
    let initial_distance = (0..=cfg.samples_per_delay.max(1))
        .map(|k| orbit_distance(traj.history().state_at(-(k as f64) * spacing), target))
        .fold(0.0, f64::max);
    let final_distance = series.iter().filter(|(t, _)| *t >= t_end - window).map(|&(_, d)| d).fold(0.0, f64::max);
    let max_distance = series.iter().map(|&(_, d)| d).fold(0.0, f64::max);
    let escape_threshold = cfg.escape_factor * initial_distance;
    let escape_time = series.iter().find(|&&(_, d)| d >= escape_threshold && d > 0.0).map(|&(t, _)| t);
    let final_amplitude = if window < t_end { traj.tail_amplitude(window)? } else { f64::NAN };

    let converged = final_distance <= cfg.conv_tol && (final_amplitude - target.amplitude()).abs() <= cfg.amp_tol;
    let escaped = initial_distance <= cfg.seed_tol && escape_time.is_some();
    let outcome = if converged {
        Outcome::ConvergedTo
    } else if escaped {
        Outcome::EscapedFrom
    } else {
        Outcome::Undecided
    };
    Ok(Verdict {
        outcome,
        target_n: target.n(),
        target_amplitude: target.amplitude(),
        final_amplitude,
        initial_distance,
        final_distance,
        max_distance,
        escape_time,
        distance_series: series,
        diagnostic: None,
    })
}

fn diverged_verdict(target: &OrbitSpec, t_last: f64) -> Verdict {
    Verdict {
        outcome: Outcome::EscapedFrom,
        target_n: target.n(),
        target_amplitude: target.amplitude(),
        final_amplitude: f64::INFINITY,
        initial_distance: f64::NAN,
        final_distance: f64::INFINITY,
        max_distance: f64::INFINITY,
        escape_time: Some(t_last),
        distance_series: Vec::new(),
        diagnostic: Some(format!("integration diverged after t = {t_last}")),
    }
}

fn run(delay: f64, history: HistoryFunction, t_end: f64, cfg: &ProbeConfig) -> Result<std::result::Result<Trajectory, f64>> {
    match integrate(delay, history, SolverConfig::new(t_end).with_max_step(cfg.max_step.min(delay))) {
        Ok(traj) => Ok(Ok(traj)),
        Err(Error::Diverged { t_last, .. }) => Ok(Err(t_last)),
        Err(e) => Err(e),
    }
}

fn check_window(delay: f64, t_end: f64) -> Result<()> {
    if !(t_end > 2.0 * delay) {
        return Err(Error::domain(format!("t_end = {t_end} must exceed the 2T = {} tail window", 2.0 * delay)));
    }
    Ok(())
}

/// Integrates from the odd-parity elliptic history with amplitude
/// `initial_amplitude` and classifies the outcome against `x_{target_n}`.
pub fn convergence_probe(delay: f64, initial_amplitude: f64, target_n: u32, t_end: f64) -> Result<Verdict> {
    convergence_probe_with(delay, initial_amplitude, target_n, t_end, &ProbeConfig::default())
}

pub fn convergence_probe_with(
    delay: f64,
    initial_amplitude: f64,
    target_n: u32,
    t_end: f64,
    cfg: &ProbeConfig,
) -> Result<Verdict> {
    check_window(delay, t_end)?;
    let target = solve_amplitude(delay, target_n)?;
    let history = HistoryFunction::elliptic_cn(initial_amplitude, Parity::Odd)?;
    match run(delay, history, t_end, cfg)? {
        Ok(traj) => classify(&traj, &target, cfg),
        Err(t_last) => Ok(diverged_verdict(&target, t_last)),
    }
}

/// Departure from an unstable even orbit and arrival at an odd one.
#[derive(Debug, Clone, Serialize)]
pub struct HeteroclinicReport {
    pub initial_amplitude: f64,
    /// Verdict relative to `x_{near_n}`.
    pub departure: Verdict,
    /// Verdict relative to `x_{target_n}`.
    pub arrival: Verdict,
    /// First sample time at which the distance to `x_{near_n}` exceeds
    /// `conv_tol`; `None` if it never does before `t_end`.
    pub dwell_time: Option<f64>,
}

impl HeteroclinicReport {
    pub fn is_heteroclinic(&self) -> bool {
        self.departure.outcome == Outcome::EscapedFrom && self.arrival.outcome == Outcome::ConvergedTo
    }
}

/// Starts from the elliptic history of `x_{near_n}` with its amplitude
/// shifted by `offset` (parity of `near_n`), and reports escape from
/// `x_{near_n}` and convergence to `x_{target_n}`.
pub fn heteroclinic_probe(delay: f64, near_n: u32, offset: f64, target_n: u32, t_end: f64) -> Result<HeteroclinicReport> {
    heteroclinic_probe_with(delay, near_n, offset, target_n, t_end, &ProbeConfig::default())
}

pub fn heteroclinic_probe_with(
    delay: f64,
    near_n: u32,
    offset: f64,
    target_n: u32,
    t_end: f64,
    cfg: &ProbeConfig,
) -> Result<HeteroclinicReport> {
    if near_n % 2 != 0 {
        return Err(Error::domain(format!("heteroclinic probe needs an unstable (even) start orbit, got n = {near_n}")));
    }
    if target_n % 2 != 1 {
        return Err(Error::domain(format!("heteroclinic probe needs a stable (odd) target orbit, got n = {target_n}")));
    }
    check_window(delay, t_end)?;
    let near = solve_amplitude(delay, near_n)?;
    let target = solve_amplitude(delay, target_n)?;
    let initial_amplitude = near.amplitude() + offset;
    let history = HistoryFunction::elliptic_cn(initial_amplitude, near.parity())?;
    let (departure, arrival) = match run(delay, history, t_end, cfg)? {
        Ok(traj) => (classify(&traj, &near, cfg)?, classify(&traj, &target, cfg)?),
        Err(t_last) => (diverged_verdict(&near, t_last), diverged_verdict(&target, t_last)),
    };
    let dwell_time = match departure.distance_series.iter().find(|&&(_, d)| d > cfg.conv_tol) {
        Some(&(t, _)) => Some(t),
        None if departure.distance_series.is_empty() => departure.escape_time,
        None => None,
    };
    Ok(HeteroclinicReport { initial_amplitude, departure, arrival, dwell_time })
}

/// Growth rate of a small perturbation of `x_n`.
#[derive(Debug, Clone, Serialize)]
pub struct FloquetEstimate {
    pub n: u32,
    pub delay: f64,
    /// Fitted exponent (1/time); negative means decay.
    pub eta: f64,
    pub fit_interval: (f64, f64),
    /// RMS deviation of `ln d` from the fitted line.
    pub fit_residual: f64,
    pub fit_points: usize,
    /// Predicted sign of `eta`: `-1` for odd `n` (decay), `+1` for even `n` (growth).
    pub parity_sign_predicted: i8,
    /// Leading large-n magnitude `(2/3) T²`.
    pub asymptotic_magnitude: f64,
    /// Set when the distance neither left the noise floor nor decayed.
    pub undecided: bool,
    /// `(t, d)`: per-period maximum of the distance to `x_n`.
    pub envelope: Vec<(f64, f64)>,
}

impl FloquetEstimate {
    pub fn sign_matches_prediction(&self) -> bool {
        !self.undecided && self.eta.signum() as i8 == self.parity_sign_predicted
    }

    pub fn record(&self, amplitude: f64) -> ProbeRecord {
        let outcome = if self.undecided {
            Outcome::Undecided
        } else if self.eta < 0.0 {
            Outcome::ConvergedTo
        } else {
            Outcome::EscapedFrom
        };
        ProbeRecord {
            delay: self.delay,
            n: self.n,
            target_n: self.n,
            initial_amplitude: amplitude,
            outcome,
            final_amplitude: f64::NAN,
            final_distance: self.envelope.last().map_or(f64::NAN, |e| e.1),
            eta: Some(self.eta),
            fit_residual: Some(self.fit_residual),
        }
    }
}

/// Fitted distances must exceed the unperturbed run's distance by this factor.
pub const FLOOR_MARGIN: f64 = 10.0;

/// Maximum of the distance to `spec` over each minimal period, at the period midpoints.
fn period_envelope(traj: &Trajectory, spec: &OrbitSpec) -> Result<Vec<(f64, f64)>> {
    let period = spec.target_period();
    let sub = 16;
    let mut envelope = Vec::new();
    let mut start = 0.0;
    while start + period <= traj.t_end() {
        let mut worst = 0.0f64;
        for k in 0..sub {
            let t = start + period * k as f64 / sub as f64;
            worst = worst.max(orbit_distance(traj.state_at(t)?, spec));
        }
        envelope.push((start + 0.5 * period, worst));
        start += period;
    }
    Ok(envelope)
}

/// Distances inside this band are fitted: above it nonlinear terms matter,
/// below it the integration error dominates.
pub const FLOQUET_BAND: (f64, f64) = (1e-10, 1e-2);
/// Default relative amplitude perturbation.
pub const DEFAULT_PERTURBATION: f64 = 1e-6;

/// Estimates the leading Floquet exponent of `x_n` from the growth or decay
/// of an amplitude perturbation `A_n (1 + perturbation)` of the history.
///
/// The distance to `x_n` is reduced to its maximum over each minimal period
/// `2T/n`, which removes the periodic modulation of the Floquet mode, and
/// `ln d` is fitted by least squares where `d` lies in [`FLOQUET_BAND`].
/// The first two delay intervals are skipped as transient, and points are
/// kept only while they stay [`FLOOR_MARGIN`] above the distance of an
/// unperturbed run, which measures the integration error.
pub fn floquet_estimate(delay: f64, n: u32, perturbation: f64, t_end: f64) -> Result<FloquetEstimate> {
    floquet_estimate_with(delay, n, perturbation, t_end, DEFAULT_MAX_STEP)
}

pub fn floquet_estimate_with(delay: f64, n: u32, perturbation: f64, t_end: f64, max_step: f64) -> Result<FloquetEstimate> {
    if !(perturbation.is_finite() && perturbation != 0.0 && perturbation.abs() < 0.1) {
        return Err(Error::domain(format!("perturbation {perturbation} must be small and non-zero")));
    }
    if !(t_end >= 20.0 * delay) {
        return Err(Error::domain(format!("t_end = {t_end} must cover at least 20 delay intervals")));
    }
    let spec = solve_amplitude(delay, n)?;
    let config = SolverConfig::new(t_end).with_max_step(max_step.min(delay));
    let run = |scale: f64| -> Result<Vec<(f64, f64)>> {
        let history = HistoryFunction::elliptic_cn(spec.amplitude() * scale, spec.parity())?;
        let traj = match integrate(delay, history, config) {
            Ok(traj) => traj,
            // A blow-up is escape; the envelope up to that time still fits.
            Err(Error::Diverged { partial, .. }) => *partial,
            Err(e) => return Err(e),
        };
        period_envelope(&traj, &spec)
    };
    let (envelope, floor) = std::thread::scope(|scope| {
        let unperturbed = scope.spawn(|| run(1.0));
        let perturbed = run(1.0 + perturbation);
        (perturbed, unperturbed.join().expect("floor run panicked"))
    });
    let (envelope, floor) = (envelope?, floor?);

    let skip = 2.0 * delay;
    let (lo, hi) = FLOQUET_BAND;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (k, &(t, d)) in envelope.iter().enumerate().filter(|(_, (t, _))| *t >= skip) {
        let noise = floor.get(k).map_or(0.0, |f| f.1);
        let usable = d >= lo && d <= hi && d >= FLOOR_MARGIN * noise;
        if usable {
            pts.push((t, d.ln()));
        } else if !pts.is_empty() {
            // Saturated or sunk into the integration noise: the rest is not linear decay or growth.
            break;
        }
    }

    let sign = if n % 2 == 1 { -1 } else { 1 };
    let asymptotic_magnitude = 2.0 / 3.0 * delay * delay;
    if pts.len() < 3 {
        return Ok(FloquetEstimate {
            n,
            delay,
            eta: 0.0,
            fit_interval: (f64::NAN, f64::NAN),
            fit_residual: f64::INFINITY,
            fit_points: pts.len(),
            parity_sign_predicted: sign,
            asymptotic_magnitude,
            undecided: true,
            envelope,
        });
    }
    let (slope, intercept, rms) = least_squares(&pts);
    Ok(FloquetEstimate {
        n,
        delay,
        eta: slope,
        fit_interval: (pts[0].0, pts[pts.len() - 1].0),
        fit_residual: rms,
        fit_points: pts.len(),
        parity_sign_predicted: sign,
        asymptotic_magnitude,
        undecided: !(slope.abs() * (pts[pts.len() - 1].0 - pts[0].0) >= std::f64::consts::LN_2 && intercept.is_finite()),
        envelope,
    })
}

/// Ordinary least squares `y = intercept + slope t`; returns the RMS residual too.
fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Whether `T² < (3/2)π²`, the delay range in which large odd orbits are
/// asymptotically stable.
pub fn stability_region(delay: f64) -> bool {
    delay > 0.0 && delay * delay < 1.5 * PI * PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_zero_on_orbit() {
        let spec = solve_amplitude(0.5, 1).unwrap();
        assert!(orbit_distance((spec.amplitude(), 0.0), &spec) < 1e-12);
        for &t in &[0.1, 0.37, 0.9] {
            let d = orbit_distance(spec.orbit().state_at(t), &spec);
            assert!(d < 1e-9, "t = {t}: {d}");
        }
    }

    #[test]
    fn origin_is_off_odd_orbit() {
        let spec = solve_amplitude(0.5, 1).unwrap();
        let d = orbit_distance((0.0, 0.0), &spec);
        // Brute-force minimum over a dense grid.
        let brute = (0..200_000)
            .map(|i| {
                let (x, v) = spec.orbit().state_at(spec.period() * i as f64 / 200_000.0);
                (x * x + v * v).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(d > 0.0);
        assert!((d - brute).abs() < 1e-6 * brute, "{d} vs {brute}");
    }

    #[test]
    fn radial_offset_matches_dense_grid() {
        let spec = solve_amplitude(0.5, 1).unwrap();
        for &delta in &[1e-2, 1e-4, 1e-7, 1e-10] {
            let d = orbit_distance((spec.amplitude() + delta, 0.0), &spec);
            // At the turning point the orbit's tangent is vertical, so the
            // distance is δ up to curvature terms of order δ².
            assert!((d - delta).abs() <= 1e-3 * delta + 1e-14, "δ = {delta}: {d}");
        }
    }

    #[test]
    fn off_orbit_distances_match_brute_force() {
        let spec = solve_amplitude(3.0, 2).unwrap();
        for &(x, v) in &[(1.0, 1.0), (-2.5, 0.3), (0.2, -4.0)] {
            let d = orbit_distance((x, v), &spec);
            let brute = (0..100_000)
                .map(|i| {
                    let (ox, ov) = spec.orbit().state_at(spec.period() * i as f64 / 100_000.0);
                    ((ox - x).powi(2) + (ov - v).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(d <= brute + 1e-12 && brute - d < 1e-6, "({x}, {v}): {d} vs {brute}");
        }
    }

    #[test]
    fn stability_region_boundary() {
        assert!(stability_region(0.5));
        assert!(!stability_region(PI * 1.5f64.sqrt() * (1.0 + 1e-12)));
        assert!(stability_region(PI * 1.5f64.sqrt() * (1.0 - 1e-12)));
        assert!(!stability_region(4.0));
        assert!(!stability_region(0.0));
    }

    #[test]
    fn heteroclinic_preconditions() {
        assert!(matches!(heteroclinic_probe(0.5, 1, 0.0, 1, 10.0), Err(Error::Domain(_))));
        assert!(matches!(heteroclinic_probe(0.5, 2, 0.0, 4, 10.0), Err(Error::Domain(_))));
    }

    #[test]
    fn on_orbit_start_converges_trivially() {
        let spec = solve_amplitude(0.5, 1).unwrap();
        let v = convergence_probe(0.5, spec.amplitude(), 1, 10.0).unwrap();
        assert_eq!(v.outcome, Outcome::ConvergedTo);
        assert!(v.max_distance < 1e-5, "{}", v.max_distance);
    }

    #[test]
    fn probe_record_schema() {
        let spec = solve_amplitude(0.5, 1).unwrap();
        let v = convergence_probe(0.5, spec.amplitude(), 1, 2.0).unwrap();
        let json = serde_json::to_value(v.record(0.5, 1, spec.amplitude())).unwrap();
        for key in ["T", "n", "target_n", "initial_A", "outcome", "final_amplitude", "eta", "fit_residual"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["outcome"], "converged_to");
        assert_eq!(json["target_n"], 1);
    }

    #[test]
    fn least_squares_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let (s, c, r) = least_squares(&pts);
        assert!((s + 0.5).abs() < 1e-14 && (c - 2.0).abs() < 1e-13 && r < 1e-13);
    }

    #[test]
    fn floquet_preconditions() {
        assert!(floquet_estimate(0.5, 1, 0.0, 20.0).is_err());
        assert!(floquet_estimate(0.5, 1, 1e-6, 5.0).is_err());
    }

    #[test]
    fn even_orbit_perturbation_grows() {
        let f = floquet_estimate(0.5, 2, DEFAULT_PERTURBATION, 20.0).unwrap();
        assert!(!f.undecided);
        assert!(f.eta > 0.0 && f.sign_matches_prediction(), "{}", f.eta);
        assert!(f.fit_residual < 0.1);
        assert_eq!(f.parity_sign_predicted, 1);
    }

    #[test]
    fn diverged_run_is_escape() {
        let spec = solve_amplitude(0.5, 1).unwrap();
        let v = diverged_verdict(&spec, 3.25);
        assert_eq!(v.outcome, Outcome::EscapedFrom);
        assert_eq!(v.escape_time, Some(3.25));
        assert!(v.diagnostic.unwrap().contains("diverged"));
    }

    #[test]
    fn escape_needs_a_close_start() {
        // Far start: distance can grow but the run was never on the orbit.
        let v = convergence_probe(0.5, 30.0, 1, 3.0).unwrap();
        assert!(v.initial_distance > ProbeConfig::default().seed_tol);
        assert_ne!(v.outcome, Outcome::EscapedFrom);
    }
}
