//! Method-of-steps integration of `x''(t) + x(t - T) + x(t)^3 = 0`.
//!
//! The second-order equation is advanced as the first-order system
//! `x' = v`, `v' = -x(t - T) - x(t)^3` with the Bogacki-Shampine 3(2) pair
//! (FSAL, local extrapolation). Delayed values come from the initial history
//! for `t - T <= 0` and from a cubic Hermite interpolant over the accepted
//! mesh otherwise. Steps never exceed the delay, so the delayed argument of
//! every stage lies in already-computed data.

use std::io::Write;

use serde::Serialize;

use crate::duffing::{DuffingOrbit, Parity};
use crate::error::{Error, Result};

/// Largest step used for the published simulations.
pub const DEFAULT_MAX_STEP: f64 = 1e-4;
pub const DEFAULT_ATOL: f64 = 1e-12;
pub const DEFAULT_RTOL: f64 = 1e-12;
/// Mesh points are forced onto `kT` for `k = 1..=BREAKPOINT_COUNT`, where
/// the solution's derivatives jump.
pub const BREAKPOINT_COUNT: u32 = 10;

/// One sample `(t, x, ẋ)` of a tabulated history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct HistorySample {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
}

/// Initial data on `[-T, 0]`.
#[derive(Debug, Clone)]
pub enum HistoryFunction {
    /// `(A cn(ωt), -Aω sn(ωt) dn(ωt))` with `m`, `ω` from the amplitude and parity.
    EllipticCn(DuffingOrbit),
    /// Samples with strictly increasing `t`; `x` is Hermite-interpolated using
    /// `ẋ` as its slope, `ẋ` is interpolated linearly.
    Tabulated(Vec<HistorySample>),
    Constant { x: f64, xdot: f64 },
}

impl HistoryFunction {
    pub fn elliptic_cn(amplitude: f64, parity: Parity) -> Result<Self> {
        Ok(HistoryFunction::EllipticCn(DuffingOrbit::new(amplitude, parity)?))
    }

    pub fn constant(x: f64, xdot: f64) -> Self {
        HistoryFunction::Constant { x, xdot }
    }

    pub fn tabulated(samples: Vec<HistorySample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Config("tabulated history needs at least two samples".into()));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Config("tabulated history times must be strictly increasing".into()));
        }
        if samples.iter().any(|s| !(s.t.is_finite() && s.x.is_finite() && s.xdot.is_finite())) {
            return Err(Error::Config("tabulated history contains non-finite values".into()));
        }
        Ok(HistoryFunction::Tabulated(samples))
    }

    fn check_covers(&self, delay: f64) -> Result<()> {
        if let HistoryFunction::Tabulated(s) = self {
            let (first, last) = (s[0].t, s[s.len() - 1].t);
            if first > -delay || last < 0.0 {
                return Err(Error::Config(format!(
                    "tabulated history spans [{first}, {last}] but must cover [-{delay}, 0]"
                )));
            }
        }
        Ok(())
    }

    /// `(x(t), ẋ(t))` for `t` in `[-T, 0]`.
    pub fn state_at(&self, t: f64) -> (f64, f64) {
        match self {
            HistoryFunction::EllipticCn(orbit) => orbit.state_at(t),
            HistoryFunction::Constant { x, xdot } => (*x, *xdot),
            HistoryFunction::Tabulated(samples) => {
                let i = samples.partition_point(|s| s.t <= t).clamp(1, samples.len() - 1);
                let (a, b) = (&samples[i - 1], &samples[i]);
                let h = b.t - a.t;
                let theta = ((t - a.t) / h).clamp(0.0, 1.0);
                let x = hermite(theta, h, a.x, a.xdot, b.x, b.xdot);
                let xdot = a.xdot + theta * (b.xdot - a.xdot);
                (x, xdot)
            }
        }
    }

    fn x_at(&self, t: f64) -> f64 {
        self.state_at(t).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Upper bound on every step; must not exceed the delay.
    pub max_step: f64,
    pub t_end: f64,
    pub atol: f64,
    pub rtol: f64,
}

impl SolverConfig {
    pub fn new(t_end: f64) -> Self {
        SolverConfig { max_step: DEFAULT_MAX_STEP, t_end, atol: DEFAULT_ATOL, rtol: DEFAULT_RTOL }
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn with_tolerances(mut self, atol: f64, rtol: f64) -> Self {
        self.atol = atol;
        self.rtol = rtol;
        self
    }

    fn validate(&self, delay: f64) -> Result<()> {
        if !(delay.is_finite() && delay > 0.0) {
            return Err(Error::Config(format!("delay T = {delay} must be positive")));
        }
        if !(self.max_step.is_finite() && self.max_step > 0.0) {
            return Err(Error::Config(format!("max_step = {} must be positive", self.max_step)));
        }
        if self.max_step > delay {
            return Err(Error::Config(format!(
                "max_step = {} exceeds the delay T = {delay}; delayed stages would need unknown data",
                self.max_step
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end = {} must be non-negative", self.t_end)));
        }
        if !(self.atol >= 0.0 && self.rtol >= 0.0 && self.atol + self.rtol > 0.0) {
            return Err(Error::Config("tolerances must be non-negative and not both zero".into()));
        }
        Ok(())
    }
}

/// An accepted mesh point. `xddot` is the right-hand side at `t`, the slope
/// of `ẋ` used by the Hermite interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshPoint {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    pub xddot: f64,
}

/// Dense record of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    mesh: Vec<MeshPoint>,
    delay: f64,
    history: HistoryFunction,
    config: SolverConfig,
    rejected_steps: usize,
}

#[inline]
fn hermite(theta: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

#[inline]
fn interpolate(a: &MeshPoint, b: &MeshPoint, t: f64) -> (f64, f64) {
    let h = b.t - a.t;
    let theta = (t - a.t) / h;
    (hermite(theta, h, a.x, a.xdot, b.x, b.xdot), hermite(theta, h, a.xdot, a.xddot, b.xdot, b.xddot))
}

impl Trajectory {
    pub fn mesh(&self) -> &[MeshPoint] {
        &self.mesh
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn history(&self) -> &HistoryFunction {
        &self.history
    }

    /// Last accepted time; equals `config.t_end` unless integration diverged.
    pub fn t_end(&self) -> f64 {
        self.mesh[self.mesh.len() - 1].t
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected_steps
    }

    /// `(x, ẋ)` at any `t` in `[-T, t_end]`.
    pub fn state_at(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= -self.delay && t <= self.t_end()) {
            return Err(Error::Range(format!("t = {t} outside [{}, {}]", -self.delay, self.t_end())));
        }
        if t < 0.0 {
            return Ok(self.history.state_at(t));
        }
        let i = self.mesh.partition_point(|p| p.t < t);
        let p = &self.mesh[i];
        if p.t == t {
            return Ok((p.x, p.xdot));
        }
        Ok(interpolate(&self.mesh[i - 1], p, t))
    }

    /// `max |x(t)|` over `[t_end - window, t_end]`.
    ///
    /// Every mesh point in the window is inspected; around the largest one
    /// the interpolant is sampled more finely so the result does not depend
    /// on where the mesh falls relative to the peak.
    pub fn tail_amplitude(&self, window: f64) -> Result<f64> {
        let t_end = self.t_end();
        if !(window > 0.0 && window < t_end) {
            return Err(Error::Range(format!("window {window} must lie in (0, t_end = {t_end})")));
        }
        let start = t_end - window;
        let first = self.mesh.partition_point(|p| p.t < start);
        let mut best = self.state_at(start)?.0.abs();
        let mut best_idx = None;
        for (i, p) in self.mesh.iter().enumerate().skip(first) {
            if p.x.abs() > best {
                best = p.x.abs();
                best_idx = Some(i);
            }
        }
        if let Some(i) = best_idx {
            const SUB: usize = 32;
            let lo = i.saturating_sub(1).max(first.saturating_sub(1));
            let hi = (i + 1).min(self.mesh.len() - 1);
            for j in lo..hi {
                let (a, b) = (&self.mesh[j], &self.mesh[j + 1]);
                for k in 1..SUB {
                    let t = a.t + (b.t - a.t) * k as f64 / SUB as f64;
                    if t >= start {
                        best = best.max(interpolate(a, b, t).0.abs());
                    }
                }
            }
        }
        Ok(best)
    }

    /// Writes `t,x,xdot` rows for every `stride`-th accepted mesh point
    /// (always including the first), 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> std::io::Result<()> {
        write_csv_header(&mut out)?;
        let stride = stride.max(1);
        for p in self.mesh.iter().step_by(stride) {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", p.t, p.x, p.xdot)?;
        }
        Ok(())
    }
}

pub const CSV_HEADER: &str = "t,x,xdot";

pub fn write_csv_header<W: Write>(mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")
}

/// Looks up delayed positions, remembering the last mesh interval used.
/// Stage times move forward almost monotonically, so the cursor rarely
/// moves by more than one interval.
struct DelayedLookup {
    cursor: usize,
}

impl DelayedLookup {
    fn x_at(&mut self, mesh: &[MeshPoint], history: &HistoryFunction, s: f64) -> f64 {
        if s <= 0.0 {
            return history.x_at(s);
        }
        let last = mesh.len() - 1;
        debug_assert!(s <= mesh[last].t * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE);
        let mut i = self.cursor.min(last.saturating_sub(1));
        while i > 0 && mesh[i].t > s {
            i -= 1;
        }
        while i + 1 < last && mesh[i + 1].t < s {
            i += 1;
        }
        self.cursor = i;
        let (a, b) = (&mesh[i], &mesh[i + 1]);
        let h = b.t - a.t;
        hermite((s - a.t) / h, h, a.x, a.xdot, b.x, b.xdot)
    }
}

/// Integrates the delayed Duffing equation from `t = 0` to `config.t_end`.
pub fn integrate(delay: f64, history: HistoryFunction, config: SolverConfig) -> Result<Trajectory> {
    config.validate(delay)?;
    history.check_covers(delay)?;

    let (x0, v0) = history.state_at(0.0);
    let a0 = -history.x_at(-delay) - x0 * x0 * x0;
    let capacity = ((config.t_end / config.max_step) as usize).saturating_add(16).min(1 << 26);
    let mut mesh = Vec::with_capacity(capacity);
    mesh.push(MeshPoint { t: 0.0, x: x0, xdot: v0, xddot: a0 });

    let (completed, rejected_steps) = advance(delay, &history, &config, &mut mesh);
    let traj = Trajectory { mesh, delay, history, config, rejected_steps };
    if completed {
        Ok(traj)
    } else {
        Err(Error::Diverged { t_last: traj.t_end(), partial: Box::new(traj) })
    }
}

/// Runs the stepping loop. Returns whether `t_end` was reached and the
/// number of rejected steps.
fn advance(delay: f64, history: &HistoryFunction, config: &SolverConfig, mesh: &mut Vec<MeshPoint>) -> (bool, usize) {
    let breakpoints: Vec<f64> = (1..=BREAKPOINT_COUNT)
        .map(|k| k as f64 * delay)
        .filter(|&b| b < config.t_end)
        .chain(std::iter::once(config.t_end))
        .collect();
    let mut next_bp = 0;
    let mut lookup = DelayedLookup { cursor: 0 };
    let mut h = config.max_step;
    let mut rejected = 0usize;

    while next_bp < breakpoints.len() {
        let cur = mesh[mesh.len() - 1];
        let bp = breakpoints[next_bp];
        let mut lands = false;
        let mut step = h.min(config.max_step);
        if cur.t + step >= bp - 1e-12 * bp.max(1.0) {
            step = bp - cur.t;
            lands = true;
        }
        if step <= 1e-14 * cur.t.max(1.0) {
            if lands {
                next_bp += 1;
                continue;
            }
            return (false, rejected);
        }

        let t = cur.t;
        let (x, v) = (cur.x, cur.xdot);
        // k1 is the FSAL derivative stored with the mesh point.
        let (k1x, k1v) = (v, cur.xddot);

        let x2 = x + 0.5 * step * k1x;
        let v2 = v + 0.5 * step * k1v;
        let d2 = lookup.x_at(mesh, history, t + 0.5 * step - delay);
        let (k2x, k2v) = (v2, -d2 - x2 * x2 * x2);

        let x3 = x + 0.75 * step * k2x;
        let v3 = v + 0.75 * step * k2v;
        let d3 = lookup.x_at(mesh, history, t + 0.75 * step - delay);
        let (k3x, k3v) = (v3, -d3 - x3 * x3 * x3);

        let xn = x + step * (2.0 / 9.0 * k1x + 1.0 / 3.0 * k2x + 4.0 / 9.0 * k3x);
        let vn = v + step * (2.0 / 9.0 * k1v + 1.0 / 3.0 * k2v + 4.0 / 9.0 * k3v);
        let t_new = if lands { bp } else { t + step };
        let d4 = lookup.x_at(mesh, history, t_new - delay);
        let (k4x, k4v) = (vn, -d4 - xn * xn * xn);

        // Difference between the third- and embedded second-order solutions.
        let ex = step * (-5.0 / 72.0 * k1x + 1.0 / 12.0 * k2x + 1.0 / 9.0 * k3x - 1.0 / 8.0 * k4x);
        let ev = step * (-5.0 / 72.0 * k1v + 1.0 / 12.0 * k2v + 1.0 / 9.0 * k3v - 1.0 / 8.0 * k4v);
        let sx = config.atol + config.rtol * x.abs().max(xn.abs());
        let sv = config.atol + config.rtol * v.abs().max(vn.abs());
        let err = (ex / sx).abs().max((ev / sv).abs());

        if !(xn.is_finite() && vn.is_finite() && k4v.is_finite() && err.is_finite()) {
            return (false, rejected);
        }

        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            mesh.push(MeshPoint { t: t_new, x: xn, xdot: vn, xddot: k4v });
            if lands {
                next_bp += 1;
            }
            h = (step * factor).min(config.max_step);
        } else {
            rejected += 1;
            h = step * factor;
        }
    }
    (true, rejected)
}

/// `max |x(t)|` over the trailing window of a trajectory.
pub fn tail_amplitude(traj: &Trajectory, window: f64) -> Result<f64> {
    traj.tail_amplitude(window)
}

/// `(x, ẋ)` of a trajectory at `t`.
pub fn state_at(traj: &Trajectory, t: f64) -> Result<(f64, f64)> {
    traj.state_at(t)
}
