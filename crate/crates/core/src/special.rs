//! Complete elliptic integral of the first kind and the Jacobi elliptic
//! functions cn, sn, dn.
//!
//! Both are built on the arithmetic-geometric mean of `1` and `sqrt(1 - m)`.
//! `m` is always the *parameter* (`m = k^2`), never the modulus `k`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// `Γ(1/4)^2`.
pub const GAMMA_QUARTER_SQUARED: f64 = 13.145_047_206_596_874;

/// Upper bound on AGM levels. The iteration converges quadratically; for
/// `m` one ulp below 1 it needs 7 levels.
const MAX_AGM_LEVELS: usize = 16;

/// Elliptic parameter `m` with `0 <= m < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize)]
#[serde(transparent)]
pub struct EllipticModulus(f64);

impl EllipticModulus {
    pub fn new(m: f64) -> Result<Self> {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::domain(format!("elliptic parameter m = {m} must lie in [0, 1)")));
        }
        if m >= 1.0 {
            return Err(Error::domain(format!(
                "elliptic parameter m = {m} is on or beyond the separatrix (m >= 1), K(m) diverges"
            )));
        }
        Ok(EllipticModulus(m))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Complementary parameter `1 - m`.
    #[inline]
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

/// Runs the AGM on `(1, sqrt(1 - m))` and keeps every level, which is what
/// the descending Landen recursion needs.
#[derive(Debug, Clone)]
struct AgmLadder {
    a: [f64; MAX_AGM_LEVELS + 1],
    c: [f64; MAX_AGM_LEVELS + 1],
    levels: usize,
}

impl AgmLadder {
    fn new(m: EllipticModulus) -> Self {
        let mut a = [0.0; MAX_AGM_LEVELS + 1];
        let mut c = [0.0; MAX_AGM_LEVELS + 1];
        a[0] = 1.0;
        c[0] = m.value().sqrt();
        let mut b = m.complement().sqrt();
        let mut levels = 0;
        while levels < MAX_AGM_LEVELS && (a[levels] - b).abs() > f64::EPSILON * a[levels] {
            let (ai, bi) = (a[levels], b);
            levels += 1;
            a[levels] = 0.5 * (ai + bi);
            c[levels] = 0.5 * (ai - bi);
            b = (ai * bi).sqrt();
        }
        AgmLadder { a, c, levels }
    }

    fn mean(&self) -> f64 {
        self.a[self.levels]
    }
}

/// Complete elliptic integral of the first kind,
/// `K(m) = ∫₀^{π/2} dθ / sqrt(1 - m sin²θ) = π / (2 AGM(1, sqrt(1 - m)))`.
pub fn elliptic_k(m: EllipticModulus) -> f64 {
    PI / (2.0 * AgmLadder::new(m).mean())
}

/// Values of the three Jacobi functions at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiValues {
    pub cn: f64,
    pub sn: f64,
    pub dn: f64,
}

/// Jacobi elliptic functions for a fixed parameter.
///
/// Construction runs the AGM once; each evaluation then reduces the argument
/// modulo the real period `4K` and runs the descending Landen recursion
/// (Abramowitz & Stegun 16.4). Periodic orbits evaluate millions of points at
/// the same `m`, so the ladder is cached here.
#[derive(Debug, Clone)]
pub struct Jacobi {
    m: EllipticModulus,
    quarter_period: f64,
    ladder: AgmLadder,
}

impl Jacobi {
    pub fn new(m: EllipticModulus) -> Self {
        let ladder = AgmLadder::new(m);
        let quarter_period = PI / (2.0 * ladder.mean());
        Jacobi { m, quarter_period, ladder }
    }

    pub fn modulus(&self) -> EllipticModulus {
        self.m
    }

    /// `K(m)`.
    pub fn quarter_period(&self) -> f64 {
        self.quarter_period
    }

    /// Evaluates `(cn, sn, dn)` at `u`.
    pub fn eval(&self, u: f64) -> JacobiValues {
        let period = 4.0 * self.quarter_period;
        // Reduce to [-2K, 2K]; cn and dn are even, sn is odd, so no sign
        // bookkeeping is needed beyond the reduced argument itself.
        let u = u - period * (u / period).round();

        let lad = &self.ladder;
        let n = lad.levels;
        if n == 0 {
            // m = 0 (or small enough that the ladder is trivial): circular case.
            let (s, c) = u.sin_cos();
            return JacobiValues { cn: c, sn: s, dn: (1.0 - self.m.value() * s * s).sqrt() };
        }

        let mut phi = (1u64 << n) as f64 * lad.a[n] * u;
        for i in (1..=n).rev() {
            let ratio = lad.c[i] / lad.a[i];
            phi = 0.5 * (phi + (ratio * phi.sin()).asin());
        }
        let (sn, cn) = phi.sin_cos();
        // dn² = (1 - m) + m cn² avoids cancellation near sn = ±1.
        let dn = (self.m.complement() + self.m.value() * cn * cn).sqrt();
        JacobiValues { cn, sn, dn }
    }
}

/// One-shot evaluation of `(cn, sn, dn)(u | m)`.
pub fn jacobi_cn_sn_dn(u: f64, m: EllipticModulus) -> JacobiValues {
    Jacobi::new(m).eval(u)
}

/// `γ = Γ(1/4)^2`, the constant in the large-amplitude period series.
pub fn gamma_quarter_squared() -> f64 {
    GAMMA_QUARTER_SQUARED
}

/// `π/2`, the value of `K(0)`.
pub const K_AT_ZERO: f64 = FRAC_PI_2;
