//! Peierls-phase drive `f(t) = exp(i a (cos(ω(t-t_p)) - b) exp(-(t-t_p)²/(2σ_p²)))`.

use serde::{Deserialize, Serialize};

use crate::C64;

/// Value of the drive and the derivatives of its real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseValue {
    pub f: C64,
    pub c: f64,
    pub s: f64,
    pub dc: f64,
    pub ds: f64,
}

/// A scalar time dependence `c(t) + i s(t)` multiplying the hopping terms.
///
/// Implemented by [`PulseParams`]; tests substitute simple polynomial drives.
pub trait Drive {
    fn eval(&self, t: f64) -> PulseValue;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub a: f64,
    pub omega: f64,
    pub sigma_p: f64,
    pub t_p: f64,
}

impl PulseParams {
    pub fn new(a: f64, omega: f64, sigma_p: f64, t_p: f64) -> Self {
        PulseParams {
            a,
            omega,
            sigma_p,
            t_p,
        }
    }

    /// Drive used for the 2x4 ladder: t_p = 6, a = 0.2, σ_p = 2, ω = 3.5.
    pub fn ladder_default() -> Self {
        PulseParams::new(0.2, 3.5, 2.0, 6.0)
    }

    /// Drive used for the 4x3 lattice: t_p = 7.5, σ_p = 2, a = 0.8, ω = 11.
    pub fn lattice_4x3_default() -> Self {
        PulseParams::new(0.8, 11.0, 2.0, 7.5)
    }

    /// Zero amplitude: `f ≡ 1`, the Hamiltonian is time independent.
    pub fn off() -> Self {
        PulseParams::new(0.0, 1.0, 1.0, 0.0)
    }

    /// Offset making the phase vanish at `t = 0`.
    pub fn b(&self) -> f64 {
        (self.omega * self.t_p).cos()
    }

    /// Phase `φ(t)` with `f = e^{iφ}`, and `φ'(t)`.
    pub fn phase(&self, t: f64) -> (f64, f64) {
        if self.a == 0.0 {
            return (0.0, 0.0);
        }
        let x = t - self.t_p;
        let s2 = self.sigma_p * self.sigma_p;
        let env = (-x * x / (2.0 * s2)).exp();
        let (sin_w, cos_w) = (self.omega * x).sin_cos();
        let osc = cos_w - self.b();
        let phi = self.a * osc * env;
        let dphi = self.a * env * (-self.omega * sin_w - osc * x / s2);
        (phi, dphi)
    }
}

impl Drive for PulseParams {
    fn eval(&self, t: f64) -> PulseValue {
        let (phi, dphi) = self.phase(t);
        let (s, c) = phi.sin_cos();
        PulseValue {
            f: C64::new(c, s),
            c,
            s,
            dc: -s * dphi,
            ds: c * dphi,
        }
    }
}
