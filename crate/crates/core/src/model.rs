//! Dimensionless units, the quartic potential family and the dephasing model.
//!
//! Positions are in units of the ground-state spread `x0 = sqrt(hbar / 2 m Omega)`,
//! momenta in `p0 = hbar / 2 x0` and times in `1 / Omega`, where `Omega` is the
//! preparation-trap frequency. With `hbar = 2 m Omega x0^2` the natural energy unit of
//! [`potential_value`] is `m Omega^2 x0^2 = hbar Omega / 2`; in that unit the classical
//! energy reads `p^2 / 2 + V` and Hamilton's equations carry no extra factors.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// omega / Omega
    pub omega_ratio: f64,
    /// d / x0
    pub d_bar: f64,
    /// l / x0
    pub l_bar: f64,
    pub alpha_bound: f64,
    /// Omega * t_gas
    pub t_gas_bar: f64,
}

impl SystemParams {
    /// Values used for the optimization studies: omega/Omega = 1e-3, d = l = 1e6 x0,
    /// alpha_b = 5 and t_gas Omega / 2 pi = 1500.
    pub fn wide() -> Self {
        Self {
            omega_ratio: 1e-3,
            d_bar: 1e6,
            l_bar: 1e6,
            alpha_bound: 5.0,
            t_gas_bar: 2.0 * PI * 1500.0,
        }
    }

    /// Reduced profile small enough for the density-matrix simulator.
    pub fn desk() -> Self {
        Self {
            omega_ratio: 0.05,
            d_bar: 64.0,
            l_bar: 64.0,
            alpha_bound: 5.0,
            t_gas_bar: 2.0 * PI * 1500.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_ratio", self.omega_ratio),
            ("d_bar", self.d_bar),
            ("l_bar", self.l_bar),
            ("alpha_bound", self.alpha_bound),
            ("t_gas_bar", self.t_gas_bar),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::wide()
    }
}

/// Sign pair `(a, b)` of the quartic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignPair {
    pub a: i8,
    pub b: i8,
}

impl SignPair {
    pub const DW: SignPair = SignPair { a: -1, b: 1 };
    pub const IDW: SignPair = SignPair { a: 1, b: -1 };
    pub const STIFF: SignPair = SignPair { a: 1, b: 1 };
    pub const INVERTED: SignPair = SignPair { a: -1, b: -1 };

    /// Enumeration order used by the optimizer; also the tie-break order.
    pub const ALL: [SignPair; 4] = [Self::DW, Self::IDW, Self::STIFF, Self::INVERTED];

    pub fn label(&self) -> &'static str {
        match (self.a, self.b) {
            (-1, 1) => "DW",
            (1, -1) => "IDW",
            (1, 1) => "stiff",
            (-1, -1) => "inverted",
            (1, 0) => "harmonic",
            (-1, 0) => "inverted-harmonic",
            (0, _) => "pure-quartic",
            _ => "other",
        }
    }
}

impl fmt::Display for SignPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// `V(x) = (w^2 / 2) [a u^2 + b u^4 / (2 d^2)]` with `u = x - d0` and `w = omega / Omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticPotential {
    pub a: i8,
    pub b: i8,
    pub d0_bar: f64,
    pub d_bar: f64,
    pub omega_ratio: f64,
}

impl QuarticPotential {
    pub fn new(a: i8, b: i8, d0_bar: f64, d_bar: f64, omega_ratio: f64) -> Result<Self> {
        if !(-1..=1).contains(&a) || !(-1..=1).contains(&b) {
            return Err(Error::Domain(format!("sign coefficients must be in {{-1,0,1}}, got ({a},{b})")));
        }
        if !(d0_bar.is_finite() && d0_bar >= 0.0) {
            return Err(Error::Domain(format!("d0_bar must be non-negative, got {d0_bar}")));
        }
        if !(d_bar.is_finite() && d_bar > 0.0) || !(omega_ratio.is_finite() && omega_ratio > 0.0) {
            return Err(Error::Domain("d_bar and omega_ratio must be positive".into()));
        }
        Ok(Self { a, b, d0_bar, d_bar, omega_ratio })
    }

    /// Optimization candidate with `d0` given in units of `d`.
    pub fn candidate(pair: SignPair, d0_over_d: f64, params: &SystemParams) -> Result<Self> {
        Self::new(pair.a, pair.b, d0_over_d * params.d_bar, params.d_bar, params.omega_ratio)
    }

    pub fn signs(&self) -> SignPair {
        SignPair { a: self.a, b: self.b }
    }

    pub fn is_candidate(&self) -> bool {
        self.a.abs() == 1 && self.b.abs() == 1
    }

    pub fn d0_over_d(&self) -> f64 {
        self.d0_bar / self.d_bar
    }

    #[inline]
    pub fn u(&self, x_bar: f64) -> f64 {
        x_bar - self.d0_bar
    }

    #[inline]
    pub fn w2(&self) -> f64 {
        self.omega_ratio * self.omega_ratio
    }

    /// `dV/dx`, so the classical acceleration is `-gradient`.
    #[inline]
    pub fn gradient(&self, x_bar: f64) -> f64 {
        let u = self.u(x_bar);
        let d2 = self.d_bar * self.d_bar;
        self.w2() * (f64::from(self.a) * u + f64::from(self.b) * u * u * u / d2)
    }

    #[inline]
    pub fn alpha2(&self, x_bar: f64) -> f64 {
        let u = self.u(x_bar);
        f64::from(self.a) + 3.0 * f64::from(self.b) * u * u / (self.d_bar * self.d_bar)
    }

    #[inline]
    pub fn alpha3(&self, x_bar: f64) -> f64 {
        3.0 * f64::from(self.b) * self.u(x_bar) / (self.d_bar * self.d_bar)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// S1 * Omega
    pub s1: f64,
    /// S2 * Omega
    pub s2: f64,
    pub l_bar: f64,
    /// Gamma0 / Omega
    pub gamma0_bar: f64,
}

impl NoiseModel {
    pub fn new(s1: f64, s2: f64, l_bar: f64, gamma0_bar: f64) -> Result<Self> {
        let n = Self { s1, s2, l_bar, gamma0_bar };
        n.validate()?;
        Ok(n)
    }

    pub fn silent(l_bar: f64) -> Self {
        Self { s1: 0.0, s2: 0.0, l_bar, gamma0_bar: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("s1", self.s1), ("s2", self.s2), ("l_bar", self.l_bar), ("gamma0_bar", self.gamma0_bar)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("noise field {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::silent(SystemParams::wide().l_bar)
    }
}

pub fn potential_value(pot: &QuarticPotential, x_bar: f64) -> f64 {
    let u = pot.u(x_bar);
    let u2 = u * u;
    0.5 * pot.w2() * (f64::from(pot.a) * u2 + f64::from(pot.b) * u2 * u2 / (2.0 * pot.d_bar * pot.d_bar))
}

/// Classical energy `p^2 / 2 + V` in the same unit as [`potential_value`].
pub fn energy(pot: &QuarticPotential, x_bar: f64, p_bar: f64) -> f64 {
    0.5 * p_bar * p_bar + potential_value(pot, x_bar)
}

/// `(alpha2, alpha3)`: second and third derivatives of `V` relative to the `omega` trap.
pub fn taylor_coefficients(pot: &QuarticPotential, x_bar: f64) -> (f64, f64) {
    (pot.alpha2(x_bar), pot.alpha3(x_bar))
}

/// Dephasing rate `Gamma_f / Omega` at the classical position `x_bar`.
pub fn dephasing_rate(pot: &QuarticPotential, noise: &NoiseModel, x_bar: f64) -> f64 {
    let w2 = pot.w2();
    let alpha2 = pot.alpha2(x_bar);
    let slope = pot.gradient(x_bar) / w2;
    FRAC_PI_2 * w2 * w2 * (noise.s1 * noise.l_bar * noise.l_bar * alpha2 * alpha2 + noise.s2 * slope * slope)
}
