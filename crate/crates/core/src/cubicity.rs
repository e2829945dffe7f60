//! Symplectic Gaussian frame, quadrature decomposition and (coherent) cubicity.
//!
//! The frame `S` solves `dS/dtau = [[0, 1], [-w^2 alpha2, 0]] S` with `S(0) = 1`. Its first
//! row is written as `eta (cos phi, sin phi)` and the second row follows from
//! `det S = 1` and one extra variable `mu`:
//!
//! ```text
//! S = [[eta cos phi,                     eta sin phi                   ],
//!      [-sin phi / eta + mu eta cos phi,  cos phi / eta + mu eta sin phi]]
//! ```
//!
//! giving `d ln eta = mu`, `d phi = eta^-2`, `d mu = eta^-4 - mu^2 - w^2 alpha2`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::classical::Trajectory;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianTrace, PEAK_TIME_TOL, SAMPLES_PER_PERIOD};
use crate::model::QuarticPotential;
use crate::numeric::refine_peak;
use crate::ode::{integrate, DenseSolution, Tolerances};

/// Scale of the cubic generator per unit dimensionless time: `w^2 / 9`.
///
/// The cubic Taylor term `V'''(x_c) dx^3 / 6` written with `alpha3` and the frame
/// quadrature `dx = x0 eta X_phi` is `(m omega^2 x0^2 / 3) alpha3 eta^3 X_phi^3`.
/// Dividing by `hbar Omega = 2 m Omega^2 x0^2` gives `(w^2 / 6) alpha3 eta^3 = (w^2 / 9) beta`
/// with `beta = 3 alpha3 eta^3 / 2`.
pub fn cubic_prefactor(omega_ratio: f64) -> f64 {
    omega_ratio * omega_ratio / 9.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticState {
    pub sxx: f64,
    pub sxp: f64,
    pub spx: f64,
    pub spp: f64,
}

impl SymplecticState {
    pub fn identity() -> Self {
        Self { sxx: 1.0, sxp: 0.0, spx: 0.0, spp: 1.0 }
    }

    pub fn det(&self) -> f64 {
        self.sxx * self.spp - self.sxp * self.spx
    }

    fn from_frame(ln_eta: f64, phi: f64, mu: f64) -> Self {
        let eta = ln_eta.exp();
        let (s, c) = phi.sin_cos();
        Self { sxx: eta * c, sxp: eta * s, spx: -s / eta + mu * eta * c, spp: c / eta + mu * eta * s }
    }
}

/// Frame propagation with the cubicity integrals carried in the same solve.
///
/// State layout: `[ln eta, phi, mu, beta_s, beta_c]`.
#[derive(Debug, Clone)]
pub struct FrameTrace {
    pub times: Vec<f64>,
    pub states: Vec<SymplecticState>,
    /// Continuous quadrature angle from the solve itself.
    pub phi: Vec<f64>,
    pub beta_s: Vec<f64>,
    pub beta_c: Vec<f64>,
    dense: DenseSolution<5>,
}

impl FrameTrace {
    pub fn kappa_at(&self, tau: f64) -> f64 {
        let y = self.dense.eval(tau);
        y[3].hypot(y[4])
    }

    pub fn state_at(&self, tau: f64) -> SymplecticState {
        let y = self.dense.eval(tau);
        SymplecticState::from_frame(y[0], y[1], y[2])
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrates the frame for a curvature profile `w^2 alpha2(tau)` and cubic drive
/// `alpha3(tau)`; `prefactor` scales the cubicity integrals.
pub fn propagate_frame_profile<C, D>(
    curvature: C,
    alpha3: D,
    prefactor: f64,
    times: &[f64],
    tol: Tolerances,
) -> Result<FrameTrace>
where
    C: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let t_end = *times.last().ok_or_else(|| Error::GridMismatch("empty time grid".into()))?;
    let rhs = |tau: f64, y: &[f64; 5]| {
        let inv_eta2 = (-2.0 * y[0]).exp();
        let beta = 1.5 * alpha3(tau) * (3.0 * y[0]).exp();
        let (s, c) = y[1].sin_cos();
        [
            y[2],
            inv_eta2,
            inv_eta2 * inv_eta2 - y[2] * y[2] - curvature(tau),
            prefactor * beta * s,
            prefactor * beta * c,
        ]
    };
    let dense = integrate(rhs, times[0], [0.0; 5], t_end, tol)
        .map_err(|e| Error::IntegratorFailure(format!("frame propagation: {e}")))?;
    let n = times.len();
    let mut out = FrameTrace {
        times: times.to_vec(),
        states: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        beta_s: Vec::with_capacity(n),
        beta_c: Vec::with_capacity(n),
        dense,
    };
    for &tau in times {
        let y = out.dense.eval(tau);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegratorFailure(format!("frame became non-finite at tau = {tau}")));
        }
        out.states.push(SymplecticState::from_frame(y[0], y[1], y[2]));
        out.phi.push(y[1]);
        out.beta_s.push(y[3]);
        out.beta_c.push(y[4]);
    }
    Ok(out)
}

/// Frame along a closed classical orbit over one period, sampled on the shared grid.
pub fn propagate_symplectic(
    pot: &QuarticPotential,
    traj: &Trajectory,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<FrameTrace> {
    let times = traj.period_grid(SAMPLES_PER_PERIOD)?;
    let w2 = pot.w2();
    propagate_frame_profile(
        |tau| w2 * pot.alpha2(traj.x_at(tau)),
        |tau| pot.alpha3(traj.x_at(tau)),
        cubic_prefactor(pot.omega_ratio),
        &times,
        Tolerances::new(rel_tol, abs_tol),
    )
}

/// Largest angle step accepted between consecutive samples. After reduction modulo
/// pi every step lies in `[-pi/2, pi/2]`, so steps near that edge are ambiguous.
pub const MAX_ANGLE_STEP: f64 = 0.45 * PI;

/// `eta = |first row of S|` and the quadrature angle unwrapped by continuity,
/// choosing the multiple of pi that minimizes each jump.
pub fn quadrature_decomposition(states: &[SymplecticState], times: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if states.len() != times.len() {
        return Err(Error::GridMismatch(format!("{} states for {} times", states.len(), times.len())));
    }
    let mut eta = Vec::with_capacity(states.len());
    let mut phi: Vec<f64> = Vec::with_capacity(states.len());
    for (k, s) in states.iter().enumerate() {
        eta.push(s.sxx.hypot(s.sxp));
        let raw = s.sxp.atan2(s.sxx);
        let value = match phi.last() {
            None => raw,
            Some(&prev) => {
                let shift = ((prev - raw) / PI).round();
                let v = raw + shift * PI;
                let jump = (v - prev).abs();
                if jump >= MAX_ANGLE_STEP {
                    return Err(Error::UndersampledAngle { tau: times[k], jump });
                }
                v
            }
        };
        phi.push(value);
    }
    Ok((eta, phi))
}

#[derive(Debug, Clone)]
pub struct CubicityTrace {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    pub phi: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta_s: Vec<f64>,
    pub beta_c: Vec<f64>,
    pub kappa: Vec<f64>,
    pub coherent_cubicity: Vec<f64>,
    refine: Option<(FrameTrace, GaussianTrace)>,
}

impl CubicityTrace {
    pub fn coherent_cubicity_at(&self, tau: f64) -> Option<f64> {
        self.refine.as_ref().map(|(f, g)| f.kappa_at(tau) * g.purity_at(tau))
    }

    pub fn kappa_at(&self, tau: f64) -> Option<f64> {
        self.refine.as_ref().map(|(f, _)| f.kappa_at(tau))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Trace built from already-sampled columns; merit refinement falls back to the grid.
    pub fn from_columns(
        times: Vec<f64>,
        eta: Vec<f64>,
        phi: Vec<f64>,
        beta: Vec<f64>,
        beta_s: Vec<f64>,
        beta_c: Vec<f64>,
        purity: &[f64],
    ) -> Result<Self> {
        let n = times.len();
        if [eta.len(), phi.len(), beta.len(), beta_s.len(), beta_c.len(), purity.len()].iter().any(|&m| m != n) {
            return Err(Error::GridMismatch("column lengths differ".into()));
        }
        let kappa: Vec<f64> = beta_s.iter().zip(&beta_c).map(|(s, c)| s.hypot(*c)).collect();
        let coherent_cubicity = kappa.iter().zip(purity).map(|(k, p)| k * p).collect();
        Ok(Self { times, eta, phi, beta, beta_s, beta_c, kappa, coherent_cubicity, refine: None })
    }
}

/// Assembles `beta`, `kappa` and `K = kappa * P` on the common sampling grid.
pub fn cubicity_trace(
    pot: &QuarticPotential,
    traj: &Trajectory,
    gauss: &GaussianTrace,
    frame: &FrameTrace,
) -> Result<CubicityTrace> {
    if gauss.times != frame.times {
        return Err(Error::GridMismatch(format!(
            "gaussian trace has {} samples, frame trace has {}",
            gauss.len(),
            frame.len()
        )));
    }
    // phi from the solve is already continuous, so no unwrapping is needed here
    let eta: Vec<f64> = frame.states.iter().map(|s| s.sxx.hypot(s.sxp)).collect();
    let phi = frame.phi.clone();
    let beta: Vec<f64> = frame
        .times
        .iter()
        .zip(&eta)
        .map(|(&tau, &e)| 1.5 * pot.alpha3(traj.x_at(tau)) * e * e * e)
        .collect();
    let mut out = CubicityTrace::from_columns(
        frame.times.clone(),
        eta,
        phi,
        beta,
        frame.beta_s.clone(),
        frame.beta_c.clone(),
        &gauss.purity,
    )?;
    out.refine = Some((frame.clone(), gauss.clone()));
    Ok(out)
}

fn peak(trace: &CubicityTrace, values: &[f64], f: impl Fn(f64) -> Option<f64>) -> (f64, f64) {
    if values.iter().all(|v| *v == 0.0) {
        return (0.0, 0.0);
    }
    if trace.refine.is_some() {
        refine_peak(&trace.times, values, |t| f(t).unwrap_or(f64::NAN), PEAK_TIME_TOL)
    } else {
        let (k, v) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) });
        (v, trace.times[k])
    }
}

/// `(max K, argmax tau)`.
pub fn coherent_cubicity_merit(trace: &CubicityTrace) -> (f64, f64) {
    peak(trace, &trace.coherent_cubicity, |t| trace.coherent_cubicity_at(t))
}

/// `(max kappa, argmax tau)`.
pub fn max_cubicity(trace: &CubicityTrace) -> (f64, f64) {
    peak(trace, &trace.kappa, |t| trace.kappa_at(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicityRow {
    pub tau: f64,
    pub eta: f64,
    pub phi: f64,
    pub beta: f64,
    pub beta_s: f64,
    pub beta_c: f64,
    pub kappa: f64,
    #[serde(rename = "K")]
    pub coherent_cubicity: f64,
}

pub fn cubicity_rows(trace: &CubicityTrace) -> Vec<CubicityRow> {
    (0..trace.len())
        .map(|k| CubicityRow {
            tau: trace.times[k],
            eta: trace.eta[k],
            phi: trace.phi[k],
            beta: trace.beta[k],
            beta_s: trace.beta_s[k],
            beta_c: trace.beta_c[k],
            kappa: trace.kappa[k],
            coherent_cubicity: trace.coherent_cubicity[k],
        })
        .collect()
}

pub fn write_cubicity_csv<W: Write>(rows: &[CubicityRow], out: W) -> Result<()> {
    crate::io::write_rows(rows, out)
}

pub fn read_cubicity_csv<R: Read>(input: R) -> Result<Vec<CubicityRow>> {
    crate::io::read_rows(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t: f64, n: usize) -> Vec<f64> {
        crate::classical::uniform_grid(t, n)
    }

    #[test]
    fn free_frame_is_shear() {
        let times = grid(10.0, 201);
        let fr = propagate_frame_profile(|_| 0.0, |_| 0.0, 1.0, &times, Tolerances::new(1e-12, 1e-14)).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let s = fr.states[k];
            assert!((s.sxx - 1.0).abs() < 1e-9);
            assert!((s.sxp - t).abs() < 1e-9 * t.max(1.0));
            assert!(s.spx.abs() < 1e-9);
            assert!((s.spp - 1.0).abs() < 1e-9);
        }
        let (eta, phi) = quadrature_decomposition(&fr.states, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            assert!((eta[k] - (1.0 + t * t).sqrt()).abs() < 1e-9 * eta[k]);
            assert!((phi[k] - t.atan()).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_frame_is_rotation() {
        let times = grid(12.0, 400);
        let fr = propagate_frame_profile(|_| 1.0, |_| 0.0, 1.0, &times, Tolerances::new(1e-12, 1e-14)).unwrap();
        let (eta, phi) = quadrature_decomposition(&fr.states, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let s = fr.states[k];
            assert!((s.sxx - t.cos()).abs() < 1e-9);
            assert!((s.sxp - t.sin()).abs() < 1e-9);
            assert!((s.spx + t.sin()).abs() < 1e-9);
            assert!((s.spp - t.cos()).abs() < 1e-9);
            assert!((eta[k] - 1.0).abs() < 1e-9);
            assert!((phi[k] - t).abs() < 1e-9, "t={t} phi={}", phi[k]);
        }
    }

    #[test]
    fn coarse_sampling_is_reported() {
        let times = grid(12.0, 9);
        let fr = propagate_frame_profile(|_| 1.0, |_| 0.0, 1.0, &times, Tolerances::default()).unwrap();
        assert!(matches!(
            quadrature_decomposition(&fr.states, &times),
            Err(Error::UndersampledAngle { .. })
        ));
    }

    #[test]
    fn zero_cubic_drive_gives_zero_merit() {
        let times = grid(5.0, 50);
        let zeros = vec![0.0; 50];
        let tr = CubicityTrace::from_columns(
            times,
            vec![1.0; 50],
            zeros.clone(),
            zeros.clone(),
            zeros.clone(),
            zeros,
            &[1.0; 50],
        )
        .unwrap();
        assert_eq!(coherent_cubicity_merit(&tr), (0.0, 0.0));
    }

    #[test]
    fn pinned_angle_reduces_to_single_integral() {
        // With alpha2 = 0 and a drive switched on only for tau > 50 the angle is
        // nearly frozen, so kappa approaches |c * integral of beta|.
        let times = grid(60.0, 601);
        let c = 0.1;
        let drive = |t: f64| if t > 50.0 { 1e-6 } else { 0.0 };
        let fr = propagate_frame_profile(|_| 0.0, drive, c, &times, Tolerances::new(1e-12, 1e-16)).unwrap();
        let k = times.len() - 1;
        let kappa = fr.beta_s[k].hypot(fr.beta_c[k]);
        let direct = quadrature::integrate(|t| c * 1.5 * 1e-6 * (1.0 + t * t).powf(1.5), 50.0, 60.0, 1e-16).integral;
        assert!((kappa - direct).abs() < 1e-3 * direct, "{kappa} vs {direct}");
    }
}
