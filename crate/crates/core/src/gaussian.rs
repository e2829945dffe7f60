//! Covariance propagation about the classical path, purity and coherence length.
//!
//! The covariance is integrated as `(ln cxx, cxp / cxx, det)`. Along wide orbits
//! `cxx` reaches 1e9 while `det` stays of order one, so forming the determinant
//! from the entries would cancel away every significant digit; carrying it as a
//! state variable keeps purity exact and monotone.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::classical::Trajectory;
use crate::error::{Error, Result};
use crate::model::{dephasing_rate, NoiseModel, QuarticPotential};
use crate::numeric::{diff_of_products, refine_peak};
use crate::ode::{integrate, DenseSolution, Tolerances};

/// Samples per period used for traces and merit extraction.
pub const SAMPLES_PER_PERIOD: usize = 4096;
/// Relative accuracy in time of the refined merit peak.
pub const PEAK_TIME_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceState {
    pub cxx: f64,
    pub cxp: f64,
    pub cpp: f64,
    det: f64,
}

impl CovarianceState {
    pub fn new(cxx: f64, cxp: f64, cpp: f64) -> Self {
        Self { cxx, cxp, cpp, det: diff_of_products(cxx, cpp, cxp, cxp) }
    }

    pub fn ground() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    fn from_log_cholesky(y: &[f64; 3]) -> Self {
        let cxx = y[0].exp();
        let nu = y[1];
        let det = y[2];
        Self { cxx, cxp: nu * cxx, cpp: nu * nu * cxx + det / cxx, det }
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn is_valid(&self) -> bool {
        self.cxx > 0.0 && self.cpp > 0.0 && self.det >= 1.0 - 1e-9
    }

    /// Congruence by the phase-space rotation taking `x` to `x cos(phi) + p sin(phi)`.
    pub fn rotated(&self, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let cxx = c * c * self.cxx + 2.0 * s * c * self.cxp + s * s * self.cpp;
        let cpp = s * s * self.cxx - 2.0 * s * c * self.cxp + c * c * self.cpp;
        let cxp = (c * c - s * s) * self.cxp + s * c * (self.cpp - self.cxx);
        Self { cxx, cxp, cpp, det: self.det }
    }
}

pub fn purity(state: &CovarianceState) -> Result<f64> {
    if state.det.is_nan() || state.det <= 0.0 {
        return Err(Error::Domain(format!("non-positive covariance determinant {}", state.det)));
    }
    Ok(1.0 / state.det.sqrt())
}

/// `(lambda_minus, lambda_plus, theta)` with `theta` the angle of the `lambda_plus`
/// eigenvector in `(-pi/2, pi/2]`.
pub fn principal_axes(state: &CovarianceState) -> (f64, f64, f64) {
    let diff = state.cxx - state.cpp;
    let disc = diff.hypot(2.0 * state.cxp);
    let lambda_plus = 0.5 * (state.cxx + state.cpp + disc);
    let lambda_minus = state.det / lambda_plus;
    let theta = if disc < 1e-12 * lambda_plus {
        0.0
    } else {
        let t = 0.5 * (2.0 * state.cxp).atan2(diff);
        if t <= -0.5 * PI {
            t + PI
        } else {
            t
        }
    };
    (lambda_minus, lambda_plus, theta)
}

/// `xi / x0 = sqrt(8 lambda_plus) * P`.
pub fn coherence_length(state: &CovarianceState) -> Result<f64> {
    let (_, lp, _) = principal_axes(state);
    Ok((8.0 * lp).sqrt() * purity(state)?)
}

/// Position-representation density matrix of a centred Gaussian state,
/// `rho(X + Y/2, X - Y/2)`, as `(re, im)`.
pub fn gaussian_density_matrix(state: &CovarianceState, x_center: f64, y_rel: f64) -> (f64, f64) {
    let amp = (2.0 * PI * state.cxx).powf(-0.5)
        * (-x_center * x_center / (2.0 * state.cxx) - state.det * y_rel * y_rel / (8.0 * state.cxx)).exp();
    let phase = 0.5 * state.cxp / state.cxx * x_center * y_rel;
    (amp * phase.cos(), amp * phase.sin())
}

/// Relative residual of `<-x/2| rho |x/2> = (2 pi lambda_plus)^(-1/2) exp(-x^2 / xi^2)`
/// along the direction of maximum expansion.
pub fn verify_coherence_relation(state: &CovarianceState, x_probe: f64) -> f64 {
    let (_, lp, theta) = principal_axes(state);
    let frame = state.rotated(theta);
    let (re, im) = gaussian_density_matrix(&frame, 0.0, -x_probe);
    let xi = match coherence_length(state) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let rhs = (2.0 * PI * lp).powf(-0.5) * (-(x_probe * x_probe) / (xi * xi)).exp();
    ((re - rhs).abs() + im.abs()) / rhs
}

#[derive(Debug, Clone)]
pub struct GaussianTrace {
    pub times: Vec<f64>,
    pub states: Vec<CovarianceState>,
    pub lambda_minus: Vec<f64>,
    pub lambda_plus: Vec<f64>,
    pub theta: Vec<f64>,
    pub purity: Vec<f64>,
    pub coherence_length: Vec<f64>,
    dense: DenseSolution<3>,
}

impl GaussianTrace {
    pub fn state_at(&self, tau: f64) -> CovarianceState {
        CovarianceState::from_log_cholesky(&self.dense.eval(tau))
    }

    pub fn purity_at(&self, tau: f64) -> f64 {
        1.0 / self.dense.eval_component(tau, 2).sqrt()
    }

    pub fn coherence_length_at(&self, tau: f64) -> f64 {
        coherence_length(&self.state_at(tau)).unwrap_or(f64::NAN)
    }

    /// Squeezing parameter `r = -ln(lambda_minus)` at sample `k`.
    pub fn squeezing(&self, k: usize) -> f64 {
        -self.lambda_minus[k].ln()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrates the covariance equations for an arbitrary curvature profile
/// `w^2 alpha2(tau)` and total dephasing rate, starting from the ground state.
pub fn propagate_covariance_profile<C, G>(
    curvature: C,
    rate: G,
    times: &[f64],
    tol: Tolerances,
) -> Result<GaussianTrace>
where
    C: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let t_end = *times.last().ok_or_else(|| Error::GridMismatch("empty time grid".into()))?;
    let rhs = |tau: f64, y: &[f64; 3]| {
        let cxx = y[0].exp();
        let nu = y[1];
        [2.0 * nu, y[2] / (cxx * cxx) - nu * nu - curvature(tau), 4.0 * rate(tau) * cxx]
    };
    let dense = integrate(rhs, times[0], [0.0, 0.0, 1.0], t_end, tol)
        .map_err(|e| Error::IntegratorFailure(format!("covariance propagation: {e}")))?;
    let n = times.len();
    let mut trace = GaussianTrace {
        times: times.to_vec(),
        states: Vec::with_capacity(n),
        lambda_minus: Vec::with_capacity(n),
        lambda_plus: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        purity: Vec::with_capacity(n),
        coherence_length: Vec::with_capacity(n),
        dense,
    };
    for &tau in times {
        let st = trace.state_at(tau);
        if !st.is_valid() || !st.cxx.is_finite() || !st.cpp.is_finite() {
            return Err(Error::IntegratorFailure(format!(
                "covariance lost positivity at tau = {tau}: cxx = {}, cpp = {}, det = {}",
                st.cxx, st.cpp, st.det
            )));
        }
        let (lm, lp, th) = principal_axes(&st);
        let p = 1.0 / st.det.sqrt();
        trace.states.push(st);
        trace.lambda_minus.push(lm);
        trace.lambda_plus.push(lp);
        trace.theta.push(th);
        trace.purity.push(p);
        trace.coherence_length.push((8.0 * lp).sqrt() * p);
    }
    Ok(trace)
}

/// Covariance along a closed classical orbit over one period.
pub fn propagate_covariance(
    pot: &QuarticPotential,
    noise: &NoiseModel,
    traj: &Trajectory,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<GaussianTrace> {
    let times = traj.period_grid(SAMPLES_PER_PERIOD)?;
    let w2 = pot.w2();
    propagate_covariance_profile(
        |tau| w2 * pot.alpha2(traj.x_at(tau)),
        |tau| dephasing_rate(pot, noise, traj.x_at(tau)) + noise.gamma0_bar,
        &times,
        Tolerances::new(rel_tol, abs_tol),
    )
}

/// `(max xi, argmax tau)` over the trace, refined on the dense output.
pub fn max_coherence_length(trace: &GaussianTrace) -> (f64, f64) {
    refine_peak(&trace.times, &trace.coherence_length, |t| trace.coherence_length_at(t), PEAK_TIME_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianRow {
    pub tau: f64,
    pub cxx: f64,
    pub cxp: f64,
    pub cpp: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub theta: f64,
    pub purity: f64,
    pub xi_bar: f64,
}

impl GaussianRow {
    pub fn state(&self) -> CovarianceState {
        CovarianceState::new(self.cxx, self.cxp, self.cpp)
    }
}

pub fn gaussian_rows(trace: &GaussianTrace) -> Vec<GaussianRow> {
    (0..trace.len())
        .map(|k| {
            let s = trace.states[k];
            GaussianRow {
                tau: trace.times[k],
                cxx: s.cxx,
                cxp: s.cxp,
                cpp: s.cpp,
                lambda_minus: trace.lambda_minus[k],
                lambda_plus: trace.lambda_plus[k],
                theta: trace.theta[k],
                purity: trace.purity[k],
                xi_bar: trace.coherence_length[k],
            }
        })
        .collect()
}

pub fn write_gaussian_csv<W: Write>(rows: &[GaussianRow], out: W) -> Result<()> {
    crate::io::write_rows(rows, out)
}

pub fn read_gaussian_csv<R: Read>(input: R) -> Result<Vec<GaussianRow>> {
    crate::io::read_rows(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> Tolerances {
        Tolerances::new(1e-12, 1e-14)
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&CovarianceState::ground()).unwrap(), 1.0);
        assert_eq!(purity(&CovarianceState::new(2.0, 0.0, 2.0)).unwrap(), 0.5);
        assert!(purity(&CovarianceState::new(1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn principal_axes_examples() {
        assert_eq!(principal_axes(&CovarianceState::ground()), (1.0, 1.0, 0.0));
        let (lm, lp, th) = principal_axes(&CovarianceState::new(5.0, 2.0, 1.0));
        let r = 2.0 * 2f64.sqrt();
        assert!((lp - (3.0 + r)).abs() < 1e-14);
        assert!((lm - (3.0 - r)).abs() < 1e-14);
        assert!((th - PI / 8.0).abs() < 1e-15);
        let (_, _, th) = principal_axes(&CovarianceState::new(1.0, 0.0, 3.0));
        assert_eq!(th, PI / 2.0);
    }

    #[test]
    fn coherence_length_examples() {
        assert!((coherence_length(&CovarianceState::ground()).unwrap() - 8f64.sqrt()).abs() < 1e-15);
        let free = CovarianceState::new(5.0, 2.0, 1.0);
        let expect = (8.0 * (3.0 + 2.0 * 2f64.sqrt())).sqrt();
        assert!((coherence_length(&free).unwrap() - expect).abs() < 1e-13);
        assert!((expect - 6.828_427_124_746_19).abs() < 1e-12);
        assert!((coherence_length(&CovarianceState::new(2.0, 0.0, 2.0)).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn coherence_relation_holds() {
        assert_eq!(verify_coherence_relation(&CovarianceState::new(5.0, 2.0, 1.0), 0.0), 0.0);
        assert!(verify_coherence_relation(&CovarianceState::new(5.0, 2.0, 1.0), 1.0) < 1e-10);
        let mixed = CovarianceState::new(2.0 * 5.0, 2.0 * 2.0, 2.0 * 1.0);
        assert!((purity(&mixed).unwrap() - 0.5).abs() < 1e-15);
        assert!(verify_coherence_relation(&mixed, 1.0) < 1e-10);
        assert!(verify_coherence_relation(&mixed, 3.7) < 1e-10);
    }

    #[test]
    fn free_particle_oracle() {
        let times: Vec<f64> = (0..=100).map(|k| 0.1 * k as f64).collect();
        let tr = propagate_covariance_profile(|_| 0.0, |_| 0.0, &times, tight()).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let s = tr.states[k];
            assert!((s.cxx - (1.0 + t * t)).abs() < 1e-9 * (1.0 + t * t));
            assert!((s.cxp - t).abs() < 1e-9 * t.max(1.0));
            assert!((s.cpp - 1.0).abs() < 1e-9);
            assert!((tr.purity[k] - 1.0).abs() < 1e-12);
        }
        let k2 = 20;
        let expect = (8.0 * (3.0 + 2.0 * 2f64.sqrt())).sqrt();
        assert!((tr.coherence_length[k2] - expect).abs() < 1e-8);
    }

    #[test]
    fn dephasing_only_grows_momentum_variance_linearly() {
        let g0 = 0.03;
        let times: Vec<f64> = (0..=50).map(|k| 0.2 * k as f64).collect();
        let tr = propagate_covariance_profile(|_| 0.0, |_| g0, &times, tight()).unwrap();
        for (k, &t) in times.iter().enumerate() {
            assert!((tr.states[k].cpp - (1.0 + 4.0 * g0 * t)).abs() < 1e-9);
        }
        assert!(tr.purity.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn rotation_shifts_angle() {
        let s = CovarianceState::new(5.0, 2.0, 1.0);
        let (lm, lp, th) = principal_axes(&s);
        let r = s.rotated(0.3);
        let (lm2, lp2, th2) = principal_axes(&r);
        assert!((lm - lm2).abs() < 1e-12 && (lp - lp2).abs() < 1e-12);
        let d = (th2 - (th - 0.3)).rem_euclid(PI);
        assert!(d < 1e-12 || PI - d < 1e-12);
    }
}
