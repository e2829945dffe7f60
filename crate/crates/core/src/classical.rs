//! Classical centroid motion, its period and the feasibility constraints.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dephasing_rate, energy, NoiseModel, QuarticPotential, SystemParams};
use crate::numeric::brent_root;
use crate::ode::{DenseSolution, Dop853, Tolerances};

pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub tau: f64,
    pub x_bar: f64,
    pub p_bar: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub pot: QuarticPotential,
    /// Accepted integrator nodes.
    pub samples: Vec<PhasePoint>,
    pub period_bar: Option<f64>,
    pub closed: bool,
    pub max_abs_alpha2: f64,
    pub energy_bar: f64,
    /// Position of the far turning point, reached at half the period.
    pub turning_point: Option<f64>,
    dense: DenseSolution<2>,
}

impl Trajectory {
    pub fn dense(&self) -> &DenseSolution<2> {
        &self.dense
    }

    pub fn x_at(&self, tau: f64) -> f64 {
        self.dense.eval_component(tau, 0)
    }

    pub fn state_at(&self, tau: f64) -> PhasePoint {
        let [x_bar, p_bar] = self.dense.eval(tau);
        PhasePoint { tau, x_bar, p_bar }
    }

    pub fn t_end(&self) -> f64 {
        self.dense.t_end()
    }

    pub fn require_period(&self) -> Result<f64> {
        match (self.closed, self.period_bar) {
            (true, Some(t)) => Ok(t),
            _ => Err(Error::NotClosed),
        }
    }

    /// `n` equally spaced times covering `[0, T]` with both ends included.
    pub fn period_grid(&self, n: usize) -> Result<Vec<f64>> {
        let period = self.require_period()?;
        Ok(uniform_grid(period, n))
    }

    /// Largest relative energy deviation over the accepted nodes.
    pub fn energy_drift(&self) -> f64 {
        let scale = self.energy_bar.abs().max(1e-12);
        self.samples
            .iter()
            .map(|s| (energy(&self.pot, s.x_bar, s.p_bar) - self.energy_bar).abs() / scale)
            .fold(0.0, f64::max)
    }
}

pub fn uniform_grid(span: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs at least two points");
    let last = (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { span } else { span * k as f64 / last }).collect()
}

fn alpha2_extremum(pot: &QuarticPotential, x_lo: f64, x_hi: f64) -> f64 {
    let (lo, hi) = (x_lo.min(x_hi), x_lo.max(x_hi));
    let mut m = pot.alpha2(lo).abs().max(pot.alpha2(hi).abs());
    if lo <= pot.d0_bar && pot.d0_bar <= hi {
        m = m.max(pot.alpha2(pot.d0_bar).abs());
    }
    m
}

/// First sign change of the momentum away from its initial direction inside a segment.
fn momentum_event(seg: &crate::ode::Segment<2>, dir: f64) -> Option<f64> {
    const PROBES: usize = 16;
    if dir * seg.y1()[1] > 0.0 {
        return None;
    }
    let mut t_prev = seg.t0;
    let mut p_prev = dir * seg.eval_component(seg.t0, 1);
    for k in 1..=PROBES {
        let t = if k == PROBES { seg.t1() } else { seg.t0 + seg.h * k as f64 / PROBES as f64 };
        let p = dir * seg.eval_component(t, 1);
        if p <= 0.0 && p_prev > 0.0 {
            let xtol = 1e-14 * t.abs().max(1.0);
            return brent_root(|s| seg.eval_component(s, 1), t_prev, t, xtol);
        }
        if p > 0.0 {
            p_prev = p;
            t_prev = t;
        }
    }
    // The whole segment sat at or below zero: the crossing is at its start.
    (p_prev <= 0.0 && seg.t0 > 0.0).then_some(seg.t0)
}

/// Integrates Hamilton's equations from rest at the origin and detects the period.
/// Orbits starting near a barrier top have |E| far below the energies they pass
/// through, so the step tolerance is tightened until the relative drift is under 10 rel_tol.
pub fn integrate_trajectory(
    pot: &QuarticPotential,
    params: &SystemParams,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Trajectory> {
    let (mut rel, mut abs) = (rel_tol, abs_tol);
    let mut traj = integrate_pass(pot, params, rel, abs)?;
    for _ in 0..3 {
        let drift = traj.energy_drift();
        if drift.is_nan() || drift <= 10.0 * rel_tol || rel <= MIN_REL_TOL {
            break;
        }
        let shrink = (2.0 * rel_tol / drift).clamp(1e-4, 0.5);
        rel = (rel * shrink).max(MIN_REL_TOL);
        abs *= shrink;
        traj = integrate_pass(pot, params, rel, abs)?;
    }
    Ok(traj)
}

const MIN_REL_TOL: f64 = 1e-14;

fn integrate_pass(pot: &QuarticPotential, params: &SystemParams, rel_tol: f64, abs_tol: f64) -> Result<Trajectory> {
    let grad0 = pot.gradient(0.0);
    if grad0.abs() < 1e-30 {
        return Err(Error::DegenerateEquilibrium(grad0));
    }
    let dir = -grad0.signum();
    let p = *pot;
    let rhs = move |_t: f64, y: &[f64; 2]| [y[1], -p.gradient(y[0])];
    let tol = Tolerances::new(rel_tol, abs_tol);
    let mut solver = Dop853::new(rhs, 0.0, [0.0, 0.0], tol)?;
    let mut dense = DenseSolution::new();
    let bound_x = 10.0 * (pot.d_bar + pot.d0_bar);
    let horizon = 2.0 * params.t_gas_bar;

    let mut event = None;
    let mut escaped = false;
    while solver.t() < horizon {
        let seg = solver.step(horizon)?;
        let y1 = seg.y1();
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp(seg.t1()));
        }
        let te = momentum_event(&seg, dir);
        dense.push(seg);
        if let Some(te) = te {
            event = Some(te);
            break;
        }
        if y1[0].abs() > bound_x {
            escaped = true;
            break;
        }
    }

    let mut period_bar = None;
    let mut turning_point = None;
    if let (Some(te), false) = (event, escaped) {
        let period = 2.0 * te;
        turning_point = Some(dense.eval_component(te, 0));
        while solver.t() < period {
            let seg = solver.step(period)?;
            if seg.y1().iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp(seg.t1()));
            }
            dense.push(seg);
        }
        period_bar = Some(period);
    }

    let samples: Vec<PhasePoint> = dense
        .nodes()
        .into_iter()
        .map(|tau| {
            let [x_bar, p_bar] = dense.eval(tau);
            PhasePoint { tau, x_bar, p_bar }
        })
        .collect();
    let max_abs_alpha2 = match turning_point {
        Some(x2) => alpha2_extremum(pot, 0.0, x2),
        None => samples.iter().map(|s| pot.alpha2(s.x_bar).abs()).fold(0.0, f64::max),
    };
    Ok(Trajectory {
        pot: *pot,
        samples,
        period_bar,
        closed: period_bar.is_some(),
        max_abs_alpha2,
        energy_bar: energy(pot, 0.0, 0.0),
        turning_point,
        dense,
    })
}

/// Period from the action integral, independent of the time stepper.
///
/// With turning points `u1 < u2` (in either order) the substitution
/// `u = u1 + (u2 - u1)(1 - cos t)/2` removes both inverse square-root endpoint
/// singularities, leaving `T = 2 * integral_0^pi dt / sqrt(2 h(u(t)))` where `h` is the
/// energy gap divided by `(u - u1)(u2 - u)`.
pub fn period_oracle(pot: &QuarticPotential, _params: &SystemParams) -> Result<f64> {
    let u1 = pot.u(0.0);
    let grad0 = pot.gradient(0.0);
    if grad0.abs() < 1e-30 {
        return Err(Error::DegenerateOrbit("start is an equilibrium".into()));
    }
    let dir = -grad0.signum();
    let a = f64::from(pot.a);
    let b = f64::from(pot.b);
    let d2 = pot.d_bar * pot.d_bar;

    let mut roots = vec![-u1];
    if pot.b != 0 {
        let mut s2 = -2.0 * a * d2 / b - u1 * u1;
        if s2.abs() <= 1e-12 * (u1 * u1).max(1.0) {
            s2 = 0.0;
        }
        if s2 >= 0.0 {
            roots.push(s2.sqrt());
            roots.push(-s2.sqrt());
        }
    }
    let scale = u1.abs().max(1.0);
    let u2 = roots
        .iter()
        .copied()
        .filter(|r| (r - u1) * dir > 1e-12 * scale)
        .min_by(|x, y| (x - u1).abs().total_cmp(&(y - u1).abs()))
        .ok_or_else(|| Error::UnboundedOrbit(format!("no turning point beyond u = {u1}")))?;
    let scale = scale.max(u2.abs());
    let crowded = roots.iter().chain(std::iter::once(&u1)).filter(|r| (*r - u2).abs() <= 1e-12 * scale).count();
    if crowded > 1 || (u2 - u1).abs() <= 1e-12 * scale {
        return Err(Error::DegenerateOrbit(format!("turning points coincide near u = {u2}")));
    }

    let w2 = pot.w2();
    let mirror = (u2 + u1).abs() <= 1e-15 * scale;
    let h = move |u: f64| -> f64 {
        if mirror || pot.b == 0 {
            0.5 * w2 * (a + b * (u1 * u1 + u * u) / (2.0 * d2))
        } else {
            0.5 * w2 * (b / (2.0 * d2)) * (u + u1) * (u + u2)
        }
    };
    let integrand = |t: f64| {
        let u = u1 + (u2 - u1) * 0.5 * (1.0 - t.cos());
        1.0 / (2.0 * h(u)).sqrt()
    };
    let mid = integrand(0.5 * PI);
    if !(mid.is_finite() && mid > 0.0) {
        return Err(Error::DegenerateOrbit("energy gap vanishes inside the orbit".into()));
    }
    let target = 1e-13 * PI * mid;
    let out = quadrature::integrate(integrand, 0.0, PI, target);
    if !out.integral.is_finite() {
        return Err(Error::DegenerateOrbit("period integral diverges".into()));
    }
    Ok(2.0 * out.integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub closed: bool,
    pub alpha_ok: bool,
    pub period_ok: bool,
    /// `alpha_b - max |alpha2|`
    pub alpha_margin: f64,
    /// `t_gas - T`, negative infinity for open orbits.
    pub period_margin: f64,
    pub period_bar: Option<f64>,
    pub max_abs_alpha2: f64,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.closed && self.alpha_ok && self.period_ok
    }

    pub fn first_violation(&self) -> Option<&'static str> {
        if !self.closed {
            Some("open orbit")
        } else if !self.alpha_ok {
            Some("curvature bound exceeded")
        } else if !self.period_ok {
            Some("period exceeds gas collision time")
        } else {
            None
        }
    }
}

pub fn constraint_report(traj: &Trajectory, params: &SystemParams) -> FeasibilityReport {
    let alpha_margin = params.alpha_bound - traj.max_abs_alpha2;
    let period_margin = traj.period_bar.map_or(f64::NEG_INFINITY, |t| params.t_gas_bar - t);
    FeasibilityReport {
        closed: traj.closed,
        alpha_ok: alpha_margin >= 0.0,
        period_ok: traj.closed && period_margin >= 0.0,
        alpha_margin,
        period_margin,
        period_bar: traj.period_bar,
        max_abs_alpha2: traj.max_abs_alpha2,
    }
}

/// Mean time between gas collisions in seconds, all inputs in SI units.
pub fn gas_collision_time(radius: f64, gas_mass: f64, gas_temperature: f64, gas_pressure: f64) -> Result<f64> {
    for (name, v) in [
        ("radius", radius),
        ("gas_mass", gas_mass),
        ("gas_temperature", gas_temperature),
        ("gas_pressure", gas_pressure),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(3.0 * (gas_mass * BOLTZMANN * gas_temperature).sqrt()
        / (16.0 * PI * (2.0 * PI).sqrt() * gas_pressure * radius * radius))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub tau: f64,
    pub x_bar: f64,
    pub p_bar: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub gamma_f_bar: f64,
}

pub fn trajectory_rows(traj: &Trajectory, noise: &NoiseModel, times: &[f64]) -> Vec<TrajectoryRow> {
    times
        .iter()
        .map(|&tau| {
            let PhasePoint { x_bar, p_bar, .. } = traj.state_at(tau);
            TrajectoryRow {
                tau,
                x_bar,
                p_bar,
                alpha2: traj.pot.alpha2(x_bar),
                alpha3: traj.pot.alpha3(x_bar),
                gamma_f_bar: dephasing_rate(&traj.pot, noise, x_bar),
            }
        })
        .collect()
}

pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> Result<()> {
    crate::io::write_rows(rows, out)
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    crate::io::read_rows(input)
}
