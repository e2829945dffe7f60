//! Grid density-matrix simulation with position dephasing, Wigner transform and
//! negativity volume.
//!
//! Positions are `x_k = x_min + k dx` on a periodic box of `n` points and `k` is the
//! wavenumber conjugate to `x_bar`, so `p_bar = 2k` and `H / (hbar Omega) = k^2 + V / 2`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::classical::Trajectory;
use crate::error::{Error, Result};
use crate::gaussian::CovarianceState;
use crate::model::{dephasing_rate, potential_value, NoiseModel, QuarticPotential};

/// Largest potential phase accepted per step, in radians.
pub const MAX_PHASE_STEP: f64 = 0.5;
/// Smallest box margin beyond the turning points, in `x0`.
pub const MIN_MARGIN: f64 = 10.0;
const TRACE_CHECK_EVERY: usize = 1000;
const TRACE_DRIFT_LIMIT: f64 = 1e-6;

fn default_n_points() -> usize {
    2048
}
fn default_store_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    pub x_min_bar: f64,
    pub x_max_bar: f64,
    pub dt_bar: f64,
    #[serde(default = "default_store_every")]
    pub store_every: usize,
}

impl GridSpec {
    pub fn new(n_points: usize, x_min_bar: f64, x_max_bar: f64, dt_bar: f64) -> Result<Self> {
        let g = Self { n_points, x_min_bar, x_max_bar, dt_bar, store_every: 1 };
        g.validate()?;
        Ok(g)
    }

    /// Box centred on the potential centre, reaching `margin` beyond the largest
    /// excursion `|x - d0|` of the classical orbit on either side.
    pub fn around_orbit(traj: &Trajectory, margin: f64, n_points: usize, dt_bar: f64) -> Result<Self> {
        let d0 = traj.pot.d0_bar;
        let reach = traj.samples.iter().map(|s| (s.x_bar - d0).abs()).fold(0.0, f64::max);
        let reach = traj.turning_point.map_or(reach, |x| reach.max((x - d0).abs()));
        Self::new(n_points, d0 - reach - margin, d0 + reach + margin, dt_bar)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 4 || !self.n_points.is_power_of_two() {
            return Err(Error::Config(format!("n_points must be a power of two >= 4, got {}", self.n_points)));
        }
        if !(self.x_min_bar.is_finite() && self.x_max_bar.is_finite() && self.x_max_bar > self.x_min_bar) {
            return Err(Error::Config(format!("empty box [{}, {}]", self.x_min_bar, self.x_max_bar)));
        }
        if !(self.dt_bar > 0.0 && self.dt_bar.is_finite()) {
            return Err(Error::Config(format!("dt_bar must be positive, got {}", self.dt_bar)));
        }
        if self.store_every == 0 {
            return Err(Error::Config("store_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max_bar - self.x_min_bar) / self.n_points as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_points).map(|k| self.x_min_bar + k as f64 * dx).collect()
    }

    /// Wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let scale = 2.0 * PI / (self.n_points as f64 * self.dx());
        (0..n).map(|k| if k < n / 2 { k } else { k - n } as f64 * scale).collect()
    }

    /// Checks that the orbit plus [`MIN_MARGIN`] fits inside the box.
    pub fn covers(&self, traj: &Trajectory) -> bool {
        let lo = traj.samples.iter().map(|s| s.x_bar).fold(f64::INFINITY, f64::min);
        let hi = traj.samples.iter().map(|s| s.x_bar).fold(f64::NEG_INFINITY, f64::max);
        lo - MIN_MARGIN >= self.x_min_bar && hi + MIN_MARGIN <= self.x_max_bar
    }
}

/// `values[i * n + j] = rho(x_i, x_j) dx`, so the diagonal sums to the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrixGrid {
    pub n: usize,
    pub values: Vec<Complex64>,
}

impl DensityMatrixGrid {
    pub fn from_wavefunction(psi: &[Complex64]) -> Self {
        let n = psi.len();
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, row) in values.chunks_mut(n).enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = psi[i] * psi[j].conj() / norm;
            }
        }
        Self { n, values }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).re).collect()
    }

    /// Overlap `Tr(rho sigma)`.
    pub fn overlap(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a * b.conj()).re).sum()
    }

    /// Means `(x, p)` and the symmetrized covariance in `(x_bar, p_bar)`.
    pub fn moments(&self, grid: &GridSpec) -> (f64, f64, CovarianceState) {
        let n = self.n;
        let x = grid.positions();
        let k = grid.wavenumbers();
        let tr = self.trace();
        let (mut mx, mut mx2) = (0.0, 0.0);
        for (i, xi) in x.iter().enumerate() {
            let d = self.get(i, i).re;
            mx += xi * d;
            mx2 += xi * xi * d;
        }
        mx /= tr;
        mx2 /= tr;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        // k rho and k^2 rho, column by column
        let (mut mk, mut mk2, mut mxk) = (0.0, 0.0, 0.0);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        let mut col2 = vec![Complex64::new(0.0, 0.0); n];
        let mut krho_diag = vec![Complex64::new(0.0, 0.0); n];
        let mut k2rho_diag = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.get(i, j);
            }
            fwd.process(&mut col);
            for i in 0..n {
                col2[i] = col[i] * k[i] * k[i] / n as f64;
                col[i] *= k[i] / n as f64;
            }
            inv.process(&mut col);
            inv.process(&mut col2);
            krho_diag[j] = col[j];
            k2rho_diag[j] = col2[j];
        }
        for i in 0..n {
            mk += krho_diag[i].re;
            mk2 += k2rho_diag[i].re;
            mxk += x[i] * krho_diag[i].re;
        }
        mk /= tr;
        mk2 /= tr;
        mxk /= tr;
        // Tr(k rho x) = <x k>; its real part is the symmetrized product
        let cxx = mx2 - mx * mx;
        let cpp = 4.0 * (mk2 - mk * mk);
        let cxp = 2.0 * (mxk - mx * mk);
        (mx, 2.0 * mk, CovarianceState::new(cxx, cxp, cpp))
    }
}

/// Ground state of the preparation trap centred at `x_bar = 0`.
pub fn initial_ground_state(grid: &GridSpec) -> Result<DensityMatrixGrid> {
    grid.validate()?;
    let edge = grid.x_min_bar.abs().min(grid.x_max_bar.abs());
    let tail = (-0.5 * edge * edge).exp() / (2.0 * PI).sqrt();
    if grid.x_min_bar >= 0.0 || grid.x_max_bar <= 0.0 || tail >= 1e-16 {
        return Err(Error::Config(format!(
            "box [{}, {}] clips the initial ground state",
            grid.x_min_bar, grid.x_max_bar
        )));
    }
    let psi: Vec<Complex64> = grid.positions().iter().map(|&x| Complex64::new((-0.25 * x * x).exp(), 0.0)).collect();
    Ok(DensityMatrixGrid::from_wavefunction(&psi))
}

struct Transforms {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Transforms {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn rows(&self, data: &mut [Complex64], forward: bool) {
        let fft = if forward { &self.fwd } else { &self.inv };
        let rows_per_chunk = 32.min(self.n);
        data.par_chunks_mut(self.n * rows_per_chunk).for_each(|chunk| fft.process(chunk));
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// `rho -> U rho U^dagger` with `U` diagonal in wavenumber, `U_k = f[k]`.
fn apply_kinetic(rho: &mut [Complex64], f: &[Complex64], tr: &Transforms) {
    let n = tr.n;
    tr.rows(rho, true);
    transpose(rho, n);
    tr.rows(rho, true);
    // rho now holds the transform with the row index on the second axis
    let scale = 1.0 / (n * n) as f64;
    rho.par_chunks_mut(n).enumerate().for_each(|(b, row)| {
        let fb = f[b].conj() * scale;
        for (a, v) in row.iter_mut().enumerate() {
            *v *= f[a] * fb;
        }
    });
    tr.rows(rho, false);
    transpose(rho, n);
    tr.rows(rho, false);
}

/// Potential phase `a_i conj(a_j)` and dephasing `e[|i - j|]` in one pass.
fn apply_local(rho: &mut [Complex64], n: usize, a: &[Complex64], e: &[f64]) {
    rho.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let ai = a[i];
        for (j, v) in row.iter_mut().enumerate() {
            *v *= ai * a[j].conj() * e[i.abs_diff(j)];
        }
    });
}

fn phase_vector(values: &[f64], scale: f64) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::from_polar(1.0, -v * scale)).collect()
}

/// Dephasing rate along the classical path, `Gamma_f + gamma0`.
pub type RateProfile<'a> = Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>;

/// Split-step propagator holding the current state.
pub struct Propagator<'a> {
    grid: GridSpec,
    tr: Transforms,
    x: Vec<f64>,
    half_kinetic: Vec<Complex64>,
    full_kinetic: Vec<Complex64>,
    potential_phase: Vec<Complex64>,
    rate: RateProfile<'a>,
    rho: DensityMatrixGrid,
    steps: usize,
    checked_trace: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(
        grid: GridSpec,
        potential: impl Fn(f64) -> f64,
        rate: RateProfile<'a>,
        rho: DensityMatrixGrid,
    ) -> Result<Self> {
        grid.validate()?;
        if rho.n != grid.n_points {
            return Err(Error::GridMismatch(format!("state has {} points, grid {}", rho.n, grid.n_points)));
        }
        let x = grid.positions();
        let k = grid.wavenumbers();
        let v: Vec<f64> = x.iter().map(|&xi| 0.5 * potential(xi)).collect();
        let (vmin, vmax) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
        let phase = (vmax - vmin) * grid.dt_bar;
        if phase > MAX_PHASE_STEP {
            return Err(Error::Config(format!(
                "potential phase per step {phase:.3} rad exceeds {MAX_PHASE_STEP}; reduce dt_bar"
            )));
        }
        let k2: Vec<f64> = k.iter().map(|q| q * q).collect();
        let checked_trace = rho.trace();
        Ok(Self {
            half_kinetic: phase_vector(&k2, 0.5 * grid.dt_bar),
            full_kinetic: phase_vector(&k2, grid.dt_bar),
            potential_phase: phase_vector(&v, grid.dt_bar),
            tr: Transforms::new(grid.n_points),
            grid,
            x,
            rate,
            rho,
            steps: 0,
            checked_trace,
        })
    }

    /// Propagator for `pot` with the dephasing rate taken on the classical path.
    pub fn for_potential(
        grid: GridSpec,
        pot: QuarticPotential,
        noise: NoiseModel,
        traj: &'a Trajectory,
    ) -> Result<Self> {
        let rho = initial_ground_state(&grid)?;
        let rate = move |tau: f64| dephasing_rate(&pot, &noise, traj.x_at(tau)) + noise.gamma0_bar;
        Self::new(grid, |x| potential_value(&pot, x), Box::new(rate), rho)
    }

    pub fn tau(&self) -> f64 {
        self.steps as f64 * self.grid.dt_bar
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self) -> &DensityMatrixGrid {
        &self.rho
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn local_step(&mut self, tau_mid: f64) -> Result<()> {
        let gamma = (self.rate)(tau_mid);
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Instability(format!("dephasing rate {gamma} at tau = {tau_mid}")));
        }
        let dx = self.grid.dx();
        let c = 0.5 * gamma * self.grid.dt_bar * dx * dx;
        let e: Vec<f64> = (0..self.grid.n_points).map(|m| (-c * (m * m) as f64).exp()).collect();
        apply_local(&mut self.rho.values, self.grid.n_points, &self.potential_phase, &e);
        Ok(())
    }

    /// Advances `count` Strang steps, merging adjacent half kinetic steps.
    pub fn advance(&mut self, count: usize) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        let dt = self.grid.dt_bar;
        apply_kinetic(&mut self.rho.values, &self.half_kinetic, &self.tr);
        for s in 0..count {
            self.local_step((self.steps as f64 + 0.5) * dt)?;
            let f = if s + 1 == count { &self.half_kinetic } else { &self.full_kinetic };
            apply_kinetic(&mut self.rho.values, f, &self.tr);
            self.steps += 1;
            if self.steps % TRACE_CHECK_EVERY == 0 {
                let t = self.rho.trace();
                if !t.is_finite() || (t - self.checked_trace).abs() > TRACE_DRIFT_LIMIT {
                    return Err(Error::Instability(format!(
                        "trace drifted from {} to {t} by step {}; reduce dt_bar",
                        self.checked_trace, self.steps
                    )));
                }
                self.checked_trace = t;
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub n: usize,
    pub x_min: f64,
    pub dx: f64,
    pub p_min: f64,
    pub dp: f64,
    /// `values[i * n + l] = W(x_i, p_l)`, normalized so `sum W dx dp = 1`.
    pub values: Vec<f64>,
    pub negativity_volume: f64,
}

impl WignerGrid {
    pub fn at(&self, i: usize, l: usize) -> f64 {
        self.values[i * self.n + l]
    }

    pub fn p_max(&self) -> f64 {
        self.p_min + (self.n - 1) as f64 * self.dp
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + (self.n - 1) as f64 * self.dx
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sum_p W dp` for every `x_i`.
    pub fn position_marginal(&self) -> Vec<f64> {
        self.values.chunks(self.n).map(|row| row.iter().sum::<f64>() * self.dp).collect()
    }
}

/// `rho(x + dx/2, x' + dx/2)` by band-limited interpolation along both axes.
fn half_shifted(rho: &DensityMatrixGrid, grid: &GridSpec, tr: &Transforms) -> Vec<Complex64> {
    let n = rho.n;
    let dx = grid.dx();
    let f: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .enumerate()
        .map(|(j, &k)| if j == n / 2 { Complex64::new(0.0, 0.0) } else { Complex64::from_polar(1.0 / n as f64, k * dx / 2.0) })
        .collect();
    let mut out = rho.values.clone();
    for _ in 0..2 {
        tr.rows(&mut out, true);
        out.par_chunks_mut(n).for_each(|row| row.iter_mut().zip(&f).for_each(|(v, s)| *v *= s));
        tr.rows(&mut out, false);
        transpose(&mut out, n);
    }
    out
}

/// Wigner function on the stored positions and `n` momenta `p_bar = 2k`.
pub fn wigner_transform(rho: &DensityMatrixGrid, grid: &GridSpec) -> Result<WignerGrid> {
    let n = rho.n;
    if n != grid.n_points {
        return Err(Error::GridMismatch(format!("state has {n} points, grid {}", grid.n_points)));
    }
    let tr = Transforms::new(n);
    let shifted = half_shifted(rho, grid, &tr);
    let half = n as i64 / 2;
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let i = i as i64;
        let mut f = vec![Complex64::new(0.0, 0.0); n];
        for m in -half..half {
            let (p, q, src) = if m % 2 == 0 {
                (i + m / 2, i - m / 2, &rho.values)
            } else {
                let h = (m - 1).div_euclid(2);
                (i + h, i - h - 1, &shifted)
            };
            if (0..n as i64).contains(&p) && (0..n as i64).contains(&q) {
                // relative offset m stored in FFT order
                f[m.rem_euclid(n as i64) as usize] = src[p as usize * n + q as usize];
            }
        }
        tr.fwd.process(&mut f);
        // frequencies reordered so momentum increases along the row
        for (l, o) in out.iter_mut().enumerate() {
            *o = f[(l + n / 2) % n].re;
        }
    });
    let dx = grid.dx();
    let dp = 4.0 * PI / (n as f64 * dx);
    let total: f64 = values.iter().sum::<f64>() * dx * dp;
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Instability(format!("Wigner normalization {total}")));
    }
    values.iter_mut().for_each(|v| *v /= total);
    let mut w = WignerGrid {
        n,
        x_min: grid.x_min_bar,
        dx,
        p_min: -(n as f64 / 2.0) * dp,
        dp,
        values,
        negativity_volume: 0.0,
    };
    w.negativity_volume = negativity_volume(&w);
    Ok(w)
}

/// `sum |W| dx dp - 1`, with values within `1e-8` of zero reported as zero.
pub fn negativity_volume(w: &WignerGrid) -> f64 {
    let abs: f64 = w.values.iter().map(|v| v.abs()).sum::<f64>() * w.dx * w.dp;
    let n = abs - 1.0;
    if n.abs() < 1e-8 {
        0.0
    } else {
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QsimRow {
    pub tau: f64,
    pub negativity: f64,
    pub purity: f64,
    pub trace_error: f64,
}

/// Step indices for the requested times, rounded to the step grid.
pub fn sample_steps(grid: &GridSpec, sample_times: &[f64]) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("invalid sample time {t}")));
        }
        let k = (t / grid.dt_bar).round() as usize;
        if out.last().is_some_and(|&prev| k <= prev) {
            return Err(Error::Config(format!("sample time {t} does not advance the step count")));
        }
        out.push(k);
    }
    Ok(out)
}

/// Negativity, purity and trace error at the sample times (rounded to whole steps).
pub fn simulate_negativity_trace(
    pot: &QuarticPotential,
    noise: &NoiseModel,
    traj: &Trajectory,
    grid: &GridSpec,
    sample_times: &[f64],
) -> Result<Vec<QsimRow>> {
    let steps = sample_steps(grid, sample_times)?;
    let mut prop = Propagator::for_potential(*grid, *pot, *noise, traj)?;
    let mut rows = Vec::with_capacity(steps.len());
    for k in steps {
        prop.advance(k - prop.steps())?;
        rows.push(sample_row(&prop)?);
    }
    Ok(rows)
}

pub fn sample_row(prop: &Propagator) -> Result<QsimRow> {
    let w = wigner_transform(prop.state(), prop.grid())?;
    Ok(QsimRow {
        tau: prop.tau(),
        negativity: w.negativity_volume,
        purity: prop.state().purity(),
        trace_error: prop.state().trace() - 1.0,
    })
}

pub fn write_qsim_csv<W: Write>(rows: &[QsimRow], out: W) -> Result<()> {
    crate::io::write_rows(rows, out)
}

pub fn read_qsim_csv<R: Read>(input: R) -> Result<Vec<QsimRow>> {
    crate::io::read_rows(input)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub tau: f64,
}

/// Raw little-endian `f64` values in row-major `(x, p)` order.
pub fn write_wigner_binary<W: Write>(w: &WignerGrid, mut out: W) -> Result<()> {
    let mut buf = Vec::with_capacity(w.values.len() * 8);
    for v in &w.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_wigner_binary<R: Read>(mut input: R, n: usize) -> Result<Vec<f64>> {
    let mut buf = Vec::with_capacity(n * n * 8);
    input.read_to_end(&mut buf)?;
    if buf.len() != n * n * 8 {
        return Err(Error::GridMismatch(format!("expected {} bytes, found {}", n * n * 8, buf.len())));
    }
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect())
}

pub fn snapshot_header(w: &WignerGrid, tau: f64) -> SnapshotHeader {
    SnapshotHeader { n: w.n, x_min: w.x_min, x_max: w.x_max(), p_min: w.p_min, p_max: w.p_max(), tau }
}

/// Writes `<stem>.bin` and `<stem>.json` into `dir`.
pub fn write_wigner_snapshot(w: &WignerGrid, tau: f64, dir: &Path, stem: &str) -> Result<()> {
    let bin = std::fs::File::create(dir.join(format!("{stem}.bin")))?;
    write_wigner_binary(w, std::io::BufWriter::new(bin))?;
    let json = serde_json::to_vec_pretty(&snapshot_header(w, tau))?;
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}
