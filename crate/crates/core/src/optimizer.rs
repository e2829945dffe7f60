//! Multi-start search over the quartic family.
//!
//! The four sign pairs are enumerated and only `d0 / d` is optimized continuously. Each
//! seed runs a trust-region ascent on a log-barrier objective, followed by a pattern
//! search on the raw merit at step `local_tol`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{constraint_report, integrate_trajectory, FeasibilityReport};
use crate::cubicity::{coherent_cubicity_merit, cubicity_trace, propagate_symplectic};
use crate::error::{Error, Result};
use crate::gaussian::{max_coherence_length, propagate_covariance};
use crate::model::{NoiseModel, QuarticPotential, SignPair, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeritKind {
    CoherenceLength,
    CoherentCubicity,
}

impl MeritKind {
    pub fn label(&self) -> &'static str {
        match self {
            MeritKind::CoherenceLength => "coherence_length",
            MeritKind::CoherentCubicity => "coherent_cubicity",
        }
    }
}

fn default_d0_range() -> [f64; 2] {
    [0.005, std::f64::consts::SQRT_2]
}
fn default_seeds() -> usize {
    2000
}
fn default_local_tol() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    1000
}
fn default_rel_tol() -> f64 {
    1e-10
}
fn default_abs_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationProblem {
    pub merit_kind: MeritKind,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub params: SystemParams,
    /// In units of `d`.
    #[serde(default = "default_d0_range")]
    pub d0_range: [f64; 2],
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_local_tol")]
    pub local_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
}

impl OptimizationProblem {
    pub fn new(merit_kind: MeritKind, noise: NoiseModel, params: SystemParams) -> Self {
        Self {
            merit_kind,
            noise,
            params,
            d0_range: default_d0_range(),
            seeds: default_seeds(),
            local_tol: default_local_tol(),
            max_iters: default_max_iters(),
            rng_seed: 0,
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.noise.validate()?;
        let [lo, hi] = self.d0_range;
        if !(lo > 0.0 && lo < hi && hi <= std::f64::consts::SQRT_2 * (1.0 + 1e-15)) {
            return Err(Error::Config(format!("d0_range [{lo}, {hi}] must lie in (0, sqrt 2]")));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if !(self.local_tol > 0.0 && self.local_tol < hi - lo) {
            return Err(Error::Config(format!("local_tol {} out of range", self.local_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config("integrator tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeritRecord {
    pub merit: f64,
    pub argmax_tau: f64,
    pub period_bar: f64,
    pub report: FeasibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleCandidate {
    pub reason: String,
    pub report: Option<FeasibilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CandidateOutcome {
    Feasible(MeritRecord),
    Infeasible(InfeasibleCandidate),
}

impl CandidateOutcome {
    pub fn merit(&self) -> f64 {
        match self {
            CandidateOutcome::Feasible(r) => r.merit,
            CandidateOutcome::Infeasible(_) => f64::NEG_INFINITY,
        }
    }

    pub fn record(&self) -> Option<&MeritRecord> {
        match self {
            CandidateOutcome::Feasible(r) => Some(r),
            CandidateOutcome::Infeasible(_) => None,
        }
    }
}

fn infeasible(reason: impl Into<String>, report: Option<FeasibilityReport>) -> CandidateOutcome {
    CandidateOutcome::Infeasible(InfeasibleCandidate { reason: reason.into(), report })
}

/// Merit of one potential over its first classical period. Integration failures are
/// reported as infeasible rather than returned as errors.
pub fn evaluate_candidate(pot: &QuarticPotential, problem: &OptimizationProblem) -> CandidateOutcome {
    let (rel, abs) = (problem.rel_tol, problem.abs_tol);
    let traj = match integrate_trajectory(pot, &problem.params, rel, abs) {
        Ok(t) => t,
        Err(e) => return infeasible(format!("trajectory: {e}"), None),
    };
    let report = constraint_report(&traj, &problem.params);
    if let Some(v) = report.first_violation() {
        return infeasible(v, Some(report));
    }
    let Some(period_bar) = traj.period_bar else {
        return infeasible("open orbit", Some(report));
    };
    let gauss = match propagate_covariance(pot, &problem.noise, &traj, rel, abs) {
        Ok(g) => g,
        Err(e) => return infeasible(format!("covariance: {e}"), Some(report)),
    };
    let (merit, argmax_tau) = match problem.merit_kind {
        MeritKind::CoherenceLength => max_coherence_length(&gauss),
        MeritKind::CoherentCubicity => {
            let frame = match propagate_symplectic(pot, &traj, rel, abs) {
                Ok(f) => f,
                Err(e) => return infeasible(format!("frame: {e}"), Some(report)),
            };
            match cubicity_trace(pot, &traj, &gauss, &frame) {
                Ok(c) => coherent_cubicity_merit(&c),
                Err(e) => return infeasible(format!("cubicity: {e}"), Some(report)),
            }
        }
    };
    if !merit.is_finite() {
        return infeasible("non-finite merit", Some(report));
    }
    CandidateOutcome::Feasible(MeritRecord { merit, argmax_tau, period_bar, report })
}

const LATTICE: f64 = 1e12;

fn lattice_key(d0_over_d: f64) -> i64 {
    (d0_over_d * LATTICE).round() as i64
}

/// Rounds `d0 / d` to the cache lattice so repeated requests see identical inputs.
pub fn snap_d0(d0_over_d: f64) -> f64 {
    lattice_key(d0_over_d) as f64 / LATTICE
}

struct Evaluator<'a> {
    problem: &'a OptimizationProblem,
    cache: Mutex<HashMap<(SignPair, i64), CandidateOutcome>>,
    requests: AtomicU64,
}

impl<'a> Evaluator<'a> {
    fn new(problem: &'a OptimizationProblem) -> Self {
        Self { problem, cache: Mutex::new(HashMap::new()), requests: AtomicU64::new(0) }
    }

    fn in_range(&self, x: f64) -> bool {
        let [lo, hi] = self.problem.d0_range;
        x >= lo && x <= hi
    }

    fn outcome(&self, pair: SignPair, x: f64) -> CandidateOutcome {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let key = (pair, lattice_key(x));
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&key) {
            return hit.clone();
        }
        let out = match QuarticPotential::candidate(pair, key.1 as f64 / LATTICE, &self.problem.params) {
            Ok(pot) => evaluate_candidate(&pot, self.problem),
            Err(e) => infeasible(e.to_string(), None),
        };
        self.cache.lock().expect("cache poisoned").insert(key, out.clone());
        out
    }

    fn merit(&self, pair: SignPair, x: f64) -> f64 {
        if !self.in_range(x) {
            return f64::NEG_INFINITY;
        }
        self.outcome(pair, x).merit()
    }

    /// `f / scale + mu * sum ln(normalized margin)`.
    fn barrier(&self, pair: SignPair, x: f64, mu: f64, scale: f64) -> f64 {
        if !self.in_range(x) {
            return f64::NEG_INFINITY;
        }
        match self.outcome(pair, x) {
            CandidateOutcome::Feasible(r) => {
                let p = &self.problem.params;
                let mt = r.report.period_margin / p.t_gas_bar;
                let ma = r.report.alpha_margin / p.alpha_bound;
                if mt <= 0.0 || ma <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                r.merit / scale + mu * (mt.ln() + ma.ln())
            }
            CandidateOutcome::Infeasible(_) => f64::NEG_INFINITY,
        }
    }
}

const BARRIER_STAGES: [f64; 4] = [1e-2, 1e-4, 1e-6, 1e-8];
/// Improvement required by the final pattern search.
pub const POLISH_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub a: i8,
    pub b: i8,
    pub start: f64,
    /// `None` when the seed itself was infeasible.
    pub end: Option<f64>,
    pub merit: Option<f64>,
    pub iterations: usize,
}

fn trust_region_stage(
    ev: &Evaluator,
    pair: SignPair,
    mut x: f64,
    mut radius: f64,
    mu: f64,
    scale: f64,
    iters: &mut usize,
) -> f64 {
    let tol = ev.problem.local_tol;
    let span = ev.problem.d0_range[1] - ev.problem.d0_range[0];
    let lo = ev.problem.d0_range[0];
    let hi = ev.problem.d0_range[1];
    while radius >= tol && *iters < ev.problem.max_iters {
        *iters += 1;
        let f0 = ev.barrier(pair, x, mu, scale);
        let (xm, xp) = (snap_d0(x - radius), snap_d0(x + radius));
        let fm = ev.barrier(pair, xm, mu, scale);
        let fp = ev.barrier(pair, xp, mu, scale);
        let mut best = (x, f0);
        for (xc, fc) in [(xm, fm), (xp, fp)] {
            if fc > best.1 {
                best = (xc, fc);
            }
        }
        let mut interior_ratio = None;
        if fm.is_finite() && fp.is_finite() {
            let g = (fp - fm) / (2.0 * radius);
            let h = (fp - 2.0 * f0 + fm) / (radius * radius);
            let s = if h < 0.0 { (-g / h).clamp(-radius, radius) } else { radius.copysign(g) };
            let xs = snap_d0((x + s).clamp(lo, hi));
            if xs != x && xs != xm && xs != xp {
                let fs = ev.barrier(pair, xs, mu, scale);
                let predicted = g * s + 0.5 * h * s * s;
                if predicted > 0.0 {
                    interior_ratio = Some((fs - f0) / predicted);
                }
                if fs > best.1 {
                    best = (xs, fs);
                }
            }
        }
        if best.0 == x {
            radius *= 0.25;
            continue;
        }
        let moved = (best.0 - x).abs();
        x = best.0;
        if moved >= 0.99 * radius {
            radius = (2.0 * radius).min(span);
        } else if interior_ratio.is_some_and(|r| r < 0.25) {
            radius *= 0.5;
        }
    }
    x
}

/// Pattern search on the raw merit. Stops when neither `x +- local_tol` improves by
/// more than [`POLISH_THRESHOLD`].
fn polish(ev: &Evaluator, pair: SignPair, mut x: f64, iters: &mut usize) -> f64 {
    let h = ev.problem.local_tol;
    let mut step = h;
    let mut fx = ev.merit(pair, x);
    while *iters < ev.problem.max_iters {
        *iters += 1;
        let xp = snap_d0(x + step);
        let xm = snap_d0(x - step);
        let fp = ev.merit(pair, xp);
        let fm = ev.merit(pair, xm);
        let (xc, fc) = if fp >= fm { (xp, fp) } else { (xm, fm) };
        if fc > fx + POLISH_THRESHOLD {
            x = xc;
            fx = fc;
            step *= 2.0;
        } else if step > h {
            step = (step * 0.5).max(h);
        } else {
            break;
        }
    }
    x
}

fn run_seed(ev: &Evaluator, pair: SignPair, start: f64) -> SeedRecord {
    let mut rec = SeedRecord { a: pair.a, b: pair.b, start, end: None, merit: None, iterations: 0 };
    let x0 = snap_d0(start);
    let f0 = ev.merit(pair, x0);
    if !f0.is_finite() {
        return rec;
    }
    let scale = if f0.abs() > 0.0 { f0.abs() } else { 1.0 };
    let span = ev.problem.d0_range[1] - ev.problem.d0_range[0];
    let mut x = x0;
    let mut iters = 0;
    for (k, &mu) in BARRIER_STAGES.iter().enumerate() {
        let radius = if k == 0 { 0.05 * span } else { 1e-2 * span };
        if ev.barrier(pair, x, mu, scale).is_finite() {
            x = trust_region_stage(ev, pair, x, radius, mu, scale, &mut iters);
        }
    }
    x = polish(ev, pair, x, &mut iters);
    rec.end = Some(x);
    rec.merit = Some(ev.merit(pair, x));
    rec.iterations = iters;
    rec
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignBest {
    pub a: i8,
    pub b: i8,
    pub feasible: bool,
    pub d0_over_d: Option<f64>,
    pub merit: Option<f64>,
    pub argmax_tau: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best: QuarticPotential,
    pub merit_value: f64,
    pub merit_time: f64,
    pub period_bar: f64,
    pub per_sign_best: Vec<SignBest>,
    pub feasibility: FeasibilityReport,
    pub evaluations: u64,
    pub seed_history: Vec<SeedRecord>,
}

impl OptimizationResult {
    pub fn d0_over_d(&self) -> f64 {
        self.best.d0_over_d()
    }
}

/// Seeds per sign pair; the remainder of `seeds / 4` goes to the first pairs.
pub fn seed_counts(seeds: usize) -> [usize; 4] {
    let base = seeds / 4;
    let rem = seeds % 4;
    std::array::from_fn(|k| base + usize::from(k < rem))
}

/// Seed positions in pair order, drawn from a ChaCha stream.
pub fn draw_seeds(problem: &OptimizationProblem) -> Vec<(SignPair, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(problem.rng_seed);
    let [lo, hi] = problem.d0_range;
    let counts = seed_counts(problem.seeds);
    let mut out = Vec::with_capacity(problem.seeds);
    for (pair, &n) in SignPair::ALL.iter().zip(&counts) {
        for _ in 0..n {
            out.push((*pair, rng.gen_range(lo..=hi)));
        }
    }
    out
}

fn pair_index(pair: SignPair) -> usize {
    SignPair::ALL.iter().position(|p| *p == pair).unwrap_or(usize::MAX)
}

/// `true` if `(m1, x1, p1)` ranks above `(m2, x2, p2)`: larger merit, then smaller d0,
/// then earlier sign pair.
fn ranks_above(m1: f64, x1: f64, p1: usize, m2: f64, x2: f64, p2: usize) -> bool {
    if m1 != m2 {
        return m1 > m2;
    }
    if x1 != x2 {
        return x1 < x2;
    }
    p1 < p2
}

pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let ev = Evaluator::new(problem);
    let seeds = draw_seeds(problem);
    let history: Vec<SeedRecord> = seeds.par_iter().map(|&(pair, x)| run_seed(&ev, pair, x)).collect();

    let mut per_sign: Vec<SignBest> = SignPair::ALL
        .iter()
        .map(|p| SignBest { a: p.a, b: p.b, feasible: false, d0_over_d: None, merit: None, argmax_tau: None })
        .collect();
    for rec in &history {
        let (Some(x), Some(m)) = (rec.end, rec.merit) else { continue };
        if !m.is_finite() {
            continue;
        }
        let pair = SignPair { a: rec.a, b: rec.b };
        let k = pair_index(pair);
        let slot = &mut per_sign[k];
        let better = match (slot.merit, slot.d0_over_d) {
            (Some(bm), Some(bx)) => ranks_above(m, x, k, bm, bx, k),
            _ => true,
        };
        if better {
            slot.feasible = true;
            slot.d0_over_d = Some(x);
            slot.merit = Some(m);
        }
    }
    let mut winner: Option<(usize, f64, f64)> = None;
    for (k, s) in per_sign.iter_mut().enumerate() {
        let (Some(x), Some(m)) = (s.d0_over_d, s.merit) else { continue };
        if let Some(r) = ev.outcome(SignPair::ALL[k], x).record() {
            s.argmax_tau = Some(r.argmax_tau);
        }
        if winner.map_or(true, |(wk, wx, wm)| ranks_above(m, x, k, wm, wx, wk)) {
            winner = Some((k, x, m));
        }
    }
    let (k, x, _) = winner.ok_or(Error::NoFeasibleCandidate)?;
    let pair = SignPair::ALL[k];
    let best = QuarticPotential::candidate(pair, x, &problem.params)?;
    let record = *ev.outcome(pair, x).record().ok_or(Error::NoFeasibleCandidate)?;
    Ok(OptimizationResult {
        best,
        merit_value: record.merit,
        merit_time: record.argmax_tau,
        period_bar: record.period_bar,
        per_sign_best: per_sign,
        feasibility: record.report,
        evaluations: ev.requests.load(Ordering::Relaxed),
        seed_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestEntry {
    pub a: i8,
    pub b: i8,
    pub d0_over_d: f64,
    pub merit: f64,
    pub argmax_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSummary {
    pub closed: bool,
    pub period_bar: f64,
    pub t_gas_bar: f64,
    pub period_margin: f64,
    pub max_abs_alpha2: f64,
    pub alpha_bound: f64,
    pub alpha_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub merit_kind: MeritKind,
    pub noise: NoiseModel,
    pub best: BestEntry,
    pub per_sign_best: Vec<SignBest>,
    pub constraints: ConstraintSummary,
    pub evaluations: u64,
    pub rng_seed: u64,
}

impl ResultDocument {
    pub fn new(problem: &OptimizationProblem, result: &OptimizationResult) -> Self {
        let pair = result.best.signs();
        Self {
            merit_kind: problem.merit_kind,
            noise: problem.noise,
            best: BestEntry {
                a: pair.a,
                b: pair.b,
                d0_over_d: result.d0_over_d(),
                merit: result.merit_value,
                argmax_tau: result.merit_time,
            },
            per_sign_best: result.per_sign_best.clone(),
            constraints: ConstraintSummary {
                closed: result.feasibility.closed,
                period_bar: result.period_bar,
                t_gas_bar: problem.params.t_gas_bar,
                period_margin: result.feasibility.period_margin,
                max_abs_alpha2: result.feasibility.max_abs_alpha2,
                alpha_bound: problem.params.alpha_bound,
                alpha_margin: result.feasibility.alpha_margin,
            },
            evaluations: result.evaluations,
            rng_seed: problem.rng_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s1: f64,
    pub s2: f64,
    pub merit_max: f64,
    pub a: i8,
    pub b: i8,
    pub d0_over_d: f64,
    pub argmax_tau: f64,
}

/// One optimization per `(s1, s2)` point, all other settings taken from `problem`.
pub fn sweep(problem: &OptimizationProblem, points: &[(f64, f64)]) -> Result<Vec<SweepRow>> {
    points
        .iter()
        .map(|&(s1, s2)| {
            let mut p = problem.clone();
            p.noise = NoiseModel::new(s1, s2, problem.noise.l_bar, problem.noise.gamma0_bar)?;
            let r = optimize(&p)?;
            let pair = r.best.signs();
            Ok(SweepRow {
                s1,
                s2,
                merit_max: r.merit_value,
                a: pair.a,
                b: pair.b,
                d0_over_d: r.d0_over_d(),
                argmax_tau: r.merit_time,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    crate::io::write_rows(rows, out)
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    crate::io::read_rows(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(kind: MeritKind) -> OptimizationProblem {
        OptimizationProblem::new(kind, NoiseModel::silent(1e6), SystemParams::wide())
    }

    #[test]
    fn seed_counts_cover_total() {
        assert_eq!(seed_counts(2000), [500; 4]);
        assert_eq!(seed_counts(7), [2, 2, 2, 1]);
        assert_eq!(seed_counts(1), [1, 0, 0, 0]);
    }

    #[test]
    fn seeds_are_reproducible_and_in_range() {
        let mut p = problem(MeritKind::CoherenceLength);
        p.seeds = 40;
        p.rng_seed = 9;
        let a = draw_seeds(&p);
        assert_eq!(a, draw_seeds(&p));
        assert!(a.iter().all(|(_, x)| *x >= p.d0_range[0] && *x <= p.d0_range[1]));
        assert_eq!(a[0].0, SignPair::DW);
        assert_eq!(a[39].0, SignPair::INVERTED);
    }

    #[test]
    fn dw_merit_peaks_before_half_period() {
        let p = problem(MeritKind::CoherenceLength);
        // 0.05 sits just past the period boundary at these parameters
        let pot = QuarticPotential::candidate(SignPair::DW, 0.06, &p.params).unwrap();
        let r = *evaluate_candidate(&pot, &p).record().unwrap();
        let frac = r.argmax_tau / r.period_bar;
        assert!(frac > 0.3 && frac < 0.5, "{frac}");
        assert!(r.merit > 1e3);
    }

    #[test]
    fn tiny_offset_is_infeasible_on_period() {
        let p = problem(MeritKind::CoherenceLength);
        let pot = QuarticPotential::candidate(SignPair::DW, 0.0005, &p.params).unwrap();
        match evaluate_candidate(&pot, &p) {
            CandidateOutcome::Infeasible(i) => {
                let rep = i.report.unwrap();
                assert!(rep.closed && !rep.period_ok, "{i:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn harmonic_candidate_is_stationary() {
        let mut p = problem(MeritKind::CoherenceLength);
        p.params.omega_ratio = 1.0;
        let pot = QuarticPotential::new(1, 0, 1.0, p.params.d_bar, 1.0).unwrap();
        let r = *evaluate_candidate(&pot, &p).record().unwrap();
        assert!((r.merit - 8f64.sqrt()).abs() < 1e-9, "{}", r.merit);
    }

    #[test]
    fn inverted_quartic_is_infeasible() {
        let p = problem(MeritKind::CoherenceLength);
        let pot = QuarticPotential::candidate(SignPair::INVERTED, 0.5, &p.params).unwrap();
        assert!(evaluate_candidate(&pot, &p).record().is_none());
    }

    #[test]
    fn ranking_breaks_ties() {
        assert!(ranks_above(2.0, 0.5, 3, 1.0, 0.1, 0));
        assert!(ranks_above(1.0, 0.1, 3, 1.0, 0.5, 0));
        assert!(ranks_above(1.0, 0.1, 0, 1.0, 0.1, 1));
        assert!(!ranks_above(1.0, 0.1, 1, 1.0, 0.1, 0));
    }

    #[test]
    fn snapping_is_idempotent() {
        let x = 0.123_456_789_012_345;
        assert_eq!(snap_d0(snap_d0(x)), snap_d0(x));
        assert!((snap_d0(x) - x).abs() <= 0.5e-12);
    }

    #[test]
    fn problem_defaults_from_json() {
        let p: OptimizationProblem = serde_json::from_str(r#"{"merit_kind":"coherent_cubicity"}"#).unwrap();
        assert_eq!(p.seeds, 2000);
        assert_eq!(p.local_tol, 1e-6);
        assert_eq!(p.d0_range, [0.005, std::f64::consts::SQRT_2]);
        assert!(serde_json::from_str::<OptimizationProblem>(r#"{"merit_kind":"x"}"#).is_err());
        assert!(serde_json::from_str::<OptimizationProblem>(r#"{"merit_kind":"coherence_length","bogus":1}"#).is_err());
    }

    #[test]
    fn small_run_finds_feasible_best() {
        let mut p = problem(MeritKind::CoherenceLength);
        p.seeds = 8;
        p.rng_seed = 3;
        let r = optimize(&p).unwrap();
        assert!(r.feasibility.feasible());
        assert!(r.feasibility.period_margin >= 0.0 && r.feasibility.alpha_margin >= 0.0);
        assert!(!r.per_sign_best[3].feasible);
        let again = evaluate_candidate(&r.best, &p).merit();
        assert!((again - r.merit_value).abs() <= 1e-9 * r.merit_value.abs().max(1.0));
    }
}
