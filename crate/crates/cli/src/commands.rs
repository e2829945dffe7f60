//! The five subcommands. Each returns an exit code or a [`CliError`].

use std::path::Path;

use darkpot::classical::{trajectory_rows, write_trajectory_csv};
use darkpot::cubicity::{cubicity_rows, max_cubicity, write_cubicity_csv};
use darkpot::gaussian::{gaussian_rows, write_gaussian_csv};
use darkpot::optimizer::{optimize, write_sweep_csv, ResultDocument, SweepRow};
use darkpot::qsim::{
    sample_steps, snapshot_header, wigner_transform, write_qsim_csv, write_wigner_binary, GridSpec, Propagator,
    QsimRow, WignerGrid,
};
use darkpot::{
    coherent_cubicity_merit, constraint_report, cubicity_trace, integrate_trajectory, max_coherence_length,
    propagate_covariance, propagate_symplectic, FeasibilityReport, NoiseModel, QuarticPotential, SystemParams,
};
use serde::Serialize;

use crate::config::{Candidate, QsimSection, RunConfig, SweepAxis};
use crate::oracle::run_oracles;
use crate::output::{write_atomic, write_csv, write_json};
use crate::{CliError, EXIT_FAILURE, EXIT_OK};

/// Largest `d_bar` the density-matrix benchmark accepts.
pub const DESK_MAX_D_BAR: f64 = 512.0;

#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    pub candidate: Candidate,
    pub feasible: bool,
    pub violation: Option<String>,
    pub period_bar: Option<f64>,
    pub t_gas_bar: f64,
    pub max_xi: Option<f64>,
    pub argmax_xi: Option<f64>,
    #[serde(rename = "max_K")]
    pub max_k: Option<f64>,
    #[serde(rename = "argmax_K")]
    pub argmax_k: Option<f64>,
    pub max_kappa: Option<f64>,
    pub argmax_kappa: Option<f64>,
    pub constraints: Option<FeasibilityReport>,
}

pub fn cmd_trace(cfg: &RunConfig) -> Result<i32, CliError> {
    let dir = cfg.output_dir.as_path();
    let pot = cfg.candidate.potential(&cfg.params)?;
    let mut summary = TraceSummary {
        candidate: cfg.candidate,
        feasible: false,
        violation: None,
        period_bar: None,
        t_gas_bar: cfg.params.t_gas_bar,
        max_xi: None,
        argmax_xi: None,
        max_k: None,
        argmax_k: None,
        max_kappa: None,
        argmax_kappa: None,
        constraints: None,
    };
    let traj = match integrate_trajectory(&pot, &cfg.params, cfg.rel_tol, cfg.abs_tol) {
        Ok(t) => t,
        Err(e) => {
            let err = CliError::from(e);
            summary.violation = Some(err.to_string());
            write_json(dir, "summary.json", &summary)?;
            return Err(err);
        }
    };
    let report = constraint_report(&traj, &cfg.params);
    summary.constraints = Some(report);
    summary.period_bar = traj.period_bar;
    if let Some(v) = report.first_violation() {
        summary.violation = Some(v.to_owned());
        write_json(dir, "summary.json", &summary)?;
        return Err(CliError::Infeasible(v.to_owned()));
    }
    let gauss = propagate_covariance(&pot, &cfg.noise, &traj, cfg.rel_tol, cfg.abs_tol)?;
    let frame = propagate_symplectic(&pot, &traj, cfg.rel_tol, cfg.abs_tol)?;
    let cub = cubicity_trace(&pot, &traj, &gauss, &frame)?;
    let (xi, t_xi) = max_coherence_length(&gauss);
    let (k, t_k) = coherent_cubicity_merit(&cub);
    let (kappa, t_kappa) = max_cubicity(&cub);
    summary.feasible = true;
    summary.max_xi = Some(xi);
    summary.argmax_xi = Some(t_xi);
    summary.max_k = Some(k);
    summary.argmax_k = Some(t_k);
    summary.max_kappa = Some(kappa);
    summary.argmax_kappa = Some(t_kappa);

    let rows = trajectory_rows(&traj, &cfg.noise, &gauss.times);
    write_csv(dir, "trajectory.csv", |w| write_trajectory_csv(&rows, w))?;
    let rows = gaussian_rows(&gauss);
    write_csv(dir, "gaussian.csv", |w| write_gaussian_csv(&rows, w))?;
    let rows = cubicity_rows(&cub);
    write_csv(dir, "cubicity.csv", |w| write_cubicity_csv(&rows, w))?;
    write_json(dir, "summary.json", &summary)?;
    println!(
        "period {:.6} | max xi {:.6e} at {:.6} | max K {:.6e} at {:.6}",
        traj.period_bar.unwrap_or(f64::NAN),
        xi,
        t_xi,
        k,
        t_k
    );
    Ok(EXIT_OK)
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<i32, CliError> {
    let problem = cfg.problem();
    let result = optimize(&problem)?;
    let doc = ResultDocument::new(&problem, &result);
    write_json(&cfg.output_dir, "result.json", &doc)?;
    println!(
        "best {} at d0/d = {:.9} | merit {:.6e} at tau {:.6} | {} evaluations",
        result.best.signs(),
        result.d0_over_d(),
        result.merit_value,
        result.merit_time,
        result.evaluations
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub s1: f64,
    pub s2: f64,
    pub error: String,
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<i32, CliError> {
    if cfg.sweep.values.is_empty() {
        return Err(CliError::config("sweep.values is empty"));
    }
    let base = cfg.problem();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut last_err = None;
    for &v in &cfg.sweep.values {
        let (s1, s2) = match cfg.sweep.axis {
            SweepAxis::S1 => (v, cfg.noise.s2),
            SweepAxis::S2 => (cfg.noise.s1, v),
        };
        let mut p = base.clone();
        let outcome = NoiseModel::new(s1, s2, cfg.noise.l_bar, cfg.noise.gamma0_bar)
            .and_then(|n| {
                p.noise = n;
                optimize(&p)
            });
        match outcome {
            Ok(r) => {
                let pair = r.best.signs();
                println!("s1 {s1:e} s2 {s2:e}: {} at d0/d = {:.9}, merit {:.6e}", pair, r.d0_over_d(), r.merit_value);
                rows.push(SweepRow {
                    s1,
                    s2,
                    merit_max: r.merit_value,
                    a: pair.a,
                    b: pair.b,
                    d0_over_d: r.d0_over_d(),
                    argmax_tau: r.merit_time,
                });
            }
            Err(e) => {
                eprintln!("s1 {s1:e} s2 {s2:e}: {e}");
                failures.push(SweepFailure { s1, s2, error: e.to_string() });
                last_err = Some(e);
            }
        }
    }
    write_csv(&cfg.output_dir, "sweep.csv", |w| write_sweep_csv(&rows, w))?;
    write_json(&cfg.output_dir, "sweep_failures.json", &failures)?;
    match (rows.is_empty(), last_err) {
        (true, Some(e)) => Err(e.into()),
        _ => Ok(EXIT_OK),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QsimComparison {
    pub candidate: Candidate,
    pub period_bar: f64,
    #[serde(rename = "argmax_K")]
    pub argmax_k: f64,
    #[serde(rename = "max_K")]
    pub max_k: f64,
    #[serde(rename = "argmax_NW")]
    pub argmax_nw: f64,
    #[serde(rename = "max_NW")]
    pub max_nw: f64,
    pub grid: GridSpec,
}

pub struct QsimRun {
    pub comparison: QsimComparison,
    pub rows: Vec<QsimRow>,
    pub peak_wigner: Option<(f64, WignerGrid)>,
    pub final_wigner: Option<(f64, WignerGrid)>,
}

pub fn desk_guard(params: &SystemParams) -> Result<(), CliError> {
    if params.d_bar > DESK_MAX_D_BAR {
        return Err(CliError::config(format!(
            "d_bar = {} is too wide for a grid density matrix (limit {DESK_MAX_D_BAR}); use the desk profile, \
             e.g. --set params.d_bar=64 --set params.l_bar=64 --set params.omega_ratio=0.05",
            params.d_bar
        )));
    }
    Ok(())
}

/// Density-matrix run over one classical period next to the Gaussian `K` trace.
pub fn qsim_compare(
    candidate: Candidate,
    params: &SystemParams,
    noise: &NoiseModel,
    section: &QsimSection,
    rel_tol: f64,
    abs_tol: f64,
    keep_wigner: bool,
) -> Result<QsimRun, CliError> {
    desk_guard(params)?;
    let pot: QuarticPotential = candidate.potential(params)?;
    let traj = integrate_trajectory(&pot, params, rel_tol, abs_tol)?;
    let period = traj.require_period()?;
    let gauss = propagate_covariance(&pot, noise, &traj, rel_tol, abs_tol)?;
    let frame = propagate_symplectic(&pot, &traj, rel_tol, abs_tol)?;
    let (max_k, argmax_k) = coherent_cubicity_merit(&cubicity_trace(&pot, &traj, &gauss, &frame)?);

    let grid = match (section.x_min_bar, section.x_max_bar) {
        (Some(lo), Some(hi)) => GridSpec::new(section.n_points, lo, hi, section.dt_bar)?,
        (None, None) => GridSpec::around_orbit(&traj, section.margin, section.n_points, section.dt_bar)?,
        _ => return Err(CliError::config("set both qsim.x_min_bar and qsim.x_max_bar, or neither")),
    };
    if section.samples == 0 {
        return Err(CliError::config("qsim.samples must be at least 1"));
    }
    let times: Vec<f64> = (0..=section.samples).map(|i| period * i as f64 / section.samples as f64).collect();
    let steps = sample_steps(&grid, &times)?;
    let mut prop = Propagator::for_potential(grid, pot, *noise, &traj)?;
    let mut rows = Vec::with_capacity(steps.len());
    let mut peak: Option<(f64, WignerGrid)> = None;
    let mut last = None;
    for k in steps {
        prop.advance(k - prop.steps())?;
        let w = wigner_transform(prop.state(), prop.grid())?;
        let row = QsimRow {
            tau: prop.tau(),
            negativity: w.negativity_volume,
            purity: prop.state().purity(),
            trace_error: prop.state().trace() - 1.0,
        };
        if peak.as_ref().map_or(true, |(_, p)| w.negativity_volume > p.negativity_volume) {
            peak = Some((row.tau, w.clone()));
        }
        rows.push(row);
        if keep_wigner {
            last = Some((row.tau, w));
        }
    }
    let (argmax_nw, max_nw) = peak.as_ref().map(|(t, w)| (*t, w.negativity_volume)).unwrap_or((0.0, 0.0));
    Ok(QsimRun {
        comparison: QsimComparison { candidate, period_bar: period, argmax_k, max_k, argmax_nw, max_nw, grid },
        rows,
        peak_wigner: if keep_wigner { peak } else { None },
        final_wigner: last,
    })
}

fn write_snapshot(dir: &Path, stem: &str, tau: f64, w: &WignerGrid) -> Result<(), CliError> {
    write_atomic(dir, &format!("{stem}.bin"), |out| write_wigner_binary(w, out).map_err(CliError::from))?;
    write_json(dir, &format!("{stem}.json"), &snapshot_header(w, tau))?;
    Ok(())
}

pub fn cmd_qsim(cfg: &RunConfig) -> Result<i32, CliError> {
    let run = qsim_compare(
        cfg.candidate,
        &cfg.params,
        &cfg.noise,
        &cfg.qsim,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.qsim.snapshots,
    )?;
    let dir = cfg.output_dir.as_path();
    write_csv(dir, "qsim_trace.csv", |w| write_qsim_csv(&run.rows, w))?;
    write_json(dir, "qsim_summary.json", &run.comparison)?;
    if let Some((tau, w)) = &run.peak_wigner {
        write_snapshot(dir, "wigner_peak", *tau, w)?;
    }
    if let Some((tau, w)) = &run.final_wigner {
        write_snapshot(dir, "wigner_final", *tau, w)?;
    }
    let c = &run.comparison;
    println!(
        "period {:.4} | max N_W {:.6} at {:.4} | max K {:.6e} at {:.4}",
        c.period_bar, c.max_nw, c.argmax_nw, c.max_k, c.argmax_k
    );
    Ok(EXIT_OK)
}

pub fn cmd_oracle(cfg: &RunConfig) -> Result<i32, CliError> {
    let report = run_oracles(&cfg.oracle)?;
    print!("{}", report.table());
    write_json(&cfg.output_dir, "oracle.json", &report)?;
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_FAILURE })
}
