use darkpot::cubicity::{cubic_prefactor, propagate_frame_profile};
use darkpot::gaussian::propagate_covariance_profile;
use darkpot::model::dephasing_rate;
use darkpot::ode::Tolerances;
use darkpot::optimizer::{evaluate_candidate, snap_d0};
use darkpot::qsim::{GridSpec, Propagator};
use darkpot::{
    coherent_cubicity_merit, cubicity_trace, integrate_trajectory, optimize, MeritKind, NoiseModel,
    OptimizationProblem, QuarticPotential, SignPair, SystemParams,
};

fn merit_max(noise: NoiseModel) -> f64 {
    let mut problem = OptimizationProblem::new(MeritKind::CoherenceLength, noise, SystemParams::wide());
    problem.seeds = 16;
    optimize(&problem).unwrap().merit_value
}

#[test]
fn merit_degrades_along_every_noise_axis() {
    let l = SystemParams::wide().l_bar;
    let grid = [1e-11, 1e-10, 1e-9, 1e-8, 1e-7];
    let along_s2: Vec<f64> = grid.iter().map(|&s| merit_max(NoiseModel::new(0.0, s, l, 0.0).unwrap())).collect();
    let along_g0: Vec<f64> = grid.iter().map(|&g| merit_max(NoiseModel::new(0.0, 0.0, l, g).unwrap())).collect();
    for series in [&along_s2, &along_g0] {
        for w in series.windows(2) {
            assert!(w[1] <= w[0], "{series:?}");
        }
    }
}

#[test]
fn best_is_a_local_maximum() {
    let params = SystemParams::wide();
    let noise = NoiseModel::new(1e-8, 0.0, params.l_bar, 0.0).unwrap();
    let mut problem = OptimizationProblem::new(MeritKind::CoherenceLength, noise, params);
    problem.seeds = 16;
    let result = optimize(&problem).unwrap();
    let pair = result.best.signs();
    let d0 = result.d0_over_d();
    let merit = |x: f64| {
        let pot = QuarticPotential::candidate(pair, snap_d0(x), &params).unwrap();
        evaluate_candidate(&pot, &problem).merit()
    };
    assert_eq!(merit(d0), result.merit_value);
    for x in [d0 - problem.local_tol, d0 + problem.local_tol] {
        assert!(merit(x) <= result.merit_value + 1e-9, "{x}: {} vs {}", merit(x), result.merit_value);
    }
    assert!(result.feasibility.period_margin >= 0.0 && result.feasibility.alpha_margin >= 0.0);
}

#[test]
fn cubicity_bounds_and_grid_refinement() {
    let params = SystemParams::wide();
    let noise = NoiseModel::new(1e-9, 1e-9, params.l_bar, 0.0).unwrap();
    let pot = QuarticPotential::candidate(SignPair::DW, 0.08, &params).unwrap();
    let traj = integrate_trajectory(&pot, &params, 1e-10, 1e-12).unwrap();
    let w2 = pot.w2();
    let tol = Tolerances::new(1e-10, 1e-12);
    let mut maxima = Vec::new();
    for n in [4096, 8192] {
        let times = traj.period_grid(n).unwrap();
        let gauss = propagate_covariance_profile(
            |t| w2 * pot.alpha2(traj.x_at(t)),
            |t| dephasing_rate(&pot, &noise, traj.x_at(t)),
            &times,
            tol,
        )
        .unwrap();
        let frame = propagate_frame_profile(
            |t| w2 * pot.alpha2(traj.x_at(t)),
            |t| pot.alpha3(traj.x_at(t)),
            cubic_prefactor(pot.omega_ratio),
            &times,
            tol,
        )
        .unwrap();
        let cub = cubicity_trace(&pot, &traj, &gauss, &frame).unwrap();
        assert!(cub.coherent_cubicity.iter().zip(&cub.kappa).all(|(k, kappa)| k <= kappa));
        assert!(cub.coherent_cubicity.iter().zip(&cub.kappa).skip(1).any(|(k, kappa)| k < kappa));
        maxima.push(coherent_cubicity_merit(&cub).0);
    }
    assert!((maxima[1] - maxima[0]).abs() < 1e-4 * maxima[0], "{maxima:?}");
}

#[test]
fn density_matrix_stays_hermitian_and_loses_purity() {
    let params = SystemParams::desk();
    let noise = NoiseModel::new(1e-3, 1e-4, params.l_bar, 0.0).unwrap();
    let pot = QuarticPotential::candidate(SignPair::DW, 0.05, &params).unwrap();
    let traj = integrate_trajectory(&pot, &params, 1e-10, 1e-12).unwrap();
    let grid = GridSpec::around_orbit(&traj, 12.0, 128, 0.15).unwrap();
    let mut prop = Propagator::for_potential(grid, pot, noise, &traj).unwrap();
    let mut purity = prop.state().purity();
    for _ in 0..40 {
        prop.advance(25).unwrap();
        assert!(prop.state().hermiticity_error() < 1e-10);
        let p = prop.state().purity();
        assert!(p <= purity * (1.0 + 1e-12), "purity rose from {purity} to {p} at {}", prop.tau());
        purity = p;
    }
    assert!(purity < 0.999);
}
