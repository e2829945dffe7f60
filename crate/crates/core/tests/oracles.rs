use darkpot::cubicity::cubic_prefactor;
use darkpot::ode::{integrate, Tolerances};
use darkpot::qsim::{GridSpec, Propagator};
use darkpot::{
    integrate_trajectory, propagate_covariance, propagate_symplectic, NoiseModel, QuarticPotential, SignPair,
    SystemParams,
};

const HBAR: f64 = 1.054_571_817e-34;

/// Cubic and quadratic Hamiltonian coefficients rebuilt from an SI potential.
#[test]
fn prefactors_from_si_units() {
    let m = 1e-18;
    let big = 2.0 * std::f64::consts::PI * 1e5;
    let small = 2.0 * std::f64::consts::PI * 37.0;
    let x0 = (HBAR / (2.0 * m * big)).sqrt();
    let d = 2e3 * x0;
    let d0 = 0.3 * d;
    let (a, b) = (-1.0, 1.0);
    let v = |x: f64| {
        let u = x - d0;
        0.5 * m * small * small * (a * u * u + b * u.powi(4) / (2.0 * d * d))
    };
    let w = small / big;
    let pot = QuarticPotential::new(-1, 1, d0 / x0, d / x0, w).unwrap();

    let x = 0.7 * d;
    let h = 1e-2 * d;
    let third = (v(x + 2.0 * h) - 2.0 * v(x + h) + 2.0 * v(x - h) - v(x - 2.0 * h)) / (2.0 * h * h * h);
    let second = (v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h);

    // V''' dx^3 / 6 with dx = x0, per hbar Omega, against prefactor * (3/2) alpha3
    let cubic_si = third * x0.powi(3) / (6.0 * HBAR * big);
    let cubic = cubic_prefactor(w) * 1.5 * pot.alpha3(x / x0);
    assert!((cubic_si - cubic).abs() < 1e-6 * cubic.abs(), "{cubic_si} vs {cubic}");

    let quad_si = second * x0 * x0 / (2.0 * HBAR * big);
    let quad = 0.25 * pot.w2() * pot.alpha2(x / x0);
    assert!((quad_si - quad).abs() < 1e-4 * quad.abs(), "{quad_si} vs {quad}");
}

/// The raw 2x2 frame with cubic integrals written without any angle variable.
#[test]
fn frame_matches_raw_matrix_route() {
    let params = SystemParams::wide();
    for (pair, d0) in [(SignPair::DW, 0.06), (SignPair::DW, 0.7), (SignPair::IDW, 0.4)] {
        let pot = QuarticPotential::candidate(pair, d0, &params).unwrap();
        let traj = integrate_trajectory(&pot, &params, 1e-12, 1e-14).unwrap();
        let frame = propagate_symplectic(&pot, &traj, 1e-12, 1e-14).unwrap();
        let w2 = pot.w2();
        let pref = cubic_prefactor(pot.omega_ratio);
        let rhs = |tau: f64, y: &[f64; 6]| {
            let x = traj.x_at(tau);
            let k = w2 * pot.alpha2(x);
            let drive = pref * 1.5 * pot.alpha3(x) * (y[0] * y[0] + y[1] * y[1]);
            [y[2], y[3], -k * y[0], -k * y[1], drive * y[1], drive * y[0]]
        };
        let t = *frame.times.last().unwrap();
        let raw = integrate(rhs, 0.0, [1.0, 0.0, 0.0, 1.0, 0.0, 0.0], t, Tolerances::new(1e-13, 1e-15)).unwrap();
        for &tau in frame.times.iter().step_by(256).chain(std::iter::once(&t)) {
            let y = raw.eval(tau);
            let s = frame.state_at(tau);
            let scale = y[..4].iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            for (got, want) in [s.sxx, s.sxp, s.spx, s.spp].iter().zip(&y[..4]) {
                assert!((got - want).abs() < 1e-6 * scale, "{pair:?} tau={tau}: {got} vs {want}");
            }
            let kappa = y[4].hypot(y[5]);
            assert!(
                (frame.kappa_at(tau) - kappa).abs() < 1e-6 * kappa.max(1e-3),
                "{pair:?} tau={tau}: {} vs {kappa}",
                frame.kappa_at(tau)
            );
        }
    }
}

/// Harmonic control: the split-step density matrix and the covariance ODE agree.
#[test]
fn harmonic_qsim_matches_gaussian_moments() {
    let params = SystemParams::desk();
    let noise = NoiseModel::new(1e-2, 1e-3, params.l_bar, 1e-4).unwrap();
    let pot = QuarticPotential::new(1, 0, 0.05 * params.d_bar, params.d_bar, params.omega_ratio).unwrap();
    let traj = integrate_trajectory(&pot, &params, 1e-11, 1e-13).unwrap();
    let gauss = propagate_covariance(&pot, &noise, &traj, 1e-11, 1e-13).unwrap();
    // position variance swings up to about 1 / w^2; the box spans six of those widths
    let grid = GridSpec::new(256, pot.d0_bar - 130.0, pot.d0_bar + 130.0, 0.025).unwrap();
    let mut prop = Propagator::for_potential(grid, pot, noise, &traj).unwrap();
    let period = traj.require_period().unwrap();
    let chunk = 200;
    let mut worst = 0.0f64;
    while prop.tau() + chunk as f64 * grid.dt_bar <= period {
        prop.advance(chunk).unwrap();
        let tau = prop.tau();
        let (mx, mp, c) = prop.state().moments(&grid);
        let want = gauss.state_at(tau);
        let centroid = traj.state_at(tau);
        worst = worst
            .max((c.cxx - want.cxx).abs() / want.cxx)
            .max((c.cpp - want.cpp).abs() / want.cpp)
            .max((c.cxp - want.cxp).abs() / want.cxx.max(want.cpp));
        assert!((mx - centroid.x_bar).abs() < 1e-3, "mean x at {tau}: {mx} vs {}", centroid.x_bar);
        assert!((mp - centroid.p_bar).abs() < 1e-3, "mean p at {tau}: {mp} vs {}", centroid.p_bar);
    }
    assert!(worst < 1e-4, "relative moment error {worst}");
}
