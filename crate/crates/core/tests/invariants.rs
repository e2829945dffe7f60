use darkpot::{
    cubicity_trace, integrate_trajectory, period_oracle, propagate_covariance, propagate_symplectic,
    NoiseModel, QuarticPotential, SignPair, SystemParams,
};
use darkpot::model::energy;
use proptest::prelude::*;

const REL: f64 = 1e-10;
const ABS: f64 = 1e-12;

fn candidate() -> impl Strategy<Value = (SignPair, f64)> {
    prop_oneof![(Just(SignPair::DW), 0.06..1.3f64), (Just(SignPair::IDW), 0.1..0.95f64)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn period_matches_quadrature((pair, d0) in candidate()) {
        let params = SystemParams::wide();
        let pot = QuarticPotential::candidate(pair, d0, &params).unwrap();
        let traj = integrate_trajectory(&pot, &params, REL, ABS).unwrap();
        let t = traj.require_period().unwrap();
        let oracle = period_oracle(&pot, &params).unwrap();
        prop_assert!((t - oracle).abs() / oracle < 1e-6, "{t} vs {oracle}");
    }

    #[test]
    fn gaussian_and_frame_invariants((pair, d0) in candidate(), s1 in 0.0..1e-8f64, s2 in 0.0..1e-8f64) {
        let params = SystemParams::wide();
        let noise = NoiseModel::new(s1, s2, params.l_bar, 0.0).unwrap();
        let pot = QuarticPotential::candidate(pair, d0, &params).unwrap();
        let traj = integrate_trajectory(&pot, &params, REL, ABS).unwrap();
        prop_assert!(traj.energy_drift() <= 10.0 * REL, "energy drift {}", traj.energy_drift());

        let gauss = propagate_covariance(&pot, &noise, &traj, REL, ABS).unwrap();
        for w in gauss.purity.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        for s in &gauss.states {
            prop_assert!(s.det() >= 1.0 - 1e-9);
        }

        let frame = propagate_symplectic(&pot, &traj, REL, ABS).unwrap();
        for s in &frame.states {
            prop_assert!((s.det() - 1.0).abs() < 1e-8);
        }
        let cub = cubicity_trace(&pot, &traj, &gauss, &frame).unwrap();
        for k in 0..cub.len() {
            let want = cub.beta_s[k].hypot(cub.beta_c[k]);
            prop_assert!((cub.kappa[k] - want).abs() <= 1e-14 * want.max(1.0));
            prop_assert!((cub.coherent_cubicity[k] - cub.kappa[k] * gauss.purity[k]).abs() <= 1e-12 * want.max(1.0));
        }
    }
}

#[test]
fn energy_is_zero_at_the_start() {
    let params = SystemParams::wide();
    let pot = QuarticPotential::candidate(SignPair::DW, 0.3, &params).unwrap();
    let traj = integrate_trajectory(&pot, &params, REL, ABS).unwrap();
    assert_eq!(traj.energy_bar, energy(&pot, 0.0, 0.0));
    let t = traj.require_period().unwrap();
    let end = traj.state_at(t);
    assert!(end.x_bar.abs() < 1e-6 * pot.d0_bar, "orbit does not close: x(T) = {}", end.x_bar);
}

#[test]
fn noiseless_purity_stays_one() {
    let params = SystemParams::wide();
    let pot = QuarticPotential::candidate(SignPair::IDW, 0.5, &params).unwrap();
    let traj = integrate_trajectory(&pot, &params, REL, ABS).unwrap();
    let gauss = propagate_covariance(&pot, &NoiseModel::silent(params.l_bar), &traj, REL, ABS).unwrap();
    assert!(gauss.purity.iter().all(|p| (p - 1.0).abs() < 1e-9));
}

#[test]
fn energy_holds_near_the_barrier_top() {
    let params = SystemParams::wide();
    for d0 in [0.0510, 0.06, 0.08] {
        let pot = QuarticPotential::candidate(SignPair::DW, d0, &params).unwrap();
        let traj = integrate_trajectory(&pot, &params, REL, ABS).unwrap();
        assert!(traj.energy_drift() <= 10.0 * REL, "{d0}: {}", traj.energy_drift());
    }
}
