//! Shared fixtures for the criterion benches.

use darkpot::qsim::{GridSpec, Propagator};
use darkpot::{
    integrate_trajectory, MeritKind, NoiseModel, OptimizationProblem, QuarticPotential, SignPair, SystemParams,
    Trajectory,
};

/// Coherent-cubicity search at full scale with moderate noise.
pub fn wide_problem(kind: MeritKind) -> OptimizationProblem {
    let params = SystemParams::wide();
    OptimizationProblem::new(kind, NoiseModel::new(1e-9, 1e-9, params.l_bar, 0.0).unwrap(), params)
}

pub fn wide_candidate(pair: SignPair, d0_over_d: f64) -> QuarticPotential {
    QuarticPotential::candidate(pair, d0_over_d, &SystemParams::wide()).unwrap()
}

/// Desk-scale double well and its orbit.
pub fn desk_orbit() -> (QuarticPotential, Trajectory) {
    let params = SystemParams::desk();
    let pot = QuarticPotential::candidate(SignPair::DW, 0.05, &params).unwrap();
    let traj = integrate_trajectory(&pot, &params, 1e-10, 1e-12).unwrap();
    (pot, traj)
}

pub fn desk_propagator<'a>(pot: QuarticPotential, traj: &'a Trajectory, n: usize) -> Propagator<'a> {
    let params = SystemParams::desk();
    let noise = NoiseModel::new(1e-3, 0.0, params.l_bar, 0.0).unwrap();
    let grid = GridSpec::around_orbit(traj, 12.0, n, 0.1).unwrap();
    Propagator::for_potential(grid, pot, noise, traj).unwrap()
}
