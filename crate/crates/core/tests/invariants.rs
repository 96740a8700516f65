use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use sle_core::initial::{DensityInit, WaveInit};
use sle_core::observables::{current_density, position_density};
use sle_core::solver::RunParams;
use sle_core::wigner::wigner_moments;
use sle_core::{
    l2_norm_discrete, make_phasegrid, make_xgrid, phase_mass, CouplingPotential, SleSolver,
    SleState, SolverOptions, Splitting, TransportScheme,
};

fn setup(h: f64, x0: f64, p: f64, options: SolverOptions) -> (SleSolver<f64>, SleState<f64>) {
    let xg = Arc::new(make_xgrid(-PI, PI, 128).unwrap());
    let pg = Arc::new(make_phasegrid(-2.0 * PI, 2.0 * PI, 48, -2.0 * PI, 2.0 * PI, 48).unwrap());
    let pot = Arc::new(CouplingPotential::quadratic_coupling(&xg, &pg).unwrap());
    let psi = WaveInit::Gaussian { x0, sigma: 0.3, p }
        .build(xg.clone(), h)
        .unwrap();
    let mu = DensityInit::Bump.build(pg.clone()).unwrap();
    (SleSolver::new(xg, pg, pot, options), SleState::new(psi, mu))
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn example_run_keeps_both_masses() {
    let (mut solver, state) = setup(1.0 / 16.0, 0.3, 0.5, SolverOptions::default());
    let out = solver.run(state, &RunParams::new(0.005, 0.2)).unwrap();
    assert_eq!(out.steps, 40);
    assert!(out.monitors.max_mass_psi_drift < 1e-12);
    assert!(out.monitors.max_mass_mu_drift < 1e-12);
    assert_eq!(out.monitors.energy_violations, 0);
    assert_eq!(out.monitors.oscillation_violations, 0);
    assert!((out.state.t - 0.2).abs() < 1e-14);
}

#[test]
fn single_precision_solver_conserves_mass() {
    let xg = Arc::new(make_xgrid(-PI as f32, PI as f32, 64).unwrap());
    let pg = Arc::new(make_phasegrid(-6.0f32, 6.0, 32, -6.0, 6.0, 32).unwrap());
    let pot = Arc::new(CouplingPotential::quadratic_coupling(&xg, &pg).unwrap());
    let psi = WaveInit::WkbCosh.build(xg.clone(), 1.0f32 / 8.0).unwrap();
    let mu = DensityInit::Bump.build(pg.clone()).unwrap();
    let mut solver = SleSolver::new(xg, pg, pot, SolverOptions::default());
    let out = solver
        .run(SleState::new(psi, mu), &RunParams::new(0.01f32, 0.1))
        .unwrap();
    assert!((l2_norm_discrete(&out.state.psi) - 1.0).abs() < 1e-5);
    assert!((phase_mass(&out.state.mu) - 1.0).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn masses_are_conserved(
        x0 in -1.0..1.0f64,
        p in -1.0..1.0f64,
        strang in any::<bool>(),
        heun in any::<bool>(),
        steps in 1usize..12,
    ) {
        let options = SolverOptions {
            splitting: if strang { Splitting::Strang } else { Splitting::Lie },
            transport: if heun { TransportScheme::Heun } else { TransportScheme::ForwardEuler },
            ..SolverOptions::default()
        };
        let (mut solver, mut state) = setup(1.0 / 16.0, x0, p, options);
        let m0 = phase_mass(&state.mu);
        for _ in 0..steps {
            solver.step(&mut state, 0.004).unwrap();
        }
        prop_assert!((l2_norm_discrete(&state.psi) - 1.0).abs() < 1e-12);
        prop_assert!((phase_mass(&state.mu) - m0).abs() < 1e-12);
        prop_assert!(state.mu.values().iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn wigner_low_moments_match_density_and_current(
        x0 in -1.0..1.0f64,
        p in -1.0..1.0f64,
        steps in 0usize..6,
    ) {
        let (mut solver, mut state) = setup(1.0 / 16.0, x0, p, SolverOptions::default());
        for _ in 0..steps {
            solver.step(&mut state, 0.004).unwrap();
        }
        let m = wigner_moments(&state.psi).unwrap();
        prop_assert!(rel_l2(&m.zeroth, &position_density(&state.psi)) < 1e-10);
        prop_assert!(rel_l2(&m.first, &current_density(&state.psi).unwrap()) < 1e-9);
        prop_assert!(m.max_imag_residue < 1e-10);
    }
}
