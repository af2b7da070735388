//! The scalar tracking problem against its closed-form two-point boundary
//! solution.

mod common;

use common::ScalarLqOracle;
use turnpike::dynamic::{solve_ocp, SolveOptions};
use turnpike::registry::{build_model, ModelConfig};
use turnpike::steady::{solve_steady, SteadyOptions};

#[test]
fn oracle_is_internally_consistent() {
    for horizon in [1.0, 5.0, 20.0, 80.0] {
        ScalarLqOracle::tracking(horizon).self_check();
    }
    // a shifted variant with different coefficients
    ScalarLqOracle::new(-0.5, 2.0, 3.0, 0.5, -1.0, 2.0, 12.0).self_check();
}

#[test]
fn steady_solver_matches_oracle_constants() {
    let model = build_model(&ModelConfig::LqTracking).unwrap();
    let steady = solve_steady(&model.system, &model.cost, &SteadyOptions::default()).unwrap();
    let oracle = ScalarLqOracle::tracking(10.0);
    assert!((steady.x_bar[0] - oracle.x_bar).abs() < 1e-10);
    assert!((steady.u_bar[0] - oracle.u_bar).abs() < 1e-10);
    assert!((steady.lambda_bar[0] - oracle.lambda_bar).abs() < 1e-10);
    assert!((oracle.mu - 2.0f64.sqrt()).abs() < 1e-15);
}

fn solve_errors(horizon: f64, dt: f64) -> (f64, f64, f64) {
    let model = build_model(&ModelConfig::LqTracking).unwrap();
    let opts = SolveOptions { dt, grad_tol: 1e-7, ..SolveOptions::default() };
    let traj = solve_ocp(&model.system, &model.cost, &model.x0, horizon, &opts).unwrap();
    assert!(traj.info.grad_norm < 1e-6, "grad_norm = {:.3e}", traj.info.grad_norm);
    let oracle = ScalarLqOracle::tracking(horizon);
    let mut ex = 0.0f64;
    let mut eu = 0.0f64;
    let mut el = 0.0f64;
    for (k, &t) in traj.grid.iter().enumerate() {
        let (x, u, lam) = oracle.at(t);
        ex = ex.max((traj.states[k][0] - x).abs());
        el = el.max((traj.adjoints[k][0] - lam).abs());
        if k < traj.n_steps() {
            eu = eu.max((traj.controls[k][0] - u).abs());
        }
    }
    (ex, eu, el)
}

#[test]
fn discretization_error_is_first_order_in_dt() {
    let (ex1, eu1, el1) = solve_errors(5.0, 0.02);
    let (ex2, eu2, el2) = solve_errors(5.0, 0.01);
    for (coarse, fine) in [(ex1, ex2), (eu1, eu2), (el1, el2)] {
        assert!(coarse < 0.05, "coarse error {coarse}");
        assert!(fine < 0.65 * coarse, "halving dt: {coarse} -> {fine}");
    }
}

#[test]
fn long_horizon_solution_stays_on_the_oracle() {
    let (ex, eu, el) = solve_errors(40.0, 0.02);
    assert!(ex < 2e-2, "state error {ex}");
    assert!(eu < 2e-2, "control error {eu}");
    assert!(el < 2e-2, "adjoint error {el}");
}
