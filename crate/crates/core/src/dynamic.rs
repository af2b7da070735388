//! Dynamic solve: implicit-Euler transcription of the finite-horizon problem
//! and its exact discrete adjoint, wrapped in a limited-memory BFGS iteration
//! over the control sequence.
//!
//! Transcription, for `N = T/dt` steps:
//!
//! ```text
//! x_{k+1} = x_k + dt (𝒜x_{k+1} + ℬu_k + f(x_{k+1}, u_k)),    k = 0..N−1
//! J_h(u)  = Σ_k dt · J(x_{k+1}, u_k)
//! ```
//!
//! The adjoint recursion is the exact transpose of the linearized step, so
//! the reduced gradient is exact up to the per-step Newton tolerance.
//! Adjoints are stored in state coordinates (see [`crate::model`]); the
//! entry `adjoints[k]` multiplies step `k` and `adjoints[N] = 0`.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{Banded, BandedLu};
use crate::model::{ControlSystem, CostFunctional, SolverInfo, Trajectory, Vector};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Time step; must divide the horizon into a whole number of steps.
    pub dt: f64,
    /// Convergence threshold on the L²(0,T;U) norm of the reduced gradient.
    pub grad_tol: f64,
    pub max_outer_iters: usize,
    pub lbfgs_memory: usize,
    /// Per-step Newton tolerance, relative to `1 + ‖x_k‖_X`.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// Initial control sequence (one entry per step); zeros when absent.
    pub u_init: Option<Vec<Vector>>,
}

impl Default for SolveOptions {
    fn default() -> SolveOptions {
        SolveOptions {
            dt: 0.05,
            grad_tol: 1e-6,
            max_outer_iters: 500,
            lbfgs_memory: 10,
            newton_tol: 1e-10,
            newton_max_iters: 25,
            u_init: None,
        }
    }
}

/// Factorization of a step matrix `I − dt·(𝒜 + f_x)`, banded when the model
/// declares a bandwidth.
enum StepFactor {
    Banded(BandedLu),
    Dense(nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    /// Dense factorization of the transposed matrix (adjoint pass).
    DenseT(nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl StepFactor {
    fn solve(&self, b: &Vector) -> Result<Vector> {
        match self {
            StepFactor::Banded(lu) => {
                let mut v = b.clone();
                lu.solve_in_place(&mut v);
                Ok(v)
            }
            StepFactor::Dense(lu) => lu
                .solve(b)
                .ok_or_else(|| Error::LinearAlgebra("singular step matrix".into())),
            StepFactor::DenseT(_) => Err(Error::LinearAlgebra("transpose-only factor".into())),
        }
    }

    fn solve_transpose(&self, b: &Vector) -> Result<Vector> {
        match self {
            StepFactor::Banded(lu) => {
                let mut v = b.clone();
                lu.solve_transpose_in_place(&mut v);
                Ok(v)
            }
            StepFactor::DenseT(lu) => lu
                .solve(b)
                .ok_or_else(|| Error::LinearAlgebra("singular step matrix".into())),
            StepFactor::Dense(_) => Err(Error::LinearAlgebra("forward-only factor".into())),
        }
    }
}

/// Banded template `I − dt·𝒜`; per-point Jacobian entries are added on top.
fn banded_template(sys: &ControlSystem, dt: f64, bw: usize) -> Banded {
    let n = sys.n_state();
    let a = sys.lin_state_op();
    let mut t = Banded::zeros(n, bw);
    for j in 0..n {
        let lo = j.saturating_sub(bw);
        let hi = (j + bw + 1).min(n);
        for i in lo..hi {
            let v = if i == j { 1.0 } else { 0.0 } - dt * a[(i, j)];
            if v != 0.0 || i == j {
                t.set(i, j, v);
            }
        }
    }
    t
}

fn assemble_step(
    sys: &ControlSystem,
    template: Option<&Banded>,
    x: &Vector,
    u: &Vector,
    dt: f64,
    transpose: bool,
) -> Result<StepFactor> {
    match template {
        Some(t) => {
            let mut mat = t.clone();
            if let Some(nl) = sys.nonlinearity() {
                if let Some(diag) = &nl.jac_x_diag {
                    let d = diag(x, u);
                    for i in 0..d.len() {
                        mat.add(i, i, -dt * d[i]);
                    }
                } else {
                    let fx = (nl.jac_x)(x, u);
                    let n = fx.nrows();
                    let bw = mat.bandwidth();
                    for j in 0..n {
                        let lo = j.saturating_sub(bw);
                        let hi = (j + bw + 1).min(n);
                        for i in lo..hi {
                            if fx[(i, j)] != 0.0 {
                                mat.add(i, j, -dt * fx[(i, j)]);
                            }
                        }
                    }
                }
            }
            Ok(StepFactor::Banded(BandedLu::factor(mat)?))
        }
        None => {
            let (a, _) = sys.linearize_at(x, u)?;
            let n = a.nrows();
            let m = DMatrix::<f64>::identity(n, n) - a * dt;
            let lu = if transpose {
                m.transpose().lu()
            } else {
                m.lu()
            };
            if transpose {
                Ok(StepFactor::DenseT(lu))
            } else {
                Ok(StepFactor::Dense(lu))
            }
        }
    }
}

/// Integrates the state forward with implicit Euler; `controls` has one
/// entry per step. Returns the `N+1` state nodes.
pub fn forward_solve(
    sys: &ControlSystem,
    x0: &Vector,
    controls: &[Vector],
    dt: f64,
    newton_tol: f64,
    newton_max_iters: usize,
) -> Result<Vec<Vector>> {
    if x0.len() != sys.n_state() {
        return Err(Error::DimensionMismatch("initial state length".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let template = sys.step_bandwidth().map(|bw| banded_template(sys, dt, bw));
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0.clone());
    for (k, u) in controls.iter().enumerate() {
        let xk = &states[k];
        let scale = 1.0 + sys.x_norm(xk);
        let mut y = xk.clone();
        let residual = |y: &Vector| -> Result<Vector> { Ok(y - xk - sys.eval_rhs(y, u)? * dt) };
        let mut f = residual(&y)?;
        let mut fact = assemble_step(sys, template.as_ref(), &y, u, dt, false)?;
        let mut prev = sys.x_norm(&f);
        let mut converged = false;
        for _ in 0..newton_max_iters {
            if prev <= newton_tol * scale {
                converged = true;
                break;
            }
            let delta = fact.solve(&f)?;
            y -= &delta;
            f = residual(&y)?;
            let cur = sys.x_norm(&f);
            if cur > 0.5 * prev {
                // chord iteration stalled; refresh the Jacobian at the
                // current iterate
                fact = assemble_step(sys, template.as_ref(), &y, u, dt, false)?;
            }
            prev = cur;
        }
        if !converged && prev > newton_tol * scale {
            return Err(Error::StiffStep(format!(
                "step {k}: Newton residual {prev:.3e} after {newton_max_iters} iterations (dt = {dt})"
            )));
        }
        states.push(y);
    }
    Ok(states)
}

/// `Σ_k dt · J(x_{k+1}, u_k)`
pub fn discrete_objective(cost: &CostFunctional, states: &[Vector], controls: &[Vector], dt: f64) -> f64 {
    controls
        .iter()
        .enumerate()
        .map(|(k, u)| dt * cost.value(&states[k + 1], u))
        .sum()
}

/// Backward sweep of the exact discrete adjoint. Returns `N+1` multipliers in
/// state coordinates with the terminal entry zero; `adjoints[k]` pairs with
/// step `k` (the interval `[t_k, t_{k+1}]`).
pub fn adjoint_solve(
    sys: &ControlSystem,
    cost: &CostFunctional,
    states: &[Vector],
    controls: &[Vector],
    dt: f64,
) -> Result<Vec<Vector>> {
    let n_steps = controls.len();
    if states.len() != n_steps + 1 {
        return Err(Error::DimensionMismatch("states/controls lengths".into()));
    }
    let template = sys.step_bandwidth().map(|bw| banded_template(sys, dt, bw));
    let wx = sys.state_inner();
    let mut adj = vec![Vector::zeros(sys.n_state()); n_steps + 1];
    for k in (0..n_steps).rev() {
        let xk1 = &states[k + 1];
        let uk = &controls[k];
        // (I − dt·A_k)ᵀ w = W_X λ_{k+1} − dt ∇_x J(x_{k+1}, u_k),  λ_k = W_X⁻¹ w
        let rhs = wx.apply(&adj[k + 1]) - cost.grad_x(xk1, uk) * dt;
        let fact = assemble_step(sys, template.as_ref(), xk1, uk, dt, true)?;
        let w = fact.solve_transpose(&rhs)?;
        adj[k] = wx.solve(&w);
    }
    Ok(adj)
}

/// Euclidean reduced gradient of the discrete objective:
/// `∂J_h/∂u_k = dt (∇_u J(x_{k+1}, u_k) − B_kᵀ W_X λ_k)`.
pub fn reduced_gradient(
    sys: &ControlSystem,
    cost: &CostFunctional,
    states: &[Vector],
    controls: &[Vector],
    adjoints: &[Vector],
    dt: f64,
) -> Result<Vec<Vector>> {
    let wx = sys.state_inner();
    let mut grad = Vec::with_capacity(controls.len());
    for (k, uk) in controls.iter().enumerate() {
        let xk1 = &states[k + 1];
        let (_, b) = sys.linearize_at(xk1, uk)?;
        let g = (cost.grad_u(xk1, uk) - b.transpose() * wx.apply(&adjoints[k])) * dt;
        grad.push(g);
    }
    Ok(grad)
}

/// Inner product `Σ_k dt ⟨a_k, b_k⟩_U` on control sequences.
fn seq_inner(sys: &ControlSystem, dt: f64, a: &[Vector], b: &[Vector]) -> f64 {
    let wu = sys.control_inner();
    a.iter().zip(b).map(|(x, y)| dt * wu.inner(x, y)).sum()
}

fn seq_axpy(alpha: f64, x: &[Vector], y: &mut [Vector]) {
    for (yk, xk) in y.iter_mut().zip(x) {
        yk.axpy(alpha, xk, 1.0);
    }
}

struct Evaluation {
    states: Vec<Vector>,
    adjoints: Vec<Vector>,
    /// Metric (Riesz) gradient: `W_U⁻¹ gᴱ_k / dt`, an element of L²(0,T;U).
    grad: Vec<Vector>,
    objective: f64,
    grad_norm: f64,
}

fn evaluate(
    sys: &ControlSystem,
    cost: &CostFunctional,
    x0: &Vector,
    u: &[Vector],
    opts: &SolveOptions,
    dt: f64,
) -> Result<Evaluation> {
    let states = forward_solve(sys, x0, u, dt, opts.newton_tol, opts.newton_max_iters)?;
    let adjoints = adjoint_solve(sys, cost, &states, u, dt)?;
    let grad_e = reduced_gradient(sys, cost, &states, u, &adjoints, dt)?;
    let wu = sys.control_inner();
    let grad: Vec<Vector> = grad_e.iter().map(|g| wu.solve(g) / dt).collect();
    let objective = discrete_objective(cost, &states, u, dt);
    let grad_norm = seq_inner(sys, dt, &grad, &grad).max(0.0).sqrt();
    Ok(Evaluation {
        states,
        adjoints,
        grad,
        objective,
        grad_norm,
    })
}

/// Solves the finite-horizon problem by L-BFGS on the control sequence.
///
/// The returned trajectory always carries the last accepted iterate; check
/// `info.converged`. Two-loop recursion, curvature pairs and the line-search
/// slope all live in the L²(0,T;U) metric, which keeps the iteration count
/// essentially mesh independent.
pub fn solve_ocp(
    sys: &ControlSystem,
    cost: &CostFunctional,
    x0: &Vector,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    if !(horizon > 0.0) || !(opts.dt > 0.0) {
        return Err(Error::InvalidArgument("horizon and dt must be positive".into()));
    }
    let steps_exact = horizon / opts.dt;
    let n_steps = steps_exact.round().max(1.0) as usize;
    if (steps_exact - n_steps as f64).abs() > 1e-12 * steps_exact.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "dt = {} does not divide the horizon {horizon} into whole steps",
            opts.dt
        )));
    }
    let dt = horizon / n_steps as f64;
    let m = sys.n_control();

    let mut u: Vec<Vector> = match &opts.u_init {
        Some(init) => {
            if init.len() != n_steps || init.iter().any(|v| v.len() != m) {
                return Err(Error::DimensionMismatch(format!(
                    "u_init must be {n_steps} vectors of length {m}"
                )));
            }
            init.clone()
        }
        None => vec![Vector::zeros(m); n_steps],
    };

    let mut ev = evaluate(sys, cost, x0, &u, opts, dt)?;
    let mut history = vec![ev.objective];
    let mut pairs: VecDeque<(Vec<Vector>, Vec<Vector>, f64)> = VecDeque::new();
    let mut converged = ev.grad_norm <= opts.grad_tol;
    let mut iterations = 0;

    'outer: while !converged && iterations < opts.max_outer_iters {
        iterations += 1;
        // two-loop recursion in the L²(U) metric
        let mut q: Vec<Vector> = ev.grad.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * seq_inner(sys, dt, s, &q);
            seq_axpy(-a, y, &mut q);
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = seq_inner(sys, dt, s, y) / seq_inner(sys, dt, y, y);
            for qk in q.iter_mut() {
                *qk *= gamma;
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let beta = rho * seq_inner(sys, dt, y, &q);
            seq_axpy(a - beta, s, &mut q);
        }
        let mut dir: Vec<Vector> = q.into_iter().map(|v| -v).collect();
        let mut slope = seq_inner(sys, dt, &ev.grad, &dir);
        if slope >= 0.0 {
            // not a descent direction: drop the memory and fall back
            pairs.clear();
            dir = ev.grad.iter().map(|g| -g).collect();
            slope = -ev.grad_norm * ev.grad_norm;
        }

        let alpha0 = if pairs.is_empty() {
            (1.0 / ev.grad_norm.max(1.0)).min(1.0)
        } else {
            1.0
        };
        let mut alpha = alpha0;
        let mut accepted: Option<(Vec<Vector>, Evaluation)> = None;
        while alpha * seq_inner(sys, dt, &dir, &dir).sqrt() >= 1e-14 {
            let mut ut = u.clone();
            seq_axpy(alpha, &dir, &mut ut);
            // stiff-step failures inside a trial are treated as a rejected
            // step, not a fatal error
            // the epsilon term keeps the search usable once the predicted
            // decrease falls below the objective's rounding noise
            let floor = 2.0 * f64::EPSILON * ev.objective.abs();
            match evaluate(sys, cost, x0, &ut, opts, dt) {
                Ok(evt) if evt.objective.is_finite()
                    && evt.objective <= ev.objective + 1e-4 * alpha * slope + floor =>
                {
                    accepted = Some((ut, evt));
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        let Some((ut, evt)) = accepted else {
            if pairs.is_empty() {
                break 'outer;
            }
            pairs.clear();
            continue;
        };

        let s: Vec<Vector> = dir.iter().map(|d| d * alpha).collect();
        let y: Vec<Vector> = evt
            .grad
            .iter()
            .zip(ev.grad.iter())
            .map(|(gn, go)| gn - go)
            .collect();
        let sy = seq_inner(sys, dt, &s, &y);
        let ss = seq_inner(sys, dt, &s, &s).sqrt();
        let yy = seq_inner(sys, dt, &y, &y).sqrt();
        if sy > 1e-12 * ss * yy {
            if pairs.len() == opts.lbfgs_memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        u = ut;
        ev = evt;
        history.push(ev.objective);
        converged = ev.grad_norm <= opts.grad_tol;
    }

    let grid: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
    let mut controls = u;
    controls.push(controls[n_steps - 1].clone());
    Ok(Trajectory {
        grid,
        dt,
        horizon,
        states: ev.states,
        controls,
        adjoints: ev.adjoints,
        info: SolverInfo {
            iterations,
            converged,
            objective: ev.objective,
            grad_norm: ev.grad_norm,
            objective_history: history,
        },
    })
}
