//! Problem data model: control systems, cost functionals, trajectories and
//! the first-order optimality residuals.
//!
//! Dynamics have the semilinear form `ẋ = 𝒜x + ℬu + f(x, u)` with `f` and its
//! Jacobians supplied per model. Inner products on the state space X, the
//! control space U and the adjoint measurement space Y are explicit SPD
//! weights; every norm in the crate is taken with respect to these.
//!
//! Adjoint variables are stored in state coordinates. The optimality system
//! is derived with the weighted pairing, so the adjoint operators are the
//! metric adjoints `A* = W_X⁻¹(𝒜+f_x)ᵀW_X` and `B* = W_U⁻¹(ℬ+f_u)ᵀW_X`, and
//! the sign convention is
//!
//! ```text
//! λ̇ = −A*λ + ∇_x J  (in X coordinates),  λ(T) = 0,
//! ∇_u J − B*λ = 0.
//! ```

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{metric_adjoint, op_norm, Weight};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub type VecFn = Box<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;
pub type MatFn = Box<dyn Fn(&Vector, &Vector) -> Matrix + Send + Sync>;
pub type DiagFn = Box<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;
pub type HessActionFn = Box<dyn Fn(&Vector, &Vector, &Vector) -> Matrix + Send + Sync>;
pub type ScalarFn = Box<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;

/// The semilinear term `f(x, u)` with its first-order Jacobians.
pub struct Nonlinearity {
    pub f: VecFn,
    pub jac_x: MatFn,
    pub jac_u: MatFn,
    /// Bandwidth of `jac_x` when it is band-limited (0 for diagonal);
    /// `None` disables the banded step-solver path.
    pub jac_x_bandwidth: Option<usize>,
    /// Fast path returning only the diagonal of `jac_x`; must agree with
    /// `jac_x` (checked in tests). Only meaningful with bandwidth 0.
    pub jac_x_diag: Option<DiagFn>,
    /// `∂/∂x [ jac_x(x,u)ᵀ w ]` for a fixed vector `w`. Supplying it gives the
    /// steady-state Newton solver an exact Jacobian; models with
    /// state-only `f` (like the cubic heat nonlinearity) have a closed form.
    pub hess_x_action: Option<HessActionFn>,
}

impl Nonlinearity {
    pub fn new(f: VecFn, jac_x: MatFn, jac_u: MatFn) -> Nonlinearity {
        Nonlinearity {
            f,
            jac_x,
            jac_u,
            jac_x_bandwidth: None,
            jac_x_diag: None,
            hess_x_action: None,
        }
    }
}

fn matrix_bandwidth(m: &Matrix) -> usize {
    let mut bw = 0usize;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// A finite-dimensional control system with explicit inner products.
pub struct ControlSystem {
    n_state: usize,
    n_control: usize,
    lin_state_op: Matrix,
    control_op: Matrix,
    nonlin: Option<Nonlinearity>,
    state_inner: Weight,
    control_inner: Weight,
    h1_inner: Option<Weight>,
    y_inner: Option<Weight>,
    step_bandwidth: Option<usize>,
}

impl ControlSystem {
    pub fn new(
        lin_state_op: Matrix,
        control_op: Matrix,
        state_inner: Weight,
        control_inner: Weight,
    ) -> Result<ControlSystem> {
        let n = lin_state_op.nrows();
        let m = control_op.ncols();
        if lin_state_op.ncols() != n {
            return Err(Error::DimensionMismatch("state operator must be square".into()));
        }
        if control_op.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "control operator has {} rows, expected {n}",
                control_op.nrows()
            )));
        }
        if state_inner.dim() != n || control_inner.dim() != m {
            return Err(Error::DimensionMismatch("inner-product weight dimensions".into()));
        }
        let bw = matrix_bandwidth(&lin_state_op);
        Ok(ControlSystem {
            n_state: n,
            n_control: m,
            step_bandwidth: Some(bw),
            lin_state_op,
            control_op,
            nonlin: None,
            state_inner,
            control_inner,
            h1_inner: None,
            y_inner: None,
        })
    }

    pub fn with_nonlinearity(mut self, nl: Nonlinearity) -> ControlSystem {
        self.step_bandwidth = match (self.step_bandwidth, nl.jac_x_bandwidth) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        self.nonlin = Some(nl);
        self
    }

    pub fn with_h1_inner(mut self, w: Weight) -> Result<ControlSystem> {
        if w.dim() != self.n_state {
            return Err(Error::DimensionMismatch("h1 weight dimension".into()));
        }
        self.h1_inner = Some(w);
        Ok(self)
    }

    pub fn with_y_inner(mut self, w: Weight) -> Result<ControlSystem> {
        if w.dim() != self.n_state {
            return Err(Error::DimensionMismatch("y weight dimension".into()));
        }
        self.y_inner = Some(w);
        Ok(self)
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }

    pub fn n_control(&self) -> usize {
        self.n_control
    }

    pub fn lin_state_op(&self) -> &Matrix {
        &self.lin_state_op
    }

    pub fn control_op(&self) -> &Matrix {
        &self.control_op
    }

    pub fn nonlinearity(&self) -> Option<&Nonlinearity> {
        self.nonlin.as_ref()
    }

    pub fn state_inner(&self) -> &Weight {
        &self.state_inner
    }

    pub fn control_inner(&self) -> &Weight {
        &self.control_inner
    }

    pub fn h1_inner(&self) -> Option<&Weight> {
        self.h1_inner.as_ref()
    }

    /// Measurement weight for adjoint-valued series; defaults to the state
    /// inner product.
    pub fn y_inner(&self) -> &Weight {
        self.y_inner.as_ref().unwrap_or(&self.state_inner)
    }

    /// Combined bandwidth of `𝒜 + f_x`, when the model declares one.
    pub fn step_bandwidth(&self) -> Option<usize> {
        self.step_bandwidth
    }

    pub(crate) fn check_args(&self, x: &Vector, u: &Vector) -> Result<()> {
        if x.len() != self.n_state || u.len() != self.n_control {
            return Err(Error::DimensionMismatch(format!(
                "state/control lengths ({}, {}) vs ({}, {})",
                x.len(),
                u.len(),
                self.n_state,
                self.n_control
            )));
        }
        Ok(())
    }

    /// `𝒜x + ℬu + f(x, u)`
    pub fn eval_rhs(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        self.check_args(x, u)?;
        let mut r = &self.lin_state_op * x + &self.control_op * u;
        if let Some(nl) = &self.nonlin {
            r += (nl.f)(x, u);
        }
        Ok(r)
    }

    /// Frozen linearization `(𝒜 + f_x, ℬ + f_u)` at a point.
    pub fn linearize_at(&self, x: &Vector, u: &Vector) -> Result<(Matrix, Matrix)> {
        self.check_args(x, u)?;
        let mut a = self.lin_state_op.clone();
        let mut b = self.control_op.clone();
        if let Some(nl) = &self.nonlin {
            a += (nl.jac_x)(x, u);
            b += (nl.jac_u)(x, u);
        }
        Ok((a, b))
    }

    /// Metric adjoint of the frozen state operator, in state coordinates.
    pub fn a_star_at(&self, x: &Vector, u: &Vector) -> Result<Matrix> {
        let (a, _) = self.linearize_at(x, u)?;
        Ok(metric_adjoint(&a, &self.state_inner, &self.state_inner))
    }

    /// Metric adjoint of the frozen control operator (`m×n`).
    pub fn b_star_at(&self, x: &Vector, u: &Vector) -> Result<Matrix> {
        let (_, b) = self.linearize_at(x, u)?;
        Ok(metric_adjoint(&b, &self.control_inner, &self.state_inner))
    }

    pub fn x_norm(&self, v: &Vector) -> f64 {
        self.state_inner.norm(v)
    }

    pub fn u_norm(&self, v: &Vector) -> f64 {
        self.control_inner.norm(v)
    }

    pub fn y_norm(&self, v: &Vector) -> f64 {
        self.y_inner().norm(v)
    }

    /// H¹-type norm when the model supplies one, else the X norm.
    pub fn h1_norm(&self, v: &Vector) -> f64 {
        match &self.h1_inner {
            Some(w) => w.norm(v),
            None => self.state_inner.norm(v),
        }
    }

    /// Central finite-difference consistency check of the supplied Jacobians
    /// (and the diagonal fast path when present) at `points` random states.
    /// Returns the largest relative error observed.
    pub fn validate_derivatives(&self, seed: u64, points: usize) -> Result<f64> {
        let Some(nl) = &self.nonlin else {
            return Ok(0.0);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..points {
            let x = Vector::from_fn(self.n_state, |_, _| rng.random_range(-1.0..1.0));
            let u = Vector::from_fn(self.n_control, |_, _| rng.random_range(-1.0..1.0));
            let dx = Vector::from_fn(self.n_state, |_, _| rng.random_range(-1.0..1.0)).normalize();
            let du = Vector::from_fn(self.n_control, |_, _| rng.random_range(-1.0..1.0));
            let du = if du.norm() > 0.0 { du.normalize() } else { du };

            let hx = 1e-6 * (1.0 + x.norm());
            let fp = (nl.f)(&(&x + &dx * hx), &u);
            let fm = (nl.f)(&(&x - &dx * hx), &u);
            let fd = (fp - fm) / (2.0 * hx);
            let jd = (nl.jac_x)(&x, &u) * &dx;
            let scale = jd.norm().max(1e-8);
            worst = worst.max((fd - &jd).norm() / scale);

            if self.n_control > 0 {
                let hu = 1e-6 * (1.0 + u.norm());
                let fp = (nl.f)(&x, &(&u + &du * hu));
                let fm = (nl.f)(&x, &(&u - &du * hu));
                let fd = (fp - fm) / (2.0 * hu);
                let jd = (nl.jac_u)(&x, &u) * &du;
                let scale = jd.norm().max(1e-8);
                worst = worst.max((fd - jd).norm() / scale);
            }

            if let Some(diag) = &nl.jac_x_diag {
                let full = (nl.jac_x)(&x, &u);
                let d = diag(&x, &u);
                let err = (full.diagonal() - d).amax();
                worst = worst.max(err / full.amax().max(1e-8));
            }
        }
        Ok(worst)
    }
}

/// Quadratic tracking data `½‖x − x_d‖²_Q + ½‖u − u_d‖²_R`.
pub struct QuadraticTracking {
    pub q: Matrix,
    pub x_d: Vector,
    pub r: Matrix,
    pub u_d: Vector,
}

/// Running cost `J(x, u)` with Euclidean-coordinate gradients.
pub struct CostFunctional {
    value: ScalarFn,
    grad_x: VecFn,
    grad_u: VecFn,
    quadratic: Option<QuadraticTracking>,
}

impl CostFunctional {
    /// Builds the quadratic tracking cost; `q` PSD (symmetric to 1e-12) and
    /// `r` PD are validated.
    pub fn quadratic(q: Matrix, x_d: Vector, r: Matrix, u_d: Vector) -> Result<CostFunctional> {
        let n = q.nrows();
        let m = r.nrows();
        if q.ncols() != n || r.ncols() != m || x_d.len() != n || u_d.len() != m {
            return Err(Error::DimensionMismatch("quadratic cost shapes".into()));
        }
        for (mat, name) in [(&q, "Q"), (&r, "R")] {
            let asym = (mat.clone() - mat.transpose()).amax();
            if asym > 1e-12 * mat.amax().max(1.0) {
                return Err(Error::InvalidArgument(format!("{name} is not symmetric")));
            }
        }
        let q_eigs = nalgebra::linalg::SymmetricEigen::new(q.clone()).eigenvalues;
        if q_eigs.iter().any(|&e| e < -1e-10 * q.amax().max(1.0)) {
            return Err(Error::InvalidArgument("Q is not positive semidefinite".into()));
        }
        if nalgebra::linalg::Cholesky::new(r.clone()).is_none() {
            return Err(Error::InvalidArgument("R is not positive definite".into()));
        }

        let (qv, xdv, rv, udv) = (q.clone(), x_d.clone(), r.clone(), u_d.clone());
        let value: ScalarFn = Box::new(move |x, u| {
            let ex = x - &xdv;
            let eu = u - &udv;
            0.5 * ex.dot(&(&qv * &ex)) + 0.5 * eu.dot(&(&rv * &eu))
        });
        let (qv, xdv) = (q.clone(), x_d.clone());
        let grad_x: VecFn = Box::new(move |x, _| &qv * &(x - &xdv));
        let (rv, udv) = (r.clone(), u_d.clone());
        let grad_u: VecFn = Box::new(move |_, u| &rv * &(u - &udv));
        Ok(CostFunctional {
            value,
            grad_x,
            grad_u,
            quadratic: Some(QuadraticTracking { q, x_d, r, u_d }),
        })
    }

    /// Arbitrary smooth cost from closures.
    pub fn custom(value: ScalarFn, grad_x: VecFn, grad_u: VecFn) -> CostFunctional {
        CostFunctional {
            value,
            grad_x,
            grad_u,
            quadratic: None,
        }
    }

    pub fn value(&self, x: &Vector, u: &Vector) -> f64 {
        (self.value)(x, u)
    }

    /// Euclidean gradient `∇_x J`.
    pub fn grad_x(&self, x: &Vector, u: &Vector) -> Vector {
        (self.grad_x)(x, u)
    }

    /// Euclidean gradient `∇_u J`.
    pub fn grad_u(&self, x: &Vector, u: &Vector) -> Vector {
        (self.grad_u)(x, u)
    }

    /// X-coordinate (metric) gradient `W_X⁻¹ ∇_x J`.
    pub fn grad_x_metric(&self, sys: &ControlSystem, x: &Vector, u: &Vector) -> Vector {
        sys.state_inner().solve(&self.grad_x(x, u))
    }

    /// U-coordinate (metric) gradient `W_U⁻¹ ∇_u J`.
    pub fn grad_u_metric(&self, sys: &ControlSystem, x: &Vector, u: &Vector) -> Vector {
        sys.control_inner().solve(&self.grad_u(x, u))
    }

    pub fn quadratic_data(&self) -> Option<&QuadraticTracking> {
        self.quadratic.as_ref()
    }

    /// Central finite-difference check of both gradients at random points;
    /// returns the worst relative error.
    pub fn validate_gradients(&self, n: usize, m: usize, seed: u64, points: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..points {
            let x = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let u = Vector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let dx = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize();
            let h = 1e-6 * (1.0 + x.norm());
            let fd = (self.value(&(&x + &dx * h), &u) - self.value(&(&x - &dx * h), &u)) / (2.0 * h);
            let an = self.grad_x(&x, &u).dot(&dx);
            worst = worst.max((fd - an).abs() / an.abs().max(1e-8));
            if m > 0 {
                let du = Vector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)).normalize();
                let fd = (self.value(&x, &(&u + &du * h)) - self.value(&x, &(&u - &du * h))) / (2.0 * h);
                let an = self.grad_u(&x, &u).dot(&du);
                worst = worst.max((fd - an).abs() / an.abs().max(1e-8));
            }
        }
        worst
    }
}

/// Convergence record attached to solver outputs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverInfo {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub grad_norm: f64,
    /// Objective value after each accepted iteration (monotone by Armijo).
    pub objective_history: Vec<f64>,
}

/// A discrete trajectory on a uniform grid: `N+1` nodes, controls constant
/// on each interval (`controls[N]` is padding, kept equal to the final
/// interval's value), adjoints in state coordinates with `adjoints[N] = 0`
/// for solver output.
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub adjoints: Vec<Vector>,
    pub info: SolverInfo,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// Constant-in-time trajectory at a steady triple; used to audit the
    /// diagnostics' zero point. The adjoint is held at `λ̄` (not the solver's
    /// terminal condition).
    pub fn steady(steady: &SteadyOptimum, horizon: f64, dt: f64) -> Trajectory {
        let n_steps = (horizon / dt).round().max(1.0) as usize;
        let grid: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
        Trajectory {
            dt,
            horizon,
            states: vec![steady.x_bar.clone(); n_steps + 1],
            controls: vec![steady.u_bar.clone(); n_steps + 1],
            adjoints: vec![steady.lambda_bar.clone(); n_steps + 1],
            grid,
            info: SolverInfo {
                iterations: 0,
                converged: true,
                objective: f64::NAN,
                grad_norm: 0.0,
                objective_history: vec![],
            },
        }
    }
}

/// Residuals of the steady first-order conditions.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SteadyResiduals {
    pub dynamics: f64,
    pub adjoint: f64,
    pub stationarity: f64,
}

/// Solution of the steady-state optimality system.
pub struct SteadyOptimum {
    pub x_bar: Vector,
    pub u_bar: Vector,
    pub lambda_bar: Vector,
    pub objective: f64,
    pub residuals: SteadyResiduals,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Differences of the problem data along a trajectory against a steady
/// point: `r_f(t) = f(x(t),u(t)) − f(x̄,ū)` and so on. Operator-valued
/// remainders are reduced to weighted operator-norm series; gradient
/// remainders are stored in metric (X / U) coordinates.
pub struct RemainderSeries {
    pub grid: Vec<f64>,
    pub r_f: Vec<Vector>,
    pub r_fx_norm: Vec<f64>,
    pub r_fu_norm: Vec<f64>,
    pub r_jx: Vec<Vector>,
    pub r_ju: Vec<Vector>,
}

/// Remainder series of `traj` against `steady`.
pub fn remainder_series(
    sys: &ControlSystem,
    cost: &CostFunctional,
    traj: &Trajectory,
    steady: &SteadyOptimum,
) -> Result<RemainderSeries> {
    let nodes = traj.grid.len();
    let (xb, ub) = (&steady.x_bar, &steady.u_bar);
    sys.check_args(xb, ub)?;
    let wx = sys.state_inner();
    let wu = sys.control_inner();
    let wy = sys.y_inner();

    let f_bar = sys.nonlin.as_ref().map(|nl| (nl.f)(xb, ub));
    let fx_bar = sys.nonlin.as_ref().map(|nl| (nl.jac_x)(xb, ub));
    let fu_bar = sys.nonlin.as_ref().map(|nl| (nl.jac_u)(xb, ub));
    let fx_diag_bar = sys
        .nonlin
        .as_ref()
        .and_then(|nl| nl.jac_x_diag.as_ref().map(|d| d(xb, ub)));
    let jx_bar = cost.grad_x(xb, ub);
    let ju_bar = cost.grad_u(xb, ub);

    let mut out = RemainderSeries {
        grid: traj.grid.clone(),
        r_f: Vec::with_capacity(nodes),
        r_fx_norm: Vec::with_capacity(nodes),
        r_fu_norm: Vec::with_capacity(nodes),
        r_jx: Vec::with_capacity(nodes),
        r_ju: Vec::with_capacity(nodes),
    };
    for k in 0..nodes {
        let x = &traj.states[k];
        let u = &traj.controls[k];
        match (&sys.nonlin, &f_bar) {
            (Some(nl), Some(fb)) => {
                out.r_f.push((nl.f)(x, u) - fb);
                match (&nl.jac_x_diag, &fx_diag_bar) {
                    (Some(dfn), Some(db)) if wy.is_diagonal_shape() && wx.is_diagonal_shape() => {
                        // diagonal Jacobian: closed-form weighted operator norm
                        let d = dfn(x, u) - db;
                        let mut best = 0.0f64;
                        for i in 0..d.len() {
                            let v = d[i].abs() * (wy.diag_entry(i) / wx.diag_entry(i)).sqrt();
                            best = best.max(v);
                        }
                        out.r_fx_norm.push(best);
                    }
                    _ => {
                        let dfx = (nl.jac_x)(x, u) - fx_bar.as_ref().unwrap();
                        out.r_fx_norm.push(op_norm(&dfx, wy, wx));
                    }
                }
                let dfu = (nl.jac_u)(x, u) - fu_bar.as_ref().unwrap();
                out.r_fu_norm.push(op_norm(&dfu, wy, wu));
            }
            _ => {
                out.r_f.push(Vector::zeros(sys.n_state));
                out.r_fx_norm.push(0.0);
                out.r_fu_norm.push(0.0);
            }
        }
        out.r_jx.push(wx.solve(&(cost.grad_x(x, u) - &jx_bar)));
        out.r_ju.push(wu.solve(&(cost.grad_u(x, u) - &ju_bar)));
    }
    Ok(out)
}

/// Max-norm residuals of the three discrete optimality conditions.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct KktResidual {
    pub dynamics: f64,
    pub adjoint: f64,
    pub stationarity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.dynamics.max(self.adjoint).max(self.stationarity)
    }
}

/// Discrete first-order residuals of a trajectory under the implicit-Euler
/// transcription and the crate's sign convention. The adjoint residual
/// includes the terminal condition `‖λ_N‖_Y`.
pub fn kkt_residual(sys: &ControlSystem, cost: &CostFunctional, traj: &Trajectory) -> Result<KktResidual> {
    let n_steps = traj.n_steps();
    let dt = traj.dt;
    let mut dyn_res = 0.0f64;
    let mut adj_res: f64 = sys.y_norm(&traj.adjoints[n_steps]);
    let mut stat_res = 0.0f64;
    for k in 0..n_steps {
        let xk1 = &traj.states[k + 1];
        let uk = &traj.controls[k];
        let rhs = sys.eval_rhs(xk1, uk)?;
        let d = (&traj.states[k + 1] - &traj.states[k]) / dt - rhs;
        dyn_res = dyn_res.max(sys.x_norm(&d));

        let a_star = sys.a_star_at(xk1, uk)?;
        let jx = cost.grad_x_metric(sys, xk1, uk);
        let r = (&traj.adjoints[k + 1] - &traj.adjoints[k]) / dt + &a_star * &traj.adjoints[k] - jx;
        adj_res = adj_res.max(sys.y_norm(&r));

        let b_star = sys.b_star_at(xk1, uk)?;
        let s = cost.grad_u_metric(sys, xk1, uk) - &b_star * &traj.adjoints[k];
        stat_res = stat_res.max(sys.u_norm(&s));
    }
    Ok(KktResidual {
        dynamics: dyn_res,
        adjoint: adj_res,
        stationarity: stat_res,
    })
}
