//! Steady companion problem: the constrained minimizer of the running cost
//! over steady states, found as a root of the stationary optimality system
//!
//! ```text
//! 𝒜x + ℬu + f(x, u)            = 0
//! ∇_x J(x, u) − A(x,u)ᵀ W_X λ  = 0      A = 𝒜 + f_x
//! ∇_u J(x, u) − B(x,u)ᵀ W_X λ  = 0      B = ℬ + f_u
//! ```
//!
//! written here in Euclidean form (the metric form is the same zero set;
//! residuals are reported in metric norms). A damped Newton iteration with an
//! exact Jacobian is the workhorse; models without second-derivative hooks
//! fall back to finite differences for the curvature blocks, and a
//! gradient-flow presolve rescues starts outside Newton's basin.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ControlSystem, CostFunctional, Matrix, SteadyOptimum, SteadyResiduals, Vector};

#[derive(Debug, Clone)]
pub struct SteadyOptions {
    /// Convergence threshold on the largest metric residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Gradient-flow steps allowed when Newton stalls.
    pub presolve_iters: usize,
    /// Initial `(x, u, λ)`; defaults to the linearized steady system's
    /// solution.
    pub warm_start: Option<(Vector, Vector, Vector)>,
}

impl Default for SteadyOptions {
    fn default() -> SteadyOptions {
        SteadyOptions {
            tol: 1e-10,
            max_iters: 100,
            presolve_iters: 200,
            warm_start: None,
        }
    }
}

/// Solves the steady optimality system with the semilinear term omitted.
/// Exact for linear-quadratic models; otherwise a warm start.
pub fn linearized_steady(sys: &ControlSystem, cost: &CostFunctional) -> Result<(Vector, Vector, Vector)> {
    let n = sys.n_state();
    let m = sys.n_control();
    let Some(qd) = cost.quadratic_data() else {
        return Ok((Vector::zeros(n), Vector::zeros(m), Vector::zeros(n)));
    };
    let wx_a = sys.state_inner().apply_mat(sys.lin_state_op()); // W_X 𝒜
    let wx_b = sys.state_inner().apply_mat(sys.control_op()); // W_X ℬ
    let dim = 2 * n + m;
    let mut mat = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    mat.view_mut((0, 0), (n, n)).copy_from(sys.lin_state_op());
    mat.view_mut((0, n), (n, m)).copy_from(sys.control_op());
    mat.view_mut((n, 0), (n, n)).copy_from(&qd.q);
    mat.view_mut((n, n + m), (n, n)).copy_from(&(-wx_a.transpose()));
    mat.view_mut((n + n, n), (m, m)).copy_from(&qd.r);
    mat.view_mut((n + n, n + m), (m, n)).copy_from(&(-wx_b.transpose()));
    rhs.rows_mut(n, n).copy_from(&(&qd.q * &qd.x_d));
    rhs.rows_mut(n + n, m).copy_from(&(&qd.r * &qd.u_d));
    let z = mat
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearAlgebra("linearized steady system is singular".into()))?;
    Ok((
        z.rows(0, n).into_owned(),
        z.rows(n, m).into_owned(),
        z.rows(n + m, n).into_owned(),
    ))
}

struct KktSystem<'a> {
    sys: &'a ControlSystem,
    cost: &'a CostFunctional,
}

impl KktSystem<'_> {
    /// Euclidean residual stacked as `(G1, G2ᴱ, G3ᴱ)`.
    fn residual(&self, x: &Vector, u: &Vector, lam: &Vector) -> Result<Vector> {
        let wx_lam = self.sys.state_inner().apply(lam);
        let (a, b) = self.sys.linearize_at(x, u)?;
        let g1 = self.sys.eval_rhs(x, u)?;
        let g2 = self.cost.grad_x(x, u) - a.transpose() * &wx_lam;
        let g3 = self.cost.grad_u(x, u) - b.transpose() * &wx_lam;
        let n = g1.len();
        let m = g3.len();
        let mut out = Vector::zeros(2 * n + m);
        out.rows_mut(0, n).copy_from(&g1);
        out.rows_mut(n, n).copy_from(&g2);
        out.rows_mut(2 * n, m).copy_from(&g3);
        Ok(out)
    }

    /// Metric-norm residual triple used for convergence reporting.
    fn metric_residuals(&self, g: &Vector) -> SteadyResiduals {
        let n = self.sys.n_state();
        let m = self.sys.n_control();
        let g1 = g.rows(0, n).into_owned();
        let g2 = self.sys.state_inner().solve(&g.rows(n, n).into_owned());
        let g3 = self.sys.control_inner().solve(&g.rows(2 * n, m).into_owned());
        SteadyResiduals {
            dynamics: self.sys.x_norm(&g1),
            adjoint: self.sys.y_norm(&g2),
            stationarity: self.sys.u_norm(&g3),
        }
    }

    fn jacobian(&self, x: &Vector, u: &Vector, lam: &Vector) -> Result<Matrix> {
        let sys = self.sys;
        let n = sys.n_state();
        let m = sys.n_control();
        let wx_lam = sys.state_inner().apply(lam);
        let (a, b) = sys.linearize_at(x, u)?;
        let wx_a_t = sys.state_inner().apply_mat(&a).transpose();
        let wx_b_t = sys.state_inner().apply_mat(&b).transpose();

        let (jxx, jxu, jux, juu) = self.cost_hessians(x, u);
        let (hxx, hxu, hux, huu) = self.nonlin_curvature(x, u, &wx_lam);

        let mut jac = DMatrix::<f64>::zeros(2 * n + m, 2 * n + m);
        jac.view_mut((0, 0), (n, n)).copy_from(&a);
        jac.view_mut((0, n), (n, m)).copy_from(&b);
        jac.view_mut((n, 0), (n, n)).copy_from(&(jxx - hxx));
        jac.view_mut((n, n), (n, m)).copy_from(&(jxu - hxu));
        jac.view_mut((n, n + m), (n, n)).copy_from(&(-&wx_a_t));
        jac.view_mut((2 * n, 0), (m, n)).copy_from(&(jux - hux));
        jac.view_mut((2 * n, n), (m, m)).copy_from(&(juu - huu));
        jac.view_mut((2 * n, n + m), (m, n)).copy_from(&(-&wx_b_t));
        Ok(jac)
    }

    /// Hessian blocks of the running cost; quadratic data is exact, custom
    /// costs are centrally differenced.
    fn cost_hessians(&self, x: &Vector, u: &Vector) -> (Matrix, Matrix, Matrix, Matrix) {
        let n = x.len();
        let m = u.len();
        if let Some(qd) = self.cost.quadratic_data() {
            return (qd.q.clone(), Matrix::zeros(n, m), Matrix::zeros(m, n), qd.r.clone());
        }
        let hx = 1e-6 * (1.0 + x.norm());
        let hu = 1e-6 * (1.0 + u.norm());
        let jxx = fd_columns(n, n, hx, |xp| self.cost.grad_x(xp, u), x);
        let jux = fd_columns(m, n, hx, |xp| self.cost.grad_u(xp, u), x);
        let jxu = fd_columns(n, m, hu, |up| self.cost.grad_x(x, up), u);
        let juu = fd_columns(m, m, hu, |up| self.cost.grad_u(x, up), u);
        (jxx, jxu, jux, juu)
    }

    /// Curvature of the Lagrangian dynamics term: blocks of
    /// `∂/∂(x,u) [ (f_x, f_u)ᵀ w ]` for the fixed vector `w = W_X λ`.
    fn nonlin_curvature(&self, x: &Vector, u: &Vector, w: &Vector) -> (Matrix, Matrix, Matrix, Matrix) {
        let n = x.len();
        let m = u.len();
        let Some(nl) = self.sys.nonlinearity() else {
            return (
                Matrix::zeros(n, n),
                Matrix::zeros(n, m),
                Matrix::zeros(m, n),
                Matrix::zeros(m, m),
            );
        };
        let hx = 1e-6 * (1.0 + x.norm());
        let hu = 1e-6 * (1.0 + u.norm());
        let hxx = match &nl.hess_x_action {
            Some(h) => h(x, u, w),
            None => fd_columns(n, n, hx, |xp| (nl.jac_x)(xp, u).transpose() * w, x),
        };
        let hxu = fd_columns(n, m, hu, |up| (nl.jac_x)(x, up).transpose() * w, u);
        let hux = fd_columns(m, n, hx, |xp| (nl.jac_u)(xp, u).transpose() * w, x);
        let huu = fd_columns(m, m, hu, |up| (nl.jac_u)(x, up).transpose() * w, u);
        (hxx, hxu, hux, huu)
    }
}

/// Central finite differences of `g : ℝ^cols → ℝ^rows` around `at`.
fn fd_columns(
    rows: usize,
    cols: usize,
    h: f64,
    g: impl Fn(&Vector) -> Vector,
    at: &Vector,
) -> Matrix {
    let mut out = Matrix::zeros(rows, cols);
    let mut p = at.clone();
    for j in 0..cols {
        p[j] = at[j] + h;
        let gp = g(&p);
        p[j] = at[j] - h;
        let gm = g(&p);
        p[j] = at[j];
        out.set_column(j, &((gp - gm) / (2.0 * h)));
    }
    out
}

fn split(sys: &ControlSystem, z: &Vector) -> (Vector, Vector, Vector) {
    let n = sys.n_state();
    let m = sys.n_control();
    (
        z.rows(0, n).into_owned(),
        z.rows(n, m).into_owned(),
        z.rows(n + m, n).into_owned(),
    )
}

fn merit(kkt: &KktSystem, z: &Vector) -> Result<(Vector, f64)> {
    let (x, u, lam) = split(kkt.sys, z);
    let g = kkt.residual(&x, &u, &lam)?;
    let r = kkt.metric_residuals(&g);
    let phi = 0.5 * (r.dynamics * r.dynamics + r.adjoint * r.adjoint + r.stationarity * r.stationarity);
    Ok((g, phi))
}

/// Solves the steady optimality system by damped Newton.
pub fn solve_steady(sys: &ControlSystem, cost: &CostFunctional, opts: &SteadyOptions) -> Result<SteadyOptimum> {
    let n = sys.n_state();
    let m = sys.n_control();
    let kkt = KktSystem { sys, cost };

    let (x0, u0, l0) = match &opts.warm_start {
        Some((x, u, l)) => (x.clone(), u.clone(), l.clone()),
        None => linearized_steady(sys, cost).unwrap_or((Vector::zeros(n), Vector::zeros(m), Vector::zeros(n))),
    };
    if x0.len() != n || u0.len() != m || l0.len() != n {
        return Err(Error::DimensionMismatch("warm start lengths".into()));
    }
    let mut z = Vector::zeros(2 * n + m);
    z.rows_mut(0, n).copy_from(&x0);
    z.rows_mut(n, m).copy_from(&u0);
    z.rows_mut(n + m, n).copy_from(&l0);

    let mut history = Vec::new();
    let mut presolve_left = opts.presolve_iters;
    let (mut g, mut phi) = merit(&kkt, &z)?;

    for iter in 0..opts.max_iters {
        let (x, u, lam) = split(sys, &z);
        let res = kkt.metric_residuals(&g);
        let res_max = res.dynamics.max(res.adjoint).max(res.stationarity);
        history.push(res_max);
        if res_max <= opts.tol {
            return Ok(SteadyOptimum {
                objective: cost.value(&x, &u),
                x_bar: x,
                u_bar: u,
                lambda_bar: lam,
                residuals: res,
                iterations: iter,
                residual_history: history,
            });
        }

        let jac = kkt.jacobian(&x, &u, &lam)?;
        let step = jac.clone().full_piv_lu().solve(&(-&g));
        let mut advanced = false;
        if let Some(p) = step {
            let mut alpha = 1.0;
            while alpha >= 1e-10 {
                let zt = &z + &p * alpha;
                if let Ok((gt, phit)) = merit(&kkt, &zt) {
                    if phit <= (1.0 - 1e-4 * alpha) * phi || phit < 0.5 * opts.tol * opts.tol {
                        z = zt;
                        g = gt;
                        phi = phit;
                        advanced = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        if advanced {
            continue;
        }

        // Newton stalled: descend on ½‖G‖² along −JᵀG until the merit drops.
        let mut rescued = false;
        while presolve_left > 0 {
            presolve_left -= 1;
            let (x, u, lam) = split(sys, &z);
            let jac = kkt.jacobian(&x, &u, &lam)?;
            let grad = jac.transpose() * &g;
            let gn = grad.norm();
            if gn == 0.0 {
                break;
            }
            let mut alpha = phi.sqrt().max(1e-3) / gn;
            let mut stepped = false;
            while alpha >= 1e-14 {
                let zt = &z - &grad * alpha;
                if let Ok((gt, phit)) = merit(&kkt, &zt) {
                    if phit < phi {
                        z = zt;
                        g = gt;
                        phi = phit;
                        stepped = true;
                        rescued = true;
                        break;
                    }
                }
                alpha *= 0.25;
            }
            if !stepped {
                break;
            }
            if phi < 0.25 * history.last().unwrap().powi(2) {
                break;
            }
        }
        if !rescued {
            return Err(Error::NoConvergence(format!(
                "steady Newton solve stalled after {iter} iterations, residual {res_max:.3e}"
            )));
        }
    }

    let res = kkt.metric_residuals(&g);
    let res_max = res.dynamics.max(res.adjoint).max(res.stationarity);
    Err(Error::NoConvergence(format!(
        "steady Newton solve: {} iterations, residual {res_max:.3e}",
        opts.max_iters
    )))
}
