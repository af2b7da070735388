//! Turnpike detection and certificate audits: deviation series against the
//! steady optimum, largest sub-threshold interval, exceedance measure,
//! two-sided exponential fit, graph-norm of adjoint segments, and the
//! smallest-constant audits of the exponential-stability and exact-
//! controllability adjoint bounds.

use crate::error::{Error, Result};
use crate::linalg::Weight;
use crate::model::{ControlSystem, Matrix, RemainderSeries, SteadyOptimum, Trajectory, Vector};
use crate::spectral::{ObservabilityCertificate, SemigroupBound};

/// Distance of a trajectory from the steady optimum, per grid point:
/// `d = ‖x−x̄‖_X + ‖u−ū‖_U` and `d_adj = ‖λ−λ̄‖_Y`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DeviationSeries {
    pub grid: Vec<f64>,
    pub d: Vec<f64>,
    pub d_adj: Vec<f64>,
    pub d_label: String,
    pub d_adj_label: String,
}

/// Deviation of `traj` from `steady` in the system's norms. Controls use
/// the step-constant convention (`u(t_k)` is the control of step `k`, the
/// final node repeating the last step).
pub fn deviation_series(
    sys: &ControlSystem,
    traj: &Trajectory,
    steady: &SteadyOptimum,
) -> Result<DeviationSeries> {
    sys.check_args(&steady.x_bar, &steady.u_bar)?;
    let nodes = traj.grid.len();
    if traj.states.len() != nodes || traj.controls.len() != nodes || traj.adjoints.len() != nodes {
        return Err(Error::DimensionMismatch("trajectory series lengths".into()));
    }
    let mut d = Vec::with_capacity(nodes);
    let mut d_adj = Vec::with_capacity(nodes);
    for k in 0..nodes {
        d.push(sys.x_norm(&(&traj.states[k] - &steady.x_bar)) + sys.u_norm(&(&traj.controls[k] - &steady.u_bar)));
        d_adj.push(sys.y_norm(&(&traj.adjoints[k] - &steady.lambda_bar)));
    }
    Ok(DeviationSeries {
        grid: traj.grid.clone(),
        d,
        d_adj,
        d_label: "‖x−x̄‖_X + ‖u−ū‖_U".into(),
        d_adj_label: "‖λ−λ̄‖_Y".into(),
    })
}

impl DeviationSeries {
    /// Rescales by the steady magnitudes, `d / (‖x̄‖_X + ‖ū‖_U)` and
    /// `d_adj / ‖λ̄‖_Y`, leaving a series unscaled when its reference
    /// magnitude vanishes.
    pub fn into_normalized(mut self, sys: &ControlSystem, steady: &SteadyOptimum) -> DeviationSeries {
        let sd = sys.x_norm(&steady.x_bar) + sys.u_norm(&steady.u_bar);
        let sa = sys.y_norm(&steady.lambda_bar);
        if sd > 0.0 {
            for v in &mut self.d {
                *v /= sd;
            }
            self.d_label = format!("({}) / (‖x̄‖_X + ‖ū‖_U)", self.d_label);
        }
        if sa > 0.0 {
            for v in &mut self.d_adj {
                *v /= sa;
            }
            self.d_adj_label = format!("({}) / ‖λ̄‖_Y", self.d_adj_label);
        }
        self
    }

    /// Largest interval on which the state-control deviation stays ≤ ε.
    pub fn state_interval(&self, epsilon: f64) -> Result<IntervalFinding> {
        largest_interval(&self.grid, &self.d, epsilon)
    }

    /// Largest interval on which the adjoint deviation stays ≤ ε.
    pub fn adjoint_interval(&self, epsilon: f64) -> Result<IntervalFinding> {
        largest_interval(&self.grid, &self.d_adj, epsilon)
    }
}

/// A maximal closed grid interval `[t1, t2]` on which a deviation series
/// stays below a threshold. A finding with `t1 = t2 = grid start` and no
/// qualifying grid point is the empty sentinel.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IntervalFinding {
    pub epsilon: f64,
    pub t1: f64,
    pub t2: f64,
    /// `t2 − t1`.
    pub length: f64,
    pub fraction_of_horizon: f64,
}

/// Longest contiguous run of grid points with `values ≤ epsilon`, as a
/// closed interval; ties are broken toward the earliest start. When no
/// point qualifies the finding collapses to the grid start with zero
/// length.
pub fn largest_interval(grid: &[f64], values: &[f64], epsilon: f64) -> Result<IntervalFinding> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    if grid.is_empty() || grid.len() != values.len() {
        return Err(Error::DimensionMismatch("grid/series lengths".into()));
    }
    let horizon = grid[grid.len() - 1] - grid[0];
    let mut best: Option<(usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    for i in 0..=values.len() {
        let inside = i < values.len() && values[i] <= epsilon;
        match (inside, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                let cand = (s, i - 1);
                let longer = match best {
                    None => true,
                    Some((bs, be)) => grid[cand.1] - grid[cand.0] > grid[be] - grid[bs],
                };
                if longer {
                    best = Some(cand);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let (t1, t2) = match best {
        Some((s, e)) => (grid[s], grid[e]),
        None => (grid[0], grid[0]),
    };
    Ok(IntervalFinding {
        epsilon,
        t1,
        t2,
        length: t2 - t1,
        fraction_of_horizon: if horizon > 0.0 { (t2 - t1) / horizon } else { 0.0 },
    })
}

/// Trapezoidal measure of `{t : values(t) > epsilon}`: each grid cell
/// contributes its width times the fraction of its endpoints exceeding.
pub fn exceedance_measure(grid: &[f64], values: &[f64], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    if grid.len() != values.len() || grid.len() < 2 {
        return Err(Error::DimensionMismatch("grid/series lengths".into()));
    }
    let mut measure = 0.0;
    for k in 0..grid.len() - 1 {
        let dt = grid[k + 1] - grid[k];
        let exceeding = (values[k] > epsilon) as u8 + (values[k + 1] > epsilon) as u8;
        measure += dt * f64::from(exceeding) * 0.5;
    }
    Ok(measure)
}

/// Two-sided exponential envelope fitted to a deviation series:
/// `d(t) ≈ c·(e^{−mu·t} + e^{−mu·(T−t)})`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExpFit {
    pub c: f64,
    pub mu: f64,
    /// RMS misfit of `log d` against the fitted model.
    pub residual: f64,
}

/// `log(e^{−mu·t} + e^{−mu·(T−t)})`, evaluated without underflow.
fn log_envelope(mu: f64, t: f64, horizon: f64) -> f64 {
    let a = t.min(horizon - t);
    let b = t.max(horizon - t);
    -mu * a + (-mu * (b - a)).exp().ln_1p()
}

/// `d/dmu` of [`log_envelope`].
fn dlog_envelope(mu: f64, t: f64, horizon: f64) -> f64 {
    let a = t.min(horizon - t);
    let b = t.max(horizon - t);
    let w = (-mu * (b - a)).exp();
    -(a + b * w) / (1.0 + w)
}

/// Slope of the least-squares line through `(x, y)` pairs; `None` when
/// fewer than two distinct abscissae are given.
fn line_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Fits the two-sided exponential envelope to `values` over `grid` by
/// nonlinear least squares in log space (Levenberg–Marquardt on
/// `(log c, log mu)`), initialized from the log-slopes of the first and
/// last horizon quarters. Points at or below 1e-14 are ignored; fewer than
/// 10 usable points is a fit-unavailable error.
pub fn fit_exponential(grid: &[f64], values: &[f64], horizon: f64) -> Result<ExpFit> {
    if grid.len() != values.len() {
        return Err(Error::DimensionMismatch("grid/series lengths".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(values.iter())
        .filter(|(_, &v)| v > 1e-14)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::FitUnavailable(format!(
            "only {} points above the fit floor (need 10)",
            pts.len()
        )));
    }

    let head: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 <= 0.25 * horizon).collect();
    let tail: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 >= 0.75 * horizon).collect();
    let s_head = line_slope(&head).map(f64::abs);
    let s_tail = line_slope(&tail).map(f64::abs);
    let mu0 = match (s_head, s_tail) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 0.1,
    }
    .max(1e-3);
    let lc0 = pts
        .iter()
        .map(|&(t, y)| y - log_envelope(mu0, t, horizon))
        .sum::<f64>()
        / pts.len() as f64;

    let sse = |lc: f64, lm: f64| -> f64 {
        let mu = lm.exp();
        pts.iter()
            .map(|&(t, y)| {
                let r = y - lc - log_envelope(mu, t, horizon);
                r * r
            })
            .sum()
    };

    let (mut lc, mut lm) = (lc0, mu0.ln());
    let mut damping = 1e-3;
    let mut current = sse(lc, lm);
    for _ in 0..200 {
        let mu = lm.exp();
        // normal equations of the 2-parameter Jacobian
        let (mut jtj00, mut jtj01, mut jtj11) = (0.0, 0.0, 0.0);
        let (mut g0, mut g1) = (0.0, 0.0);
        for &(t, y) in &pts {
            let r = y - lc - log_envelope(mu, t, horizon);
            let j0 = -1.0;
            let j1 = -mu * dlog_envelope(mu, t, horizon);
            jtj00 += j0 * j0;
            jtj01 += j0 * j1;
            jtj11 += j1 * j1;
            g0 += j0 * r;
            g1 += j1 * r;
        }
        let mut stepped = false;
        for _ in 0..25 {
            let (a00, a01, a11) = (jtj00 + damping, jtj01, jtj11 + damping);
            let det = a00 * a11 - a01 * a01;
            if det.abs() < 1e-300 {
                break;
            }
            let d0 = (-g0 * a11 + g1 * a01) / det;
            let d1 = (-g1 * a00 + g0 * a01) / det;
            let (lct, lmt) = (lc + d0, (lm + d1).clamp(-40.0, 40.0));
            let trial = sse(lct, lmt);
            if trial <= current {
                let gain = current - trial;
                lc = lct;
                lm = lmt;
                current = trial;
                damping = (damping * 0.3).max(1e-12);
                stepped = true;
                if gain < 1e-15 * (1.0 + current) {
                    stepped = false;
                }
                break;
            }
            damping *= 10.0;
        }
        if !stepped {
            break;
        }
    }

    Ok(ExpFit {
        c: lc.exp(),
        mu: lm.exp(),
        residual: (current / pts.len() as f64).sqrt(),
    })
}

/// Scalar series feeding the bound audits: adjoint deviation and remainder
/// sizes per grid point, all reduced to the norms used by the inequalities
/// (`Y` for adjoint-equation terms, `U` for stationarity terms).
#[derive(Debug, Clone)]
pub struct AuditSeries {
    pub grid: Vec<f64>,
    /// `‖λ(t)−λ̄‖_Y`
    pub dlam: Vec<f64>,
    /// `‖f_x(x,u)−f_x(x̄,ū)‖` as an X→Y operator norm.
    pub r_fx: Vec<f64>,
    /// `‖f_u(x,u)−f_u(x̄,ū)‖` as a U→Y operator norm.
    pub r_fu: Vec<f64>,
    /// `‖∇_xJ(x,u)−∇_xJ(x̄,ū)‖_Y` (metric coordinates).
    pub r_jx: Vec<f64>,
    /// `‖∇_uJ(x,u)−∇_uJ(x̄,ū)‖_U` (metric coordinates).
    pub r_ju: Vec<f64>,
}

/// Reduces a remainder series and trajectory to the scalar series the
/// audits consume.
pub fn audit_series(
    sys: &ControlSystem,
    remainder: &RemainderSeries,
    traj: &Trajectory,
    steady: &SteadyOptimum,
) -> Result<AuditSeries> {
    let nodes = remainder.grid.len();
    if traj.adjoints.len() != nodes {
        return Err(Error::DimensionMismatch("remainder/trajectory lengths".into()));
    }
    let mut dlam = Vec::with_capacity(nodes);
    let mut r_jx = Vec::with_capacity(nodes);
    let mut r_ju = Vec::with_capacity(nodes);
    for k in 0..nodes {
        dlam.push(sys.y_norm(&(&traj.adjoints[k] - &steady.lambda_bar)));
        r_jx.push(sys.y_norm(&remainder.r_jx[k]));
        r_ju.push(sys.u_norm(&remainder.r_ju[k]));
    }
    Ok(AuditSeries {
        grid: remainder.grid.clone(),
        dlam,
        r_fx: remainder.r_fx_norm.clone(),
        r_fu: remainder.r_fu_norm.clone(),
        r_jx,
        r_ju,
    })
}

/// Result of a smallest-constant inequality audit.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BoundAudit {
    /// Smallest `c ≥ 0` making the audited inequality hold at every grid
    /// point of the window; infinite when `degenerate`.
    #[serde(with = "crate::serde_util::maybe_inf")]
    pub c: f64,
    pub s1: f64,
    pub s2: f64,
    /// The left side was positive at a point where the audited right side
    /// vanished, so no finite constant exists.
    pub degenerate: bool,
}

/// Indices of the grid points inside `[t1, t2]`.
fn window(grid: &[f64], t1: f64, t2: f64) -> Result<(usize, usize)> {
    if !(t1 <= t2) {
        return Err(Error::InvalidArgument("audit window is reversed".into()));
    }
    let slack = 1e-9 * (1.0 + t2.abs());
    let i0 = grid.iter().position(|&t| t >= t1 - slack);
    let i2 = grid.iter().rposition(|&t| t <= t2 + slack);
    match (i0, i2) {
        (Some(a), Some(b)) if a <= b => Ok((a, b)),
        _ => Err(Error::NotApplicable("audit window contains no grid points".into())),
    }
}

/// Ratio `num/den` under the audit conventions: non-positive numerators
/// need no constant, a positive numerator over a zero denominator is
/// degenerate.
fn audit_ratio(num: f64, den: f64, scale: f64) -> (f64, bool) {
    if num <= 1e-14 * scale.max(1.0) {
        (0.0, false)
    } else if den > 0.0 {
        (num / den, false)
    } else {
        (f64::INFINITY, true)
    }
}

/// Smallest `c` with
/// `‖δλ(t)‖ ≤ m·e^{−mu·(t2−t)}·‖δλ(t2)‖ + c·(sup r_fx·ρ + sup r_jx)`
/// over the window `[t1, t2]`, where the suprema run over `[t, t2]` and
/// `ρ = max ‖δλ‖` over the window. `s1`, `s2` report the window start and
/// half-length evaluation points alongside the constant.
pub fn audit_expstab_bound(
    series: &AuditSeries,
    bound: &SemigroupBound,
    t1: f64,
    t2: f64,
) -> Result<BoundAudit> {
    if !bound.valid {
        return Err(Error::NotApplicable(
            "decay certificate is invalid (operator not exponentially stable)".into(),
        ));
    }
    let (i0, i2) = window(&series.grid, t1, t2)?;
    let rho = series.dlam[i0..=i2].iter().cloned().fold(0.0, f64::max);

    // suffix suprema of the forcing ingredients over [t, t2]
    let len = i2 - i0 + 1;
    let mut sup_fx = vec![0.0; len];
    let mut sup_jx = vec![0.0; len];
    for j in (0..len).rev() {
        let nxt = if j + 1 < len { (sup_fx[j + 1], sup_jx[j + 1]) } else { (0.0, 0.0) };
        sup_fx[j] = series.r_fx[i0 + j].max(nxt.0);
        sup_jx[j] = series.r_jx[i0 + j].max(nxt.1);
    }

    let mut c = 0.0f64;
    let mut degenerate = false;
    for j in 0..len {
        let i = i0 + j;
        let semigroup = bound.m * (-bound.mu * (series.grid[i2] - series.grid[i])).exp() * series.dlam[i2];
        let forcing = sup_fx[j] * rho + sup_jx[j];
        let (ratio, degen) = audit_ratio(series.dlam[i] - semigroup, forcing, rho);
        c = c.max(ratio);
        degenerate |= degen;
    }
    Ok(BoundAudit {
        c,
        s1: series.grid[i0],
        s2: 0.5 * (series.grid[i2] - series.grid[i0]),
        degenerate,
    })
}

/// Smallest `c` with `‖δλ(t)‖² ≤ c·I(t)` over `[t1+t_c, t2]`, where
/// `I(t)` is the trapezoidal integral over `[t−t_c, t]` of
/// `(r_fu·‖δλ‖ + r_ju)² + (r_fx·‖δλ‖ + r_jx)²` and `t_c` is rounded to a
/// whole number of grid steps. `s1 = t1+t_c`, `s2 = t2`.
pub fn audit_excont_bound(
    series: &AuditSeries,
    cert: &ObservabilityCertificate,
    t1: f64,
    t2: f64,
) -> Result<BoundAudit> {
    if !(cert.alpha > 0.0) {
        return Err(Error::NotApplicable(
            "controllability certificate has no positive lower bound".into(),
        ));
    }
    let (i0, i2) = window(&series.grid, t1, t2)?;
    if i2 - i0 < 1 {
        return Err(Error::NotApplicable("audit window shorter than one grid cell".into()));
    }
    let dt = (series.grid[i2] - series.grid[i0]) / (i2 - i0) as f64;
    let k_c = (cert.t_c / dt).round().max(1.0) as usize;
    if i0 + k_c > i2 {
        return Err(Error::NotApplicable(format!(
            "window of length {:.3} is shorter than the controllability time {:.3}",
            series.grid[i2] - series.grid[i0],
            cert.t_c
        )));
    }

    let integrand: Vec<f64> = (i0..=i2)
        .map(|i| {
            let stat = series.r_fu[i] * series.dlam[i] + series.r_ju[i];
            let adj = series.r_fx[i] * series.dlam[i] + series.r_jx[i];
            stat * stat + adj * adj
        })
        .collect();
    // running trapezoid sums for O(1) window integrals
    let mut cumulative = vec![0.0; integrand.len()];
    for j in 1..integrand.len() {
        cumulative[j] = cumulative[j - 1] + 0.5 * dt * (integrand[j - 1] + integrand[j]);
    }

    let rho = series.dlam[i0..=i2].iter().cloned().fold(0.0, f64::max);
    let mut c = 0.0f64;
    let mut degenerate = false;
    for j in k_c..integrand.len() {
        let i = i0 + j;
        let window_integral = cumulative[j] - cumulative[j - k_c];
        let (ratio, degen) = audit_ratio(series.dlam[i] * series.dlam[i], window_integral, rho * rho);
        c = c.max(ratio);
        degenerate |= degen;
    }
    Ok(BoundAudit {
        c,
        s1: series.grid[i0] + k_c as f64 * dt,
        s2: series.grid[i2],
        degenerate,
    })
}

/// Graph-norm of an adjoint segment:
/// `w² = ∫ (‖λ'‖² + ‖λ‖² + ‖A*λ‖²) dt` over `[t1, t2]` (trapezoid rule,
/// second-order difference quotients), all in the `y` norm. The returned
/// pointwise series is `‖λ(t)‖` in `pointwise_weight` when supplied
/// (an H¹-type surrogate), else in `y`.
pub fn w_norm(
    grid: &[f64],
    lam: &[Vector],
    a_star: &Matrix,
    y: &Weight,
    pointwise_weight: Option<&Weight>,
    t1: f64,
    t2: f64,
) -> Result<(f64, Vec<f64>)> {
    if grid.len() != lam.len() {
        return Err(Error::DimensionMismatch("grid/series lengths".into()));
    }
    let (i0, i2) = window(grid, t1, t2)?;
    if i2 - i0 + 1 < 3 {
        return Err(Error::InvalidArgument(
            "graph norm needs at least 3 grid points in the window".into(),
        ));
    }
    let pw = pointwise_weight.unwrap_or(y);
    let norm_sq = |w: &Weight, v: &Vector| -> f64 { v.dot(&w.apply(v)) };

    let mut integrand = Vec::with_capacity(i2 - i0 + 1);
    let mut pointwise = Vec::with_capacity(i2 - i0 + 1);
    for i in i0..=i2 {
        let deriv = if i == i0 {
            let h = grid[i + 1] - grid[i];
            (-3.0 * &lam[i] + 4.0 * &lam[i + 1] - &lam[i + 2]) / (2.0 * h)
        } else if i == i2 {
            let h = grid[i] - grid[i - 1];
            (3.0 * &lam[i] - 4.0 * &lam[i - 1] + &lam[i - 2]) / (2.0 * h)
        } else {
            (&lam[i + 1] - &lam[i - 1]) / (grid[i + 1] - grid[i - 1])
        };
        integrand.push(norm_sq(y, &deriv) + norm_sq(y, &lam[i]) + norm_sq(y, &(a_star * &lam[i])));
        pointwise.push(norm_sq(pw, &lam[i]).sqrt());
    }
    let mut w_sq = 0.0;
    for j in 0..integrand.len() - 1 {
        w_sq += 0.5 * (grid[i0 + j + 1] - grid[i0 + j]) * (integrand[j] + integrand[j + 1]);
    }
    Ok((w_sq.sqrt(), pointwise))
}

/// Per-run digest of every turnpike diagnostic, one entry per requested
/// epsilon where applicable. Recomputable from the deviation and remainder
/// series it summarizes.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TurnpikeReport {
    /// Threshold levels, positive and decreasing.
    pub epsilons: Vec<f64>,
    /// Largest `d ≤ ε` interval per epsilon.
    pub state_intervals: Vec<IntervalFinding>,
    /// Largest `d_adj ≤ ε` interval per epsilon.
    pub adjoint_intervals: Vec<IntervalFinding>,
    /// State intervals of the steady-magnitude-normalized deviation.
    pub normalized_intervals: Vec<IntervalFinding>,
    /// Measure of `{t : d > ε}` per epsilon.
    pub exceedance: Vec<f64>,
    /// `max d_adj` over the detected state interval, per epsilon; zero when
    /// the interval is empty.
    pub rho: Vec<f64>,
    pub fit: Option<ExpFit>,
    pub expstab: Option<BoundAudit>,
    pub excont: Option<BoundAudit>,
    /// Graph norm of `δλ` over the detected adjoint interval.
    pub w_norm: Option<f64>,
    /// Reasons for any omitted entries (unavailable fits, inapplicable
    /// audits).
    pub notes: Vec<String>,
}

/// Adjoint-boundedness statistic across a horizon sweep.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AdjointBoundAudit {
    /// `(horizon, ρ)` with `ρ = max ‖δλ‖_Y` over the detected state-control
    /// turnpike interval of that run.
    pub rho: Vec<(f64, f64)>,
    /// `ρ` never grows by more than 10% from one horizon to the next.
    pub bounded: bool,
}

/// Audits the uniform-boundedness hypothesis on the adjoint deviation: for
/// each run, `ρ(T)` is the largest `d_adj` over the largest `d ≤ ε`
/// interval. Needs at least two horizons.
pub fn audit_adjoint_bound(runs: &[(f64, DeviationSeries)], epsilon: f64) -> Result<AdjointBoundAudit> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument("adjoint audit needs at least two horizons".into()));
    }
    let mut rho = Vec::with_capacity(runs.len());
    for (horizon, series) in runs {
        let finding = series.state_interval(epsilon)?;
        let empty = !series.d.iter().any(|&v| v <= epsilon);
        let r = if empty {
            0.0
        } else {
            series
                .grid
                .iter()
                .zip(series.d_adj.iter())
                .filter(|(&t, _)| t >= finding.t1 - 1e-12 && t <= finding.t2 + 1e-12)
                .map(|(_, &v)| v)
                .fold(0.0, f64::max)
        };
        rho.push((*horizon, r));
    }
    rho.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let bounded = rho.windows(2).all(|w| w[1].1 <= 1.1 * w[0].1 + 1e-14);
    Ok(AdjointBoundAudit { rho, bounded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostFunctional, SteadyResiduals};
    use crate::spectral::observability_constant;
    use approx::assert_relative_eq;

    fn scalar_system() -> ControlSystem {
        ControlSystem::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::from_element(1, 1, 1.0),
            Weight::identity(1),
            Weight::identity(1),
        )
        .unwrap()
    }

    fn steady_half() -> SteadyOptimum {
        SteadyOptimum {
            x_bar: Vector::from_element(1, 0.5),
            u_bar: Vector::from_element(1, 0.5),
            lambda_bar: Vector::from_element(1, 0.5),
            objective: 0.25,
            residuals: SteadyResiduals { dynamics: 0.0, adjoint: 0.0, stationarity: 0.0 },
            iterations: 0,
            residual_history: vec![],
        }
    }

    #[test]
    fn steady_trajectory_has_zero_deviation_and_zero_audit_constants() {
        let sys = scalar_system();
        let cost = CostFunctional::quadratic(
            Matrix::identity(1, 1),
            Vector::from_element(1, 1.0),
            Matrix::identity(1, 1),
            Vector::zeros(1),
        )
        .unwrap();
        let steady = steady_half();
        let traj = Trajectory::steady(&steady, 10.0, 0.1);
        let dev = deviation_series(&sys, &traj, &steady).unwrap();
        assert!(dev.d.iter().all(|&v| v == 0.0));
        assert!(dev.d_adj.iter().all(|&v| v == 0.0));

        let rem = crate::model::remainder_series(&sys, &cost, &traj, &steady).unwrap();
        let series = audit_series(&sys, &rem, &traj, &steady).unwrap();
        let bound = SemigroupBound { m: 1.05, mu: 0.5, valid: true, abscissa: -1.0 };
        let audit = audit_expstab_bound(&series, &bound, 0.0, 10.0).unwrap();
        assert_eq!(audit.c, 0.0);
        assert!(!audit.degenerate);
        assert_eq!(audit.s1, 0.0);
        assert_relative_eq!(audit.s2, 5.0);

        let cert = observability_constant(&Matrix::zeros(1, 1), &Matrix::identity(1, 1), 1.0).unwrap();
        let audit = audit_excont_bound(&series, &cert, 0.0, 10.0).unwrap();
        assert_eq!(audit.c, 0.0);
        assert_relative_eq!(audit.s1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(audit.s2, 10.0);
    }

    #[test]
    fn single_point_deviation_is_the_norm_of_the_bump() {
        let sys = scalar_system();
        let steady = steady_half();
        let mut traj = Trajectory::steady(&steady, 1.0, 0.1);
        traj.states[4][0] += 0.25;
        let dev = deviation_series(&sys, &traj, &steady).unwrap();
        assert_relative_eq!(dev.d[4], 0.25, epsilon = 1e-15);
        assert!(dev.d.iter().enumerate().all(|(k, &v)| k == 4 || v == 0.0));
    }

    #[test]
    fn tent_series_interval_and_exceedance_match_hand_values() {
        let dt = 0.1;
        let n = 100;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let d: Vec<f64> = grid.iter().map(|&t| (t - 5.0).abs()).collect();
        let f = largest_interval(&grid, &d, 1.0).unwrap();
        assert_relative_eq!(f.t1, 4.0, epsilon = 1e-12);
        assert_relative_eq!(f.t2, 6.0, epsilon = 1e-12);
        assert_relative_eq!(f.length, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.fraction_of_horizon, 0.2, epsilon = 1e-12);
        let m = exceedance_measure(&grid, &d, 1.0).unwrap();
        assert!((m - 8.0).abs() <= dt + 1e-12, "measure {m}");

        // larger epsilon can only widen the interval
        let wider = largest_interval(&grid, &d, 2.0).unwrap();
        assert!(wider.length >= f.length);

        // complement identity: exceedance fractions sum to the horizon
        let mut complement = 0.0;
        for k in 0..n {
            let inside = (d[k] <= 1.0) as u8 + (d[k + 1] <= 1.0) as u8;
            complement += dt * f64::from(inside) * 0.5;
        }
        assert_relative_eq!(m + complement, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_and_full_intervals_collapse_as_specified() {
        let grid = vec![0.0, 1.0, 2.0, 3.0];
        let zero = vec![0.0; 4];
        let f = largest_interval(&grid, &zero, 0.5).unwrap();
        assert_eq!((f.t1, f.t2), (0.0, 3.0));
        assert_relative_eq!(f.fraction_of_horizon, 1.0);

        let high = vec![9.0; 4];
        let f = largest_interval(&grid, &high, 0.5).unwrap();
        assert_eq!((f.t1, f.t2), (0.0, 0.0));
        assert_eq!(f.length, 0.0);

        // tie between [0,1] and [2,3] resolves to the earlier one
        let tied = vec![0.1, 0.1, 9.0, 0.1, 0.1];
        let grid5 = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let f = largest_interval(&grid5, &tied, 0.5).unwrap();
        assert_eq!((f.t1, f.t2), (0.0, 1.0));
    }

    #[test]
    fn exponential_fit_recovers_exact_model_parameters() {
        let horizon = 20.0;
        let n = 400;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 * horizon / n as f64).collect();
        let d: Vec<f64> = grid
            .iter()
            .map(|&t| 2.0 * ((-0.5 * t).exp() + (-0.5 * (horizon - t)).exp()))
            .collect();
        let fit = fit_exponential(&grid, &d, horizon).unwrap();
        assert_relative_eq!(fit.c, 2.0, max_relative = 1e-6);
        assert_relative_eq!(fit.mu, 0.5, max_relative = 1e-6);
        assert!(fit.residual < 1e-8);
    }

    #[test]
    fn degenerate_series_are_rejected_or_flagged() {
        let grid: Vec<f64> = (0..=50).map(|k| k as f64 * 0.2).collect();
        let tiny = vec![1e-16; 51];
        match fit_exponential(&grid, &tiny, 10.0) {
            Err(Error::FitUnavailable(_)) => {}
            other => panic!("expected FitUnavailable, got {other:?}"),
        }
        // flat series: either unavailable or a vanishing rate
        let flat = vec![0.3; 51];
        match fit_exponential(&grid, &flat, 10.0) {
            Ok(fit) => assert!(fit.mu < 1e-2, "flat fit mu = {}", fit.mu),
            Err(Error::FitUnavailable(_)) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stability_audit_constant_matches_hand_computation() {
        let n = 100;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 * 0.1).collect();
        // end value zero kills the semigroup term; constant forcing 0.5
        let mut dlam = vec![2.0; n + 1];
        dlam[n] = 0.0;
        let series = AuditSeries {
            grid: grid.clone(),
            dlam,
            r_fx: vec![0.0; n + 1],
            r_fu: vec![0.0; n + 1],
            r_jx: vec![0.5; n + 1],
            r_ju: vec![0.0; n + 1],
        };
        let bound = SemigroupBound { m: 1.0, mu: 1.0, valid: true, abscissa: -2.0 };
        let audit = audit_expstab_bound(&series, &bound, 0.0, 10.0).unwrap();
        assert_relative_eq!(audit.c, 4.0, epsilon = 1e-12);
        assert!(!audit.degenerate);
        assert_relative_eq!(audit.s2, 5.0);

        // zero forcing with positive deviation: no finite constant
        let degenerate = AuditSeries { r_jx: vec![0.0; n + 1], ..series.clone() };
        let audit = audit_expstab_bound(&degenerate, &bound, 0.0, 10.0).unwrap();
        assert!(audit.degenerate && audit.c.is_infinite());

        // injected perturbation series enlarges the forcing, so the
        // constant shrinks and the implied bound grows by at most
        // 2·c·sup|σ|
        let sigma = 0.25;
        let mut perturbed = series.clone();
        for v in &mut perturbed.r_jx {
            *v += sigma;
        }
        let paudit = audit_expstab_bound(&perturbed, &bound, 0.0, 10.0).unwrap();
        assert!(paudit.c <= audit_expstab_bound(&series, &bound, 0.0, 10.0).unwrap().c);
        let base = audit_expstab_bound(&series, &bound, 0.0, 10.0).unwrap();
        let bound_growth = paudit.c * (0.5 + sigma) - base.c * 0.5;
        assert!(bound_growth <= 2.0 * base.c * sigma + 1e-12);
    }

    #[test]
    fn controllability_audit_constant_matches_hand_computation() {
        let n = 100;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 * 0.1).collect();
        let series = AuditSeries {
            grid,
            dlam: vec![1.0; n + 1],
            r_fx: vec![0.0; n + 1],
            r_fu: vec![0.0; n + 1],
            r_jx: vec![0.0; n + 1],
            r_ju: vec![0.5; n + 1],
        };
        let cert = observability_constant(&Matrix::zeros(1, 1), &Matrix::identity(1, 1), 1.0).unwrap();
        let audit = audit_excont_bound(&series, &cert, 0.0, 10.0).unwrap();
        // I(t) = ∫ 0.25 over one time unit; c = 1 / 0.25
        assert_relative_eq!(audit.c, 4.0, epsilon = 1e-10);
        assert_relative_eq!(audit.s1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(audit.s2, 10.0, epsilon = 1e-12);

        // window shorter than the controllability time
        match audit_excont_bound(&series, &cert, 4.0, 4.5) {
            Err(Error::NotApplicable(_)) => {}
            other => panic!("expected NotApplicable, got {other:?}"),
        }
        // certificate without a positive constant
        let uncontrollable = observability_constant(&Matrix::zeros(1, 1), &Matrix::zeros(1, 1), 1.0).unwrap();
        match audit_excont_bound(&series, &uncontrollable, 0.0, 10.0) {
            Err(Error::NotApplicable(_)) => {}
            other => panic!("expected NotApplicable, got {other:?}"),
        }
    }

    #[test]
    fn graph_norm_matches_the_analytic_decay_integral() {
        // λ(t) = e^{−t}·e₁ with A*e₁ = −e₁: integrand 3e^{−2t} on [0,1]
        let n = 500;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let lam: Vec<Vector> = grid
            .iter()
            .map(|&t| Vector::from_vec(vec![(-t).exp(), 0.0]))
            .collect();
        let a_star = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -3.0]));
        let y = Weight::identity(2);
        let (w, pointwise) = w_norm(&grid, &lam, &a_star, &y, None, 0.0, 1.0).unwrap();
        let exact = (3.0 * (1.0 - (-2.0f64).exp()) / 2.0).sqrt();
        assert_relative_eq!(w, exact, max_relative = 1e-5);
        assert_relative_eq!(pointwise[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(pointwise[n], (-1.0f64).exp(), epsilon = 1e-12);

        // zero series has zero norm; short windows are rejected
        let zeros: Vec<Vector> = grid.iter().map(|_| Vector::zeros(2)).collect();
        let (w0, _) = w_norm(&grid, &zeros, &a_star, &y, None, 0.0, 1.0).unwrap();
        assert_eq!(w0, 0.0);
        assert!(w_norm(&grid, &lam, &a_star, &y, None, 0.0, 0.003).is_err());
    }

    #[test]
    fn adjoint_bound_audit_flags_growth_beyond_tolerance() {
        let mk = |peak: f64| {
            let grid: Vec<f64> = (0..=10).map(|k| k as f64).collect();
            let d = vec![0.01; 11];
            let mut d_adj = vec![0.0; 11];
            d_adj[5] = peak;
            DeviationSeries {
                grid,
                d,
                d_adj,
                d_label: String::new(),
                d_adj_label: String::new(),
            }
        };
        let ok = audit_adjoint_bound(&[(10.0, mk(1.0)), (20.0, mk(1.05))], 0.1).unwrap();
        assert!(ok.bounded);
        assert_relative_eq!(ok.rho[0].1, 1.0);
        let bad = audit_adjoint_bound(&[(10.0, mk(1.0)), (20.0, mk(1.2))], 0.1).unwrap();
        assert!(!bad.bounded);
        assert!(audit_adjoint_bound(&[(10.0, mk(1.0))], 0.1).is_err());
    }
}
