//! Shared oracles for the integration suite. Everything here is closed
//! form or constructed-by-design, independent of the solver code paths it
//! is used to check.

#![allow(dead_code)]

use nalgebra::Complex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use turnpike::model::{Matrix, Vector};

/// Closed-form solution of the scalar tracking problem
/// `min ½∫ q(x−x_d)² + r u²` subject to `ẋ = a x + b u`, `x(0) = x0`,
/// with free endpoint (`λ(T) = 0`).
///
/// The two-point boundary problem is solved through the eigenvectors of
/// the 2×2 Hamiltonian matrix `[[a, b²/r], [q, −a]]` with the unstable
/// amplitude parameterized at `t = T`, so every exponential evaluated has
/// a non-positive exponent and the formulas stay accurate for any horizon.
pub struct ScalarLqOracle {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub x_d: f64,
    pub x0: f64,
    pub horizon: f64,
    /// Decay rate `√(a² + b²q/r)` of the Hamiltonian pair `±μ`.
    pub mu: f64,
    pub x_bar: f64,
    pub u_bar: f64,
    pub lambda_bar: f64,
    alpha_t: f64,
    beta: f64,
    v_plus: (f64, f64),
    v_minus: (f64, f64),
}

impl ScalarLqOracle {
    pub fn new(a: f64, b: f64, q: f64, r: f64, x_d: f64, x0: f64, horizon: f64) -> ScalarLqOracle {
        assert!(a != 0.0 && r > 0.0 && q > 0.0 && horizon > 0.0);
        let mu = (a * a + b * b * q / r).sqrt();
        let x_bar = b * b * q * x_d / (a * a * r + b * b * q);
        let lambda_bar = q * (x_bar - x_d) / a;
        let u_bar = b * lambda_bar / r;

        // deviation system ż = Mz, M = [[a, b²/r], [q, −a]], eigenpairs
        // (±μ, v±) with v± = (b²/r, ±μ − a)
        let v_plus = (b * b / r, mu - a);
        let v_minus = (b * b / r, -mu - a);

        // z(t) = α_T e^{μ(t−T)} v⁺ + β e^{−μt} v⁻ with z₁(0) = x0 − x̄ and
        // z₂(T) = −λ̄; ε = e^{−μT} keeps the 2×2 system well conditioned
        let eps = (-mu * horizon).exp();
        let dx0 = x0 - x_bar;
        let dlt = -lambda_bar;
        let det = eps * v_plus.0 * eps * v_minus.1 - v_minus.0 * v_plus.1;
        assert!(det.abs() > 1e-300, "degenerate boundary system");
        let alpha_t = (dx0 * eps * v_minus.1 - v_minus.0 * dlt) / det;
        let beta = (eps * v_plus.0 * dlt - v_plus.1 * dx0) / det;

        ScalarLqOracle {
            a,
            b,
            q,
            r,
            x_d,
            x0,
            horizon,
            mu,
            x_bar,
            u_bar,
            lambda_bar,
            alpha_t,
            beta,
            v_plus,
            v_minus,
        }
    }

    /// The spec's scalar tracking model: `a = −1, b = q = r = 1, x_d = 1`,
    /// `x0 = 0`.
    pub fn tracking(horizon: f64) -> ScalarLqOracle {
        ScalarLqOracle::new(-1.0, 1.0, 1.0, 1.0, 1.0, 0.0, horizon)
    }

    fn deviation(&self, t: f64) -> (f64, f64) {
        let up = self.alpha_t * (self.mu * (t - self.horizon)).exp();
        let down = self.beta * (-self.mu * t).exp();
        (
            up * self.v_plus.0 + down * self.v_minus.0,
            up * self.v_plus.1 + down * self.v_minus.1,
        )
    }

    /// `(x, u, λ)` at time `t`.
    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        let (zx, zl) = self.deviation(t);
        let lam = self.lambda_bar + zl;
        (self.x_bar + zx, self.u_bar + self.b / self.r * zl, lam)
    }

    /// Independent consistency check of the oracle itself: boundary
    /// conditions and the Hamiltonian ODE residual by central differences.
    pub fn self_check(&self) {
        let (x0, _, _) = self.at(0.0);
        assert!((x0 - self.x0).abs() < 1e-12, "x(0) = {x0}");
        let (_, _, lt) = self.at(self.horizon);
        assert!(lt.abs() < 1e-12, "λ(T) = {lt}");
        let h = 1e-5;
        for &t in &[0.3 * self.horizon, 0.5 * self.horizon, 0.9 * self.horizon] {
            let (xm, _, lm) = self.at(t - h);
            let (xp, _, lp) = self.at(t + h);
            let (x, u, lam) = self.at(t);
            let xdot = (xp - xm) / (2.0 * h);
            let ldot = (lp - lm) / (2.0 * h);
            assert!(
                (xdot - (self.a * x + self.b * u)).abs() < 1e-6,
                "state ODE residual at t = {t}"
            );
            assert!(
                (ldot - (self.q * (x - self.x_d) - self.a * lam)).abs() < 1e-6,
                "adjoint ODE residual at t = {t}"
            );
            assert!((self.r * u - self.b * lam).abs() < 1e-12, "stationarity at t = {t}");
        }
    }
}

/// The two-sided exponential envelope `c (e^{−μt} + e^{−μ(T−t)})`.
pub fn envelope(c: f64, mu: f64, t: f64, horizon: f64) -> f64 {
    c * ((-mu * t).exp() + (-mu * (horizon - t)).exp())
}

/// Haar-ish random orthogonal matrix from the QR factorization of a
/// Gaussian-free uniform sample (orthogonality is what matters here).
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    loop {
        let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let qr = g.qr();
        let q = qr.q();
        if qr.r()[(n - 1, n - 1)].abs() > 1e-6 {
            return q;
        }
    }
}

/// A random `n×n` operator with a planted spectrum: `n_unstable`
/// eigenvalues with real part in `[0.4, 2.0]`, the rest in `[−3.0, −0.4]`,
/// complex pairs allowed on both sides. Built as `Q (D + N) Qᵀ` with `D`
/// block diagonal, `N` strictly upper triangular and `Q` orthogonal, so
/// the spectrum is exactly the planted multiset while the operator itself
/// is dense and nonnormal.
pub fn planted_operator(
    rng: &mut ChaCha8Rng,
    n: usize,
    n_unstable: usize,
) -> (Matrix, Vec<Complex<f64>>) {
    assert!(n_unstable <= n);
    let mut t = Matrix::zeros(n, n);
    let mut eigs = Vec::with_capacity(n);

    let mut fill = |t: &mut Matrix, start: usize, count: usize, lo: f64, hi: f64, eigs: &mut Vec<Complex<f64>>| {
        let mut k = start;
        let end = start + count;
        while k < end {
            if end - k >= 2 && rng.random_range(0.0..1.0) < 0.5 {
                let re = rng.random_range(lo..hi);
                let im = rng.random_range(0.3..1.5);
                t[(k, k)] = re;
                t[(k + 1, k + 1)] = re;
                t[(k, k + 1)] = im;
                t[(k + 1, k)] = -im;
                eigs.push(Complex::new(re, im));
                eigs.push(Complex::new(re, -im));
                k += 2;
            } else {
                let re = rng.random_range(lo..hi);
                t[(k, k)] = re;
                eigs.push(Complex::new(re, 0.0));
                k += 1;
            }
        }
    };
    fill(&mut t, 0, n_unstable, 0.4, 2.0, &mut eigs);
    fill(&mut t, n_unstable, n - n_unstable, -3.0, -0.4, &mut eigs);

    // strictly upper noise above the 2×2 blocks keeps the spectrum intact
    for i in 0..n {
        for j in (i + 2)..n {
            t[(i, j)] = rng.random_range(-0.5..0.5);
        }
        if i + 1 < n && t[(i + 1, i)] == 0.0 && t[(i, i + 1)] == 0.0 {
            t[(i, i + 1)] = rng.random_range(-0.5..0.5);
        }
    }

    let q = random_orthogonal(rng, n);
    let a = &q * t * q.transpose();
    (a, eigs)
}

/// Sorts a complex multiset by real part, then imaginary part.
pub fn sort_spectrum(eigs: &mut [Complex<f64>]) {
    eigs.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
}

/// Largest pairwise distance between two equally sized complex multisets
/// after sorting.
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut a: Vec<Complex<f64>> = a.to_vec();
    let mut b: Vec<Complex<f64>> = b.to_vec();
    sort_spectrum(&mut a);
    sort_spectrum(&mut b);
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// A random controllable pair `(A, B)` with `n ≤ 4` states, checked by the
/// Kalman rank test (full-precision SVD rank with a 1e-8 threshold).
pub fn random_controllable_pair(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Matrix, Matrix) {
    loop {
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let mut kalman = Matrix::zeros(n, n * m);
        let mut block = b.clone();
        for k in 0..n {
            kalman.view_mut((0, k * m), (n, m)).copy_from(&block);
            block = &a * block;
        }
        if kalman.svd(false, false).rank(1e-8) == n {
            return (a, b);
        }
    }
}

/// Seeded RNG shorthand.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Relative gap `|got − want| / max(|want|, floor)`.
pub fn rel_err(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / want.abs().max(floor)
}

/// `(max − min) / mean` of a slice restricted by a predicate on the grid.
pub fn relative_variation(grid: &[f64], values: &[f64], t1: f64, t2: f64) -> f64 {
    let window: Vec<f64> = grid
        .iter()
        .zip(values.iter())
        .filter(|(&t, _)| t >= t1 - 1e-12 && t <= t2 + 1e-12)
        .map(|(_, &v)| v)
        .collect();
    assert!(window.len() >= 2, "empty plateau window");
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in &window {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    (hi - lo) / (sum / window.len() as f64)
}

/// Mean of a series over a grid window.
pub fn window_mean(grid: &[f64], values: &[f64], t1: f64, t2: f64) -> f64 {
    let window: Vec<f64> = grid
        .iter()
        .zip(values.iter())
        .filter(|(&t, _)| t >= t1 - 1e-12 && t <= t2 + 1e-12)
        .map(|(_, &v)| v)
        .collect();
    assert!(!window.is_empty(), "empty mean window");
    window.iter().sum::<f64>() / window.len() as f64
}

/// Builds a trajectory pinned to a steady triple on a uniform grid, for
/// audits of the exactly-steady case.
pub fn steady_trajectory(
    x_bar: &Vector,
    u_bar: &Vector,
    lambda_bar: &Vector,
    horizon: f64,
    dt: f64,
) -> turnpike::model::Trajectory {
    let n_steps = (horizon / dt).round() as usize;
    let grid: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
    turnpike::model::Trajectory {
        grid,
        dt,
        horizon,
        states: vec![x_bar.clone(); n_steps + 1],
        controls: vec![u_bar.clone(); n_steps + 1],
        adjoints: vec![lambda_bar.clone(); n_steps + 1],
        info: turnpike::model::SolverInfo {
            iterations: 0,
            converged: true,
            objective: 0.0,
            grad_norm: 0.0,
            objective_history: Vec::new(),
        },
    }
}
