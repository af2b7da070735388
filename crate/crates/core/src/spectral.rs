//! Spectral structure of the frozen adjoint operator: splitting into
//! unstable/stable invariant subspaces, detectability of the unstable part,
//! and constructive decay/controllability constants for the certificate
//! audits.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::linalg::{ordered_schur, quasi_triangular_eigenvalues, solve_sylvester, Weight};
use crate::model::{Matrix, Vector};

/// Minimum distance an eigenvalue may have from the splitting abscissa
/// before the decomposition is refused.
pub const SEPARATION_TOL: f64 = 1e-8;

/// Relative singular-value cutoff for numerical rank decisions.
const RANK_TOL: f64 = 1e-10;

/// Invariant-subspace decomposition of an operator by the vertical line
/// `Re(z) = −margin`.
///
/// `basis_u` spans the invariant subspace of eigenvalues right of the line
/// (orthonormal columns), `basis_s` the complementary invariant subspace
/// (also orthonormal; the two ranges are generally not orthogonal to each
/// other). `projection` is the (oblique) spectral projector onto
/// `range(basis_u)` along `range(basis_s)`.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    /// Dimension of the unstable (right-of-line) subspace.
    pub k: usize,
    pub basis_u: Matrix,
    pub basis_s: Matrix,
    /// `A·basis_u = basis_u·block_au`
    pub block_au: Matrix,
    /// `A·basis_s = basis_s·block_as`
    pub block_as: Matrix,
    /// Restriction of the paired control-adjoint operator to the unstable
    /// basis (`b_star·basis_u`, `m×k`); empty until
    /// [`SpectralSplit::with_control_op`] supplies the operator.
    pub block_bu: Matrix,
    /// `b_star·basis_s`, `m×(n−k)`.
    pub block_bs: Matrix,
    pub projection: Matrix,
    /// Smallest real-part separation between the two spectral groups;
    /// infinite when one group is empty.
    pub gap: f64,
}

/// Splits `a` by the line `Re(z) = −margin` (unstable side: `Re ≥ −margin`).
///
/// Any eigenvalue within [`SEPARATION_TOL`] (absolute) of the line makes the
/// split ill posed and is reported as `NotSeparated`.
pub fn spectral_split(a: &Matrix, margin: f64) -> Result<SpectralSplit> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("operator must be square".into()));
    }
    let abscissa = -margin;
    let eigs = a.complex_eigenvalues();
    for e in eigs.iter() {
        if (e.re - abscissa).abs() < SEPARATION_TOL {
            return Err(Error::NotSeparated(format!(
                "eigenvalue {:.6e}{:+.6e}i lies within {SEPARATION_TOL:.1e} of Re = {abscissa}",
                e.re, e.im
            )));
        }
    }

    let ordered = ordered_schur(a, &|re, _im| re > abscissa)?;
    let k = ordered.k;
    let q = &ordered.q;
    let t = &ordered.t;

    if k == 0 {
        return Ok(SpectralSplit {
            k: 0,
            basis_u: Matrix::zeros(n, 0),
            basis_s: Matrix::identity(n, n),
            block_au: Matrix::zeros(0, 0),
            block_as: a.clone(),
            block_bu: Matrix::zeros(0, 0),
            block_bs: Matrix::zeros(0, n),
            projection: Matrix::zeros(n, n),
            gap: f64::INFINITY,
        });
    }
    if k == n {
        return Ok(SpectralSplit {
            k,
            basis_u: q.clone(),
            basis_s: Matrix::zeros(n, 0),
            block_au: t.clone(),
            block_as: Matrix::zeros(0, 0),
            block_bu: Matrix::zeros(0, n),
            block_bs: Matrix::zeros(0, 0),
            projection: Matrix::identity(n, n),
            gap: f64::INFINITY,
        });
    }

    let t11 = t.view((0, 0), (k, k)).into_owned();
    let t12 = t.view((0, k), (k, n - k)).into_owned();
    let t22 = t.view((k, k), (n - k, n - k)).into_owned();

    // T11 Y − Y T22 = T12 gives both the projector and the complementary
    // invariant subspace Q·[−Y; I].
    let y = solve_sylvester(&t11, &t22, &t12)?;
    let mut inner = Matrix::zeros(n, n);
    inner.view_mut((0, 0), (k, k)).copy_from(&Matrix::identity(k, k));
    inner.view_mut((0, k), (k, n - k)).copy_from(&y);
    let projection = q * inner * q.transpose();

    let basis_u = q.columns(0, k).into_owned();
    let mut span_s = Matrix::zeros(n, n - k);
    span_s.view_mut((0, 0), (k, n - k)).copy_from(&(-&y));
    span_s
        .view_mut((k, 0), (n - k, n - k))
        .copy_from(&Matrix::identity(n - k, n - k));
    let span_s = q * span_s;
    let qr = span_s.qr();
    let basis_s = qr.q();
    let r = qr.r();
    // block_as = R T22 R⁻¹ (solve R⁻ᵀ on the transposed product), so that
    // A basis_s = basis_s block_as
    let block_as = r
        .transpose()
        .lu()
        .solve(&(&r * &t22).transpose())
        .ok_or_else(|| Error::LinearAlgebra("stable basis triangular factor is singular".into()))?
        .transpose();

    let re_u: Vec<f64> = quasi_triangular_eigenvalues(&t11).iter().map(|e| e.re).collect();
    let re_s: Vec<f64> = quasi_triangular_eigenvalues(&t22).iter().map(|e| e.re).collect();
    let mut gap = f64::INFINITY;
    for ru in &re_u {
        for rs in &re_s {
            gap = gap.min((ru - rs).abs());
        }
    }

    Ok(SpectralSplit {
        k,
        basis_u,
        basis_s,
        block_au: t11,
        block_as,
        block_bu: Matrix::zeros(0, k),
        block_bs: Matrix::zeros(0, n - k),
        projection,
        gap,
    })
}

impl SpectralSplit {
    /// Restricts a paired operator (rows acting on this space, such as the
    /// adjoint control operator) to the two bases, filling `block_bu` and
    /// `block_bs`.
    pub fn with_control_op(mut self, b_star: &Matrix) -> Result<SpectralSplit> {
        if b_star.ncols() != self.basis_u.nrows() {
            return Err(Error::DimensionMismatch("control operator columns".into()));
        }
        self.block_bu = b_star * &self.basis_u;
        self.block_bs = b_star * &self.basis_s;
        Ok(self)
    }

    /// Coordinates of `v` in the split: `v = basis_u a + basis_s b`.
    pub fn coordinates(&self, v: &Vector) -> (Vector, Vector) {
        let pu = &self.projection * v;
        let ps = v - &pu;
        (self.basis_u.transpose() * pu, self.basis_s.transpose() * ps)
    }
}

/// Splits an adjoint-valued series into its unstable and stable coordinate
/// series.
pub fn transform_adjoint(split: &SpectralSplit, series: &[Vector]) -> (Vec<Vector>, Vec<Vector>) {
    let mut us = Vec::with_capacity(series.len());
    let mut ss = Vec::with_capacity(series.len());
    for v in series {
        let (a, b) = split.coordinates(v);
        us.push(a);
        ss.push(b);
    }
    (us, ss)
}

/// Numerical rank of the complex matrix `Mr + i·Mi` via its real embedding
/// `[[Mr, −Mi], [Mi, Mr]]` (whose rank is twice the complex rank).
fn complex_rank(mr: &Matrix, mi: &Matrix, rel_tol: f64) -> usize {
    let (r, c) = (mr.nrows(), mr.ncols());
    let mut e = Matrix::zeros(2 * r, 2 * c);
    e.view_mut((0, 0), (r, c)).copy_from(mr);
    e.view_mut((0, c), (r, c)).copy_from(&(-mi));
    e.view_mut((r, 0), (r, c)).copy_from(mi);
    e.view_mut((r, c), (r, c)).copy_from(mr);
    let sv = e.svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count() / 2
}

/// Outcome of the Hautus rank test.
#[derive(Debug, Clone)]
pub struct HautusReport {
    pub detectable: bool,
    /// Eigenvalues with `Re ≥ 0` at which the stacked pencil lost rank.
    pub witnesses: Vec<Complex<f64>>,
}

/// Hautus-type detectability test for the pair `(a, c)` with `c` the
/// observation operator (rows observe states): every eigenvalue of `a` with
/// `Re ≥ 0` must keep `[a − sI; c]` at full column rank (numerical rank,
/// relative cutoff 1e-10).
pub fn hautus_detectable(a: &Matrix, c: &Matrix) -> Result<HautusReport> {
    let n = a.nrows();
    if a.ncols() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch("Hautus pencil shapes".into()));
    }
    let m = c.nrows();
    let eigs = a.complex_eigenvalues();
    let mut witnesses = Vec::new();
    for e in eigs.iter() {
        if e.re < 0.0 {
            continue;
        }
        let mut mr = Matrix::zeros(n + m, n);
        mr.view_mut((0, 0), (n, n)).copy_from(a);
        for i in 0..n {
            mr[(i, i)] -= e.re;
        }
        mr.view_mut((n, 0), (m, n)).copy_from(c);
        let rank = if e.im == 0.0 {
            let sv = mr.svd(false, false).singular_values;
            let smax = sv.max();
            if smax == 0.0 {
                0
            } else {
                sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
            }
        } else {
            let mut mi = Matrix::zeros(n + m, n);
            for i in 0..n {
                mi[(i, i)] = -e.im;
            }
            complex_rank(&mr, &mi, RANK_TOL)
        };
        if rank < n {
            witnesses.push(*e);
        }
    }
    Ok(HautusReport {
        detectable: witnesses.is_empty(),
        witnesses,
    })
}

/// Largest real part of the spectrum (the spectral abscissa); negative
/// exactly when the operator is Hurwitz.
pub fn stability_margin(a: &Matrix) -> f64 {
    if a.is_empty() {
        return f64::NEG_INFINITY;
    }
    let eigs = a.complex_eigenvalues();
    eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Constructive decay certificate `‖e^{at}‖_w ≤ m · e^{−mu·t}`.
///
/// `valid` is false when the operator is not Hurwitz, in which case `m` and
/// `mu` are meaningless.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SemigroupBound {
    #[serde(with = "crate::serde_util::maybe_inf")]
    pub m: f64,
    pub mu: f64,
    pub valid: bool,
    /// Spectral abscissa (max real part) of the certified operator.
    pub abscissa: f64,
}

const SEMIGROUP_SAMPLES: usize = 200;
/// Largest non-symmetrizable operator the sampling path accepts.
const SEMIGROUP_DENSE_LIMIT: usize = 400;

/// Certifies exponential decay of `e^{at}` in the `w`-weighted operator
/// norm, with `mu` set to half the distance of the spectrum from the
/// imaginary axis.
///
/// Operators that are self-adjoint in the `w` inner product decay without
/// transient growth, so their constant is immediate. Other operators are
/// sampled: `m = 1.05 · max(1, sup_t ‖e^{at}‖_w e^{mu·t})` over 200
/// log-spaced times covering `[1e-3, 20/mu]`. A non-Hurwitz operator yields
/// an invalid certificate rather than an error.
pub fn semigroup_bound(a: &Matrix, w: &Weight) -> Result<SemigroupBound> {
    let n = a.nrows();
    if a.ncols() != n || w.dim() != n {
        return Err(Error::DimensionMismatch("semigroup operator/weight".into()));
    }
    if n == 0 {
        return Ok(SemigroupBound {
            m: 1.05,
            mu: f64::INFINITY,
            valid: true,
            abscissa: f64::NEG_INFINITY,
        });
    }
    let abscissa = stability_margin(a);
    if abscissa >= 0.0 {
        return Ok(SemigroupBound {
            m: f64::INFINITY,
            mu: 0.0,
            valid: false,
            abscissa,
        });
    }
    let mu = -0.5 * abscissa;

    let wa = w.apply_mat(a);
    let asym = (&wa - wa.transpose()).amax();
    if asym <= 1e-10 * wa.amax().max(1.0) {
        // w-self-adjoint: ‖e^{at}‖_w = e^{abscissa·t}, so the supremum is 1
        return Ok(SemigroupBound {
            m: 1.05,
            mu,
            valid: true,
            abscissa,
        });
    }

    if n > SEMIGROUP_DENSE_LIMIT {
        return Err(Error::NotApplicable(format!(
            "sampled decay certificate limited to operators of size ≤ {SEMIGROUP_DENSE_LIMIT} \
             unless self-adjoint in the weight (got {n})"
        )));
    }
    let t_min: f64 = 1e-3;
    let t_max = (20.0 / mu).max(2.0 * t_min);
    let mut sup = 1.0f64;
    for j in 0..SEMIGROUP_SAMPLES {
        let s = j as f64 / (SEMIGROUP_SAMPLES - 1) as f64;
        let t = (t_min.ln() + s * (t_max.ln() - t_min.ln())).exp();
        let e = (a * t).exp();
        let nrm = crate::linalg::op_norm(&e, w, w);
        sup = sup.max(nrm * (mu * t).exp());
    }
    Ok(SemigroupBound {
        m: 1.05 * sup,
        mu,
        valid: true,
        abscissa,
    })
}

/// Finite-time controllability certificate: `alpha` is the smallest
/// eigenvalue of the controllability Gramian over `[0, t_c]`; positive
/// `alpha` certifies exact controllability in time `t_c`.
#[derive(Debug, Clone)]
pub struct ObservabilityCertificate {
    pub t_c: f64,
    pub alpha: f64,
    pub gramian: Matrix,
}

/// Gramian `G = ∫₀^{t_c} e^{As} B Bᵀ e^{Aᵀs} ds` assembled with the
/// augmented-exponential identity (no quadrature error), and its smallest
/// eigenvalue.
pub fn observability_constant(a: &Matrix, b: &Matrix, t_c: f64) -> Result<ObservabilityCertificate> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch("Gramian pair shapes".into()));
    }
    if !(t_c > 0.0) {
        return Err(Error::InvalidArgument("t_c must be positive".into()));
    }
    let bbt = b * b.transpose();
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&bbt);
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let e = (h * t_c).exp();
    let f11 = e.view((0, 0), (n, n)).into_owned();
    let f12 = e.view((0, n), (n, n)).into_owned();
    let g = f12 * f11.transpose();
    let g = (&g + g.transpose()) * 0.5;
    let alpha = nalgebra::linalg::SymmetricEigen::new(g.clone()).eigenvalues.min();
    // clamp eigensolver dust on exactly singular Gramians
    let alpha = if alpha < 0.0 && alpha > -1e-12 * g.amax().max(1.0) {
        0.0
    } else {
        alpha
    };
    Ok(ObservabilityCertificate { t_c, alpha, gramian: g })
}

/// Complex eigenvalues of `a` (convenience wrapper used by reports).
pub fn eigenvalues(a: &Matrix) -> Vec<Complex<f64>> {
    if a.is_empty() {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Random orthogonal similarity of a block-diagonal matrix with the
    /// given 1×1 and 2×2 (complex pair) blocks.
    fn planted(blocks: &[(f64, Option<f64>)], seed: u64) -> (Matrix, usize) {
        let n: usize = blocks.iter().map(|(_, im)| if im.is_some() { 2 } else { 1 }).sum();
        let mut d = Matrix::zeros(n, n);
        let mut at = 0;
        for &(re, im) in blocks {
            match im {
                None => {
                    d[(at, at)] = re;
                    at += 1;
                }
                Some(w) => {
                    d[(at, at)] = re;
                    d[(at, at + 1)] = w;
                    d[(at + 1, at)] = -w;
                    d[(at + 1, at + 1)] = re;
                    at += 2;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = g.qr().q();
        (&q * d * q.transpose(), n)
    }

    #[test]
    fn split_reconstructs_invariant_subspaces() {
        let (a, n) = planted(
            &[(-3.0, None), (-0.5, Some(1.5)), (0.4, None), (1.0, Some(2.0)), (2.0, None), (-1.0, None)],
            11,
        );
        let s = spectral_split(&a, 0.0).unwrap();
        assert_eq!(s.k, 4);
        assert_eq!(s.basis_u.ncols(), 4);
        assert_eq!(s.basis_s.ncols(), n - 4);
        let scale = a.amax();
        // invariance of both bases
        assert!(((&a * &s.basis_u) - (&s.basis_u * &s.block_au)).amax() < 1e-9 * scale);
        assert!(((&a * &s.basis_s) - (&s.basis_s * &s.block_as)).amax() < 1e-9 * scale);
        // projector: idempotent, commutes with a, identity on U, zero on S
        let p = &s.projection;
        assert!((p * p - p).amax() < 1e-8);
        assert!((p * &a - &a * p).amax() < 1e-8 * scale);
        assert!((p * &s.basis_u - &s.basis_u).amax() < 1e-9);
        assert!((p * &s.basis_s).amax() < 1e-9);
        // spectra land in the right half planes
        let re_u = s.block_au.complex_eigenvalues();
        assert!(re_u.iter().all(|e| e.re > 0.0));
        let re_s = s.block_as.complex_eigenvalues();
        assert!(re_s.iter().all(|e| e.re < 0.0));
        assert_relative_eq!(s.gap, 0.4 - (-0.5), epsilon = 1e-7);
    }

    #[test]
    fn merged_block_spectra_reproduce_the_full_spectrum() {
        let (a, _) = planted(&[(-2.0, Some(0.3)), (0.7, None), (1.5, Some(1.0)), (-0.9, None)], 21);
        let s = spectral_split(&a, 0.0).unwrap();
        let mut merged: Vec<(f64, f64)> = eigenvalues(&s.block_au)
            .into_iter()
            .chain(eigenvalues(&s.block_as))
            .map(|e| (e.re, e.im))
            .collect();
        let mut full: Vec<(f64, f64)> = eigenvalues(&a).into_iter().map(|e| (e.re, e.im)).collect();
        let key = |p: &(f64, f64)| (p.0, p.1);
        merged.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        full.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (m, f) in merged.iter().zip(full.iter()) {
            assert!((m.0 - f.0).abs() < 1e-8 && (m.1 - f.1).abs() < 1e-8);
        }
    }

    #[test]
    fn trivial_splits_use_identity_bases() {
        let (a, n) = planted(&[(-1.0, None), (-2.0, Some(0.7))], 3);
        let s = spectral_split(&a, 0.0).unwrap();
        assert_eq!(s.k, 0);
        assert_eq!(s.projection.amax(), 0.0);
        assert_eq!(s.basis_s, Matrix::identity(n, n));
        assert_eq!(s.block_as, a);
        assert!(s.gap.is_infinite());

        let s = spectral_split(&a, 5.0).unwrap();
        assert_eq!(s.k, n);
        assert!((s.projection - Matrix::identity(n, n)).amax() < 1e-12);
        assert!(s.gap.is_infinite());
    }

    #[test]
    fn control_restriction_lands_in_the_right_blocks() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        let b_star = Matrix::from_row_slice(1, 2, &[3.0, 5.0]);
        let s = spectral_split(&a, 0.0).unwrap().with_control_op(&b_star).unwrap();
        assert_eq!(s.block_bu.shape(), (1, 1));
        assert_eq!(s.block_bs.shape(), (1, 1));
        // bases are ±e1 / ±e2; restrictions pick the matching entries
        assert_relative_eq!(s.block_bu[(0, 0)].abs(), 3.0, epsilon = 1e-12);
        assert_relative_eq!(s.block_bs[(0, 0)].abs(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalue_on_the_line_is_refused() {
        let (a, _) = planted(&[(1e-12, None), (-1.0, None)], 5);
        match spectral_split(&a, 0.0) {
            Err(Error::NotSeparated(_)) => {}
            other => panic!("expected NotSeparated, got {other:?}"),
        }
    }

    #[test]
    fn adjoint_series_coordinates_reconstruct_the_series() {
        let (a, n) = planted(&[(-2.0, None), (0.5, Some(1.0)), (-0.3, None)], 9);
        let s = spectral_split(&a, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let series: Vec<Vector> =
            (0..5).map(|_| Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).collect();
        let (us, ss) = transform_adjoint(&s, &series);
        for i in 0..series.len() {
            let rec = &s.basis_u * &us[i] + &s.basis_s * &ss[i];
            assert!((rec - &series[i]).amax() < 1e-10);
        }
    }

    #[test]
    fn hautus_flags_unobserved_unstable_mode() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        let sees_stable_only = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let rep = hautus_detectable(&a, &sees_stable_only).unwrap();
        assert!(!rep.detectable);
        assert_eq!(rep.witnesses.len(), 1);
        assert_relative_eq!(rep.witnesses[0].re, 1.0, epsilon = 1e-12);
        let rep = hautus_detectable(&a, &Matrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        assert!(rep.detectable && rep.witnesses.is_empty());
    }

    #[test]
    fn hautus_handles_complex_pairs_and_hurwitz_operators() {
        // rotation block (eigenvalues ±i) observed through one coordinate
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(hautus_detectable(&a, &c).unwrap().detectable);
        assert!(!hautus_detectable(&a, &Matrix::zeros(1, 2)).unwrap().detectable);
        // Hurwitz operators are detectable vacuously
        let h = Matrix::from_diagonal(&Vector::from_vec(vec![-0.1, -2.0]));
        assert!(hautus_detectable(&h, &Matrix::zeros(1, 2)).unwrap().detectable);
    }

    #[test]
    fn stability_margin_is_the_spectral_abscissa() {
        assert_relative_eq!(
            stability_margin(&Matrix::from_diagonal(&Vector::from_vec(vec![-2.0, -1.0]))),
            -1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            stability_margin(&Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]))),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn semigroup_bound_is_tight_for_self_adjoint_operators() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -2.0]));
        let b = semigroup_bound(&a, &Weight::identity(2)).unwrap();
        assert!(b.valid);
        assert_relative_eq!(b.abscissa, -1.0, epsilon = 1e-12);
        assert_relative_eq!(b.mu, 0.5, epsilon = 1e-12);
        assert_relative_eq!(b.m, 1.05, epsilon = 1e-12);
    }

    #[test]
    fn semigroup_bound_covers_jordan_transient() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        let b = semigroup_bound(&a, &Weight::identity(2)).unwrap();
        assert!(b.valid);
        assert!(b.m > 1.0);
        // verify the certificate on a uniform sample of [0, 10/mu]
        let id = Weight::identity(2);
        for j in 0..=200 {
            let t = j as f64 / 200.0 * 10.0 / b.mu;
            let nrm = crate::linalg::op_norm(&(&a * t).exp(), &id, &id);
            assert!(
                nrm <= b.m * (-b.mu * t).exp() + 1e-9,
                "violated at t = {t}: {nrm} vs {}",
                b.m * (-b.mu * t).exp()
            );
        }
    }

    #[test]
    fn strongly_nonnormal_operator_needs_a_large_constant() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 100.0, 0.0, -2.0]);
        let b = semigroup_bound(&a, &Weight::identity(2)).unwrap();
        assert!(b.valid);
        assert!(b.m > 10.0, "m = {}", b.m);
    }

    #[test]
    fn non_hurwitz_operator_yields_invalid_certificate() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, -1.0]));
        let b = semigroup_bound(&a, &Weight::identity(2)).unwrap();
        assert!(!b.valid);
        assert_relative_eq!(b.abscissa, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn scalar_gramian_constants_are_the_window_length() {
        let a = Matrix::zeros(1, 1);
        let b = Matrix::identity(1, 1);
        let c1 = observability_constant(&a, &b, 1.0).unwrap();
        assert_relative_eq!(c1.alpha, 1.0, epsilon = 1e-10);
        let c2 = observability_constant(&a, &b, 2.0).unwrap();
        assert_relative_eq!(c2.alpha, 2.0, epsilon = 1e-10);
        // zero control operator: exactly uncontrollable
        let z = observability_constant(&a, &Matrix::zeros(1, 1), 1.0).unwrap();
        assert!(z.alpha <= 1e-12);
        assert!(observability_constant(&a, &b, 0.0).is_err());
    }

    #[test]
    fn gramian_matches_quadrature_and_grows_with_the_window() {
        let a = Matrix::from_row_slice(2, 2, &[-0.3, 1.0, 0.0, -0.8]);
        let b = Matrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let t_c = 1.7;
        let cert = observability_constant(&a, &b, t_c).unwrap();
        // trapezoid quadrature of the Gramian
        let steps = 4000;
        let dt = t_c / steps as f64;
        let mut g = Matrix::zeros(2, 2);
        for j in 0..=steps {
            let e = (&a * (j as f64 * dt)).exp();
            let eb = e * &b;
            let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
            g += &eb * eb.transpose() * (w * dt);
        }
        assert!((&cert.gramian - &g).amax() < 1e-5);
        let lam = nalgebra::linalg::SymmetricEigen::new(g).eigenvalues.min();
        assert_relative_eq!(cert.alpha, lam, epsilon = 1e-6, max_relative = 1e-5);

        // monotone in t_c
        let mut prev = 0.0;
        for &tc in &[0.5, 1.0, 2.0, 4.0] {
            let c = observability_constant(&a, &b, tc).unwrap();
            assert!(c.alpha >= prev - 1e-12);
            prev = c.alpha;
        }
    }
}
