//! Eigenvalue-ordered real Schur decomposition.
//!
//! `ordered_schur` moves the diagonal blocks whose eigenvalues satisfy a
//! selection predicate to the leading position by orthogonal swaps of
//! adjacent blocks. The leading columns of the accumulated orthogonal factor
//! then span the corresponding invariant subspace, which is how the spectral
//! projector and restricted blocks are constructed without contour
//! integration.
//!
//! Swapping adjacent blocks `[T11 T12; 0 T22]` uses the direct method: solve
//! the small Sylvester equation `T11·X − X·T22 = −T12`, orthonormalize
//! `[X; I]` whose columns span the `T22`-invariant subspace, and apply the
//! completed orthogonal factor from both sides.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `A·X − X·B = C` by the Kronecker-product expansion.
///
/// Intended for the small systems arising in block swaps and spectral
/// projectors; refuses systems with more than `40_000` unknowns.
pub fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = a.nrows();
    let q = b.nrows();
    if a.ncols() != p || b.ncols() != q || c.nrows() != p || c.ncols() != q {
        return Err(Error::DimensionMismatch("sylvester operand shapes".into()));
    }
    if p == 0 || q == 0 {
        return Ok(DMatrix::zeros(p, q));
    }
    let m = p * q;
    if m > 40_000 {
        return Err(Error::InvalidArgument(format!(
            "sylvester system with {m} unknowns exceeds the dense solver limit"
        )));
    }
    // vec(AX) = (I_q ⊗ A) vec X, vec(XB) = (Bᵀ ⊗ I_p) vec X  (column stacking)
    let mut k = DMatrix::zeros(m, m);
    for jq in 0..q {
        for iq in 0..q {
            let bt = b[(jq, iq)]; // (Bᵀ)[iq, jq]
            for ip in 0..p {
                if iq == jq {
                    for jp in 0..p {
                        k[(iq * p + ip, jq * p + jp)] += a[(ip, jp)];
                    }
                }
                k[(iq * p + ip, jq * p + ip)] -= bt;
            }
        }
    }
    let rhs = DVector::from_iterator(m, c.iter().cloned());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotSeparated("sylvester system singular: spectra overlap".into()))?;
    Ok(DMatrix::from_iterator(p, q, sol.iter().cloned()))
}

/// Extends an n×k matrix with orthonormal columns to a full n×n orthogonal
/// matrix by Gram-Schmidt against coordinate vectors.
pub fn complete_orthonormal(thin: &DMatrix<f64>) -> DMatrix<f64> {
    let n = thin.nrows();
    let k = thin.ncols();
    let mut q = DMatrix::zeros(n, n);
    q.view_mut((0, 0), (n, k)).copy_from(thin);
    let mut filled = k;
    let mut cand = 0usize;
    while filled < n && cand < n {
        let mut v = DVector::zeros(n);
        v[cand] = 1.0;
        // two rounds of modified Gram-Schmidt for numerical orthogonality
        for _ in 0..2 {
            for j in 0..filled {
                let col = q.column(j);
                let proj = col.dot(&v);
                v.axpy(-proj, &col.into_owned(), 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            v /= norm;
            q.set_column(filled, &v);
            filled += 1;
        }
        cand += 1;
    }
    assert!(filled == n, "orthonormal completion failed");
    q
}

/// A diagonal block of a real quasi-triangular matrix.
#[derive(Debug, Clone, Copy)]
struct Block {
    start: usize,
    size: usize,
    selected: bool,
}

/// Result of [`ordered_schur`]: `a = q · t · qᵀ`, with the selected
/// eigenvalues occupying the leading `k`-dimensional invariant block of `t`.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// Dimension of the leading (selected) invariant block.
    pub k: usize,
}

/// Eigenvalues of a real quasi-triangular matrix, scanning 1×1 and 2×2
/// diagonal blocks.
pub fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let tr = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                out.push(Complex::new(tr + s, 0.0));
                out.push(Complex::new(tr - s, 0.0));
            } else {
                let s = (-disc).sqrt();
                out.push(Complex::new(tr, s));
                out.push(Complex::new(tr, -s));
            }
            i += 2;
        } else {
            out.push(Complex::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

fn apply_local_orthogonal(
    t: &mut DMatrix<f64>,
    q: &mut DMatrix<f64>,
    start: usize,
    w: &DMatrix<f64>,
) {
    let m = w.nrows();
    let n = t.nrows();
    let wt = w.transpose();
    let rows = wt.clone() * t.view((start, 0), (m, n));
    t.view_mut((start, 0), (m, n)).copy_from(&rows);
    let cols = t.view((0, start), (n, m)) * w;
    t.view_mut((0, start), (n, m)).copy_from(&cols);
    let qc = q.view((0, start), (n, m)) * w;
    q.view_mut((0, start), (n, m)).copy_from(&qc);
}

/// Splits a 2×2 diagonal block with real eigenvalues into two 1×1 blocks via
/// a plane rotation, so that every remaining 2×2 block is a complex pair.
fn standardize_blocks(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>) {
    let n = t.nrows();
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc >= 0.0 {
                let lam = 0.5 * (a + d) + disc.sqrt().copysign(a - d + f64::MIN_POSITIVE);
                // eigenvector of [[a,b],[c,d]] for lam: two analytic choices,
                // keep the larger for stability
                let v1 = DVector::from_vec(vec![b, lam - a]);
                let v2 = DVector::from_vec(vec![lam - d, c]);
                let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
                let norm = v.norm();
                let w = if norm > 0.0 {
                    DMatrix::from_column_slice(2, 2, &[v[0] / norm, v[1] / norm, -v[1] / norm, v[0] / norm])
                } else {
                    DMatrix::identity(2, 2)
                };
                apply_local_orthogonal(t, q, i, &w);
                t[(i + 1, i)] = 0.0;
            }
            i += 2;
        } else {
            i += 1;
        }
    }
}

fn scan_blocks(t: &DMatrix<f64>, select: &dyn Fn(f64, f64) -> bool) -> Vec<Block> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let size = if i + 1 < n && t[(i + 1, i)] != 0.0 { 2 } else { 1 };
        let (re, im) = if size == 2 {
            let tr = 0.5 * (t[(i, i)] + t[(i + 1, i + 1)]);
            let disc = 0.25 * (t[(i, i)] - t[(i + 1, i + 1)]).powi(2) + t[(i, i + 1)] * t[(i + 1, i)];
            (tr, (-disc).max(0.0).sqrt())
        } else {
            (t[(i, i)], 0.0)
        };
        blocks.push(Block {
            start: i,
            size,
            selected: select(re, im),
        });
        i += size;
    }
    blocks
}

fn swap_adjacent(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>, s: usize, p: usize, r: usize) -> Result<()> {
    let t11 = t.view((s, s), (p, p)).into_owned();
    let t22 = t.view((s + p, s + p), (r, r)).into_owned();
    let t12 = t.view((s, s + p), (p, r)).into_owned();
    let x = solve_sylvester(&t11, &t22, &(-t12))?;
    let m = p + r;
    let mut z = DMatrix::zeros(m, r);
    z.view_mut((0, 0), (p, r)).copy_from(&x);
    z.view_mut((p, 0), (r, r)).copy_from(&DMatrix::identity(r, r));
    let thin = z.qr().q();
    let w = complete_orthonormal(&thin);
    apply_local_orthogonal(t, q, s, &w);
    // the transformed matrix is block upper triangular by construction; the
    // leftover subdiagonal entries are rounding noise
    let scale = t.amax().max(1e-300);
    for j in s..s + r {
        for i in (s + r)..(s + m) {
            if t[(i, j)].abs() > 1e-8 * scale {
                return Err(Error::LinearAlgebra(format!(
                    "block swap left residual {:.3e} at ({i},{j})",
                    t[(i, j)]
                )));
            }
            t[(i, j)] = 0.0;
        }
    }
    Ok(())
}

/// Computes a real Schur decomposition of `a` and reorders it so that every
/// eigenvalue satisfying `select(re, im)` appears in the leading invariant
/// block. All eigenvalues of any single 2×2 block share their real part, so
/// the predicate must not split conjugate pairs (it depends on `re` in
/// practice).
pub fn ordered_schur(a: &DMatrix<f64>, select: impl Fn(f64, f64) -> bool) -> Result<OrderedSchur> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("ordered_schur needs square".into()));
    }
    if n == 0 {
        return Ok(OrderedSchur {
            q: DMatrix::identity(0, 0),
            t: DMatrix::identity(0, 0),
            k: 0,
        });
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::LinearAlgebra("real Schur iteration did not converge".into()))?;
    let (mut q, mut t) = schur.unpack();
    standardize_blocks(&mut t, &mut q);

    let sel = |re: f64, im: f64| select(re, im);
    let mut blocks = scan_blocks(&t, &sel);
    loop {
        let mut swapped = false;
        for i in 0..blocks.len().saturating_sub(1) {
            if !blocks[i].selected && blocks[i + 1].selected {
                let (b0, b1) = (blocks[i], blocks[i + 1]);
                swap_adjacent(&mut t, &mut q, b0.start, b0.size, b1.size)?;
                blocks[i] = Block {
                    start: b0.start,
                    size: b1.size,
                    selected: true,
                };
                blocks[i + 1] = Block {
                    start: b0.start + b1.size,
                    size: b0.size,
                    selected: false,
                };
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    let k = blocks.iter().filter(|b| b.selected).map(|b| b.size).sum();
    Ok(OrderedSchur { q, t, k })
}
