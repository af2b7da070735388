//! Band-limited matrix storage and LU factorization.
//!
//! The implicit time steps of the PDE models produce step matrices
//! `I − dt·(𝒜 + f_x)` whose bandwidth is the grid stride; factoring them in
//! band form turns each step from O(n³) into O(n·bw²). Factorization is
//! Doolittle without pivoting guarded by a pivot threshold: the step matrices
//! are strictly diagonally dominant for the registered models, and callers
//! fall back to dense LU when the guard trips.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Square matrix stored by diagonals: entry (i, j) with |i − j| ≤ bw lives at
/// `data[(i − j + bw) * n + j]`.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, bw: usize) -> Banded {
        Banded {
            n,
            bw,
            data: vec![0.0; (2 * bw + 1) * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (i + self.bw - j) * self.n + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i.abs_diff(j) <= self.bw, "entry outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Captures a dense matrix, verifying that everything outside the band is
    /// exactly zero.
    pub fn from_dense(a: &DMatrix<f64>, bw: usize) -> Result<Banded> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch("banded capture needs square".into()));
        }
        let mut out = Banded::zeros(n, bw);
        for j in 0..n {
            for i in 0..n {
                let v = a[(i, j)];
                if i.abs_diff(j) <= bw {
                    out.set(i, j, v);
                } else if v != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i},{j}) = {v} outside declared bandwidth {bw}"
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.bw);
            let hi = (j + self.bw + 1).min(self.n);
            for i in lo..hi {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    pub fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw + 1).min(self.n);
            let mut acc = 0.0;
            for j in lo..hi {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }
}

/// LU factors of a banded matrix: unit lower triangle in the subdiagonal
/// band, U in the diagonal and superdiagonal band. No pivoting, so there is
/// no fill outside the original band.
#[derive(Debug, Clone)]
pub struct BandedLu {
    f: Banded,
}

impl BandedLu {
    /// Factors in place; fails when a pivot falls below `1e-12` times the
    /// largest absolute entry (caller should fall back to a dense solve).
    pub fn factor(mut a: Banded) -> Result<BandedLu> {
        let n = a.n;
        let bw = a.bw;
        let scale = a.data.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1e-300);
        let tol = 1e-12 * scale;
        for j in 0..n {
            let piv = a.get(j, j);
            if piv.abs() < tol {
                return Err(Error::LinearAlgebra(format!(
                    "banded LU pivot {piv:.3e} at column {j} below threshold"
                )));
            }
            let hi = (j + bw + 1).min(n);
            for i in (j + 1)..hi {
                let l = a.get(i, j) / piv;
                a.set(i, j, l);
                if l != 0.0 {
                    for k in (j + 1)..hi {
                        let upd = a.get(j, k);
                        if upd != 0.0 {
                            a.add(i, k, -l * upd);
                        }
                    }
                }
            }
        }
        Ok(BandedLu { f: a })
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        let n = self.f.n;
        let bw = self.f.bw;
        // forward: L y = b (unit diagonal)
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut acc = b[i];
            for j in lo..i {
                acc -= self.f.get(i, j) * b[j];
            }
            b[i] = acc;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut acc = b[i];
            for j in (i + 1)..hi {
                acc -= self.f.get(i, j) * b[j];
            }
            b[i] = acc / self.f.get(i, i);
        }
    }

    /// Solves `Aᵀ x = b` in place using the same factors (`Aᵀ = Uᵀ Lᵀ`).
    pub fn solve_transpose_in_place(&self, b: &mut DVector<f64>) {
        let n = self.f.n;
        let bw = self.f.bw;
        // forward: Uᵀ y = b (lower triangular, non-unit diagonal)
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut acc = b[i];
            for j in lo..i {
                acc -= self.f.get(j, i) * b[j];
            }
            b[i] = acc / self.f.get(i, i);
        }
        // backward: Lᵀ x = y (upper triangular, unit diagonal)
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut acc = b[i];
            for j in (i + 1)..hi {
                acc -= self.f.get(j, i) * b[j];
            }
            b[i] = acc;
        }
    }
}
