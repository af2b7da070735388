//! Symmetric positive definite inner-product weights.
//!
//! All norms in this crate are weighted Euclidean norms `‖v‖_W = √(vᵀWv)`.
//! Operator norms between weighted spaces are computed as the spectral norm
//! of the symmetrically transformed matrix `LoutᵀM Lin⁻ᵀ` where `W = LLᵀ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An SPD weight matrix with cheap application paths for the common shapes.
#[derive(Debug, Clone)]
pub enum Weight {
    /// Euclidean inner product of the given dimension.
    Identity(usize),
    /// Diagonal weight with strictly positive entries.
    Diagonal(DVector<f64>),
    /// General SPD weight; the Cholesky factor is kept for solves.
    Dense {
        mat: DMatrix<f64>,
        chol: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
    },
}

impl Weight {
    pub fn identity(n: usize) -> Weight {
        Weight::Identity(n)
    }

    pub fn diagonal(d: DVector<f64>) -> Result<Weight> {
        if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "diagonal weight entries must be positive and finite".into(),
            ));
        }
        Ok(Weight::Diagonal(d))
    }

    /// Builds a dense weight, checking symmetry to 1e-12 (relative) and
    /// positive definiteness via Cholesky.
    pub fn dense(mat: DMatrix<f64>) -> Result<Weight> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch("weight must be square".into()));
        }
        let scale = mat.amax().max(1e-300);
        let asym = (&mat - mat.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "weight not symmetric: asymmetry {asym:.3e} exceeds 1e-12 relative"
            )));
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        let chol = nalgebra::linalg::Cholesky::new(sym.clone())
            .ok_or_else(|| Error::InvalidArgument("weight not positive definite".into()))?;
        Ok(Weight::Dense { mat: sym, chol })
    }

    pub fn dim(&self) -> usize {
        match self {
            Weight::Identity(n) => *n,
            Weight::Diagonal(d) => d.len(),
            Weight::Dense { mat, .. } => mat.nrows(),
        }
    }

    /// `W v`
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Weight::Identity(_) => v.clone(),
            Weight::Diagonal(d) => v.component_mul(d),
            Weight::Dense { mat, .. } => mat * v,
        }
    }

    /// `W⁻¹ v`
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Weight::Identity(_) => v.clone(),
            Weight::Diagonal(d) => v.component_div(d),
            Weight::Dense { chol, .. } => chol.solve(v),
        }
    }

    /// `W M` for a matrix with matching row count.
    pub fn apply_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Identity(_) => m.clone(),
            Weight::Diagonal(d) => {
                let mut out = m.clone();
                for (i, &w) in d.iter().enumerate() {
                    out.row_mut(i).scale_mut(w);
                }
                out
            }
            Weight::Dense { mat, .. } => mat * m,
        }
    }

    /// `W⁻¹ M`
    pub fn solve_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Identity(_) => m.clone(),
            Weight::Diagonal(d) => {
                let mut out = m.clone();
                for (i, &w) in d.iter().enumerate() {
                    out.row_mut(i).scale_mut(1.0 / w);
                }
                out
            }
            Weight::Dense { chol, .. } => {
                let mut out = m.clone();
                for j in 0..m.ncols() {
                    let col = chol.solve(&DVector::from(m.column(j).into_owned()));
                    out.set_column(j, &col);
                }
                out
            }
        }
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Weight::Identity(_) => a.dot(b),
            Weight::Diagonal(d) => a.iter().zip(b.iter()).zip(d.iter()).map(|((x, y), w)| x * y * w).sum(),
            Weight::Dense { mat, .. } => a.dot(&(mat * b)),
        }
    }

    pub fn norm_sq(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0)
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.norm_sq(v).sqrt()
    }

    /// `Lᵀ M` where `W = LLᵀ`.
    pub fn factor_t_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Identity(_) => m.clone(),
            Weight::Diagonal(d) => {
                let mut out = m.clone();
                for (i, &w) in d.iter().enumerate() {
                    out.row_mut(i).scale_mut(w.sqrt());
                }
                out
            }
            Weight::Dense { chol, .. } => chol.l().transpose() * m,
        }
    }

    /// `M L⁻ᵀ` where `W = LLᵀ`.
    pub fn mul_factor_inv_t(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Identity(_) => m.clone(),
            Weight::Diagonal(d) => {
                let mut out = m.clone();
                for (j, &w) in d.iter().enumerate() {
                    out.column_mut(j).scale_mut(1.0 / w.sqrt());
                }
                out
            }
            Weight::Dense { chol, .. } => {
                // M L⁻ᵀ  ⇔  solve Lᵀ Xᵀ = Mᵀ column-wise: X = (L⁻¹ Mᵀ)ᵀ... use
                // X = M (Lᵀ)⁻¹ via transposing a lower-triangular solve.
                let l = chol.l();
                let xt = l
                    .transpose()
                    .solve_upper_triangular(&m.transpose())
                    .expect("Cholesky factor is nonsingular");
                xt.transpose()
            }
        }
    }

    /// Materializes the weight as a dense matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            Weight::Identity(n) => DMatrix::identity(*n, *n),
            Weight::Diagonal(d) => DMatrix::from_diagonal(d),
            Weight::Dense { mat, .. } => mat.clone(),
        }
    }

    pub(crate) fn diag_entry(&self, i: usize) -> f64 {
        match self {
            Weight::Identity(_) => 1.0,
            Weight::Diagonal(d) => d[i],
            Weight::Dense { mat, .. } => mat[(i, i)],
        }
    }

    pub(crate) fn is_diagonal_shape(&self) -> bool {
        !matches!(self, Weight::Dense { .. })
    }
}

/// Metric adjoint `M* = W_dom⁻¹ Mᵀ W_cod` of `M : dom → cod`.
pub fn metric_adjoint(m: &DMatrix<f64>, dom: &Weight, cod: &Weight) -> DMatrix<f64> {
    dom.solve_mat(&cod.apply_mat(m).transpose())
}

fn offdiag_is_zero(m: &DMatrix<f64>) -> bool {
    let n = m.nrows().min(m.ncols());
    if m.nrows() != m.ncols() {
        return false;
    }
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Operator norm of `M : (dom, W_in) → (cod, W_out)`, i.e. the spectral norm
/// of `Loutᵀ M Lin⁻ᵀ`. Diagonal data takes a closed-form fast path.
pub fn op_norm(m: &DMatrix<f64>, cod: &Weight, dom: &Weight) -> f64 {
    if m.is_empty() || m.amax() == 0.0 {
        return 0.0;
    }
    if cod.is_diagonal_shape() && dom.is_diagonal_shape() && offdiag_is_zero(m) {
        let mut best = 0.0f64;
        for i in 0..m.nrows() {
            let v = m[(i, i)].abs() * (cod.diag_entry(i) / dom.diag_entry(i)).sqrt();
            best = best.max(v);
        }
        return best;
    }
    let t = dom.mul_factor_inv_t(&cod.factor_t_mul(m));
    if t.is_empty() {
        return 0.0;
    }
    t.svd(false, false).singular_values.max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dense_weight_rejects_asymmetric_and_indefinite() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(Weight::dense(bad).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Weight::dense(indef).is_err());
    }

    #[test]
    fn diagonal_weight_norm_and_solve() {
        let w = Weight::diagonal(DVector::from_vec(vec![4.0, 9.0])).unwrap();
        let v = DVector::from_vec(vec![1.0, 1.0]);
        assert_relative_eq!(w.norm(&v), (13.0f64).sqrt());
        let s = w.solve(&w.apply(&v));
        assert_relative_eq!((s - v).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn op_norm_matches_direct_svd_on_dense_weights() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, -1.0, 3.0, 0.5]);
        let wc = Weight::dense(DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.3, 0.0, 0.3, 1.5, 0.1, 0.0, 0.1, 1.0],
        ))
        .unwrap();
        let wd = Weight::diagonal(DVector::from_vec(vec![0.5, 2.0])).unwrap();
        let got = op_norm(&m, &wc, &wd);
        // direct: sup over v of ‖Mv‖_C / ‖v‖_D via symmetric eigenproblem
        let c = wc.to_matrix();
        let d = wd.to_matrix();
        let a = m.transpose() * c * &m;
        let dinv_sqrt = DMatrix::from_diagonal(&DVector::from_vec(vec![
            1.0 / (0.5f64).sqrt(),
            1.0 / (2.0f64).sqrt(),
        ]));
        let _ = d;
        let sym = &dinv_sqrt * a * &dinv_sqrt;
        let lam = nalgebra::linalg::SymmetricEigen::new(sym).eigenvalues.max();
        assert_relative_eq!(got, lam.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn op_norm_diagonal_fast_path_agrees_with_svd_path() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -5.0, 0.25]));
        let wc = Weight::diagonal(DVector::from_vec(vec![2.0, 1.0, 4.0])).unwrap();
        let wd = Weight::diagonal(DVector::from_vec(vec![1.0, 4.0, 1.0])).unwrap();
        let fast = op_norm(&m, &wc, &wd);
        let t = wd.mul_factor_inv_t(&wc.factor_t_mul(&m));
        let slow = t.svd(false, false).singular_values.max();
        assert_relative_eq!(fast, slow, epsilon = 1e-12);
    }

    #[test]
    fn metric_adjoint_satisfies_pairing_identity() {
        // ⟨Mx, y⟩_cod = ⟨x, M*y⟩_dom for all x, y.
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        let dom = Weight::diagonal(DVector::from_vec(vec![1.0, 2.0, 0.5])).unwrap();
        let cod = Weight::dense(DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 1.0])).unwrap();
        let ms = metric_adjoint(&m, &dom, &cod);
        let x = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let y = DVector::from_vec(vec![1.5, 0.7]);
        let lhs = cod.inner(&(&m * &x), &y);
        let rhs = dom.inner(&x, &(&ms * &y));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
    }
}
