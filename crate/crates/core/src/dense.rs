//! Dense linear-algebra facade.
//!
//! Everything above this module talks to [`DenseMatrix`] and the thin
//! factorizations below; nalgebra is the only backend and it is not exposed
//! through any other path.

use nalgebra::storage::{Storage, StorageMut};
use nalgebra::{DMatrix, Dyn, Matrix, SVD};

use crate::error::{Error, Result};

/// Column-major dense matrix of `f64`.
pub type DenseMatrix = DMatrix<f64>;

/// Relative threshold on `|R_ii| / ‖A‖_F` below which a QR is flagged rank deficient.
pub const QR_RANK_TOL: f64 = 1e-14;

/// Smallest singular value accepted by [`norm2_of_pinv`].
pub const PINV_SIGMA_MIN: f64 = 1e-14;

/// Condition number above which [`lstsq`] refuses the sample block.
pub const LSTSQ_MAX_CONDITION: f64 = 1e14;

/// Economy QR factorization `A = Q R`.
#[derive(Debug, Clone)]
pub struct ThinQr {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
    /// Set when some `|R_ii|` fell below `QR_RANK_TOL * ‖A‖_F`. `Q` is still orthonormal.
    pub rank_deficient: bool,
}

/// Economy SVD `A = U diag(sigma) Yᵀ` with `sigma` descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub y: DenseMatrix,
}

fn ensure_finite(a: &DenseMatrix, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Householder QR of a tall matrix. Rank deficiency is reported, not fatal.
pub fn qr_economy(a: &DenseMatrix) -> Result<ThinQr> {
    let (n, k) = a.shape();
    if n < k || k == 0 {
        return Err(Error::Shape(format!("qr_economy needs n >= k >= 1, got {n}x{k}")));
    }
    ensure_finite(a, "qr_economy input")?;
    let scale = a.norm();
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let rank_deficient = scale == 0.0 || (0..k).any(|i| r[(i, i)].abs() < QR_RANK_TOL * scale);
    Ok(ThinQr { q, r, rank_deficient })
}

/// Thin SVD with singular values sorted in descending order.
pub fn svd_economy(a: &DenseMatrix) -> Result<ThinSvd> {
    let (m, k) = a.shape();
    if m == 0 || k == 0 {
        return Err(Error::Shape(format!("svd_economy of empty {m}x{k} matrix")));
    }
    ensure_finite(a, "svd_economy input")?;
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or(Error::NonFinite("svd_economy did not converge"))?;
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let sv = svd.singular_values;

    // nalgebra already orders, but the contract is ours to keep.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));
    let sigma = order.iter().map(|&i| sv[i].max(0.0)).collect();
    let u = DenseMatrix::from_fn(m, order.len(), |i, j| u[(i, order[j])]);
    let y = DenseMatrix::from_fn(k, order.len(), |i, j| v_t[(order[j], i)]);
    Ok(ThinSvd { u, sigma, y })
}

/// Least-squares solution of `A X ≈ B` for tall, full-column-rank `A`.
///
/// Solved through the QR of `A`; the result coincides with the normal-equation
/// form `(AᵀA)⁻¹AᵀB` and with `A⁻¹B` when `A` is square.
pub fn lstsq(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let (q, r) = a.shape();
    if q < r || r == 0 {
        return Err(Error::Shape(format!("lstsq needs q >= r >= 1, got {q}x{r}")));
    }
    if b.nrows() != q {
        return Err(Error::Shape(format!(
            "lstsq right-hand side has {} rows, expected {q}",
            b.nrows()
        )));
    }
    ensure_finite(b, "lstsq right-hand side")?;
    let sigma = svd_economy(a)?.sigma;
    let (smax, smin) = (sigma[0], sigma[r - 1]);
    if smax == 0.0 || smin <= smax / LSTSQ_MAX_CONDITION {
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        return Err(Error::IllConditionedSamples { condition });
    }
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * b;
    qr.r()
        .solve_upper_triangular(&qtb)
        .ok_or(Error::IllConditionedSamples { condition: f64::INFINITY })
}

/// `e^A` by scaling and squaring with a Padé approximant.
pub fn matrix_exponential(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::Shape(format!(
            "matrix_exponential needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(a, "matrix_exponential input")?;
    Ok(a.exp())
}

/// Left singular vectors of `a` whose singular values exceed `rtol · σ_max`.
///
/// The result may have zero columns (when `a` vanishes).
pub fn orth_basis(a: &DenseMatrix, rtol: f64) -> Result<DenseMatrix> {
    let svd = svd_economy(a)?;
    let cut = rtol * svd.sigma[0];
    let k = svd.sigma.iter().take_while(|&&s| s > cut && s > 0.0).count();
    Ok(svd.u.columns(0, k).into_owned())
}

/// Minimum-norm least-squares solution of `A X ≈ B`, treating singular values
/// below `rcond · σ_max(A)` as zero.
pub fn pinv_solve(a: &DenseMatrix, b: &DenseMatrix, rcond: f64) -> Result<DenseMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "pinv_solve: A has {} rows, B has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.ncols() == 0 {
        return Ok(DenseMatrix::zeros(0, b.ncols()));
    }
    let svd = svd_economy(a)?;
    let cut = rcond * svd.sigma[0];
    let utb = svd.u.transpose() * b;
    let mut x = DenseMatrix::zeros(a.ncols(), b.ncols());
    for (k, &s) in svd.sigma.iter().enumerate() {
        if s > cut && s > 0.0 {
            x += svd.y.column(k) * (utb.row(k) / s);
        }
    }
    Ok(x)
}

/// Spectral norm of the left pseudo-inverse, `1 / σ_min(A)`.
pub fn norm2_of_pinv(a: &DenseMatrix) -> Result<f64> {
    let (q, r) = a.shape();
    if q < r {
        return Err(Error::Shape(format!("norm2_of_pinv needs q >= r, got {q}x{r}")));
    }
    let sigma = svd_economy(a)?.sigma;
    let smin = sigma[r - 1];
    if smin < PINV_SIGMA_MIN {
        let condition = if smin > 0.0 { sigma[0] / smin } else { f64::INFINITY };
        return Err(Error::IllConditionedSamples { condition });
    }
    Ok(1.0 / smin)
}

/// `1 / σ_min(A)`, or `+∞` when `A` is numerically rank deficient. For diagnostics.
pub fn pinv_norm_or_inf(a: &DenseMatrix) -> f64 {
    norm2_of_pinv(a).unwrap_or(f64::INFINITY)
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    svd_economy(a).map(|s| s.sigma[0]).unwrap_or(f64::NAN)
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_defect(q: &DenseMatrix) -> f64 {
    let g = q.transpose() * q;
    (g - DenseMatrix::identity(q.ncols(), q.ncols())).norm()
}

/// `dst += w · src`, in place.
pub fn add_scaled<S1, S2>(dst: &mut Matrix<f64, Dyn, Dyn, S1>, w: f64, src: &Matrix<f64, Dyn, Dyn, S2>)
where
    S1: StorageMut<f64, Dyn, Dyn>,
    S2: Storage<f64, Dyn, Dyn>,
{
    assert_eq!(dst.shape(), src.shape(), "add_scaled shape mismatch");
    dst.zip_apply(src, |a, b| *a += w * b);
}

/// Rows of `a` listed in `rows`, in that order.
pub fn select_rows(a: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Columns of `a` listed in `cols`, in that order.
pub fn select_cols(a: &DenseMatrix, cols: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.nrows(), cols.len());
    for (k, &c) in cols.iter().enumerate() {
        out.set_column(k, &a.column(c));
    }
    out
}
