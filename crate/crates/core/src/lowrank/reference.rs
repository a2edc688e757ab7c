//! Dense reference constructions for testing the sampled kernel.
//!
//! Everything here touches all entries of `G` and exists to check the
//! production path, which never does.

use crate::dense::{lstsq, select_cols, select_rows, spectral_norm, DenseMatrix};
use crate::error::{Error, Result};
use crate::sampling::IndexVector;

use super::{CurDiagnostics, LowRankState};

/// `G(:,s) · G(p,s)⁻¹ · G(p,:)`.
pub fn cur_reference(g: &DenseMatrix, p: &IndexVector, s: &IndexVector) -> Result<DenseMatrix> {
    if p.len() != s.len() {
        return Err(Error::Shape(format!("|p| = {} but |s| = {}", p.len(), s.len())));
    }
    let c = select_cols(g, s);
    let r = select_rows(g, p);
    let core = select_cols(&r, s);
    let core_inv = core.try_inverse().ok_or(Error::SingularCore)?;
    if core_inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCore);
    }
    Ok(c * core_inv * r)
}

/// Row interpolatory projector `U (U(p,:))† Pᵀ` as an `n × n` matrix.
pub fn row_projector(u: &DenseMatrix, p: &IndexVector) -> Result<DenseMatrix> {
    let n = u.nrows();
    let up = select_rows(u, p);
    let mut pt = DenseMatrix::zeros(p.len(), n);
    for (k, &i) in p.iter().enumerate() {
        pt[(k, i)] = 1.0;
    }
    Ok(u * lstsq(&up, &pt)?)
}

/// Column interpolatory projector `S (Y(s,:)ᵀ)⁻¹ Yᵀ` as an `s × s` matrix.
pub fn col_projector(y: &DenseMatrix, s: &IndexVector) -> Result<DenseMatrix> {
    Ok(row_projector(y, s)?.transpose())
}

/// Both sides of `‖G − 𝒫G𝒮‖₂ ≤ ε_f · max{‖G − UUᵀG‖₂, ‖G − GYYᵀ‖₂}`,
/// with `𝒫`, `𝒮` built from the state's bases and the sample sets.
pub fn interpolation_error_bound(
    g: &DenseMatrix,
    state: &LowRankState,
    diag: &CurDiagnostics,
    p: &IndexVector,
    s: &IndexVector,
) -> Result<(f64, f64)> {
    let proj_p = row_projector(state.u(), p)?;
    let proj_s = col_projector(state.y(), s)?;
    let lhs = spectral_norm(&(g - &proj_p * g * &proj_s));
    let (u, y) = (state.u(), state.y());
    let left = spectral_norm(&(g - u * (u.transpose() * g)));
    let right = spectral_norm(&(g - (g * y) * y.transpose()));
    Ok((lhs, diag.error_factor * left.max(right)))
}
