//! Karhunen–Loève modes of a squared-exponential kernel on a uniform grid.

use nalgebra::SymmetricEigen;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Grids above this size are solved on a coarser grid and extended by
/// Nyström interpolation rather than by a dense eigendecomposition.
pub const DENSE_EIGEN_LIMIT: usize = 1601;

/// Leading kernel eigenpairs.
#[derive(Debug, Clone, PartialEq)]
pub struct KlModes {
    /// Descending, positive.
    pub lambda: Vec<f64>,
    /// `n × d`; column `i` satisfies `Σₖ wₖ ψᵢ(xₖ)² = 1` with trapezoid weights `w`.
    pub psi: DenseMatrix,
}

fn kernel(a: f64, b: f64, ell: f64) -> f64 {
    (-(a - b) * (a - b) / (2.0 * ell * ell)).exp()
}

/// Points `i / (n − 1)` on `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    (0..n).map(|i| i as f64 * h).collect()
}

/// Trapezoid quadrature weights for [`unit_grid`].
pub fn trapezoid_weights(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect()
}

/// Leading eigenpairs of the integral operator with kernel
/// `K(x, y) = exp(−(x − y)² / 2ℓ²)` on `[0, 1]`, discretized by the
/// trapezoid rule on the `n`-point unit grid.
///
/// Eigenfunctions are scaled to unit discrete L² norm and signed so their
/// first significant entry is positive.
pub fn kl_expansion(ell: f64, n: usize, d: usize) -> Result<KlModes> {
    if n < 2 || d == 0 || d > n {
        return Err(Error::InvalidParameter(format!("KL expansion needs 1 <= d <= n, n >= 2; got d={d}, n={n}")));
    }
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::InvalidParameter(format!("kernel length scale must be positive, got {ell}")));
    }
    if n > DENSE_EIGEN_LIMIT {
        return nystrom(ell, n, d, DENSE_EIGEN_LIMIT);
    }
    let x = unit_grid(n);
    let root: Vec<f64> = trapezoid_weights(n).iter().map(|w| w.sqrt()).collect();
    // symmetric form W^½ K W^½
    let k = DenseMatrix::from_fn(n, n, |i, j| root[i] * kernel(x[i], x[j], ell) * root[j]);
    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lambda: Vec<f64> = order[..d].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut psi = DenseMatrix::from_fn(n, d, |r, c| eig.eigenvectors[(r, order[c])] / root[r]);
    fix_signs(&mut psi);
    Ok(KlModes { lambda, psi })
}

/// Solves on a `coarse`-point grid and interpolates each eigenfunction with
/// `ψ(x) = (1/λ) Σⱼ wⱼ K(x, xⱼ) ψ(xⱼ)`.
fn nystrom(ell: f64, n: usize, d: usize, coarse: usize) -> Result<KlModes> {
    let base = kl_expansion(ell, coarse, d.min(coarse))?;
    let xc = unit_grid(coarse);
    let wc = trapezoid_weights(coarse);
    let x = unit_grid(n);
    let w = trapezoid_weights(n);
    let kx = DenseMatrix::from_fn(n, coarse, |i, j| wc[j] * kernel(x[i], xc[j], ell));
    let mut psi = kx * &base.psi;
    for (c, &l) in base.lambda.iter().enumerate() {
        let mut col = psi.column_mut(c);
        col /= l;
        let norm = col.iter().zip(&w).map(|(v, wk)| wk * v * v).sum::<f64>().sqrt();
        col /= norm;
    }
    fix_signs(&mut psi);
    Ok(KlModes { lambda: base.lambda, psi })
}

fn fix_signs(psi: &mut DenseMatrix) {
    for mut col in psi.column_iter_mut() {
        let peak = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-8 * peak) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descending_positive_and_normalized() {
        let kl = kl_expansion(0.2, 101, 10).unwrap();
        assert!(kl.lambda.windows(2).all(|w| w[0] > w[1]));
        assert!(kl.lambda.iter().all(|&l| l > 0.0));
        let w = trapezoid_weights(101);
        for c in 0..10 {
            let col = kl.psi.column(c);
            let norm: f64 = col.iter().zip(&w).map(|(v, wk)| wk * v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(col.iter().find(|v| v.abs() > 1e-8).unwrap() > &0.0);
        }
    }

    #[test]
    fn mercer_trace() {
        let n = 41;
        let kl = kl_expansion(0.2, n, n).unwrap();
        // K has a unit diagonal and the weights sum to the interval length
        assert!((kl.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_kernel_has_constant_leading_mode() {
        let kl = kl_expansion(1e4, 51, 1).unwrap();
        let col = kl.psi.column(0);
        assert!(col.max() - col.min() < 1e-6);
        assert!(col[0] > 0.0);
    }

    #[test]
    fn nystrom_matches_dense_solve() {
        let dense = kl_expansion(0.2, 801, 17).unwrap();
        let ext = nystrom(0.2, 801, 17, 401).unwrap();
        for i in 0..8 {
            assert!((dense.lambda[i] - ext.lambda[i]).abs() < 1e-5 * dense.lambda[0]);
            let diff = (dense.psi.column(i) - ext.psi.column(i)).amax();
            assert!(diff < 2e-3, "mode {i}: {diff}");
        }
    }
}
