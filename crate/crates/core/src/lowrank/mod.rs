//! Factored low-rank state and the sampled CUR reconstruction kernel.

pub mod checkpoint;
pub mod reference;

use std::time::{Duration, Instant};

use crate::dense::{
    lstsq, orthonormality_defect, pinv_norm_or_inf, qr_economy, select_rows, svd_economy,
    DenseMatrix,
};
use crate::error::{Error, Result};
use crate::sampling::IndexVector;

/// Tolerance on `‖UᵀU − I‖_F` and `‖YᵀY − I‖_F` accepted by [`LowRankState::new`].
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// `V̂ = U diag(σ) Yᵀ` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankState {
    u: DenseMatrix,
    sigma: Vec<f64>,
    y: DenseMatrix,
    t: f64,
}

impl LowRankState {
    pub fn new(u: DenseMatrix, sigma: Vec<f64>, y: DenseMatrix, t: f64) -> Result<Self> {
        let (n, r) = u.shape();
        let s = y.nrows();
        if r == 0 || y.ncols() != r || sigma.len() != r || r > n.min(s) {
            return Err(Error::Shape(format!(
                "state needs U n×r, Y s×r, r singular values with 1 <= r <= min(n, s); got U {n}x{r}, Y {s}x{}, {} values",
                y.ncols(),
                sigma.len()
            )));
        }
        if u.iter().chain(y.iter()).chain(&sigma).any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::NonFinite("low-rank state"));
        }
        if sigma.iter().any(|&v| v < 0.0) || sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "singular values must be non-negative and descending".into(),
            ));
        }
        let du = orthonormality_defect(&u);
        let dy = orthonormality_defect(&y);
        if du > ORTHONORMALITY_TOL || dy > ORTHONORMALITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "bases not orthonormal (defects {du:.2e}, {dy:.2e})"
            )));
        }
        Ok(Self { u, sigma, y, t })
    }

    /// Skips validation. Callers must uphold the invariants.
    pub(crate) fn from_parts(u: DenseMatrix, sigma: Vec<f64>, y: DenseMatrix, t: f64) -> Self {
        debug_assert_eq!(u.ncols(), sigma.len());
        debug_assert_eq!(y.ncols(), sigma.len());
        Self { u, sigma, y, t }
    }

    /// Thin SVD of `a`, keeping the leading `r` triplets.
    pub fn from_dense(a: &DenseMatrix, r: usize, t: f64) -> Result<Self> {
        let svd = svd_economy(a)?;
        if r == 0 || r > svd.sigma.len() {
            return Err(Error::InvalidTruncation { rank: svd.sigma.len(), requested: r });
        }
        Ok(Self::from_parts(
            svd.u.columns(0, r).into_owned(),
            svd.sigma[..r].to_vec(),
            svd.y.columns(0, r).into_owned(),
            t,
        ))
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.y.nrows()
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// `U diag(σ)`.
    pub fn scaled_u(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us
    }

    /// Dense `U diag(σ) Yᵀ`. Only for small problems and tests.
    pub fn to_dense(&self) -> DenseMatrix {
        self.scaled_u() * self.y.transpose()
    }

    /// `V̂(rows, :)`.
    pub fn assemble_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut ur = select_rows(&self.u, rows);
        for (j, &s) in self.sigma.iter().enumerate() {
            ur.column_mut(j).scale_mut(s);
        }
        ur * self.y.transpose()
    }

    /// `V̂(:, cols)`.
    pub fn assemble_cols(&self, cols: &[usize]) -> DenseMatrix {
        let mut yc = select_rows(&self.y, cols);
        for (j, &s) in self.sigma.iter().enumerate() {
            yc.column_mut(j).scale_mut(s);
        }
        &self.u * yc.transpose()
    }

    /// Leading `r_new` modes.
    pub fn truncate(&self, r_new: usize) -> Result<Self> {
        let r = self.rank();
        if r_new == 0 || r_new >= r {
            return Err(Error::InvalidTruncation { rank: r, requested: r_new });
        }
        Ok(Self::from_parts(
            self.u.columns(0, r_new).into_owned(),
            self.sigma[..r_new].to_vec(),
            self.y.columns(0, r_new).into_owned(),
            self.t,
        ))
    }
}

/// `σ_r / ‖σ‖₂`: weight of the weakest retained mode.
pub fn error_proxy(sigma: &[f64]) -> Result<f64> {
    let last = *sigma.last().ok_or(Error::ZeroState)?;
    let norm = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(last / norm)
}

/// Conditioning of one CUR reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurDiagnostics {
    /// `‖Q(p,:)†‖₂`.
    pub eta_p: f64,
    /// `‖Y(s,:)⁻¹‖₂` for the reconstructed `Y`; `+∞` when no column set was given or the block is singular.
    pub eta_s: f64,
    /// `min{η_p(1+η_s), η_s(1+η_p)}`.
    pub error_factor: f64,
    /// Smallest retained singular value.
    pub sigma_trailing: f64,
    /// QR of the sampled columns found them numerically rank deficient.
    pub rank_deficient: bool,
}

pub(crate) fn error_factor(eta_p: f64, eta_s: f64) -> f64 {
    (eta_p * (1.0 + eta_s)).min(eta_s * (1.0 + eta_p))
}

/// Rebuilds `U Σ Yᵀ` from `G(:,s)` and `G(p,:)`.
///
/// `Q R = G(:,s)`, `Z = Q(p,:)† G(p,:)`, `Z = U_Z Σ Yᵀ`, `U = Q U_Z`. The rank
/// of the result is the number of sampled columns.
pub fn cur_from_samples(
    g_cols: &DenseMatrix,
    g_rows: &DenseMatrix,
    p: &IndexVector,
    s: Option<&IndexVector>,
    t: f64,
) -> Result<(LowRankState, CurDiagnostics)> {
    cur_from_samples_timed(g_cols, g_rows, p, s, t).map(|(st, d, _)| (st, d))
}

/// Wall time spent in the factorization phases of [`cur_from_samples`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CurTimings {
    /// QR of `G(:,s)` and the least-squares solve for `Z`.
    pub qr: Duration,
    /// SVD of `Z` and the rotation `Q U_Z`.
    pub svd: Duration,
}

pub(crate) fn cur_from_samples_timed(
    g_cols: &DenseMatrix,
    g_rows: &DenseMatrix,
    p: &IndexVector,
    s: Option<&IndexVector>,
    t: f64,
) -> Result<(LowRankState, CurDiagnostics, CurTimings)> {
    let (n, r) = g_cols.shape();
    if p.bound() != n || g_rows.nrows() != p.len() {
        return Err(Error::Shape(format!(
            "row samples: {} rows for {} indices into {} (columns have {n} rows)",
            g_rows.nrows(),
            p.len(),
            p.bound()
        )));
    }
    if p.len() < r {
        return Err(Error::Shape(format!("{} sampled rows for {r} sampled columns", p.len())));
    }
    if let Some(s) = s {
        if s.len() != r || s.bound() != g_rows.ncols() {
            return Err(Error::Shape(format!(
                "column index set of length {} into {} does not match G(:,s) with {r} columns and G(p,:) with {}",
                s.len(),
                s.bound(),
                g_rows.ncols()
            )));
        }
    }
    if r > g_rows.ncols() {
        return Err(Error::Shape(format!("{r} sampled columns exceed s = {}", g_rows.ncols())));
    }

    let clock = Instant::now();
    let qr = qr_economy(g_cols)?;
    let qp = select_rows(&qr.q, p);
    let z = lstsq(&qp, g_rows)?;
    let qr_time = clock.elapsed();
    let clock = Instant::now();
    let svd = svd_economy(&z)?;
    let u = &qr.q * &svd.u;
    let y = svd.y;
    let timings = CurTimings { qr: qr_time, svd: clock.elapsed() };

    let eta_p = pinv_norm_or_inf(&qp);
    let eta_s = s.map_or(f64::INFINITY, |s| pinv_norm_or_inf(&select_rows(&y, s)));
    let sigma_trailing = *svd.sigma.last().expect("r >= 1");
    let diag = CurDiagnostics {
        eta_p,
        eta_s,
        error_factor: error_factor(eta_p, eta_s),
        sigma_trailing,
        rank_deficient: qr.rank_deficient,
    };
    Ok((LowRankState::from_parts(u, svd.sigma, y, t), diag, timings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{qr_economy, select_cols};
    use crate::rng::{normal_matrix, stream, stream_rng};

    fn seeded_state(seed: u64, n: usize, s: usize, r: usize) -> LowRankState {
        let a = normal_matrix(&mut stream_rng(seed, stream::TESTING), n, s);
        LowRankState::from_dense(&a, r, 0.0).unwrap()
    }

    #[test]
    fn assemble_rank_one() {
        let mut u = DenseMatrix::zeros(3, 1);
        u[(0, 0)] = 1.0;
        let h = 0.5f64.sqrt();
        let y = DenseMatrix::from_column_slice(2, 1, &[h, h]);
        let st = LowRankState::new(u, vec![2.0], y, 0.0).unwrap();
        let row = st.assemble_rows(&[0]);
        assert!((row[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
        assert!((row[(0, 1)] - 2f64.sqrt()).abs() < 1e-15);
        let col = st.assemble_cols(&[1]);
        assert!((col[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(col[(1, 0)], 0.0);
    }

    #[test]
    fn assemble_matches_dense() {
        let st = seeded_state(31, 12, 9, 4);
        let dense = st.to_dense();
        let all: Vec<usize> = (0..12).collect();
        assert!((st.assemble_rows(&all) - &dense).norm() < 1e-13 * dense.norm());
        let rows = [7, 2, 11];
        assert!((st.assemble_rows(&rows) - select_rows(&dense, &rows)).abs().max() < 1e-13);
        let cols = [8, 0];
        assert!((st.assemble_cols(&cols) - select_cols(&dense, &cols)).abs().max() < 1e-13);
        let all: Vec<usize> = (0..9).collect();
        assert!((st.assemble_cols(&all) - &dense).norm() < 1e-13 * dense.norm());
    }

    #[test]
    fn truncate_drops_trailing_mode() {
        let st = seeded_state(32, 10, 8, 3);
        let tr = st.truncate(2).unwrap();
        assert_eq!(tr.sigma(), &st.sigma()[..2]);
        let diff = (st.to_dense() - tr.to_dense()).norm();
        assert!((diff - st.sigma()[2]).abs() < 1e-12);
        assert_eq!(
            st.truncate(3).unwrap_err(),
            Error::InvalidTruncation { rank: 3, requested: 3 }
        );
    }

    #[test]
    fn proxy_examples() {
        assert!((error_proxy(&[4.0, 3.0]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(error_proxy(&[1.0]).unwrap(), 1.0);
        let geo: Vec<f64> = (1..=18).map(|i| 2f64.powi(-i)).collect();
        let norm: f64 = geo.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((error_proxy(&geo).unwrap() - 2f64.powi(-18) / norm).abs() < 1e-20);
        assert_eq!(error_proxy(&[0.0, 0.0]).unwrap_err(), Error::ZeroState);
    }

    #[test]
    fn state_validation() {
        let q = qr_economy(&normal_matrix(&mut stream_rng(33, stream::TESTING), 5, 2)).unwrap().q;
        let y = qr_economy(&normal_matrix(&mut stream_rng(34, stream::TESTING), 4, 2)).unwrap().q;
        assert!(LowRankState::new(q.clone(), vec![2.0, 1.0], y.clone(), 0.0).is_ok());
        assert!(LowRankState::new(q.clone(), vec![1.0, 2.0], y.clone(), 0.0).is_err());
        assert!(LowRankState::new(&q * 2.0, vec![2.0, 1.0], y.clone(), 0.0).is_err());
        assert!(LowRankState::new(q, vec![2.0], y, 0.0).is_err());
    }

    #[test]
    fn cur_exact_rank_recovery() {
        let mut rng = stream_rng(35, stream::TESTING);
        let g = normal_matrix(&mut rng, 20, 2) * normal_matrix(&mut rng, 2, 15);
        let p = IndexVector::new(vec![3, 11], 20).unwrap();
        let s = IndexVector::new(vec![0, 9], 15).unwrap();
        let (st, diag) =
            cur_from_samples(&select_cols(&g, &s), &select_rows(&g, &p), &p, Some(&s), 0.0)
                .unwrap();
        assert!((st.to_dense() - &g).norm() <= 1e-11 * g.norm());
        assert!(diag.error_factor >= 1.0);
    }
}
