//! Time steppers: sampled CUR on time-dependent bases, the DLRA and DO
//! factor-ODE baselines, and the dense full-order reference.

mod baselines;
mod fom;
mod model;
mod scheme;
mod tdb_cur;

use std::time::Duration;

pub use baselines::{DlraState, DoState};
pub use fom::{fom_solve, fom_step, step_count, FomTrajectory};
pub use model::{LocalIndex, MdeModel};
pub use scheme::{RankAction, RankPolicy, Scheme, SchemeKind};
pub use tdb_cur::{StageEvaluation, TdbCur};

use crate::dense::{svd_economy, DenseMatrix};
use crate::error::{Error, Result};
use crate::lowrank::LowRankState;

/// Singular values below this fraction of the largest are treated as exact zeros
/// when an initial condition is factored.
pub const INITIAL_RANK_RTOL: f64 = 1e-14;

/// Wall time per phase of one sampled step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepTimings {
    pub selection: Duration,
    pub col_eval: Duration,
    /// Row evaluation including the stage surrogates for neighbor rows.
    pub row_eval: Duration,
    pub qr: Duration,
    pub svd: Duration,
}

impl StepTimings {
    pub fn total(&self) -> Duration {
        self.selection + self.col_eval + self.row_eval + self.qr + self.svd
    }
}

/// Record of one sampled step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Time at the end of the step.
    pub t: f64,
    pub r: usize,
    pub sigma: Vec<f64>,
    /// Error proxy of the incoming state, which drove the rank decision.
    pub epsilon: f64,
    pub rank_action: RankAction,
    pub eta_p: f64,
    /// Against the new column basis.
    pub eta_s: f64,
    /// Against the incoming column basis the columns were selected from.
    pub eta_s_prev: f64,
    pub error_factor: f64,
    pub rank_deficient: bool,
    pub timings: StepTimings,
    pub wall: Duration,
}

/// Returns `ModelBlowup` listing up to eight non-finite entries of a sampled block.
pub(crate) fn ensure_finite_samples(
    block: &DenseMatrix,
    t: f64,
    row: impl Fn(usize) -> usize,
    col: impl Fn(usize) -> usize,
) -> Result<()> {
    if block.iter().all(|v| v.is_finite()) {
        return Ok(());
    }
    let mut indices = Vec::new();
    'outer: for j in 0..block.ncols() {
        for i in 0..block.nrows() {
            if !block[(i, j)].is_finite() {
                indices.push((row(i), col(j)));
                if indices.len() == 8 {
                    break 'outer;
                }
            }
        }
    }
    Err(Error::ModelBlowup { t, indices })
}

/// `‖V̂ − V‖_F / ‖V‖_F`, assembled a block of columns at a time.
pub fn relative_error(approx: &LowRankState, reference: &DenseMatrix) -> Result<f64> {
    if approx.nrows() != reference.nrows() || approx.ncols() != reference.ncols() {
        return Err(Error::Shape(format!(
            "approximation is {}x{}, reference is {}x{}",
            approx.nrows(),
            approx.ncols(),
            reference.nrows(),
            reference.ncols()
        )));
    }
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    const BLOCK: usize = 256;
    let us = approx.scaled_u();
    let mut sq = 0.0;
    let s = reference.ncols();
    for start in (0..s).step_by(BLOCK) {
        let width = BLOCK.min(s - start);
        let yb = approx.y().rows(start, width);
        let diff = &us * yb.transpose() - reference.columns(start, width);
        sq += diff.norm_squared();
    }
    Ok(sq.sqrt() / denom)
}

/// Source of an initial condition.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Dense(DenseMatrix),
    /// `V₀ = A Bᵀ` with `A` n×k and `B` s×k.
    Factored { a: DenseMatrix, b: DenseMatrix },
}

impl InitialCondition {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            InitialCondition::Dense(v) => v.shape(),
            InitialCondition::Factored { a, b } => (a.nrows(), b.nrows()),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            InitialCondition::Dense(v) => v.clone(),
            InitialCondition::Factored { a, b } => a * b.transpose(),
        }
    }

    /// Full thin SVD of `V₀`, using the factors when available.
    fn svd(&self) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
        match self {
            InitialCondition::Dense(v) => {
                let f = svd_economy(v)?;
                Ok((f.u, f.sigma, f.y))
            }
            InitialCondition::Factored { a, b } => {
                if a.ncols() != b.ncols() {
                    return Err(Error::Shape(format!(
                        "factor widths differ: {} vs {}",
                        a.ncols(),
                        b.ncols()
                    )));
                }
                let qa = a.clone().qr();
                let qb = b.clone().qr();
                let core = qa.r() * qb.r().transpose();
                let f = svd_economy(&core)?;
                Ok((qa.q() * f.u, f.sigma, qb.q() * f.y))
            }
        }
    }
}

/// Rank-`r0` truncated SVD of `V₀`, cut further to the exact rank of `V₀`
/// when that is smaller.
pub fn initial_state(ic: &InitialCondition, r0: usize, t0: f64) -> Result<LowRankState> {
    let (u, sigma, y) = ic.svd()?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Err(Error::ZeroState);
    }
    let exact = sigma.iter().take_while(|&&s| s > INITIAL_RANK_RTOL * smax).count();
    build(u, sigma, y, r0.min(exact), t0)
}

/// Rank-`r0` truncated SVD of `V₀`, keeping `r0` modes even if some are zero.
pub fn initial_state_padded(ic: &InitialCondition, r0: usize, t0: f64) -> Result<LowRankState> {
    let (mut u, mut sigma, mut y) = ic.svd()?;
    if r0 > sigma.len() && matches!(ic, InitialCondition::Factored { .. }) {
        // the factored route only spans the factor width; complete the bases densely
        let f = svd_economy(&ic.to_dense())?;
        (u, sigma, y) = (f.u, f.sigma, f.y);
    }
    if r0 > sigma.len() {
        return Err(Error::InvalidTruncation { rank: sigma.len(), requested: r0 });
    }
    build(u, sigma, y, r0, t0)
}

fn build(u: DenseMatrix, sigma: Vec<f64>, y: DenseMatrix, r: usize, t0: f64) -> Result<LowRankState> {
    if r == 0 {
        return Err(Error::InvalidTruncation { rank: sigma.len(), requested: 0 });
    }
    LowRankState::new(
        u.columns(0, r).into_owned(),
        sigma[..r].to_vec(),
        y.columns(0, r).into_owned(),
        t0,
    )
}
