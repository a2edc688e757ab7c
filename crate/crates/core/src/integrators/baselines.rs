//! Time-continuous factor evolution baselines.
//!
//! Both integrate the projected flow with the same explicit scheme as the
//! rest of the crate and use the dense right-hand side. Each step ends with a
//! QR re-orthonormalization of the bases; the triangular factors are folded
//! into the coupling matrix so the represented product is unchanged.

use crate::dense::{add_scaled, svd_economy, DenseMatrix};
use crate::error::{Error, Result};
use crate::lowrank::LowRankState;

use super::ensure_finite_samples;
use super::model::MdeModel;
use super::scheme::Scheme;

/// Condition number above which the coupling matrix is declared singular.
pub const BASELINE_MAX_CONDITION: f64 = 1e14;

fn condition(m: &DenseMatrix) -> Result<f64> {
    let sigma = svd_economy(m)?.sigma;
    let smin = *sigma.last().expect("non-empty");
    Ok(if smin > 0.0 { sigma[0] / smin } else { f64::INFINITY })
}

/// `X M⁻¹` with a conditioning guard.
fn right_solve(x: &DenseMatrix, m: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    let cond = condition(m)?;
    if !(cond <= BASELINE_MAX_CONDITION) {
        return Err(Error::BaselineSingular { t, condition: cond });
    }
    // X M⁻¹ = (M⁻ᵀ Xᵀ)ᵀ
    let lu = m.transpose().lu();
    let sol = lu
        .solve(&x.transpose())
        .ok_or(Error::BaselineSingular { t, condition: f64::INFINITY })?;
    Ok(sol.transpose())
}

fn check_model(model: &dyn MdeModel, n: usize, s: usize, dt: f64) -> Result<()> {
    if model.nrows() != n || model.ncols() != s {
        return Err(Error::Shape(format!(
            "factors describe {n}x{s}, model is {}x{}",
            model.nrows(),
            model.ncols()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

fn blowup_check(parts: &[&DenseMatrix], t: f64) -> Result<()> {
    for p in parts {
        ensure_finite_samples(p, t, |i| i, |j| j)?;
    }
    Ok(())
}

/// Factors `U S Yᵀ` with a full `r × r` coupling matrix `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct DlraState {
    pub u: DenseMatrix,
    pub s: DenseMatrix,
    pub y: DenseMatrix,
    pub t: f64,
}

impl DlraState {
    pub fn from_state(state: &LowRankState) -> Self {
        Self {
            u: state.u().clone(),
            s: DenseMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(state.sigma())),
            y: state.y().clone(),
            t: state.t(),
        }
    }

    pub fn rank(&self) -> usize {
        self.s.nrows()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        &self.u * &self.s * self.y.transpose()
    }

    /// SVD form of the current factors.
    pub fn to_state(&self) -> Result<LowRankState> {
        let svd = svd_economy(&self.s)?;
        LowRankState::new(&self.u * svd.u, svd.sigma, &self.y * svd.y, self.t)
    }

    /// `(U̇, Ṡ, Ẏ)` at the given factors.
    fn rate(
        model: &dyn MdeModel,
        t: f64,
        u: &DenseMatrix,
        s: &DenseMatrix,
        y: &DenseMatrix,
    ) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
        let v = u * s * y.transpose();
        let f = model.rhs_full(t, &v)?;
        blowup_check(&[&f], t)?;
        let fy = &f * y;
        let ftu = f.transpose() * u;
        let ds = u.transpose() * &fy;
        let du_raw = &fy - u * (u.transpose() * &fy);
        let dy_raw = &ftu - y * (y.transpose() * &ftu);
        let du = right_solve(&du_raw, s, t)?;
        let dy = right_solve(&dy_raw, &s.transpose(), t)?;
        Ok((du, ds, dy))
    }

    /// One step of the factor ODEs.
    pub fn step(&self, model: &dyn MdeModel, dt: f64, scheme: &Scheme) -> Result<Self> {
        check_model(model, self.u.nrows(), self.y.nrows(), dt)?;
        let mut ku: Vec<DenseMatrix> = Vec::with_capacity(scheme.stages());
        let mut ks: Vec<DenseMatrix> = Vec::with_capacity(scheme.stages());
        let mut ky: Vec<DenseMatrix> = Vec::with_capacity(scheme.stages());
        for i in 0..scheme.stages() {
            let (mut u, mut s, mut y) = (self.u.clone(), self.s.clone(), self.y.clone());
            for (j, &a) in scheme.a[i].iter().enumerate() {
                if a != 0.0 {
                    add_scaled(&mut u, dt * a, &ku[j]);
                    add_scaled(&mut s, dt * a, &ks[j]);
                    add_scaled(&mut y, dt * a, &ky[j]);
                }
            }
            let (du, ds, dy) = Self::rate(model, self.t + scheme.c[i] * dt, &u, &s, &y)?;
            ku.push(du);
            ks.push(ds);
            ky.push(dy);
        }
        let (mut u, mut s, mut y) = (self.u.clone(), self.s.clone(), self.y.clone());
        for (i, &b) in scheme.b.iter().enumerate() {
            if b != 0.0 {
                add_scaled(&mut u, dt * b, &ku[i]);
                add_scaled(&mut s, dt * b, &ks[i]);
                add_scaled(&mut y, dt * b, &ky[i]);
            }
        }
        let t = self.t + dt;
        blowup_check(&[&u, &s, &y], t)?;
        let qu = u.qr();
        let qy = y.qr();
        let s = qu.r() * s * qy.r().transpose();
        Ok(Self { u: qu.q(), s, y: qy.q(), t })
    }
}

/// Factors `U Yᵀ` with orthonormal `U` and unconstrained `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoState {
    pub u: DenseMatrix,
    pub y: DenseMatrix,
    pub t: f64,
}

impl DoState {
    pub fn from_state(state: &LowRankState) -> Self {
        let mut y = state.y().clone();
        for (j, &s) in state.sigma().iter().enumerate() {
            y.column_mut(j).scale_mut(s);
        }
        Self { u: state.u().clone(), y, t: state.t() }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        &self.u * self.y.transpose()
    }

    pub fn to_state(&self) -> Result<LowRankState> {
        let svd = svd_economy(&self.y)?;
        // U Yᵀ = U (Y_U Σ Y_Vᵀ)ᵀ = (U Y_V) Σ Y_Uᵀ
        LowRankState::new(&self.u * svd.y, svd.sigma, svd.u, self.t)
    }

    fn rate(model: &dyn MdeModel, t: f64, u: &DenseMatrix, y: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
        let v = u * y.transpose();
        let f = model.rhs_full(t, &v)?;
        blowup_check(&[&f], t)?;
        let fy = &f * y;
        let c = y.transpose() * y;
        let du_raw = &fy - u * (u.transpose() * &fy);
        let du = right_solve(&du_raw, &c, t)?;
        let dy = f.transpose() * u;
        Ok((du, dy))
    }

    pub fn step(&self, model: &dyn MdeModel, dt: f64, scheme: &Scheme) -> Result<Self> {
        check_model(model, self.u.nrows(), self.y.nrows(), dt)?;
        let mut ku: Vec<DenseMatrix> = Vec::with_capacity(scheme.stages());
        let mut ky: Vec<DenseMatrix> = Vec::with_capacity(scheme.stages());
        for i in 0..scheme.stages() {
            let (mut u, mut y) = (self.u.clone(), self.y.clone());
            for (j, &a) in scheme.a[i].iter().enumerate() {
                if a != 0.0 {
                    add_scaled(&mut u, dt * a, &ku[j]);
                    add_scaled(&mut y, dt * a, &ky[j]);
                }
            }
            let (du, dy) = Self::rate(model, self.t + scheme.c[i] * dt, &u, &y)?;
            ku.push(du);
            ky.push(dy);
        }
        let (mut u, mut y) = (self.u.clone(), self.y.clone());
        for (i, &b) in scheme.b.iter().enumerate() {
            if b != 0.0 {
                add_scaled(&mut u, dt * b, &ku[i]);
                add_scaled(&mut y, dt * b, &ky[i]);
            }
        }
        let t = self.t + dt;
        blowup_check(&[&u, &y], t)?;
        let qu = u.qr();
        let y = y * qu.r().transpose();
        Ok(Self { u: qu.q(), y, t })
    }
}
