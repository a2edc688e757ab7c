use crate::dense::{add_scaled, DenseMatrix};
use crate::error::{Error, Result};

use super::ensure_finite_samples;
use super::model::MdeModel;
use super::scheme::Scheme;

/// One explicit Runge–Kutta step of the dense system.
pub fn fom_step(model: &dyn MdeModel, v: &DenseMatrix, t: f64, dt: f64, scheme: &Scheme) -> Result<DenseMatrix> {
    if v.shape() != (model.nrows(), model.ncols()) {
        return Err(Error::Shape(format!(
            "state is {}x{}, model is {}x{}",
            v.nrows(),
            v.ncols(),
            model.nrows(),
            model.ncols()
        )));
    }
    let stages = scheme.stages();
    // a stage derivative is dropped once no later stage reads it
    let last_use: Vec<usize> =
        (0..stages).map(|j| (j + 1..stages).filter(|&i| scheme.a[i][j] != 0.0).max().unwrap_or(j)).collect();
    let mut k: Vec<Option<DenseMatrix>> = Vec::with_capacity(stages);
    let mut out = v.clone();
    for i in 0..stages {
        let ti = t + scheme.c[i] * dt;
        let f = if scheme.a[i].iter().all(|&a| a == 0.0) {
            model.rhs_full(ti, v)?
        } else {
            let mut x = v.clone();
            for (j, &a) in scheme.a[i].iter().enumerate() {
                if a != 0.0 {
                    add_scaled(&mut x, dt * a, k[j].as_ref().expect("stage still referenced"));
                }
            }
            model.rhs_full(ti, &x)?
        };
        ensure_finite_samples(&f, ti, |i| i, |j| j)?;
        if scheme.b[i] != 0.0 {
            add_scaled(&mut out, dt * scheme.b[i], &f);
        }
        k.push(Some(f));
        for j in 0..=i {
            if last_use[j] <= i {
                k[j] = None;
            }
        }
    }
    ensure_finite_samples(&out, t + dt, |i| i, |j| j)?;
    Ok(out)
}

/// Dense trajectory sampled every `save_every` steps (always including the
/// initial and final states).
#[derive(Debug, Clone, PartialEq)]
pub struct FomTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DenseMatrix>,
}

impl FomTrajectory {
    pub fn last(&self) -> &DenseMatrix {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Snapshot whose time matches `t` to within `tol`.
    pub fn at(&self, t: f64, tol: f64) -> Option<&DenseMatrix> {
        self.times.iter().position(|&s| (s - t).abs() <= tol).map(|i| &self.states[i])
    }
}

/// Number of steps of size `dt` to cover `span`.
pub fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(span >= 0.0 && span.is_finite()) {
        return Err(Error::InvalidParameter(format!("cannot cover {span} with steps of {dt}")));
    }
    Ok((span / dt).round() as usize)
}

/// Integrates from `t0` to `t_final` with fixed steps.
pub fn fom_solve(
    model: &dyn MdeModel,
    v0: &DenseMatrix,
    t0: f64,
    dt: f64,
    t_final: f64,
    scheme: &Scheme,
    save_every: usize,
) -> Result<FomTrajectory> {
    let steps = step_count(t_final - t0, dt)?;
    let save_every = save_every.max(1);
    let mut v = v0.clone();
    let mut traj = FomTrajectory { times: vec![t0], states: vec![v0.clone()] };
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        v = fom_step(model, &v, t, dt, scheme)?;
        if (k + 1) % save_every == 0 || k + 1 == steps {
            traj.times.push(t0 + (k + 1) as f64 * dt);
            traj.states.push(v.clone());
        }
    }
    Ok(traj)
}
