//! Building a problem from a config and stepping one method through it.

use std::time::{Duration, Instant};

use lowrank_core::dense::{svd_economy, DenseMatrix};
use lowrank_core::integrators::{
    fom_step, initial_state, initial_state_padded, relative_error, step_count, DlraState, DoState,
    InitialCondition, MdeModel, RankPolicy, Scheme, SchemeKind, StageEvaluation, TdbCur,
};
use lowrank_core::lowrank::{error_proxy, LowRankState};
use lowrank_core::models::{AdrModel, BurgersModel, ToyModel};
use lowrank_core::sampling::Selector;

use crate::config::{ExperimentConfig, Method, ModelConfig, ReferenceKind};
use crate::error::{is_divergence, HarnessError, Result};

pub enum Problem {
    Toy(ToyModel),
    Burgers(BurgersModel),
    Adr(AdrModel),
}

impl Problem {
    pub fn build(model: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(match model {
            ModelConfig::Toy { .. } => Problem::Toy(ToyModel::new(model.toy_spec(seed).unwrap())?),
            ModelConfig::Burgers { .. } => Problem::Burgers(BurgersModel::new(model.burgers_spec(seed).unwrap())?),
            ModelConfig::Adr { .. } => Problem::Adr(AdrModel::new(model.adr_spec(seed).unwrap())?),
        })
    }

    pub fn model(&self) -> &dyn MdeModel {
        match self {
            Problem::Toy(m) => m,
            Problem::Burgers(m) => m,
            Problem::Adr(m) => m,
        }
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        Ok(match self {
            Problem::Toy(m) => m.initial_condition(),
            Problem::Burgers(m) => m.initial_condition()?,
            Problem::Adr(m) => m.initial_condition(),
        })
    }

    pub fn has_exact(&self) -> bool {
        matches!(self, Problem::Toy(_))
    }

    pub fn exact(&self, t: f64) -> Option<Result<DenseMatrix>> {
        match self {
            Problem::Toy(m) => Some(m.exact(t).map_err(HarnessError::from)),
            _ => None,
        }
    }
}

/// Everything one integration needs besides the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub method: Method,
    pub scheme: SchemeKind,
    pub dt: f64,
    pub t_final: f64,
    pub policy: RankPolicy,
    pub selector: Selector,
    pub stages: StageEvaluation,
}

impl RunSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            method: cfg.method.kind,
            scheme: cfg.method.scheme,
            dt: cfg.dt(),
            t_final: cfg.t_final(),
            policy: cfg.policy(),
            selector: cfg.method.sampling,
            stages: cfg.method.stages,
        }
    }
}

/// One integrator and its current state.
pub enum Solver {
    Tdb { cur: TdbCur, state: LowRankState },
    Dlra { scheme: Scheme, state: DlraState },
    Do { scheme: Scheme, state: DoState },
    Fom { scheme: Scheme, v: DenseMatrix, t: f64 },
}

/// What a step reports; fields a method does not have are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub r: usize,
    pub epsilon: Option<f64>,
    pub sigma: Vec<f64>,
    pub eta_p: Option<f64>,
    pub eta_s: Option<f64>,
    pub wall: Duration,
}

impl Solver {
    pub fn start(spec: &RunSpec, ic: &InitialCondition) -> Result<Self> {
        let scheme = Scheme::new(spec.scheme);
        let low_rank = || -> Result<LowRankState> {
            let r0 = spec.policy.r0;
            Ok(if spec.policy.adapt { initial_state(ic, r0, 0.0)? } else { initial_state_padded(ic, r0, 0.0)? })
        };
        Ok(match spec.method {
            Method::TdbCur => Solver::Tdb {
                cur: TdbCur::new(scheme, spec.policy, spec.selector).with_stages(spec.stages),
                state: low_rank()?,
            },
            Method::Dlra => Solver::Dlra { scheme, state: DlraState::from_state(&low_rank()?) },
            Method::Do => Solver::Do { scheme, state: DoState::from_state(&low_rank()?) },
            Method::Fom => Solver::Fom { scheme, v: ic.to_dense(), t: 0.0 },
        })
    }

    pub fn t(&self) -> f64 {
        match self {
            Solver::Tdb { state, .. } => state.t(),
            Solver::Dlra { state, .. } => state.t,
            Solver::Do { state, .. } => state.t,
            Solver::Fom { t, .. } => *t,
        }
    }

    pub fn step(&mut self, model: &dyn MdeModel, dt: f64, index: usize) -> Result<StepRecord> {
        let clock = Instant::now();
        let mut rec = match self {
            Solver::Tdb { cur, state } => {
                let (next, diag) = cur.step(state, model, dt)?;
                *state = next;
                StepRecord {
                    step: index,
                    t: diag.t,
                    r: diag.r,
                    epsilon: Some(diag.epsilon),
                    sigma: diag.sigma,
                    eta_p: Some(diag.eta_p),
                    eta_s: Some(diag.eta_s),
                    wall: Duration::ZERO,
                }
            }
            Solver::Dlra { scheme, state } => {
                *state = state.step(model, dt, scheme)?;
                let sigma = svd_economy(&state.s)?.sigma;
                factor_record(index, state.t, sigma)
            }
            Solver::Do { scheme, state } => {
                *state = state.step(model, dt, scheme)?;
                let sigma = svd_economy(&state.y)?.sigma;
                factor_record(index, state.t, sigma)
            }
            Solver::Fom { scheme, v, t } => {
                *v = fom_step(model, v, *t, dt, scheme)?;
                *t += dt;
                StepRecord {
                    step: index,
                    t: *t,
                    r: v.nrows().min(v.ncols()),
                    epsilon: None,
                    sigma: Vec::new(),
                    eta_p: None,
                    eta_s: None,
                    wall: Duration::ZERO,
                }
            }
        };
        rec.wall = clock.elapsed();
        Ok(rec)
    }

    pub fn relative_error(&self, reference: &DenseMatrix) -> Result<f64> {
        Ok(match self {
            Solver::Tdb { state, .. } => relative_error(state, reference)?,
            Solver::Dlra { state, .. } => relative_error(&state.to_state()?, reference)?,
            Solver::Do { state, .. } => relative_error(&state.to_state()?, reference)?,
            Solver::Fom { v, .. } => {
                let denom = reference.norm();
                if denom == 0.0 {
                    return Err(lowrank_core::Error::ZeroReference.into());
                }
                (v - reference).norm() / denom
            }
        })
    }

    /// SVD form of the state, for checkpoints; `None` for the dense method.
    pub fn low_rank_state(&self) -> Result<Option<LowRankState>> {
        Ok(match self {
            Solver::Tdb { state, .. } => Some(state.clone()),
            Solver::Dlra { state, .. } => Some(state.to_state()?),
            Solver::Do { state, .. } => Some(state.to_state()?),
            Solver::Fom { .. } => None,
        })
    }
}

fn factor_record(step: usize, t: f64, sigma: Vec<f64>) -> StepRecord {
    StepRecord {
        step,
        t,
        r: sigma.len(),
        epsilon: error_proxy(&sigma).ok(),
        sigma,
        eta_p: None,
        eta_s: None,
        wall: Duration::ZERO,
    }
}

/// Source of the matrix the error column compares against.
pub enum Reference {
    None,
    /// Closed-form solution of the problem.
    Exact,
    /// Dense solve advanced in lockstep with the method.
    Lockstep { scheme: Scheme, v: DenseMatrix, t: f64 },
    /// A precomputed solution at the final time only.
    Final(DenseMatrix),
}

impl Reference {
    pub fn choose(kind: ReferenceKind, problem: &Problem, scheme: SchemeKind) -> Result<Self> {
        let lockstep = || -> Result<Reference> {
            Ok(Reference::Lockstep { scheme: Scheme::new(scheme), v: problem.initial_condition()?.to_dense(), t: 0.0 })
        };
        match kind {
            ReferenceKind::None => Ok(Reference::None),
            ReferenceKind::Exact if problem.has_exact() => Ok(Reference::Exact),
            ReferenceKind::Exact => Err(HarnessError::Config("this model has no closed-form solution".into())),
            ReferenceKind::Fom => lockstep(),
            ReferenceKind::Auto if problem.has_exact() => Ok(Reference::Exact),
            ReferenceKind::Auto => lockstep(),
        }
    }

    fn advance(&mut self, model: &dyn MdeModel, dt: f64) -> Result<()> {
        if let Reference::Lockstep { scheme, v, t } = self {
            *v = fom_step(model, v, *t, dt, scheme)?;
            *t += dt;
        }
        Ok(())
    }

    fn error(&self, problem: &Problem, solver: &Solver, t: f64, last: bool) -> Result<Option<f64>> {
        match self {
            Reference::None => Ok(None),
            Reference::Exact => {
                let exact = problem.exact(t).expect("exact reference only chosen for models that have one")?;
                Ok(Some(solver.relative_error(&exact)?))
            }
            Reference::Lockstep { v, .. } => Ok(Some(solver.relative_error(v)?)),
            Reference::Final(v) if last => Ok(Some(solver.relative_error(v)?)),
            Reference::Final(_) => Ok(None),
        }
    }
}

/// How an integration ended.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub steps: usize,
    pub steps_planned: usize,
    pub t: f64,
    pub final_error: Option<f64>,
    pub final_rank: usize,
    pub max_rank: usize,
    pub wall: Duration,
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub message: String,
    /// The integration broke down rather than being misconfigured.
    pub divergence: bool,
    pub t: f64,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Integrates `spec` on `problem`. `on_step` sees every step together with its
/// error, which is computed on steps where `record(step, last)` holds.
pub fn integrate(
    problem: &Problem,
    spec: &RunSpec,
    mut reference: Reference,
    record: impl Fn(usize, bool) -> bool,
    mut on_step: impl FnMut(&StepRecord, Option<f64>, &Solver) -> Result<()>,
) -> Result<Outcome> {
    let model = problem.model();
    let ic = problem.initial_condition()?;
    let steps_planned = step_count(spec.t_final, spec.dt)?;
    let clock = Instant::now();
    let mut solver = Solver::start(spec, &ic)?;
    let mut outcome = Outcome {
        steps: 0,
        steps_planned,
        t: 0.0,
        final_error: None,
        final_rank: 0,
        max_rank: 0,
        wall: Duration::ZERO,
        failure: None,
    };
    if let Some(st) = solver.low_rank_state()? {
        outcome.final_rank = st.rank();
        outcome.max_rank = st.rank();
    }
    for k in 0..steps_planned {
        let stepped = solver.step(model, spec.dt, k + 1).and_then(|rec| {
            reference.advance(model, spec.dt)?;
            Ok(rec)
        });
        let rec = match stepped {
            Ok(rec) => rec,
            Err(HarnessError::Core(e)) => {
                outcome.failure = Some(Failure { message: e.to_string(), divergence: is_divergence(&e), t: solver.t() });
                break;
            }
            Err(e) => return Err(e),
        };
        let last = k + 1 == steps_planned;
        let error = if record(k + 1, last) { reference.error(problem, &solver, rec.t, last)? } else { None };
        outcome.steps = k + 1;
        outcome.t = rec.t;
        outcome.final_rank = rec.r;
        outcome.max_rank = outcome.max_rank.max(rec.r);
        if last {
            outcome.final_error = error;
        }
        on_step(&rec, error, &solver)?;
    }
    outcome.wall = clock.elapsed();
    Ok(outcome)
}

/// Dense solution at `t_final`: closed form when available, otherwise a dense solve with step `dt`.
pub fn reference_solution(problem: &Problem, scheme: SchemeKind, dt: f64, t_final: f64) -> Result<DenseMatrix> {
    if let Some(exact) = problem.exact(t_final) {
        return exact;
    }
    let model = problem.model();
    let scheme = Scheme::new(scheme);
    let mut v = problem.initial_condition()?.to_dense();
    for k in 0..step_count(t_final, dt)? {
        v = fom_step(model, &v, k as f64 * dt, dt, &scheme)?;
    }
    Ok(v)
}

/// `‖V − V_r‖_F / ‖V‖_F` for the best rank-`r` approximation.
pub fn svd_optimal_error(reference: &DenseMatrix, r: usize) -> Result<f64> {
    let sigma = svd_economy(reference)?.sigma;
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let tail: f64 = sigma.iter().skip(r).map(|s| s * s).sum();
    Ok((tail / total).sqrt())
}
