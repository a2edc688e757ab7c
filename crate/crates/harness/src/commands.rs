//! The five subcommands. Each writes its CSV and a `summary.json` into the output directory.

use std::path::Path;
use std::time::Instant;

use lowrank_core::integrators::{RankPolicy, Scheme};
use lowrank_core::lowrank::checkpoint;
use serde_json::json;

use crate::config::{ExperimentConfig, Method, ReferenceKind};
use crate::error::{HarnessError, Result};
use crate::experiment::{
    integrate, reference_solution, svd_optimal_error, Failure, Outcome, Problem, Reference, RunSpec, Solver,
};
use crate::output::{self, create_dir, csv_writer, num, opt, outcome_json, TrajectoryCsv};
use crate::stats::{loglog_slope, median};

/// `run`: one integration, with `trajectory.csv`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let problem = Problem::build(&cfg.model, cfg.seed)?;
    let spec = RunSpec::from_config(cfg);
    let reference = Reference::choose(cfg.method.reference, &problem, spec.scheme)?;
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let width = if spec.method == Method::Fom { 0 } else { spec.policy.r_max };
    let mut traj = TrajectoryCsv::create(&dir.join("trajectory.csv"), width)?;
    let every = cfg.output.record_every;
    let ckpt = cfg.output.checkpoint_every;
    if ckpt > 0 && spec.method != Method::Fom {
        create_dir(&dir.join("checkpoints"))?;
    }
    let outcome = integrate(
        &problem,
        &spec,
        reference,
        |k, last| k % every == 0 || last,
        |rec, error, solver| {
            if rec.step % every == 0 || error.is_some() {
                traj.write(rec, error)?;
            }
            if ckpt > 0 && rec.step % ckpt == 0 {
                if let Some(state) = solver.low_rank_state()? {
                    let path = dir.join("checkpoints").join(format!("step_{:08}.bin", rec.step));
                    checkpoint::write(&path, &state)?;
                }
            }
            Ok(())
        },
    )?;
    traj.finish()?;
    let mut body = outcome_json(&outcome);
    body["model"] = json!(cfg.model.name());
    body["method"] = json!(spec.method.name());
    output::write_summary(dir, "run", cfg, body)?;
    Ok(outcome)
}

/// `compare`: the configured method against a dense solve advanced alongside it.
pub fn compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    let problem = Problem::build(&cfg.model, cfg.seed)?;
    let spec = RunSpec::from_config(cfg);
    let kind = match cfg.method.reference {
        ReferenceKind::Auto | ReferenceKind::None => ReferenceKind::Fom,
        other => other,
    };
    let reference = Reference::choose(kind, &problem, spec.scheme)?;
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let header: Vec<String> = ["t", "r", "error"].iter().map(|s| s.to_string()).collect();
    let mut w = csv_writer(&dir.join("error_vs_time.csv"), &header)?;
    let every = cfg.output.record_every;
    let outcome = integrate(
        &problem,
        &spec,
        reference,
        |k, last| k % every == 0 || last,
        |rec, error, _| {
            if let Some(e) = error {
                w.write_record([num(rec.t), rec.r.to_string(), num(e)])?;
            }
            Ok(())
        },
    )?;
    w.flush().map_err(|e| HarnessError::io("flushing error_vs_time.csv", e))?;
    let mut body = outcome_json(&outcome);
    body["model"] = json!(cfg.model.name());
    body["method"] = json!(spec.method.name());
    body["reference"] = json!(match kind {
        ReferenceKind::Exact => "exact",
        _ => "fom",
    });
    output::write_summary(dir, "compare", cfg, body)?;
    Ok(outcome)
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub method: String,
    pub r: usize,
    pub dt: f64,
    pub error: Option<f64>,
    pub failure: Option<Failure>,
    pub wall_seconds: f64,
}

fn sweep_header() -> Vec<String> {
    ["method", "r", "m", "dt", "t_final", "error", "failed", "failure", "wall_s"].iter().map(|s| s.to_string()).collect()
}

fn sweep_row(p: &SweepPoint, m: usize, t_final: f64) -> Vec<String> {
    vec![
        p.method.clone(),
        p.r.to_string(),
        m.to_string(),
        num(p.dt),
        num(t_final),
        opt(p.error),
        p.failure.is_some().to_string(),
        p.failure.as_ref().map(|f| f.message.clone()).unwrap_or_default(),
        num(p.wall_seconds),
    ]
}

/// Runs one sweep point to the end, turning any error into a recorded failure.
fn sweep_point(problem: &Problem, spec: &RunSpec, reference: &lowrank_core::dense::DenseMatrix) -> SweepPoint {
    let clock = Instant::now();
    let r = if spec.method == Method::Fom {
        let m = problem.model();
        m.nrows().min(m.ncols())
    } else {
        spec.policy.r0
    };
    let result = integrate(problem, spec, Reference::Final(reference.clone()), |_, last| last, |_, _, _| Ok(()));
    let (error, failure) = match result {
        Ok(o) => (o.final_error, o.failure),
        Err(e) => (None, Some(Failure { message: e.to_string(), divergence: false, t: 0.0 })),
    };
    SweepPoint {
        method: spec.method.name().to_string(),
        r,
        dt: spec.dt,
        error,
        failure,
        wall_seconds: clock.elapsed().as_secs_f64(),
    }
}

fn points_json(points: &[SweepPoint]) -> serde_json::Value {
    json!(points
        .iter()
        .map(|p| json!({
            "method": p.method,
            "r": p.r,
            "dt": p.dt,
            "error": p.error,
            "failure": output::failure_json(&p.failure),
        }))
        .collect::<Vec<_>>())
}

/// `sweep-rank`: final error per (method, r), plus the best rank-r error of the reference.
pub fn sweep_rank(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    if cfg.sweep.ranks.is_empty() {
        return Err(HarnessError::Config("sweep.ranks is empty".into()));
    }
    let problem = Problem::build(&cfg.model, cfg.seed)?;
    let base = RunSpec::from_config(cfg);
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let reference = reference_solution(&problem, base.scheme, base.dt, base.t_final)?;
    let m = cfg.policy.m;
    let mut w = csv_writer(&dir.join("error_vs_rank.csv"), &sweep_header())?;
    let mut points = Vec::new();
    for method in cfg.sweep_methods() {
        let ranks: Vec<usize> = if method == Method::Fom { vec![0] } else { cfg.sweep.ranks.clone() };
        for r in ranks {
            let spec = RunSpec { method, policy: RankPolicy::fixed(r.max(1), m), ..base.clone() };
            let p = sweep_point(&problem, &spec, &reference);
            w.write_record(sweep_row(&p, m, base.t_final))?;
            w.flush().map_err(|e| HarnessError::io("writing error_vs_rank.csv", e))?;
            points.push(p);
        }
    }
    for &r in &cfg.sweep.ranks {
        let p = SweepPoint {
            method: "svd_optimal".into(),
            r,
            dt: base.dt,
            error: Some(svd_optimal_error(&reference, r)?),
            failure: None,
            wall_seconds: 0.0,
        };
        w.write_record(sweep_row(&p, 0, base.t_final))?;
        points.push(p);
    }
    w.flush().map_err(|e| HarnessError::io("writing error_vs_rank.csv", e))?;
    let body = json!({ "model": cfg.model.name(), "points": points_json(&points) });
    output::write_summary(dir, "sweep-rank", cfg, body)?;
    Ok(points)
}

/// `sweep-dt`: final error per (method, Δt) at the configured rank.
pub fn sweep_dt(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    if cfg.sweep.dts.is_empty() {
        return Err(HarnessError::Config("sweep.dts is empty".into()));
    }
    let problem = Problem::build(&cfg.model, cfg.seed)?;
    let base = RunSpec::from_config(cfg);
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let reference_dt = cfg.sweep.reference_dt.unwrap_or(base.dt);
    let reference = reference_solution(&problem, base.scheme, reference_dt, base.t_final)?;
    let mut w = csv_writer(&dir.join("error_vs_dt.csv"), &sweep_header())?;
    let mut points = Vec::new();
    for method in cfg.sweep_methods() {
        for &dt in &cfg.sweep.dts {
            let spec = RunSpec { method, dt, ..base.clone() };
            let p = sweep_point(&problem, &spec, &reference);
            w.write_record(sweep_row(&p, cfg.policy.m, base.t_final))?;
            w.flush().map_err(|e| HarnessError::io("writing error_vs_dt.csv", e))?;
            points.push(p);
        }
    }
    let mut slopes = serde_json::Map::new();
    for method in cfg.sweep_methods() {
        let (x, y): (Vec<f64>, Vec<f64>) = points
            .iter()
            .filter(|p| p.method == method.name())
            .filter_map(|p| p.error.map(|e| (p.dt, e)))
            .unzip();
        slopes.insert(method.name().into(), json!(loglog_slope(&x, &y)));
    }
    let body = json!({
        "model": cfg.model.name(),
        "reference_dt": if problem.has_exact() { None } else { Some(reference_dt) },
        "slopes": slopes,
        "points": points_json(&points),
    });
    output::write_summary(dir, "sweep-dt", cfg, body)?;
    Ok(points)
}

/// Timing of one method at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub method: Method,
    pub size: usize,
    pub dt: f64,
    /// Per-step seconds; `None` when skipped.
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub note: String,
}

/// Bytes a dense step of this shape holds at once.
fn dense_working_set(n: usize, s: usize, scheme: &Scheme) -> f64 {
    ((scheme.stages() + 3) * n * s * 8) as f64
}

/// `scaling`: median per-step wall time against `n = s`.
pub fn scaling(cfg: &ExperimentConfig) -> Result<Vec<ScalingPoint>> {
    if cfg.sweep.sizes.is_empty() {
        return Err(HarnessError::Config("sweep.sizes is empty".into()));
    }
    let methods = if cfg.sweep.methods.is_empty() {
        vec![Method::TdbCur, Method::Dlra, Method::Fom]
    } else {
        cfg.sweep.methods.clone()
    };
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let header: Vec<String> =
        ["method", "n", "s", "r", "m", "dt", "timed_steps", "median_step_s", "min_step_s", "max_step_s", "skipped", "note"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let mut w = csv_writer(&dir.join("scaling.csv"), &header)?;
    let base = RunSpec::from_config(cfg);
    let (warmup, timed) = (cfg.sweep.warmup_steps, cfg.sweep.timed_steps.max(1));
    let budget = cfg.sweep.dense_memory_mb * 1024.0 * 1024.0;
    let mut points = Vec::new();
    for &size in &cfg.sweep.sizes {
        let model_cfg = cfg.model.resized(size);
        let problem = Problem::build(&model_cfg, cfg.seed)?;
        let (n, s) = model_cfg.shape();
        let dt = match model_cfg.burgers_spec(cfg.seed) {
            Some(spec) if cfg.method.dt.is_none() => spec.stable_dt(),
            _ => base.dt,
        };
        let ic = problem.initial_condition()?;
        for &method in &methods {
            let spec = RunSpec { method, dt, policy: RankPolicy::fixed(base.policy.r0, base.policy.m), ..base.clone() };
            let mut point = ScalingPoint { method, size, dt, median: None, min: None, max: None, note: String::new() };
            let dense = matches!(method, Method::Fom | Method::Dlra | Method::Do);
            if dense && dense_working_set(n, s, &Scheme::new(spec.scheme)) > budget {
                point.note = format!("dense working set exceeds {} MB", cfg.sweep.dense_memory_mb);
            } else {
                match time_steps(&problem, &spec, &ic, warmup, timed) {
                    Ok(times) => {
                        point.median = median(&times);
                        point.min = times.iter().copied().reduce(f64::min);
                        point.max = times.iter().copied().reduce(f64::max);
                    }
                    Err(e) => point.note = e.to_string(),
                }
            }
            let r = if method == Method::Fom { n.min(s) } else { spec.policy.r0 };
            w.write_record([
                method.name().to_string(),
                n.to_string(),
                s.to_string(),
                r.to_string(),
                spec.policy.m.to_string(),
                num(dt),
                timed.to_string(),
                opt(point.median),
                opt(point.min),
                opt(point.max),
                point.median.is_none().to_string(),
                point.note.clone(),
            ])?;
            w.flush().map_err(|e| HarnessError::io("writing scaling.csv", e))?;
            points.push(point);
        }
    }
    let mut slopes = serde_json::Map::new();
    for &method in &methods {
        let (x, y): (Vec<f64>, Vec<f64>) = points
            .iter()
            .filter(|p| p.method == method)
            .filter_map(|p| p.median.map(|t| (p.size as f64, t)))
            .unzip();
        slopes.insert(method.name().into(), json!(loglog_slope(&x, &y)));
    }
    let body = json!({
        "model": cfg.model.name(),
        "warmup_steps": warmup,
        "timed_steps": timed,
        "slopes": slopes,
    });
    output::write_summary(dir, "scaling", cfg, body)?;
    Ok(points)
}

fn time_steps(
    problem: &Problem,
    spec: &RunSpec,
    ic: &lowrank_core::integrators::InitialCondition,
    warmup: usize,
    timed: usize,
) -> Result<Vec<f64>> {
    let mut solver = Solver::start(spec, ic)?;
    let model = problem.model();
    let mut times = Vec::with_capacity(timed);
    for k in 0..warmup + timed {
        let rec = solver.step(model, spec.dt, k + 1)?;
        if k >= warmup {
            times.push(rec.wall.as_secs_f64());
        }
    }
    Ok(times)
}

/// Applies command-line overrides to a loaded config.
pub fn apply_overrides(cfg: &mut ExperimentConfig, out: Option<&Path>, seed: Option<u64>, checkpoint: Option<usize>) {
    if let Some(dir) = out {
        cfg.output.dir = dir.to_path_buf();
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(k) = checkpoint {
        cfg.output.checkpoint_every = k;
    }
}
