//! Rank-adaptive CUR stepper on time-dependent bases.
//!
//! One step advances `U Σ Yᵀ` by evaluating the explicit scheme only at a
//! handful of sampled columns `s` and rows `p`, then rebuilding the factors
//! with [`cur_from_samples`](crate::lowrank::cur_from_samples).
//!
//! Multi-stage schemes need stage values at the stencil neighbors of the
//! sampled rows. [`StageEvaluation::Nested`] evaluates each stage exactly on
//! the neighborhood its successors read, one adjacency layer wider per stage.
//! [`StageEvaluation::Surrogate`] keeps a single layer `p_a` and fills it from
//! a per-stage low-rank surrogate `F̂ᵢ = U_F U_F(p,:)† Fᵢ(p,:)`, where `U_F`
//! spans the exactly evaluated `Fᵢ(:,s)`. Column-coupled models get the
//! mirror treatment for their column neighbors.

use std::collections::HashMap;
use std::str::FromStr;
use std::time::Instant;

use crate::dense::{add_scaled, orth_basis, pinv_norm_or_inf, pinv_solve, select_cols, select_rows, DenseMatrix};
use crate::error::{Error, Result};
use crate::lowrank::{cur_from_samples_timed, LowRankState};
use crate::sampling::{find_adjacent, sparse_selection, AdjacencyMap, IndexVector, Selector};

use super::model::MdeModel;
use super::scheme::{RankAction, RankPolicy, Scheme};
use super::{ensure_finite_samples, StepDiagnostics, StepTimings};

/// Relative cutoff for the stage surrogate basis and its row fit.
const SURROGATE_RCOND: f64 = 1e-12;

/// Source of stage values at rows (and columns) adjacent to the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageEvaluation {
    #[default]
    Nested,
    Surrogate,
}

impl StageEvaluation {
    pub fn name(self) -> &'static str {
        match self {
            StageEvaluation::Nested => "nested",
            StageEvaluation::Surrogate => "surrogate",
        }
    }
}

impl std::fmt::Display for StageEvaluation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StageEvaluation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested" => Ok(StageEvaluation::Nested),
            "surrogate" => Ok(StageEvaluation::Surrogate),
            other => Err(Error::InvalidParameter(format!("unknown stage evaluation '{other}'"))),
        }
    }
}

/// Configuration of the sampled stepper.
#[derive(Debug, Clone, PartialEq)]
pub struct TdbCur {
    pub scheme: Scheme,
    pub policy: RankPolicy,
    pub selector: Selector,
    pub stages: StageEvaluation,
}

/// Low-rank model of one stage derivative, built from its sampled rows and columns.
struct StageSurrogate {
    basis: DenseMatrix,
    coef: DenseMatrix,
}

impl StageSurrogate {
    fn fit(f_cols: &DenseMatrix, f_rows: &DenseMatrix, p: &[usize]) -> Result<Self> {
        let basis = orth_basis(f_cols, SURROGATE_RCOND)?;
        let coef = pinv_solve(&select_rows(&basis, p), f_rows, SURROGATE_RCOND)?;
        Ok(Self { basis, coef })
    }

    fn rows(&self, idx: &[usize]) -> DenseMatrix {
        select_rows(&self.basis, idx) * &self.coef
    }

    fn cols(&self, idx: &[usize]) -> DenseMatrix {
        &self.basis * select_cols(&self.coef, idx)
    }
}

impl TdbCur {
    pub fn new(scheme: impl Into<Scheme>, policy: RankPolicy, selector: Selector) -> Self {
        Self { scheme: scheme.into(), policy, selector, stages: StageEvaluation::default() }
    }

    pub fn with_stages(mut self, stages: StageEvaluation) -> Self {
        self.stages = stages;
        self
    }

    /// Advances `state` by `dt`.
    pub fn step(
        &self,
        state: &LowRankState,
        model: &dyn MdeModel,
        dt: f64,
    ) -> Result<(LowRankState, StepDiagnostics)> {
        let wall = Instant::now();
        let (n, ns) = (model.nrows(), model.ncols());
        if state.nrows() != n || state.ncols() != ns {
            return Err(Error::Shape(format!(
                "state is {}x{}, model is {n}x{ns}",
                state.nrows(),
                state.ncols()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let t = state.t();
        let mut timings = StepTimings::default();

        let clock = Instant::now();
        let (epsilon, rank_action, r) = self.policy.decide(state.sigma())?;
        let truncated;
        let base = if rank_action == RankAction::Removed {
            truncated = state.truncate(r)?;
            &truncated
        } else {
            state
        };
        if r > n.min(ns) {
            return Err(Error::InvalidParameter(format!("rank {r} exceeds min(n, s)")));
        }
        let m = self.policy.m.min(n - r);
        let s_idx = sparse_selection(self.selector, base.y(), r)?;
        let p = sparse_selection(self.selector, base.u(), r + m)?;
        let eta_s_prev = pinv_norm_or_inf(&select_rows(base.y(), &s_idx));
        timings.selection = clock.elapsed();

        let (g_cols, g_rows) = match self.stages {
            StageEvaluation::Nested => self.nested_update(base, model, dt, &p, &s_idx, &mut timings)?,
            StageEvaluation::Surrogate => {
                let clock = Instant::now();
                let p_a = find_adjacent(&p, model.row_adjacency(), 1);
                let s_a = match model.col_adjacency() {
                    Some(adj) => find_adjacent(&s_idx, adj, 1),
                    None => IndexVector::possibly_empty(Vec::new(), ns)?,
                };
                timings.selection += clock.elapsed();
                self.sampled_update(base, model, dt, &p, &p_a, &s_idx, &s_a, &mut timings)?
            }
        };

        let (next, cur, cur_times) = cur_from_samples_timed(&g_cols, &g_rows, &p, Some(&s_idx), t + dt)?;
        timings.qr = cur_times.qr;
        timings.svd = cur_times.svd;

        let diag = StepDiagnostics {
            t: t + dt,
            r: next.rank(),
            sigma: next.sigma().to_vec(),
            epsilon,
            rank_action,
            eta_p: cur.eta_p,
            eta_s: cur.eta_s,
            eta_s_prev,
            error_factor: cur.error_factor,
            rank_deficient: cur.rank_deficient,
            timings,
            wall: wall.elapsed(),
        };
        Ok((next, diag))
    }

    /// `G(:,s)` and `G(p,:)` for one step of the explicit scheme.
    #[allow(clippy::too_many_arguments)]
    fn sampled_update(
        &self,
        base: &LowRankState,
        model: &dyn MdeModel,
        dt: f64,
        p: &IndexVector,
        p_a: &IndexVector,
        s: &IndexVector,
        s_a: &IndexVector,
        timings: &mut StepTimings,
    ) -> Result<(DenseMatrix, DenseMatrix)> {
        let t = base.t();
        let (np, ns) = (p.len(), s.len());
        let rows_all: Vec<usize> = p.iter().chain(p_a.iter()).copied().collect();
        let cols_all: Vec<usize> = s.iter().chain(s_a.iter()).copied().collect();
        let v_rows = base.assemble_rows(&rows_all);
        let v_cols = base.assemble_cols(&cols_all);

        let scheme = &self.scheme;
        let stages = scheme.stages();
        let needs_surrogate = !p_a.is_empty() || !s_a.is_empty();
        let mut f_cols: Vec<DenseMatrix> = Vec::with_capacity(stages);
        let mut f_rows: Vec<DenseMatrix> = Vec::with_capacity(stages);
        let mut f_rows_adj: Vec<DenseMatrix> = Vec::with_capacity(stages);
        let mut f_cols_adj: Vec<DenseMatrix> = Vec::with_capacity(stages);

        for i in 0..stages {
            let ti = t + scheme.c[i] * dt;
            let mut xc = v_cols.clone();
            let mut xr = v_rows.clone();
            for (j, &a) in scheme.a[i].iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let w = dt * a;
                add_scaled(&mut xc.columns_mut(0, ns), w, &f_cols[j]);
                add_scaled(&mut xr.rows_mut(0, np), w, &f_rows[j]);
                if !s_a.is_empty() {
                    add_scaled(&mut xc.columns_mut(ns, s_a.len()), w, &f_cols_adj[j]);
                }
                if !p_a.is_empty() {
                    add_scaled(&mut xr.rows_mut(np, p_a.len()), w, &f_rows_adj[j]);
                }
            }

            let clock = Instant::now();
            let fc = model.rhs_cols(ti, &xc, s, s_a)?;
            ensure_finite_samples(&fc, ti, |i| i, |j| s[j])?;
            timings.col_eval += clock.elapsed();

            let clock = Instant::now();
            let fr = model.rhs_rows(ti, &xr, p, p_a)?;
            ensure_finite_samples(&fr, ti, |i| p[i], |j| j)?;
            let later_use = (i + 1..stages).any(|k| scheme.a[k].get(i).is_some_and(|&a| a != 0.0));
            if needs_surrogate && later_use {
                let sur = StageSurrogate::fit(&fc, &fr, p)?;
                f_rows_adj.push(sur.rows(p_a));
                f_cols_adj.push(sur.cols(s_a));
            } else {
                f_rows_adj.push(DenseMatrix::zeros(0, 0));
                f_cols_adj.push(DenseMatrix::zeros(0, 0));
            }
            timings.row_eval += clock.elapsed();

            f_cols.push(fc);
            f_rows.push(fr);
        }

        let mut g_cols = v_cols.columns(0, ns).into_owned();
        let mut g_rows = v_rows.rows(0, np).into_owned();
        for (i, &b) in scheme.b.iter().enumerate() {
            if b != 0.0 {
                add_scaled(&mut g_cols, dt * b, &f_cols[i]);
                add_scaled(&mut g_rows, dt * b, &f_rows[i]);
            }
        }
        let t_end = t + dt;
        ensure_finite_samples(&g_cols, t_end, |i| i, |j| s[j])?;
        ensure_finite_samples(&g_rows, t_end, |i| p[i], |j| j)?;
        Ok((g_cols, g_rows))
    }

    /// `G(:,s)` and `G(p,:)` with every stage evaluated exactly.
    fn nested_update(
        &self,
        base: &LowRankState,
        model: &dyn MdeModel,
        dt: f64,
        p: &IndexVector,
        s: &IndexVector,
        timings: &mut StepTimings,
    ) -> Result<(DenseMatrix, DenseMatrix)> {
        let t = base.t();
        let scheme = &self.scheme;
        let clock = Instant::now();
        let depth = stage_depths(scheme);
        let deepest = depth.iter().flatten().max().map_or(0, |d| d + 1);
        let row_adj = Some(model.row_adjacency());
        let col_adj = model.col_adjacency();
        let rows_in = layer(p, row_adj, deepest);
        let cols_in = layer(s, col_adj, deepest);
        let v_rows = base.assemble_rows(&rows_in);
        let v_cols = base.assemble_cols(&cols_in);
        let row_slot = slots(&rows_in);
        let col_slot = slots(&cols_in);
        timings.selection += clock.elapsed();

        // per stage: (rows, F(rows,:), slots) and (cols, F(:,cols), slots)
        let mut f_rows: Vec<Option<Evaluated>> = Vec::with_capacity(depth.len());
        let mut f_cols: Vec<Option<Evaluated>> = Vec::with_capacity(depth.len());
        for (i, d) in depth.iter().enumerate() {
            let Some(d) = *d else {
                f_rows.push(None);
                f_cols.push(None);
                continue;
            };
            let ti = t + scheme.c[i] * dt;

            let clock = Instant::now();
            let (c_own, c_in) = layer_pair(s, col_adj, d);
            let mut xc = select_cols(&v_cols, &lookup(&col_slot, &c_in));
            for (j, &a) in scheme.a[i].iter().enumerate() {
                if a != 0.0 {
                    let prev = f_cols[j].as_ref().expect("consumed stage was evaluated");
                    add_scaled(&mut xc, dt * a, &select_cols(&prev.values, &lookup(&prev.slot, &c_in)));
                }
            }
            let fc = model.rhs_cols(ti, &xc, &c_own, &c_in[c_own.len()..])?;
            ensure_finite_samples(&fc, ti, |k| k, |k| c_own[k])?;
            timings.col_eval += clock.elapsed();

            let clock = Instant::now();
            let (r_own, r_in) = layer_pair(p, row_adj, d);
            let mut xr = select_rows(&v_rows, &lookup(&row_slot, &r_in));
            for (j, &a) in scheme.a[i].iter().enumerate() {
                if a != 0.0 {
                    let prev = f_rows[j].as_ref().expect("consumed stage was evaluated");
                    add_scaled(&mut xr, dt * a, &select_rows(&prev.values, &lookup(&prev.slot, &r_in)));
                }
            }
            let fr = model.rhs_rows(ti, &xr, &r_own, &r_in[r_own.len()..])?;
            ensure_finite_samples(&fr, ti, |k| r_own[k], |k| k)?;
            timings.row_eval += clock.elapsed();

            f_cols.push(Some(Evaluated { slot: slots(&c_own), values: fc }));
            f_rows.push(Some(Evaluated { slot: slots(&r_own), values: fr }));
        }

        let (np, ns) = (p.len(), s.len());
        let mut g_cols = v_cols.columns(0, ns).into_owned();
        let mut g_rows = v_rows.rows(0, np).into_owned();
        for (i, &b) in scheme.b.iter().enumerate() {
            if b != 0.0 {
                let (fc, fr) = match (&f_cols[i], &f_rows[i]) {
                    (Some(fc), Some(fr)) => (fc, fr),
                    _ => unreachable!("stages with weight are evaluated"),
                };
                // own layers list the samples first
                add_scaled(&mut g_cols, dt * b, &fc.values.columns(0, ns));
                add_scaled(&mut g_rows, dt * b, &fr.values.rows(0, np));
            }
        }
        let t_end = t + dt;
        ensure_finite_samples(&g_cols, t_end, |k| k, |k| s[k])?;
        ensure_finite_samples(&g_rows, t_end, |k| p[k], |k| k)?;
        Ok((g_cols, g_rows))
    }
}

/// Stage derivative on a subset of rows or columns.
struct Evaluated {
    slot: HashMap<usize, usize>,
    values: DenseMatrix,
}

/// How many adjacency layers beyond the samples each stage derivative is
/// needed on; `None` for stages nothing reads.
fn stage_depths(scheme: &Scheme) -> Vec<Option<usize>> {
    let stages = scheme.stages();
    let mut depth: Vec<Option<usize>> = vec![None; stages];
    for i in (0..stages).rev() {
        let mut d = (scheme.b[i] != 0.0).then_some(0);
        #[allow(clippy::needless_range_loop)]
        for j in i + 1..stages {
            if let (Some(dj), true) = (depth[j], scheme.a[j][i] != 0.0) {
                d = Some(d.map_or(dj + 1, |x| x.max(dj + 1)));
            }
        }
        depth[i] = d;
    }
    depth
}

/// `base` followed by everything within `depth` adjacency steps, sorted.
fn layer(base: &IndexVector, adj: Option<&AdjacencyMap>, depth: usize) -> Vec<usize> {
    let mut out = base.to_vec();
    if let Some(adj) = adj {
        out.extend_from_slice(&find_adjacent(base, adj, depth));
    }
    out
}

/// The depth-`d` layer, and the same layer followed by the indices first
/// reached at depth `d + 1`.
fn layer_pair(base: &IndexVector, adj: Option<&AdjacencyMap>, depth: usize) -> (Vec<usize>, Vec<usize>) {
    let own = layer(base, adj, depth);
    let mut input = own.clone();
    if let Some(adj) = adj {
        let inside: std::collections::HashSet<usize> = own.iter().copied().collect();
        input.extend(find_adjacent(base, adj, depth + 1).iter().filter(|i| !inside.contains(i)));
    }
    (own, input)
}

fn slots(order: &[usize]) -> HashMap<usize, usize> {
    order.iter().enumerate().map(|(k, &i)| (i, k)).collect()
}

fn lookup(slot: &HashMap<usize, usize>, wanted: &[usize]) -> Vec<usize> {
    wanted.iter().map(|i| slot[i]).collect()
}
