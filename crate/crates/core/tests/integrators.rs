use lowrank_core::dense::DenseMatrix;
use lowrank_core::integrators::{
    fom_solve, initial_state, initial_state_padded, relative_error, step_count, DlraState, DoState, MdeModel,
    RankAction, RankPolicy, Scheme, SchemeKind, TdbCur,
};
use lowrank_core::lowrank::LowRankState;
use lowrank_core::models::{BurgersModel, BurgersSpec, ToyModel, ToySpec};
use lowrank_core::rng::{normal_matrix, stream, stream_rng};
use lowrank_core::sampling::{AdjacencyMap, Selector};
use lowrank_core::{Error, Result};

/// `dV/dt = 0`.
struct Still {
    n: usize,
    s: usize,
    adj: AdjacencyMap,
}

impl Still {
    fn new(n: usize, s: usize) -> Self {
        Self { n, s, adj: AdjacencyMap::independent(n) }
    }
}

impl MdeModel for Still {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.s
    }
    fn row_adjacency(&self) -> &AdjacencyMap {
        &self.adj
    }
    fn rhs_cols(&self, _t: f64, _v: &DenseMatrix, cols: &[usize], _extra: &[usize]) -> Result<DenseMatrix> {
        Ok(DenseMatrix::zeros(self.n, cols.len()))
    }
    fn rhs_rows(&self, _t: f64, _v: &DenseMatrix, rows: &[usize], _adjacent: &[usize]) -> Result<DenseMatrix> {
        Ok(DenseMatrix::zeros(rows.len(), self.s))
    }
}

fn toy(n: usize, rank_deficient: bool) -> ToyModel {
    ToyModel::new(ToySpec { n, seed: 0, rank_deficient }).unwrap()
}

fn run_tdb(model: &dyn MdeModel, state: LowRankState, cur: &TdbCur, dt: f64, t_final: f64) -> LowRankState {
    let mut st = state;
    for _ in 0..step_count(t_final - st.t(), dt).unwrap() {
        st = cur.step(&st, model, dt).unwrap().0;
    }
    st
}

#[test]
fn toy_dense_solve_matches_closed_form() {
    let model = toy(30, false);
    let v0 = model.initial_condition().to_dense();
    let traj = fom_solve(&model, &v0, 0.0, 1e-3, 0.5, &Scheme::new(SchemeKind::Rk4Classic), 100).unwrap();
    let exact = model.exact(0.5).unwrap();
    let rel = (traj.last() - &exact).norm() / exact.norm();
    assert!(rel <= 1e-12, "{rel:.3e}");
    assert_eq!(traj.times.len(), 6);
}

#[test]
fn baselines_leave_a_steady_state_unchanged() {
    let v = normal_matrix(&mut stream_rng(5, stream::TESTING), 15, 9);
    let state = LowRankState::from_dense(&v, 4, 0.0).unwrap();
    let model = Still::new(15, 9);
    let scheme = Scheme::new(SchemeKind::Rk4Classic);
    let mut dlra = DlraState::from_state(&state);
    let mut dyn_orth = DoState::from_state(&state);
    for _ in 0..10 {
        dlra = dlra.step(&model, 0.1, &scheme).unwrap();
        dyn_orth = dyn_orth.step(&model, 0.1, &scheme).unwrap();
    }
    let reference = state.to_dense();
    assert!((dlra.to_dense() - &reference).norm() <= 1e-14 * reference.norm());
    assert!((dyn_orth.to_dense() - &reference).norm() <= 1e-14 * reference.norm());
    assert!((dlra.t - 1.0).abs() < 1e-12);

    let cur = TdbCur::new(SchemeKind::Rk4Classic, RankPolicy::fixed(4, 2), Selector::Deim);
    let out = run_tdb(&model, state.clone(), &cur, 0.1, 1.0);
    assert!((out.to_dense() - &reference).norm() <= 1e-12 * reference.norm());
}

#[test]
fn dynamically_orthogonal_and_dlra_agree() {
    let model = toy(40, false);
    let state = initial_state(&model.initial_condition(), 6, 0.0).unwrap();
    let scheme = Scheme::new(SchemeKind::Rk4Classic);
    let mut dlra = DlraState::from_state(&state);
    let mut dyn_orth = DoState::from_state(&state);
    for _ in 0..200 {
        dlra = dlra.step(&model, 1e-3, &scheme).unwrap();
        dyn_orth = dyn_orth.step(&model, 1e-3, &scheme).unwrap();
    }
    let a = dlra.to_dense();
    let rel = (dyn_orth.to_dense() - &a).norm() / a.norm();
    assert!(rel <= 1e-6, "{rel:.3e}");
}

#[test]
fn toy_error_tracks_discarded_modes() {
    // the exact singular values are eᵗ 2⁻ⁱ, so the best rank-r error is about 2⁻ʳ/√3 relative
    let model = toy(60, false);
    let mut last = f64::INFINITY;
    for r in [2, 4, 8] {
        let cur = TdbCur::new(SchemeKind::Rk4Classic, RankPolicy::fixed(r, 0), Selector::Deim);
        let st = run_tdb(&model, initial_state(&model.initial_condition(), r, 0.0).unwrap(), &cur, 1e-2, 0.5);
        let err = relative_error(&st, &model.exact(0.5).unwrap()).unwrap();
        let optimal = 0.5f64.powi(r as i32);
        assert!(err < 2.0 * optimal, "r={r}: {err:.3e}");
        assert!(err < last);
        last = err;
    }
}

#[test]
fn rank_deficient_start_stays_finite_where_dlra_fails() {
    let model = toy(30, true);
    let state = initial_state_padded(&model.initial_condition(), 8, 0.0).unwrap();
    let scheme = Scheme::new(SchemeKind::Rk4Classic);
    let err = DlraState::from_state(&state).step(&model, 1e-2, &scheme).unwrap_err();
    assert!(matches!(err, Error::BaselineSingular { .. }), "{err:?}");

    let cur = TdbCur::new(SchemeKind::Rk4Classic, RankPolicy::fixed(8, 0), Selector::Deim);
    let st = run_tdb(&model, state, &cur, 1e-2, 0.5);
    let rel = relative_error(&st, &model.exact(0.5).unwrap()).unwrap();
    assert!(rel < 1e-7, "{rel:.3e}");
}

#[test]
fn temporal_order_of_classic_rk4() {
    let model = toy(30, false);
    let errors: Vec<f64> = [0.1, 0.05]
        .iter()
        .map(|&dt| {
            let cur = TdbCur::new(SchemeKind::Rk4Classic, RankPolicy::fixed(30, 0), Selector::Deim);
            let st = run_tdb(&model, initial_state(&model.initial_condition(), 30, 0.0).unwrap(), &cur, dt, 1.0);
            relative_error(&st, &model.exact(1.0).unwrap()).unwrap()
        })
        .collect();
    let order = (errors[0] / errors[1]).log2();
    assert!((3.5..4.5).contains(&order), "observed order {order:.2}");
}

#[test]
fn adaptive_rank_grows_when_threshold_is_tight() {
    let model = toy(30, false);
    let policy = RankPolicy::adaptive(2, 1, 12, 1e-12, 1e-3, 2);
    let cur = TdbCur::new(SchemeKind::Rk4Classic, policy, Selector::Deim);
    let mut st = initial_state(&model.initial_condition(), 2, 0.0).unwrap();
    let mut added = 0;
    for _ in 0..40 {
        let (next, diag) = cur.step(&st, &model, 1e-2).unwrap();
        if diag.rank_action == RankAction::Added {
            added += 1;
            assert_eq!(next.rank(), st.rank() + 1);
        }
        st = next;
    }
    assert!(added > 0);
    assert!(st.rank() <= 12);
    // once added, the proxy of the new mode sits below the threshold
    let eps = lowrank_core::lowrank::error_proxy(st.sigma()).unwrap();
    assert!(eps <= 1e-3 || st.rank() == 12);
}

#[test]
fn runs_are_bitwise_reproducible() {
    let spec = BurgersSpec { n: 81, s: 24, d: 5, ..Default::default() };
    let run = || {
        let model = BurgersModel::new(spec).unwrap();
        let st = initial_state(&model.initial_condition().unwrap(), 5, 0.0).unwrap();
        let cur = TdbCur::new(SchemeKind::Rk4Classic, RankPolicy::adaptive(5, 1, 10, 1e-12, 1e-6, 2), Selector::Deim);
        run_tdb(&model, st, &cur, spec.stable_dt(), 0.02)
    };
    let (a, b) = (run(), run());
    assert_eq!(a.sigma(), b.sigma());
    assert_eq!(a.u(), b.u());
    assert_eq!(a.y(), b.y());
}

#[test]
fn burgers_fixed_rank_against_dense() {
    let spec = BurgersSpec { n: 101, s: 32, d: 6, ..Default::default() };
    let model = BurgersModel::new(spec).unwrap();
    let ic = model.initial_condition().unwrap();
    let dt = spec.stable_dt();
    let traj = fom_solve(&model, &ic.to_dense(), 0.0, dt, 0.1, &Scheme::new(SchemeKind::Rk4Classic), usize::MAX).unwrap();
    let cur = TdbCur::new(SchemeKind::Rk4Classic, RankPolicy::fixed(7, 0), Selector::Deim);
    let st = run_tdb(&model, initial_state(&ic, 7, 0.0).unwrap(), &cur, dt, 0.1);
    let err = relative_error(&st, traj.last()).unwrap();
    assert!(err < 1e-3, "{err:.3e}");
}
