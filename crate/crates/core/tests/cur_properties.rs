//! Exactness and error-bound properties of the sampled CUR reconstruction
//! on seeded random instances.

use lowrank_core::dense::{select_cols, select_rows, svd_economy, DenseMatrix};
use lowrank_core::lowrank::reference::{cur_reference, interpolation_error_bound};
use lowrank_core::lowrank::cur_from_samples;
use lowrank_core::rng::{normal_matrix, stream, stream_rng};
use lowrank_core::sampling::{sparse_selection, Selector};
use rand::Rng;

struct Instance {
    g: DenseMatrix,
    r: usize,
    m: usize,
}

/// `G = X diag(0.6ᵏ) Z` with Gaussian `X`, `Z`: a slowly decaying spectrum.
fn instance(seed: u64) -> Instance {
    let mut rng = stream_rng(seed, stream::TESTING);
    let n = rng.random_range(12..=60);
    let s = rng.random_range(10..=40);
    let r = rng.random_range(1..=8);
    let m = if seed.is_multiple_of(2) { 0 } else { 3 };
    let k = n.min(s);
    let mut x = normal_matrix(&mut rng, n, k);
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col *= 0.6f64.powi(j as i32);
    }
    let g = x * normal_matrix(&mut rng, k, s);
    Instance { g, r, m }
}

#[test]
fn hundred_instances() {
    for seed in 0..100 {
        let Instance { g, r, m } = instance(seed);
        let svd = svd_economy(&g).unwrap();
        let u = svd.u.columns(0, r).into_owned();
        let y = svd.y.columns(0, r).into_owned();
        let s = sparse_selection(Selector::Deim, &y, r).unwrap();
        let p = sparse_selection(Selector::Deim, &u, r + m).unwrap();
        let gc = select_cols(&g, &s);
        let gr = select_rows(&g, &p);
        let (st, diag) = cur_from_samples(&gc, &gr, &p, Some(&s), 0.0).unwrap();
        let vhat = st.to_dense();
        let scale = g.norm();

        if m == 0 {
            let reference = cur_reference(&g, &p, &s).unwrap();
            let rel = (&vhat - &reference).norm() / reference.norm();
            assert!(rel <= 1e-10, "seed {seed}: CUR mismatch {rel:.3e}");
            let row_err = (select_rows(&vhat, &p) - &gr).norm();
            assert!(row_err <= 1e-10 * scale, "seed {seed}: rows not interpolated ({row_err:.3e})");
        }
        let col_err = (select_cols(&vhat, &s) - &gc).norm();
        assert!(col_err <= 1e-10 * scale, "seed {seed}: columns not interpolated ({col_err:.3e})");

        let (lhs, rhs) = interpolation_error_bound(&g, &st, &diag, &p, &s).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12 * scale, "seed {seed}: {lhs:.3e} > {rhs:.3e}");
    }
}

#[test]
fn bound_with_exact_singular_bases_is_trailing_singular_value() {
    // with U, Y the dominant singular vectors the bound's σ̂ is σ_{r+1}
    for seed in 200..220 {
        let Instance { g, r, .. } = instance(seed);
        let svd = svd_economy(&g).unwrap();
        let u = svd.u.columns(0, r).into_owned();
        let y = svd.y.columns(0, r).into_owned();
        let p = sparse_selection(Selector::Deim, &u, r).unwrap();
        let s = sparse_selection(Selector::Deim, &y, r).unwrap();
        let (st, diag) = cur_from_samples(&select_cols(&g, &s), &select_rows(&g, &p), &p, Some(&s), 0.0).unwrap();
        let err = lowrank_core::dense::spectral_norm(&(&g - st.to_dense()));
        let eta_p = lowrank_core::dense::norm2_of_pinv(&select_rows(&u, &p)).unwrap();
        let eta_s = lowrank_core::dense::norm2_of_pinv(&select_rows(&y, &s)).unwrap();
        let factor = (eta_p * (1.0 + eta_s)).min(eta_s * (1.0 + eta_p));
        assert!(err <= factor * svd.sigma[r] * (1.0 + 1e-10), "seed {seed}");
        assert!(diag.error_factor >= 1.0);
    }
}
