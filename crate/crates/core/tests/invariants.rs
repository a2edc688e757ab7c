use std::collections::HashSet;

use lowrank_core::dense::{qr_economy, select_cols, select_rows, orthonormality_defect, svd_economy};
use lowrank_core::lowrank::{checkpoint, cur_from_samples, error_proxy, LowRankState};
use lowrank_core::rng::{normal_matrix, stream, stream_rng};
use lowrank_core::sampling::{deim, find_adjacent, oversample, qdeim, AdjacencyMap, IndexVector};
use proptest::prelude::*;

fn orthonormal(seed: u64, n: usize, r: usize) -> lowrank_core::dense::DenseMatrix {
    qr_economy(&normal_matrix(&mut stream_rng(seed, stream::TESTING), n, r)).unwrap().q
}

fn distinct(idx: &[usize]) -> bool {
    idx.iter().collect::<HashSet<_>>().len() == idx.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selections_are_distinct_and_invertible(seed in 0u64..10_000, n in 4usize..50, r in 1usize..8) {
        let r = r.min(n);
        let u = orthonormal(seed, n, r);
        for p in [deim(&u).unwrap(), qdeim(&u).unwrap()] {
            prop_assert_eq!(p.len(), r);
            prop_assert!(distinct(&p));
            prop_assert!(p.iter().all(|&i| i < n));
            let sv = svd_economy(&select_rows(&u, &p)).unwrap().sigma;
            prop_assert!(sv[r - 1] > 0.0);
        }
    }

    #[test]
    fn oversampling_extends_and_never_worsens(seed in 0u64..10_000, n in 6usize..50, r in 1usize..6, m in 1usize..6) {
        let r = r.min(n - 1);
        let m = m.min(n - r);
        let u = orthonormal(seed, n, r);
        let p0 = deim(&u).unwrap();
        let p = oversample(&u, &p0, m).unwrap();
        prop_assert_eq!(p.len(), r + m);
        prop_assert!(distinct(&p));
        prop_assert_eq!(&p[..r], &p0[..]);
        let before = svd_economy(&select_rows(&u, &p0)).unwrap().sigma[r - 1];
        let after = svd_economy(&select_rows(&u, &p)).unwrap().sigma[r - 1];
        prop_assert!(after >= before * (1.0 - 1e-12));
    }

    #[test]
    fn adjacency_excludes_the_seed_set(seed in 0u64..10_000, nx in 3usize..12, ny in 3usize..12, k in 1usize..6, depth in 1usize..4) {
        let n = nx * ny;
        let mut rng = stream_rng(seed, stream::TESTING);
        let picks: Vec<usize> = rand::seq::index::sample(&mut rng, n, k.min(n)).into_vec();
        let p = IndexVector::new(picks, n).unwrap();
        let adj = find_adjacent(&p, &AdjacencyMap::cross(nx, ny), depth);
        prop_assert!(adj.iter().all(|i| !p.contains(i)));
        prop_assert!(adj.windows(2).all(|w| w[0] < w[1]));
        // each layer of a five-point stencil grows by at most 4 per point
        prop_assert!(adj.len() <= p.len() * 2 * depth * (depth + 1));
    }

    #[test]
    fn reconstruction_is_a_valid_svd(seed in 0u64..10_000, n in 8usize..40, s in 6usize..30, r in 1usize..6, m in 0usize..4) {
        let r = r.min(s).min(n);
        let m = m.min(n - r);
        let mut rng = stream_rng(seed, stream::TESTING);
        let g = normal_matrix(&mut rng, n, s);
        let st = LowRankState::from_dense(&g, r, 0.0).unwrap();
        let sidx = deim(st.y()).unwrap();
        let p = oversample(st.u(), &deim(st.u()).unwrap(), m).unwrap();
        let (out, diag) = cur_from_samples(&select_cols(&g, &sidx), &select_rows(&g, &p), &p, Some(&sidx), 1.5).unwrap();
        prop_assert_eq!(out.rank(), r);
        prop_assert!(orthonormality_defect(out.u()) < 1e-10);
        prop_assert!(orthonormality_defect(out.y()) < 1e-10);
        prop_assert!(out.sigma().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(out.sigma().iter().all(|&x| x >= 0.0));
        prop_assert!(diag.error_factor >= 1.0);
        prop_assert_eq!(out.t(), 1.5);
        let eps = error_proxy(out.sigma()).unwrap();
        prop_assert!(eps > 0.0 && eps <= 1.0);
    }

    #[test]
    fn checkpoint_round_trip(seed in 0u64..10_000, n in 2usize..30, s in 2usize..30, r in 1usize..5, t in -10.0f64..10.0) {
        let r = r.min(n).min(s);
        let g = normal_matrix(&mut stream_rng(seed, stream::TESTING), n, s);
        let st = LowRankState::from_dense(&g, r, t).unwrap();
        let back = checkpoint::decode(&checkpoint::encode(&st)).unwrap();
        prop_assert_eq!(back, st);
    }

    #[test]
    fn truncation_keeps_the_leading_modes(seed in 0u64..10_000, n in 4usize..30, s in 4usize..30, r in 2usize..6) {
        let r = r.min(n).min(s);
        let g = normal_matrix(&mut stream_rng(seed, stream::TESTING), n, s);
        let st = LowRankState::from_dense(&g, r, 0.0).unwrap();
        let cut = st.truncate(r - 1).unwrap();
        prop_assert_eq!(cut.sigma(), &st.sigma()[..r - 1]);
        prop_assert_eq!(cut.u(), &st.u().columns(0, r - 1).into_owned());
    }
}
