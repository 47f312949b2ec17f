use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use superres2d::measurement::{
    adjoint_eval, adjoint_grid, fft_threshold, forward, min_separation, torus_dist_inf, Source, SourceModel,
};

fn brute_separation(p: &[[f64; 2]]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            best = best.min(torus_dist_inf(p[i], p[j]));
        }
    }
    best
}

fn source() -> impl Strategy<Value = Source> {
    (0.0..1.0f64, 0.0..1.0f64, -2.0..2.0f64, -2.0..2.0f64)
        .prop_filter("nonzero amplitude", |s| s.2.hypot(s.3) > 1e-3)
        .prop_map(|(a, b, re, im)| Source {
            t: [a, b],
            d: Complex64::new(re, im),
        })
}

fn coeff_matrix(n: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
        .prop_map(move |v| DMatrix::from_iterator(n, n, v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

proptest! {
    #[test]
    fn separation_matches_brute_force(p in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..40)) {
        let pts: Vec<[f64; 2]> = p.into_iter().map(|(a, b)| [a, b]).collect();
        prop_assert_eq!(min_separation(&pts), brute_separation(&pts));
    }

    #[test]
    fn adjoint_is_consistent_with_forward(
        srcs in proptest::collection::vec(source(), 1..6),
        c in coeff_matrix(7),
    ) {
        let f_c = 3;
        let model = SourceModel::new(srcs).unwrap();
        let y = forward(&model, f_c).unwrap();
        let lhs: Complex64 = y.data().iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum();
        let rhs: Complex64 = model
            .sources()
            .iter()
            .map(|s| s.d.conj() * adjoint_eval(&c, f_c, s.t).unwrap())
            .sum();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn measurements_of_one_source_are_rank_one(s in source()) {
        let model = SourceModel::new(vec![s]).unwrap();
        let y = forward(&model, 4).unwrap();
        let sv = y.data().clone().singular_values();
        prop_assert!(sv[1] <= 1e-10 * sv[0]);
        prop_assert!((sv[0] - 9.0 * s.d.norm()).abs() <= 1e-9 * sv[0]);
    }

    #[test]
    fn fft_grid_matches_direct_sum(c in coeff_matrix(5)) {
        let f_c = 2;
        let g = fft_threshold(f_c);
        let grid = adjoint_grid(&c, f_c, g).unwrap();
        for a in (0..g).step_by(3) {
            for b in (0..g).step_by(5) {
                let t = [a as f64 / g as f64, b as f64 / g as f64];
                let direct = adjoint_eval(&c, f_c, t).unwrap();
                prop_assert!((grid[(a, b)] - direct).norm() <= 1e-11);
            }
        }
    }
}

#[test]
fn small_grid_uses_direct_path_and_agrees() {
    let f_c = 2;
    let c = DMatrix::from_fn(5, 5, |r, k| Complex64::new(r as f64 - 1.5, k as f64 * 0.25));
    let g = fft_threshold(f_c) - 1;
    let grid = adjoint_grid(&c, f_c, g).unwrap();
    let t = [4.0 / g as f64, 7.0 / g as f64];
    assert!((grid[(4, 7)] - adjoint_eval(&c, f_c, t).unwrap()).norm() < 1e-12);
}
