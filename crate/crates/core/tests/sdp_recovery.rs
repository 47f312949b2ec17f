use num_complex::Complex64;
use superres2d::experiment::{random_model, recover, trial_rng, AmplitudeModel};
use superres2d::localize::{find_peaks, recover_amplitudes, PeakOptions, MATCH_RADIUS};
use superres2d::measurement::{forward, MeasurementMatrix, SourceModel};
use superres2d::sdp::{build_problem, check_duality, solve, SolverOptions};

fn single_source() -> SourceModel {
    SourceModel::from_parts(&[[0.3, 0.7]], &[Complex64::new(1.0, 0.0)]).unwrap()
}

#[test]
fn single_source_dual_optimum_equals_tv_norm() {
    let model = single_source();
    let y = forward(&model, 4).unwrap();
    let sol = solve(&build_problem(&y), &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    let rep = check_duality(&sol, &model).unwrap();
    assert!(rep.gap <= 1e-3, "{rep:?}");
    assert!(rep.sign_match_residual <= 1e-2);
    assert!(sol.min_eigenvalue >= -1e-7);
    assert!(sol.trace_residual <= 1e-6);
    assert!(sol.grid_max_modulus <= 1.0 + 1e-4);
    assert!(sol.objective <= model.tv_norm() + 1e-6);

    let peaks = find_peaks(&sol.c, 4, &PeakOptions::default()).unwrap();
    assert_eq!(peaks.len(), 1);
    assert!((peaks[0].t[0] - 0.3).abs() < 1e-3 && (peaks[0].t[1] - 0.7).abs() < 1e-3, "{peaks:?}");
}

#[test]
fn zero_measurements_give_zero_dual() {
    let sol = solve(&build_problem(&MeasurementMatrix::zeros(3)), &SolverOptions::default()).unwrap();
    assert_eq!(sol.objective, 0.0);
    assert!(sol.c.iter().all(|z| z.norm() == 0.0));
    assert!(sol.converged && sol.min_eigenvalue > 0.0);
}

#[test]
fn objective_is_positively_homogeneous() {
    let model = SourceModel::from_parts(
        &[[0.2, 0.25], [0.7, 0.6]],
        &[Complex64::new(1.0, 0.3), Complex64::new(-0.4, 0.9)],
    )
    .unwrap();
    let opts = SolverOptions::default();
    let a = solve(&build_problem(&forward(&model, 4).unwrap()), &opts).unwrap();
    let b = solve(&build_problem(&forward(&model.scaled(2.0), 4).unwrap()), &opts).unwrap();
    assert_eq!(b.objective, 2.0 * a.objective);
}

#[test]
fn mirrored_sources_give_mirrored_peaks() {
    let model = SourceModel::from_parts(&[[0.3, 0.5], [0.7, 0.5]], &[Complex64::new(1.0, 0.0); 2]).unwrap();
    let y = forward(&model, 4).unwrap();
    let sol = solve(&build_problem(&y), &SolverOptions::default()).unwrap();
    let peaks = find_peaks(&sol.c, 4, &PeakOptions::default()).unwrap();
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    assert!((peaks[0].t[0] + peaks[1].t[0] - 1.0).abs() < 1e-3);
    assert!((peaks[0].t[1] - peaks[1].t[1]).abs() < 1e-3);
}

#[test]
fn peak_search_is_idempotent_and_never_loses_modulus() {
    let model = single_source();
    let y = forward(&model, 4).unwrap();
    let sol = solve(&build_problem(&y), &SolverOptions::default()).unwrap();
    let opts = PeakOptions::default();
    let a = find_peaks(&sol.c, 4, &opts).unwrap();
    let b = find_peaks(&sol.c, 4, &opts).unwrap();
    assert_eq!(a, b);
    let grid = superres2d::measurement::adjoint_grid(&sol.c, 4, 16 * 9).unwrap();
    let grid_max = grid.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(a[0].modulus >= grid_max);
}

#[test]
fn perturbed_locations_leave_a_residual() {
    let model = SourceModel::from_parts(&[[0.2, 0.3], [0.65, 0.8]], &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)]).unwrap();
    let y = forward(&model, 8).unwrap();
    let off = 1e-3 / 8.0;
    let locs = [[0.2 + off, 0.3], [0.65, 0.8 - off]];
    let (d, res) = recover_amplitudes(&y, &locs).unwrap();
    assert!(res > 0.0);
    for (a, b) in d.iter().zip(model.amplitudes()) {
        assert!((a - b).norm() / b.norm() < 1e-2);
    }
}

#[test]
fn random_instance_end_to_end() {
    let mut rng = trial_rng(42, 0, 0);
    let model = random_model(&mut rng, 8, 3, 1.8, AmplitudeModel::PaperChisq).unwrap().unwrap();
    let out = recover(&model, 8, &SolverOptions::default(), &PeakOptions::default(), MATCH_RADIUS).unwrap();
    assert!(out.solution.converged);
    assert!(out.duality.relative_gap <= 1e-2, "{:?}", out.duality);
    assert!(out.score.success, "{:?}", out.score);
}
