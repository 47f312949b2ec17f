use std::sync::OnceLock;

use proptest::prelude::*;
use superres2d::bounds::{
    envelope, lipschitz_padding, run_bounds, tail_envelope, BoundsConfig, BoundsReport, CoefficientChain,
    FarRegionReport, HTable, KernelBounds, Monotonicity, NearRegionReport, FAST_EPS, NEAR_RADIUS, TAU_MIN,
};
use superres2d::kernel::KernelSpec;

const F_C: usize = 2000;

fn spec() -> &'static KernelSpec {
    static SPEC: OnceLock<KernelSpec> = OnceLock::new();
    SPEC.get_or_init(|| KernelSpec::new(F_C).unwrap())
}

fn bounds() -> &'static KernelBounds {
    static KB: OnceLock<KernelBounds> = OnceLock::new();
    KB.get_or_init(|| KernelBounds::new(spec(), FAST_EPS).unwrap())
}

/// Normalized derivatives by direct Fourier summation, independent of the
/// closed-form product used inside the bounds.
fn summed(tau: f64) -> [f64; 4] {
    let d = spec().derivatives(tau / F_C as f64);
    let f = F_C as f64;
    [d[0], d[1] / f, d[2] / (f * f), d[3] / (f * f * f)]
}

/// Normalized closed-form derivatives (fast; used for large brute-force sums).
fn closed(tau: f64) -> [f64; 4] {
    let d = spec().product_derivatives(tau / F_C as f64);
    let f = F_C as f64;
    [d[0], d[1] / f, d[2] / (f * f), d[3] / (f * f * f)]
}

#[test]
fn envelope_at_origin_brackets_one() {
    let eps = 1e-4;
    let t = envelope(spec(), 0, (0.0, 0.01), eps).unwrap();
    assert!(t.upper()[0] >= 1.0 && t.lower()[0] <= 1.0);
    assert!(t.upper()[0] - t.lower()[0] <= 2.0 * 2.0 * std::f64::consts::PI * eps * (1.0 + 1e-12));
    assert_eq!(t.padding(), lipschitz_padding(0, eps));
    assert!(t.theorem_scale());
}

#[test]
fn near_radius_tables_are_monotone() {
    let t1 = envelope(spec(), 1, (0.0, NEAR_RADIUS), 1e-5).unwrap();
    assert_eq!(t1.monotone(), Monotonicity::NonIncreasing);
    let t0 = envelope(spec(), 0, (0.0, NEAR_RADIUS), 1e-5).unwrap();
    assert_eq!(t0.monotone(), Monotonicity::NonIncreasing);
    let t2 = envelope(spec(), 2, (0.0, NEAR_RADIUS), 1e-5).unwrap();
    assert_eq!(t2.monotone(), Monotonicity::NonDecreasing);
}

#[test]
fn second_order_envelope_brackets_finite_difference() {
    let eps = 1e-4;
    let t = envelope(spec(), 2, (0.0, 0.0), eps).unwrap();
    // central difference of the summed kernel, step well inside the padding
    let h = 1e-3;
    let fd = (summed(h)[0] - 2.0 * summed(0.0)[0] + summed(-h)[0]) / (h * h);
    assert!(t.lower()[0] <= fd && fd <= t.upper()[0], "{} ≤ {fd} ≤ {}", t.lower()[0], t.upper()[0]);
}

#[test]
fn envelopes_hold_on_a_finer_verification_grid() {
    let eps = 1e-3;
    for order in 0..4 {
        let t = envelope(spec(), order, (0.0, 2.0), eps).unwrap();
        for j in 0..=20_000 {
            let tau = j as f64 * 1e-4;
            let k = (tau / eps).round() as usize;
            let v = summed(tau)[order];
            let slack = 1e-9 * (2.0 * std::f64::consts::PI).powi(order as i32);
            assert!(
                t.lower()[k] - slack <= v && v <= t.upper()[k] + slack,
                "order {order} at τ={tau}: {v} not in [{}, {}]",
                t.lower()[k],
                t.upper()[k]
            );
        }
    }
}

#[test]
fn tail_envelope_is_a_decreasing_majorant() {
    let eps = 1e-3;
    for order in 0..4 {
        let b = tail_envelope(spec(), order, 450.0, eps).unwrap();
        assert!(b.samples().windows(2).all(|w| w[1] <= w[0]));
        assert!(b.eval(0.0).unwrap() >= closed(0.0)[order].abs());
        let start = 20.0 * TAU_MIN;
        let fine_max = (0..=((450.0 - start) / 1e-4) as usize)
            .map(|j| closed(start + j as f64 * 1e-4)[order].abs())
            .fold(0.0, f64::max);
        assert!(b.eval(start).unwrap() >= fine_max, "order {order}");
        assert!(bounds().tail(start)[order] >= fine_max, "sweep tail, order {order}");
    }
    assert!(tail_envelope(spec(), 0, 450.0, eps).unwrap().eval(451.0).is_err());
}

#[test]
fn sup_norms_dominate_samples_and_match_origin() {
    let kb = bounds();
    assert_eq!(kb.sup_norm(0), 1.0);
    for j in 0..2000 {
        let v = summed(j as f64 * 1e-3);
        for l in 1..4 {
            assert!(v[l].abs() <= kb.sup_norm(l));
        }
    }
    // the second derivative peaks at the origin
    assert!((kb.sup_norm(2) - kb.k2_origin()).abs() < 1e-3 * kb.k2_origin());
    assert!((kb.k2_origin() - summed(0.0)[2].abs()).abs() < 1e-9 * kb.k2_origin());
}

/// Σ_{τ_i > 0} |K^{(ℓ)}(τ − τ_i)| over the densest equispaced support with
/// spacing at least τ_min, one side of the origin up to the half period
/// (`H` bounds one side; the two-sided sum is at most `2H`).
fn lattice_sum(order: usize, tau: f64) -> f64 {
    let m = (F_C as f64 / TAU_MIN).floor() as usize;
    let step = F_C as f64 / m as f64;
    (1..=m / 2).map(|i| closed(tau - i as f64 * step)[order].abs()).sum()
}

#[test]
fn h_dominates_brute_force_lattice_sums() {
    let kb = bounds();
    for tau in [0.0, 0.3, 0.5 * TAU_MIN] {
        let h = kb.h(tau).unwrap();
        for order in 0..4 {
            let s = lattice_sum(order, tau);
            assert!(s <= h[order], "order {order}, τ={tau}: lattice {s} > H {}", h[order]);
        }
    }
}

#[test]
fn h_published_constant_and_monotonicity() {
    let kb = bounds();
    let h0 = kb.h_origin()[0];
    assert!(4.0 * h0 + 4.0 * h0 * h0 <= 3.17e-2 * 1.10);
    let table = HTable::new(kb, 29).unwrap();
    assert_eq!(table.non_decreasing, [true; 4]);
    assert_eq!(table.strictly_increasing, [true; 4]);
    assert!(kb.h(TAU_MIN + 0.1).is_err());
    assert!(kb.h(-0.1).is_err());
}

#[test]
fn z_dominates_two_dimensional_lattice_sums() {
    let kb = bounds();
    let m = (F_C as f64 / TAU_MIN).floor() as usize;
    let step = F_C as f64 / m as f64;
    let full = |order: usize, x: f64| -> f64 { (0..m).map(|i| closed(x - i as f64 * step)[order].abs()).sum() };
    let u = 0.5 * TAU_MIN;
    for (i1, i2) in [(0, 0), (1, 0), (1, 1)] {
        let z = kb.z(i1, i2, u).unwrap();
        for dir in [[1.0, 0.0], [std::f64::consts::FRAC_1_SQRT_2; 2], [0.6, 0.8]] {
            let (x, y) = (u * dir[0], u * dir[1]);
            let lattice = full(i1, x) * full(i2, y) - (closed(x)[i1] * closed(y)[i2]).abs();
            assert!(lattice <= z, "Z{i1}{i2} at {dir:?}: {lattice} > {z}");
        }
    }
}

#[test]
fn z_is_nonnegative_and_increasing() {
    let kb = bounds();
    let mut prev = 0.0;
    for j in 0..=12 {
        let u = 0.5 * TAU_MIN * j as f64 / 12.0;
        let z = kb.z(0, 0, u).unwrap();
        assert!(z >= prev);
        prev = z;
        assert!(kb.z_all(u).unwrap().iter().flatten().all(|&v| v >= 0.0));
    }
    assert!(kb.z(4, 0, 0.1).is_err());
    assert!(kb.z(0, 0, TAU_MIN).is_err());
}

#[test]
fn chain_is_internally_consistent() {
    let c = CoefficientChain::from_bounds(bounds());
    assert!(c.valid);
    assert!((c.s3_inv - 1.0 / (1.0 - c.i_minus_s3)).abs() <= 1e-15);
    assert!((c.alpha1_lower - (1.0 - c.s3_inv * c.i_minus_s3)).abs() <= 1e-15);
    assert!((c.beta_inf - c.s1_inv * c.s2 * c.s3_inv).abs() <= 1e-15);
    assert!(c.alpha_inf <= 1.037 * 1.10 && c.beta_inf <= 0.024 * 1.10 && c.alpha1_lower >= 1.0 - 0.037 * 1.10);
}

#[test]
fn near_and_far_regions_in_fast_mode() {
    let kb = bounds();
    let chain = CoefficientChain::from_bounds(kb);
    let near = NearRegionReport::compute(kb, &chain, NEAR_RADIUS).unwrap();
    assert!(near.certified);
    assert!(near.k2d_min >= 0.8 * 0.9);
    assert!(near.q20_max <= -1.4809 * 0.9);
    assert!(near.q11_abs <= 1.4743 * 1.1);
    assert!(near.q_min >= 0.393 * 0.9);
    let far = FarRegionReport::compute(kb, &chain, NEAR_RADIUS, 64).unwrap();
    assert!(far.far_certified && far.far_max_q <= 0.9866 * 1.1);
    // first mid-band interval sits next to the near region
    assert_eq!(far.mid_band[0].u_lo, NEAR_RADIUS);
    assert_eq!(far.mid_band.len(), 64);
    assert!(NearRegionReport::compute(kb, &chain, 0.0).is_err());
}

#[test]
fn small_cutoff_is_rejected_for_sums() {
    let small = KernelSpec::new(200).unwrap();
    assert!(KernelBounds::new(&small, 1e-3).is_err());
}

#[test]
fn fast_run_reproduces_constants_and_writes_files() {
    let run = run_bounds(spec(), &BoundsConfig::fast()).unwrap();
    let r = &run.report;
    assert!(r.reproduces_published, "{:#?}", r.constants.iter().filter(|c| !c.within_slack).collect::<Vec<_>>());
    assert!(r.near_monotone && r.chain.valid && r.near.certified && r.far.far_certified);
    assert_eq!(r.certified, r.far.mid_band_certified);

    let dir = tempfile::tempdir().unwrap();
    run.write_to(dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("bounds_report.json")).unwrap();
    let back: BoundsReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.constants.len(), r.constants.len());
    for (name, _) in &run.curves {
        let body = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let header = body.lines().next().unwrap();
        assert!(header.contains("lambda_c"), "{name}: {header}");
        let cols = header.split(',').count();
        assert!(body.lines().skip(1).all(|l| l.split(',').count() == cols), "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pointwise_envelope_contains_summed_kernel(tau in 0.0..3.0f64, order in 0usize..4) {
        let eps = 1e-4;
        let t = envelope(spec(), order, (tau, tau), eps).unwrap();
        // any point within ε of the sample is covered
        for off in [-eps, 0.0, 0.5 * eps, eps] {
            let v = summed(tau + off)[order];
            prop_assert!(t.lower()[0] - 1e-9 <= v && v <= t.upper()[0] + 1e-9);
        }
    }

    #[test]
    fn interval_sup_dominates_samples(a in 0.0..40.0f64, w in 0.0..2.0f64) {
        let kb = bounds();
        let s = kb.interval_sup(a, a + w);
        for j in 0..=16 {
            let v = closed(a + w * j as f64 / 16.0);
            for l in 0..4 {
                prop_assert!(v[l].abs() <= s[l]);
            }
        }
    }
}
