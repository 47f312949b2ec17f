use serde::{Deserialize, Serialize};

use super::chain::CoefficientChain;
use super::envelope::{envelope, Monotonicity};
use super::sweep::KernelBounds;
use super::{NEAR_RADIUS, TAU_MIN};
use crate::error::{param, Result};
use crate::kernel::KernelSpec;

/// Upper bound of `x y` over `x ∈ [a.0, a.1]`, `y ∈ [b.0, b.1]`.
pub(crate) fn product_upper(a: (f64, f64), b: (f64, f64)) -> f64 {
    [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Lower bound of `x y` over the same box.
pub(crate) fn product_lower(a: (f64, f64), b: (f64, f64)) -> f64 {
    [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Bounds on `Q` and its Hessian in the ball `‖t‖₂ ≤ r λ_c` around a support
/// point carrying sign `+1`. Derivatives of order `m` are normalized by
/// `f_c^m`.
///
/// Kernel quantities are the worst case of the 1-D envelopes over `[0, r]`.
/// When those envelopes are monotone this coincides with evaluating them on
/// the diagonal `t1 = t2 = r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearRegionReport {
    pub radius: f64,
    pub monotone: [Monotonicity; 4],
    pub k2d_min: f64,
    pub k20_max: f64,
    pub k10_abs: f64,
    pub k11_abs: f64,
    pub k21_abs: f64,
    pub k30_abs: f64,
    pub z00: f64,
    pub z01: f64,
    pub z11: f64,
    pub z20: f64,
    pub z21: f64,
    pub z12: f64,
    pub z30: f64,
    pub q20_max: f64,
    pub q11_abs: f64,
    pub q_min: f64,
    pub trace_negative: bool,
    pub det_positive: bool,
    pub q_above_minus_one: bool,
    pub certified: bool,
}

impl NearRegionReport {
    pub fn compute(kb: &KernelBounds, chain: &CoefficientChain, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 0.5 * TAU_MIN) {
            return param(format!("near radius must lie in (0, {}], got {radius}", 0.5 * TAU_MIN));
        }
        let spec = kb.spec();
        let eps = kb.eps();
        let t0 = envelope(spec, 0, (0.0, radius), eps)?;
        let t1 = envelope(spec, 1, (0.0, radius), eps)?;
        let t2 = envelope(spec, 2, (0.0, radius), eps)?;
        let t3 = envelope(spec, 3, (0.0, radius), eps)?;
        let monotone = [t0.monotone(), t1.monotone(), t2.monotone(), t3.monotone()];
        let range0 = (t0.min_lower(), t0.max_upper());
        let range2 = (t2.min_lower(), t2.max_upper());

        let k2d_min = product_lower(range0, range0);
        let k20_max = product_upper(range2, range0);
        let k10_abs = t1.max_abs();
        let k11_abs = k10_abs * k10_abs;
        let k21_abs = kb.sup_norm(2) * k10_abs;
        let k30_abs = t3.max_abs();

        let z = kb.z_all(radius)?;
        let (alpha, beta, alpha1) = (chain.alpha_inf, chain.beta_inf, chain.alpha1_lower);
        // α_1 ≥ alpha1 > 0 multiplies a quantity of known sign
        let lead20 = if k20_max < 0.0 { alpha1 } else { alpha };
        let lead00 = if k2d_min > 0.0 { alpha1 } else { alpha };

        let q20_max = lead20 * k20_max + alpha * z[2][0] + beta * (k30_abs + z[3][0] + k21_abs + z[2][1]);
        let q11_abs = alpha * (k11_abs + z[1][1]) + beta * (2.0 * k21_abs + z[2][1] + z[1][2]);
        let q_min = lead00 * k2d_min - alpha * z[0][0] - beta * (2.0 * k10_abs + 2.0 * z[0][1]);

        let trace_negative = q20_max < 0.0;
        let det_positive = trace_negative && q20_max * q20_max - q11_abs * q11_abs > 0.0;
        let q_above_minus_one = q_min > -1.0;
        Ok(Self {
            radius,
            monotone,
            k2d_min,
            k20_max,
            k10_abs,
            k11_abs,
            k21_abs,
            k30_abs,
            z00: z[0][0],
            z01: z[0][1],
            z11: z[1][1],
            z20: z[2][0],
            z21: z[2][1],
            z12: z[1][2],
            z30: z[3][0],
            q20_max,
            q11_abs,
            q_min,
            trace_negative,
            det_positive,
            q_above_minus_one,
            certified: chain.valid && trace_negative && det_positive && q_above_minus_one,
        })
    }
}

/// One sub-interval of the mid band `[r, τ_min/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidBandPoint {
    pub u_lo: f64,
    pub u_hi: f64,
    pub bound: f64,
}

/// Bounds on `|Q|` away from the support point.
///
/// The mid band `r ≤ ‖t‖₂ ≤ τ_min/2` is split into intervals; on each, the
/// kernel terms use their certified supremum and the sums use `Z` at the
/// right end (`H` is non-decreasing). The outer annulus
/// `τ_min/2 ≤ ‖t‖₂ < τ_min` uses the kernel supremum over `[τ_min/2, τ_min]`
/// and the constants `Z_∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarRegionReport {
    pub mid_band: Vec<MidBandPoint>,
    pub mid_band_max: f64,
    pub mid_band_certified: bool,
    /// Largest radius whose interval bound is not below one.
    pub mid_band_offending_radius: Option<f64>,
    /// First radius from which every interval bound is below one.
    pub mid_band_clear_from: Option<f64>,
    pub k2d_far_max: f64,
    pub k01_far_max: f64,
    pub z00_inf: f64,
    pub z10_inf: f64,
    pub far_max_q: f64,
    pub far_certified: bool,
    pub certified: bool,
}

impl FarRegionReport {
    pub fn compute(kb: &KernelBounds, chain: &CoefficientChain, radius: f64, intervals: usize) -> Result<Self> {
        let half = 0.5 * TAU_MIN;
        if !(radius > 0.0 && radius < half) {
            return param(format!("near radius must lie in (0, {half}), got {radius}"));
        }
        if intervals == 0 {
            return param("the mid band needs at least one interval");
        }
        let (alpha, beta) = (chain.alpha_inf, chain.beta_inf);
        let mid_band = (0..intervals)
            .map(|j| {
                let u_lo = radius + (half - radius) * j as f64 / intervals as f64;
                let u_hi = radius + (half - radius) * (j + 1) as f64 / intervals as f64;
                let k = kb.interval_sup(u_lo, u_hi);
                let z = kb.z_all(u_hi)?;
                let bound = alpha * (k[0] + z[0][0]) + beta * (2.0 * k[1] + 2.0 * z[1][0]);
                Ok(MidBandPoint { u_lo, u_hi, bound })
            })
            .collect::<Result<Vec<_>>>()?;
        let mid_band_max = mid_band.iter().map(|p| p.bound).fold(f64::NEG_INFINITY, f64::max);
        let last_bad = mid_band.iter().rposition(|p| !(p.bound < 1.0));
        let mid_band_offending_radius = last_bad.map(|j| mid_band[j].u_hi);
        let mid_band_clear_from = match last_bad {
            None => Some(radius),
            Some(j) if j + 1 < mid_band.len() => Some(mid_band[j + 1].u_lo),
            Some(_) => None,
        };

        let far = kb.interval_sup(half, TAU_MIN);
        let tail = kb.tail(TAU_MIN);
        let k2d_far_max = far[0].max(tail[0]);
        let k01_far_max = far[1].max(tail[1]);
        let z00_inf = kb.z_inf(0, 0)?;
        let z10_inf = kb.z_inf(1, 0)?;
        let far_max_q = alpha * (k2d_far_max + z00_inf) + beta * (2.0 * k01_far_max + 2.0 * z10_inf);

        let mid_band_certified = chain.valid && mid_band_max < 1.0;
        let far_certified = chain.valid && far_max_q < 1.0;
        Ok(Self {
            mid_band,
            mid_band_max,
            mid_band_certified,
            mid_band_offending_radius,
            mid_band_clear_from,
            k2d_far_max,
            k01_far_max,
            z00_inf,
            z10_inf,
            far_max_q,
            far_certified,
            certified: mid_band_certified && far_certified,
        })
    }
}

/// Near-region check from scratch at grid step `eps`.
pub fn near_region_certify(spec: &KernelSpec, eps: f64) -> Result<NearRegionReport> {
    let kb = KernelBounds::new(spec, eps)?;
    let chain = CoefficientChain::from_bounds(&kb);
    NearRegionReport::compute(&kb, &chain, NEAR_RADIUS)
}

/// Far-region check from scratch at grid step `eps`.
pub fn far_region_certify(spec: &KernelSpec, eps: f64, intervals: usize) -> Result<FarRegionReport> {
    let kb = KernelBounds::new(spec, eps)?;
    let chain = CoefficientChain::from_bounds(&kb);
    FarRegionReport::compute(&kb, &chain, NEAR_RADIUS, intervals)
}
