//! Certified numerical bounds on the kernel and on everything derived from it.
//!
//! All quantities here are in normalized units: positions are `τ = f_c t`
//! and an ℓ-th derivative is divided by `f_c^ℓ`. In these units the kernel
//! derivatives are `O(1)` independently of `f_c`.
//!
//! Two kinds of padding turn finitely many samples into bounds:
//!
//! * pointwise envelopes ([`BoundTable`]) add `(2π)^{ℓ+1} ε`, the first-order
//!   slack that covers every `t` with `|f_c t − τ_k| ≤ ε`;
//! * suprema over intervals (windows, tails, sup norms) add
//!   `(2π)^{ℓ+2} ε² / 8`, the interpolation error between two consecutive
//!   samples given the global bound `(2π)^{m}` on the normalized `m`-th
//!   derivative.

mod chain;
mod envelope;
mod regions;
mod report;
mod sums;
mod sweep;

pub use chain::{coefficient_norm_chain, CoefficientChain};
pub use envelope::{envelope, tail_envelope, BoundTable, Monotonicity, TailEnvelope};
pub use regions::{far_region_certify, near_region_certify, FarRegionReport, MidBandPoint, NearRegionReport};
pub use report::{run_bounds, BoundsReport, BoundsRun, Constant, Relation};
pub use sums::{h_sum, z_bound, HTable};
pub use sweep::KernelBounds;

use std::f64::consts::PI;

/// Minimum separation in units of `λ_c`.
pub const TAU_MIN: f64 = 1.68;

/// Radius (units of `λ_c`) of the ball where the Hessian test is run.
pub const NEAR_RADIUS: f64 = 0.212568;

/// End of the domain on which tail envelopes are built, units of `λ_c`.
pub const TAIL_TAU_MAX: f64 = 450.0;

/// Constants bounding the remainder of the shifted sums beyond the last tail
/// term, one per derivative order.
pub const TAIL_CONSTANTS: [f64; 4] = [7.89e-7, 4.96e-6, 3.12e-5, 1.96e-4];

/// Number of explicit windows in `H_ℓ`.
pub const H_WINDOWS: usize = 20;

/// Index of the last tail term in `C̃_ℓ`.
pub const H_TAIL_LAST: usize = 267;

/// Smallest cut-off frequency whose period contains the full tail domain.
pub const MIN_SUM_FC: usize = 900;

/// Cut-off from which the published constants are claimed.
pub const THEOREM_FC: usize = 1000;

/// Grid step used for theorem-faithful runs.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Grid step used by the fast mode.
pub const FAST_EPS: f64 = 1e-4;

/// First-order padding `(2π)^{ℓ+1} ε` (normalized units).
pub fn lipschitz_padding(order: usize, eps: f64) -> f64 {
    (2.0 * PI).powi(order as i32 + 1) * eps
}

/// Second-order padding `(2π)^{ℓ+2} h² / 8` for the supremum between samples
/// spaced `h` apart (normalized units).
pub fn curvature_padding(order: usize, h: f64) -> f64 {
    (2.0 * PI).powi(order as i32 + 2) * h * h / 8.0
}

/// Grid and tolerance settings for a bounds run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundsConfig {
    /// Grid step in units of `λ_c`.
    pub eps: f64,
    /// Multiplicative slack allowed when comparing against published constants.
    pub slack: f64,
    /// Number of sub-intervals used to certify the mid band.
    pub mid_band_intervals: usize,
    /// Number of samples written per figure curve.
    pub curve_samples: usize,
}

impl BoundsConfig {
    pub fn full() -> Self {
        Self {
            eps: DEFAULT_EPS,
            slack: 1.05,
            mid_band_intervals: 512,
            curve_samples: 401,
        }
    }

    pub fn fast() -> Self {
        Self {
            eps: FAST_EPS,
            slack: 1.10,
            mid_band_intervals: 256,
            curve_samples: 201,
        }
    }
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self::full()
    }
}
