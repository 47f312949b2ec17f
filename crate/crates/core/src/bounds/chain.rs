use serde::{Deserialize, Serialize};

use super::sweep::KernelBounds;
use crate::error::Result;
use crate::kernel::KernelSpec;

/// Norm bounds for the blocks of the interpolation system and for the
/// resulting coefficient vectors.
///
/// Values are normalized: a block that scales like `f_c^m` is divided by
/// `f_c^m` (so `β` is reported in units of `λ_c`). `E20` stands for the
/// off-diagonal part `‖ |K''(0)| I − E20 ‖`, i.e. everything except the
/// exact diagonal.
///
/// Every inverse is bounded through the Neumann series
/// `‖M⁻¹‖ ≤ 1 / (1 − ‖I − M‖)`; a non-positive denominator marks the chain
/// as broken and every later entry as `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientChain {
    pub k2_origin: f64,
    pub i_minus_e00: f64,
    pub e10: f64,
    pub e11: f64,
    pub e20_offdiag: f64,
    pub e02_inv: f64,
    pub s1_offdiag: f64,
    pub s1_inv: f64,
    pub s2: f64,
    pub i_minus_s3: f64,
    pub s3_inv: f64,
    pub alpha_inf: f64,
    pub beta_inf: f64,
    pub alpha1_lower: f64,
    pub valid: bool,
    pub failure: Option<String>,
}

fn neumann(diag: f64, offdiag: f64) -> Option<f64> {
    let d = diag - offdiag;
    (d > 0.0).then(|| 1.0 / d)
}

impl CoefficientChain {
    pub fn from_bounds(kb: &KernelBounds) -> Self {
        let h = kb.h_origin();
        let sup = kb.sup_norms();
        let k2 = kb.k2_origin();

        let i_minus_e00 = 4.0 * h[0] + 4.0 * h[0] * h[0];
        let e10 = 2.0 * h[1] + 2.0 * sup[1] * h[0] + 4.0 * h[1] * h[0];
        let e11 = 4.0 * sup[1] * h[1] + 4.0 * h[1] * h[1];
        let e20_offdiag = 2.0 * h[2] + 2.0 * sup[2] * h[0] + 4.0 * h[2] * h[0];

        let mut c = Self {
            k2_origin: k2,
            i_minus_e00,
            e10,
            e11,
            e20_offdiag,
            e02_inv: f64::NAN,
            s1_offdiag: f64::NAN,
            s1_inv: f64::NAN,
            s2: f64::NAN,
            i_minus_s3: f64::NAN,
            s3_inv: f64::NAN,
            alpha_inf: f64::NAN,
            beta_inf: f64::NAN,
            alpha1_lower: f64::NAN,
            valid: false,
            failure: None,
        };

        let Some(e02_inv) = neumann(k2, e20_offdiag) else {
            c.failure = Some("second-derivative block is not diagonally dominant".into());
            return c;
        };
        c.e02_inv = e02_inv;
        c.s1_offdiag = e20_offdiag + e11 * e11 * e02_inv;
        let Some(s1_inv) = neumann(k2, c.s1_offdiag) else {
            c.failure = Some("first Schur complement is not diagonally dominant".into());
            return c;
        };
        c.s1_inv = s1_inv;
        c.s2 = e10 + e11 * e02_inv * e10;
        c.i_minus_s3 = i_minus_e00 + c.s2 * c.s2 * s1_inv + e10 * e10 * e02_inv;
        let Some(s3_inv) = neumann(1.0, c.i_minus_s3) else {
            c.failure = Some("final Schur complement is not diagonally dominant".into());
            return c;
        };
        c.s3_inv = s3_inv;
        c.alpha_inf = s3_inv;
        c.beta_inf = s1_inv * c.s2 * s3_inv;
        c.alpha1_lower = 1.0 - s3_inv * c.i_minus_s3;
        c.valid = c.alpha1_lower > 0.0;
        if !c.valid {
            c.failure = Some("lower bound on the leading coefficient is not positive".into());
        }
        c
    }
}

/// Chain from scratch at grid step `eps`.
pub fn coefficient_norm_chain(spec: &KernelSpec, eps: f64) -> Result<CoefficientChain> {
    Ok(CoefficientChain::from_bounds(&KernelBounds::new(spec, eps)?))
}
