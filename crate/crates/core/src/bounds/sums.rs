use serde::{Deserialize, Serialize};

use super::sweep::KernelBounds;
use super::TAU_MIN;
use crate::error::{param, Result};
use crate::kernel::{KernelSpec, MAX_ORDER};

const ORDERS: usize = MAX_ORDER + 1;

/// Sampled `H_ℓ(τ)` on `[0, τ_min]` for all four orders, with the tail
/// constants it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HTable {
    pub tau_min: f64,
    pub tau: Vec<f64>,
    pub values: Vec<[f64; ORDERS]>,
    pub c_tilde: [f64; ORDERS],
    pub tail_constants: [f64; ORDERS],
    /// Non-decreasing holds by construction (windows only grow with τ);
    /// strictness is a property of the kernel and is reported separately.
    pub non_decreasing: [bool; ORDERS],
    pub strictly_increasing: [bool; ORDERS],
}

impl HTable {
    pub fn new(kb: &KernelBounds, samples: usize) -> Result<Self> {
        if samples < 2 {
            return param("an H table needs at least two samples");
        }
        let tau: Vec<f64> = (0..samples)
            .map(|j| TAU_MIN * j as f64 / (samples - 1) as f64)
            .collect();
        let values = tau.iter().map(|&t| kb.h(t)).collect::<Result<Vec<_>>>()?;
        let check = |strict: bool| -> [bool; ORDERS] {
            std::array::from_fn(|l| {
                values
                    .windows(2)
                    .all(|w| if strict { w[1][l] > w[0][l] } else { w[1][l] >= w[0][l] })
            })
        };
        Ok(Self {
            tau_min: TAU_MIN,
            non_decreasing: check(false),
            strictly_increasing: check(true),
            values,
            tau,
            c_tilde: kb.c_tilde(),
            tail_constants: super::TAIL_CONSTANTS,
        })
    }
}

/// The ten-term combination bounding `Σ_{t_i ≠ 0} |K_2D^{(i1,i2)}(t − t_i)|`,
/// given `H(0)`, the shifted values `H_{i1}(·)`, `H_{i2}(·)` and the sup norms.
/// The line with the sup-norm cross terms appears twice in the bound and is
/// counted twice here.
pub(crate) fn z_combination(i1: usize, i2: usize, h0: &[f64; ORDERS], hu1: f64, hu2: f64, sup: &[f64; ORDERS]) -> f64 {
    hu1 * h0[i2]
        + h0[i1] * h0[i2]
        + h0[i1] * hu2
        + sup[i2] * h0[i1]
        + sup[i1] * h0[i2]
        + 2.0 * (sup[i2] * hu1 + sup[i1] * hu2)
        + hu1 * hu2
}

fn check_pair(i1: usize, i2: usize) -> Result<()> {
    if i1 > MAX_ORDER || i2 > MAX_ORDER {
        return param(format!("derivative orders ({i1}, {i2}) exceed {MAX_ORDER}"));
    }
    Ok(())
}

impl KernelBounds {
    /// `Z^{(i1,i2)}(u)` with `u = ‖t‖₂` in units of `λ_c`, `u ∈ [0, τ_min/2]`.
    /// Normalized by `f_c^{i1+i2}`.
    pub fn z(&self, i1: usize, i2: usize, u: f64) -> Result<f64> {
        check_pair(i1, i2)?;
        if !(0.0..=0.5 * TAU_MIN).contains(&u) {
            return param(format!("Z is defined for u ∈ [0, {}], got {u}", 0.5 * TAU_MIN));
        }
        let hu = self.h(u + self.eps())?;
        Ok(z_combination(i1, i2, &self.h_origin(), hu[i1], hu[i2], &self.sup_norms()))
    }

    /// All `Z^{(i1,i2)}(u)` at once, indexed `[i1][i2]`.
    pub fn z_all(&self, u: f64) -> Result<[[f64; ORDERS]; ORDERS]> {
        if !(0.0..=0.5 * TAU_MIN).contains(&u) {
            return param(format!("Z is defined for u ∈ [0, {}], got {u}", 0.5 * TAU_MIN));
        }
        let hu = self.h(u + self.eps())?;
        let (h0, sup) = (self.h_origin(), self.sup_norms());
        Ok(std::array::from_fn(|i1| {
            std::array::from_fn(|i2| z_combination(i1, i2, &h0, hu[i1], hu[i2], &sup))
        }))
    }

    /// `Z^{(i1,i2)}_∞`: the same combination with `H(τ_min / 2)` in place of
    /// the shifted values, valid for the outer annulus.
    pub fn z_inf(&self, i1: usize, i2: usize) -> Result<f64> {
        check_pair(i1, i2)?;
        let hh = self.h_half();
        Ok(z_combination(i1, i2, &self.h_origin(), hh[i1], hh[i2], &self.sup_norms()))
    }
}

/// `H_ℓ(τ)` from scratch. Builds a full sweep; reuse a [`KernelBounds`] when
/// more than one value is needed.
pub fn h_sum(spec: &KernelSpec, order: usize, tau: f64, eps: f64) -> Result<f64> {
    if order > MAX_ORDER {
        return param(format!("derivative order {order} exceeds {MAX_ORDER}"));
    }
    Ok(KernelBounds::new(spec, eps)?.h(tau)?[order])
}

/// `Z^{(i1,i2)}(u)` from scratch; see [`h_sum`] about cost.
pub fn z_bound(spec: &KernelSpec, i1: usize, i2: usize, u: f64, eps: f64) -> Result<f64> {
    check_pair(i1, i2)?;
    KernelBounds::new(spec, eps)?.z(i1, i2, u)
}
