use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::normalized_derivatives;
use super::{curvature_padding, lipschitz_padding, THEOREM_FC};
use crate::error::{param, Result};
use crate::kernel::{KernelSpec, MAX_ORDER};

/// Largest number of samples a single table may hold.
const MAX_SAMPLES: usize = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
    None,
}

impl Monotonicity {
    pub fn of(values: &[f64]) -> Self {
        let up = values.windows(2).all(|w| w[1] >= w[0]);
        let down = values.windows(2).all(|w| w[1] <= w[0]);
        match (up, down) {
            (true, _) => Self::NonDecreasing,
            (_, true) => Self::NonIncreasing,
            _ => Self::None,
        }
    }

    pub fn is_monotone(self) -> bool {
        self != Self::None
    }
}

/// Pointwise envelope of `K_γ^{(ℓ)} / f_c^ℓ` on a uniform `τ` grid.
///
/// `lower[k] ≤ K_γ^{(ℓ)}(t) / f_c^ℓ ≤ upper[k]` for every `t` with
/// `|f_c t − τ_k| ≤ ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTable {
    order: usize,
    eps: f64,
    domain: (f64, f64),
    tau: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    padding: f64,
    monotone: Monotonicity,
    theorem_scale: bool,
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return param(format!("derivative order {order} exceeds {MAX_ORDER}"));
    }
    Ok(())
}

fn grid(domain: (f64, f64), eps: f64) -> Result<Vec<f64>> {
    let (lo, hi) = domain;
    if !(eps > 0.0 && eps.is_finite()) {
        return param(format!("grid step must be positive, got {eps}"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return param(format!("empty or invalid domain [{lo}, {hi}]"));
    }
    let steps = ((hi - lo) / eps - 1e-9).ceil().max(0.0);
    if steps >= MAX_SAMPLES as f64 {
        return param(format!("domain [{lo}, {hi}] at step {eps} needs too many samples"));
    }
    let steps = steps as usize;
    Ok((0..=steps).map(|k| (lo + k as f64 * eps).min(hi)).collect())
}

/// Sampled envelope of order `ℓ` on `domain` (units of `λ_c`) at step `ε`.
pub fn envelope(spec: &KernelSpec, order: usize, domain: (f64, f64), eps: f64) -> Result<BoundTable> {
    check_order(order)?;
    let tau = grid(domain, eps)?;
    let values: Vec<f64> = tau
        .par_iter()
        .map(|&t| normalized_derivatives(spec, t)[order])
        .collect();
    let padding = lipschitz_padding(order, eps);
    Ok(BoundTable {
        order,
        eps,
        domain,
        monotone: Monotonicity::of(&values),
        lower: values.iter().map(|v| v - padding).collect(),
        upper: values.iter().map(|v| v + padding).collect(),
        tau,
        padding,
        theorem_scale: spec.f_c() >= THEOREM_FC,
    })
}

impl BoundTable {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn padding(&self) -> f64 {
        self.padding
    }

    pub fn monotone(&self) -> Monotonicity {
        self.monotone
    }

    /// Whether `f_c` is large enough for the published constants to apply.
    pub fn theorem_scale(&self) -> bool {
        self.theorem_scale
    }

    /// `B^∞ = max(|lower|, |upper|)` at sample `k`.
    pub fn abs_upper(&self, k: usize) -> f64 {
        self.lower[k].abs().max(self.upper[k].abs())
    }

    pub fn min_lower(&self) -> f64 {
        self.lower.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_upper(&self) -> f64 {
        self.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.len()).map(|k| self.abs_upper(k)).fold(0.0, f64::max)
    }
}

/// Non-increasing majorant `b_ℓ` of `|K_γ^{(ℓ)}| / f_c^ℓ` on `[0, τ_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEnvelope {
    order: usize,
    eps: f64,
    tau_max: f64,
    values: Vec<f64>,
}

/// Running maximum from the right of the padded sampled envelope.
pub fn tail_envelope(spec: &KernelSpec, order: usize, tau_max: f64, eps: f64) -> Result<TailEnvelope> {
    check_order(order)?;
    let tau = grid((0.0, tau_max), eps)?;
    let mut values: Vec<f64> = tau
        .par_iter()
        .map(|&t| normalized_derivatives(spec, t)[order].abs())
        .collect();
    for k in (0..values.len().saturating_sub(1)).rev() {
        values[k] = values[k].max(values[k + 1]);
    }
    let pad = curvature_padding(order, eps);
    values.iter_mut().for_each(|v| *v += pad);
    Ok(TailEnvelope {
        order,
        eps,
        tau_max,
        values,
    })
}

impl TailEnvelope {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    /// `b_ℓ(τ)` for `τ ∈ [0, τ_max]`.
    pub fn eval(&self, tau: f64) -> Result<f64> {
        if !(0.0..=self.tau_max).contains(&tau) {
            return param(format!("tail envelope defined on [0, {}], got {tau}", self.tau_max));
        }
        let k = ((tau / self.eps).floor() as usize).min(self.values.len() - 1);
        Ok(self.values[k])
    }
}
