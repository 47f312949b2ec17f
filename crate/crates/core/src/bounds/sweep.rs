use rayon::prelude::*;

use super::{curvature_padding, H_TAIL_LAST, H_WINDOWS, MIN_SUM_FC, TAIL_CONSTANTS, TAIL_TAU_MAX, TAU_MIN};
use crate::error::{param, Result};
use crate::kernel::{KernelSpec, MAX_ORDER};

const ORDERS: usize = MAX_ORDER + 1;

/// Grid points per block of precomputed maxima.
const BLOCK: usize = 512;

/// Step (units of `λ_c`) of the coarse scan beyond the tail domain.
const COARSE_STEP: f64 = 1e-2;

/// `K_γ^{(ℓ)}(τ / f_c) / f_c^ℓ` for ℓ = 0..3, via the closed-form product.
pub(crate) fn normalized_derivatives(spec: &KernelSpec, tau: f64) -> [f64; ORDERS] {
    let f_c = spec.f_c() as f64;
    let d = spec.product_derivatives(tau / f_c);
    let mut scale = 1.0;
    let mut out = [0.0; ORDERS];
    for l in 0..ORDERS {
        out[l] = d[l] / scale;
        scale *= f_c;
    }
    out
}

fn abs_max(a: [f64; ORDERS], b: [f64; ORDERS]) -> [f64; ORDERS] {
    std::array::from_fn(|l| a[l].max(b[l]))
}

/// One full sweep of `|K_γ^{(ℓ)}|` over `[0, 450]` (units of `λ_c`) at step
/// `ε`, stored as block maxima so that suprema over arbitrary windows cost
/// two partial blocks plus a scan of block maxima.
///
/// Everything that depends on the sweep (sup norms, tail constants, `H_ℓ`)
/// is derived from this structure, which is immutable after construction.
#[derive(Debug, Clone)]
pub struct KernelBounds {
    spec: KernelSpec,
    eps: f64,
    last: usize,
    block_max: Vec<[f64; ORDERS]>,
    suffix_max: Vec<[f64; ORDERS]>,
    sup_norms: [f64; ORDERS],
    k2_origin: f64,
    c_tilde: [f64; ORDERS],
    h_origin: [f64; ORDERS],
    h_half: [f64; ORDERS],
}

impl KernelBounds {
    pub fn new(spec: &KernelSpec, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1e-2) {
            return param(format!("grid step must lie in (0, 1e-2], got {eps}"));
        }
        if spec.f_c() < MIN_SUM_FC {
            return param(format!(
                "shifted-sum bounds need f_c ≥ {MIN_SUM_FC} so that the tail domain fits in one period, got {}",
                spec.f_c()
            ));
        }
        let last = (TAIL_TAU_MAX / eps).ceil() as usize;
        let n_blocks = last / BLOCK + 1;
        let block_max: Vec<[f64; ORDERS]> = (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let lo = b * BLOCK;
                let hi = (lo + BLOCK - 1).min(last);
                let mut m = [0.0f64; ORDERS];
                for k in lo..=hi {
                    let v = normalized_derivatives(spec, k as f64 * eps);
                    for l in 0..ORDERS {
                        m[l] = m[l].max(v[l].abs());
                    }
                }
                m
            })
            .collect();
        let mut suffix_max = block_max.clone();
        for b in (0..n_blocks - 1).rev() {
            suffix_max[b] = abs_max(suffix_max[b], suffix_max[b + 1]);
        }

        let mut out = Self {
            spec: spec.clone(),
            eps,
            last,
            block_max,
            suffix_max,
            sup_norms: [0.0; ORDERS],
            k2_origin: normalized_derivatives(spec, 0.0)[2].abs(),
            c_tilde: [0.0; ORDERS],
            h_origin: [0.0; ORDERS],
            h_half: [0.0; ORDERS],
        };
        out.sup_norms = out.compute_sup_norms();
        out.c_tilde = out.compute_c_tilde();
        out.h_origin = out.h(0.0)?;
        out.h_half = out.h(0.5 * TAU_MIN)?;
        Ok(out)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Right end of the swept domain.
    pub fn tau_end(&self) -> f64 {
        self.last as f64 * self.eps
    }

    /// `‖K_γ^{(ℓ)}‖_∞ / f_c^ℓ` over the whole period.
    pub fn sup_norm(&self, order: usize) -> f64 {
        self.sup_norms[order]
    }

    pub fn sup_norms(&self) -> [f64; ORDERS] {
        self.sup_norms
    }

    /// `|K_γ''(0)| / f_c²`, the exact diagonal of the second-derivative block.
    pub fn k2_origin(&self) -> f64 {
        self.k2_origin
    }

    /// Tail constants `C̃_ℓ`.
    pub fn c_tilde(&self) -> [f64; ORDERS] {
        self.c_tilde
    }

    /// `H_ℓ(0)`.
    pub fn h_origin(&self) -> [f64; ORDERS] {
        self.h_origin
    }

    /// `H_ℓ(τ_min / 2)`.
    pub fn h_half(&self) -> [f64; ORDERS] {
        self.h_half
    }

    fn eval_abs(&self, k: usize) -> [f64; ORDERS] {
        normalized_derivatives(&self.spec, k as f64 * self.eps).map(f64::abs)
    }

    fn direct_max(&self, k0: usize, k1: usize) -> [f64; ORDERS] {
        (k0..=k1).fold([0.0; ORDERS], |m, k| abs_max(m, self.eval_abs(k)))
    }

    /// Exact maximum of the samples with indices in `k0..=k1`.
    fn grid_max(&self, k0: usize, k1: usize) -> [f64; ORDERS] {
        let k1 = k1.min(self.last);
        if k0 > k1 {
            return [0.0; ORDERS];
        }
        let (b0, b1) = (k0 / BLOCK, k1 / BLOCK);
        if b0 == b1 {
            return self.direct_max(k0, k1);
        }
        let mut m = self.direct_max(k0, (b0 + 1) * BLOCK - 1);
        if k1 == self.last {
            return abs_max(m, self.suffix_max[b0 + 1]);
        }
        for bm in &self.block_max[b0 + 1..b1] {
            m = abs_max(m, *bm);
        }
        abs_max(m, self.direct_max(b1 * BLOCK, k1))
    }

    /// Certified `sup_{τ ∈ [a, b]} |K_γ^{(ℓ)}|` for every order. The sample
    /// range is widened outwards to the enclosing grid points.
    pub fn interval_sup(&self, a: f64, b: f64) -> [f64; ORDERS] {
        debug_assert!(a <= b && b <= self.tau_end() + self.eps);
        let k0 = (a.max(0.0) / self.eps).floor() as usize;
        let k1 = (b / self.eps).ceil() as usize;
        let m = self.grid_max(k0, k1);
        std::array::from_fn(|l| m[l] + curvature_padding(l, self.eps))
    }

    /// Tail envelope `b_ℓ(τ)`: certified supremum over `[τ, 450]`.
    pub fn tail(&self, tau: f64) -> [f64; ORDERS] {
        self.interval_sup(tau, self.tau_end())
    }

    /// `H_ℓ(τ)` for all four orders at once, `τ ∈ [0, τ_min]`.
    pub fn h(&self, tau: f64) -> Result<[f64; ORDERS]> {
        if !(0.0..=TAU_MIN * (1.0 + 1e-12)).contains(&tau) {
            return param(format!("H is defined for τ ∈ [0, {TAU_MIN}], got {tau}"));
        }
        let tau = tau.min(TAU_MIN);
        let mut s = self.c_tilde;
        for i in 1..=H_WINDOWS {
            let lo = i as f64 * TAU_MIN - tau;
            let hi = (i + 4) as f64 * TAU_MIN;
            let w = self.interval_sup(lo, hi);
            let b = self.tail(hi);
            for l in 0..ORDERS {
                s[l] += w[l].max(b[l]);
            }
        }
        Ok(s)
    }

    fn compute_c_tilde(&self) -> [f64; ORDERS] {
        let mut c = TAIL_CONSTANTS;
        for i in (H_WINDOWS + 1)..=H_TAIL_LAST {
            let b = self.tail((i as f64 - 0.5) * TAU_MIN);
            for l in 0..ORDERS {
                c[l] += b[l];
            }
        }
        c
    }

    fn compute_sup_norms(&self) -> [f64; ORDERS] {
        let mut m: [f64; ORDERS] = std::array::from_fn(|l| self.suffix_max[0][l] + curvature_padding(l, self.eps));
        // beyond the swept domain up to the half period, on a coarse grid
        let half = self.spec.f_c() as f64 / 2.0;
        let start = self.tau_end();
        let steps = ((half - start) / COARSE_STEP).ceil().max(0.0) as usize;
        let coarse = (0..=steps)
            .into_par_iter()
            .map(|j| normalized_derivatives(&self.spec, (start + j as f64 * COARSE_STEP).min(half)).map(f64::abs))
            .reduce(|| [0.0; ORDERS], abs_max);
        for l in 0..ORDERS {
            m[l] = m[l].max(coarse[l] + curvature_padding(l, COARSE_STEP));
        }
        // nonnegative coefficients summing to one: |K_γ| ≤ K_γ(0) = 1 exactly
        m[0] = 1.0;
        m
    }
}
