//! The triple-Dirichlet interpolation kernel.
//!
//! `K_γ(t) = Π_i D(f_i, t)` is the product of three normalized Dirichlet kernels
//! with integer cut-offs `f_1 + f_2 + f_3 ≤ f_c`, so it is a trigonometric
//! polynomial of degree at most `f_c` whose Fourier coefficients are the
//! convolution of three boxcars. The 2-D kernel is the tensor product
//! `K_2D(t) = K_γ(t_1) K_γ(t_2)`.
//!
//! Two evaluation routes are provided. [`KernelSpec::derivatives`] sums the
//! Fourier series directly and is the reference path used by the public
//! evaluators. [`KernelSpec::product_derivatives`] multiplies closed-form
//! Dirichlet factors (Leibniz rule) in O(1) per point and backs the long grid
//! sweeps of the bounds engine; the two routes are cross-checked in tests.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Bandwidth fractions of the three Dirichlet factors.
pub const DEFAULT_GAMMA: [f64; 3] = [0.247, 0.339, 0.414];

/// Highest derivative order supported by the 1-D evaluators.
pub const MAX_ORDER: usize = 3;

const SERIES_TERMS: usize = 16;
/// Below this value of `2π f |t|` the Taylor series is used instead of the
/// sine ratio, whose derivative recurrences cancel catastrophically near 0.
const SERIES_SWITCH: f64 = 0.5;

/// Wrap `t` onto `[-1/2, 1/2]`.
pub fn wrap_half(t: f64) -> f64 {
    t - t.round()
}

/// Normalized Dirichlet kernel `D(f, t) = (2f+1)^{-1} Σ_{|k|≤f} e^{j2πkt}`
/// with value and first three derivatives available in closed form.
#[derive(Debug, Clone)]
pub struct Dirichlet {
    f: usize,
    width: f64,
    /// Taylor coefficients of `D` in powers of `t^2`.
    series: [f64; SERIES_TERMS],
}

impl Dirichlet {
    pub fn new(f: usize) -> Result<Self> {
        if f < 1 {
            return param("Dirichlet cut-off must be at least 1");
        }
        let width = (2 * f + 1) as f64;
        let mut series = [0.0; SERIES_TERMS];
        // power sums P_{2m} = Σ_{|k|≤f} k^{2m}
        let mut power_sums = [0.0; SERIES_TERMS];
        power_sums[0] = width;
        for k in 1..=f {
            let k2 = (k * k) as f64;
            let mut p = 1.0;
            for s in power_sums.iter_mut().skip(1) {
                p *= k2;
                *s += 2.0 * p;
            }
        }
        let mut scale = 1.0; // (2π)^{2m} / (2m)!
        for (m, s) in series.iter_mut().enumerate() {
            if m > 0 {
                let two_m = (2 * m) as f64;
                scale *= (2.0 * PI) * (2.0 * PI) / (two_m * (two_m - 1.0));
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            *s = sign * scale * power_sums[m] / width;
        }
        Ok(Self { f, width, series })
    }

    pub fn cutoff(&self) -> usize {
        self.f
    }

    /// Value and derivatives of orders 1..=3 at `t`.
    pub fn derivatives(&self, t: f64) -> [f64; 4] {
        let t = wrap_half(t);
        if 2.0 * PI * self.f as f64 * t.abs() < SERIES_SWITCH {
            self.series_derivatives(t)
        } else {
            self.ratio_derivatives(t)
        }
    }

    fn series_derivatives(&self, t: f64) -> [f64; 4] {
        let mut pow = [0.0; 2 * SERIES_TERMS];
        pow[0] = 1.0;
        for j in 1..pow.len() {
            pow[j] = pow[j - 1] * t;
        }
        let mut out = [0.0; 4];
        for (m, &s) in self.series.iter().enumerate() {
            let p = 2 * m;
            // d^l/dt^l t^p = p!/(p-l)! t^{p-l}
            let mut weight = 1.0;
            for (l, o) in out.iter_mut().enumerate() {
                if l > p {
                    break;
                }
                if l > 0 {
                    weight *= (p - l + 1) as f64;
                }
                *o += s * weight * pow[p - l];
            }
        }
        out
    }

    fn ratio_derivatives(&self, t: f64) -> [f64; 4] {
        let a = self.width;
        let (sa, ca) = (a * PI * t).sin_cos();
        let (s1, c1) = (PI * t).sin_cos();
        let num = [
            sa,
            a * PI * ca,
            -(a * PI).powi(2) * sa,
            -(a * PI).powi(3) * ca,
        ];
        let den = [
            a * s1,
            a * PI * c1,
            -a * PI * PI * s1,
            -a * PI.powi(3) * c1,
        ];
        let q0 = num[0] / den[0];
        let q1 = (num[1] - q0 * den[1]) / den[0];
        let q2 = (num[2] - 2.0 * q1 * den[1] - q0 * den[2]) / den[0];
        let q3 = (num[3] - 3.0 * q2 * den[1] - 3.0 * q1 * den[2] - q0 * den[3]) / den[0];
        [q0, q1, q2, q3]
    }
}

/// Order-th derivative of the normalized Dirichlet kernel with cut-off `f`.
pub fn dirichlet_eval(f: usize, t: f64, order: usize) -> Result<f64> {
    check_order(order)?;
    Ok(Dirichlet::new(f)?.derivatives(t)[order])
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return param(format!("derivative order {order} exceeds {MAX_ORDER}"));
    }
    Ok(())
}

/// Parameters of the triple-Dirichlet kernel and its Fourier coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRecord", into = "KernelSpecRecord")]
pub struct KernelSpec {
    f_c: usize,
    gamma: [f64; 3],
    sub_cutoffs: [usize; 3],
    /// `c_k` for `k = -f_c..=f_c`.
    coeffs: Vec<f64>,
    factors: [Dirichlet; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelSpecRecord {
    f_c: usize,
    gamma: [f64; 3],
    sub_cutoffs: [usize; 3],
}

impl TryFrom<KernelSpecRecord> for KernelSpec {
    type Error = Error;

    fn try_from(r: KernelSpecRecord) -> Result<Self> {
        KernelSpec::with_sub_cutoffs(r.f_c, r.gamma, r.sub_cutoffs)
    }
}

impl From<KernelSpec> for KernelSpecRecord {
    fn from(s: KernelSpec) -> Self {
        Self {
            f_c: s.f_c,
            gamma: s.gamma,
            sub_cutoffs: s.sub_cutoffs,
        }
    }
}

/// Round `γ_i f_c` to integers, then decrement the largest cut-off until the
/// product kernel stays band-limited to `[-f_c, f_c]`.
pub fn round_sub_cutoffs(f_c: usize, gamma: [f64; 3]) -> Result<[usize; 3]> {
    validate_gamma(gamma)?;
    let mut cut = gamma.map(|g| (g * f_c as f64).round() as usize);
    while cut.iter().sum::<usize>() > f_c {
        let (imax, _) = cut
            .iter()
            .enumerate()
            .max_by_key(|&(i, c)| (*c, std::cmp::Reverse(i)))
            .expect("three cut-offs");
        cut[imax] -= 1;
    }
    if cut.iter().any(|&c| c < 1) {
        return Err(Error::Construction(format!(
            "f_c = {f_c} is too small for three nonzero sub-cut-offs (got {cut:?})"
        )));
    }
    Ok(cut)
}

fn validate_gamma(gamma: [f64; 3]) -> Result<()> {
    if gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return param(format!("bandwidth fractions must be positive, got {gamma:?}"));
    }
    if gamma.iter().sum::<f64>() > 1.0 + 1e-9 {
        return param(format!("bandwidth fractions sum above 1: {gamma:?}"));
    }
    Ok(())
}

/// Build the kernel for cut-off `f_c` with the default rounding policy.
pub fn build_spec(f_c: usize, gamma: [f64; 3]) -> Result<KernelSpec> {
    let cut = round_sub_cutoffs(f_c, gamma)?;
    KernelSpec::with_sub_cutoffs(f_c, gamma, cut)
}

impl KernelSpec {
    /// Kernel with the default bandwidth fractions.
    pub fn new(f_c: usize) -> Result<Self> {
        build_spec(f_c, DEFAULT_GAMMA)
    }

    /// Kernel with explicitly chosen integer sub-cut-offs.
    pub fn with_sub_cutoffs(f_c: usize, gamma: [f64; 3], sub_cutoffs: [usize; 3]) -> Result<Self> {
        validate_gamma(gamma)?;
        if sub_cutoffs.iter().any(|&c| c < 1) {
            return Err(Error::Construction("sub-cut-offs must be at least 1".into()));
        }
        if sub_cutoffs.iter().sum::<usize>() > f_c {
            return Err(Error::Construction(format!(
                "sub-cut-offs {sub_cutoffs:?} exceed the band limit f_c = {f_c}"
            )));
        }
        let mut coeffs = vec![1.0];
        for &f in &sub_cutoffs {
            let boxcar = vec![1.0 / (2 * f + 1) as f64; 2 * f + 1];
            coeffs = convolve(&coeffs, &boxcar);
        }
        let pad = f_c - (coeffs.len() - 1) / 2;
        let mut padded = vec![0.0; pad];
        padded.extend_from_slice(&coeffs);
        padded.resize(2 * f_c + 1, 0.0);
        let n = padded.len();
        for k in 0..f_c {
            let avg = 0.5 * (padded[k] + padded[n - 1 - k]);
            padded[k] = avg;
            padded[n - 1 - k] = avg;
        }
        let factors = [
            Dirichlet::new(sub_cutoffs[0])?,
            Dirichlet::new(sub_cutoffs[1])?,
            Dirichlet::new(sub_cutoffs[2])?,
        ];
        Ok(Self {
            f_c,
            gamma,
            sub_cutoffs,
            coeffs: padded,
            factors,
        })
    }

    pub fn f_c(&self) -> usize {
        self.f_c
    }

    pub fn lambda_c(&self) -> f64 {
        1.0 / self.f_c as f64
    }

    pub fn gamma(&self) -> [f64; 3] {
        self.gamma
    }

    pub fn sub_cutoffs(&self) -> [usize; 3] {
        self.sub_cutoffs
    }

    /// Number of Fourier indices per axis, `2 f_c + 1`.
    pub fn n(&self) -> usize {
        2 * self.f_c + 1
    }

    /// Fourier coefficients indexed `k = -f_c..=f_c`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient `c_k`; zero outside the band.
    pub fn coeff(&self, k: i64) -> f64 {
        let idx = k + self.f_c as i64;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            0.0
        } else {
            self.coeffs[idx as usize]
        }
    }

    /// `K_γ` and its first three derivatives by direct Fourier summation.
    pub fn derivatives(&self, t: f64) -> [f64; 4] {
        let mut acc = [Complex64::new(0.0, 0.0); 4];
        let mut scale = [0.0f64; 4];
        let f_c = self.f_c as i64;
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let k = idx as i64 - f_c;
            let kt = k as f64 * t;
            let (s, co) = (2.0 * PI * (kt - kt.round())).sin_cos();
            let e = Complex64::new(co, s);
            let w = 2.0 * PI * k as f64;
            let jw = Complex64::new(0.0, w);
            let mut term = Complex64::new(c, 0.0) * e;
            let mut mag = c;
            for l in 0..4 {
                acc[l] += term;
                scale[l] += mag;
                term *= jw;
                mag *= w.abs();
            }
        }
        let mut out = [0.0; 4];
        for l in 0..4 {
            debug_assert!(
                acc[l].im.abs() <= 1e-10 * scale[l].max(1.0),
                "imaginary residue {} at order {l}",
                acc[l].im
            );
            out[l] = acc[l].re;
        }
        out
    }

    /// `K_γ` and its first three derivatives as a Leibniz product of
    /// closed-form Dirichlet factors.
    pub fn product_derivatives(&self, t: f64) -> [f64; 4] {
        let [a, b, c] = [
            self.factors[0].derivatives(t),
            self.factors[1].derivatives(t),
            self.factors[2].derivatives(t),
        ];
        let mut out = [0.0; 4];
        for (l, o) in out.iter_mut().enumerate() {
            for i in 0..=l {
                for j in 0..=(l - i) {
                    let k = l - i - j;
                    *o += multinomial(l, i, j, k) * a[i] * b[j] * c[k];
                }
            }
        }
        out
    }

    /// `∂^{i1}_{t1} ∂^{i2}_{t2} K_2D(t)` by direct Fourier summation.
    pub fn k2d(&self, t: [f64; 2], i1: usize, i2: usize) -> f64 {
        self.derivatives(t[0])[i1] * self.derivatives(t[1])[i2]
    }
}

fn multinomial(l: usize, i: usize, j: usize, k: usize) -> f64 {
    const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];
    FACT[l] / (FACT[i] * FACT[j] * FACT[k])
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `K_γ^{(order)}(t)`.
pub fn kgamma_eval(spec: &KernelSpec, t: f64, order: usize) -> Result<f64> {
    check_order(order)?;
    Ok(spec.derivatives(t)[order])
}

/// Partial derivative `∂^{i1}_{t1} ∂^{i2}_{t2} K_2D(t)`.
pub fn k2d_eval(spec: &KernelSpec, t: [f64; 2], i1: usize, i2: usize) -> Result<f64> {
    check_order(i1)?;
    check_order(i2)?;
    if i1 + i2 > 4 {
        return param(format!("total derivative order {} exceeds 4", i1 + i2));
    }
    Ok(spec.k2d(t, i1, i2))
}
