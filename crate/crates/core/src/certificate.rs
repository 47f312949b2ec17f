//! Dual certificates interpolating a sign pattern on a separated support.
//!
//! `Q(t) = Σ_i α_i K_2D(t − t_i) + β_{1i} ∂_1 K_2D(t − t_i) + β_{2i} ∂_2 K_2D(t − t_i)`
//! with the coefficients fixed by `Q(t_j) = v_j` and `∇Q(t_j) = 0`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::NEAR_RADIUS;
use crate::error::{param, Error, Result};
use crate::kernel::KernelSpec;
use crate::measurement::{adjoint_grid, min_separation, torus_dist_l2, torus_offset};

/// Largest accepted condition number of the normalized interpolation system.
pub const MAX_CONDITION: f64 = 1e12;

/// Derivative pattern of each block row/column: value, ∂_1, ∂_2.
const BLOCKS: [(usize, usize); 3] = [(0, 0), (1, 0), (0, 1)];

/// Normalized 1-D kernel derivatives `K^{(ℓ)}(t) / f_c^ℓ`.
fn kernel_normalized(spec: &KernelSpec, t: f64) -> [f64; 4] {
    let f = spec.f_c() as f64;
    let d = spec.derivatives(t);
    [d[0], d[1] / f, d[2] / (f * f), d[3] / (f * f * f)]
}

/// The `3r × 3r` interpolation system in normalized form: derivative rows are
/// divided by `f_c`, derivative unknowns multiplied by `f_c`, so all blocks
/// are `O(1)`. Block `(a, b)` holds `E_{a+b}` with
/// `(E_{i1 i2})_{ℓ j} = K_2D^{(i1,i2)}(t_ℓ − t_j) / f_c^{i1+i2}`.
#[derive(Debug, Clone)]
pub struct InterpSystem {
    spec: KernelSpec,
    support: Vec<[f64; 2]>,
    matrix: DMatrix<f64>,
}

/// Builds the system for `support`; rejects coincident points.
pub fn build_interp_system(spec: &KernelSpec, support: &[[f64; 2]]) -> Result<InterpSystem> {
    let r = support.len();
    if r == 0 {
        return param("the support is empty");
    }
    if min_separation(support) < 1e-12 {
        return param("support contains coincident points");
    }
    let mut matrix = DMatrix::zeros(3 * r, 3 * r);
    for l in 0..r {
        for j in 0..r {
            let d = torus_offset(support[l], support[j]);
            let k1 = kernel_normalized(spec, d[0]);
            let k2 = kernel_normalized(spec, d[1]);
            for (a, &(a1, a2)) in BLOCKS.iter().enumerate() {
                for (b, &(b1, b2)) in BLOCKS.iter().enumerate() {
                    matrix[(a * r + l, b * r + j)] = k1[a1 + b1] * k2[a2 + b2];
                }
            }
        }
    }
    Ok(InterpSystem {
        spec: spec.clone(),
        support: support.to_vec(),
        matrix,
    })
}

impl InterpSystem {
    pub fn r(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[[f64; 2]] {
        &self.support
    }

    /// Normalized block matrix, layout `[[E00, E10, E01], [E10, E20, E11], [E01, E11, E02]]`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Block `E_{i1 i2}` (normalized), for `i1 + i2 ≤ 2`.
    pub fn block(&self, i1: usize, i2: usize) -> Result<DMatrix<f64>> {
        let (a, b) = match (i1, i2) {
            (0, 0) => (0, 0),
            (1, 0) => (0, 1),
            (0, 1) => (0, 2),
            (2, 0) => (1, 1),
            (1, 1) => (1, 2),
            (0, 2) => (2, 2),
            _ => return param(format!("no block E{i1}{i2} in the interpolation system")),
        };
        let r = self.r();
        Ok(self.matrix.view((a * r, b * r), (r, r)).into_owned())
    }

    /// 2-norm condition number of the normalized system.
    pub fn condition(&self) -> f64 {
        let sv = self.matrix.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }
}

/// A solved certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub spec: KernelSpec,
    pub support: Vec<[f64; 2]>,
    pub v: Vec<Complex64>,
    pub alpha: Vec<Complex64>,
    pub beta1: Vec<Complex64>,
    pub beta2: Vec<Complex64>,
    pub condition: f64,
}

/// Solves the interpolation system for the sign pattern `v` by dense LU.
pub fn solve_coefficients(system: &InterpSystem, v: &[Complex64]) -> Result<Certificate> {
    let r = system.r();
    if v.len() != r {
        return Err(Error::Dimension { expected: r, got: v.len() });
    }
    if let Some(i) = v.iter().position(|z| (z.norm() - 1.0).abs() > 1e-12) {
        return param(format!("sign {i} is not a unit complex number (|v| = {})", v[i].norm()));
    }
    let condition = system.condition();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let lu = system.matrix.clone().lu();
    let solve = |part: fn(&Complex64) -> f64| -> Result<DVector<f64>> {
        let mut rhs = DVector::zeros(3 * r);
        for (i, z) in v.iter().enumerate() {
            rhs[i] = part(z);
        }
        lu.solve(&rhs).ok_or(Error::Singular { condition })
    };
    let re = solve(|z| z.re)?;
    let im = solve(|z| z.im)?;
    let f = system.spec.f_c() as f64;
    let coef = |k: usize, scale: f64| Complex64::new(re[k], im[k]) * scale;
    Ok(Certificate {
        spec: system.spec.clone(),
        support: system.support.clone(),
        v: v.to_vec(),
        alpha: (0..r).map(|i| coef(i, 1.0)).collect(),
        beta1: (0..r).map(|i| coef(r + i, 1.0 / f)).collect(),
        beta2: (0..r).map(|i| coef(2 * r + i, 1.0 / f)).collect(),
        condition,
    })
}

/// `Q` and its partial derivatives up to second order at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QDerivatives {
    pub q: Complex64,
    pub q10: Complex64,
    pub q01: Complex64,
    pub q20: Complex64,
    pub q11: Complex64,
    pub q02: Complex64,
}

impl Certificate {
    pub fn r(&self) -> usize {
        self.support.len()
    }

    pub fn alpha_inf(&self) -> f64 {
        self.alpha.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max_i max(|β_{1i}|, |β_{2i}|)` in units of `λ_c`.
    pub fn beta_inf(&self) -> f64 {
        let f = self.spec.f_c() as f64;
        self.beta1.iter().chain(&self.beta2).map(|z| z.norm() * f).fold(0.0, f64::max)
    }

    /// All derivatives of `Q` up to order two at `t` (raw units).
    pub fn derivatives(&self, t: [f64; 2]) -> QDerivatives {
        let zero = Complex64::new(0.0, 0.0);
        let mut out = QDerivatives {
            q: zero,
            q10: zero,
            q01: zero,
            q20: zero,
            q11: zero,
            q02: zero,
        };
        for (i, s) in self.support.iter().enumerate() {
            let d1 = self.spec.derivatives(t[0] - s[0]);
            let d2 = self.spec.derivatives(t[1] - s[1]);
            let (a, b1, b2) = (self.alpha[i], self.beta1[i], self.beta2[i]);
            let term = |x: usize, y: usize| a * d1[x] * d2[y] + b1 * d1[x + 1] * d2[y] + b2 * d1[x] * d2[y + 1];
            out.q += term(0, 0);
            out.q10 += term(1, 0);
            out.q01 += term(0, 1);
            out.q20 += term(2, 0);
            out.q11 += term(1, 1);
            out.q02 += term(0, 2);
        }
        out
    }

    /// Fourier coefficients `C` with `Q(t) = Σ_k C_k e^{j2π⟨k, t⟩}`, laid out
    /// like a measurement matrix (row `k1`, column `k2`).
    pub fn coefficient_matrix(&self) -> DMatrix<Complex64> {
        let f = self.spec.f_c() as i64;
        let n = self.spec.n();
        let mut c = DMatrix::zeros(n, n);
        for (i, s) in self.support.iter().enumerate() {
            let e1: Vec<Complex64> = (-f..=f).map(|k| phase(-(k as f64) * s[0])).collect();
            let e2: Vec<Complex64> = (-f..=f).map(|k| phase(-(k as f64) * s[1])).collect();
            for col in 0..n {
                let k2 = (col as i64 - f) as f64;
                for row in 0..n {
                    let k1 = (row as i64 - f) as f64;
                    let w = self.alpha[i]
                        + Complex64::new(0.0, 2.0 * PI * k1) * self.beta1[i]
                        + Complex64::new(0.0, 2.0 * PI * k2) * self.beta2[i];
                    c[(row, col)] += w * e1[row] * e2[col];
                }
            }
        }
        for col in 0..n {
            for row in 0..n {
                let g = self.spec.coeff(row as i64 - f) * self.spec.coeff(col as i64 - f);
                c[(row, col)] *= g;
            }
        }
        c
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn phase(x: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * (x - x.round())).sin_cos();
    Complex64::new(c, s)
}

/// `Q^{(i1,i2)}(t)` for `i1 + i2 ≤ 2`.
pub fn eval_q(cert: &Certificate, t: [f64; 2], i1: usize, i2: usize) -> Result<Complex64> {
    let d = cert.derivatives(t);
    match (i1, i2) {
        (0, 0) => Ok(d.q),
        (1, 0) => Ok(d.q10),
        (0, 1) => Ok(d.q01),
        (2, 0) => Ok(d.q20),
        (1, 1) => Ok(d.q11),
        (0, 2) => Ok(d.q02),
        _ => param(format!("derivative ({i1}, {i2}) of Q is not exposed; total order must be ≤ 2")),
    }
}

/// Outcome of the numerical verification of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub grid_step: f64,
    pub max_offsupport_modulus: f64,
    pub argmax: [f64; 2],
    pub margin: f64,
    pub hessian_ok_per_source: Vec<bool>,
    pub hessian_ok: bool,
    pub interp_residual: f64,
    pub grad_residual: f64,
    pub condition: f64,
    pub alpha_inf: f64,
    pub beta_inf: f64,
    /// `|Q| < 1` off the balls, Hessian negative definite in every ball.
    pub certified: bool,
}

/// Candidates refined by golden-section search after the grid scan.
const REFINE_CANDIDATES: usize = 12;

fn golden_max(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Checks `|Q| < 1` off the support and the local conditions around it.
///
/// The torus is scanned on a uniform grid of step `grid_step` (units of the
/// unit period, at most `λ_c / 20`) via FFT, excluding Euclidean balls of
/// radius `0.212568 λ_c` around the sources. The largest local maxima are then
/// refined by alternating golden-section searches. Inside each ball the
/// Hessian of `Re(conj(v_i) Q)` is tested for negative definiteness on a
/// sub-grid.
pub fn verify_certificate(cert: &Certificate, grid_step: f64) -> Result<CertificateReport> {
    let f_c = cert.spec.f_c();
    let lambda = cert.spec.lambda_c();
    if !(grid_step > 0.0 && grid_step <= lambda / 20.0) {
        return param(format!("grid step must lie in (0, λ_c/20 = {}], got {grid_step}", lambda / 20.0));
    }
    let radius = NEAR_RADIUS * lambda;
    let g = (1.0 / grid_step).ceil() as usize;
    let coeffs = cert.coefficient_matrix();
    let grid = adjoint_grid(&coeffs, f_c, g)?;
    let outside = |t: [f64; 2]| cert.support.iter().all(|s| torus_dist_l2(t, *s) >= radius);
    let at = |a: usize, b: usize| [a as f64 / g as f64, b as f64 / g as f64];

    // |Q| with the balls masked out; maxima on a ball boundary count as local
    // maxima of the masked grid
    let masked: Vec<f64> = (0..g * g)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (i % g, i / g);
            if outside(at(a, b)) {
                grid[(a, b)].norm()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let value = |a: usize, b: usize| masked[a + g * b];
    let mut peaks: Vec<(f64, usize, usize)> = (0..g * g)
        .into_par_iter()
        .filter_map(|i| {
            let (a, b) = (i % g, i / g);
            let m = value(a, b);
            if m == f64::NEG_INFINITY {
                return None;
            }
            let is_peak = [(g - 1, 0), (1, 0), (0, g - 1), (0, 1), (g - 1, g - 1), (1, 1), (g - 1, 1), (1, g - 1)]
                .iter()
                .all(|&(da, db)| value((a + da) % g, (b + db) % g) <= m);
            is_peak.then_some((m, a, b))
        })
        .collect();
    peaks.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let (mut best, mut argmax) = match peaks.first() {
        Some(&(m, a, b)) => (m, at(a, b)),
        None => (0.0, [0.0, 0.0]),
    };
    let modulus = |t: [f64; 2]| if outside(t) { cert.derivatives(t).q.norm() } else { 0.0 };
    for &(_, a, b) in peaks.iter().take(REFINE_CANDIDATES) {
        let mut t = at(a, b);
        let h = 1.0 / g as f64;
        for _ in 0..3 {
            let (x, _) = golden_max(t[0] - h, t[0] + h, |x| modulus([x, t[1]]));
            t[0] = x;
            let (y, _) = golden_max(t[1] - h, t[1] + h, |y| modulus([t[0], y]));
            t[1] = y;
        }
        let m = modulus(t);
        if m > best {
            best = m;
            argmax = [t[0].rem_euclid(1.0), t[1].rem_euclid(1.0)];
        }
    }

    // Hessian inside each ball, on a square sub-grid clipped to the disc
    let steps = (radius / grid_step).ceil() as i64;
    let hessian_ok_per_source: Vec<bool> = cert
        .support
        .par_iter()
        .zip(&cert.v)
        .map(|(s, v)| {
            let mut ok = true;
            for i in -steps..=steps {
                for j in -steps..=steps {
                    let off = [i as f64 * grid_step, j as f64 * grid_step];
                    if off[0].hypot(off[1]) > radius {
                        continue;
                    }
                    let d = cert.derivatives([s[0] + off[0], s[1] + off[1]]);
                    let rot = v.conj();
                    let (h11, h12, h22) = ((rot * d.q20).re, (rot * d.q11).re, (rot * d.q02).re);
                    ok &= h11 + h22 < 0.0 && h11 * h22 - h12 * h12 > 0.0;
                }
            }
            ok
        })
        .collect();

    let (mut interp_residual, mut grad_residual) = (0.0f64, 0.0f64);
    for (s, v) in cert.support.iter().zip(&cert.v) {
        let d = cert.derivatives(*s);
        interp_residual = interp_residual.max((d.q - v).norm());
        grad_residual = grad_residual.max(d.q10.norm()).max(d.q01.norm());
    }
    let hessian_ok = hessian_ok_per_source.iter().all(|&b| b);
    Ok(CertificateReport {
        grid_step,
        max_offsupport_modulus: best,
        argmax,
        margin: 1.0 - best,
        hessian_ok_per_source,
        hessian_ok,
        interp_residual,
        grad_residual,
        condition: cert.condition,
        alpha_inf: cert.alpha_inf(),
        beta_inf: cert.beta_inf(),
        certified: best < 1.0 && hessian_ok,
    })
}

/// Builds and solves the certificate in one step.
pub fn build_certificate(spec: &KernelSpec, support: &[[f64; 2]], v: &[Complex64]) -> Result<Certificate> {
    solve_coefficients(&build_interp_system(spec, support)?, v)
}

/// CSV of `|Q|` on a `g × g` grid: `t1,t2,abs_q` with `t` in units of the
/// period.
pub fn modulus_grid_csv(cert: &Certificate, g: usize) -> Result<String> {
    let grid = adjoint_grid(&cert.coefficient_matrix(), cert.spec.f_c(), g)?;
    let mut out = String::with_capacity(g * g * 40 + 16);
    out.push_str("t1,t2,abs_q\n");
    for a in 0..g {
        for b in 0..g {
            let _ = writeln!(out, "{},{},{}", a as f64 / g as f64, b as f64 / g as f64, grid[(a, b)].norm());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn single_source_system_and_coefficients() {
        let spec = KernelSpec::new(20).unwrap();
        let sys = build_interp_system(&spec, &[[0.3, 0.6]]).unwrap();
        assert!((sys.block(0, 0).unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(sys.block(1, 0).unwrap()[(0, 0)].abs() < 1e-12);
        assert!(sys.block(0, 1).unwrap()[(0, 0)].abs() < 1e-12);
        let cert = solve_coefficients(&sys, &[one()]).unwrap();
        assert!((cert.alpha[0] - one()).norm() < 1e-12);
        assert!(cert.beta1[0].norm() < 1e-12 && cert.beta2[0].norm() < 1e-12);
    }

    #[test]
    fn rejects_duplicates_and_bad_signs() {
        let spec = KernelSpec::new(10).unwrap();
        assert!(build_interp_system(&spec, &[[0.1, 0.1], [1.1, 0.1]]).is_err());
        assert!(build_interp_system(&spec, &[]).is_err());
        let sys = build_interp_system(&spec, &[[0.1, 0.1]]).unwrap();
        assert!(solve_coefficients(&sys, &[Complex64::new(0.5, 0.0)]).is_err());
        assert!(matches!(solve_coefficients(&sys, &[]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn eval_rejects_high_orders() {
        let spec = KernelSpec::new(10).unwrap();
        let cert = build_certificate(&spec, &[[0.2, 0.2]], &[one()]).unwrap();
        assert!(eval_q(&cert, [0.0, 0.0], 2, 1).is_err());
        assert!(eval_q(&cert, [0.0, 0.0], 1, 1).is_ok());
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_max(-1.0, 2.0, |x| -(x - 0.7) * (x - 0.7));
        assert!((x - 0.7).abs() < 1e-6 && fx.abs() < 1e-12);
    }
}
