//! Dual semidefinite program: maximize `Re⟨Y, C⟩_F` subject to
//! `[[Q0, vec C], [vec Cᴴ, 1]] ⪰ 0` and `tr[Θ_k Q0] = δ_k`.
//!
//! Solved by ADMM between the affine set (trace constraints and the unit
//! corner) and the PSD cone. The trace constraints are sums over disjoint
//! 2-D diagonals of `Q0`, so the affine projection is a per-diagonal shift.

use std::path::Path;

use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::measurement::{adjoint_grid, matrix_to_csv, MeasurementMatrix, SourceModel};

/// The SDP for one measurement matrix. `vec C` is column-major, so entry
/// `p = a + n b` of `vec C` is frequency `(a − f_c, b − f_c)`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    y: MeasurementMatrix,
}

/// Builds the problem; the constraint sets are implicit.
pub fn build_problem(y: &MeasurementMatrix) -> SdpProblem {
    SdpProblem { y: y.clone() }
}

impl SdpProblem {
    pub fn y(&self) -> &MeasurementMatrix {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.n()
    }

    /// Side of the PSD block, `n² + 1`.
    pub fn block_size(&self) -> usize {
        self.n() * self.n() + 1
    }

    /// All 2-D diagonal offsets `k = (k1, k2)`, `|k_i| < n`.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let m = self.n() as i64 - 1;
        (-m..=m).flat_map(|a| (-m..=m).map(move |b| (a, b))).collect()
    }

    /// Target of the trace constraint for offset `k`.
    pub fn delta(k: (i64, i64)) -> f64 {
        if k == (0, 0) {
            1.0
        } else {
            0.0
        }
    }

    /// `tr[Θ_k Q0]`: sum of `Q0[p, q]` over index pairs whose frequency
    /// difference `q − p` equals `k`.
    pub fn trace_sum(&self, q0: &DMatrix<Complex64>, k: (i64, i64)) -> Complex64 {
        let n = self.n() as i64;
        let mut s = Complex64::new(0.0, 0.0);
        for b in 0..n {
            let b2 = b + k.1;
            if !(0..n).contains(&b2) {
                continue;
            }
            for a in 0..n {
                let a2 = a + k.0;
                if (0..n).contains(&a2) {
                    s += q0[((a + n * b) as usize, (a2 + n * b2) as usize)];
                }
            }
        }
        s
    }

    /// Largest violation of the trace constraints.
    pub fn trace_residual(&self, q0: &DMatrix<Complex64>) -> f64 {
        let n = self.n();
        let sums = diagonal_sums(n, |p, q| q0[(p, q)]);
        sums.iter()
            .enumerate()
            .map(|(idx, s)| (s - Self::delta(offset_of(n, idx))).norm())
            .fold(0.0, f64::max)
    }
}

fn diag_index(n: usize, p: usize, q: usize) -> usize {
    let (a, b) = (p % n, p / n);
    let (a2, b2) = (q % n, q / n);
    let m1 = a2 + n - 1 - a;
    let m2 = b2 + n - 1 - b;
    m1 + (2 * n - 1) * m2
}

fn offset_of(n: usize, idx: usize) -> (i64, i64) {
    let w = 2 * n - 1;
    ((idx % w) as i64 - (n as i64 - 1), (idx / w) as i64 - (n as i64 - 1))
}

fn set_size(n: usize, idx: usize) -> f64 {
    let (m1, m2) = offset_of(n, idx);
    ((n as i64 - m1.abs()) * (n as i64 - m2.abs())) as f64
}

fn diagonal_sums(n: usize, get: impl Fn(usize, usize) -> Complex64) -> Vec<Complex64> {
    let mut sums = vec![Complex64::new(0.0, 0.0); (2 * n - 1) * (2 * n - 1)];
    let nn = n * n;
    for q in 0..nn {
        for p in 0..nn {
            sums[diag_index(n, p, q)] += get(p, q);
        }
    }
    sums
}

/// ADMM settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub rho: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub adaptive: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 50_000,
            tol: 1e-6,
            adaptive: true,
        }
    }
}

impl SolverOptions {
    pub fn from_json(text: &str) -> Result<Self> {
        let o: Self = serde_json::from_str(text)?;
        if !(o.rho > 0.0 && o.tol > 0.0 && o.max_iters > 0) {
            return param("solver options need rho > 0, tol > 0 and max_iters ≥ 1");
        }
        Ok(o)
    }
}

/// Bounds on the adaptive penalty.
pub const RHO_RANGE: (f64, f64) = (1e-4, 1e4);

/// Iterations between penalty updates and between history records.
const ADAPT_EVERY: usize = 25;
const RECORD_EVERY: usize = 10;

/// One residual record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub rho: f64,
}

/// Solver output. `q0` and `c` come from the polished iterate, which meets
/// the affine constraints exactly and is PSD up to round-off.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub f_c: usize,
    pub c: DMatrix<Complex64>,
    pub q0: DMatrix<Complex64>,
    pub objective: f64,
    /// Objective of the last unpolished ADMM iterate.
    pub raw_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Weight given to the strictly feasible point by the polish step.
    pub polish_weight: f64,
    pub min_eigenvalue: f64,
    pub trace_residual: f64,
    /// `max |F*C|` on a `grid × grid` scan.
    pub grid_max_modulus: f64,
    pub grid: usize,
    /// Window-100 smoothed residual never increased.
    pub residual_trend_monotone: bool,
    pub history: Vec<ResidualRecord>,
}

/// Diagnostics written next to `C`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpDiagnostics {
    pub f_c: usize,
    pub objective: f64,
    pub raw_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub polish_weight: f64,
    pub min_eigenvalue: f64,
    pub trace_residual: f64,
    pub grid_max_modulus: f64,
    pub grid: usize,
    pub residual_trend_monotone: bool,
    pub history: Vec<ResidualRecord>,
}

/// Records kept in the diagnostics dump.
const HISTORY_POINTS: usize = 200;

impl SdpSolution {
    pub fn diagnostics(&self) -> SdpDiagnostics {
        let stride = self.history.len().div_ceil(HISTORY_POINTS).max(1);
        let mut history: Vec<ResidualRecord> = self.history.iter().step_by(stride).copied().collect();
        if let Some(last) = self.history.last() {
            if history.last() != Some(last) {
                history.push(*last);
            }
        }
        SdpDiagnostics {
            f_c: self.f_c,
            objective: self.objective,
            raw_objective: self.raw_objective,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
            iterations: self.iterations,
            converged: self.converged,
            polish_weight: self.polish_weight,
            min_eigenvalue: self.min_eigenvalue,
            trace_residual: self.trace_residual,
            grid_max_modulus: self.grid_max_modulus,
            grid: self.grid,
            residual_trend_monotone: self.residual_trend_monotone,
            history,
        }
    }

    /// `C` as CSV (`f_c` line, then `k1,k2,re,im`).
    pub fn c_csv(&self) -> String {
        matrix_to_csv(self.f_c, &self.c)
    }

    /// Writes `dual_c.csv` and `sdp_diagnostics.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("dual_c.csv"), self.c_csv())?;
        std::fs::write(
            dir.join("sdp_diagnostics.json"),
            serde_json::to_string_pretty(&self.diagnostics())?,
        )?;
        Ok(())
    }
}

fn frob(m: &Mat<Complex64>) -> f64 {
    m.norm_l2()
}

/// Orthogonal projection onto the affine set, in place.
fn project_affine(x: &mut Mat<Complex64>, n: usize) {
    let nn = n * n;
    let sums = diagonal_sums(n, |p, q| x[(p, q)]);
    let shift: Vec<Complex64> = sums
        .iter()
        .enumerate()
        .map(|(idx, s)| (s - SdpProblem::delta(offset_of(n, idx))) / set_size(n, idx))
        .collect();
    for q in 0..nn {
        for p in 0..nn {
            x[(p, q)] -= shift[diag_index(n, p, q)];
        }
    }
    x[(nn, nn)] = Complex64::new(1.0, 0.0);
}

/// Projection onto the PSD cone; also returns the smallest eigenvalue of the
/// input.
fn project_psd(w: &Mat<Complex64>) -> Result<(Mat<Complex64>, f64)> {
    let eig = w
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Construction(format!("eigendecomposition failed: {e:?}")))?;
    let u = eig.U();
    let s = eig.S().column_vector();
    let dim = w.nrows();
    let min = s[0].re;
    let first = (0..dim).find(|&i| s[i].re > 0.0).unwrap_or(dim);
    let k = dim - first;
    let v = Mat::from_fn(dim, k, |i, j| u[(i, first + j)] * s[first + j].re.sqrt());
    Ok((&v * v.adjoint(), min))
}

fn smallest_eigenvalue(w: &Mat<Complex64>) -> Result<f64> {
    let s = w
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Construction(format!("eigendecomposition failed: {e:?}")))?;
    Ok(s[0])
}

fn scaled(m: &Mat<Complex64>, s: f64) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

fn hermitian_part(x: &Mat<Complex64>) -> Mat<Complex64> {
    let d = x.nrows();
    Mat::from_fn(d, d, |i, j| (x[(i, j)] + x[(j, i)].conj()) * 0.5)
}

/// `[[I/n², 0], [0, 1]]`: strictly feasible, smallest eigenvalue `1/n²`.
fn interior_point(n: usize) -> Mat<Complex64> {
    let nn = n * n;
    Mat::from_fn(nn + 1, nn + 1, |i, j| {
        if i != j {
            Complex64::new(0.0, 0.0)
        } else if i == nn {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(1.0 / nn as f64, 0.0)
        }
    })
}

fn extract_c(x: &Mat<Complex64>, n: usize) -> DMatrix<Complex64> {
    let nn = n * n;
    DMatrix::from_fn(n, n, |a, b| x[(a + n * b, nn)])
}

fn objective(y: &DMatrix<Complex64>, c: &DMatrix<Complex64>) -> f64 {
    y.iter().zip(c.iter()).map(|(y, c)| (y.conj() * c).re).sum()
}

/// Smoothed (window-100) max residual never increases.
fn trend_monotone(history: &[ResidualRecord]) -> bool {
    let window = (100 / RECORD_EVERY).max(1);
    let means: Vec<f64> = history
        .chunks(window)
        .filter(|c| c.len() == window)
        .map(|c| c.iter().map(|r| r.primal.max(r.dual)).sum::<f64>() / window as f64)
        .collect();
    means.windows(2).all(|w| w[1] <= w[0])
}

/// Runs ADMM and polishes the result.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    if !(opts.rho > 0.0 && opts.tol > 0.0 && opts.max_iters > 0) {
        return param("solver options need rho > 0, tol > 0 and max_iters ≥ 1");
    }
    let n = problem.n();
    let nn = n * n;
    let dim = nn + 1;
    let y = problem.y.data();
    // The objective is rescaled by a power of two so the iteration is exactly
    // homogeneous in Y.
    let ymax = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = if ymax > 0.0 { 2f64.powi(-(ymax.log2().ceil() as i32)) } else { 0.0 };
    let mut g = Mat::<Complex64>::zeros(dim, dim);
    for b in 0..n {
        for a in 0..n {
            let v = y[(a, b)] * scale * 0.5;
            g[(a + n * b, nn)] = v;
            g[(nn, a + n * b)] = v.conj();
        }
    }

    let mut rho = opts.rho.clamp(RHO_RANGE.0, RHO_RANGE.1);
    let mut z = interior_point(n);
    let mut u = Mat::<Complex64>::zeros(dim, dim);
    let mut history = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = ymax == 0.0;
    while !converged && iterations < opts.max_iters {
        iterations += 1;
        let mut x = &z - &u + scaled(&g, 1.0 / rho);
        project_affine(&mut x, n);
        let w = hermitian_part(&(&x + &u));
        let (z_new, _) = project_psd(&w)?;
        let r = &x - &z_new;
        let dz = frob(&(&z_new - &z));
        u += &r;
        z = z_new;
        let scale_p = frob(&x).max(frob(&z)).max(1.0);
        primal = frob(&r) / scale_p;
        dual = rho * dz / (rho * frob(&u)).max(1.0);
        if iterations % RECORD_EVERY == 0 {
            history.push(ResidualRecord { iteration: iterations, primal, dual, rho });
        }
        converged = primal.max(dual) <= opts.tol;
        if opts.adaptive && iterations % ADAPT_EVERY == 0 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            let next = (rho * factor).clamp(RHO_RANGE.0, RHO_RANGE.1);
            if next != rho {
                u = scaled(&u, rho / next);
                rho = next;
            }
        }
    }

    // polish: project the PSD iterate onto the affine set, then mix with the
    // interior point just enough to restore positive semidefiniteness
    let raw_c = extract_c(&z, n);
    let raw_objective = objective(y, &raw_c);
    let mut xa = hermitian_part(&z);
    project_affine(&mut xa, n);
    let xa = hermitian_part(&xa);
    let mu = -smallest_eigenvalue(&xa)?;
    let floor = 1.0 / nn as f64;
    let polish_weight = if mu > 0.0 { (mu * (1.0 + 1e-6)) / (mu * (1.0 + 1e-6) + floor) } else { 0.0 };
    let xp = scaled(&xa, 1.0 - polish_weight) + scaled(&interior_point(n), polish_weight);
    let xp = hermitian_part(&xp);
    let min_eigenvalue = smallest_eigenvalue(&xp)?;

    let c = extract_c(&xp, n);
    let q0 = DMatrix::from_fn(nn, nn, |p, q| xp[(p, q)]);
    let grid = (8 * n).max(64);
    let grid_max_modulus = adjoint_grid(&c, problem.y.f_c(), grid)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(SdpSolution {
        f_c: problem.y.f_c(),
        objective: objective(y, &c),
        raw_objective,
        trace_residual: problem.trace_residual(&q0),
        c,
        q0,
        primal_residual: primal,
        dual_residual: dual,
        iterations,
        converged,
        polish_weight,
        min_eigenvalue,
        grid_max_modulus,
        grid,
        residual_trend_monotone: trend_monotone(&history),
        history,
    })
}

/// Comparison of a solution with the ground truth that generated `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub tv_norm: f64,
    pub objective: f64,
    pub gap: f64,
    pub relative_gap: f64,
    /// `max_i |(F*C)(t_i) − d_i/|d_i||`.
    pub sign_match_residual: f64,
}

pub fn check_duality(solution: &SdpSolution, model: &SourceModel) -> Result<DualityReport> {
    let tv = model.tv_norm();
    let mut sign = 0.0f64;
    for s in model.sources() {
        let q = crate::measurement::adjoint_eval(&solution.c, solution.f_c, s.t)?;
        sign = sign.max((q - s.d / s.d.norm()).norm());
    }
    let gap = (solution.objective - tv).abs();
    Ok(DualityReport {
        tv_norm: tv,
        objective: solution.objective,
        gap,
        relative_gap: gap / tv,
        sign_match_residual: sign,
    })
}
