//! Support and amplitude estimation from a solved dual polynomial.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::measurement::{
    adjoint_eval_with_derivatives, adjoint_grid, exp_vector, torus_dist_l2, MeasurementMatrix, SourceModel,
};

/// Peak search settings; `merge_radius` is in units of `λ_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    /// Grid points per axis; 0 selects `16 n`.
    pub grid: usize,
    pub threshold: f64,
    pub merge_radius: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            grid: 0,
            threshold: 1.0 - 1e-3,
            merge_radius: 0.1,
        }
    }
}

/// Grid maxima at least this far below the threshold are not refined.
const SEED_SLACK: f64 = 0.05;
const NEWTON_STEPS: usize = 20;
const BACKTRACKS: usize = 12;

/// A located peak of `|F*C|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub t: [f64; 2],
    pub modulus: f64,
}

fn modulus_sq(c: &DMatrix<Complex64>, f_c: usize, t: [f64; 2]) -> f64 {
    adjoint_eval_with_derivatives(c, f_c, t)[0].norm_sqr()
}

/// Damped Newton ascent on `|Q|²` from `t`. Steps are clipped to `λ_c / 4`
/// and only accepted when they increase `|Q|²`.
fn refine(c: &DMatrix<Complex64>, f_c: usize, mut t: [f64; 2]) -> Peak {
    let max_step = 0.25 / f_c as f64;
    let mut f = modulus_sq(c, f_c, t);
    for _ in 0..NEWTON_STEPS {
        let [q, q1, q2, q11, q12, q22] = adjoint_eval_with_derivatives(c, f_c, t);
        let g = [2.0 * (q.conj() * q1).re, 2.0 * (q.conj() * q2).re];
        let h11 = 2.0 * (q1.norm_sqr() + (q.conj() * q11).re);
        let h12 = 2.0 * ((q1.conj() * q2).re + (q.conj() * q12).re);
        let h22 = 2.0 * (q2.norm_sqr() + (q.conj() * q22).re);
        let det = h11 * h22 - h12 * h12;
        let mut step = if h11 < 0.0 && det > 0.0 {
            [-(h22 * g[0] - h12 * g[1]) / det, -(h11 * g[1] - h12 * g[0]) / det]
        } else {
            // not locally concave: gradient step scaled by the curvature bound
            let scale = 1.0 / (h11.abs() + h22.abs() + 2.0 * h12.abs()).max(f64::MIN_POSITIVE);
            [g[0] * scale, g[1] * scale]
        };
        let len = step[0].hypot(step[1]);
        if len > max_step {
            step = [step[0] * max_step / len, step[1] * max_step / len];
        }
        if !(len > 1e-15) {
            break;
        }
        let mut accepted = false;
        for _ in 0..BACKTRACKS {
            let cand = [t[0] + step[0], t[1] + step[1]];
            let fc = modulus_sq(c, f_c, cand);
            if fc > f {
                t = cand;
                f = fc;
                accepted = true;
                break;
            }
            step = [step[0] * 0.5, step[1] * 0.5];
        }
        if !accepted {
            break;
        }
    }
    Peak {
        t: [t[0].rem_euclid(1.0), t[1].rem_euclid(1.0)],
        modulus: f.sqrt(),
    }
}

/// Locates the points where `|F*C|` reaches the threshold.
///
/// Grid local maxima are refined by Newton ascent, then peaks closer than the
/// merge radius are merged keeping the larger modulus. The output is sorted
/// lexicographically by location.
pub fn find_peaks(c: &DMatrix<Complex64>, f_c: usize, opts: &PeakOptions) -> Result<Vec<Peak>> {
    let n = 2 * f_c + 1;
    if !(opts.threshold > 0.0 && opts.merge_radius >= 0.0) {
        return param("peak threshold must be positive and the merge radius non-negative");
    }
    let g = if opts.grid == 0 { 16 * n } else { opts.grid };
    let grid = adjoint_grid(c, f_c, g)?;
    let seed_floor = opts.threshold - SEED_SLACK;
    let mut seeds = Vec::new();
    for b in 0..g {
        for a in 0..g {
            let m = grid[(a, b)].norm();
            if m < seed_floor || m == 0.0 {
                continue;
            }
            let peak = [(g - 1, 0), (1, 0), (0, g - 1), (0, 1), (g - 1, g - 1), (1, 1), (g - 1, 1), (1, g - 1)]
                .iter()
                .all(|&(da, db)| grid[((a + da) % g, (b + db) % g)].norm() <= m);
            if peak {
                seeds.push([a as f64 / g as f64, b as f64 / g as f64]);
            }
        }
    }
    let mut refined: Vec<Peak> = seeds.par_iter().map(|&t| refine(c, f_c, t)).collect();
    refined.retain(|p| p.modulus >= opts.threshold);
    refined.sort_by(|x, y| {
        y.modulus
            .total_cmp(&x.modulus)
            .then(x.t[0].total_cmp(&y.t[0]))
            .then(x.t[1].total_cmp(&y.t[1]))
    });
    let radius = opts.merge_radius / f_c as f64;
    let mut kept: Vec<Peak> = Vec::new();
    for p in refined {
        if kept.iter().all(|k| torus_dist_l2(k.t, p.t) >= radius) {
            kept.push(p);
        }
    }
    kept.sort_by(|x, y| x.t[0].total_cmp(&y.t[0]).then(x.t[1].total_cmp(&y.t[1])));
    Ok(kept)
}

/// Relative singular-value floor below which the design is rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Least-squares amplitudes on a fixed support, and the relative Frobenius
/// misfit `‖Y − A d‖ / ‖Y‖`.
pub fn recover_amplitudes(y: &MeasurementMatrix, locations: &[[f64; 2]]) -> Result<(Vec<Complex64>, f64)> {
    let f_c = y.f_c();
    let n = y.n();
    let r = locations.len();
    if r == 0 {
        return Ok((Vec::new(), if y.data().norm() > 0.0 { 1.0 } else { 0.0 }));
    }
    if r > n * n {
        return param(format!("{r} locations exceed the {} measurements", n * n));
    }
    let mut a = DMatrix::<Complex64>::zeros(n * n, r);
    for (i, t) in locations.iter().enumerate() {
        let e1 = exp_vector(f_c, t[0], -1.0);
        let e2 = exp_vector(f_c, t[1], -1.0);
        for col in 0..n {
            for row in 0..n {
                a[(row + n * col, i)] = e1[row] * e2[col];
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        let mut worst = (0, 1, f64::INFINITY);
        for i in 0..r {
            for j in i + 1..r {
                let d = torus_dist_l2(locations[i], locations[j]);
                if d < worst.2 {
                    worst = (i, j, d);
                }
            }
        }
        return Err(Error::RankDeficient { first: worst.0, second: worst.1 });
    }
    let rhs = DVector::from_vec(y.vec());
    let d = svd
        .solve(&rhs, RANK_TOL * smax)
        .map_err(|e| Error::Construction(format!("least-squares solve failed: {e}")))?;
    let misfit = (&rhs - &a * &d).norm();
    let norm = rhs.norm();
    let residual = if norm > 0.0 { misfit / norm } else { misfit };
    Ok((d.iter().copied().collect(), residual))
}

/// A recovered point source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveredPeak {
    pub t: [f64; 2],
    pub modulus: f64,
    #[serde(with = "crate::measurement::complex_pair")]
    pub d: Complex64,
}

/// Estimated support with amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredSupport {
    pub peaks: Vec<RecoveredPeak>,
    pub residual: f64,
}

impl RecoveredSupport {
    pub fn locations(&self) -> Vec<[f64; 2]> {
        self.peaks.iter().map(|p| p.t).collect()
    }
}

/// Peaks of `C` followed by the amplitude fit against `Y`.
pub fn localize(y: &MeasurementMatrix, c: &DMatrix<Complex64>, opts: &PeakOptions) -> Result<RecoveredSupport> {
    let peaks = find_peaks(c, y.f_c(), opts)?;
    let locations: Vec<[f64; 2]> = peaks.iter().map(|p| p.t).collect();
    let (d, residual) = recover_amplitudes(y, &locations)?;
    Ok(RecoveredSupport {
        peaks: peaks
            .iter()
            .zip(d)
            .map(|(p, d)| RecoveredPeak { t: p.t, modulus: p.modulus, d })
            .collect(),
        residual,
    })
}

/// Default match radius in units of `λ_c`.
pub const MATCH_RADIUS: f64 = 0.05;
/// Largest relative amplitude error counted as a success.
pub const AMPLITUDE_TOLERANCE: f64 = 0.05;

/// Comparison of an estimate with the ground truth. Distances are in units of
/// `λ_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub matched: bool,
    pub max_loc_err: f64,
    pub max_amp_err: f64,
    pub truth_count: usize,
    pub estimate_count: usize,
    /// `matched` and every amplitude within [`AMPLITUDE_TOLERANCE`].
    pub success: bool,
}

/// Greedy bipartite matching by distance; `match_radius` in units of `λ_c`.
pub fn score(truth: &SourceModel, est: &RecoveredSupport, f_c: usize, match_radius: f64) -> Score {
    let lambda = 1.0 / f_c as f64;
    let src = truth.sources();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(src.len() * est.peaks.len());
    for (i, s) in src.iter().enumerate() {
        for (j, p) in est.peaks.iter().enumerate() {
            pairs.push((torus_dist_l2(s.t, p.t) / lambda, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut truth_used = vec![false; src.len()];
    let mut est_used = vec![false; est.peaks.len()];
    let (mut max_loc_err, mut max_amp_err) = (0.0f64, 0.0f64);
    let mut count = 0;
    for (dist, i, j) in pairs {
        if truth_used[i] || est_used[j] || dist > match_radius {
            continue;
        }
        truth_used[i] = true;
        est_used[j] = true;
        count += 1;
        max_loc_err = max_loc_err.max(dist);
        max_amp_err = max_amp_err.max((est.peaks[j].d - src[i].d).norm() / src[i].d.norm());
    }
    let matched = src.len() == est.peaks.len() && count == src.len();
    if !matched {
        max_loc_err = f64::INFINITY;
        max_amp_err = f64::INFINITY;
    }
    Score {
        matched,
        max_loc_err,
        max_amp_err,
        truth_count: src.len(),
        estimate_count: est.peaks.len(),
        success: matched && max_amp_err <= AMPLITUDE_TOLERANCE,
    }
}
