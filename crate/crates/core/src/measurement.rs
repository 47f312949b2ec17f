//! Forward measurement operator, its adjoint and model I/O.
//!
//! Conventions used throughout the crate:
//!
//! * Measurement and coefficient matrices are `n × n` with `n = 2 f_c + 1`;
//!   row index ↔ `k1`, column index ↔ `k2`, both ordered `-f_c..=f_c`.
//!   `vec()` stacks columns, so entry `(k1, k2)` sits at
//!   `(k1 + f_c) + n (k2 + f_c)`.
//! * The Frobenius inner product conjugates its first argument,
//!   `⟨A, B⟩_F = Σ conj(a_k) b_k`. With this choice
//!   `⟨forward(x), C⟩_F = Σ_i conj(d_i) (F*C)(t_i)` holds exactly.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Wrap-around distance on the unit circle.
pub fn wrap_dist(a: f64, b: f64) -> f64 {
    // abs first so the result is exactly symmetric in its arguments
    let d = (a - b).abs() % 1.0;
    d.min(1.0 - d)
}

/// Wrap-around ∞-norm distance on the unit torus.
pub fn torus_dist_inf(a: [f64; 2], b: [f64; 2]) -> f64 {
    wrap_dist(a[0], b[0]).max(wrap_dist(a[1], b[1]))
}

/// Wrap-around Euclidean distance on the unit torus.
pub fn torus_dist_l2(a: [f64; 2], b: [f64; 2]) -> f64 {
    wrap_dist(a[0], b[0]).hypot(wrap_dist(a[1], b[1]))
}

/// Signed offset `a - b` wrapped onto `[-1/2, 1/2)` per coordinate.
pub fn torus_offset(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let w = |x: f64| (x + 0.5).rem_euclid(1.0) - 0.5;
    [w(a[0] - b[0]), w(a[1] - b[1])]
}

fn wrap_unit(t: f64) -> f64 {
    let w = t.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub t: [f64; 2],
    #[serde(with = "complex_pair")]
    pub d: Complex64,
}

/// A finite atomic measure on the unit torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SourceModelRecord")]
pub struct SourceModel {
    sources: Vec<Source>,
}

#[derive(Deserialize)]
struct SourceModelRecord {
    sources: Vec<Source>,
}

impl TryFrom<SourceModelRecord> for SourceModel {
    type Error = Error;

    fn try_from(r: SourceModelRecord) -> Result<Self> {
        SourceModel::new(r.sources)
    }
}

impl SourceModel {
    /// Validate and wrap locations into `[0, 1)²`.
    pub fn new(sources: Vec<Source>) -> Result<Self> {
        if sources.is_empty() {
            return param("a source model needs at least one source");
        }
        let mut out = Vec::with_capacity(sources.len());
        for (i, s) in sources.into_iter().enumerate() {
            if !(s.t[0].is_finite() && s.t[1].is_finite()) {
                return param(format!("source {i} has a non-finite location"));
            }
            if !(s.d.norm() > 0.0 && s.d.norm().is_finite()) {
                return param(format!("source {i} has a zero or non-finite amplitude"));
            }
            out.push(Source {
                t: [wrap_unit(s.t[0]), wrap_unit(s.t[1])],
                d: s.d,
            });
        }
        Ok(Self { sources: out })
    }

    pub fn from_parts(locations: &[[f64; 2]], amplitudes: &[Complex64]) -> Result<Self> {
        if locations.len() != amplitudes.len() {
            return Err(Error::Dimension {
                expected: locations.len(),
                got: amplitudes.len(),
            });
        }
        Self::new(
            locations
                .iter()
                .zip(amplitudes)
                .map(|(&t, &d)| Source { t, d })
                .collect(),
        )
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn locations(&self) -> Vec<[f64; 2]> {
        self.sources.iter().map(|s| s.t).collect()
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.sources.iter().map(|s| s.d).collect()
    }

    /// Total-variation norm `Σ |d_i|`.
    pub fn tv_norm(&self) -> f64 {
        self.sources.iter().map(|s| s.d.norm()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sources: self
                .sources
                .iter()
                .map(|s| Source { t: s.t, d: s.d * factor })
                .collect(),
        }
    }

    pub fn min_separation(&self) -> f64 {
        min_separation(&self.locations())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Minimum wrap-around ∞-norm separation; `+∞` for fewer than two points.
///
/// Points are scanned in order of their first coordinate so that pairs whose
/// first-coordinate gap already exceeds the running minimum are skipped.
pub fn min_separation(points: &[[f64; 2]]) -> f64 {
    let r = points.len();
    if r < 2 {
        return f64::INFINITY;
    }
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    let mut best = f64::INFINITY;
    for (pos, &i) in order.iter().enumerate() {
        for step in 1..r {
            let j = order[(pos + step) % r];
            // forward gap along the sorted circle
            let gap = (points[j][0] - points[i][0]).rem_euclid(1.0);
            if gap >= best && 1.0 - gap >= best {
                // every later point is at least as far in the forward direction;
                // backward neighbors are handled from their own side
                break;
            }
            best = best.min(torus_dist_inf(points[i], points[j]));
        }
    }
    best
}

/// Low-pass 2-D Fourier measurements, `(2 f_c + 1)²` complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    f_c: usize,
    data: DMatrix<Complex64>,
}

impl MeasurementMatrix {
    pub fn new(f_c: usize, data: DMatrix<Complex64>) -> Result<Self> {
        let n = 2 * f_c + 1;
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::Dimension {
                expected: n * n,
                got: data.nrows() * data.ncols(),
            });
        }
        Ok(Self { f_c, data })
    }

    pub fn zeros(f_c: usize) -> Self {
        let n = 2 * f_c + 1;
        Self {
            f_c,
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn f_c(&self) -> usize {
        self.f_c
    }

    pub fn n(&self) -> usize {
        2 * self.f_c + 1
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<Complex64> {
        self.data
    }

    /// Entry `y_k` for `k1, k2 ∈ -f_c..=f_c`.
    pub fn get(&self, k1: i64, k2: i64) -> Complex64 {
        let f = self.f_c as i64;
        self.data[((k1 + f) as usize, (k2 + f) as usize)]
    }

    /// Column-stacked `vec(Y)`.
    pub fn vec(&self) -> Vec<Complex64> {
        self.data.as_slice().to_vec()
    }

    /// CSV with a `f_c,<value>` line, a column header, then `n²` rows
    /// `k1,k2,re,im` in column-major order.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(self.f_c, &self.data)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (f_c, data) = matrix_from_csv(text)?;
        Self::new(f_c, data)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn matrix_to_csv(f_c: usize, data: &DMatrix<Complex64>) -> String {
    let f = f_c as i64;
    let mut out = String::with_capacity(32 * data.len() + 32);
    let _ = writeln!(out, "f_c,{f_c}");
    out.push_str("k1,k2,re,im\n");
    for c in 0..data.ncols() {
        for r in 0..data.nrows() {
            let v = data[(r, c)];
            let _ = writeln!(out, "{},{},{:e},{:e}", r as i64 - f, c as i64 - f, v.re, v.im);
        }
    }
    out
}

pub(crate) fn matrix_from_csv(text: &str) -> Result<(usize, DMatrix<Complex64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let f_c: usize = head
        .strip_prefix("f_c,")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("expected `f_c,<int>` header, got `{head}`")))?;
    match lines.next() {
        Some(h) if h.trim() == "k1,k2,re,im" => {}
        other => return Err(Error::Parse(format!("expected column header, got {other:?}"))),
    }
    let n = 2 * f_c + 1;
    let f = f_c as i64;
    let mut data = DMatrix::zeros(n, n);
    let mut seen = 0usize;
    for line in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("malformed row `{line}`")));
        }
        let parse_i = |s: &str| s.parse::<i64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let (k1, k2) = (parse_i(fields[0])?, parse_i(fields[1])?);
        if k1.abs() > f || k2.abs() > f {
            return Err(Error::Parse(format!("index ({k1},{k2}) outside the band")));
        }
        data[((k1 + f) as usize, (k2 + f) as usize)] =
            Complex64::new(parse_f(fields[2])?, parse_f(fields[3])?);
        seen += 1;
    }
    if seen != n * n {
        return Err(Error::Dimension {
            expected: n * n,
            got: seen,
        });
    }
    Ok((f_c, data))
}

/// Exponential vector `e^{-j2πk t}` for `k = -f_c..=f_c`.
pub(crate) fn exp_vector(f_c: usize, t: f64, sign: f64) -> Vec<Complex64> {
    let f = f_c as i64;
    (-f..=f)
        .map(|k| {
            let kt = k as f64 * t;
            let (s, c) = (2.0 * PI * (kt - kt.round())).sin_cos();
            Complex64::new(c, sign * s)
        })
        .collect()
}

/// `y_k = Σ_i d_i e^{-j2π⟨k, t_i⟩}` for every `k ∈ [-f_c, f_c]²`.
pub fn forward(model: &SourceModel, f_c: usize) -> Result<MeasurementMatrix> {
    if f_c < 1 {
        return param("cut-off frequency must be at least 1");
    }
    let n = 2 * f_c + 1;
    let mut data = DMatrix::<Complex64>::zeros(n, n);
    for s in model.sources() {
        let e1 = exp_vector(f_c, s.t[0], -1.0);
        let e2 = exp_vector(f_c, s.t[1], -1.0);
        for c in 0..n {
            let w = s.d * e2[c];
            for r in 0..n {
                data[(r, c)] += w * e1[r];
            }
        }
    }
    MeasurementMatrix::new(f_c, data)
}

fn check_dims(coeffs: &DMatrix<Complex64>, f_c: usize) -> Result<()> {
    let n = 2 * f_c + 1;
    if coeffs.nrows() != n || coeffs.ncols() != n {
        return Err(Error::Dimension {
            expected: n * n,
            got: coeffs.nrows() * coeffs.ncols(),
        });
    }
    Ok(())
}

/// Trigonometric polynomial `(F*C)(t) = Σ_k c_k e^{j2π⟨t, k⟩}`.
pub fn adjoint_eval(coeffs: &DMatrix<Complex64>, f_c: usize, t: [f64; 2]) -> Result<Complex64> {
    check_dims(coeffs, f_c)?;
    Ok(adjoint_eval_unchecked(coeffs, f_c, t))
}

pub(crate) fn adjoint_eval_unchecked(coeffs: &DMatrix<Complex64>, f_c: usize, t: [f64; 2]) -> Complex64 {
    let e1 = exp_vector(f_c, t[0], 1.0);
    let e2 = exp_vector(f_c, t[1], 1.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, &w2) in e2.iter().enumerate() {
        let col = coeffs.column(c);
        let inner: Complex64 = col.iter().zip(&e1).map(|(a, b)| a * b).sum();
        acc += inner * w2;
    }
    acc
}

/// `(F*C)(t)` with its partial derivatives up to second order:
/// `[Q, Q_1, Q_2, Q_11, Q_12, Q_22]`.
pub fn adjoint_eval_with_derivatives(coeffs: &DMatrix<Complex64>, f_c: usize, t: [f64; 2]) -> [Complex64; 6] {
    let f = f_c as i64;
    let e1 = exp_vector(f_c, t[0], 1.0);
    let e2 = exp_vector(f_c, t[1], 1.0);
    let mut out = [Complex64::new(0.0, 0.0); 6];
    for (c, &w2) in e2.iter().enumerate() {
        let k2 = 2.0 * PI * (c as i64 - f) as f64;
        // Σ_k1 c e1, Σ_k1 (j k1) c e1, Σ_k1 (j k1)^2 c e1
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        for (r, &w1) in e1.iter().enumerate() {
            let k1 = 2.0 * PI * (r as i64 - f) as f64;
            let v = coeffs[(r, c)] * w1;
            s0 += v;
            s1 += v * Complex64::new(0.0, k1);
            s2 -= v * (k1 * k1);
        }
        let jk2 = Complex64::new(0.0, k2);
        out[0] += s0 * w2;
        out[1] += s1 * w2;
        out[2] += s0 * w2 * jk2;
        out[3] += s2 * w2;
        out[4] += s1 * w2 * jk2;
        out[5] -= s0 * w2 * (k2 * k2);
    }
    out
}

/// Smallest grid size (per axis) for which [`adjoint_grid`] uses the FFT path.
pub fn fft_threshold(f_c: usize) -> usize {
    4 * (2 * f_c + 1)
}

/// `(F*C)` on the uniform grid `t = (a/g, b/g)`, returned as a `g × g`
/// matrix indexed `(a, b)`.
///
/// Grids with `g ≥ 4n` go through an oversampled inverse FFT; smaller grids
/// are summed directly, parallel over rows.
pub fn adjoint_grid(coeffs: &DMatrix<Complex64>, f_c: usize, g: usize) -> Result<DMatrix<Complex64>> {
    check_dims(coeffs, f_c)?;
    if g == 0 {
        return param("grid size must be positive");
    }
    if g >= fft_threshold(f_c) {
        Ok(adjoint_grid_fft(coeffs, f_c, g))
    } else {
        Ok(adjoint_grid_direct(coeffs, f_c, g))
    }
}

pub(crate) fn adjoint_grid_direct(coeffs: &DMatrix<Complex64>, f_c: usize, g: usize) -> DMatrix<Complex64> {
    let rows: Vec<Vec<Complex64>> = (0..g)
        .into_par_iter()
        .map(|a| {
            (0..g)
                .map(|b| adjoint_eval_unchecked(coeffs, f_c, [a as f64 / g as f64, b as f64 / g as f64]))
                .collect()
        })
        .collect();
    DMatrix::from_fn(g, g, |a, b| rows[a][b])
}

pub(crate) fn adjoint_grid_fft(coeffs: &DMatrix<Complex64>, f_c: usize, g: usize) -> DMatrix<Complex64> {
    let f = f_c as i64;
    let n = 2 * f_c + 1;
    // zero-padded spectrum with negative frequencies wrapped
    let mut grid = DMatrix::<Complex64>::zeros(g, g);
    for c in 0..n {
        for r in 0..n {
            let k1 = (r as i64 - f).rem_euclid(g as i64) as usize;
            let k2 = (c as i64 - f).rem_euclid(g as i64) as usize;
            grid[(k1, k2)] += coeffs[(r, c)];
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(g);
    // columns are contiguous: transform along k1 for each k2
    for col in grid.as_mut_slice().chunks_mut(g) {
        fft.process(col);
    }
    let mut t = grid.transpose();
    for col in t.as_mut_slice().chunks_mut(g) {
        fft.process(col);
    }
    t.transpose()
}

pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}
