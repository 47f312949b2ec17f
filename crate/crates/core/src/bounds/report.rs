use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chain::CoefficientChain;
use super::envelope::{envelope, BoundTable};
use super::lipschitz_padding;
use super::regions::{product_lower, product_upper, FarRegionReport, NearRegionReport};
use super::sums::HTable;
use super::sweep::{normalized_derivatives, KernelBounds};
use super::{BoundsConfig, NEAR_RADIUS, TAU_MIN, THEOREM_FC};
use crate::error::{param, Result};
use crate::kernel::KernelSpec;

/// Right end (units of `λ_c`) of the diagonal 2-D kernel curves.
const DIAGONAL_END: f64 = 0.4;

/// H table resolution on `[0, τ_min]`.
const H_SAMPLES: usize = 85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// A computed bound next to the published value it should reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub relation: Relation,
    /// `value` is no worse than `target` loosened by `|target| (slack − 1)`.
    pub within_slack: bool,
}

impl Constant {
    pub fn new(name: &str, value: f64, target: f64, relation: Relation, slack: f64) -> Self {
        let margin = target.abs() * (slack - 1.0);
        let within_slack = match relation {
            Relation::AtMost => value <= target + margin,
            Relation::AtLeast => value >= target - margin,
        };
        Self {
            name: name.to_string(),
            value,
            target,
            relation,
            within_slack,
        }
    }
}

/// Everything computed by a bounds run, serializable as the certification
/// report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub f_c: usize,
    pub gamma: [f64; 3],
    pub sub_cutoffs: [usize; 3],
    pub eps: f64,
    pub slack: f64,
    pub theorem_scale: bool,
    pub tau_min: f64,
    pub near_radius: f64,
    pub sup_norms: [f64; 4],
    pub k2_origin: f64,
    pub h_origin: [f64; 4],
    pub h_half: [f64; 4],
    pub c_tilde: [f64; 4],
    pub h_table: HTable,
    pub near_monotone: bool,
    pub chain: CoefficientChain,
    pub near: NearRegionReport,
    pub far: FarRegionReport,
    pub constants: Vec<Constant>,
    /// All constants within slack of their published values.
    pub reproduces_published: bool,
    /// Chain valid, near region certified, mid band and outer annulus below one.
    pub certified: bool,
}

impl BoundsReport {
    pub fn constant(&self, name: &str) -> Option<&Constant> {
        self.constants.iter().find(|c| c.name == name)
    }
}

fn constants(chain: &CoefficientChain, near: &NearRegionReport, far: &FarRegionReport, slack: f64) -> Vec<Constant> {
    use Relation::{AtLeast, AtMost};
    let c = |name, value, target, rel| Constant::new(name, value, target, rel, slack);
    vec![
        c("i_minus_e00", chain.i_minus_e00, 3.17e-2, AtMost),
        c("e10", chain.e10, 8.7e-2, AtMost),
        c("e11", chain.e11, 0.181, AtMost),
        c("e20_offdiag", chain.e20_offdiag, 0.583, AtMost),
        c("e02_inv", chain.e02_inv, 0.251, AtMost),
        c("s1_offdiag", chain.s1_offdiag, 0.591, AtMost),
        c("s1_inv", chain.s1_inv, 0.251, AtMost),
        c("s2", chain.s2, 9.1e-2, AtMost),
        c("i_minus_s3", chain.i_minus_s3, 3.6e-2, AtMost),
        c("s3_inv", chain.s3_inv, 1.037, AtMost),
        c("alpha_inf", chain.alpha_inf, 1.037, AtMost),
        c("beta_inf", chain.beta_inf, 2.4e-2, AtMost),
        c("alpha1_lower", chain.alpha1_lower, 1.0 - 3.7e-2, AtLeast),
        c("k2d_min", near.k2d_min, 0.8, AtLeast),
        c("k20_max", near.k20_max, -3.1, AtMost),
        c("q20_max", near.q20_max, -1.4809, AtMost),
        c("q11_abs", near.q11_abs, 1.4743, AtMost),
        c("q_min", near.q_min, 0.393, AtLeast),
        c("k2d_far_max", far.k2d_far_max, 0.152, AtMost),
        c("k01_far_max", far.k01_far_max, 0.825, AtMost),
        c("z00_inf", far.z00_inf, 0.66, AtMost),
        c("z10_inf", far.z10_inf, 2.2919, AtMost),
        c("far_max_q", far.far_max_q, 0.9866, AtMost),
    ]
}

/// Report plus the figure data, ready to be written out.
#[derive(Debug, Clone)]
pub struct BoundsRun {
    pub report: BoundsReport,
    /// `(file name, CSV contents)`.
    pub curves: Vec<(String, String)>,
}

impl BoundsRun {
    pub fn compute(spec: &KernelSpec, config: &BoundsConfig) -> Result<Self> {
        if config.curve_samples < 2 {
            return param("figure curves need at least two samples");
        }
        if !(config.slack >= 1.0) {
            return param(format!("slack must be at least 1, got {}", config.slack));
        }
        let kb = KernelBounds::new(spec, config.eps)?;
        let chain = CoefficientChain::from_bounds(&kb);
        let near = NearRegionReport::compute(&kb, &chain, NEAR_RADIUS)?;
        let far = FarRegionReport::compute(&kb, &chain, NEAR_RADIUS, config.mid_band_intervals)?;
        let h_table = HTable::new(&kb, H_SAMPLES)?;
        let constants = constants(&chain, &near, &far, config.slack);

        let curves = vec![
            ("kernel_bounds.csv".to_string(), kernel_curve_csv(spec, config)?),
            ("k2d_bounds.csv".to_string(), diagonal_curve_csv(spec, config)),
            ("z_bounds_low.csv".to_string(), z_curve_csv(&kb, config, &[(0, 0), (1, 0), (1, 1)])?),
            ("z_bounds_high.csv".to_string(), z_curve_csv(&kb, config, &[(2, 0), (2, 1), (3, 0)])?),
            ("mid_band_bound.csv".to_string(), mid_band_csv(&far)),
        ];

        let report = BoundsReport {
            f_c: spec.f_c(),
            gamma: spec.gamma(),
            sub_cutoffs: spec.sub_cutoffs(),
            eps: config.eps,
            slack: config.slack,
            theorem_scale: spec.f_c() >= THEOREM_FC,
            tau_min: TAU_MIN,
            near_radius: NEAR_RADIUS,
            sup_norms: kb.sup_norms(),
            k2_origin: kb.k2_origin(),
            h_origin: kb.h_origin(),
            h_half: kb.h_half(),
            c_tilde: kb.c_tilde(),
            near_monotone: near.monotone.iter().all(|m| m.is_monotone()),
            reproduces_published: constants.iter().all(|c| c.within_slack),
            certified: chain.valid && near.certified && far.certified,
            h_table,
            chain,
            near,
            far,
            constants,
        };
        Ok(Self { report, curves })
    }

    /// Writes `bounds_report.json` and every curve into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bounds_report.json"), serde_json::to_string_pretty(&self.report)?)?;
        for (name, body) in &self.curves {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// Splits a table into `bins` consecutive runs and keeps the extreme lower and
/// upper value of each, so the decimated curve still encloses the full one.
fn binned(table: &BoundTable, bins: usize) -> Vec<(f64, f64, f64, f64)> {
    let n = table.len();
    let bins = bins.clamp(1, n);
    (0..bins)
        .map(|b| {
            let lo = b * n / bins;
            let hi = ((b + 1) * n / bins).max(lo + 1);
            let l = table.lower()[lo..hi].iter().copied().fold(f64::INFINITY, f64::min);
            let u = table.upper()[lo..hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (table.tau()[lo], table.tau()[hi - 1], l, u)
        })
        .collect()
}

fn kernel_curve_csv(spec: &KernelSpec, config: &BoundsConfig) -> Result<String> {
    let domain = (0.0, 0.5 * TAU_MIN);
    let tables = (0..4)
        .map(|l| envelope(spec, l, domain, config.eps))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<_> = tables.iter().map(|t| binned(t, config.curve_samples)).collect();
    let mut out = String::from("t_lo_over_lambda_c,t_hi_over_lambda_c");
    for l in 0..4 {
        let _ = write!(out, ",k{l}_over_fc{l}_lower,k{l}_over_fc{l}_upper");
    }
    out.push('\n');
    for j in 0..rows[0].len() {
        let _ = write!(out, "{},{}", rows[0][j].0, rows[0][j].1);
        for r in &rows {
            let _ = write!(out, ",{},{}", r[j].2, r[j].3);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Pointwise envelopes `(lower, upper)` of all four orders at `τ`.
fn pointwise(spec: &KernelSpec, tau: f64, eps: f64) -> [(f64, f64); 4] {
    let v = normalized_derivatives(spec, tau);
    std::array::from_fn(|l| (v[l] - lipschitz_padding(l, eps), v[l] + lipschitz_padding(l, eps)))
}

fn diagonal_curve_csv(spec: &KernelSpec, config: &BoundsConfig) -> String {
    const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (3, 0)];
    let mut out = String::from("t_over_lambda_c");
    for (i1, i2) in PAIRS {
        let _ = write!(out, ",k{i1}{i2}_over_fc{}_lower,k{i1}{i2}_over_fc{}_upper", i1 + i2, i1 + i2);
    }
    out.push('\n');
    let n = config.curve_samples;
    for j in 0..n {
        let tau = DIAGONAL_END * j as f64 / (n - 1) as f64;
        let e = pointwise(spec, tau, config.eps);
        let _ = write!(out, "{tau}");
        for (i1, i2) in PAIRS {
            let _ = write!(out, ",{},{}", product_lower(e[i1], e[i2]), product_upper(e[i1], e[i2]));
        }
        out.push('\n');
    }
    out
}

fn z_curve_csv(kb: &KernelBounds, config: &BoundsConfig, pairs: &[(usize, usize)]) -> Result<String> {
    let mut out = String::from("norm_t_over_lambda_c");
    for (i1, i2) in pairs {
        let _ = write!(out, ",z{i1}{i2}_over_fc{}", i1 + i2);
    }
    out.push('\n');
    let n = config.curve_samples;
    for j in 0..n {
        let u = 0.5 * TAU_MIN * j as f64 / (n - 1) as f64;
        let z = kb.z_all(u)?;
        let _ = write!(out, "{u}");
        for &(i1, i2) in pairs {
            let _ = write!(out, ",{}", z[i1][i2]);
        }
        out.push('\n');
    }
    Ok(out)
}

fn mid_band_csv(far: &FarRegionReport) -> String {
    let mut out = String::from("norm_t_lo_over_lambda_c,norm_t_hi_over_lambda_c,q_abs_bound\n");
    for p in &far.mid_band {
        let _ = writeln!(out, "{},{},{}", p.u_lo, p.u_hi, p.bound);
    }
    out
}

/// Full bounds run.
pub fn run_bounds(spec: &KernelSpec, config: &BoundsConfig) -> Result<BoundsRun> {
    BoundsRun::compute(spec, config)
}
