//! Seeded experiments: random source models, the recovery pipeline and the
//! phase-transition sweep.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::localize::{localize, score, PeakOptions, RecoveredSupport, Score, MATCH_RADIUS};
use crate::measurement::{forward, min_separation, SourceModel};
use crate::sdp::{build_problem, check_duality, solve, DualityReport, SdpSolution, SolverOptions};

/// Rejection-sampling budget per support.
pub const MAX_REJECTIONS: usize = 100_000;

/// Distribution of the source amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeModel {
    /// `(0.5 + χ²(1)) e^{j2πU}`, with `χ²(1)` the square of a standard normal.
    PaperChisq,
    /// `e^{j2πU}`.
    Unit,
}

/// Settings shared by the experiment subcommands. Separations are in units
/// of `λ_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Cut-off frequency; each subcommand has its own default.
    pub f_c: Option<usize>,
    /// Number of sources for single-instance commands.
    pub r: usize,
    /// Source counts swept by the phase transition.
    pub r_values: Vec<usize>,
    /// Separation of single-instance commands.
    pub separation: f64,
    pub amplitude_model: AmplitudeModel,
    pub delta_min_sweep: Vec<f64>,
    pub trials: usize,
    pub solver: SolverOptions,
    pub peaks: PeakOptions,
    pub match_radius: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            f_c: None,
            r: 3,
            r_values: (1..=6).collect(),
            separation: 1.8,
            amplitude_model: AmplitudeModel::PaperChisq,
            delta_min_sweep: (0..7).map(|i| (5 + 3 * i) as f64 / 10.0).collect(),
            trials: 10,
            solver: SolverOptions::default(),
            peaks: PeakOptions::default(),
            match_radius: MATCH_RADIUS,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return param("trials must be at least 1");
        }
        if self.r == 0 || self.r_values.iter().any(|&r| r == 0) {
            return param("source counts must be positive");
        }
        if self.delta_min_sweep.iter().any(|d| !(*d > 0.0)) || !(self.separation > 0.0) {
            return param("separations must be positive");
        }
        if !(self.match_radius > 0.0) {
            return param("match radius must be positive");
        }
        if matches!(self.f_c, Some(0)) {
            return param("cut-off frequency must be at least 1");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Generator for trial `trial` of sweep cell `cell`: the master seed with a
/// dedicated ChaCha stream.
pub fn trial_rng(seed: u64, cell: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((cell << 32) | trial);
    rng
}

/// Uniform points conditioned on `min_separation ≥ min_sep` (unit-period
/// units); `None` after [`MAX_REJECTIONS`] draws.
pub fn sample_support<R: Rng>(rng: &mut R, r: usize, min_sep: f64) -> Option<Vec<[f64; 2]>> {
    for _ in 0..MAX_REJECTIONS {
        let pts: Vec<[f64; 2]> = (0..r).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        if min_separation(&pts) >= min_sep {
            return Some(pts);
        }
    }
    None
}

pub fn sample_amplitudes<R: Rng>(rng: &mut R, r: usize, model: AmplitudeModel) -> Vec<Complex64> {
    (0..r)
        .map(|_| {
            let modulus = match model {
                AmplitudeModel::PaperChisq => {
                    let g: f64 = rng.sample(StandardNormal);
                    0.5 + g * g
                }
                AmplitudeModel::Unit => 1.0,
            };
            Complex64::from_polar(modulus, std::f64::consts::TAU * rng.random::<f64>())
        })
        .collect()
}

/// Unit-modulus signs with uniform phase.
pub fn sample_signs<R: Rng>(rng: &mut R, r: usize) -> Vec<Complex64> {
    sample_amplitudes(rng, r, AmplitudeModel::Unit)
}

/// A random model with separation `delta` (units of `λ_c`).
pub fn random_model<R: Rng>(
    rng: &mut R,
    f_c: usize,
    r: usize,
    delta: f64,
    model: AmplitudeModel,
) -> Result<Option<SourceModel>> {
    let Some(support) = sample_support(rng, r, delta / f_c as f64) else {
        return Ok(None);
    };
    let d = sample_amplitudes(rng, r, model);
    Ok(Some(SourceModel::from_parts(&support, &d)?))
}

/// Result of forward → solve → localize → score.
#[derive(Debug, Clone)]
pub struct RecoveryOutcome {
    pub solution: SdpSolution,
    pub support: RecoveredSupport,
    pub score: Score,
    pub duality: DualityReport,
}

pub fn recover(
    model: &SourceModel,
    f_c: usize,
    solver: &SolverOptions,
    peaks: &PeakOptions,
    match_radius: f64,
) -> Result<RecoveryOutcome> {
    let y = forward(model, f_c)?;
    let solution = solve(&build_problem(&y), solver)?;
    let support = localize(&y, &solution.c, peaks)?;
    let score = score(model, &support, f_c, match_radius);
    let duality = check_duality(&solution, model)?;
    Ok(RecoveryOutcome { solution, support, score, duality })
}

/// One phase-transition trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub r: usize,
    pub delta: f64,
    pub trial: usize,
    pub success: bool,
    pub matched: bool,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub tv_norm: f64,
    pub min_separation: f64,
    pub peaks: usize,
}

/// Success rates per `(r, Δ)`; `None` marks cells where some support could
/// not be generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransition {
    pub f_c: usize,
    pub seed: u64,
    pub trials: usize,
    pub r_values: Vec<usize>,
    pub deltas: Vec<f64>,
    pub rates: Vec<Vec<Option<f64>>>,
    /// Per row, the separation where the rate first rises through 1/2.
    pub row_midpoints: Vec<Option<f64>>,
    /// Mean of the row midpoints.
    pub midpoint: Option<f64>,
    pub non_converged: usize,
    pub records: Vec<TrialRecord>,
}

/// Linear interpolation of the first upward crossing of 1/2 between
/// consecutive available cells.
fn row_midpoint(deltas: &[f64], rates: &[Option<f64>]) -> Option<f64> {
    let cells: Vec<(f64, f64)> = deltas
        .iter()
        .zip(rates)
        .filter_map(|(d, r)| r.map(|r| (*d, r)))
        .collect();
    cells.windows(2).find_map(|w| {
        let ((d0, r0), (d1, r1)) = (w[0], w[1]);
        (r0 < 0.5 && r1 >= 0.5).then(|| d0 + (0.5 - r0) / (r1 - r0) * (d1 - d0))
    })
}

pub fn phase_transition(config: &ExperimentConfig, f_c: usize) -> Result<PhaseTransition> {
    config.validate()?;
    let deltas = config.delta_min_sweep.clone();
    let mut rates = Vec::with_capacity(config.r_values.len());
    let mut records = Vec::new();
    for (ri, &r) in config.r_values.iter().enumerate() {
        let mut row = Vec::with_capacity(deltas.len());
        for (di, &delta) in deltas.iter().enumerate() {
            let cell = (ri * deltas.len() + di) as u64;
            let models = (0..config.trials)
                .map(|t| {
                    let mut rng = trial_rng(config.seed, cell, t as u64);
                    random_model(&mut rng, f_c, r, delta, config.amplitude_model)
                })
                .collect::<Result<Option<Vec<SourceModel>>>>()?;
            let Some(models) = models else {
                row.push(None);
                continue;
            };
            let cell_records = models
                .par_iter()
                .enumerate()
                .map(|(t, m)| {
                    let out = recover(m, f_c, &config.solver, &config.peaks, config.match_radius)?;
                    Ok(TrialRecord {
                        r,
                        delta,
                        trial: t,
                        success: out.score.success,
                        matched: out.score.matched,
                        converged: out.solution.converged,
                        iterations: out.solution.iterations,
                        objective: out.solution.objective,
                        tv_norm: m.tv_norm(),
                        min_separation: m.min_separation() * f_c as f64,
                        peaks: out.support.peaks.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let wins = cell_records.iter().filter(|t| t.success).count();
            row.push(Some(wins as f64 / config.trials as f64));
            records.extend(cell_records);
        }
        rates.push(row);
    }
    let row_midpoints: Vec<Option<f64>> = rates.iter().map(|row| row_midpoint(&deltas, row)).collect();
    let found: Vec<f64> = row_midpoints.iter().flatten().copied().collect();
    let midpoint = (!found.is_empty()).then(|| found.iter().sum::<f64>() / found.len() as f64);
    Ok(PhaseTransition {
        f_c,
        seed: config.seed,
        trials: config.trials,
        r_values: config.r_values.clone(),
        deltas,
        rates,
        row_midpoints,
        midpoint,
        non_converged: records.iter().filter(|t| !t.converged).count(),
        records,
    })
}

impl PhaseTransition {
    /// Rows `r`, columns `Δ_min / λ_c`; `NA` marks unavailable cells.
    pub fn rates_csv(&self) -> String {
        let mut out = String::from("r");
        for d in &self.deltas {
            let _ = write!(out, ",delta_over_lambda_c={d}");
        }
        out.push('\n');
        for (r, row) in self.r_values.iter().zip(&self.rates) {
            let _ = write!(out, "{r}");
            for v in row {
                match v {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn trials_csv(&self) -> String {
        let mut out = String::from(
            "r,delta_over_lambda_c,trial,success,matched,converged,iterations,objective,tv_norm,min_separation_over_lambda_c,peaks\n",
        );
        for t in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                t.r,
                t.delta,
                t.trial,
                t.success,
                t.matched,
                t.converged,
                t.iterations,
                t.objective,
                t.tv_norm,
                t.min_separation,
                t.peaks
            );
        }
        out
    }

    /// Writes `phase_transition.csv`, `phase_transition_trials.csv` and
    /// `phase_transition.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("phase_transition.csv"), self.rates_csv())?;
        std::fs::write(dir.join("phase_transition_trials.csv"), self.trials_csv())?;
        std::fs::write(dir.join("phase_transition.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
