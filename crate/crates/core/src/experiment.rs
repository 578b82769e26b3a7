//! Seeded batch experiments: synthesis vs. canonical-dual analysis recovery.
//!
//! Each trial draws its own sensing matrix and ground truth from streams of
//! the base seed (see [`crate::rng::child_seeds`]), so a batch reproduces
//! bit-for-bit regardless of how the worker pool schedules trials.
//!
//! Per trial:
//! 1. `y = Φ f` (plus noise when `eps > 0`);
//! 2. synthesis through the optimal-dual solver, and analysis with the
//!    canonical dual, on the same `y`;
//! 3. the optimal dual `D̃_o` from the synthesis solution;
//! 4. error metrics, objectives, s-term tails and top-k decay profiles of
//!    `D̄* f` and `D̃_o* f`.
//!
//! Failures inside a trial are recorded on that trial; the batch continues.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::{self, ContainerError};
use crate::diagnostics::{self, relative_error, s_term_tail, CoefficientSource};
use crate::frames::{self, Dictionary, DictionaryKind, FrameError};
use crate::sensing::{self, Sparsity};
use crate::solver::{self, SolverConfig};
use crate::{l1_norm, rng, CMatrix, C64};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("no trial records to write")]
    NoRecords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Gabor,
    SpikeFourier,
    /// Random Gaussian dictionary with unit-norm atoms, drawn from the base seed.
    Custom,
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gabor" => Ok(Self::Gabor),
            "spike_fourier" | "spike-fourier" => Ok(Self::SpikeFourier),
            "custom" => Ok(Self::Custom),
            other => Err(format!("unknown experiment kind {other:?}")),
        }
    }
}

/// Entry variance of the Gaussian sensing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiScaling {
    /// `N(0, 1)` entries.
    Unit,
    /// `N(0, 1/m)` entries.
    InverseM,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub m: usize,
    pub n: usize,
    /// Gabor: atoms per signal sample (`d = oversampling · n`).
    pub oversampling: usize,
    /// Gabor window standard deviation in samples.
    pub window_std: f64,
    /// Custom: number of atoms.
    pub atoms: usize,
    pub sparsity: Sparsity,
    pub eps: f64,
    pub phi_scaling: PhiScaling,
    pub solver: SolverConfig,
    pub trials: usize,
    pub seed: u64,
    /// Length of the stored decay profiles (capped at `d`).
    pub profile_len: usize,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Gabor setup: m = 32, n = 128, 30× oversampling, s = ⌈0.2 m⌉ = 7.
    pub fn gabor() -> Self {
        Self {
            kind: ExperimentKind::Gabor,
            m: 32,
            n: 128,
            oversampling: 30,
            window_std: frames::DEFAULT_WINDOW_STD,
            atoms: 0,
            sparsity: Sparsity::Total(7),
            eps: 0.0,
            phi_scaling: PhiScaling::Unit,
            solver: SolverConfig::default(),
            trials: 20,
            seed: 1,
            profile_len: 100,
            out: None,
        }
    }

    /// Spike–Fourier setup: m = 32, n = 128, 4 spikes + 4 sinusoids.
    pub fn spike_fourier() -> Self {
        Self {
            kind: ExperimentKind::SpikeFourier,
            oversampling: 0,
            window_std: 0.0,
            sparsity: Sparsity::PerBlock(vec![4, 4]),
            ..Self::gabor()
        }
    }

    /// Small random dictionary: m = 16, n = 32, d = 64, s = 4.
    pub fn custom() -> Self {
        Self {
            kind: ExperimentKind::Custom,
            m: 16,
            n: 32,
            oversampling: 0,
            window_std: 0.0,
            atoms: 64,
            sparsity: Sparsity::Total(4),
            ..Self::gabor()
        }
    }

    pub fn preset(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Gabor => Self::gabor(),
            ExperimentKind::SpikeFourier => Self::spike_fourier(),
            ExperimentKind::Custom => Self::custom(),
        }
    }

    /// Reads a TOML config, filling unspecified fields from the preset of
    /// its `kind` (or of `fallback` when the file has no `kind`).
    pub fn from_toml(text: &str, fallback: ExperimentKind) -> Result<Self, ExperimentError> {
        let bad = |e: String| ExperimentError::Invalid(e);
        let file: toml::Table = text.parse().map_err(|e: toml::de::Error| bad(e.to_string()))?;
        let kind = match file.get("kind") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| bad("kind must be a string".into()))?
                .parse()
                .map_err(bad)?,
            None => fallback,
        };
        let mut merged = toml::Table::try_from(Self::preset(kind)).map_err(|e| bad(e.to_string()))?;
        merge_tables(&mut merged, file);
        merged.try_into().map_err(|e: toml::de::Error| bad(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes to TOML")
    }

    fn phi_std(&self) -> f64 {
        match self.phi_scaling {
            PhiScaling::Unit => 1.0,
            PhiScaling::InverseM => 1.0 / (self.m as f64).sqrt(),
        }
    }

    pub fn build_dictionary(&self) -> Result<Dictionary, ExperimentError> {
        Ok(match self.kind {
            ExperimentKind::Gabor => frames::build_gabor_dictionary(self.n, self.oversampling, self.window_std)?,
            ExperimentKind::SpikeFourier => frames::build_spike_fourier_dictionary(self.n)?,
            ExperimentKind::Custom => {
                if self.atoms < self.n {
                    return Err(ExperimentError::Invalid(format!("custom dictionary needs atoms >= n, got {}", self.atoms)));
                }
                let mut r = rng::seeded(self.seed);
                let atoms = CMatrix::from_fn(self.n, self.atoms, |_, _| C64::new(StandardNormal.sample(&mut r), 0.0));
                Dictionary::from_matrix_normalized(atoms, DictionaryKind::Custom)?
            }
        })
    }

    /// Checks everything that does not depend on the random draws.
    pub fn validate(&self, dict: &Dictionary) -> Result<(), ExperimentError> {
        let invalid = |msg: String| Err(ExperimentError::Invalid(msg));
        if self.m == 0 || self.m > self.n {
            return invalid(format!("need 1 <= m <= n, got m = {}, n = {}", self.m, self.n));
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return invalid(format!("eps must be non-negative, got {}", self.eps));
        }
        if self.profile_len == 0 {
            return invalid("profile_len must be at least 1".into());
        }
        let s = self.sparsity.total();
        if s == 0 || s > dict.d() {
            return invalid(format!("sparsity {} out of range for d = {}", self.sparsity, dict.d()));
        }
        if let Sparsity::PerBlock(counts) = &self.sparsity {
            if !dict.d().is_multiple_of(counts.len()) || counts.iter().any(|&c| c > dict.d() / counts.len()) {
                return invalid(format!("sparsity {} does not fit {} equal blocks of d = {}", self.sparsity, counts.len(), dict.d()));
            }
        }
        self.solver.validate().map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        dict.frame_bounds()?;
        Ok(())
    }
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Quantities reported for one completed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub coherence: f64,
    /// `‖D x̂ − f‖ / ‖f‖` for the synthesis solution.
    pub synthesis_signal_error: f64,
    /// `‖f̂_a − f‖ / ‖f‖` for canonical-dual analysis.
    pub analysis_signal_error: f64,
    /// `‖x̂ − x‖ / ‖x‖`.
    pub synthesis_coefficient_error: f64,
    /// `‖x̂‖₁`.
    pub synthesis_objective: f64,
    /// `‖D̄* f̂_a‖₁`.
    pub analysis_objective: f64,
    /// `‖x‖₁` of the ground truth.
    pub truth_objective: f64,
    pub synthesis_converged: bool,
    pub analysis_converged: bool,
    pub synthesis_outer_iters: usize,
    pub analysis_outer_iters: usize,
    pub synthesis_residual: f64,
    pub analysis_residual: f64,
    /// `‖x̂ − (D̄* f + P ĝ)‖ / ‖x̂‖` with `f` the raw solver iterate.
    pub decomposition_gap: f64,
    pub max_null_leak: f64,
    /// `max |D D̃_o* − I|`.
    pub optimal_dual_error: f64,
    /// `‖D̄* f − (D̄* f)_s‖₁ / √s` on the ground truth.
    pub canonical_tail: f64,
    /// `‖D̃_o* f − (D̃_o* f)_s‖₁ / √s` on the ground truth.
    pub optimal_tail: f64,
    /// Largest magnitudes of `D̄* f`.
    pub profile_canonical: Vec<f64>,
    /// Largest magnitudes of `D̃_o* f`.
    pub profile_optimal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub phi_seed: u64,
    pub signal_seed: u64,
    pub noise_seed: u64,
    pub metrics: Option<TrialMetrics>,
    pub error: Option<String>,
    /// Wall-clock time; kept out of `trials.json` so reruns are byte-identical.
    #[serde(skip)]
    pub elapsed_ms: f64,
}

/// Median and quartiles of one metric over the completed trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub count: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self { count: v.len(), q1: q(0.25), median: q(0.5), q3: q(0.75) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    pub synthesis_converged: usize,
    pub metrics: BTreeMap<String, Quartiles>,
}

/// Scalar columns shared by `summary.csv` and the quartile summary.
pub const METRIC_COLUMNS: [&str; 11] = [
    "synthesis_signal_error",
    "analysis_signal_error",
    "synthesis_coefficient_error",
    "synthesis_objective",
    "analysis_objective",
    "synthesis_residual",
    "analysis_residual",
    "decomposition_gap",
    "optimal_dual_error",
    "canonical_tail",
    "optimal_tail",
];

impl TrialMetrics {
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "synthesis_signal_error" => self.synthesis_signal_error,
            "analysis_signal_error" => self.analysis_signal_error,
            "synthesis_coefficient_error" => self.synthesis_coefficient_error,
            "synthesis_objective" => self.synthesis_objective,
            "analysis_objective" => self.analysis_objective,
            "synthesis_residual" => self.synthesis_residual,
            "analysis_residual" => self.analysis_residual,
            "decomposition_gap" => self.decomposition_gap,
            "optimal_dual_error" => self.optimal_dual_error,
            "canonical_tail" => self.canonical_tail,
            "optimal_tail" => self.optimal_tail,
            _ => return None,
        })
    }
}

pub fn summarize(records: &[TrialRecord]) -> Summary {
    let done: Vec<&TrialMetrics> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let metrics = METRIC_COLUMNS
        .iter()
        .filter_map(|&name| {
            let values: Vec<f64> = done.iter().filter_map(|m| m.metric(name)).collect();
            Quartiles::of(&values).map(|q| (name.to_string(), q))
        })
        .collect();
    Summary {
        trials: records.len(),
        completed: done.len(),
        failed: records.len() - done.len(),
        synthesis_converged: done.iter().filter(|m| m.synthesis_converged).count(),
        metrics,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
    pub coherence: f64,
}

impl ExperimentOutput {
    pub fn all_completed(&self) -> bool {
        self.summary.failed == 0
    }
}

struct Shared<'a> {
    spec: &'a ExperimentSpec,
    dict: &'a Dictionary,
    canonical: &'a frames::DualFrame,
    coherence: f64,
}

fn run_trial(ctx: &Shared<'_>, trial: usize) -> TrialRecord {
    let [phi_seed, signal_seed, noise_seed] = rng::child_seeds::<3>(ctx.spec.seed, trial as u64);
    let start = Instant::now();
    let outcome = trial_metrics(ctx, phi_seed, signal_seed, noise_seed);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let (metrics, error) = match outcome {
        Ok(m) => (Some(m), None),
        Err(e) => {
            log::warn!("trial {trial} failed: {e}");
            (None, Some(e))
        }
    };
    TrialRecord { trial, phi_seed, signal_seed, noise_seed, metrics, error, elapsed_ms }
}

fn trial_metrics(ctx: &Shared<'_>, phi_seed: u64, signal_seed: u64, noise_seed: u64) -> Result<TrialMetrics, String> {
    let spec = ctx.spec;
    let dict = ctx.dict;
    let phi = sensing::gaussian_sensing_matrix_with_std(spec.m, spec.n, spec.phi_std(), phi_seed).map_err(|e| e.to_string())?;
    let truth = sensing::synthesize_sparse_signal(dict, &spec.sparsity, signal_seed).map_err(|e| e.to_string())?;
    let meas = sensing::measure(&phi, &truth.f, spec.eps, noise_seed).map_err(|e| e.to_string())?;

    let syn = solver::solve(&phi, dict, &meas.y, spec.eps, &spec.solver).map_err(|e| e.to_string())?;
    let ana = solver::solve_fixed_dual(&phi, ctx.canonical, &meas.y, spec.eps, &spec.solver).map_err(|e| e.to_string())?;
    let optimal = frames::optimal_dual_from_solution(dict, &syn.f_hat, &syn.p_g).map_err(|e| e.to_string())?;

    let err = |a: &[C64], b: &[C64]| relative_error(a, b).map_err(|e| e.to_string());
    let canon_truth = ctx.canonical.coefficients(&truth.f);
    let opt_truth = optimal.coefficients(&truth.f);
    let s = spec.sparsity.total();
    let root_s = (s as f64).sqrt();
    let k = spec.profile_len.min(dict.d());
    let profile = |v: &[C64], src| diagnostics::decay_profile(v, k, src).map(|p| p.magnitudes).map_err(|e| e.to_string());
    let tail = |v: &[C64]| s_term_tail(v, s).map(|t| t / root_s).map_err(|e| e.to_string());

    let split = ctx.canonical.coefficients(&syn.f_iterate) + &syn.p_g;
    let x_norm = syn.x_hat.norm();
    let decomposition_gap = if x_norm > 0.0 { (&syn.x_hat - split).norm() / x_norm } else { 0.0 };

    Ok(TrialMetrics {
        coherence: ctx.coherence,
        synthesis_signal_error: err(syn.f_hat.as_slice(), truth.f.as_slice())?,
        analysis_signal_error: err(ana.f_hat.as_slice(), truth.f.as_slice())?,
        synthesis_coefficient_error: err(syn.x_hat.as_slice(), truth.x.as_slice())?,
        synthesis_objective: syn.objective,
        analysis_objective: l1_norm(ctx.canonical.coefficients(&ana.f_hat).as_slice()),
        truth_objective: l1_norm(truth.x.as_slice()),
        synthesis_converged: syn.converged,
        analysis_converged: ana.converged,
        synthesis_outer_iters: syn.outer_iters,
        analysis_outer_iters: ana.outer_iters,
        synthesis_residual: syn.residual_trace.last().copied().unwrap_or(0.0),
        analysis_residual: ana.residual_trace.last().copied().unwrap_or(0.0),
        decomposition_gap,
        max_null_leak: syn.max_null_leak,
        optimal_dual_error: optimal.reconstruction_error(dict),
        canonical_tail: tail(canon_truth.as_slice())?,
        optimal_tail: tail(opt_truth.as_slice())?,
        profile_canonical: profile(canon_truth.as_slice(), CoefficientSource::CanonicalDual)?,
        profile_optimal: profile(opt_truth.as_slice(), CoefficientSource::OptimalDual)?,
    })
}

/// Runs every trial of `spec` and writes the outputs when `spec.out` is set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput, ExperimentError> {
    let dict = spec.build_dictionary()?;
    spec.validate(&dict)?;
    let coherence = frames::coherence(&dict)?;
    let canonical = frames::canonical_dual(&dict)?;
    log::info!(
        "{:?}: n = {}, d = {}, coherence {coherence:.4}, {} trials",
        spec.kind,
        dict.n(),
        dict.d(),
        spec.trials
    );
    let ctx = Shared { spec, dict: &dict, canonical: &canonical, coherence };
    let records: Vec<TrialRecord> = (0..spec.trials).into_par_iter().map(|t| run_trial(&ctx, t)).collect();
    let summary = summarize(&records);
    let output = ExperimentOutput { spec: spec.clone(), records, summary, coherence };
    if let Some(dir) = &spec.out {
        persist(&output, dir)?;
    }
    Ok(output)
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> ExperimentError + '_ {
    move |source| ContainerError::Csv { path: path.to_path_buf(), source }.into()
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> ExperimentError + '_ {
    move |source| ContainerError::Io { path: path.to_path_buf(), source }.into()
}

/// `summary.csv` (one row per trial) and `decay_<trial>.csv` (index,
/// canonical, optimal) for every completed trial. Returns the written paths.
pub fn emit_plot_data(records: &[TrialRecord], dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::NoRecords);
    }
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut written = Vec::new();

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_error(&path))?;
    let mut header = vec!["trial", "phi_seed", "signal_seed", "synthesis_converged"];
    header.extend(METRIC_COLUMNS);
    header.push("error");
    w.write_record(&header).map_err(csv_error(&path))?;
    for r in records {
        let mut row = vec![r.trial.to_string(), r.phi_seed.to_string(), r.signal_seed.to_string()];
        match &r.metrics {
            Some(m) => {
                row.push(m.synthesis_converged.to_string());
                row.extend(METRIC_COLUMNS.iter().map(|c| format!("{:e}", m.metric(c).unwrap_or(f64::NAN))));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 1 + METRIC_COLUMNS.len())),
        }
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_error(&path))?;
    }
    w.flush().map_err(io_error(&path))?;
    written.push(path);

    for r in records {
        let Some(m) = &r.metrics else { continue };
        let path = dir.join(format!("decay_{}.csv", r.trial));
        let mut w = csv::Writer::from_path(&path).map_err(csv_error(&path))?;
        w.write_record(["index", "canonical", "optimal"]).map_err(csv_error(&path))?;
        for (i, (c, o)) in m.profile_canonical.iter().zip(&m.profile_optimal).enumerate() {
            w.write_record(&[i.to_string(), format!("{c:e}"), format!("{o:e}")]).map_err(csv_error(&path))?;
        }
        w.flush().map_err(io_error(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `trials.json`, `aggregate.json`, `timing.csv`, `spec.toml` and the
/// CSVs of [`emit_plot_data`]. Output writing happens after all trials finish.
pub fn persist(output: &ExperimentOutput, dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    container::write_metadata(&dir.join("trials.json"), &output.records)?;
    container::write_metadata(&dir.join("aggregate.json"), &output.summary)?;
    let spec_path = dir.join("spec.toml");
    std::fs::write(&spec_path, output.spec.to_toml()).map_err(io_error(&spec_path))?;
    let path = dir.join("timing.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_error(&path))?;
    w.write_record(["trial", "elapsed_ms"]).map_err(csv_error(&path))?;
    for r in &output.records {
        w.write_record(&[r.trial.to_string(), format!("{:.3}", r.elapsed_ms)]).map_err(csv_error(&path))?;
    }
    w.flush().map_err(io_error(&path))?;
    emit_plot_data(&output.records, dir)?;
    Ok(())
}

/// Reads back `trials.json`.
pub fn load_records(path: &Path) -> Result<Vec<TrialRecord>, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|source| ContainerError::Json { path: path.to_path_buf(), source }.into())
}

/// Random real matrix helper for custom experiments and tests.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
}
