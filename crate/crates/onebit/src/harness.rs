//! Config-driven Monte-Carlo experiment runner: end-to-end trials
//! (generate signal → measure → quantize → corrupt → recover → score),
//! sweeps over `(m, β)` cells, and machine-readable CSV/JSON output.
//!
//! Every per-trial seed path is derived before dispatch, so the worker
//! count never changes results.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circulant::CirculantOperator;
use crate::error::{Error, Result};
use crate::quantize::{heavy_tail_check, measure_and_quantize, Adversary, ChannelConfig};
use crate::recover::{recover, Constraint, RecoverySpec, Solver};
use crate::rng::{
    sample_selectors, sample_sparse_unit, sample_vector, Distribution, Family, SeedTree,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    Fixed(f64),
    Auto { rho: f64, gamma1_hint: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalModel {
    /// Unit-norm s-sparse signal redrawn per trial: uniform support,
    /// spherical coefficients.
    RandomSparseUnit,
    /// Fixed signal loaded from a text file (one coordinate per line).
    Provided { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    ExactSparse,
    ApproxSparse,
}

fn default_constraint() -> ConstraintKind {
    ConstraintKind::ExactSparse
}

/// Mirrors the JSON config document field-for-field; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub s: usize,
    pub m_grid: Vec<usize>,
    pub beta_grid: Vec<f64>,
    pub noise: Distribution,
    pub xi_family: Distribution,
    pub lambda_rule: LambdaRule,
    pub adversary: Adversary,
    pub solver: Solver,
    pub trials_per_cell: usize,
    pub master_seed: u64,
    pub signal_model: SignalModel,
    /// Constraint set handed to the solver (defaults to exact-sparse).
    #[serde(default = "default_constraint")]
    pub constraint: ConstraintKind,
    /// Heavier-tailed noise must be opted into; the tail conditions are
    /// then audited by Monte Carlo before the sweep runs.
    #[serde(default)]
    pub allow_heavy_tail: bool,
    /// Draw the operator once per cell instead of once per trial, so many
    /// signals are tested against one fixed operator draw.
    #[serde(default)]
    pub fixed_operator: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if self.s == 0 || self.s > self.n {
            return Err(Error::InvalidParameter(format!(
                "s must satisfy 1 <= s <= n, got s={}, n={}",
                self.s, self.n
            )));
        }
        if self.m_grid.is_empty() {
            return Err(Error::InvalidParameter("m_grid must be nonempty".into()));
        }
        for &m in &self.m_grid {
            if m == 0 || m > self.n {
                return Err(Error::InvalidParameter(format!(
                    "every m in m_grid must satisfy 1 <= m <= n, got {m}"
                )));
            }
        }
        if self.beta_grid.is_empty() {
            return Err(Error::InvalidParameter("beta_grid must be nonempty".into()));
        }
        for &beta in &self.beta_grid {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidParameter(format!(
                    "every beta must lie in [0, 1), got {beta}"
                )));
            }
        }
        if self.trials_per_cell == 0 {
            return Err(Error::InvalidParameter("trials_per_cell must be at least 1".into()));
        }
        self.noise.validate()?;
        self.xi_family.validate()?;
        if let LambdaRule::Auto { rho, gamma1_hint } = self.lambda_rule {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::InvalidParameter(format!("auto rho must lie in (0,1), got {rho}")));
            }
            if !(gamma1_hint > 0.0) {
                return Err(Error::InvalidParameter("gamma1_hint must be positive".into()));
            }
        }
        if self.noise.family == Family::StudentT && !self.allow_heavy_tail {
            return Err(Error::InvalidParameter(
                "student_t noise requires allow_heavy_tail (the tail conditions are audited before running)".into(),
            ));
        }
        if matches!(self.solver, Solver::ClosedForm | Solver::MaximizePhi)
            && self.constraint == ConstraintKind::ApproxSparse
        {
            return Err(Error::InvalidParameter(format!(
                "{} requires the exact_sparse constraint",
                self.solver.name()
            )));
        }
        Ok(())
    }

    fn constraint(&self) -> Constraint {
        match self.constraint {
            ConstraintKind::ExactSparse => Constraint::ExactSparse { s: self.s },
            ConstraintKind::ApproxSparse => Constraint::ApproxSparse { s: self.s },
        }
    }

    /// Resolves λ for the configured noise law.
    pub fn lambda(&self) -> f64 {
        match self.lambda_rule {
            LambdaRule::Fixed(v) => v,
            LambdaRule::Auto { rho, gamma1_hint } => {
                auto_lambda_sigma(self.noise.centred_std(), rho, gamma1_hint)
            }
        }
    }
}

/// Dither level from the noise scale and a target failure level, with
/// the free constant set to 1:
/// `λ = γ₁ · max{σ, 1} · ln(e γ₁² max{σ, 1} / ρ)`.
pub fn auto_lambda_sigma(sigma: f64, rho_target: f64, gamma1_hint: f64) -> f64 {
    let s = sigma.max(1.0);
    gamma1_hint * s * (std::f64::consts::E * gamma1_hint * gamma1_hint * s / rho_target).ln()
}

/// [`auto_lambda_sigma`] with σ taken from the noise law's centred part.
pub fn auto_lambda(noise: &Distribution, rho_target: f64, gamma1_hint: f64) -> Result<f64> {
    if !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho_target must lie in (0,1), got {rho_target}"
        )));
    }
    noise.validate()?;
    Ok(auto_lambda_sigma(noise.centred_std(), rho_target, gamma1_hint))
}

/// One `(m, β)` grid cell with its resolved dither level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub m: usize,
    pub beta: f64,
    pub lambda: f64,
}

/// One row of the harness output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub s: usize,
    pub m: usize,
    pub beta: f64,
    pub noise_family: String,
    pub noise_mean: f64,
    pub noise_scale: f64,
    pub lambda: f64,
    pub adversary: String,
    pub solver: String,
    pub trial: usize,
    pub realized_m: usize,
    pub hamming_used: usize,
    pub error_l2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
    pub seed_path: String,
    /// Set when a provided signal violates `‖x‖₂ ≤ 1`.
    #[serde(default)]
    pub norm_warning: bool,
    /// Per-trial failure message; failures are data, not control flow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 18] = [
    "n", "s", "m", "beta", "noise_family", "noise_mean", "noise_scale", "lambda", "adversary",
    "solver", "trial", "realized_m", "hamming_used", "error_l2", "iterations", "converged",
    "wall_ms", "seed_path",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub m: usize,
    pub beta: f64,
    pub lambda: f64,
    pub trials: usize,
    pub failures: usize,
    pub median_error: f64,
    pub p90_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<CellAggregate>,
}

// Seed labels under the sweep root.
const SEED_OPERATOR: u64 = 0;
const SEED_SIGNAL: u64 = 1;
const SEED_CHANNEL: u64 = 2;
const SEED_CELL_BASE: u64 = 10;

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs one end-to-end trial. Component failures are captured in the
/// record's `failure` field with `error_l2 = NaN`.
pub fn run_trial(
    cfg: &ExperimentConfig,
    cell: Cell,
    trial: usize,
    trial_seed: &SeedTree,
    op_seed: &SeedTree,
    provided_signal: Option<&[f64]>,
) -> TrialRecord {
    let start = Instant::now();
    let mut record = TrialRecord {
        n: cfg.n,
        s: cfg.s,
        m: cell.m,
        beta: cell.beta,
        noise_family: cfg.noise.family.name().to_string(),
        noise_mean: cfg.noise.mean,
        noise_scale: cfg.noise.scale,
        lambda: cell.lambda,
        adversary: cfg.adversary.name().to_string(),
        solver: cfg.solver.name().to_string(),
        trial,
        realized_m: 0,
        hamming_used: 0,
        error_l2: f64::NAN,
        iterations: 0,
        converged: false,
        wall_ms: 0.0,
        seed_path: trial_seed.path_string(),
        norm_warning: false,
        failure: None,
    };

    let outcome = (|| -> Result<()> {
        let xi = sample_vector(&cfg.xi_family, cfg.n, &op_seed.child(0))?;
        let rows = sample_selectors(cfg.n, cell.m, &op_seed.child(1))?;
        let op = CirculantOperator::new(xi, rows, cell.m)?;
        record.realized_m = op.realized_m();

        let x = match provided_signal {
            Some(sig) => sig.to_vec(),
            None => sample_sparse_unit(cfg.n, cfg.s, &trial_seed.child(SEED_SIGNAL))?,
        };
        if l2_norm(&x) > 1.0 + 1e-12 {
            record.norm_warning = true;
        }

        let channel = ChannelConfig {
            noise: cfg.noise,
            lambda: cell.lambda,
            beta: cell.beta,
            adversary: cfg.adversary,
        };
        let sample = measure_and_quantize(&x, &op, &channel, &trial_seed.child(SEED_CHANNEL))?;
        record.hamming_used = sample.hamming_distance();
        assert!(record.hamming_used <= channel.budget(op.m_nominal()));

        let spec = RecoverySpec::new(cfg.constraint(), cell.lambda, cfg.solver);
        let result = recover(&sample, &op, &spec)?;
        record.iterations = result.iterations;
        record.converged = result.converged;
        record.error_l2 = result
            .x
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok(())
    })();
    if let Err(e) = outcome {
        record.failure = Some(e.to_string());
    }
    record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    record
}

fn load_signal(path: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("reading {path}: {e}"))?;
    let values: std::result::Result<Vec<f64>, String> = text
        .split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|e| format!("parsing {path}: {e}")))
        .collect();
    let values = values?;
    if values.len() != n {
        return Err(format!("signal in {path} has {} entries, expected {n}", values.len()));
    }
    Ok(values)
}

fn percentile_of_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    // Nearest-rank.
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn aggregate(cells: &[Cell], records: &[TrialRecord]) -> Vec<CellAggregate> {
    cells
        .iter()
        .map(|cell| {
            let mut errors: Vec<f64> = records
                .iter()
                .filter(|r| r.m == cell.m && r.beta == cell.beta && r.failure.is_none())
                .map(|r| r.error_l2)
                .collect();
            errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let trials = records
                .iter()
                .filter(|r| r.m == cell.m && r.beta == cell.beta)
                .count();
            CellAggregate {
                m: cell.m,
                beta: cell.beta,
                lambda: cell.lambda,
                trials,
                failures: trials - errors.len(),
                median_error: percentile_of_sorted(&errors, 0.5),
                p90_error: percentile_of_sorted(&errors, 0.9),
            }
        })
        .collect()
}

/// Worker count: explicit override, else `ONEBIT_WORKERS`, else rayon's
/// default. Results are identical regardless, by the seed-path contract.
pub fn worker_count(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| {
        std::env::var("ONEBIT_WORKERS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&w| w > 0)
    })
}

/// Executes the full grid. Output ordering is canonical: cells in grid
/// order (`m_grid` outer, `beta_grid` inner), trials ascending.
pub fn run_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepResult> {
    cfg.validate()?;
    let root = SeedTree::new(cfg.master_seed);

    if cfg.noise.family == Family::StudentT {
        let lambda = cfg.lambda();
        let rho = match cfg.lambda_rule {
            LambdaRule::Auto { rho, .. } => rho,
            LambdaRule::Fixed(_) => 0.5,
        };
        let check = heavy_tail_check(&cfg.noise, lambda, rho, 200_000, &root.child(9))?;
        if !check.ok {
            return Err(Error::InvalidParameter(format!(
                "heavier-tailed noise fails the tail conditions at lambda={lambda}: {check:?}"
            )));
        }
    }

    let provided = match &cfg.signal_model {
        SignalModel::Provided { path } => {
            Some(load_signal(path, cfg.n).map_err(Error::InvalidParameter)?)
        }
        SignalModel::RandomSparseUnit => None,
    };

    let lambda = cfg.lambda();
    let cells: Vec<Cell> = cfg
        .m_grid
        .iter()
        .flat_map(|&m| cfg.beta_grid.iter().map(move |&beta| Cell { m, beta, lambda }))
        .collect();

    // Pre-derive every seed before dispatch.
    let mut jobs: Vec<(usize, Cell, usize, SeedTree, SeedTree)> = Vec::new();
    for (ci, &cell) in cells.iter().enumerate() {
        let cell_seed = root.child(SEED_CELL_BASE + ci as u64);
        for t in 0..cfg.trials_per_cell {
            let trial_seed = cell_seed.child(t as u64);
            let op_seed = if cfg.fixed_operator {
                cell_seed.child(SEED_OPERATOR)
            } else {
                trial_seed.child(SEED_OPERATOR)
            };
            jobs.push((ci, cell, t, trial_seed, op_seed));
        }
    }

    let run_all = || -> Vec<(usize, TrialRecord)> {
        jobs.par_iter()
            .map(|(ci, cell, t, trial_seed, op_seed)| {
                (*ci, run_trial(cfg, *cell, *t, trial_seed, op_seed, provided.as_deref()))
            })
            .collect()
    };
    let mut indexed: Vec<(usize, TrialRecord)> = match worker_count(workers) {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(run_all),
        None => run_all(),
    };
    indexed.sort_by_key(|(ci, r)| (*ci, r.trial));
    let records: Vec<TrialRecord> = indexed.into_iter().map(|(_, r)| r).collect();
    let aggregates = aggregate(&cells, &records);
    Ok(SweepResult { records, aggregates })
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        // Shortest round-trip representation keeps the CSV canonical.
        format!("{v}")
    }
}

/// Writes records as CSV in the fixed column order.
pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.s.to_string(),
            r.m.to_string(),
            fmt_f64(r.beta),
            r.noise_family.clone(),
            fmt_f64(r.noise_mean),
            fmt_f64(r.noise_scale),
            fmt_f64(r.lambda),
            r.adversary.clone(),
            r.solver.clone(),
            r.trial.to_string(),
            r.realized_m.to_string(),
            r.hamming_used.to_string(),
            fmt_f64(r.error_l2),
            r.iterations.to_string(),
            r.converged.to_string(),
            fmt_f64(r.wall_ms),
            r.seed_path.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
