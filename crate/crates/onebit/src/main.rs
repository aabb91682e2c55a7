//! CLI for the one-bit compressed sensing harness.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on I/O errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use onebit::circulant::CirculantOperator;
use onebit::diagnostics::{
    certify_growth_on_images, certify_isomorphism, sparse_operator_norm, DEFAULT_SLACK,
};
use onebit::harness::{run_sweep, run_trial, write_csv, Cell, ExperimentConfig};
use onebit::recover::{recover, Constraint, RecoverySpec, Solver};
use onebit::rng::{sample_vector, Distribution, SeedTree};

#[derive(Parser)]
#[command(name = "onebit", about = "One-bit compressed sensing simulation harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial and print its record as JSON.
    Simulate {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Measurement count; defaults to the first entry of m_grid.
        #[arg(long)]
        m: Option<usize>,
        /// Corruption fraction; defaults to the first entry of beta_grid.
        #[arg(long)]
        beta: Option<f64>,
        /// Trial index within the cell.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run the full (m, beta) grid and write CSV records plus a JSON summary.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for sweep.csv and summary.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Worker threads (overrides ONEBIT_WORKERS; results are identical).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Growth/isomorphism/operator-norm reports for a generator draw.
    Diagnose {
        #[arg(long)]
        n: usize,
        /// Probe sparsity.
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value_t = XiFamily::Gaussian)]
        xi_family: XiFamily,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Nominal measurement count for the subsampled norm estimate.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Recover a signal from a signs file and an operator description.
    Recover {
        /// Operator JSON: {"n", "m_nominal", "generator": [...], "selected": [...]}.
        #[arg(long)]
        operator: PathBuf,
        /// Text file of observed signs (+1/-1, whitespace separated).
        #[arg(long)]
        signs: PathBuf,
        #[arg(long)]
        sparsity: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = SolverArg::ClosedForm)]
        solver: SolverArg,
        /// Use the approximately-sparse constraint set √s·B1 ∩ B2.
        #[arg(long)]
        approx: bool,
        /// Output path for x# (one coordinate per line); stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum XiFamily {
    Gaussian,
    Rademacher,
    UniformPm,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    ClosedForm,
    MaximizePhi,
    LassoPg,
}

impl From<SolverArg> for Solver {
    fn from(v: SolverArg) -> Solver {
        match v {
            SolverArg::ClosedForm => Solver::ClosedForm,
            SolverArg::MaximizePhi => Solver::MaximizePhi,
            SolverArg::LassoPg => Solver::LassoPg,
        }
    }
}

enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Io(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) => m,
        }
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("parsing {}: {e}", path.display())))?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Simulate { config, m, beta, trial } => {
            let cfg = load_config(&config)?;
            let m = m.unwrap_or(cfg.m_grid[0]);
            let beta = beta.unwrap_or(cfg.beta_grid[0]);
            if m == 0 || m > cfg.n {
                return Err(CliError::Config(format!("m must satisfy 1 <= m <= n, got {m}")));
            }
            if !(0.0..1.0).contains(&beta) {
                return Err(CliError::Config(format!("beta must lie in [0,1), got {beta}")));
            }
            let cell = Cell { m, beta, lambda: cfg.lambda() };
            let root = SeedTree::new(cfg.master_seed);
            let trial_seed = root.child(10).child(trial as u64);
            let op_seed = trial_seed.child(0);
            let record = run_trial(&cfg, cell, trial, &trial_seed, &op_seed, None);
            println!("{}", serde_json::to_string_pretty(&record).expect("serializable record"));
            Ok(())
        }
        Command::Sweep { config, out_dir, workers } => {
            let cfg = load_config(&config)?;
            let result = run_sweep(&cfg, workers).map_err(|e| CliError::Config(e.to_string()))?;
            fs::create_dir_all(&out_dir)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", out_dir.display())))?;
            let csv_path = out_dir.join("sweep.csv");
            let file = fs::File::create(&csv_path)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", csv_path.display())))?;
            write_csv(&result.records, file)
                .map_err(|e| CliError::Io(format!("writing {}: {e}", csv_path.display())))?;
            let summary_path = out_dir.join("summary.json");
            let summary = serde_json::json!({
                "config": cfg,
                "aggregates": result.aggregates,
            });
            fs::write(&summary_path, serde_json::to_string_pretty(&summary).expect("serializable"))
                .map_err(|e| CliError::Io(format!("writing {}: {e}", summary_path.display())))?;
            eprintln!(
                "wrote {} records to {} and {} cell aggregates to {}",
                result.records.len(),
                csv_path.display(),
                result.aggregates.len(),
                summary_path.display()
            );
            Ok(())
        }
        Command::Diagnose { n, r, xi_family, seed, m, trials } => {
            if r == 0 || r > n {
                return Err(CliError::Config(format!("r must satisfy 1 <= r <= n, got {r}")));
            }
            let dist = match xi_family {
                XiFamily::Gaussian => Distribution::gaussian(0.0, 1.0),
                XiFamily::Rademacher => Distribution::rademacher(0.0, 1.0),
                XiFamily::UniformPm => Distribution::uniform_pm(0.0, 1.0),
            };
            let root = SeedTree::new(seed);
            let xi = sample_vector(&dist, n, &root.child(0))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let m_nominal = m.unwrap_or(n);
            let selected = match m {
                Some(mm) => onebit::rng::sample_selectors(n, mm, &root.child(1))
                    .map_err(|e| CliError::Config(e.to_string()))?,
                None => (0..n).collect(),
            };
            let op = CirculantOperator::new(xi, selected, m_nominal)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let growth = certify_growth_on_images(&op, r, trials, &root.child(2), DEFAULT_SLACK)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let isomorphism = certify_isomorphism(&op, r, trials, &root.child(3))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let norm = sparse_operator_norm(&op, r, trials, &root.child(4))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let report = serde_json::json!({
                "n": n,
                "r": r,
                "m_nominal": m_nominal,
                "realized_m": op.realized_m(),
                "seed": seed,
                "growth": growth,
                "isomorphism": isomorphism,
                "sparse_operator_norm": norm,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable report"));
            Ok(())
        }
        Command::Recover { operator, signs, sparsity, lambda, solver, approx, out } => {
            #[derive(serde::Deserialize)]
            #[serde(deny_unknown_fields)]
            struct OperatorSpec {
                n: usize,
                m_nominal: usize,
                generator: Vec<f64>,
                selected: Vec<usize>,
            }
            let text = fs::read_to_string(&operator)
                .map_err(|e| CliError::Io(format!("reading {}: {e}", operator.display())))?;
            let spec: OperatorSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("parsing {}: {e}", operator.display())))?;
            if spec.generator.len() != spec.n {
                return Err(CliError::Config(format!(
                    "generator has {} entries, expected n={}",
                    spec.generator.len(),
                    spec.n
                )));
            }
            let op = CirculantOperator::new(spec.generator, spec.selected, spec.m_nominal)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let signs_text = fs::read_to_string(&signs)
                .map_err(|e| CliError::Io(format!("reading {}: {e}", signs.display())))?;
            let q: Result<Vec<i8>, CliError> = signs_text
                .split_whitespace()
                .map(|tok| match tok {
                    "1" | "+1" => Ok(1),
                    "-1" => Ok(-1),
                    other => Err(CliError::Config(format!("invalid sign token {other:?}"))),
                })
                .collect();
            let q = q?;
            if q.len() != op.realized_m() {
                return Err(CliError::Config(format!(
                    "signs file has {} entries, operator selects {} rows",
                    q.len(),
                    op.realized_m()
                )));
            }
            let sample = onebit::quantize::QuantizedSample {
                clean: q.clone(),
                corrupted: q,
                flipped: vec![],
            };
            let constraint = if approx {
                Constraint::ApproxSparse { s: sparsity }
            } else {
                Constraint::ExactSparse { s: sparsity }
            };
            let rspec = RecoverySpec::new(constraint, lambda, solver.into());
            let result =
                recover(&sample, &op, &rspec).map_err(|e| CliError::Config(e.to_string()))?;
            let rendered: String = result.x.iter().map(|v| format!("{v}\n")).collect();
            match out {
                Some(path) => fs::write(&path, rendered)
                    .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?,
                None => print!("{rendered}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
