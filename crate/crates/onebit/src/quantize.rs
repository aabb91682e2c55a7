//! The one-bit channel: analog noise, dither, sign quantization, and
//! adversarial post-quantization bit corruption.
//!
//! With `A = R_I Γ_ξ` the clean bits are `q = sign(Ax + ν + τ)` and the
//! observed data is `q_corr` with `d_H(q_corr, q) ≤ ⌊β·m⌋`.

use serde::{Deserialize, Serialize};

use crate::circulant::CirculantOperator;
use crate::error::{Error, Result};
use crate::rng::{sample_dither, sample_vector, Distribution, SeedTree};

/// Post-quantization corruption strategy within the Hamming budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    /// No corruption: `q_corr = q`.
    None,
    /// Flips the budget's worth of uniformly chosen positions.
    RandomFlip,
    /// Worst-case proxy: flips the budget positions with the largest
    /// `q_i · (Ax)_i`, i.e. the most informative agreeing bits.
    GreedySignalAligned,
}

impl Adversary {
    pub fn name(&self) -> &'static str {
        match self {
            Adversary::None => "none",
            Adversary::RandomFlip => "random_flip",
            Adversary::GreedySignalAligned => "greedy_signal_aligned",
        }
    }
}

/// Channel parameters: noise law, dither level λ, corruption fraction β,
/// and the adversary strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub noise: Distribution,
    pub lambda: f64,
    pub beta: f64,
    pub adversary: Adversary,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dither level must be positive, got {}",
                self.lambda
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "corruption fraction must lie in [0, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Hard corruption budget `⌊β·m⌋` for nominal measurement count `m`.
    pub fn budget(&self, m_nominal: usize) -> usize {
        (self.beta * m_nominal as f64).floor() as usize
    }
}

/// One draw of the channel: clean bits, corrupted bits, and the flip set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedSample {
    /// Clean signs, aligned with the operator's selected rows.
    pub clean: Vec<i8>,
    /// Observed (possibly corrupted) signs.
    pub corrupted: Vec<i8>,
    /// Positions (into the selected-row order) that were flipped.
    pub flipped: Vec<usize>,
}

impl QuantizedSample {
    pub fn hamming_distance(&self) -> usize {
        self.clean
            .iter()
            .zip(&self.corrupted)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn corrupted_f64(&self) -> Vec<f64> {
        self.corrupted.iter().map(|&s| s as f64).collect()
    }
}

fn sign(v: f64) -> i8 {
    // sign(0) := +1, so the quantizer is deterministic.
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// `q_i = sign(y_i + ν_i + τ_i)`.
pub fn quantize(measurements: &[f64], noise: &[f64], dither: &[f64]) -> Result<Vec<i8>> {
    if measurements.len() != noise.len() {
        return Err(Error::DimensionMismatch { expected: measurements.len(), got: noise.len() });
    }
    if measurements.len() != dither.len() {
        return Err(Error::DimensionMismatch { expected: measurements.len(), got: dither.len() });
    }
    Ok(measurements
        .iter()
        .zip(noise)
        .zip(dither)
        .map(|((&y, &nu), &tau)| sign(y + nu + tau))
        .collect())
}

/// Applies the configured adversary to clean bits `q`.
pub fn corrupt(
    q: &[i8],
    x_true: &[f64],
    op: &CirculantOperator,
    cfg: &ChannelConfig,
    seed: &SeedTree,
) -> Result<QuantizedSample> {
    cfg.validate()?;
    if q.len() != op.realized_m() {
        return Err(Error::DimensionMismatch { expected: op.realized_m(), got: q.len() });
    }
    let budget = cfg.budget(op.m_nominal()).min(q.len());
    let flipped: Vec<usize> = match cfg.adversary {
        Adversary::None => Vec::new(),
        _ if budget == 0 => Vec::new(),
        Adversary::RandomFlip => {
            let mut rng = seed.rng();
            let mut picked = crate::rng::sample_support(q.len(), budget, &mut rng);
            picked.sort_unstable();
            picked
        }
        Adversary::GreedySignalAligned => {
            let ax = op.apply(x_true)?;
            let mut scored: Vec<(usize, f64)> = q
                .iter()
                .zip(&ax)
                .enumerate()
                .map(|(i, (&qi, &axi))| (i, qi as f64 * axi))
                .collect();
            // Descending score; stable sort keeps lowest index first on ties.
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            let mut picked: Vec<usize> = scored[..budget].iter().map(|&(i, _)| i).collect();
            picked.sort_unstable();
            picked
        }
    };
    let mut corrupted = q.to_vec();
    for &i in &flipped {
        corrupted[i] = -corrupted[i];
    }
    let sample = QuantizedSample { clean: q.to_vec(), corrupted, flipped };
    assert!(sample.hamming_distance() <= cfg.budget(op.m_nominal()));
    Ok(sample)
}

/// Runs the full channel: `A x` → add noise and dither → sign → corrupt.
///
/// The theory assumes `‖x‖₂ ≤ 1`; violations are the caller's concern
/// (the harness records a warning flag).
pub fn measure_and_quantize(
    x: &[f64],
    op: &CirculantOperator,
    cfg: &ChannelConfig,
    seed: &SeedTree,
) -> Result<QuantizedSample> {
    cfg.validate()?;
    let measurements = op.apply(x)?;
    let count = measurements.len();
    let noise = if count == 0 {
        Vec::new()
    } else {
        sample_vector(&cfg.noise, count, &seed.child(SEED_NOISE))?
    };
    let dither = if count == 0 {
        Vec::new()
    } else {
        sample_dither(count, cfg.lambda, &seed.child(SEED_DITHER))?
    };
    let q = quantize(&measurements, &noise, &dither)?;
    corrupt(&q, x, op, cfg, &seed.child(SEED_CORRUPT))
}

/// Seed labels used by [`measure_and_quantize`], exposed so tests can
/// hand-compose the pipeline.
pub const SEED_NOISE: u64 = 1;
pub const SEED_DITHER: u64 = 2;
pub const SEED_CORRUPT: u64 = 3;

/// Monte-Carlo audit of the heavier-tailed noise conditions: with `c₁ = 1`,
/// checks `P(2|ν| > λ) ≤ ρ`, `E|ν|·1{2|ν| > λ} ≤ ρ`, and `|Eν| ≤ ρ`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HeavyTailCheck {
    pub exceed_probability: f64,
    pub tail_mean: f64,
    pub mean_abs: f64,
    pub ok: bool,
}

pub fn heavy_tail_check(
    noise: &Distribution,
    lambda: f64,
    rho: f64,
    samples: usize,
    seed: &SeedTree,
) -> Result<HeavyTailCheck> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0,1), got {rho}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let draws = sample_vector(noise, samples.max(1), seed)?;
    let n = draws.len() as f64;
    let exceed = draws.iter().filter(|&&v| 2.0 * v.abs() > lambda).count() as f64 / n;
    let tail_mean =
        draws.iter().filter(|&&v| 2.0 * v.abs() > lambda).map(|v| v.abs()).sum::<f64>() / n;
    let mean_abs = (draws.iter().sum::<f64>() / n).abs();
    let ok = exceed <= rho && tail_mean <= rho && mean_abs <= rho;
    Ok(HeavyTailCheck { exceed_probability: exceed, tail_mean, mean_abs, ok })
}
