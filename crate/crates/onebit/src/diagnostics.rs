//! Empirical certification of the structural properties behind the recovery
//! guarantees: the growth constant γ₁ of measurement images, the two-sided
//! isomorphism constants κ ≤ κ′ on sparse probes, and the sparse operator
//! norm hypothesis `‖At‖₂ ≤ κ√m`.
//!
//! The theory quantifies over all of `Σ_{r,n}`, which is uncheckable; these
//! routines report probe minima/maxima over Monte-Carlo draws, not suprema.

use serde::{Deserialize, Serialize};

use crate::circulant::CirculantOperator;
use crate::error::{Error, Result};
use crate::rng::SeedTree;

/// Smallest γ₁ for which `‖x‖_[k] ≤ γ₁ √(k log(en/k)/n) ‖x‖₂` holds for
/// every `k ∈ [r, n]`, with the `k` attaining the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub r: usize,
    pub gamma1_hat: f64,
    pub argmax_k: usize,
}

/// Batched growth certification over random sparse probes pushed through
/// `Γ_ξ`, compared against a poly-log bound shape with an explicit slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub r: usize,
    pub trials: usize,
    pub max_gamma1: f64,
    pub median_gamma1: f64,
    /// `slack · (ln n)(ln r)`, the shape the maxima are compared against.
    pub bound: f64,
    pub slack: f64,
    /// Set when `max_gamma1 > bound`; a flag, not an assertion, since the
    /// reference constant is only known up to the slack factor.
    pub exceeds_bound: bool,
}

/// Min/max of `‖Γ_ξ t‖₂ / (√n ‖t‖₂)` over random r-sparse probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsomorphismReport {
    pub r: usize,
    pub kappa_hat: f64,
    pub kappa_prime_hat: f64,
    pub probe_count: usize,
}

/// Default slack factor applied to the reference bounds.
pub const DEFAULT_SLACK: f64 = 3.0;

/// Scans all `k ∈ [r, n]` for the smallest γ₁ satisfying the growth
/// inequality; one sort plus prefix sums of sorted squares.
pub fn growth_gamma(x: &[f64], r: usize) -> Result<GrowthReport> {
    let n = x.len();
    if r == 0 || r > n {
        return Err(Error::InvalidParameter(format!(
            "r must satisfy 1 <= r <= n, got r={r}, n={n}"
        )));
    }
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 {
        return Err(Error::InvalidParameter("growth_gamma requires a nonzero vector".into()));
    }
    let norm = norm_sq.sqrt();
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut prefix = 0.0;
    let mut gamma1_hat = 0.0;
    let mut argmax_k = r;
    let nf = n as f64;
    for (k0, &mag) in mags.iter().enumerate() {
        prefix += mag * mag;
        let k = k0 + 1;
        if k < r {
            continue;
        }
        let kf = k as f64;
        // log natural, e·n/k inside.
        let denom = (kf * (std::f64::consts::E * nf / kf).ln() / nf).sqrt() * norm;
        let gamma = prefix.sqrt() / denom;
        if gamma > gamma1_hat {
            gamma1_hat = gamma;
            argmax_k = k;
        }
    }
    Ok(GrowthReport { r, gamma1_hat, argmax_k })
}

fn sparse_probe(n: usize, r: usize, seed: &SeedTree) -> Vec<f64> {
    crate::rng::sample_sparse_unit(n, r, seed).expect("valid probe parameters")
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Draws `trials` random unit-norm r-sparse probes, pushes each through
/// `Γ_ξ`, and summarizes the growth constants of the images.
pub fn certify_growth_on_images(
    op: &CirculantOperator,
    r: usize,
    trials: usize,
    seed: &SeedTree,
    slack: f64,
) -> Result<GrowthSummary> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let n = op.n();
    let mut gammas = Vec::with_capacity(trials);
    for t in 0..trials {
        let probe = sparse_probe(n, r, &seed.child(t as u64));
        let image = op.circ_apply(&probe)?;
        gammas.push(growth_gamma(&image, r)?.gamma1_hat);
    }
    gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let max_gamma1 = *gammas.last().unwrap();
    let median_gamma1 = median_of_sorted(&gammas);
    let bound = slack * (n as f64).ln() * (r as f64).ln().max(1.0);
    Ok(GrowthSummary {
        r,
        trials,
        max_gamma1,
        median_gamma1,
        bound,
        slack,
        exceeds_bound: max_gamma1 > bound,
    })
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Min/max of `‖Γ_ξ t‖₂/(√n‖t‖₂)` over random r-sparse probes.
pub fn certify_isomorphism(
    op: &CirculantOperator,
    r: usize,
    trials: usize,
    seed: &SeedTree,
) -> Result<IsomorphismReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let n = op.n();
    let sqrt_n = (n as f64).sqrt();
    let mut kappa_hat = f64::INFINITY;
    let mut kappa_prime_hat = 0.0f64;
    for t in 0..trials {
        let probe = sparse_probe(n, r, &seed.child(t as u64));
        let image = op.circ_apply(&probe)?;
        let ratio = l2_norm(&image) / (sqrt_n * l2_norm(&probe));
        kappa_hat = kappa_hat.min(ratio);
        kappa_prime_hat = kappa_prime_hat.max(ratio);
    }
    Ok(IsomorphismReport { r, kappa_hat, kappa_prime_hat, probe_count: trials })
}

/// Monte-Carlo lower estimate of `sup ‖At‖₂/(√m‖t‖₂)` over `Σ_{r,n}`,
/// with `m` the nominal measurement count.
pub fn sparse_operator_norm(
    op: &CirculantOperator,
    r: usize,
    trials: usize,
    seed: &SeedTree,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let sqrt_m = (op.m_nominal() as f64).sqrt();
    let mut best = 0.0f64;
    for t in 0..trials {
        let probe = sparse_probe(op.n(), r, &seed.child(t as u64));
        let image = op.apply(&probe)?;
        best = best.max(l2_norm(&image) / (sqrt_m * l2_norm(&probe)));
    }
    Ok(best)
}
