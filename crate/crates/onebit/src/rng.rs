//! Deterministic, splittable random generation.
//!
//! Every stochastic ingredient of an experiment (generator vectors, row
//! selectors, analog noise, dither, signal supports) draws from a stream
//! addressed by a [`SeedTree`]: a master seed plus a path of integer labels.
//! The stream is a pure function of `(master_seed, path)`, so trials can be
//! dispatched to any number of workers without changing results.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Normal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Addresses an independent random stream by `(master_seed, label path)`.
///
/// Child seeds are derived with a SplitMix64-style keyed mixer, so distinct
/// sibling labels give statistically independent streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedTree {
    master_seed: u64,
    path: Vec<u64>,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        SeedTree { master_seed, path: Vec::new() }
    }

    /// Derives the child stream for `label`. Same label, same stream.
    pub fn child(&self, label: u64) -> Self {
        let mut path = self.path.clone();
        path.push(label);
        SeedTree { master_seed: self.master_seed, path }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Path rendered as `master/l0/l1/...`, used in trial records.
    pub fn path_string(&self) -> String {
        let mut s = format!("{}", self.master_seed);
        for l in &self.path {
            s.push('/');
            s.push_str(&l.to_string());
        }
        s
    }

    fn derived_key(&self) -> u64 {
        let mut h = splitmix64(self.master_seed);
        for &label in &self.path {
            h = splitmix64(h ^ splitmix64(label));
        }
        h
    }

    /// Instantiates the stream for this node.
    pub fn rng(&self) -> ChaCha12Rng {
        let key = self.derived_key();
        let mut seed = [0u8; 32];
        let mut h = key;
        for chunk in seed.chunks_exact_mut(8) {
            h = splitmix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

/// Distribution family for generator coordinates and analog noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`, so the unit-scale law has unit variance.
    UniformPm,
    /// Heavier-tailed option; not subgaussian.
    StudentT,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Rademacher => "rademacher",
            Family::UniformPm => "uniform_pm",
            Family::StudentT => "student_t",
        }
    }
}

/// A scalar law `mean + scale * centred`, where the centred part has unit
/// variance for every family (Student-t is rescaled by `√((df−2)/df)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distribution {
    pub family: Family,
    pub mean: f64,
    pub scale: f64,
    /// Degrees of freedom, required for `student_t` (must exceed 2 so the
    /// variance normalization is finite).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
}

impl Distribution {
    pub fn gaussian(mean: f64, scale: f64) -> Self {
        Distribution { family: Family::Gaussian, mean, scale, df: None }
    }

    pub fn rademacher(mean: f64, scale: f64) -> Self {
        Distribution { family: Family::Rademacher, mean, scale, df: None }
    }

    pub fn uniform_pm(mean: f64, scale: f64) -> Self {
        Distribution { family: Family::UniformPm, mean, scale, df: None }
    }

    pub fn student_t(mean: f64, scale: f64, df: f64) -> Self {
        Distribution { family: Family::StudentT, mean, scale, df: Some(df) }
    }

    /// Whether the centred part is subgaussian (Student-t is not).
    pub fn is_subgaussian(&self) -> bool {
        !matches!(self.family, Family::StudentT)
    }

    /// Standard deviation of the centred part.
    pub fn centred_std(&self) -> f64 {
        self.scale
    }

    pub fn validate(&self) -> Result<()> {
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        if !self.mean.is_finite() {
            return Err(Error::InvalidDistribution("mean must be finite".into()));
        }
        match self.family {
            Family::StudentT => match self.df {
                Some(df) if df > 2.0 => Ok(()),
                Some(df) => Err(Error::InvalidDistribution(format!(
                    "student_t requires df > 2 for unit-variance normalization, got {df}"
                ))),
                None => Err(Error::InvalidDistribution(
                    "student_t requires degrees of freedom".into(),
                )),
            },
            _ => {
                if self.df.is_some() {
                    return Err(Error::InvalidDistribution(
                        "df is only meaningful for student_t".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Draws `n` iid samples of `dist` from the stream at `seed`.
pub fn sample_vector(dist: &Distribution, n: usize, seed: &SeedTree) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample_vector requires n >= 1".into()));
    }
    dist.validate()?;
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(n);
    match dist.family {
        Family::Gaussian => {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            for _ in 0..n {
                out.push(dist.mean + dist.scale * rng.sample(normal));
            }
        }
        Family::Rademacher => {
            for _ in 0..n {
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out.push(dist.mean + dist.scale * s);
            }
        }
        Family::UniformPm => {
            let half = 3f64.sqrt();
            let u = Uniform::new_inclusive(-half, half)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for _ in 0..n {
                out.push(dist.mean + dist.scale * rng.sample(u));
            }
        }
        Family::StudentT => {
            let df = dist.df.expect("validated");
            let t = StudentT::new(df).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
            // Var of a t-variate is df/(df-2); rescale so the centred part is unit variance.
            let norm = ((df - 2.0) / df).sqrt();
            for _ in 0..n {
                out.push(dist.mean + dist.scale * norm * rng.sample(t));
            }
        }
    }
    Ok(out)
}

/// Independent Bernoulli row selectors with inclusion probability `m/n`;
/// returns the selected index set, sorted.
pub fn sample_selectors(n: usize, m: usize, seed: &SeedTree) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "selector count must satisfy 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    let p = m as f64 / n as f64;
    let mut rng = seed.rng();
    let mut selected = Vec::with_capacity(m + m / 2);
    for i in 0..n {
        if rng.random::<f64>() < p {
            selected.push(i);
        }
    }
    Ok(selected)
}

/// `count` iid dither thresholds, uniform on `[-λ, λ]`.
pub fn sample_dither(count: usize, lambda: f64, seed: &SeedTree) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dither level must be positive, got {lambda}"
        )));
    }
    let u = Uniform::new_inclusive(-lambda, lambda)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = seed.rng();
    Ok((0..count).map(|_| rng.sample(u)).collect())
}

/// Uniformly random support of size `s` out of `n` indices, sorted.
pub fn sample_support(n: usize, s: usize, rng: &mut impl Rng) -> Vec<usize> {
    debug_assert!(s <= n);
    // Partial Fisher-Yates over a lazily materialized index map.
    let mut map = std::collections::HashMap::new();
    let mut picked = Vec::with_capacity(s);
    for i in 0..s {
        let j = rng.random_range(i..n);
        let vj = *map.get(&j).unwrap_or(&j);
        let vi = *map.get(&i).unwrap_or(&i);
        map.insert(j, vi);
        picked.push(vj);
    }
    picked.sort_unstable();
    picked
}

/// Unit-norm `s`-sparse vector: uniform support, spherical coefficients.
pub fn sample_sparse_unit(n: usize, s: usize, seed: &SeedTree) -> Result<Vec<f64>> {
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!(
            "sparsity must satisfy 1 <= s <= n, got s={s}, n={n}"
        )));
    }
    let mut rng = seed.rng();
    let support = sample_support(n, s, &mut rng);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut coeffs: Vec<f64> = (0..s).map(|_| rng.sample(normal)).collect();
    let mut norm: f64 = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    while norm == 0.0 {
        coeffs = (0..s).map(|_| rng.sample(normal)).collect();
        norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    }
    let mut x = vec![0.0; n];
    for (&i, &c) in support.iter().zip(coeffs.iter()) {
        x[i] = c / norm;
    }
    Ok(x)
}
