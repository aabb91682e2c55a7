//! The measurement operator `A = R_I Γ_ξ` and its adjoint.
//!
//! `Γ_ξ` is the circulant matrix generated by `ξ`: row `j` is
//! `(ξ_{(j−k) mod n})_k`, so `Γ_ξ z` is the circular convolution `ξ ⊛ z`.
//! The spectral path computes it in `O(n log n)` via the convolution
//! theorem; a naive `O(n²)` path serves as the reference oracle.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Cached DFT machinery for one ambient dimension, plus the transform of ξ.
pub struct SpectralPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    generator_hat: Vec<Complex<f64>>,
    n: usize,
}

impl SpectralPlan {
    fn new(generator: &[f64]) -> Self {
        let n = generator.len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut generator_hat: Vec<Complex<f64>> =
            generator.iter().map(|&x| Complex::new(x, 0.0)).collect();
        forward.process(&mut generator_hat);
        SpectralPlan { forward, inverse, generator_hat, n }
    }

    fn dft(&self, v: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT of `buf`, real part, imaginary residue discarded.
    fn idft_real(&self, mut buf: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("n", &self.n).finish()
    }
}

/// The subsampled circulant measurement operator `A = R_I Γ_ξ`.
///
/// Immutable after construction; `apply`/`adjoint` are reentrant.
#[derive(Debug)]
pub struct CirculantOperator {
    generator: Vec<f64>,
    selected: Vec<usize>,
    m_nominal: usize,
    plan: SpectralPlan,
}

impl CirculantOperator {
    /// `selected` must be sorted, duplicate-free, and within `0..n`;
    /// `m_nominal` is the `m` in the selector mean `δ = m/n`.
    pub fn new(generator: Vec<f64>, selected: Vec<usize>, m_nominal: usize) -> Result<Self> {
        let n = generator.len();
        if n == 0 {
            return Err(Error::InvalidParameter("generator must be nonempty".into()));
        }
        if m_nominal == 0 || m_nominal > n {
            return Err(Error::InvalidParameter(format!(
                "nominal m must satisfy 1 <= m <= n, got m={m_nominal}, n={n}"
            )));
        }
        if !selected.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "selected rows must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = selected.last() {
            if last >= n {
                return Err(Error::InvalidParameter(format!(
                    "selected row {last} out of range for n={n}"
                )));
            }
        }
        let plan = SpectralPlan::new(&generator);
        Ok(CirculantOperator { generator, selected, m_nominal, plan })
    }

    pub fn n(&self) -> usize {
        self.generator.len()
    }

    pub fn m_nominal(&self) -> usize {
        self.m_nominal
    }

    /// Realized number of measurements `|I|`.
    pub fn realized_m(&self) -> usize {
        self.selected.len()
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    fn check_dim(&self, len: usize, expected: usize) -> Result<()> {
        if len != expected {
            return Err(Error::DimensionMismatch { expected, got: len });
        }
        Ok(())
    }

    /// Full circulant product `Γ_ξ z` via the convolution theorem.
    pub fn circ_apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z.len(), self.n())?;
        let mut prod = self.plan.dft(z);
        for (p, g) in prod.iter_mut().zip(&self.plan.generator_hat) {
            *p *= g;
        }
        Ok(self.plan.idft_real(prod))
    }

    /// Reference `O(n²)` evaluation of `(Γ_ξ z)_j = Σ_k ξ_{(j−k) mod n} z_k`.
    pub fn circ_apply_naive(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        self.check_dim(z.len(), n)?;
        let mut out = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += self.generator[(n + j - k) % n] * z[k];
            }
            out[j] = acc;
        }
        Ok(out)
    }

    /// `A z = R_I Γ_ξ z`, in `I`'s sorted order.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        let full = self.circ_apply(z)?;
        Ok(self.selected.iter().map(|&i| full[i]).collect())
    }

    /// `Aᵀ w`: scatter `w` into positions `I`, then apply `Γ_ξᵀ`
    /// (circular correlation, spectral path via the conjugate transform).
    pub fn adjoint(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(w.len(), self.selected.len())?;
        let mut scattered = vec![0.0; self.n()];
        for (&i, &wi) in self.selected.iter().zip(w.iter()) {
            scattered[i] = wi;
        }
        let mut prod = self.plan.dft(&scattered);
        for (p, g) in prod.iter_mut().zip(&self.plan.generator_hat) {
            *p *= g.conj();
        }
        Ok(self.plan.idft_real(prod))
    }

    /// Circular autocorrelation of ξ: `ρ(l) = Σ_r ξ_r ξ_{(r−l) mod n}`,
    /// i.e. `(Γ_ξᵀ Γ_ξ)_{a,b} = ρ((a−b) mod n)`.
    pub fn generator_autocorrelation(&self) -> Vec<f64> {
        let mut prod: Vec<Complex<f64>> = self
            .plan
            .generator_hat
            .iter()
            .map(|g| g * g.conj())
            .collect();
        self.plan.inverse.process(&mut prod);
        let scale = 1.0 / self.n() as f64;
        prod.into_iter().map(|c| c.re * scale).collect()
    }
}

/// Top-k norm `‖x‖_[k]`: the ℓ₂ norm of the `k` largest-magnitude coordinates.
pub fn top_k_norm(x: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > x.len() {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k <= n, got k={k}, n={}",
            x.len()
        )));
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(mags[..k].iter().map(|v| v * v).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{sample_vector, Distribution, SeedTree};

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// Dense Γ_ξ for small-n oracles only.
    fn dense_circulant(generator: &[f64]) -> Vec<Vec<f64>> {
        let n = generator.len();
        assert!(n <= 512, "dense oracle capped at n <= 512");
        (0..n)
            .map(|j| (0..n).map(|k| generator[(n + j - k) % n]).collect())
            .collect()
    }

    fn unit(n: usize, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    }

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        sample_vector(&Distribution::gaussian(0.0, 1.0), n, &SeedTree::new(seed)).unwrap()
    }

    #[test]
    fn identity_generator_is_identity() {
        let n = 8;
        let op = CirculantOperator::new(unit(n, 0), (0..n).collect(), n).unwrap();
        let z = gaussian(n, 1);
        assert!(max_abs_diff(&op.circ_apply(&z).unwrap(), &z) < 1e-12);
    }

    #[test]
    fn shift_generator_rotates() {
        let op = CirculantOperator::new(unit(4, 1), (0..4).collect(), 4).unwrap();
        let out = op.circ_apply(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(max_abs_diff(&out, &[4.0, 1.0, 2.0, 3.0]) < 1e-12);
    }

    #[test]
    fn spectral_matches_naive() {
        let n = 16;
        let xi = gaussian(n, 2);
        let z = gaussian(n, 3);
        let op = CirculantOperator::new(xi, (0..n).collect(), n).unwrap();
        assert!(max_abs_diff(&op.circ_apply(&z).unwrap(), &op.circ_apply_naive(&z).unwrap()) < 1e-10);
    }

    #[test]
    fn full_selection_equals_circ_apply() {
        let n = 12;
        let op = CirculantOperator::new(gaussian(n, 4), (0..n).collect(), n).unwrap();
        let z = gaussian(n, 5);
        assert_eq!(op.apply(&z).unwrap(), op.circ_apply(&z).unwrap());
    }

    #[test]
    fn empty_selection_gives_empty_vector() {
        let n = 8;
        let op = CirculantOperator::new(gaussian(n, 6), vec![], 4).unwrap();
        assert!(op.apply(&gaussian(n, 7)).unwrap().is_empty());
    }

    #[test]
    fn subsampled_matches_dense_rows() {
        let n = 16;
        let xi = gaussian(n, 8);
        let rows = vec![1, 4, 7, 11, 14];
        let op = CirculantOperator::new(xi.clone(), rows.clone(), 5).unwrap();
        let z = gaussian(n, 9);
        let dense = dense_circulant(&xi);
        let expected: Vec<f64> = rows
            .iter()
            .map(|&j| dense[j].iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect();
        assert!(max_abs_diff(&op.apply(&z).unwrap(), &expected) < 1e-10);
    }

    #[test]
    fn adjoint_identity_generator_scatter() {
        let op = CirculantOperator::new(unit(8, 0), vec![2], 8).unwrap();
        let out = op.adjoint(&[5.0]).unwrap();
        assert!(max_abs_diff(&out, &unit(8, 2).iter().map(|x| x * 5.0).collect::<Vec<_>>()) < 1e-12);
    }

    #[test]
    fn adjoint_inner_product_identity() {
        let n = 64;
        let root = SeedTree::new(123);
        let d = Distribution::gaussian(0.0, 1.0);
        for rep in 0..100u64 {
            let s = root.child(rep);
            let xi = sample_vector(&d, n, &s.child(0)).unwrap();
            let rows: Vec<usize> =
                crate::rng::sample_selectors(n, n / 2, &s.child(1)).unwrap();
            let op = CirculantOperator::new(xi, rows.clone(), n / 2).unwrap();
            let z = sample_vector(&d, n, &s.child(2)).unwrap();
            let w = sample_vector(&d, rows.len().max(1), &s.child(3)).unwrap();
            let w = &w[..rows.len()];
            let az = op.apply(&z).unwrap();
            let atw = op.adjoint(w).unwrap();
            let lhs: f64 = az.iter().zip(w).map(|(a, b)| a * b).sum();
            let rhs: f64 = z.iter().zip(&atw).map(|(a, b)| a * b).sum();
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!((lhs - rhs).abs() / scale < 1e-10, "rep {rep}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn adjoint_matches_dense_transpose() {
        let n = 16;
        let xi = gaussian(n, 10);
        let rows = vec![0, 3, 5, 12];
        let op = CirculantOperator::new(xi.clone(), rows.clone(), 4).unwrap();
        let w = gaussian(rows.len(), 11);
        let dense = dense_circulant(&xi);
        let mut expected = vec![0.0; n];
        for (ri, &j) in rows.iter().enumerate() {
            for k in 0..n {
                expected[k] += dense[j][k] * w[ri];
            }
        }
        assert!(max_abs_diff(&op.adjoint(&w).unwrap(), &expected) < 1e-10);
    }

    #[test]
    fn autocorrelation_matches_dense_gram() {
        let n = 12;
        let xi = gaussian(n, 12);
        let op = CirculantOperator::new(xi.clone(), (0..n).collect(), n).unwrap();
        let rho = op.generator_autocorrelation();
        let dense = dense_circulant(&xi);
        for a in 0..n {
            for b in 0..n {
                let gram: f64 = (0..n).map(|r| dense[r][a] * dense[r][b]).sum();
                assert!((gram - rho[(n + a - b) % n]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shift_covariance() {
        let n = 16;
        let xi = gaussian(n, 13);
        let op = CirculantOperator::new(xi, (0..n).collect(), n).unwrap();
        let z = gaussian(n, 14);
        let shift = 5;
        let z_shifted: Vec<f64> = (0..n).map(|i| z[(n + i - shift) % n]).collect();
        let gz = op.circ_apply(&z).unwrap();
        let gz_shifted_expected: Vec<f64> = (0..n).map(|i| gz[(n + i - shift) % n]).collect();
        assert!(max_abs_diff(&op.circ_apply(&z_shifted).unwrap(), &gz_shifted_expected) < 1e-10);
    }

    #[test]
    fn linearity() {
        let n = 32;
        let op = CirculantOperator::new(gaussian(n, 15), (0..n).step_by(3).collect(), 10).unwrap();
        let z = gaussian(n, 16);
        let y = gaussian(n, 17);
        let (a, b) = (0.7, -2.3);
        let combo: Vec<f64> = z.iter().zip(&y).map(|(zi, yi)| a * zi + b * yi).collect();
        let lhs = op.apply(&combo).unwrap();
        let az = op.apply(&z).unwrap();
        let ay = op.apply(&y).unwrap();
        let rhs: Vec<f64> = az.iter().zip(&ay).map(|(x, w)| a * x + b * w).collect();
        let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs_diff(&lhs, &rhs) / scale < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let op = CirculantOperator::new(gaussian(8, 18), vec![0, 2], 4).unwrap();
        assert!(op.circ_apply(&[1.0; 7]).is_err());
        assert!(op.apply(&[1.0; 9]).is_err());
        assert!(op.adjoint(&[1.0; 3]).is_err());
    }

    #[test]
    fn top_k_norm_cases() {
        assert!((top_k_norm(&[3.0, 1.0, 2.0], 2).unwrap() - 13f64.sqrt()).abs() < 1e-12);
        let x = gaussian(10, 19);
        let l2 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((top_k_norm(&x, 10).unwrap() - l2).abs() < 1e-12);
        assert!((top_k_norm(&unit(5, 1), 3).unwrap() - 1.0).abs() < 1e-12);
        assert!(top_k_norm(&x, 0).is_err());
        assert!(top_k_norm(&x, 11).is_err());
    }

    #[test]
    fn top_k_norm_monotone_in_k() {
        let x = gaussian(20, 20);
        let mut prev = 0.0;
        for k in 1..=20 {
            let v = top_k_norm(&x, k).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn spectral_plan_roundtrip() {
        for n in [3usize, 8, 17, 100] {
            let xi = gaussian(n, 21 + n as u64);
            let plan = SpectralPlan::new(&xi);
            let back = plan.idft_real(plan.dft(&xi));
            let scale = xi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(max_abs_diff(&back, &xi) / scale < 1e-12);
        }
    }
}
