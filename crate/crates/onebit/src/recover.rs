//! The three equivalent recovery programs over `Σ_{s,n}` or `√s B₁ⁿ ∩ B₂ⁿ`:
//!
//! * regularized maximization of `φ(z) = (1/m)⟨q_corr, Az⟩ − ‖Γ_ξ z‖₂²/(2λn)`,
//! * the closed-form hard-thresholding projection
//!   `x♯ = min{λ/m, 1/‖H_s(Aᵀq_corr)‖₂} · H_s(Aᵀq_corr)`,
//! * the generalized Lasso `min_{z ∈ T} ‖q_corr − (1/2λ)Az‖₂` by projected
//!   gradient.
//!
//! All `1/m` normalizations use nominal `m`, matching the `δ = m/n` selector
//! convention.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::circulant::CirculantOperator;
use crate::error::{Error, Result};
use crate::quantize::QuantizedSample;

/// Constraint set for the recovery programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// `Σ_{s,n}`: s-sparse vectors in the Euclidean unit ball.
    ExactSparse { s: usize },
    /// `√s B₁ⁿ ∩ B₂ⁿ`, for approximately sparse signals.
    ApproxSparse { s: usize },
}

impl Constraint {
    pub fn sparsity(&self) -> usize {
        match *self {
            Constraint::ExactSparse { s } | Constraint::ApproxSparse { s } => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    ClosedForm,
    MaximizePhi,
    LassoPg,
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::ClosedForm => "closed_form",
            Solver::MaximizePhi => "maximize_phi",
            Solver::LassoPg => "lasso_pg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoverySpec {
    pub constraint: Constraint,
    pub lambda: f64,
    pub solver: Solver,
    pub pg_max_iters: usize,
    pub pg_tol: f64,
}

pub const DEFAULT_PG_MAX_ITERS: usize = 500;
pub const DEFAULT_PG_TOL: f64 = 1e-8;

impl RecoverySpec {
    pub fn new(constraint: Constraint, lambda: f64, solver: Solver) -> Self {
        RecoverySpec {
            constraint,
            lambda,
            solver,
            pg_max_iters: DEFAULT_PG_MAX_ITERS,
            pg_tol: DEFAULT_PG_TOL,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let s = self.constraint.sparsity();
        if s == 0 || s > n {
            return Err(Error::InvalidParameter(format!(
                "sparsity must satisfy 1 <= s <= n, got s={s}, n={n}"
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        if !(self.pg_tol > 0.0) {
            return Err(Error::InvalidParameter("pg_tol must be positive".into()));
        }
        if matches!(self.solver, Solver::ClosedForm | Solver::MaximizePhi)
            && !matches!(self.constraint, Constraint::ExactSparse { .. })
        {
            return Err(Error::InvalidParameter(format!(
                "{} requires the exact-sparse constraint",
                self.solver.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub x: Vec<f64>,
    /// Value of the solved program at `x`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices of the `s` largest-magnitude entries, ties broken by lowest index.
fn top_s_indices(v: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).unwrap());
    let mut top = idx[..s].to_vec();
    top.sort_unstable();
    top
}

/// Hard thresholding `H_s`: keep the `s` largest-magnitude entries.
pub fn hard_threshold(v: &[f64], s: usize) -> Result<Vec<f64>> {
    if s == 0 || s > v.len() {
        return Err(Error::InvalidParameter(format!(
            "s must satisfy 1 <= s <= n, got s={s}, n={}",
            v.len()
        )));
    }
    let mut out = vec![0.0; v.len()];
    for i in top_s_indices(v, s) {
        out[i] = v[i];
    }
    Ok(out)
}

/// Euclidean projection onto `Σ_{s,n}`: hard-threshold, then shrink into the
/// unit ball.
pub fn project_sigma_s(v: &[f64], s: usize) -> Result<Vec<f64>> {
    let mut h = hard_threshold(v, s)?;
    let norm = l2_norm(&h);
    if norm > 1.0 {
        for x in &mut h {
            *x /= norm;
        }
    }
    Ok(h)
}

fn soft_threshold(v: &[f64], theta: f64) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let mag = x.abs() - theta;
            if mag > 0.0 {
                mag * x.signum()
            } else {
                0.0
            }
        })
        .collect()
}

fn l2_clip(mut v: Vec<f64>) -> Vec<f64> {
    let norm = l2_norm(&v);
    if norm > 1.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Euclidean projection onto `√s B₁ⁿ ∩ B₂ⁿ`.
///
/// KKT form: the projection is a soft-threshold of `v` shrunk into the unit
/// ℓ₂ ball; bisection finds the smallest threshold whose candidate meets the
/// ℓ₁ constraint (complementary slackness).
pub fn project_l1_l2(v: &[f64], s: usize) -> Result<Vec<f64>> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be at least 1".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("projection input must be finite".into()));
    }
    let target = (s as f64).sqrt();
    let candidate = |theta: f64| l2_clip(soft_threshold(v, theta));
    let p0 = candidate(0.0);
    if l1_norm(&p0) <= target {
        return Ok(p0);
    }
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (mut lo, mut hi) = (0.0, vmax);
    while hi - lo > 1e-12 * vmax {
        let mid = 0.5 * (lo + hi);
        if l1_norm(&candidate(mid)) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(candidate(hi))
}

/// The functional `φ(z) = (1/m)⟨q_corr, Az⟩ − ‖Γ_ξ z‖₂²/(2λn)`.
pub fn phi_value(
    z: &[f64],
    sample: &QuantizedSample,
    op: &CirculantOperator,
    lambda: f64,
) -> Result<f64> {
    let az = op.apply(z)?;
    if az.len() != sample.corrupted.len() {
        return Err(Error::DimensionMismatch { expected: az.len(), got: sample.corrupted.len() });
    }
    let m = op.m_nominal() as f64;
    let data_term: f64 =
        sample.corrupted.iter().zip(&az).map(|(&q, &a)| q as f64 * a).sum::<f64>() / m;
    let gz = op.circ_apply(z)?;
    let quad = gz.iter().map(|x| x * x).sum::<f64>() / op.n() as f64;
    Ok(data_term - quad / (2.0 * lambda))
}

/// The simplified program's objective `(1/m)⟨q_corr, Az⟩ − ‖z‖₂²/(2λ)`,
/// whose maximizer over `T` is the ℓ₂-projection of `(λ/m)Aᵀq_corr`.
pub fn projection_objective(
    z: &[f64],
    sample: &QuantizedSample,
    op: &CirculantOperator,
    lambda: f64,
) -> Result<f64> {
    let az = op.apply(z)?;
    let m = op.m_nominal() as f64;
    let data_term: f64 =
        sample.corrupted.iter().zip(&az).map(|(&q, &a)| q as f64 * a).sum::<f64>() / m;
    let sq = z.iter().map(|x| x * x).sum::<f64>();
    Ok(data_term - sq / (2.0 * lambda))
}

/// Closed-form solution over `Σ_{s,n}`:
/// `x♯ = min{λ/m, 1/‖H_s(Aᵀq_corr)‖₂} · H_s(Aᵀq_corr)` (zero if the
/// thresholded backprojection vanishes).
pub fn recover_closed_form(
    sample: &QuantizedSample,
    op: &CirculantOperator,
    spec: &RecoverySpec,
) -> Result<RecoveryResult> {
    spec.validate(op.n())?;
    let s = match spec.constraint {
        Constraint::ExactSparse { s } => s,
        _ => unreachable!("validated"),
    };
    let back = op.adjoint(&sample.corrupted_f64())?;
    let h = hard_threshold(&back, s)?;
    let norm = l2_norm(&h);
    let m = op.m_nominal() as f64;
    let x: Vec<f64> = if norm == 0.0 {
        vec![0.0; op.n()]
    } else {
        let coef = (spec.lambda / m).min(1.0 / norm);
        h.iter().map(|&v| coef * v).collect()
    };
    let objective = projection_objective(&x, sample, op, spec.lambda)?;
    Ok(RecoveryResult { x, objective, iterations: 1, converged: true })
}

/// Maximizes the concave restriction of φ to coordinates `support` over the
/// Euclidean unit ball: `max bᵀu − ½ uᵀQu, ‖u‖₂ ≤ 1` with
/// `b = (1/m)(Aᵀq)_S` and `Q = (Γᵀ Γ)_{S,S}/(λn)`.
fn solve_restricted(b: &DVector<f64>, q_mat: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let s = b.len();
    if b.norm() == 0.0 {
        return (DVector::zeros(s), 0.0);
    }
    let solve_at = |mu: f64| -> Option<DVector<f64>> {
        let shifted = q_mat + DMatrix::identity(s, s) * mu;
        Cholesky::new(shifted).map(|ch| ch.solve(b))
    };
    // Interior solution if Q is invertible and the unconstrained max fits.
    if let Some(u) = solve_at(0.0) {
        if u.norm() <= 1.0 {
            let val = b.dot(&u) - 0.5 * (u.transpose() * q_mat * &u)[(0, 0)];
            return (u, val);
        }
    }
    // Otherwise the max sits on the sphere; ‖(Q+μI)⁻¹b‖ is decreasing in μ,
    // and μ = ‖b‖ already forces the norm below 1.
    let (mut lo, mut hi) = (0.0f64, b.norm());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match solve_at(mid) {
            Some(u) if u.norm() <= 1.0 => hi = mid,
            _ => lo = mid,
        }
    }
    let u = solve_at(hi).expect("positive shift keeps Q+μI positive definite");
    let val = b.dot(&u) - 0.5 * (u.transpose() * q_mat * &u)[(0, 0)];
    (u, val)
}

fn supports_of_size(n: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(s);
    fn rec(start: usize, n: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == s {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, s, cur, out);
            cur.pop();
        }
    }
    rec(0, n, s, &mut cur, &mut out);
    out
}

/// Maximizes `φ` over `Σ_{s,n}`: exhaustive over supports for `n ≤ 20`,
/// otherwise restricted to the support chosen by `H_s(Aᵀq_corr)`.
pub fn recover_maximize_phi(
    sample: &QuantizedSample,
    op: &CirculantOperator,
    spec: &RecoverySpec,
) -> Result<RecoveryResult> {
    spec.validate(op.n())?;
    let s = match spec.constraint {
        Constraint::ExactSparse { s } => s,
        _ => unreachable!("validated"),
    };
    let n = op.n();
    let m = op.m_nominal() as f64;
    let back = op.adjoint(&sample.corrupted_f64())?;
    let rho = op.generator_autocorrelation();

    let candidates: Vec<Vec<usize>> = if n <= 20 {
        supports_of_size(n, s)
    } else {
        vec![top_s_indices(&back, s)]
    };

    let mut best: Option<(Vec<usize>, DVector<f64>, f64)> = None;
    for support in &candidates {
        let b = DVector::from_iterator(s, support.iter().map(|&i| back[i] / m));
        let q_mat = DMatrix::from_fn(s, s, |a, c| {
            rho[(n + support[a] - support[c]) % n] / (spec.lambda * n as f64)
        });
        let (u, val) = solve_restricted(&b, &q_mat);
        let better = match &best {
            None => true,
            Some((_, _, bv)) => val > *bv,
        };
        if better {
            best = Some((support.clone(), u, val));
        }
    }
    let (support, u, objective) = best.expect("at least one candidate support");
    let mut x = vec![0.0; n];
    for (k, &i) in support.iter().enumerate() {
        x[i] = u[k];
    }
    Ok(RecoveryResult { x, objective, iterations: candidates.len(), converged: true })
}

/// Power-iteration estimate of `‖A‖_op` (via `AᵀA`), deterministic.
pub fn estimate_operator_norm(op: &CirculantOperator, iters: usize) -> f64 {
    if op.realized_m() == 0 {
        return 0.0;
    }
    let n = op.n();
    // Fixed internal seed keeps the estimate (and every solver using it)
    // a deterministic function of the operator.
    let seed = crate::rng::SeedTree::new(0x7071_7e5a_0b17_0001);
    let mut v = crate::rng::sample_vector(&crate::rng::Distribution::gaussian(0.0, 1.0), n, &seed)
        .expect("valid distribution");
    let mut sigma_sq = 0.0;
    for _ in 0..iters {
        let norm = l2_norm(&v);
        if norm == 0.0 {
            return 0.0;
        }
        for x in &mut v {
            *x /= norm;
        }
        let av = op.apply(&v).expect("dims fixed");
        let atav = op.adjoint(&av).expect("dims fixed");
        sigma_sq = dot(&v, &atav);
        v = atav;
    }
    sigma_sq.max(0.0).sqrt()
}

/// Generalized Lasso `min_{z ∈ T} ‖q_corr − (1/2λ)Az‖₂` by projected
/// gradient on the halved squared objective with step `1/L`,
/// `L = ‖A‖²_op/(2λ)²` from 50 power iterations.
pub fn recover_lasso_pg(
    sample: &QuantizedSample,
    op: &CirculantOperator,
    spec: &RecoverySpec,
) -> Result<RecoveryResult> {
    spec.validate(op.n())?;
    let n = op.n();
    let c = 1.0 / (2.0 * spec.lambda);
    let q = sample.corrupted_f64();
    if q.len() != op.realized_m() {
        return Err(Error::DimensionMismatch { expected: op.realized_m(), got: q.len() });
    }
    let project = |v: &[f64]| -> Result<Vec<f64>> {
        match spec.constraint {
            Constraint::ExactSparse { s } => project_sigma_s(v, s),
            Constraint::ApproxSparse { s } => project_l1_l2(v, s),
        }
    };
    let lip = {
        let a_norm = estimate_operator_norm(op, 50);
        (a_norm * c).powi(2)
    };
    let mut z = vec![0.0; n];
    if lip == 0.0 {
        // A = 0: the objective is constant; z = 0 is already optimal in T.
        let objective = l2_norm(&q);
        return Ok(RecoveryResult { x: z, objective, iterations: 0, converged: true });
    }
    let half_obj = |z: &[f64]| -> Result<f64> {
        let az = op.apply(z)?;
        Ok(0.5 * q.iter().zip(&az).map(|(&qi, &ai)| (qi - c * ai) * (qi - c * ai)).sum::<f64>())
    };
    let mut f_prev = half_obj(&z)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < spec.pg_max_iters {
        let az = op.apply(&z)?;
        let residual: Vec<f64> = q.iter().zip(&az).map(|(&qi, &ai)| qi - c * ai).collect();
        let grad_back = op.adjoint(&residual)?;
        let step: Vec<f64> =
            z.iter().zip(&grad_back).map(|(&zi, &g)| zi + (c / lip) * g).collect();
        z = project(&step)?;
        iterations += 1;
        let f = half_obj(&z)?;
        debug_assert!(
            f <= f_prev * (1.0 + 1e-9) + 1e-12,
            "objective increased: {f_prev} -> {f}"
        );
        let denom = f_prev.abs().max(f64::MIN_POSITIVE);
        if (f_prev - f).abs() / denom < spec.pg_tol || f == 0.0 {
            f_prev = f;
            converged = true;
            break;
        }
        f_prev = f;
    }
    let objective = (2.0 * f_prev).sqrt();
    Ok(RecoveryResult { x: z, objective, iterations, converged })
}

/// Dispatch on the configured solver.
pub fn recover(
    sample: &QuantizedSample,
    op: &CirculantOperator,
    spec: &RecoverySpec,
) -> Result<RecoveryResult> {
    match spec.solver {
        Solver::ClosedForm => recover_closed_form(sample, op, spec),
        Solver::MaximizePhi => recover_maximize_phi(sample, op, spec),
        Solver::LassoPg => recover_lasso_pg(sample, op, spec),
    }
}
