//! Robust one-bit compressed sensing with randomly subsampled circulant
//! matrices.
//!
//! The measurement model is `q = sign(Ax + ν + τ)` with `A = R_I Γ_ξ` a
//! partial circulant matrix, `ν` analog noise, `τ ~ Uniform[−λ, λ]` dither,
//! and up to `⌊βm⌋` adversarially flipped bits in the observed `q_corr`.
//! The crate provides:
//!
//! * [`rng`] — deterministic, splittable random streams for every
//!   stochastic ingredient;
//! * [`circulant`] — the operator `A` and its adjoint, with an
//!   `O(n log n)` spectral path and an `O(n²)` reference path;
//! * [`quantize`] — the dithered one-bit channel and budgeted adversaries;
//! * [`recover`] — three equivalent recovery programs over sparse or
//!   approximately sparse constraint sets;
//! * [`diagnostics`] — empirical growth/isomorphism certification;
//! * [`harness`] — a config-driven Monte-Carlo sweep runner with CSV/JSON
//!   output (also exposed through the `onebit` CLI).
//!
//! ```
//! use onebit::circulant::CirculantOperator;
//! use onebit::quantize::{measure_and_quantize, Adversary, ChannelConfig};
//! use onebit::recover::{recover_closed_form, Constraint, RecoverySpec, Solver};
//! use onebit::rng::{sample_selectors, sample_sparse_unit, sample_vector, Distribution, SeedTree};
//!
//! let seed = SeedTree::new(42);
//! let (n, m, s) = (256, 128, 3);
//! let xi = sample_vector(&Distribution::gaussian(0.0, 1.0), n, &seed.child(0))?;
//! let rows = sample_selectors(n, m, &seed.child(1))?;
//! let op = CirculantOperator::new(xi, rows, m)?;
//!
//! let x = sample_sparse_unit(n, s, &seed.child(2))?;
//! let channel = ChannelConfig {
//!     noise: Distribution::gaussian(0.0, 0.5),
//!     lambda: 2.0,
//!     beta: 0.0,
//!     adversary: Adversary::None,
//! };
//! let sample = measure_and_quantize(&x, &op, &channel, &seed.child(3))?;
//!
//! let spec = RecoverySpec::new(Constraint::ExactSparse { s }, 2.0, Solver::ClosedForm);
//! let result = recover_closed_form(&sample, &op, &spec)?;
//! let err: f64 = result.x.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
//! assert!(err < 1.0);
//! # Ok::<(), onebit::Error>(())
//! ```

pub mod circulant;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod quantize;
pub mod recover;
pub mod rng;

pub use error::{Error, Result};

// The book's code samples double as doc-tests so the guide cannot drift
// from the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(operators, "../../../book/src/operators.md");
    chapter!(channel, "../../../book/src/channel.md");
    chapter!(recovery, "../../../book/src/recovery.md");
    chapter!(diagnostics, "../../../book/src/diagnostics.md");
    chapter!(experiments, "../../../book/src/experiments.md");
}
