//! # prime-entropy
//!
//! Tools for comparing the residues of primes modulo `q` against the
//! iid-uniform random model:
//!
//! | Module | Provides |
//! |--------|----------|
//! | [`numerics`] | log-factorials, log-binomials, log-sum-exp, Stirling brackets |
//! | [`census`] | segmented sieve, `π(x; a mod q)` censuses, CSV cache |
//! | [`entropy`] | entropy, cross-entropy, KL divergence, `τ_q`, Pinsker gaps |
//! | [`chisq`] | regularized incomplete gamma and the Wilks χ² percentile |
//! | [`bound`] | rigorous left-tail bound for the KL divergence of a uniform multinomial |
//! | [`oracle`] | exhaustive type-class enumeration used to check the bound |
//! | [`walk`] | prime races, first-passage laws and percentile brackets |
//! | [`table`] | the per-modulus KL table and its text/CSV rendering |
//!
//! Probabilities that can get very small are carried as natural logarithms
//! ([`numerics::LogValue`]) until they are printed.
//!
//! Data-parallel loops go through [`Execution`]. With the `parallel` feature
//! (on by default) `Execution::Parallel` runs on the rayon global pool;
//! without it every loop runs sequentially and results are identical.

pub mod bound;
pub mod census;
pub mod chisq;
pub mod entropy;
mod error;
pub mod exec;
pub mod format;
pub mod numerics;
pub mod oracle;
pub mod table;
pub mod walk;

pub use error::Error;
pub use exec::Execution;

pub type Result<T, E = Error> = std::result::Result<T, E>;
