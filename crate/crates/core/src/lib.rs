//! Statistics of prime quadratic non-residues.
//!
//! For an odd prime `p`, `n_k(p)` is the k-th smallest prime `q` with
//! Legendre symbol `(q/p) = -1`, and `M(p) = min(n_1(p), n_2(p) - n_1(p))`.
//! This crate computes those quantities empirically over all primes up to a
//! bound, evaluates their limiting averages as truncated series with
//! certified tail bounds, and constructs primes realizing prescribed
//! residue patterns via quadratic reciprocity.
//!
//! The crate is organized around an immutable, shareable [`PrimeTable`]
//! (with [`Primes`] as the growable concurrent view), pure symbol
//! computations in [`quadratic`], series evaluators in [`series`],
//! data-parallel deterministic scans in [`empirical`], and residue-class
//! construction in [`pattern`].

pub mod empirical;
pub mod error;
pub mod pattern;
pub mod primes;
pub mod quadratic;
pub mod series;

pub use empirical::{pattern_density, scan, ScanConfig, ScanResult};
pub use error::{Error, Result};
pub use pattern::{
    build_pattern_classes, find_prime_with_pattern, large_m_construction, LargeMRecord,
    PatternClassSet,
};
pub use primes::{PrimeTable, Primes};
pub use quadratic::{
    jacobi, m_statistic, nk_nonresidues, residue_pattern, NkResult, ResiduePattern,
};
pub use series::{
    binom_identity, binom_tail, gap_constant, general_expectation, m_average, mu_k, mu_ratio_check,
    n_of_m_z, GrowthCertificate, RationalZ, SeriesValue,
};
