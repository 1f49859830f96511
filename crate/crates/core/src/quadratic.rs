//! Jacobi/Legendre symbols and per-prime non-residue statistics.
//!
//! For an odd prime `p`, [`nk_nonresidues`] walks the primes `2, 3, 5, ...`
//! in order (skipping `p` itself, whose symbol is 0) and collects the first
//! `k` with symbol -1. Candidates may exceed `p`: non-residues are classes
//! mod `p`, so e.g. `n_3(11) = 13`.

use std::fmt;

use crate::error::{Error, Result};
use crate::primes::{is_prime_u64, Primes};

/// Candidate primes examined per `n_k` search before giving up.
pub const DEFAULT_SCAN_CAP: u64 = 1_000_000;

/// The k smallest prime quadratic non-residues modulo `p`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NkResult {
    pub p: u64,
    pub values: Vec<u64>,
}

/// A prescribed vector of Legendre symbols for the first `n` primes:
/// `epsilons[k-1]` is the required value of `(p_k / p)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResiduePattern {
    epsilons: Vec<i8>,
}

impl ResiduePattern {
    pub fn new(epsilons: Vec<i8>) -> Result<Self> {
        if epsilons.iter().any(|&e| e != 1 && e != -1) {
            return Err(Error::domain("pattern entries must be +1 or -1"));
        }
        Ok(ResiduePattern { epsilons })
    }

    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilons.is_empty()
    }

    pub fn epsilons(&self) -> &[i8] {
        &self.epsilons
    }

    /// Parse from a `+`/`-` string such as `"+-+"`.
    pub fn parse(s: &str) -> Result<Self> {
        let eps = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1i8),
                '-' => Ok(-1i8),
                other => Err(Error::domain(format!(
                    "invalid pattern character {other:?}; expected '+' or '-'"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        ResiduePattern::new(eps)
    }
}

impl fmt::Display for ResiduePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &e in &self.epsilons {
            f.write_str(if e == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Jacobi symbol `(a/n)` for odd positive `n`; the Legendre symbol when `n`
/// is an odd prime.
pub fn jacobi(a: u64, n: u64) -> Result<i8> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "jacobi lower argument {n} must be odd and positive"
        )));
    }
    Ok(jacobi_unchecked(a, n))
}

/// Binary Jacobi kernel; caller guarantees `n` odd and positive. Sign flips
/// on 2-extraction come from the second supplement (n mod 8 in {3,5}) and
/// on swaps from quadratic reciprocity (both arguments 3 mod 4).
pub(crate) fn jacobi_unchecked(mut a: u64, mut n: u64) -> i8 {
    a %= n;
    let mut sign = 1i8;
    while a != 0 {
        let tz = a.trailing_zeros();
        a >>= tz;
        if tz % 2 == 1 {
            let r = n & 7;
            if r == 3 || r == 5 {
                sign = -sign;
            }
        }
        if a & 3 == 3 && n & 3 == 3 {
            sign = -sign;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 {
        sign
    } else {
        0
    }
}

fn require_odd_prime(p: u64) -> Result<()> {
    if p < 3 || p.is_multiple_of(2) || !is_prime_u64(p) {
        return Err(Error::domain(format!("{p} is not an odd prime")));
    }
    Ok(())
}

/// The `k` smallest prime quadratic non-residues mod `p`, growing the prime
/// table on demand.
pub fn nk_nonresidues(p: u64, k: usize, primes: &Primes) -> Result<NkResult> {
    require_odd_prime(p)?;
    nk_nonresidues_with_cap(p, k, primes, DEFAULT_SCAN_CAP)
}

/// As [`nk_nonresidues`] with an explicit cap on candidates examined.
pub fn nk_nonresidues_with_cap(p: u64, k: usize, primes: &Primes, cap: u64) -> Result<NkResult> {
    if k == 0 {
        return Err(Error::domain("k must be >= 1"));
    }
    let values = nk_scan_with_cap(p, k, primes, cap)?;
    Ok(NkResult { p, values })
}

/// Scan loop shared with the empirical module, which already knows `p` is
/// an odd prime.
pub(crate) fn nk_scan(p: u64, k: usize, primes: &Primes) -> Result<Vec<u64>> {
    nk_scan_with_cap(p, k, primes, DEFAULT_SCAN_CAP)
}

fn nk_scan_with_cap(p: u64, k: usize, primes: &Primes, cap: u64) -> Result<Vec<u64>> {
    let mut values = Vec::with_capacity(k);
    let mut snap = primes.snapshot();
    let mut idx = 0usize;
    let mut examined = 0u64;
    while values.len() < k {
        if idx >= snap.count() as usize {
            snap = primes.ensure_limit(snap.limit().saturating_mul(2))?;
            continue;
        }
        let q = snap.primes()[idx];
        idx += 1;
        if q == p {
            continue; // symbol 0: neither residue nor non-residue
        }
        examined += 1;
        if examined > cap {
            return Err(Error::resource(format!(
                "n_k scan for p = {p} exceeded the {cap}-candidate cap"
            )));
        }
        if jacobi_unchecked(q, p) == -1 {
            values.push(q);
        }
    }
    Ok(values)
}

/// `M(p) = min(n_1(p), n_2(p) - n_1(p))`.
///
/// Equals 1 exactly when 2 and 3 are both non-residues mod `p` (then
/// `n_1 = 2`, `n_2 = 3`); otherwise at least 2.
pub fn m_statistic(p: u64, primes: &Primes) -> Result<u64> {
    let nk = nk_nonresidues(p, 2, primes)?;
    Ok(m_from_pair(nk.values[0], nk.values[1]))
}

#[inline]
pub(crate) fn m_from_pair(n1: u64, n2: u64) -> u64 {
    n1.min(n2 - n1)
}

/// The vector `(p_1/p), ..., (p_n/p)`. Fails if `p` is one of the first `n`
/// primes (its own symbol would be 0).
pub fn residue_pattern(p: u64, n: usize, primes: &Primes) -> Result<ResiduePattern> {
    require_odd_prime(p)?;
    let mut eps = Vec::with_capacity(n);
    for i in 1..=n {
        let q = primes.nth(i as u64)?;
        if q == p {
            return Err(Error::domain(format!(
                "p = {p} is among the first {n} primes; its pattern entry would be 0"
            )));
        }
        eps.push(jacobi_unchecked(q, p));
    }
    ResiduePattern::new(eps)
}
