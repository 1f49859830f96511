//! Residue-class construction for prescribed patterns, and the explicit
//! large-M(p) search built on it.
//!
//! For a pattern of Legendre symbols over the first `n` primes, the primes
//! realizing it form a union of residue classes modulo `q = 8 p_2 ... p_n`.
//! The classes split into two branches by `t mod 4`: in the `t = 1 mod 4`
//! branch reciprocity leaves each target `(p/p_i) = e_i` unchanged, while in
//! the `t = 3 mod 4` branch the target for `p_i = 3 mod 4` flips sign. The
//! mod-8 component pins `(2/p)` through the second supplement. Each branch
//! is a CRT product of one mod-8 class with an explicit residue or
//! non-residue class set mod each odd `p_i`, giving exactly
//! `phi(q) / 2^n` classes in total.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes::Primes;
use crate::quadratic::{m_statistic, nk_nonresidues, residue_pattern, ResiduePattern};

/// Largest class set materialized before reporting a resource error
/// (classes are stored explicitly; the count is phi(q) / 2^n).
pub const MAX_CLASS_COUNT: u64 = 1 << 23;

/// The residue classes `t mod q` whose primes `p > p_n` realize a pattern.
#[derive(Debug, Clone)]
pub struct PatternClassSet {
    q: u64,
    n: usize,
    classes: Vec<u64>,
}

impl PatternClassSet {
    /// The modulus `8 p_2 ... p_n`.
    pub fn q(&self) -> u64 {
        self.q
    }

    /// Pattern length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The classes, sorted ascending. `|classes| = phi(q) / 2^n`.
    pub fn classes(&self) -> &[u64] {
        &self.classes
    }

    pub fn contains(&self, t: u64) -> bool {
        self.classes.binary_search(&(t % self.q)).is_ok()
    }
}

/// Build the class set realizing `pattern` (Legendre symbols of the first
/// `n` primes). Fails with a resource error when `q` overflows 64 bits or
/// the class set would be too large to materialize; the error reports the
/// largest feasible `n`.
pub fn build_pattern_classes(pattern: &ResiduePattern, primes: &Primes) -> Result<PatternClassSet> {
    let n = pattern.len();
    if n == 0 {
        return Err(Error::domain("pattern must have length >= 1"));
    }
    let eps = pattern.epsilons();
    let odd_primes: Vec<u64> = (2..=n as u64)
        .map(|i| primes.nth(i))
        .collect::<Result<_>>()?;

    let mut q: u64 = 8;
    let mut class_count: u64 = 2;
    for (i, &p) in odd_primes.iter().enumerate() {
        q = q.checked_mul(p).ok_or_else(|| overflow_error(primes))?;
        class_count = class_count.saturating_mul((p - 1) / 2);
        if class_count > MAX_CLASS_COUNT {
            return Err(Error::resource(format!(
                "class set for n = {n} would hold {class_count}+ entries \
                 (limit {MAX_CLASS_COUNT}); feasible pattern length here is {}",
                i + 1
            )));
        }
    }

    let mut classes = Vec::with_capacity(class_count as usize);
    // Branch A: t = 1 mod 4, targets unchanged. Branch B: t = 3 mod 4,
    // target for p_i flips when p_i = 3 mod 4.
    for branch_three_mod_four in [false, true] {
        let r8: u64 = match (eps[0] == 1, branch_three_mod_four) {
            (true, false) => 1,
            (true, true) => 7,
            (false, false) => 5,
            (false, true) => 3,
        };
        let mut residues: Vec<u64> = vec![r8];
        let mut modulus: u64 = 8;
        for (i, &p) in odd_primes.iter().enumerate() {
            let mut target = eps[i + 1];
            if branch_three_mod_four && p % 4 == 3 {
                target = -target;
            }
            let allowed = symbol_classes(p, target);
            let inv = inverse_mod(modulus % p, p);
            let mut next = Vec::with_capacity(residues.len() * allowed.len());
            for &r in &residues {
                for &a in &allowed {
                    // x = r mod modulus, x = a mod p.
                    let shift = (a + p - r % p) % p;
                    next.push(r + modulus * ((shift * inv) % p));
                }
            }
            residues = next;
            modulus *= p;
        }
        debug_assert_eq!(modulus, q);
        classes.extend(residues);
    }
    classes.sort_unstable();
    debug_assert_eq!(classes.len() as u64, class_count);
    Ok(PatternClassSet { q, n, classes })
}

fn overflow_error(primes: &Primes) -> Error {
    // Report how long a pattern still keeps q inside 64 bits.
    let mut q: u64 = 8;
    let mut n = 1u64;
    while let Ok(p) = primes.nth(n + 1) {
        match q.checked_mul(p) {
            Some(next) => {
                q = next;
                n += 1;
            }
            None => break,
        }
    }
    Error::resource(format!(
        "pattern modulus q = 8 p_2 ... p_n overflows 64 bits; the maximum feasible n is {n}"
    ))
}

/// Nonzero classes mod the odd prime `p` with the given Legendre symbol,
/// found by marking squares directly.
fn symbol_classes(p: u64, symbol: i8) -> Vec<u64> {
    let mut is_square = vec![false; p as usize];
    let mut a = 1u64;
    while a <= (p - 1) / 2 {
        is_square[(a * a % p) as usize] = true;
        a += 1;
    }
    (1..p)
        .filter(|&c| is_square[c as usize] == (symbol == 1))
        .collect()
}

fn inverse_mod(a: u64, p: u64) -> u64 {
    // Extended Euclid; p is a small odd prime and a is nonzero mod p.
    let (mut old_r, mut r) = (a as i64, p as i64);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    debug_assert_eq!(old_r, 1);
    old_s.rem_euclid(p as i64) as u64
}

/// The smallest prime `p <= limit` with `p > p_n` realizing the pattern, or
/// `None`. The sieve grows geometrically, so absence at a large limit does
/// not pay the full sieve cost when a witness appears early.
pub fn find_prime_with_pattern(
    pattern: &ResiduePattern,
    limit: u64,
    primes: &Primes,
) -> Result<Option<u64>> {
    let classes = build_pattern_classes(pattern, primes)?;
    find_prime_in_classes(&classes, pattern, limit, primes)
}

fn find_prime_in_classes(
    classes: &PatternClassSet,
    pattern: &ResiduePattern,
    limit: u64,
    primes: &Primes,
) -> Result<Option<u64>> {
    let p_n = primes.nth(classes.n() as u64)?;
    let mut lo = p_n + 1;
    let mut bound = primes.snapshot().limit().max(1 << 16).min(limit);
    loop {
        let snap = primes.ensure_limit(bound)?;
        let list = snap.primes();
        let start = list.partition_point(|&p| p < lo);
        let end = list.partition_point(|&p| p <= limit.min(snap.limit()));
        for &p in &list[start..end] {
            if classes.contains(p) {
                let observed = residue_pattern(p, classes.n(), primes)?;
                assert_eq!(
                    &observed, pattern,
                    "class membership and direct symbols disagree at p = {p}"
                );
                return Ok(Some(p));
            }
        }
        if snap.limit() >= limit {
            return Ok(None);
        }
        lo = snap.limit() + 1;
        bound = snap.limit().saturating_mul(4).min(limit);
    }
}

/// Outcome of [`large_m_construction`]: the modulus and guarantee are always
/// present; `prime`/`m_value` are set when the search succeeded.
#[derive(Debug, Clone, Serialize)]
pub struct LargeMRecord {
    pub y: u64,
    pub q: u64,
    pub m_index: u64,
    pub n_index: u64,
    pub guarantee: u64,
    pub prime: Option<u64>,
    pub m_value: Option<u64>,
}

/// Force a large `M(p)` by prescribing the pattern in which the largest
/// prime `p_m <= y/2` is the only non-residue among the first
/// `n = pi(y)` primes. Any prime realizing it has `n_1(p) = p_m` and
/// `n_2(p) > p_n`, hence `M(p) >= min(p_m, p_n - p_m)`, about `y/2`.
pub fn large_m_construction(y: u64, search_limit: u64, primes: &Primes) -> Result<LargeMRecord> {
    if y < 4 {
        return Err(Error::domain(format!("y = {y} must be >= 4")));
    }
    let m_index = primes.prime_count(y / 2)?;
    let n_index = primes.prime_count(y)?;
    debug_assert!(m_index >= 1 && n_index > m_index);
    let p_m = primes.nth(m_index)?;
    let p_n = primes.nth(n_index)?;
    let guarantee = p_m.min(p_n - p_m);

    let eps: Vec<i8> = (1..=n_index)
        .map(|j| if j == m_index { -1 } else { 1 })
        .collect();
    let pattern = ResiduePattern::new(eps)?;
    let classes = build_pattern_classes(&pattern, primes)?;
    let mut record = LargeMRecord {
        y,
        q: classes.q(),
        m_index,
        n_index,
        guarantee,
        prime: None,
        m_value: None,
    };

    if let Some(p) = find_prime_in_classes(&classes, &pattern, search_limit, primes)? {
        let nk = nk_nonresidues(p, 2, primes)?;
        // Every prime <= p_n other than p_m is a residue of p, so the
        // second non-residue must lie past p_n.
        assert_eq!(nk.values[0], p_m, "n_1 of the constructed prime");
        assert!(nk.values[1] > p_n, "n_2 must exceed p_n");
        let m_value = m_statistic(p, primes)?;
        assert!(m_value >= guarantee, "measured M(p) below the guarantee");
        record.prime = Some(p);
        record.m_value = Some(m_value);
    }
    Ok(record)
}

/// Default search horizon for [`large_m_construction`]: far below the
/// Linnik-style `q^5` worst case, since in practice the least matching
/// prime appears around `q * polylog(q)`.
pub fn default_search_limit(q: u64) -> u64 {
    q.saturating_mul(10_000).min(1_000_000_000)
}
