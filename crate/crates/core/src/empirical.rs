//! Empirical scans over all odd primes up to a bound.
//!
//! [`scan`] computes, for every odd prime `p <= x`, the first non-residues
//! `n_1(p), ..., n_k(p)`, the statistic `M(p)`, gap indicators
//! `n_2 > z n_1` for each configured rational `z`, and (optionally) the
//! residue pattern of the first few primes. All aggregates are exact
//! integers, so the shard merge is associative, commutative, and
//! bit-identical to a sequential scan regardless of shard count. Averages
//! are formed only at reporting time.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primes::Primes;
use crate::quadratic::{jacobi_unchecked, m_from_pair, nk_scan, ResiduePattern};
use crate::series::RationalZ;

#[derive(Debug, Clone)]
pub struct ScanConfig {
    /// Scan bound: every odd prime `p <= x` is visited.
    pub x: u64,
    /// Number of non-residues `n_1..n_k` accumulated per prime.
    pub k_max: usize,
    /// Gap thresholds; each counts primes with `n_2 > z n_1`.
    pub z_list: Vec<RationalZ>,
    /// Residue-pattern depth for density counts; 0 disables.
    pub pattern_n: usize,
    /// Number of contiguous prime-index shards processed in parallel.
    pub shards: usize,
}

impl ScanConfig {
    pub fn new(x: u64, k_max: usize) -> Self {
        ScanConfig {
            x,
            k_max,
            z_list: Vec::new(),
            pattern_n: 0,
            shards: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    /// Full validation, including the `z > 1` requirement enforced at the
    /// CLI boundary. [`scan`] itself accepts degenerate `z` (the indicator
    /// `den*n_2 > num*n_1` is well defined for any positive rational).
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        for z in &self.z_list {
            if !z.is_greater_than_one() {
                return Err(Error::domain(format!(
                    "gap threshold z = {z} must exceed 1"
                )));
            }
        }
        Ok(())
    }

    fn validate_structure(&self) -> Result<()> {
        if self.x < 3 {
            return Err(Error::domain(format!(
                "scan bound x = {} must be >= 3",
                self.x
            )));
        }
        if self.k_max == 0 {
            return Err(Error::domain("k_max must be >= 1"));
        }
        if self.pattern_n > 20 {
            return Err(Error::domain(format!(
                "pattern depth {} exceeds the maximum of 20",
                self.pattern_n
            )));
        }
        if self.shards == 0 {
            return Err(Error::domain("shard count must be >= 1"));
        }
        Ok(())
    }
}

/// The prime attaining the largest `M(p)` seen, with ties resolved toward
/// the smaller prime so that merges are order-independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxM {
    pub p: u64,
    pub m: u64,
}

/// Exact integer aggregates of one scan. Field names are the stable JSON
/// schema; gap counts are keyed `"num/den"` and pattern counts by `+`/`-`
/// strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Number of primes visited: pi(x) - 1 (p = 2 is excluded).
    pub primes_scanned: u64,
    /// `sum_nk[k-1]` is the sum of `n_k(p)` over scanned primes.
    pub sum_nk: Vec<u64>,
    /// Sum of `M(p)` over scanned primes.
    pub sum_m: u64,
    pub gap_counts: BTreeMap<String, u64>,
    pub pattern_counts: BTreeMap<String, u64>,
    pub max_m: MaxM,
}

impl ScanResult {
    fn empty(config: &ScanConfig) -> Self {
        let mut gap_counts = BTreeMap::new();
        for z in &config.z_list {
            gap_counts.insert(z.to_string(), 0);
        }
        ScanResult {
            primes_scanned: 0,
            sum_nk: vec![0; config.k_max],
            sum_m: 0,
            gap_counts,
            pattern_counts: BTreeMap::new(),
            max_m: MaxM { p: 0, m: 0 },
        }
    }

    /// Associative, commutative combination of two shard results.
    pub fn merge(mut self, other: ScanResult) -> ScanResult {
        self.primes_scanned += other.primes_scanned;
        for (a, b) in self.sum_nk.iter_mut().zip(&other.sum_nk) {
            *a += b;
        }
        self.sum_m += other.sum_m;
        for (key, count) in other.gap_counts {
            *self.gap_counts.entry(key).or_insert(0) += count;
        }
        for (key, count) in other.pattern_counts {
            *self.pattern_counts.entry(key).or_insert(0) += count;
        }
        if other.max_m.p != 0 {
            let take = self.max_m.p == 0
                || other.max_m.m > self.max_m.m
                || (other.max_m.m == self.max_m.m && other.max_m.p < self.max_m.p);
            if take {
                self.max_m = other.max_m;
            }
        }
        self
    }
}

/// Scan all odd primes `p <= config.x`, sharded over contiguous prime-index
/// ranges. The result is identical for any shard count.
pub fn scan(config: &ScanConfig, primes: &Primes) -> Result<ScanResult> {
    config.validate_structure()?;
    // p_20 = 71 is the deepest pattern prime; make sure the first snapshot
    // already holds the candidates every inner loop starts from.
    let snap = primes.ensure_limit(config.x.max(100))?;
    let count = snap.prime_count(config.x)? as usize;
    // Indices 1..count of the prime list (skipping p_1 = 2), split into
    // balanced contiguous chunks.
    let first = 1usize;
    let total = count.saturating_sub(first);
    let shards = config.shards.min(total.max(1));
    let ranges: Vec<(usize, usize)> = (0..shards)
        .map(|s| {
            let lo = first + s * total / shards;
            let hi = first + (s + 1) * total / shards;
            (lo, hi)
        })
        .collect();
    let zs: Vec<(u64, u64, String)> = config
        .z_list
        .iter()
        .map(|z| (z.num(), z.den(), z.to_string()))
        .collect();
    let parts: Vec<ScanResult> = ranges
        .into_par_iter()
        .map(|(lo, hi)| scan_range(config, &zs, primes, lo, hi))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts
        .into_iter()
        .fold(ScanResult::empty(config), ScanResult::merge))
}

fn scan_range(
    config: &ScanConfig,
    zs: &[(u64, u64, String)],
    primes: &Primes,
    lo: usize,
    hi: usize,
) -> Result<ScanResult> {
    let snap = primes.snapshot();
    let list = snap.primes();
    let k_eff = config.k_max.max(2);
    let pattern_bound = if config.pattern_n > 0 {
        snap.nth_prime(config.pattern_n as u64)?
    } else {
        0
    };
    let mut acc = ScanResult::empty(config);
    let mut pattern_key = String::with_capacity(config.pattern_n);
    for &p in &list[lo..hi] {
        let nk = nk_scan(p, k_eff, primes)?;
        acc.primes_scanned += 1;
        for (j, &q) in nk.iter().take(config.k_max).enumerate() {
            acc.sum_nk[j] += q;
        }
        let (n1, n2) = (nk[0], nk[1]);
        let m = m_from_pair(n1, n2);
        acc.sum_m += m;
        if m > acc.max_m.m || acc.max_m.p == 0 {
            acc.max_m = MaxM { p, m };
        }
        for (num, den, key) in zs {
            if (*den as u128) * (n2 as u128) > (*num as u128) * (n1 as u128) {
                *acc.gap_counts.get_mut(key).unwrap() += 1;
            }
        }
        if config.pattern_n > 0 && p > pattern_bound {
            pattern_key.clear();
            for &q in &list[..config.pattern_n] {
                let s = jacobi_unchecked(q, p);
                pattern_key.push(if s == 1 { '+' } else { '-' });
            }
            *acc.pattern_counts.entry(pattern_key.clone()).or_insert(0) += 1;
        }
    }
    Ok(acc)
}

/// Count primes `p <= x` (excluding the first `n` primes) whose residue
/// pattern equals `pattern`, together with the model prediction
/// `pi(x) / 2^n`.
///
/// The empty pattern matches every odd prime, so `count = pi(x) - 1` while
/// `expected = pi(x)`: the model does not single out p = 2.
pub fn pattern_density(x: u64, pattern: &ResiduePattern, primes: &Primes) -> Result<(u64, f64)> {
    let n = pattern.len();
    let snap = primes.ensure_limit(x.max(100))?;
    let pi_x = snap.prime_count(x)?;
    let expected = pi_x as f64 / 2f64.powi(n as i32);
    let bound = if n > 0 { snap.nth_prime(n as u64)? } else { 0 };
    let list = snap.primes();
    let mut count = 0u64;
    for &p in &list[1..pi_x as usize] {
        if p <= bound {
            continue;
        }
        let matches = pattern
            .epsilons()
            .iter()
            .enumerate()
            .all(|(j, &e)| jacobi_unchecked(list[j], p) == e);
        if matches {
            count += 1;
        }
    }
    Ok((count, expected))
}
