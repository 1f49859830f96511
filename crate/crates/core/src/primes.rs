//! Prime generation and lookup.
//!
//! [`PrimeTable`] is an immutable ascending list of all primes up to a
//! sieved bound, produced by a segmented sieve of Eratosthenes. Indexing is
//! 1-based throughout: `p_1 = 2`. [`Primes`] wraps a table behind a
//! read-write lock so that concurrent consumers can extend it on demand and
//! always observe a consistent published snapshot.

use std::fs;
use std::io::Read;
use std::path::Path;
use std::sync::{Arc, RwLock};

use rand::Rng;

use crate::error::{Error, Result};

/// Hard ceiling on sieve bounds; sieving beyond this is out of scope.
pub const MAX_SIEVE_LIMIT: u64 = 1 << 40;

/// Default number of odd-number flags per sieve segment (covers 2^19
/// integers, sized to stay inside L2 cache).
pub const DEFAULT_SEGMENT_ODDS: usize = 1 << 18;

const CACHE_MAGIC: &[u8; 8] = b"QNRPRIM1";
const CACHE_VERSION: u32 = 1;
const CACHE_SPOT_CHECKS: usize = 16;

/// All primes up to `limit`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    /// Sieve all primes `<= limit`.
    pub fn sieve(limit: u64) -> Result<Self> {
        Self::sieve_with_segment(limit, DEFAULT_SEGMENT_ODDS)
    }

    /// Sieve with an explicit segment size (in odd-number flags).
    pub fn sieve_with_segment(limit: u64, segment_odds: usize) -> Result<Self> {
        check_limit(limit)?;
        let mut primes = vec![2];
        sieve_odd_range(3, limit, segment_odds, &mut primes);
        Ok(PrimeTable { limit, primes })
    }

    /// Largest sieved bound.
    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Number of primes stored, i.e. pi(limit).
    pub fn count(&self) -> u64 {
        self.primes.len() as u64
    }

    /// The full ascending prime list.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// The n-th prime, 1-indexed (`nth_prime(1) = 2`).
    ///
    /// Fails with [`Error::OutOfRange`] when `n` exceeds the table; the
    /// caller should extend and retry.
    pub fn nth_prime(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::domain("prime index is 1-based; n must be >= 1"));
        }
        self.primes
            .get(n as usize - 1)
            .copied()
            .ok_or(Error::OutOfRange {
                what: "prime index n",
                requested: n,
                available: self.count(),
            })
    }

    /// pi(x): the number of primes `<= x`, by binary search.
    pub fn prime_count(&self, x: u64) -> Result<u64> {
        if x > self.limit {
            return Err(Error::OutOfRange {
                what: "prime count bound x",
                requested: x,
                available: self.limit,
            });
        }
        Ok(self.primes.partition_point(|&p| p <= x) as u64)
    }

    /// Return a new table equivalent to `sieve(new_limit)`, reusing this
    /// table's primes as the prefix.
    pub fn extend(&self, new_limit: u64) -> Result<Self> {
        if new_limit <= self.limit {
            return Err(Error::domain(format!(
                "extend target {new_limit} must exceed current limit {}",
                self.limit
            )));
        }
        check_limit(new_limit)?;
        let mut primes = self.primes.clone();
        // Resume on the next odd number past the old limit.
        let start = (self.limit + 1) | 1;
        sieve_odd_range(start, new_limit, DEFAULT_SEGMENT_ODDS, &mut primes);
        Ok(PrimeTable {
            limit: new_limit,
            primes,
        })
    }

    /// Write the table to a binary cache file: magic, version, limit, count,
    /// then the primes as little-endian u64.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + self.primes.len() * 8);
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(&[0u8; 4]); // reserved padding
        buf.extend_from_slice(&self.limit.to_le_bytes());
        buf.extend_from_slice(&self.count().to_le_bytes());
        for &p in &self.primes {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &buf)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Load a table from a binary cache file, validating the header, the
    /// stored count, and the primality of 16 randomly sampled entries.
    pub fn load_cache(path: &Path) -> Result<Self> {
        let mut file = fs::File::open(path)?;
        let mut header = [0u8; 32];
        file.read_exact(&mut header)
            .map_err(|_| Error::Cache("file too short for header".into()))?;
        if &header[0..8] != CACHE_MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        let limit = u64::from_le_bytes(header[16..24].try_into().unwrap());
        let count = u64::from_le_bytes(header[24..32].try_into().unwrap());
        let mut body = Vec::new();
        file.read_to_end(&mut body)?;
        if body.len() as u64 != count * 8 {
            return Err(Error::Cache(format!(
                "expected {count} primes, file holds {}",
                body.len() / 8
            )));
        }
        let primes: Vec<u64> = body
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if primes.is_empty() || primes[0] != 2 || primes.last().copied().unwrap() > limit {
            return Err(Error::Cache("prime list inconsistent with header".into()));
        }
        let mut rng = rand::thread_rng();
        for _ in 0..CACHE_SPOT_CHECKS {
            let idx = rng.gen_range(0..primes.len());
            if !is_prime_u64(primes[idx]) {
                return Err(Error::Cache(format!(
                    "entry {} = {} is not prime",
                    idx, primes[idx]
                )));
            }
        }
        Ok(PrimeTable { limit, primes })
    }
}

fn check_limit(limit: u64) -> Result<()> {
    if limit < 2 {
        return Err(Error::domain(format!("sieve limit {limit} must be >= 2")));
    }
    if limit > MAX_SIEVE_LIMIT {
        return Err(Error::resource(format!(
            "sieve limit {limit} exceeds the 2^40 budget"
        )));
    }
    Ok(())
}

/// Append all primes in `[start, limit]` (start odd, >= 3) to `out`,
/// processing odd numbers in segments of `segment_odds` flags.
fn sieve_odd_range(start: u64, limit: u64, segment_odds: usize, out: &mut Vec<u64>) {
    if start > limit {
        return;
    }
    debug_assert!(start % 2 == 1 && start >= 3);
    let base = base_primes(isqrt(limit));
    let segment_odds = segment_odds.max(64) as u64;
    let mut lo = start;
    let mut flags = vec![false; segment_odds as usize];
    while lo <= limit {
        let hi = limit.min(lo + 2 * segment_odds - 2); // inclusive, odd
        let len = ((hi - lo) / 2 + 1) as usize;
        flags[..len].fill(false);
        for &p in &base {
            if p * p > hi {
                break;
            }
            // First odd multiple of p inside [lo, hi], at least p*p.
            let mut m = (p * p).max(lo.div_ceil(p) * p);
            if m % 2 == 0 {
                m += p;
            }
            let mut i = (m - lo) / 2;
            while i < len as u64 {
                flags[i as usize] = true;
                i += p;
            }
        }
        for (i, &composite) in flags[..len].iter().enumerate() {
            if !composite {
                out.push(lo + 2 * i as u64);
            }
        }
        lo = hi + 2;
    }
}

/// Odd primes up to `bound` by a plain odd-only sieve (used for base primes).
fn base_primes(bound: u64) -> Vec<u64> {
    if bound < 3 {
        return Vec::new();
    }
    let n = ((bound - 1) / 2) as usize; // flags for 3, 5, 7, ...
    let mut composite = vec![false; n];
    let mut primes = Vec::new();
    for i in 0..n {
        if !composite[i] {
            let p = 2 * i as u64 + 3;
            primes.push(p);
            let mut j = (p * p - 3) / 2;
            while (j as usize) < n {
                composite[j as usize] = true;
                j += p;
            }
        }
    }
    primes
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

/// Deterministic Miller-Rabin for u64 (witness set exact below 3.3e24).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// A growable, thread-safe view over a [`PrimeTable`].
///
/// Readers take cheap `Arc` snapshots; extension swaps in a strictly larger
/// table under a write lock, so every snapshot is a prefix-consistent view
/// and results never depend on when growth happened.
#[derive(Debug)]
pub struct Primes {
    table: RwLock<Arc<PrimeTable>>,
}

impl Primes {
    pub fn with_limit(limit: u64) -> Result<Self> {
        Ok(Primes {
            table: RwLock::new(Arc::new(PrimeTable::sieve(limit)?)),
        })
    }

    pub fn from_table(table: PrimeTable) -> Self {
        Primes {
            table: RwLock::new(Arc::new(table)),
        }
    }

    /// Current published table.
    pub fn snapshot(&self) -> Arc<PrimeTable> {
        self.table.read().unwrap().clone()
    }

    /// Grow the table so that `limit() >= limit`. No-op when already large
    /// enough; growth is at least geometric to amortize repeated calls.
    pub fn ensure_limit(&self, limit: u64) -> Result<Arc<PrimeTable>> {
        {
            let cur = self.table.read().unwrap();
            if cur.limit() >= limit {
                return Ok(cur.clone());
            }
        }
        let mut guard = self.table.write().unwrap();
        if guard.limit() >= limit {
            return Ok(guard.clone());
        }
        let target = limit
            .max(guard.limit().saturating_mul(2))
            .min(MAX_SIEVE_LIMIT);
        let grown = Arc::new(guard.extend(target.max(limit))?);
        *guard = grown.clone();
        Ok(grown)
    }

    /// Grow the table so that it holds at least `n` primes.
    pub fn ensure_count(&self, n: u64) -> Result<Arc<PrimeTable>> {
        let mut snap = self.snapshot();
        while snap.count() < n {
            let target = snap.limit().saturating_mul(2).min(MAX_SIEVE_LIMIT);
            if target <= snap.limit() {
                return Err(Error::resource(format!(
                    "cannot grow table to hold {n} primes within the sieve budget"
                )));
            }
            snap = self.ensure_limit(target)?;
        }
        Ok(snap)
    }

    /// The n-th prime (1-indexed), extending the table as needed.
    pub fn nth(&self, n: u64) -> Result<u64> {
        self.ensure_count(n)?.nth_prime(n)
    }

    /// pi(x), extending the table as needed.
    pub fn prime_count(&self, x: u64) -> Result<u64> {
        self.ensure_limit(x.max(2))?.prime_count(x)
    }
}
