//! Truncated series evaluators with certified tail bounds.
//!
//! Every limiting constant here is a sum of positive terms over prime
//! indices, so a truncation always underestimates and the reported
//! `tail_bound` is an upper bound on the omitted mass. Two certificates are
//! used:
//!
//! * geometric domination via the exact term ratio: once the index is past
//!   `3k` (and past `p_N >= 29`, where consecutive prime ratios stay below
//!   6/5) the ratio of consecutive terms is verifiably `<= 0.9`, so the
//!   tail is at most `next_term / (1 - 0.9)`;
//! * for the gap series, `n(m,z) >= m` makes the tail after `M` terms at
//!   most `2^-M` exactly.
//!
//! Term recurrences never form a binomial coefficient explicitly; they
//! multiply by exact ratios instead, so nothing overflows long before the
//! terms vanish.

use crate::error::{Error, Result};
use crate::primes::Primes;

/// Ratio threshold for the geometric stop rule.
const RATIO_STOP: f64 = 0.9;
/// Extra consecutive indices over which the ratio bound is re-verified
/// against the sieved table before a tail certificate is accepted.
const RATIO_VERIFY_WINDOW: usize = 16;
/// The growth exponent admissible for [`general_expectation`]: 4 * sqrt(e).
pub const MAX_GROWTH_EXPONENT: f64 = 6.594726929140;

/// A truncated series value together with a certified bound on the omitted
/// tail and the number of terms summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: u64,
}

/// An exact rational threshold `z = num/den > 1`, kept in lowest terms so
/// that comparisons like `p_n <= z * p_m` stay in integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RationalZ {
    num: u64,
    den: u64,
}

impl RationalZ {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::domain("rational parts must be positive"));
        }
        let g = gcd(num, den);
        Ok(RationalZ {
            num: num / g,
            den: den / g,
        })
    }

    /// Parse `"3/2"` or a bare integer `"2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (
                n.trim().parse::<u64>().map_err(|_| bad_rational(s))?,
                d.trim().parse::<u64>().map_err(|_| bad_rational(s))?,
            ),
            None => (s.trim().parse::<u64>().map_err(|_| bad_rational(s))?, 1),
        };
        RationalZ::new(num, den)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_greater_than_one(&self) -> bool {
        self.num > self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn require_gt_one(&self) -> Result<()> {
        if !self.is_greater_than_one() {
            return Err(Error::domain(format!("threshold z = {self} must exceed 1")));
        }
        Ok(())
    }
}

impl std::fmt::Display for RationalZ {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn bad_rational(s: &str) -> Error {
    Error::domain(format!("cannot parse {s:?} as a rational num/den"))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Compensated (Kahan) accumulator.
#[derive(Default, Clone, Copy)]
struct KahanSum {
    sum: f64,
    err: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.err;
        let t = self.sum + y;
        self.err = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!("eps = {eps} must be positive")));
    }
    Ok(())
}

/// Exact ratio t_{n+1}/t_n of consecutive terms p_n C(n-1,k-1) 2^-n.
fn mu_term_ratio(p_n: u64, p_next: u64, n: u64, k: u64) -> f64 {
    (p_next as f64 / p_n as f64) * (n as f64 / (n - k + 1) as f64) / 2.0
}

/// `mu_k = sum_{n >= k} p_n C(n-1, k-1) 2^-n`, the limiting average of the
/// k-th smallest prime non-residue.
///
/// Terms follow the recurrence `t_{n+1} = t_n * (p_{n+1}/p_n) * n/(n-k+1) / 2`
/// starting from `t_k = p_k 2^-k`. Summation stops at an index `N > 3k`,
/// `N >= 10`, where the exact next-term ratio (and the next
/// [`RATIO_VERIFY_WINDOW`] ratios, checked against the sieved table) is at
/// most 0.9; the tail is then certified as `t_{N+1} / (1 - 0.9) <= eps`.
pub fn mu_k(k: u64, eps: f64, primes: &Primes) -> Result<SeriesValue> {
    if k == 0 {
        return Err(Error::domain("k must be >= 1"));
    }
    check_eps(eps)?;
    let mut sum = KahanSum::default();
    let mut n = k;
    let mut term = primes.nth(k)? as f64 * 0.5f64.powi(k as i32);
    loop {
        sum.add(term);
        let next = term * mu_term_ratio(primes.nth(n)?, primes.nth(n + 1)?, n, k);
        let tail = next / (1.0 - RATIO_STOP);
        if n > 3 * k && n >= 10 && tail <= eps && ratio_window_ok(n, k, primes)? {
            return Ok(SeriesValue {
                value: sum.value(),
                tail_bound: tail,
                terms_used: n - k + 1,
            });
        }
        term = next;
        n += 1;
    }
}

/// Verify the stop-rule ratio at `n` and the next few indices against the
/// sieved table.
fn ratio_window_ok(n: u64, k: u64, primes: &Primes) -> Result<bool> {
    for i in 0..=RATIO_VERIFY_WINDOW as u64 {
        let m = n + i;
        if mu_term_ratio(primes.nth(m)?, primes.nth(m + 1)?, m, k) > RATIO_STOP {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The partial sum of the first `terms` entries of the mu_k series
/// (exposed for finite hand-check sums; no tail certificate).
pub fn mu_k_partial(k: u64, terms: u64, primes: &Primes) -> Result<f64> {
    if k == 0 || terms == 0 {
        return Err(Error::domain("k and terms must be >= 1"));
    }
    let mut sum = KahanSum::default();
    let mut term = primes.nth(k)? as f64 * 0.5f64.powi(k as i32);
    for n in k..k + terms {
        sum.add(term);
        term *= mu_term_ratio(primes.nth(n)?, primes.nth(n + 1)?, n, k);
    }
    Ok(sum.value())
}

/// `n(m, z)`: the largest `n` with `p_n <= z * p_m`, decided by the exact
/// integer comparison `den * p_n <= num * p_m`. Always `>= m` for `z > 1`.
pub fn n_of_m_z(m: u64, z: RationalZ, primes: &Primes) -> Result<u64> {
    if m == 0 {
        return Err(Error::domain("m must be >= 1"));
    }
    z.require_gt_one()?;
    let target = z.num() as u128 * primes.nth(m)? as u128;
    let mut n = m;
    while z.den() as u128 * primes.nth(n + 1)? as u128 <= target {
        n += 1;
    }
    Ok(n)
}

/// `sum_{m >= 1} 2^-n(m,z)`, the limiting frequency of `n_2 > z n_1`.
///
/// Since `n(m,z) >= m` the tail after `M` terms is at most `2^-M`, which is
/// the certificate; summation stops at the first `M` with `2^-M <= eps`.
pub fn gap_constant(z: RationalZ, eps: f64, primes: &Primes) -> Result<SeriesValue> {
    z.require_gt_one()?;
    check_eps(eps)?;
    let mut sum = KahanSum::default();
    let mut m = 0u64;
    loop {
        m += 1;
        let n = n_of_m_z(m, z, primes)?;
        sum.add(0.5f64.powi(n.min(2_000) as i32));
        let tail = 0.5f64.powi(m.min(2_000) as i32);
        if tail <= eps {
            return Ok(SeriesValue {
                value: sum.value(),
                tail_bound: tail,
                terms_used: m,
            });
        }
    }
}

/// `sum_{m>=1} sum_{k>m} min(p_m, p_k - p_m) 2^-k`, the limiting average
/// of `M(p)`.
///
/// Each inner row is summed exactly: once `p_k - p_m >= p_m` the minimum
/// saturates at `p_m` and the geometric remainder `p_m 2^-(k-1)` closes the
/// row in closed form. Only the outer truncation contributes to the tail,
/// bounded by `sum_{m > M} p_m 2^-m` via the mu_1 ratio rule.
pub fn m_average(eps: f64, primes: &Primes) -> Result<SeriesValue> {
    check_eps(eps)?;
    let mut sum = KahanSum::default();
    let mut m = 0u64;
    loop {
        m += 1;
        sum.add(m_average_row(m, primes)?);
        // Outer tail: rows beyond m are each at most p_j 2^-j.
        let next = primes.nth(m + 1)? as f64 * 0.5f64.powi(m as i32 + 1);
        let tail = next / (1.0 - RATIO_STOP);
        if m >= 10 && tail <= eps && ratio_window_ok(m, 1, primes)? {
            return Ok(SeriesValue {
                value: sum.value(),
                tail_bound: tail,
                terms_used: m,
            });
        }
    }
}

/// One outer row of the M(p) average: `sum_{k > m} min(p_m, p_k - p_m) 2^-k`,
/// exact because the minimum saturates.
pub(crate) fn m_average_row(m: u64, primes: &Primes) -> Result<f64> {
    let p_m = primes.nth(m)?;
    let mut row = KahanSum::default();
    let mut k = m + 1;
    loop {
        let d = primes.nth(k)? - p_m;
        if d >= p_m {
            // min stays p_m from here on: geometric remainder.
            row.add(p_m as f64 * 0.5f64.powi(k as i32 - 1));
            return Ok(row.value());
        }
        row.add(d as f64 * 0.5f64.powi(k as i32));
        k += 1;
    }
}

/// Caller-supplied growth certificate `|f(t_1..t_k)| <= coeff * max(t_i)^exponent`
/// with `exponent < 4 sqrt(e)`, required by [`general_expectation`].
#[derive(Debug, Clone, Copy)]
pub struct GrowthCertificate {
    pub coeff: f64,
    pub exponent: f64,
}

impl GrowthCertificate {
    fn validate(&self) -> Result<()> {
        if !(self.coeff > 0.0) || !self.coeff.is_finite() {
            return Err(Error::Contract(format!(
                "growth coefficient {} must be positive and finite",
                self.coeff
            )));
        }
        if !(self.exponent > 0.0) || self.exponent >= MAX_GROWTH_EXPONENT {
            return Err(Error::Contract(format!(
                "growth exponent {} must lie in (0, 4*sqrt(e))",
                self.exponent
            )));
        }
        Ok(())
    }

    fn bound(&self, max_arg: u64) -> f64 {
        self.coeff * (max_arg as f64).powf(self.exponent)
    }
}

/// `sum over 1 <= m_1 < ... < m_k of f(p_{m_1}, ..., p_{m_k}) / 2^{m_k}`:
/// the limiting average of `f(n_1(p), ..., n_k(p))` for any statistic `f`
/// obeying the growth certificate.
///
/// Tuples are enumerated grouped by the largest index `m_k = M`; the tail
/// over `m_k > M` is certified by the dominating series
/// `coeff * p_m^c * m^(k-1) * 2^-m` with the geometric ratio stop rule.
/// Every evaluated tuple is checked against the certificate; a violation is
/// a contract error.
pub fn general_expectation<F>(
    f: F,
    k: usize,
    cert: GrowthCertificate,
    eps: f64,
    primes: &Primes,
) -> Result<SeriesValue>
where
    F: Fn(&[u64]) -> f64,
{
    if k == 0 {
        return Err(Error::domain("k must be >= 1"));
    }
    cert.validate()?;
    check_eps(eps)?;
    let mut sum = KahanSum::default();
    let mut big_m = k as u64;
    loop {
        let weight = 0.5f64.powi(big_m.min(2_000) as i32);
        let p_last = primes.nth(big_m)?;
        let cap = cert.bound(p_last);
        let mut args = vec![0u64; k];
        args[k - 1] = p_last;
        for_each_subset(big_m - 1, k - 1, primes, &mut args, &mut |args| {
            let v = f(args);
            if !v.is_finite() || v.abs() > cap {
                return Err(Error::Contract(format!(
                    "statistic value {v} at {args:?} violates the growth certificate (bound {cap})"
                )));
            }
            sum.add(v * weight);
            Ok(())
        })?;
        // Dominating-series tail after big_m.
        let next = big_m + 1;
        let u_next = cert.bound(primes.nth(next)?)
            * (next as f64).powi(k as i32 - 1)
            * 0.5f64.powi(next.min(2_000) as i32);
        let tail = u_next / (1.0 - RATIO_STOP);
        if big_m > 3 * k as u64
            && big_m >= 10
            && tail <= eps
            && dominating_ratio_window_ok(big_m, k, &cert, primes)?
        {
            return Ok(SeriesValue {
                value: sum.value(),
                tail_bound: tail,
                terms_used: big_m - k as u64 + 1,
            });
        }
        big_m += 1;
    }
}

/// Enumerate all strictly increasing index tuples of length `want` inside
/// `[1, max_idx]`, writing prime values into `args[..want]` and invoking the
/// visitor with the full argument slice.
fn for_each_subset(
    max_idx: u64,
    want: usize,
    primes: &Primes,
    args: &mut [u64],
    visit: &mut dyn FnMut(&[u64]) -> Result<()>,
) -> Result<()> {
    fn rec(
        lo: u64,
        max_idx: u64,
        pos: usize,
        want: usize,
        primes: &Primes,
        args: &mut [u64],
        visit: &mut dyn FnMut(&[u64]) -> Result<()>,
    ) -> Result<()> {
        if pos == want {
            return visit(args);
        }
        // Leave room for the remaining entries.
        let hi = max_idx - (want - pos - 1) as u64;
        for idx in lo..=hi {
            let p = primes.nth(idx)?;
            args[pos] = p;
            rec(idx + 1, max_idx, pos + 1, want, primes, args, visit)?;
        }
        Ok(())
    }
    if want == 0 {
        return visit(args);
    }
    rec(1, max_idx, 0, want, primes, args, visit)
}

fn dominating_ratio_window_ok(
    m: u64,
    k: usize,
    cert: &GrowthCertificate,
    primes: &Primes,
) -> Result<bool> {
    for i in 0..=RATIO_VERIFY_WINDOW as u64 {
        let j = m + i;
        let ratio = (primes.nth(j + 1)? as f64 / primes.nth(j)? as f64).powf(cert.exponent)
            * ((j + 1) as f64 / j as f64).powi(k as i32 - 1)
            / 2.0;
        if ratio > RATIO_STOP {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Partial sum `sum_{n=k}^{N} C(n,k) 2^-n`; converges to 2 for every k.
pub fn binom_identity(k: u64, n_max: u64) -> f64 {
    assert!(n_max >= k, "n_max must be >= k");
    let mut sum = KahanSum::default();
    let mut term = 0.5f64.powi(k.min(2_000) as i32); // C(k,k) 2^-k
    for n in k..=n_max {
        sum.add(term);
        term *= (n + 1) as f64 / (n + 1 - k) as f64 / 2.0;
    }
    sum.value()
}

/// `sum_{n > 3k} n C(n,k) 2^-n`, summed until terms fall below 1e-15 of the
/// running total.
pub fn binom_tail(k: u64) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    // Walk C(n,k) 2^-n up to the first summed index n = 3k + 1.
    let mut c_term = 0.5f64.powi(k.min(2_000) as i32);
    for n in k..3 * k + 1 {
        c_term *= (n + 1) as f64 / (n + 1 - k) as f64 / 2.0;
    }
    let mut sum = KahanSum::default();
    let mut n = 3 * k + 1;
    loop {
        let term = n as f64 * c_term;
        sum.add(term);
        if term < 1e-15 * sum.value() {
            return sum.value();
        }
        c_term *= (n + 1) as f64 / (n + 1 - k) as f64 / 2.0;
        n += 1;
    }
}

/// `mu_k / p_{2k}`; approaches 1 as k grows.
pub fn mu_ratio_check(k: u64, primes: &Primes) -> Result<f64> {
    let mu = mu_k(k, 1e-9, primes)?;
    Ok(mu.value / primes.nth(2 * k)? as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shared() -> Primes {
        Primes::with_limit(10_000).unwrap()
    }

    #[test]
    fn mu1_first_four_terms_hand_sum() {
        let primes = shared();
        // 2/2 + 3/4 + 5/8 + 7/16
        assert_eq!(mu_k_partial(1, 4, &primes).unwrap(), 2.8125);
    }

    #[test]
    fn mu1_matches_published_digits() {
        let primes = shared();
        let v = mu_k(1, 1e-6, &primes).unwrap();
        assert!(v.tail_bound <= 1e-6);
        assert!((3.674..3.675).contains(&v.value), "mu_1 = {}", v.value);
    }

    #[test]
    fn mu2_minus_mu1_matches_published_digits() {
        let primes = shared();
        let d = mu_k(2, 1e-8, &primes).unwrap().value - mu_k(1, 1e-8, &primes).unwrap().value;
        assert!((4.352..4.353).contains(&d), "mu_2 - mu_1 = {d}");
    }

    #[test]
    fn mu_k_rejects_bad_input() {
        let primes = shared();
        assert!(matches!(mu_k(0, 1e-6, &primes), Err(Error::Domain(_))));
        assert!(matches!(mu_k(1, 0.0, &primes), Err(Error::Domain(_))));
        assert!(matches!(mu_k(1, -1.0, &primes), Err(Error::Domain(_))));
    }

    #[test]
    fn mu_k_first_term_floor() {
        let primes = shared();
        for k in [1u64, 2, 5, 10] {
            let floor = primes.nth(k).unwrap() as f64 * 0.5f64.powi(k as i32);
            assert!(mu_k(k, 1e-6, &primes).unwrap().value >= floor);
        }
    }

    #[test]
    fn n_of_m_z_examples() {
        let primes = shared();
        let z32 = RationalZ::new(3, 2).unwrap();
        assert_eq!(n_of_m_z(1, z32, &primes).unwrap(), 2); // p_2 = 3 <= 3 < p_3
        assert_eq!(n_of_m_z(2, z32, &primes).unwrap(), 2); // 2*5 = 10 > 9
        let z_barely = RationalZ::new(1_000_000_001, 1_000_000_000).unwrap();
        for m in [1u64, 2, 7, 30] {
            assert!(n_of_m_z(m, z_barely, &primes).unwrap() >= m);
        }
    }

    #[test]
    fn gap_constant_13_terms_give_three_digits() {
        let primes = shared();
        let z = RationalZ::new(3, 2).unwrap();
        let v = gap_constant(z, 0.5f64.powi(13), &primes).unwrap();
        assert_eq!(v.terms_used, 13);
        let complement = 1.0 - v.value;
        assert!(
            (0.350..0.351).contains(&complement),
            "complement = {complement}"
        );
    }

    #[test]
    fn gap_constant_z2_probability_pair() {
        let primes = shared();
        let z = RationalZ::new(2, 1).unwrap();
        let v = gap_constant(z, 1e-6, &primes).unwrap();
        assert!((0.459..0.460).contains(&v.value), "value = {}", v.value);
        let complement = 1.0 - v.value;
        assert!(
            (0.540..0.541).contains(&complement),
            "complement = {complement}"
        );
        assert_eq!(v.value + (1.0 - v.value), 1.0);
    }

    #[test]
    fn gap_constant_in_unit_interval_and_monotone_in_z() {
        let primes = shared();
        let zs = [
            RationalZ::new(6, 5).unwrap(),
            RationalZ::new(3, 2).unwrap(),
            RationalZ::new(2, 1).unwrap(),
            RationalZ::new(3, 1).unwrap(),
        ];
        let vals: Vec<f64> = zs
            .iter()
            .map(|&z| gap_constant(z, 1e-9, &primes).unwrap().value)
            .collect();
        for v in &vals {
            assert!(*v > 0.0 && *v <= 1.0);
        }
        for w in vals.windows(2) {
            assert!(
                w[0] >= w[1],
                "gap constant must not increase with z: {vals:?}"
            );
        }
    }

    #[test]
    fn gap_constant_rejects_z_at_most_one() {
        let primes = shared();
        let z1 = RationalZ::new(1, 1).unwrap();
        assert!(matches!(
            gap_constant(z1, 1e-6, &primes),
            Err(Error::Domain(_))
        ));
        let z_half = RationalZ::new(1, 2).unwrap();
        assert!(matches!(
            n_of_m_z(1, z_half, &primes),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rational_z_reduces_and_parses() {
        let z = RationalZ::new(6, 4).unwrap();
        assert_eq!((z.num(), z.den()), (3, 2));
        assert_eq!(RationalZ::parse("3/2").unwrap(), z);
        assert_eq!(
            RationalZ::parse("2").unwrap(),
            RationalZ::new(2, 1).unwrap()
        );
        assert!(RationalZ::parse("x/2").is_err());
        assert!(RationalZ::new(0, 1).is_err());
    }

    #[test]
    fn m_average_first_row() {
        let primes = shared();
        // Row m = 1 opens with min(2, 3-2)/4 = 0.25 and saturates at k = 3:
        // 1/4 + 2 * sum_{k>=3} 2^-k = 1/4 + 1/2.
        assert_eq!(m_average_row(1, &primes).unwrap(), 0.75);
    }

    #[test]
    fn m_average_matches_published_digits() {
        let primes = shared();
        let v = m_average(5e-4, &primes).unwrap();
        assert!(v.tail_bound <= 5e-4);
        assert!((2.504..2.505).contains(&v.value), "m_average = {}", v.value);
        assert!(v.value >= 2.0);
    }

    #[test]
    fn general_expectation_reproduces_mu_k() {
        let primes = shared();
        for k in [1usize, 2] {
            let cert = GrowthCertificate {
                coeff: 1.0,
                exponent: 1.0,
            };
            let g =
                general_expectation(|t| *t.last().unwrap() as f64, k, cert, 1e-7, &primes).unwrap();
            let mu = mu_k(k as u64, 1e-7, &primes).unwrap();
            assert!(
                (g.value - mu.value).abs() <= g.tail_bound + mu.tail_bound,
                "k = {k}: {} vs {}",
                g.value,
                mu.value
            );
        }
    }

    #[test]
    fn general_expectation_reproduces_gap_constant() {
        let primes = shared();
        for (num, den) in [(3u64, 2u64), (2, 1)] {
            let z = RationalZ::new(num, den).unwrap();
            let cert = GrowthCertificate {
                coeff: 1.0,
                exponent: 0.5,
            };
            let g = general_expectation(
                |t| {
                    if (num as u128) * (t[0] as u128) < (den as u128) * (t[1] as u128) {
                        1.0
                    } else {
                        0.0
                    }
                },
                2,
                cert,
                1e-7,
                &primes,
            )
            .unwrap();
            let dedicated = gap_constant(z, 1e-7, &primes).unwrap();
            assert!(
                (g.value - dedicated.value).abs() <= g.tail_bound + dedicated.tail_bound,
                "z = {z}: {} vs {}",
                g.value,
                dedicated.value
            );
        }
    }

    #[test]
    fn general_expectation_reproduces_m_average() {
        let primes = shared();
        let cert = GrowthCertificate {
            coeff: 1.0,
            exponent: 1.0,
        };
        let g =
            general_expectation(|t| t[0].min(t[1] - t[0]) as f64, 2, cert, 1e-6, &primes).unwrap();
        let dedicated = m_average(1e-6, &primes).unwrap();
        assert!((g.value - dedicated.value).abs() <= g.tail_bound + dedicated.tail_bound);
    }

    #[test]
    fn general_expectation_rejects_bad_certificates() {
        let primes = shared();
        let f = |t: &[u64]| t[0] as f64;
        let too_big = GrowthCertificate {
            coeff: 1.0,
            exponent: MAX_GROWTH_EXPONENT,
        };
        assert!(matches!(
            general_expectation(f, 1, too_big, 1e-6, &primes),
            Err(Error::Contract(_))
        ));
        let non_positive = GrowthCertificate {
            coeff: 0.0,
            exponent: 1.0,
        };
        assert!(matches!(
            general_expectation(f, 1, non_positive, 1e-6, &primes),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn general_expectation_detects_certificate_violation() {
        let primes = shared();
        // Claims |f| <= max^0.5 but returns max^2.
        let cert = GrowthCertificate {
            coeff: 1.0,
            exponent: 0.5,
        };
        let res = general_expectation(|t| (t[0] as f64) * (t[0] as f64), 1, cert, 1e-6, &primes);
        assert!(matches!(res, Err(Error::Contract(_))));
    }

    #[test]
    fn binom_identity_converges_to_two() {
        assert!((binom_identity(0, 50) - 2.0).abs() < 1e-12);
        assert!((binom_identity(1, 60) - 2.0).abs() < 1e-12);
        assert!((binom_identity(5, 200) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn binom_tail_k1_closed_form() {
        // Oracle: sum n^2 x^n = x(1+x)/(1-x)^3 gives 6 at x = 1/2, and the
        // n = 1..3 terms are 1/2 + 1 + 9/8, so the n > 3 tail is 3.375.
        let oracle = 6.0 - (0.5 + 1.0 + 9.0 / 8.0);
        assert_eq!(oracle, 3.375);
        assert!((binom_tail(1) - oracle).abs() < 1e-12);
    }

    #[test]
    fn binom_tail_ratio_bounded_and_eventually_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 1..=30u64 {
            let t = binom_tail(k);
            let ratio = t / (29.0f64 / 32.0).powi(k as i32);
            // Exact-rational evaluation pins the maximum of the ratio at
            // 6.435 (attained at k = 8); 6.5 is the frozen constant.
            assert!(ratio > 0.0 && ratio < 6.5, "k = {k}: ratio = {ratio}");
            // The tail itself peaks at k = 3 (3.375, 3.90625, 4.046875 from
            // the closed-form oracle) and decreases strictly afterwards.
            if k >= 4 {
                assert!(t < prev, "k = {k}: {t} !< {prev}");
            }
            prev = t;
        }
        assert!((binom_tail(2) - 3.90625).abs() < 1e-12);
        assert!((binom_tail(3) - 4.046875).abs() < 1e-12);
    }

    #[test]
    fn mu_ratio_oracle_values() {
        // Frozen from an exact-rational evaluation of the series. Note the
        // near-coincidence at k = 10: mu_10 = 70.99479 against p_20 = 71,
        // so the approach of the ratio to 1 is not monotone in k.
        let primes = shared();
        let r1 = mu_ratio_check(1, &primes).unwrap();
        assert!((r1 - 1.224881322).abs() < 1e-6, "r1 = {r1}");
        let r10 = mu_ratio_check(10, &primes).unwrap();
        assert!((r10 - 0.999926573).abs() < 1e-6, "r10 = {r10}");
        let r50 = mu_ratio_check(50, &primes).unwrap();
        assert!((r50 - 0.989079719).abs() < 1e-6, "r50 = {r50}");
    }

    #[test]
    fn mu_ratio_trend_toward_one() {
        // The honest trend statement: every sampled ratio past k = 40 is
        // closer to 1 than every one at k <= 3.
        let primes = shared();
        let early_worst = [1u64, 2, 3]
            .iter()
            .map(|&k| (mu_ratio_check(k, &primes).unwrap() - 1.0).abs())
            .fold(f64::INFINITY, f64::min);
        for k in [40u64, 50, 60] {
            let late = (mu_ratio_check(k, &primes).unwrap() - 1.0).abs();
            assert!(late < early_worst, "k = {k}: {late} !< {early_worst}");
        }
    }
}
