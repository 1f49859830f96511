//! `qnr`: prime quadratic non-residue statistics from the command line.
//!
//! Every command prints a single JSON envelope on stdout
//! (`{command, params, result, version}`); human-readable summaries go to
//! stderr. Exit codes: 0 success, 2 bad input, 3 I/O failure, 4 resource
//! limit.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use qnr_core::{
    binom_identity, binom_tail, build_pattern_classes, find_prime_with_pattern, gap_constant,
    large_m_construction, m_average, mu_k, nk_nonresidues, pattern, scan, Error as CoreError,
    PrimeTable, Primes, RationalZ, ResiduePattern, ScanConfig, ScanResult, SeriesValue,
};

/// Tolerance used for every theoretical column the scan reports; the same
/// value a `series` invocation with `--eps 1e-9` uses.
const THEORY_EPS: f64 = 1e-9;

const INITIAL_SIEVE_LIMIT: u64 = 1 << 16;

#[derive(Parser)]
#[command(
    name = "qnr",
    version,
    about = "Statistics of prime quadratic non-residues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// The k smallest prime quadratic non-residues of an odd prime p.
    Nkp {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Evaluate a limiting constant as a truncated series with a certified
    /// tail bound.
    Series {
        #[command(subcommand)]
        which: SeriesCommand,
    },
    /// Scan all odd primes p <= x and aggregate the empirical statistics.
    Scan {
        /// Scan bound; accepts scientific notation such as 1e6.
        #[arg(long)]
        x: String,
        /// Accumulate n_1 .. n_kmax per prime.
        #[arg(long, default_value_t = 2)]
        kmax: usize,
        /// Gap threshold as an exact rational (e.g. 3/2 or 2); repeatable.
        #[arg(long = "z")]
        z: Vec<String>,
        /// Residue-pattern depth for density counts (0 disables).
        #[arg(long = "pattern-n", default_value_t = 0)]
        pattern_n: usize,
        /// Parallel shard count.
        #[arg(long)]
        shards: Option<usize>,
        /// Output path prefix: writes <out>.json and <out>.csv atomically.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residue classes mod q = 8 p_2...p_n realizing a +/- pattern, and the
    /// smallest prime in them.
    Pattern {
        /// Pattern over {+,-}, e.g. "+-+".
        #[arg(long)]
        eps: String,
        /// Search bound for the witness prime; accepts scientific notation.
        #[arg(long, default_value = "1000000")]
        limit: String,
    },
    /// Construct a prime whose M(p) is forced to be at least about y/2.
    Largem {
        #[arg(long)]
        y: u64,
        /// Search bound; defaults to min(10^9, 10^4 * q).
        #[arg(long)]
        limit: Option<String>,
    },
}

#[derive(Subcommand)]
enum SeriesCommand {
    /// Limiting average of n_k(p).
    Mu {
        #[arg(long, default_value_t = 1)]
        k: u64,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Limiting frequency of n_2 > z n_1 (and its complement).
    Gap {
        /// Exact rational threshold, e.g. 3/2.
        #[arg(long)]
        z: String,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Limiting average of M(p) = min(n_1, n_2 - n_1).
    Mavg {
        #[arg(long, default_value_t = 5e-4)]
        eps: f64,
    },
    /// Partial sum of C(n,k) 2^-n up to n = nmax (converges to 2).
    BinomIdentity {
        #[arg(long, default_value_t = 1)]
        k: u64,
        #[arg(long, default_value_t = 200)]
        nmax: u64,
    },
    /// Tail sum of n C(n,k) 2^-n over n > 3k.
    BinomTail {
        #[arg(long)]
        k: u64,
    },
    /// mu_k / p_2k, the ratio that approaches 1 for large k.
    Ratio {
        #[arg(long)]
        k: u64,
    },
}

#[derive(Serialize)]
struct OutputEnvelope {
    command: String,
    params: BTreeMap<String, String>,
    result: Value,
    version: String,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    if let Some(core) = err.downcast_ref::<CoreError>() {
        return match core {
            CoreError::Domain(_) | CoreError::Contract(_) => 2,
            CoreError::Io(_) => 3,
            CoreError::Resource(_) | CoreError::Cache(_) | CoreError::OutOfRange { .. } => 4,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (primes, cache) = load_primes()?;
    let result = dispatch(cli.command, &primes)?;
    if let Some(state) = cache {
        state.store(&primes);
    }
    println!("{}", serde_json::to_string(&result)?);
    Ok(())
}

fn dispatch(command: Command, primes: &Primes) -> anyhow::Result<OutputEnvelope> {
    match command {
        Command::Nkp { p, k } => cmd_nkp(p, k, primes),
        Command::Series { which } => cmd_series(which, primes),
        Command::Scan {
            x,
            kmax,
            z,
            pattern_n,
            shards,
            out,
        } => cmd_scan(&x, kmax, &z, pattern_n, shards, out.as_deref(), primes),
        Command::Pattern { eps, limit } => cmd_pattern(&eps, &limit, primes),
        Command::Largem { y, limit } => cmd_largem(y, limit.as_deref(), primes),
    }
}

// ---------------------------------------------------------------- commands

fn cmd_nkp(p: u64, k: usize, primes: &Primes) -> anyhow::Result<OutputEnvelope> {
    let nk = nk_nonresidues(p, k, primes)?;
    Ok(envelope(
        "nkp",
        [("p", p.to_string()), ("k", k.to_string())],
        json!({ "p": nk.p, "values": nk.values }),
    ))
}

fn cmd_series(which: SeriesCommand, primes: &Primes) -> anyhow::Result<OutputEnvelope> {
    match which {
        SeriesCommand::Mu { k, eps } => {
            let v = mu_k(k, eps, primes)?;
            eprintln!(
                "mu_{k} = {} (tail <= {}, {} terms)",
                sig(v.value),
                sig(v.tail_bound),
                v.terms_used
            );
            Ok(envelope(
                "series mu",
                [("k", k.to_string()), ("eps", eps.to_string())],
                series_payload(&v, json!({ "k": k })),
            ))
        }
        SeriesCommand::Gap { z, eps } => {
            let z = RationalZ::parse(&z)?;
            let v = gap_constant(z, eps, primes)?;
            let complement = 1.0 - v.value;
            eprintln!(
                "P(n_2 > {z} n_1) = {}   P(n_2 <= {z} n_1) = {}",
                sig(v.value),
                sig(complement)
            );
            Ok(envelope(
                "series gap",
                [("z", z.to_string()), ("eps", eps.to_string())],
                series_payload(
                    &v,
                    json!({ "z": z.to_string(), "complement": sig(complement) }),
                ),
            ))
        }
        SeriesCommand::Mavg { eps } => {
            let v = m_average(eps, primes)?;
            eprintln!(
                "average M(p) = {} (tail <= {})",
                sig(v.value),
                sig(v.tail_bound)
            );
            Ok(envelope(
                "series mavg",
                [("eps", eps.to_string())],
                series_payload(&v, json!({})),
            ))
        }
        SeriesCommand::BinomIdentity { k, nmax } => {
            if nmax < k {
                return Err(CoreError::domain(format!("nmax = {nmax} must be >= k = {k}")).into());
            }
            let sum = binom_identity(k, nmax);
            Ok(envelope(
                "series binom-identity",
                [("k", k.to_string()), ("nmax", nmax.to_string())],
                json!({ "k": k, "nmax": nmax, "sum": sig(sum), "deviation_from_two": sig(sum - 2.0) }),
            ))
        }
        SeriesCommand::BinomTail { k } => {
            if k == 0 {
                return Err(CoreError::domain("k must be >= 1").into());
            }
            let tail = binom_tail(k);
            let ratio = tail / (29.0f64 / 32.0).powi(k as i32);
            Ok(envelope(
                "series binom-tail",
                [("k", k.to_string())],
                json!({ "k": k, "tail": sig(tail), "ratio_vs_29_32_pow_k": sig(ratio) }),
            ))
        }
        SeriesCommand::Ratio { k } => {
            let mu = mu_k(k, THEORY_EPS, primes)?;
            let p2k = primes.nth(2 * k)?;
            Ok(envelope(
                "series ratio",
                [("k", k.to_string())],
                json!({ "k": k, "mu_k": sig(mu.value), "p_2k": p2k, "ratio": sig(mu.value / p2k as f64) }),
            ))
        }
    }
}

fn series_payload(v: &SeriesValue, extra: Value) -> Value {
    let mut obj = extra;
    let map = obj.as_object_mut().unwrap();
    map.insert("value".into(), json!(sig(v.value)));
    map.insert("tail_bound".into(), json!(sig(v.tail_bound)));
    map.insert("terms_used".into(), json!(v.terms_used));
    obj
}

struct SummaryRow {
    stat: String,
    empirical: f64,
    theoretical: f64,
}

fn cmd_scan(
    x: &str,
    kmax: usize,
    z: &[String],
    pattern_n: usize,
    shards: Option<usize>,
    out: Option<&Path>,
    primes: &Primes,
) -> anyhow::Result<OutputEnvelope> {
    let x = parse_count(x)?;
    let z_list = z
        .iter()
        .map(|s| RationalZ::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut config = ScanConfig::new(x, kmax);
    config.z_list = z_list;
    config.pattern_n = pattern_n;
    if let Some(s) = shards {
        config.shards = s;
    }
    config.validate()?;

    let started = Instant::now();
    let result = scan(&config, primes)?;
    let elapsed = started.elapsed();
    let rows = summary_rows(&config, &result, primes)?;

    eprintln!(
        "scan x = {x}: {} odd primes in {:.2?} ({} shards)",
        result.primes_scanned, elapsed, config.shards
    );
    eprintln!(
        "  {:<14} {:>16} {:>16} {:>12}",
        "stat", "empirical", "theoretical", "abs_err"
    );
    for row in &rows {
        eprintln!(
            "  {:<14} {:>16} {:>16} {:>12}",
            row.stat,
            sig(row.empirical),
            sig(row.theoretical),
            format!("{:.3e}", (row.empirical - row.theoretical).abs()),
        );
    }

    if let Some(prefix) = out {
        let json_path = prefix.with_extension("json");
        let csv_path = prefix.with_extension("csv");
        let mut body = serde_json::to_vec(&result)?;
        body.push(b'\n');
        write_atomic(&json_path, &body)
            .with_context(|| format!("writing {}", json_path.display()))?;
        write_atomic(&csv_path, convergence_csv(x, &rows).as_bytes())
            .with_context(|| format!("writing {}", csv_path.display()))?;
        eprintln!("wrote {} and {}", json_path.display(), csv_path.display());
    }

    let summary: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "stat_name": r.stat,
                "empirical": sig(r.empirical),
                "theoretical": sig(r.theoretical),
                "abs_err": sig((r.empirical - r.theoretical).abs()),
            })
        })
        .collect();
    let mut params: BTreeMap<String, String> = BTreeMap::new();
    params.insert("x".into(), x.to_string());
    params.insert("kmax".into(), kmax.to_string());
    params.insert("pattern_n".into(), pattern_n.to_string());
    params.insert("shards".into(), config.shards.to_string());
    for (i, zv) in config.z_list.iter().enumerate() {
        params.insert(format!("z{}", i + 1), zv.to_string());
    }
    Ok(OutputEnvelope {
        command: "scan".into(),
        params,
        result: json!({ "x": x, "scan": result, "summary": summary }),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

/// Empirical averages next to the series values computed at [`THEORY_EPS`]
/// through the same code path as `series`.
fn summary_rows(
    config: &ScanConfig,
    result: &ScanResult,
    primes: &Primes,
) -> anyhow::Result<Vec<SummaryRow>> {
    let n = result.primes_scanned as f64;
    let mut rows = Vec::new();
    for k in 1..=config.k_max {
        rows.push(SummaryRow {
            stat: format!("mean_nk_{k}"),
            empirical: result.sum_nk[k - 1] as f64 / n,
            theoretical: mu_k(k as u64, THEORY_EPS, primes)?.value,
        });
    }
    rows.push(SummaryRow {
        stat: "mean_m".into(),
        empirical: result.sum_m as f64 / n,
        theoretical: m_average(THEORY_EPS, primes)?.value,
    });
    for z in &config.z_list {
        rows.push(SummaryRow {
            stat: format!("gap_gt_{z}"),
            empirical: result.gap_counts[&z.to_string()] as f64 / n,
            theoretical: gap_constant(*z, THEORY_EPS, primes)?.value,
        });
    }
    Ok(rows)
}

fn convergence_csv(x: u64, rows: &[SummaryRow]) -> String {
    let mut csv = String::from("x,stat_name,empirical,theoretical,abs_err\n");
    for row in rows {
        csv.push_str(&format!(
            "{x},{},{},{},{}\n",
            row.stat,
            sig(row.empirical),
            sig(row.theoretical),
            sig((row.empirical - row.theoretical).abs()),
        ));
    }
    csv
}

fn cmd_pattern(eps: &str, limit: &str, primes: &Primes) -> anyhow::Result<OutputEnvelope> {
    let pattern = ResiduePattern::parse(eps)?;
    let limit = parse_count(limit)?;
    let classes = build_pattern_classes(&pattern, primes)?;
    // phi(q) / 2^n, recomputed independently of the class enumeration.
    let mut phi_over_2n: u128 = 4;
    for i in 2..=pattern.len() as u64 {
        phi_over_2n *= (primes.nth(i)? - 1) as u128;
    }
    phi_over_2n >>= pattern.len();
    let prime = find_prime_with_pattern(&pattern, limit, primes)?;
    eprintln!(
        "pattern {pattern}: q = {}, {} classes (phi(q)/2^n = {phi_over_2n}), witness prime: {}",
        classes.q(),
        classes.classes().len(),
        prime.map_or("none".into(), |p| p.to_string()),
    );
    let listed: Value = if classes.classes().len() <= 128 {
        json!(classes.classes())
    } else {
        Value::Null
    };
    Ok(envelope(
        "pattern",
        [("eps", eps.to_string()), ("limit", limit.to_string())],
        json!({
            "pattern": pattern.to_string(),
            "q": classes.q(),
            "n": classes.n(),
            "class_count": classes.classes().len(),
            "phi_q_over_2n": phi_over_2n as u64,
            "classes": listed,
            "prime": prime,
        }),
    ))
}

fn cmd_largem(y: u64, limit: Option<&str>, primes: &Primes) -> anyhow::Result<OutputEnvelope> {
    let search_limit = match limit {
        Some(s) => parse_count(s)?,
        None => {
            let n_index = primes.prime_count(y.max(4))?;
            let mut q: u64 = 8;
            for i in 2..=n_index {
                q = q
                    .checked_mul(primes.nth(i)?)
                    .ok_or_else(|| CoreError::resource("pattern modulus overflows 64 bits"))?;
            }
            pattern::default_search_limit(q)
        }
    };
    let record = large_m_construction(y, search_limit, primes)?;
    match record.prime {
        Some(p) => eprintln!(
            "y = {y}: prime {p} has M(p) = {} >= guarantee {} (q = {})",
            record.m_value.unwrap(),
            record.guarantee,
            record.q
        ),
        None => eprintln!(
            "y = {y}: no prime below {search_limit} in the class set (q = {}); raise --limit",
            record.q
        ),
    }
    Ok(envelope(
        "largem",
        [("y", y.to_string()), ("limit", search_limit.to_string())],
        serde_json::to_value(&record)?,
    ))
}

// ------------------------------------------------------------------ shared

fn envelope<const N: usize>(
    command: &str,
    params: [(&str, String); N],
    result: Value,
) -> OutputEnvelope {
    OutputEnvelope {
        command: command.into(),
        params: params
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        result,
        version: env!("CARGO_PKG_VERSION").into(),
    }
}

/// Round to 12 significant digits; all numeric output goes through this.
fn sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().unwrap()
}

/// Parse a count that may be written in scientific notation ("1e6").
fn parse_count(s: &str) -> anyhow::Result<u64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| CoreError::domain(format!("cannot parse {s:?} as a count")))?;
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v > 2f64.powi(53) {
        return Err(
            CoreError::domain(format!("{s:?} is not an exact non-negative integer")).into(),
        );
    }
    Ok(v as u64)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| anyhow!(e.error))?;
    Ok(())
}

struct CacheState {
    path: PathBuf,
    loaded_limit: u64,
}

impl CacheState {
    fn store(&self, primes: &Primes) {
        let snap = primes.snapshot();
        if snap.limit() > self.loaded_limit {
            match snap.save_cache(&self.path) {
                Ok(()) => eprintln!(
                    "saved prime cache to {} (limit {})",
                    self.path.display(),
                    snap.limit()
                ),
                Err(err) => eprintln!("warning: could not save prime cache: {err}"),
            }
        }
    }
}

/// Initial prime table: loaded from `QNR_PRIME_CACHE` when the variable is
/// set and the file is valid, sieved fresh otherwise. The cache is written
/// back after the command if the table grew.
fn load_primes() -> anyhow::Result<(Primes, Option<CacheState>)> {
    let Some(path) = std::env::var_os("QNR_PRIME_CACHE") else {
        return Ok((Primes::with_limit(INITIAL_SIEVE_LIMIT)?, None));
    };
    let path = PathBuf::from(path);
    let mut loaded_limit = 0;
    let table = if path.exists() {
        match PrimeTable::load_cache(&path) {
            Ok(table) => {
                eprintln!(
                    "loaded prime cache {} (limit {}, {} primes)",
                    path.display(),
                    table.limit(),
                    table.count()
                );
                loaded_limit = table.limit();
                Some(table)
            }
            Err(err) => {
                eprintln!(
                    "warning: ignoring invalid prime cache {}: {err}",
                    path.display()
                );
                None
            }
        }
    } else {
        None
    };
    let primes = match table {
        Some(t) => Primes::from_table(t),
        None => Primes::with_limit(INITIAL_SIEVE_LIMIT)?,
    };
    Ok((primes, Some(CacheState { path, loaded_limit })))
}
