//! Segmented prime sieve and residue-class censuses.
//!
//! The sieve stores odd numbers only and works on fixed segments (default
//! 2²⁰ integers), so memory stays at `O(√x + segment)`. A census over many
//! moduli is a single sieve pass: each segment produces partial residue
//! counts, and the partials are summed in segment order.
//!
//! Primes dividing `q` are never put in `counts`; they are tallied in
//! `excluded` so that `Σ counts + excluded = π(x)` always holds.
//!
//! The cache is plain CSV with header `x,q,a,count`. Besides one row per
//! invertible residue, each `(x, q)` block carries a `_pi` row (π(x)) and an
//! `_excluded` row.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::exec::{self, Execution};

pub const DEFAULT_LIMIT: u64 = 1_000_000_000;
pub const DEFAULT_SEGMENT_LEN: usize = 1 << 20;
pub const CACHE_HEADER: &str = "x,q,a,count";

#[derive(Debug, Error)]
pub enum CensusError {
    #[error("census limit {x} exceeds the configured maximum {limit}")]
    LimitExceeded { x: u64, limit: u64 },
    #[error("census limit must be at least 2, got {0}")]
    LimitTooSmall(u64),
    #[error("modulus {0} is below 3 (fewer than two invertible classes)")]
    Modulus(u64),
    #[error("invalid census for x={x}, q={q}: {reason}")]
    Invalid { x: u64, q: u64, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}:{line}: {reason}")]
    Parse { origin: String, line: usize, reason: String },
    #[error("{origin}: census for x={x}, q={q}: {reason}")]
    Validation { origin: String, x: u64, q: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveConfig {
    /// Largest `x` accepted.
    pub limit: u64,
    /// Integers per segment; rounded up to an even number.
    pub segment_len: usize,
}

impl Default for SieveConfig {
    fn default() -> Self {
        SieveConfig { limit: DEFAULT_LIMIT, segment_len: DEFAULT_SEGMENT_LEN }
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Distinct prime divisors of `q`, by trial division.
pub fn prime_divisors(mut q: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= q {
        if q.is_multiple_of(d) {
            out.push(d);
            while q.is_multiple_of(d) {
                q /= d;
            }
        }
        d += 1;
    }
    if q > 1 {
        out.push(q);
    }
    out
}

pub fn invertible_residues(q: u64) -> Vec<u64> {
    (1..q).filter(|&a| gcd(a, q) == 1).collect()
}

pub fn totient(q: u64) -> u64 {
    invertible_residues(q).len() as u64
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Odd primes up to `n` by a plain sieve; used as sieving primes.
fn small_odd_primes(n: u64) -> Vec<u64> {
    let n = n as usize;
    if n < 3 {
        return Vec::new();
    }
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    let mut i = 3;
    while i <= n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += 2 * i;
            }
        }
        i += 2;
    }
    out
}

/// A segmented sieve for one census limit `x`.
#[derive(Debug, Clone)]
pub struct Sieve {
    x: u64,
    segment_len: u64,
    base: Vec<u64>,
}

impl Sieve {
    pub fn new(x: u64, config: SieveConfig) -> Result<Self, CensusError> {
        if x > config.limit {
            return Err(CensusError::LimitExceeded { x, limit: config.limit });
        }
        let segment_len = (config.segment_len.max(2) as u64 + 1) & !1;
        Ok(Sieve { x, segment_len, base: small_odd_primes(isqrt(x)) })
    }

    pub fn limit(&self) -> u64 {
        self.x
    }

    pub fn segment_count(&self) -> usize {
        if self.x < 2 {
            0
        } else {
            (self.x + 1).div_ceil(self.segment_len) as usize
        }
    }

    /// Primes of segment `index` in increasing order, appended to `out`.
    pub fn segment_primes(&self, index: usize, out: &mut Vec<u64>) {
        let lo = index as u64 * self.segment_len;
        let hi = (lo + self.segment_len).min(self.x + 1);
        if lo >= hi {
            return;
        }
        if lo <= 2 && 2 < hi {
            out.push(2);
        }
        // slot i holds lo + 2i + 1 (lo is even)
        let slots = ((hi - lo) / 2) as usize;
        let mut composite = vec![false; slots];
        if lo == 0 && slots > 0 {
            composite[0] = true; // 1
        }
        for &p in &self.base {
            if p * p >= hi {
                break;
            }
            let mut start = lo.div_ceil(p) * p;
            if start % 2 == 0 {
                start += p;
            }
            start = start.max(p * p);
            let mut i = ((start - lo - 1) / 2) as usize;
            while i < slots {
                composite[i] = true;
                i += p as usize;
            }
        }
        out.extend(
            composite
                .iter()
                .enumerate()
                .filter(|(_, &c)| !c)
                .map(|(i, _)| lo + 2 * i as u64 + 1)
                .filter(|&v| v <= self.x),
        );
    }

    pub fn primes(&self) -> SegmentedPrimes<'_> {
        SegmentedPrimes { sieve: self, next_segment: 0, buffer: Vec::new(), pos: 0 }
    }

    /// π(x).
    pub fn count(&self, exec: Execution) -> u64 {
        exec::map_indices(exec, self.segment_count(), |s| {
            let mut buf = Vec::new();
            self.segment_primes(s, &mut buf);
            buf.len() as u64
        })
        .into_iter()
        .sum()
    }
}

/// Increasing stream of the primes `≤ x`, one segment at a time.
#[derive(Debug)]
pub struct SegmentedPrimes<'a> {
    sieve: &'a Sieve,
    next_segment: usize,
    buffer: Vec<u64>,
    pos: usize,
}

impl Iterator for SegmentedPrimes<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        while self.pos == self.buffer.len() {
            if self.next_segment >= self.sieve.segment_count() {
                return None;
            }
            self.buffer.clear();
            self.pos = 0;
            self.sieve.segment_primes(self.next_segment, &mut self.buffer);
            self.next_segment += 1;
        }
        self.pos += 1;
        Some(self.buffer[self.pos - 1])
    }
}

/// All primes `≤ x`, with the default configuration.
pub fn sieve_primes(x: u64) -> Result<Vec<u64>, CensusError> {
    Ok(Sieve::new(x, SieveConfig::default())?.primes().collect())
}

/// Counts of the primes `≤ x` in each invertible class mod `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueCensus {
    x: u64,
    q: u64,
    counts: BTreeMap<u64, u64>,
    pi_x: u64,
    excluded: u64,
}

impl ResidueCensus {
    /// Builds a census from stored values, checking every invariant.
    pub fn from_parts(
        x: u64,
        q: u64,
        counts: BTreeMap<u64, u64>,
        pi_x: u64,
        excluded: u64,
    ) -> Result<Self, CensusError> {
        let invalid = |reason: String| CensusError::Invalid { x, q, reason };
        if q < 3 {
            return Err(CensusError::Modulus(q));
        }
        let residues = invertible_residues(q);
        if counts.len() != residues.len() || !residues.iter().all(|a| counts.contains_key(a)) {
            return Err(invalid(format!("classes must be exactly the {} invertible residues", residues.len())));
        }
        let total: u64 = counts.values().sum();
        if total + excluded != pi_x {
            return Err(invalid(format!("class counts ({total}) + excluded ({excluded}) != pi_x ({pi_x})")));
        }
        let expected = prime_divisors(q).into_iter().filter(|&p| p <= x).count() as u64;
        if excluded != expected {
            return Err(invalid(format!("excluded = {excluded}, but {expected} prime divisors of q are <= x")));
        }
        Ok(ResidueCensus { x, q, counts, pi_x, excluded })
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn count(&self, a: u64) -> Option<u64> {
        self.counts.get(&(a % self.q)).copied()
    }

    pub fn pi_x(&self) -> u64 {
        self.pi_x
    }

    pub fn excluded(&self) -> u64 {
        self.excluded
    }

    /// φ(q), the number of classes.
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    /// Primes in invertible classes, `π(x) − excluded`.
    pub fn invertible_total(&self) -> u64 {
        self.pi_x - self.excluded
    }
}

/// Per-modulus residue tallies of one segment, indexed by `p mod q`.
fn tally_segment(primes: &[u64], moduli: &[u64]) -> Vec<Vec<u64>> {
    const GAP_TABLE: usize = 512;
    moduli
        .iter()
        .map(|&q| {
            let mut counts = vec![0u64; q as usize];
            let Some((&first, rest)) = primes.split_first() else {
                return counts;
            };
            let gap_mod: Vec<u64> = (0..GAP_TABLE as u64).map(|g| g % q).collect();
            let mut r = first % q;
            let mut prev = first;
            counts[r as usize] += 1;
            for &p in rest {
                let gap = p - prev;
                let g = if (gap as usize) < GAP_TABLE { gap_mod[gap as usize] } else { gap % q };
                r += g;
                if r >= q {
                    r -= q;
                }
                counts[r as usize] += 1;
                prev = p;
            }
            counts
        })
        .collect()
}

/// Censuses for every modulus in `moduli` from a single sieve pass.
pub fn census_all_with(
    x: u64,
    moduli: &[u64],
    config: SieveConfig,
    exec: Execution,
) -> Result<Vec<ResidueCensus>, CensusError> {
    if x < 2 {
        return Err(CensusError::LimitTooSmall(x));
    }
    if let Some(&q) = moduli.iter().find(|&&q| q < 3) {
        return Err(CensusError::Modulus(q));
    }
    if moduli.is_empty() {
        return Ok(Vec::new());
    }
    let sieve = Sieve::new(x, config)?;
    let partials = exec::map_indices(exec, sieve.segment_count(), |s| {
        let mut primes = Vec::new();
        sieve.segment_primes(s, &mut primes);
        (primes.len() as u64, tally_segment(&primes, moduli))
    });

    let mut pi_x = 0u64;
    let mut totals: Vec<Vec<u64>> = moduli.iter().map(|&q| vec![0; q as usize]).collect();
    for (count, tallies) in partials {
        pi_x += count;
        for (total, tally) in totals.iter_mut().zip(tallies) {
            for (t, c) in total.iter_mut().zip(tally) {
                *t += c;
            }
        }
    }

    moduli
        .iter()
        .zip(totals)
        .map(|(&q, by_residue)| {
            let mut counts = BTreeMap::new();
            let mut excluded = 0;
            for (a, c) in by_residue.into_iter().enumerate() {
                if gcd(a as u64, q) == 1 {
                    counts.insert(a as u64, c);
                } else {
                    excluded += c;
                }
            }
            ResidueCensus::from_parts(x, q, counts, pi_x, excluded)
        })
        .collect()
}

pub fn census_all(x: u64, moduli: &[u64]) -> Result<Vec<ResidueCensus>, CensusError> {
    census_all_with(x, moduli, SieveConfig::default(), Execution::default())
}

pub fn census(x: u64, q: u64) -> Result<ResidueCensus, CensusError> {
    Ok(census_all(x, &[q])?.remove(0))
}

/// Renders censuses in the cache format.
pub fn to_csv(censuses: &[ResidueCensus]) -> String {
    let mut out = String::new();
    out.push_str(CACHE_HEADER);
    out.push('\n');
    for c in censuses {
        for (a, n) in &c.counts {
            writeln!(out, "{},{},{},{}", c.x, c.q, a, n).unwrap();
        }
        writeln!(out, "{},{},_pi,{}", c.x, c.q, c.pi_x).unwrap();
        writeln!(out, "{},{},_excluded,{}", c.x, c.q, c.excluded).unwrap();
    }
    out
}

#[derive(Default)]
struct Block {
    counts: BTreeMap<u64, u64>,
    pi_x: Option<u64>,
    excluded: Option<u64>,
}

/// Parses the cache format. `origin` names the source in error messages.
pub fn parse_csv(text: &str, origin: &str) -> Result<Vec<ResidueCensus>, CensusError> {
    let parse_err = |line: usize, reason: String| CensusError::Parse { origin: origin.to_string(), line, reason };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == CACHE_HEADER => {}
        Some((n, h)) => return Err(parse_err(n, format!("expected header `{CACHE_HEADER}`, found `{h}`"))),
        None => return Err(parse_err(1, "empty file".into())),
    }

    let mut order: Vec<(u64, u64)> = Vec::new();
    let mut blocks: BTreeMap<(u64, u64), Block> = BTreeMap::new();
    for (n, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(n, format!("expected 4 fields, found {}", fields.len())));
        }
        let int = |s: &str, what: &str| {
            s.parse::<u64>().map_err(|_| parse_err(n, format!("{what} `{s}` is not a nonnegative integer")))
        };
        let x = int(fields[0], "x")?;
        let q = int(fields[1], "q")?;
        let value = int(fields[3], "count")?;
        let key = (x, q);
        if !blocks.contains_key(&key) {
            order.push(key);
        }
        let block = blocks.entry(key).or_default();
        let slot = match fields[2] {
            "_pi" => &mut block.pi_x,
            "_excluded" => &mut block.excluded,
            a => {
                let a = int(a, "residue")?;
                if block.counts.insert(a, value).is_some() {
                    return Err(parse_err(n, format!("duplicate residue {a} for x={x}, q={q}")));
                }
                continue;
            }
        };
        if slot.replace(value).is_some() {
            return Err(parse_err(n, format!("duplicate `{}` row for x={x}, q={q}", fields[2])));
        }
    }

    order
        .into_iter()
        .map(|(x, q)| {
            let block = blocks.remove(&(x, q)).expect("recorded key");
            let validation = |reason: String| CensusError::Validation { origin: origin.to_string(), x, q, reason };
            let pi_x = block.pi_x.ok_or_else(|| validation("missing `_pi` row".into()))?;
            let excluded = block.excluded.ok_or_else(|| validation("missing `_excluded` row".into()))?;
            ResidueCensus::from_parts(x, q, block.counts, pi_x, excluded).map_err(|e| match e {
                CensusError::Invalid { reason, .. } => validation(reason),
                other => validation(other.to_string()),
            })
        })
        .collect()
}

pub fn save_census(path: &Path, censuses: &[ResidueCensus]) -> Result<(), CensusError> {
    std::fs::write(path, to_csv(censuses)).map_err(|source| CensusError::Io { path: path.to_path_buf(), source })
}

pub fn load_census(path: &Path) -> Result<Vec<ResidueCensus>, CensusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CensusError::Io { path: path.to_path_buf(), source })?;
    parse_csv(&text, &path.display().to_string())
}

/// Loads the censuses for `x` and each of `moduli`, in that order; a missing
/// `(x, q)` block is a validation error.
pub fn load_census_for(path: &Path, x: u64, moduli: &[u64]) -> Result<Vec<ResidueCensus>, CensusError> {
    let all = load_census(path)?;
    moduli
        .iter()
        .map(|&q| {
            all.iter().find(|c| c.x == x && c.q == q).cloned().ok_or_else(|| CensusError::Validation {
                origin: path.display().to_string(),
                x,
                q,
                reason: "not present in cache".into(),
            })
        })
        .collect()
}
