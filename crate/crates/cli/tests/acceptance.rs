//! End-to-end acceptance run. Prints one `PASS`/`FAIL` line per criterion
//! and exits nonzero unless the failing set equals [`KNOWN_UNATTAINABLE`].

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{factorial, ln_big, ln_one_minus, Fixed};
use prime_entropy::bound::{c_delta_direct, c_delta_series};
use prime_entropy::census::load_census;
use prime_entropy::entropy::{tau_q, TauNormalization};
use prime_entropy::numerics::stirling_bracket;
use prime_entropy::oracle::{total_probability, verify_lemma, verify_pinsker, OracleConfig};
use prime_entropy::table::{kl_table, TableOptions};
use prime_entropy::walk::{
    first_passage_pmf, first_passage_tail_bracket, prime_race_first_crossing, published_tail_bracket, RaceSpec,
};
use prime_entropy::Execution;

/// Criteria whose failure is expected; see the project notes on the
/// first-passage series bracket.
const KNOWN_UNATTAINABLE: &[u8] = &[13];

type Outcome = Result<String, String>;

fn cli(args: &[&str]) -> Result<(String, Duration), String> {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_prime-entropy"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run the binary: {e}"))?;
    let elapsed = started.elapsed();
    if !out.status.success() {
        return Err(format!("{args:?} exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok((String::from_utf8(out.stdout).map_err(|e| e.to_string())?, elapsed))
}

/// A printed table cell: its value and the size of one unit in its last digit.
fn printed(cell: &str) -> (f64, f64) {
    let (mantissa, exp) = match cell.split_once('e') {
        Some((m, e)) => (m, e.parse::<i32>().expect("exponent")),
        None => (cell, 0),
    };
    let decimals = mantissa.split_once('.').map_or(0, |(_, f)| f.len()) as i32;
    (cell.parse().expect("number"), 10f64.powi(exp - decimals))
}

struct Reference {
    q: u64,
    tau: String,
    bound: String,
    chi_square: String,
}

fn reference_table() -> Vec<Reference> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/reference_kl_table.csv");
    std::fs::read_to_string(path)
        .expect("reference table")
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            Reference { q: f[0].parse().unwrap(), tau: f[1].into(), bound: f[2].into(), chi_square: f[3].into() }
        })
        .collect()
}

/// The `kl-table` CSV as `q → (tau, bound, chi_square)` cells.
fn parse_kl_csv(text: &str) -> BTreeMap<u64, (String, String, String)> {
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.splitn(5, ',').collect();
            (f[0].parse().unwrap(), (f[1].into(), f[2].into(), f[3].into()))
        })
        .collect()
}

fn census_fidelity(cache: &Path) -> Outcome {
    let (text, elapsed) = cli(&["--format", "csv", "--cache", cache.to_str().unwrap(), "census"])?;
    let row = |a: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("100000000,8,{a},")))
            .and_then(|v| v.parse::<u64>().ok())
            .ok_or(format!("no q = 8 row for class {a}"))
    };
    let counts = [row("1")?, row("3")?, row("5")?, row("7")?];
    let pi = row("_pi")?;
    let expected = [1_439_970, 1_440_544, 1_440_534, 1_440_406];
    if counts != expected {
        return Err(format!("q = 8 counts {counts:?}, expected {expected:?}"));
    }
    if pi != 1 + counts.iter().sum::<u64>() {
        return Err(format!("pi(1e8) = {pi} != 1 + sum of counts"));
    }
    if elapsed > Duration::from_secs(120) {
        return Err(format!("took {elapsed:.1?}"));
    }
    Ok(format!("q = 8 counts {counts:?}, pi(1e8) = {pi}, 38 moduli sieved in {elapsed:.2?}"))
}

fn tau_column(table: &BTreeMap<u64, (String, String, String)>, reference: &[Reference]) -> Outcome {
    let misses: Vec<String> = reference
        .iter()
        .filter(|r| table.get(&r.q).map(|t| &t.0) != Some(&r.tau))
        .map(|r| format!("q = {}: {:?} vs {}", r.q, table.get(&r.q).map(|t| &t.0), r.tau))
        .collect();
    if misses.is_empty() {
        Ok(format!("{} of {} tau_q values match the printed 3 digits", reference.len(), reference.len()))
    } else {
        Err(misses.join("; "))
    }
}

fn bound_column(full: &BTreeMap<u64, (f64, f64)>, reference: &[Reference]) -> Outcome {
    let mut worst = 0.0f64;
    let mut misses = Vec::new();
    for r in reference {
        let (expected, unit) = printed(&r.bound);
        let ours = full[&r.q].0;
        let off = (ours - expected).abs() / unit;
        worst = worst.max(off);
        if off > 1.0 + 1e-9 {
            misses.push(format!("q = {}: {ours:.6e}% vs {}", r.q, r.bound));
        }
    }
    if misses.is_empty() {
        Ok(format!("all 38 within ±1 last digit (worst {worst:.2} units)"))
    } else {
        Err(misses.join("; "))
    }
}

fn chi_square_column(
    full: &BTreeMap<u64, (f64, f64)>,
    table: &BTreeMap<u64, (String, String, String)>,
    reference: &[Reference],
) -> Outcome {
    let mut misses = Vec::new();
    for r in reference {
        let (expected, _) = printed(&r.chi_square);
        let ours = full[&r.q].1;
        let half_unit = 0.5 * 10f64.powi(expected.log10().floor() as i32 - 1);
        if (ours - expected).abs() > half_unit {
            misses.push(format!("q = {}: {ours:.4e}% vs {}", r.q, r.chi_square));
        }
    }
    for (q, anchor) in [(3u64, "13.89"), (37, "1.92e-11")] {
        if table[&q].2 != anchor {
            misses.push(format!("anchor q = {q}: printed {} vs {anchor}", table[&q].2));
        }
    }
    if misses.is_empty() {
        Ok("all 38 agree to 2 significant digits; q = 3 → 13.89%, q = 37 → 1.92e-11%".into())
    } else {
        Err(misses.join("; "))
    }
}

fn fact_chebyshev() -> Outcome {
    let (t2, e2) = cli(&["chebyshev", "--race", "mod4"])?;
    let (t3, e3) = cli(&["chebyshev", "--race", "mod3"])?;
    let want2 = ["(100 - 0.3674)% > P > (100 - 0.3678)%", "99.6322% < P < 99.6326%"];
    let want3 = ["(100 - 0.00013056980498)% > P > (100 - 0.00013056980500)%"];
    for (text, wants) in [(&t2, &want2[..]), (&t3, &want3[..])] {
        for w in wants {
            if !text.lines().any(|l| l.trim() == *w) {
                return Err(format!("missing `{w}` in\n{text}"));
            }
        }
    }
    if e2.max(e3) >= Duration::from_secs(1) {
        return Err(format!("took {e2:.2?} and {e3:.2?}"));
    }
    Ok(format!(
        "T2 and T3 brackets printed as published ({e2:.2?}, {e3:.2?}); these evaluate the published series bound"
    ))
}

fn prime_race() -> Outcome {
    let started = Instant::now();
    let crossing = prime_race_first_crossing(&RaceSpec::mod4(100_000)).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    if crossing.tau != 26_861 || crossing.pi_tau != 2 * 1_472 + 2 || elapsed >= Duration::from_secs(1) {
        return Err(format!("{crossing:?} in {elapsed:.2?}"));
    }
    Ok(format!("tau2 = 26861, pi(tau2) = 2946 = 2·1472 + 2, in {elapsed:.2?}; tau3 taken as given"))
}

fn dominance() -> Outcome {
    let (text, elapsed) = cli(&["oracle-verify"])?;
    let line = text.lines().last().unwrap_or_default().to_string();
    if !line.starts_with("0 violations / ") || elapsed > Duration::from_secs(300) {
        return Err(format!("{line} in {elapsed:.1?}"));
    }
    Ok(format!("{line}, {elapsed:.2?}"))
}

fn lemma_and_pinsker() -> (Outcome, Outcome) {
    let cfg = OracleConfig::default();
    let (mut lemma, mut pinsker) = ((0u64, Vec::new()), (0u64, Vec::new()));
    for n in 1..=30 {
        for k in 2..=4 {
            match verify_lemma(n, k, &cfg) {
                Ok(r) => {
                    lemma.0 += r.checked;
                    lemma.1.extend(r.violations);
                }
                Err(e) => lemma.1.push(e.to_string()),
            }
            match verify_pinsker(n, k, &cfg) {
                Ok(r) => {
                    pinsker.0 += r.checked;
                    pinsker.1.extend(r.violations);
                }
                Err(e) => pinsker.1.push(e.to_string()),
            }
        }
    }
    let judge = |(checked, violations): (u64, Vec<String>), what: &str| {
        if violations.is_empty() {
            Ok(format!("{checked} {what} checked, no violations"))
        } else {
            Err(violations.join("; "))
        }
    };
    (judge(lemma, "(n, k, delta) shells"), judge(pinsker, "type classes"))
}

fn normalization() -> Outcome {
    let mut worst = 0.0f64;
    for n in 0..=30 {
        for k in 2..=5 {
            let total = total_probability(n, k, &OracleConfig::default()).map_err(|e| e.to_string())?;
            worst = worst.max((total - 1.0).abs());
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max |sum - 1| = {worst:.1e}"))
    } else {
        Err(format!("max |sum - 1| = {worst:.1e}"))
    }
}

fn stirling() -> Outcome {
    for n in 2..=170u64 {
        let exact = ln_big(&factorial(n));
        let b = stirling_bracket(n).map_err(|e| e.to_string())?;
        if !(Fixed::from_f64(b.lower) < exact && exact < Fixed::from_f64(b.upper)) {
            return Err(format!("n = {n}: {b:?} misses {}", exact.to_f64()));
        }
    }
    Ok("brackets enclose big-integer ln(n!) for 2 <= n <= 170".into())
}

fn c_delta_paths() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..=400 {
        let x = 0.1 + 0.4 * i as f64 / 400.0;
        let (s, d) = (c_delta_series(x), c_delta_direct(x));
        worst = worst.max(((s - d) / d).abs());
    }
    // ½ + 1/x + ln(1 − x)/x² at x = 1e-6 in 256-bit fixed point
    let x = Fixed::from_int(1).div_int(1_000_000);
    let inv = Fixed::one().div(&x);
    let reference = Fixed::one().div_int(2).add(&inv).add(&ln_one_minus(1, 1_000_000).mul(&inv).mul(&inv)).to_f64();
    let small = ((c_delta_series(1e-6) - reference) / reference).abs();
    if worst <= 1e-10 && small <= 1e-6 {
        Ok(format!("max relative gap on [0.1, 0.5] = {worst:.1e}; at 1e-6 = {small:.1e}"))
    } else {
        Err(format!("max relative gap on [0.1, 0.5] = {worst:.1e}; at 1e-6 = {small:.1e}"))
    }
}

fn dp_first_passage(z: i64, max_n: usize) -> Vec<f64> {
    let offset = max_n as i64;
    let width = 2 * max_n + 1;
    let mut alive = vec![0.0f64; width];
    alive[offset as usize] = 1.0;
    let mut hits = vec![0.0; max_n + 1];
    for hit in hits.iter_mut().skip(1) {
        let mut next = vec![0.0; width];
        for (i, &mass) in alive.iter().enumerate().filter(|(_, &m)| m > 0.0) {
            for to in [i as i64 - offset - 1, i as i64 - offset + 1] {
                if to == z {
                    *hit += 0.5 * mass;
                } else if (0..width as i64).contains(&(to + offset)) {
                    next[(to + offset) as usize] += 0.5 * mass;
                }
            }
        }
        alive = next;
    }
    hits
}

fn first_passage() -> Outcome {
    let mut worst = 0.0f64;
    for z in 1..=5u64 {
        let dp = dp_first_passage(z as i64, 40);
        for n in 1..=40u64 {
            let (a, b) = (first_passage_pmf(z, n), dp[n as usize]);
            let gap = if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
            worst = worst.max(gap);
        }
    }
    let pmf =
        if worst <= 1e-14 { format!("PMF = DP (max rel {worst:.1e})") } else { format!("PMF vs DP rel {worst:.1e}") };

    let (mut partial, mut comp) = (0.0f64, 0.0f64);
    let (mut outside_published, mut outside_exact, mut first_miss) = (0, 0, None);
    for big_n in 1..=500u64 {
        let y = first_passage_pmf(1, 2 * big_n - 1) - comp;
        let t = partial + y;
        comp = (t - partial) - y;
        partial = t;
        if big_n < 2 {
            continue;
        }
        let tail = 1.0 - partial;
        let published = published_tail_bracket(big_n).map_err(|e| e.to_string())?;
        if !published.contains(tail) {
            outside_published += 1;
            first_miss.get_or_insert(format!(
                "N = {big_n}: tail {tail:.4} vs [{:.4}, {:.4}]",
                published.lower, published.upper
            ));
        }
        let exact = first_passage_tail_bracket(big_n).map_err(|e| e.to_string())?;
        if !(exact.lower - 1e-14 < tail && tail < exact.upper + 1e-14) {
            outside_exact += 1;
        }
    }
    let sums = format!(
        "partial sums outside the published series bracket for {outside_published}/499 N ({}); \
         outside the C(2N,N)/4^N bracket for {outside_exact}/499 N",
        first_miss.as_deref().unwrap_or("none")
    );
    if worst <= 1e-14 && outside_published == 0 {
        Ok(format!("{pmf}; {sums}"))
    } else {
        Err(format!("{pmf}; {sums}"))
    }
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let cache: PathBuf = dir.path().join("census_1e8.csv");
    let reference = reference_table();

    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    results.push((1, "census fidelity", census_fidelity(&cache)));

    let kl_csv =
        cli(&["--format", "csv", "--cache", cache.to_str().unwrap(), "kl-table"]).map(|(t, _)| parse_kl_csv(&t));
    let full: Result<BTreeMap<u64, (f64, f64)>, String> =
        load_census(&cache).map_err(|e| e.to_string()).and_then(|censuses| {
            kl_table(&censuses, &TableOptions::default(), Execution::Parallel)
                .into_iter()
                .map(|r| Ok((r.q, (r.bound?.bound * 100.0, r.chi_square? * 100.0))))
                .collect()
        });
    let literal_negative = load_census(&cache)
        .ok()
        .map(|cs| cs.iter().filter(|c| tau_q(c, TauNormalization::PiX).is_ok_and(|t| t < 0.0)).count());

    match (&kl_csv, &full) {
        (Ok(table), Ok(full)) => {
            results.push((2, "tau_q column", tau_column(table, &reference)));
            results.push((3, "theorem column", bound_column(full, &reference)));
            results.push((4, "chi-square column", chi_square_column(full, table, &reference)));
        }
        (a, b) => {
            let why = format!("{:?} / {:?}", a.as_ref().err(), b.as_ref().err());
            for (id, name) in [(2, "tau_q column"), (3, "theorem column"), (4, "chi-square column")] {
                results.push((id, name, Err(why.clone())));
            }
        }
    }
    results.push((5, "chebyshev brackets", fact_chebyshev()));
    results.push((6, "prime race", prime_race()));
    results.push((7, "theorem dominance", dominance()));
    let (lemma, pinsker) = lemma_and_pinsker();
    results.push((8, "shell-count lemma", lemma));
    results.push((9, "type-class normalization", normalization()));
    results.push((10, "pinsker", pinsker));
    results.push((11, "stirling brackets", stirling()));
    results.push((12, "c_delta paths", c_delta_paths()));
    results.push((13, "first passage", first_passage()));

    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "\nacceptance criteria").unwrap();
    let mut failed = Vec::new();
    for (id, name, outcome) in &results {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(*id);
                ("FAIL", d)
            }
        };
        writeln!(stdout, "{tag} {id:>2} {name}: {detail}").unwrap();
    }
    if let Some(count) = literal_negative {
        writeln!(stdout, "note: tau_q with the pi(x) denominator is negative for {count} of 38 moduli").unwrap();
    }
    writeln!(
        stdout,
        "{} passed, {} failed {failed:?}; expected failures {KNOWN_UNATTAINABLE:?}",
        results.len() - failed.len(),
        failed.len()
    )
    .unwrap();
    if failed == KNOWN_UNATTAINABLE {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
