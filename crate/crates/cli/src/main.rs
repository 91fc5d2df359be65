//! `prime-entropy`: prime residue censuses, KL statistics, tail bounds and
//! Chebyshev-bias brackets from the command line.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 when a computation,
//! validation or verification fails.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use prime_entropy::bound::{derive, left_tail_bound, BoundInput, BoundVariant};
use prime_entropy::census::{self, census_all_with, load_census, save_census, CensusError, ResidueCensus, SieveConfig};
use prime_entropy::entropy::TauNormalization;
use prime_entropy::format::{complement_percent_bracket, percent, scientific, tail_percent_bracket, Notation};
use prime_entropy::oracle::{grid, verify_theorem_dominance, OracleConfig};
use prime_entropy::table::{kl_table, render_csv, render_text, TableOptions};
use prime_entropy::walk::{chebyshev_percentile_bracket, prime_race_first_crossing, RaceSpec};
use prime_entropy::Execution;

/// First crossing of the `1 mod 3` / `2 mod 3` race; far beyond a sieve run.
const MOD3_TAU: u64 = 608_981_813_029;
/// Walk half-length `N` at that crossing, so `π(τ) = 2N + 2`.
const MOD3_HALF_STEPS: u64 = 11_669_295_395;

#[derive(Debug, Parser)]
#[command(name = "prime-entropy", version, about = "Prime residue races against the iid-uniform model")]
struct Cli {
    /// Census limit: primes p <= x are counted.
    #[arg(long = "x", global = true, default_value = "100000000", value_parser = parse_count)]
    x: u64,
    #[arg(long, global = true, default_value_t = 3)]
    q_min: u64,
    #[arg(long, global = true, default_value_t = 40)]
    q_max: u64,
    /// Census cache file (CSV); read when it covers the request, written otherwise.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
    /// Printed significant digits [default: 3; for `chebyshev`, the first
    /// digit at which the bracket endpoints differ].
    #[arg(long, global = true)]
    precision: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    /// Combinatorial shell count, full exponent.
    Theorem,
    /// Exact shell count, linear exponent term dropped.
    Table,
    /// Exact shell count, full exponent.
    ExactKept,
}

impl From<VariantArg> for BoundVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Theorem => BoundVariant::THEOREM,
            VariantArg::Table => BoundVariant::TABLE,
            VariantArg::ExactKept => BoundVariant::EXACT_KEPT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TauArg {
    /// Divide by the number of primes in invertible classes.
    Invertible,
    /// Divide by pi(x).
    PiX,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Race {
    Mod4,
    Mod3,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count primes in each invertible class for every modulus in range.
    Census,
    /// tau_q, the left-tail bound and the chi-square percentile per modulus.
    KlTable {
        #[arg(long, value_enum, default_value_t = VariantArg::Table)]
        variant: VariantArg,
        #[arg(long, value_enum, default_value_t = TauArg::Invertible)]
        tau: TauArg,
    },
    /// Evaluate the left-tail bound for one (n, k, theta).
    Bound {
        #[arg(long, value_parser = parse_count)]
        n: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        theta: f64,
        #[arg(long, value_enum, default_value_t = VariantArg::Theorem)]
        variant: VariantArg,
    },
    /// Check the bound against exhaustive enumeration on a grid.
    OracleVerify {
        #[arg(long, default_value_t = 6)]
        n_min: u64,
        #[arg(long, default_value_t = 40)]
        n_max: u64,
        #[arg(long, default_value_t = 2)]
        k_min: u64,
        #[arg(long, default_value_t = 4)]
        k_max: u64,
        #[arg(long, default_value_t = 20)]
        thetas: usize,
        #[arg(long, default_value_t = 1e-4)]
        theta_min: f64,
        #[arg(long, default_value_t = 1e-1)]
        theta_max: f64,
        #[arg(long, value_enum, default_value_t = VariantArg::Theorem)]
        variant: VariantArg,
        /// Also write every checked point to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Percentile bracket for a Chebyshev-bias prime race.
    Chebyshev {
        #[arg(long, value_enum, default_value_t = Race::Mod4)]
        race: Race,
        /// Sieve limit for locating the mod 4 crossing.
        #[arg(long, default_value = "100000", value_parser = parse_count)]
        x_max: u64,
    },
}

/// Accepts plain integers and integral scientific notation such as `1e8`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.replace('_', "").parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= 1e18 => Ok(v as u64),
        _ => Err(format!("`{s}` is not a nonnegative integer")),
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: Into<prime_entropy::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into().to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn exec(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn moduli(cli: &Cli) -> Result<Vec<u64>, Failure> {
    if cli.q_min < 3 || cli.q_min > cli.q_max {
        return Err(Failure::Usage(format!("need 3 <= q-min <= q-max, got {}..{}", cli.q_min, cli.q_max)));
    }
    if cli.x < 2 {
        return Err(Failure::Usage(format!("need x >= 2, got {}", cli.x)));
    }
    Ok((cli.q_min..=cli.q_max).collect())
}

/// Censuses for the requested range: from the cache when it has them,
/// otherwise from a sieve run (written back to the cache if one is named).
fn obtain_censuses(cli: &Cli, force_sieve: bool) -> Result<Vec<ResidueCensus>, Failure> {
    let moduli = moduli(cli)?;
    let cached = match &cli.cache {
        Some(path) if path.exists() => load_census(path)?,
        _ => Vec::new(),
    };
    if !force_sieve {
        let found: Vec<ResidueCensus> =
            moduli.iter().filter_map(|&q| cached.iter().find(|c| c.x() == cli.x && c.q() == q).cloned()).collect();
        if found.len() == moduli.len() {
            return Ok(found);
        }
    }
    let fresh = census_all_with(cli.x, &moduli, SieveConfig::default(), exec(cli))?;
    if let Some(path) = &cli.cache {
        write_cache(path, cached, &fresh)?;
    }
    Ok(fresh)
}

fn write_cache(path: &Path, mut existing: Vec<ResidueCensus>, fresh: &[ResidueCensus]) -> Result<(), CensusError> {
    existing.retain(|c| !fresh.iter().any(|f| f.x() == c.x() && f.q() == c.q()));
    existing.extend_from_slice(fresh);
    existing.sort_by_key(|c| (c.x(), c.q()));
    save_census(path, &existing)
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let precision = cli.precision.unwrap_or(3);
    if precision == 0 || precision > 17 {
        return Err(Failure::Usage(format!("precision must be in 1..=17, got {precision}")));
    }
    match &cli.command {
        Command::Census => cmd_census(cli),
        Command::KlTable { variant, tau } => {
            let censuses = obtain_censuses(cli, false)?;
            let options = TableOptions {
                normalization: match tau {
                    TauArg::Invertible => TauNormalization::InvertiblePrimes,
                    TauArg::PiX => TauNormalization::PiX,
                },
                variant: (*variant).into(),
            };
            let rows = kl_table(&censuses, &options, exec(cli));
            Ok(match cli.format {
                OutputFormat::Csv => render_csv(&rows, precision),
                OutputFormat::Table => render_text(&rows, precision),
            })
        }
        Command::Bound { n, k, theta, variant } => cmd_bound(cli, *n, *k, *theta, (*variant).into(), precision),
        Command::OracleVerify { n_min, n_max, k_min, k_max, thetas, theta_min, theta_max, variant, csv } => {
            if n_min > n_max
                || *k_min < 2
                || k_min > k_max
                || *thetas == 0
                || !(*theta_min > 0.0 && theta_min <= theta_max)
            {
                return Err(Failure::Usage("empty or invalid oracle grid".into()));
            }
            let theta_grid: Vec<f64> = if *thetas == 1 {
                vec![*theta_min]
            } else {
                let (lo, hi) = (theta_min.log10(), theta_max.log10());
                (0..*thetas).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (*thetas - 1) as f64)).collect()
            };
            let points = grid(*n_min..=*n_max, *k_min..=*k_max, &theta_grid);
            let report = verify_theorem_dominance(&points, (*variant).into(), &OracleConfig::default(), exec(cli))?;
            if let Some(path) = csv {
                let mut text = String::from("n,k,theta,exact,bound\n");
                for p in &report.checked {
                    writeln!(text, "{},{},{:e},{:e},{:e}", p.input.n, p.input.k, p.input.theta, p.exact, p.bound)
                        .unwrap();
                }
                std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            }
            let mut out = String::new();
            for v in &report.violations {
                writeln!(
                    out,
                    "VIOLATION n={} k={} theta={:e}: exact {:e} > bound {:e}",
                    v.input.n, v.input.k, v.input.theta, v.exact, v.bound
                )
                .unwrap();
            }
            writeln!(
                out,
                "{} violations / {} grid points ({} excluded by preconditions)",
                report.violations.len(),
                report.checked.len(),
                report.excluded.len()
            )
            .unwrap();
            if report.passed() {
                Ok(out)
            } else {
                print!("{out}");
                Err(Failure::Runtime(format!("{} dominance violations", report.violations.len())))
            }
        }
        Command::Chebyshev { race, x_max } => cmd_chebyshev(cli, *race, *x_max),
    }
}

fn cmd_census(cli: &Cli) -> Result<String, Failure> {
    let censuses = obtain_censuses(cli, true)?;
    Ok(match cli.format {
        OutputFormat::Csv => census::to_csv(&censuses),
        OutputFormat::Table => {
            let mut out = String::from("x\tq\tpi(x)\texcluded\tcounts\n");
            for c in &censuses {
                let counts: Vec<String> = c.counts().iter().map(|(a, n)| format!("{a}:{n}")).collect();
                writeln!(out, "{}\t{}\t{}\t{}\t{}", c.x(), c.q(), c.pi_x(), c.excluded(), counts.join(" ")).unwrap();
            }
            out
        }
    })
}

fn cmd_bound(
    cli: &Cli,
    n: u64,
    k: u64,
    theta: f64,
    variant: BoundVariant,
    precision: usize,
) -> Result<String, Failure> {
    let input = BoundInput::new(n, k, theta).map_err(|e| Failure::Usage(e.to_string()))?;
    let d = derive(&input);
    let result = left_tail_bound(&input, variant, exec(cli));
    let yes_no = |b: bool| if b { "ok" } else { "FAILS" };
    let mut out = String::new();
    match cli.format {
        OutputFormat::Csv => {
            out.push_str("n,k,theta,mu_round,offset,b,c_b,range_ok,slope_ok,log_bound,bound,vacuous\n");
            let (lb, b, vac) = match &result {
                Ok(r) => (format!("{:e}", r.log_bound), format!("{:e}", r.bound), r.is_vacuous().to_string()),
                Err(_) => (String::new(), String::new(), String::new()),
            };
            let c_b = d.c_b.map(|c| format!("{c:e}")).unwrap_or_default();
            writeln!(
                out,
                "{n},{k},{theta:e},{},{},{},{c_b},{},{},{lb},{b},{vac}",
                d.mu_round, d.offset, d.b, d.range_ok, d.slope_ok
            )
            .unwrap();
        }
        OutputFormat::Table => {
            writeln!(out, "n = {n}, k = {k}, theta = {theta:e}").unwrap();
            writeln!(out, "mu = {}, [mu] = {}, n - k[mu] = {}", input.mu(), d.mu_round, d.offset).unwrap();
            let guard = if d.b_near_integer { " (floor taken at the larger candidate)" } else { "" };
            writeln!(out, "B = {}{guard}", d.b).unwrap();
            writeln!(out, "range condition 0 < B < [mu]: {}", yes_no(d.range_ok)).unwrap();
            match d.c_b {
                Some(c) => writeln!(
                    out,
                    "c_B = {c:e}; slope condition 2c_B > {:e}: {}",
                    d.slope_threshold(),
                    yes_no(d.slope_ok)
                )
                .unwrap(),
                None => writeln!(out, "slope condition: not evaluated").unwrap(),
            }
            if let Ok(r) = &result {
                let note = if r.is_vacuous() { " (vacuous)" } else { "" };
                writeln!(
                    out,
                    "bound = {} = {}{note}",
                    scientific(r.bound, precision, Notation::Text),
                    percent(r.bound, precision, Notation::Text)
                )
                .unwrap();
                writeln!(out, "ln bound = {}", r.log_bound).unwrap();
            }
        }
    }
    match result {
        Ok(_) => Ok(out),
        Err(e) => {
            print!("{out}");
            Err(Failure::Runtime(e.to_string()))
        }
    }
}

fn cmd_chebyshev(cli: &Cli, race: Race, x_max: u64) -> Result<String, Failure> {
    let (spec, tau, pi_tau, source) = match race {
        Race::Mod4 => {
            let spec = RaceSpec::mod4(x_max);
            let crossing = prime_race_first_crossing(&spec)?;
            (spec, crossing.tau, crossing.pi_tau, "sieved")
        }
        Race::Mod3 => (RaceSpec::mod3(MOD3_TAU), MOD3_TAU, 2 * MOD3_HALF_STEPS + 2, "supplied"),
    };
    let report = chebyshev_percentile_bracket(tau, &spec, Some(pi_tau))?;
    let brackets = [("published", &report.published_tail), ("exact", &report.tail)].map(|(name, tail)| {
        let (p_lo, p_hi) = complement_percent_bracket(tail, cli.precision);
        let (t_lo, t_hi) = tail_percent_bracket(tail, cli.precision);
        (name, t_lo, t_hi, p_lo, p_hi)
    });
    let label = match race {
        Race::Mod4 => "mod4",
        Race::Mod3 => "mod3",
    };
    let mut out = String::new();
    match cli.format {
        OutputFormat::Csv => {
            out.push_str(
                "race,tau,pi_tau,N,bracket,tail_lower_percent,tail_upper_percent,lower_percent,upper_percent\n",
            );
            for (name, t_lo, t_hi, p_lo, p_hi) in &brackets {
                writeln!(
                    out,
                    "{label},{},{},{},{name},{t_lo},{t_hi},{p_lo},{p_hi}",
                    report.tau, report.pi_tau, report.big_n
                )
                .unwrap();
            }
        }
        OutputFormat::Table => {
            writeln!(
                out,
                "race: {} mod {q} overtakes {} mod {q} (walk skips {:?})",
                spec.winner_class,
                spec.loser_class,
                spec.skip_primes,
                q = spec.q
            )
            .unwrap();
            writeln!(out, "tau = {}, pi(tau) = {} ({source}), N = {}", report.tau, report.pi_tau, report.big_n)
                .unwrap();
            for (name, t_lo, t_hi, p_lo, p_hi) in &brackets {
                let title = match *name {
                    "published" => "published series bound 1/sqrt(16 pi (N +- 1)) (understates the tail by 4x):",
                    _ => "exact tail C(2N, N)/4^N:",
                };
                writeln!(out, "{title}").unwrap();
                writeln!(out, "  tail: {t_lo}% < P(T >= tau) < {t_hi}%").unwrap();
                writeln!(out, "  (100 - {t_lo})% > P > (100 - {t_hi})%").unwrap();
                writeln!(out, "  {p_lo}% < P < {p_hi}%").unwrap();
            }
        }
    }
    Ok(out)
}
