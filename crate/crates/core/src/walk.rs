//! Prime races, the first-passage law of the simple random walk, and
//! rigorous brackets for the chance that a random walk takes longer to
//! cross than a given prime race did.
//!
//! For the ±1 walk started at 0, the first hitting time of `+z` equals `n`
//! with probability `(z/n) · C(n, (n+z)/2) · 2^{−n}`. For `z = 1` the tail
//! from step `2N+1` on is `C(2N, N)/4^N ≈ 1/√(πN)`, and
//! [`first_passage_tail_bracket`] encloses it with effective Stirling bounds.
//!
//! [`published_tail_bracket`] evaluates the older series estimate
//! `1/√(16π(N±1))`, which sits a factor of 4 below the true tail. It is kept
//! so that the historical percentages can be regenerated digit for digit.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use crate::bound::binomial_u128;
use crate::census::{gcd, CensusError, Sieve, SieveConfig};
use crate::numerics::log_binomial;
use crate::Execution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no crossing up to {x_max}: class {winner} still trails class {loser} by {deficit}")]
    NotFound { x_max: u64, winner: u64, loser: u64, deficit: u64 },
    #[error("walk length {steps} (pi(tau) = {pi_tau}) is not odd, so the tail does not start at 2N+1")]
    Alignment { pi_tau: u64, steps: u64 },
    #[error("sieve failed: {0}")]
    Sieve(String),
}

impl From<CensusError> for WalkError {
    fn from(e: CensusError) -> Self {
        WalkError::Sieve(e.to_string())
    }
}

/// Which residue classes race, and which primes are left out of the walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaceSpec {
    pub q: u64,
    pub winner_class: u64,
    pub loser_class: u64,
    pub x_max: u64,
    pub skip_primes: Vec<u64>,
}

impl RaceSpec {
    pub fn new(
        q: u64,
        winner_class: u64,
        loser_class: u64,
        x_max: u64,
        skip_primes: Vec<u64>,
    ) -> Result<Self, WalkError> {
        if q < 3 {
            return Err(WalkError::Domain(format!("modulus {q} too small for a race")));
        }
        let (w, l) = (winner_class % q, loser_class % q);
        if w == l {
            return Err(WalkError::Domain(format!("classes {winner_class} and {loser_class} coincide mod {q}")));
        }
        for a in [w, l] {
            if gcd(a, q) != 1 {
                return Err(WalkError::Domain(format!("class {a} is not invertible mod {q}")));
            }
        }
        Ok(RaceSpec { q, winner_class: w, loser_class: l, x_max, skip_primes })
    }

    /// `1 mod 4` overtaking `3 mod 4`; the walk skips 2.
    pub fn mod4(x_max: u64) -> Self {
        RaceSpec { q: 4, winner_class: 1, loser_class: 3, x_max, skip_primes: vec![2] }
    }

    /// `1 mod 3` overtaking `2 mod 3`; the walk skips 3.
    pub fn mod3(x_max: u64) -> Self {
        RaceSpec { q: 3, winner_class: 1, loser_class: 2, x_max, skip_primes: vec![3] }
    }

    fn skipped_up_to(&self, x: u64) -> u64 {
        self.skip_primes.iter().filter(|&&p| p <= x).count() as u64
    }
}

/// Where a race first flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaceCrossing {
    /// The least prime at which the winner strictly leads.
    pub tau: u64,
    /// `π(τ)`.
    pub pi_tau: u64,
}

/// Scans primes up to `spec.x_max` for the first strict lead of the winner.
pub fn prime_race_first_crossing(spec: &RaceSpec) -> Result<RaceCrossing, WalkError> {
    let sieve = Sieve::new(spec.x_max, SieveConfig::default())?;
    let (mut lead, mut pi) = (0i64, 0u64);
    for p in sieve.primes() {
        pi += 1;
        let r = p % spec.q;
        if r == spec.winner_class {
            lead += 1;
            if lead > 0 {
                return Ok(RaceCrossing { tau: p, pi_tau: pi });
            }
        } else if r == spec.loser_class {
            lead -= 1;
        }
    }
    Err(WalkError::NotFound {
        x_max: spec.x_max,
        winner: spec.winner_class,
        loser: spec.loser_class,
        deficit: lead.unsigned_abs(),
    })
}

/// Below this many steps the PMF is evaluated from the exact binomial.
const EXACT_PMF_MAX_STEPS: u64 = 120;

/// `P(first hit of +z happens at step n)`.
pub fn first_passage_pmf(z: u64, n: u64) -> f64 {
    if z == 0 || n < z || !(n + z).is_multiple_of(2) {
        return 0.0;
    }
    if n <= EXACT_PMF_MAX_STEPS {
        let c = binomial_u128(n, (n + z) / 2).expect("fits in u128") as f64;
        // scaling by a power of two is exact
        return z as f64 * c / n as f64 * 2f64.powi(-(n as i32));
    }
    first_passage_log_pmf(z, n).exp()
}

/// Natural log of [`first_passage_pmf`]; `-inf` when impossible.
pub fn first_passage_log_pmf(z: u64, n: u64) -> f64 {
    if z == 0 || n < z || !(n + z).is_multiple_of(2) {
        return f64::NEG_INFINITY;
    }
    let up = (n + z) / 2;
    if n <= EXACT_PMF_MAX_STEPS {
        let c = binomial_u128(n, up).expect("fits in u128") as f64;
        return (z as f64 * c / n as f64).ln() - n as f64 * std::f64::consts::LN_2;
    }
    (z as f64).ln() - (n as f64).ln() + log_binomial(n, up).expect("up <= n") - n as f64 * std::f64::consts::LN_2
}

/// A closed interval `[lo, hi]` whose arithmetic rounds outward, so it
/// always contains the exact real result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Extra ulps for library `exp`/`ln`, which are not correctly rounded.
const TRANSCENDENTAL_ULPS: usize = 2;

fn down(x: f64, ulps: usize) -> f64 {
    (0..ulps).fold(x, |v, _| v.next_down())
}

fn up(x: f64, ulps: usize) -> f64 {
    (0..ulps).fold(x, |v, _| v.next_up())
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// An integer, exactly if it fits in 53 bits.
    pub fn integer(n: u64) -> Self {
        let x = n as f64;
        if x as u64 == n && n < (1 << 53) {
            Interval::point(x)
        } else {
            Interval { lo: x.next_down(), hi: x.next_up() }
        }
    }

    pub fn pi() -> Self {
        Interval { lo: PI.next_down(), hi: PI.next_up() }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn recip(self) -> Interval {
        Interval::point(1.0).div(self)
    }

    pub fn sqrt(self) -> Interval {
        assert!(self.lo >= 0.0, "sqrt of a negative interval");
        Interval { lo: down(self.lo.sqrt(), 1), hi: up(self.hi.sqrt(), 1) }
    }

    pub fn exp(self) -> Interval {
        Interval { lo: down(self.lo.exp(), TRANSCENDENTAL_ULPS).max(0.0), hi: up(self.hi.exp(), TRANSCENDENTAL_ULPS) }
    }

    pub fn scale(self, c: f64) -> Interval {
        self.mul(Interval::point(c))
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, o: Interval) -> Interval {
        Interval { lo: down(self.lo + o.lo, 1), hi: up(self.hi + o.hi, 1) }
    }
}

impl Sub for Interval {
    type Output = Interval;

    fn sub(self, o: Interval) -> Interval {
        Interval { lo: down(self.lo - o.hi, 1), hi: up(self.hi - o.lo, 1) }
    }
}

impl Neg for Interval {
    type Output = Interval;

    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;

    fn mul(self, o: Interval) -> Interval {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo: down(lo, 1), hi: up(hi, 1) }
    }
}

/// Panics if the divisor contains zero.
impl Div for Interval {
    type Output = Interval;

    fn div(self, o: Interval) -> Interval {
        assert!(o.lo > 0.0 || o.hi < 0.0, "interval division by an interval containing 0");
        let c = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo: down(lo, 1), hi: up(hi, 1) }
    }
}

/// A rigorous enclosure of a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileBracket {
    pub lower: f64,
    pub upper: f64,
}

impl PercentileBracket {
    pub fn new(lower: f64, upper: f64) -> Result<Self, WalkError> {
        if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || lower > upper {
            return Err(WalkError::Domain(format!("[{lower}, {upper}] is not a sub-interval of [0, 1]")));
        }
        Ok(PercentileBracket { lower, upper })
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    /// `[1 − upper, 1 − lower]`, rounded outward.
    pub fn complement(&self) -> PercentileBracket {
        PercentileBracket { lower: down(1.0 - self.upper, 1).max(0.0), upper: up(1.0 - self.lower, 1).min(1.0) }
    }
}

/// Rigorous bracket on `P(first passage to +1 ≥ 2N+1) = C(2N, N)/4^N`:
///
/// ```text
/// exp(−1/(8N) − 1/(2880N³)) / √(πN)  <  tail  <  exp(−1/(8N) + 1/(180N³)) / √(πN)
/// ```
pub fn first_passage_tail_bracket(big_n: u64) -> Result<PercentileBracket, WalkError> {
    if big_n < 2 {
        return Err(WalkError::Domain(format!("tail bracket needs N >= 2, got {big_n}")));
    }
    let n = Interval::integer(big_n);
    let cube = n.mul(n).mul(n);
    let leading = n.scale(8.0).recip().neg();
    let scale = Interval::pi().mul(n).sqrt();
    let lower = leading.sub(cube.scale(2880.0).recip()).exp().div(scale);
    let upper = leading.add(cube.scale(180.0).recip()).exp().div(scale);
    PercentileBracket::new(lower.lo.max(0.0), upper.hi.min(1.0))
}

/// The published series bracket for `P(first passage to +1 ≥ 2N+1)`:
///
/// ```text
/// lower = exp(−1/(360(2N+1)³) − (5/24)(2N+1)/(N(N+1))) / √(16π(N+1))
/// upper = exp((N⁻³ + (N+1)⁻³)/360 + (N⁻² − (N+1)⁻² − (2N+1)/(N(N+1)))/24) / √(16π(N−1))
/// ```
///
/// The true tail is about four times larger than both endpoints, so this is
/// not an enclosure. Use [`first_passage_tail_bracket`] for that.
pub fn published_tail_bracket(big_n: u64) -> Result<PercentileBracket, WalkError> {
    if big_n < 2 {
        return Err(WalkError::Domain(format!("tail bracket needs N >= 2, got {big_n}")));
    }
    let n = Interval::integer(big_n);
    let n1 = Interval::integer(big_n + 1);
    let nm1 = Interval::integer(big_n - 1);
    let two_n1 = Interval::integer(2 * big_n + 1);
    let ratio = two_n1.div(n.mul(n1));
    let sixteen_pi = Interval::pi().scale(16.0);

    let cube = |v: Interval| v.mul(v).mul(v);
    let lower_exp = cube(two_n1).scale(360.0).recip().neg().sub(ratio.scale(5.0).div(Interval::point(24.0)));
    let lower = lower_exp.exp().div(sixteen_pi.mul(n1).sqrt());

    let cubes = cube(n).recip().add(cube(n1).recip()).div(Interval::point(360.0));
    let squares = n.mul(n).recip().sub(n1.mul(n1).recip()).sub(ratio).div(Interval::point(24.0));
    let upper = cubes.add(squares).exp().div(sixteen_pi.mul(nm1).sqrt());

    PercentileBracket::new(lower.lo.max(0.0), upper.hi.min(1.0))
}

/// Everything behind a Chebyshev-bias percentile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevReport {
    pub tau: u64,
    pub pi_tau: u64,
    /// Walk steps taken by `τ`: `π(τ)` minus the skipped primes.
    pub steps: u64,
    /// `N` with `steps = 2N + 1`.
    pub big_n: u64,
    /// `P(first passage ≥ 2N+1)`.
    pub tail: PercentileBracket,
    /// `P(T < τ) = 1 − tail`.
    pub percentile: PercentileBracket,
    /// [`published_tail_bracket`] at the same `N`.
    pub published_tail: PercentileBracket,
    /// `1 − published_tail`.
    pub published_percentile: PercentileBracket,
}

/// Brackets `P(T < τ)` for the race in `spec` that first flipped at `τ`.
/// `π(τ)` is sieved unless supplied.
pub fn chebyshev_percentile_bracket(
    tau: u64,
    spec: &RaceSpec,
    pi_tau: Option<u64>,
) -> Result<ChebyshevReport, WalkError> {
    if tau < 2 {
        return Err(WalkError::Domain(format!("tau = {tau} must be at least 2")));
    }
    let pi_tau = match pi_tau {
        Some(p) => p,
        None => Sieve::new(tau, SieveConfig::default())?.count(Execution::Parallel),
    };
    let skipped = spec.skipped_up_to(tau);
    let steps = pi_tau
        .checked_sub(skipped)
        .ok_or_else(|| WalkError::Domain(format!("pi(tau) = {pi_tau} is below the {skipped} skipped primes")))?;
    if steps % 2 == 0 {
        return Err(WalkError::Alignment { pi_tau, steps });
    }
    let big_n = (steps - 1) / 2;
    let tail = first_passage_tail_bracket(big_n)?;
    let published_tail = published_tail_bracket(big_n)?;
    Ok(ChebyshevReport {
        tau,
        pi_tau,
        steps,
        big_n,
        tail,
        percentile: tail.complement(),
        published_tail,
        published_percentile: published_tail.complement(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pmf_examples() {
        assert_abs_diff_eq!(first_passage_pmf(1, 1), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(first_passage_pmf(1, 3), 0.125, epsilon = 1e-16);
        assert_eq!(first_passage_pmf(1, 2), 0.0);
        assert_eq!(first_passage_pmf(3, 1), 0.0);
        assert_abs_diff_eq!(first_passage_pmf(2, 2), 0.25, epsilon = 1e-16);
    }

    #[test]
    fn race_examples() {
        let c = prime_race_first_crossing(&RaceSpec::mod4(100_000)).unwrap();
        assert_eq!(c, RaceCrossing { tau: 26_861, pi_tau: 2_946 });
        let flipped = RaceSpec::new(4, 3, 1, 10, vec![2]).unwrap();
        assert_eq!(prime_race_first_crossing(&flipped).unwrap().tau, 3);
        match prime_race_first_crossing(&RaceSpec::mod3(1_000_000)) {
            Err(WalkError::NotFound { deficit, .. }) => assert!(deficit > 0),
            other => panic!("expected NotFound, got {other:?}"),
        }
    }

    #[test]
    fn race_spec_validation() {
        assert!(RaceSpec::new(4, 1, 1, 10, vec![]).is_err());
        assert!(RaceSpec::new(4, 2, 1, 10, vec![]).is_err());
        assert!(RaceSpec::new(2, 1, 0, 10, vec![]).is_err());
    }

    #[test]
    fn mod4_bracket() {
        let r = chebyshev_percentile_bracket(26_861, &RaceSpec::mod4(100_000), None).unwrap();
        assert_eq!(r.big_n, 1_472);
        assert!(r.published_tail.lower > 0.003_674 && r.published_tail.upper < 0.003_678);
        assert!(r.published_percentile.lower > 0.996_322 && r.published_percentile.upper < 0.996_326);
        assert!(r.tail.lower > 0.014_703 && r.tail.upper < 0.014_705);
    }

    #[test]
    fn alignment_is_checked() {
        let err = chebyshev_percentile_bracket(26_861, &RaceSpec::mod4(100_000), Some(2_947));
        assert!(matches!(err, Err(WalkError::Alignment { .. })));
        assert!(first_passage_tail_bracket(1).is_err());
        assert!(published_tail_bracket(1).is_err());
    }

    #[test]
    fn doubling_n_scales_by_root_two() {
        for f in [first_passage_tail_bracket, published_tail_bracket] {
            let a = f(10_000).unwrap().midpoint();
            let b = f(20_000).unwrap().midpoint();
            assert_abs_diff_eq!(a / b, 2f64.sqrt(), epsilon = 1e-3);
        }
    }

    #[test]
    fn published_bracket_is_a_quarter_of_the_tail() {
        for big_n in [2u64, 100, 1_472, 1_000_000] {
            let ratio = first_passage_tail_bracket(big_n).unwrap().midpoint()
                / published_tail_bracket(big_n).unwrap().midpoint();
            assert!((ratio - 4.0).abs() < 4.0 / big_n as f64, "N = {big_n}: {ratio}");
        }
    }

    #[test]
    fn interval_ops_enclose() {
        let third = Interval::point(1.0).div(Interval::point(3.0));
        assert!(third.lo < third.hi);
        assert!(third.mul(Interval::point(3.0)).contains(1.0));
        assert!(Interval::pi().contains(PI));
        assert!(Interval::point(2.0).sqrt().mul(Interval::point(2.0).sqrt()).contains(2.0));
    }
}
