//! Rigorous upper bound on `P(D_KL(M_n ‖ Unif) ≤ θ)` for the uniform
//! multinomial with `n` trials over `k` outcomes.
//!
//! With `μ = n/k`, `m = [μ]` and `s = n − k·m`, every type class has
//! deviations `d_j = T_j − m` summing to `s`, and its L¹ size
//! `Δ = Σ|d_j|` is at most `B = ⌊n√(2θ)⌋ + |s|` on the event `D_KL ≤ θ`.
//! The bound is
//!
//! ```text
//! prefactor · Σ_{Δ=1}^{B} #shell(Δ) · exp(((½−c_Δ)/m²)Δ³ − ((½+c_Δ)/m − (½−c_Δ)/(2m²))Δ)
//!   + [s = 0] · n!/((μ!)^k kⁿ)
//! ```
//!
//! where `prefactor = √(2πn) μⁿ / ((2πm)^{k/2} mⁿ) · exp(1/(12n) − s(1 + 1/(2m)))`.
//! [`BoundVariant`] chooses how `#shell(Δ)` is counted and whether the
//! linear term in the exponent is kept.

use std::f64::consts::{LN_2, PI};

use thiserror::Error;

use crate::exec::{chunk_ranges, map_slice, Execution};
use crate::numerics::{log_binomial_or_zero, log_factorial, log_sum_exp};

/// Δ values per chunk of the outer sum.
pub const DELTA_CHUNK: usize = 1024;
/// Distance (in ulps) below which `n√(2θ)` is treated as an integer.
pub const FLOOR_GUARD_ULPS: u32 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range condition 0 < B < [mu] fails: B = {b}, [mu] = {mu_round}")]
    RangeCondition { b: u64, mu_round: u64 },
    #[error("slope condition 2c_B > -(2[mu]-1)/(2[mu]+1) fails: 2c_B = {two_c_b}, threshold = {threshold}")]
    SlopeCondition { two_c_b: f64, threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInput {
    pub n: u64,
    pub k: u64,
    pub theta: f64,
}

impl BoundInput {
    pub fn new(n: u64, k: u64, theta: f64) -> Result<Self, BoundError> {
        if n < 2 {
            return Err(BoundError::Domain(format!("n = {n}; need n >= 2")));
        }
        if k < 2 {
            return Err(BoundError::Domain(format!("k = {k}; need k >= 2")));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(BoundError::Domain(format!("theta = {theta}; need a positive finite threshold")));
        }
        Ok(BoundInput { n, k, theta })
    }

    pub fn mu(&self) -> f64 {
        self.n as f64 / self.k as f64
    }
}

/// Quantities derived from a [`BoundInput`], valid or not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundDerived {
    pub mu_round: u64,
    /// `s = n − k[μ]`; `k|μ − [μ]| = |s|`.
    pub offset: i64,
    pub b: u64,
    /// `n√(2θ)` was within [`FLOOR_GUARD_ULPS`] of an integer and `B` was
    /// taken at the larger candidate.
    pub b_near_integer: bool,
    /// `c_B`, defined only when `0 < B < [μ]`.
    pub c_b: Option<f64>,
    pub range_ok: bool,
    pub slope_ok: bool,
}

impl BoundDerived {
    pub fn is_valid(&self) -> bool {
        self.range_ok && self.slope_ok
    }

    /// Right-hand side of the slope condition `2c_B > −(2m−1)/(2m+1)`.
    pub fn slope_threshold(&self) -> f64 {
        let m = self.mu_round as f64;
        -(2.0 * m - 1.0) / (2.0 * m + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    pub log_bound: f64,
    pub bound: f64,
    /// `μ ∈ ℤ`, so the uniform class term `n!/((μ!)^k kⁿ)` was added.
    pub central_term_included: bool,
    pub derived: BoundDerived,
    pub variant: BoundVariant,
}

impl BoundResult {
    /// The bound exceeds 1 and says nothing about a probability.
    pub fn is_vacuous(&self) -> bool {
        self.log_bound > 0.0
    }
}

/// How `#shell(Δ)` is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellCount {
    /// `Σ_r C(k,r) C(Δ−1,r−1) 2^r`, an upper bound on every shell size.
    Combinatorial,
    /// The exact number of deviation vectors with `Σ|d_j| = Δ`, `Σd_j = s`.
    Exact,
}

/// Whether the linear-in-Δ part of the exponent is kept. Under the slope
/// condition that part is nonpositive, so dropping it still bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearTerm {
    Kept,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundVariant {
    pub shell: ShellCount,
    pub linear: LinearTerm,
}

impl BoundVariant {
    /// The statement with the combinatorial shell count.
    pub const THEOREM: BoundVariant = BoundVariant { shell: ShellCount::Combinatorial, linear: LinearTerm::Kept };
    /// Exact shell counts, linear term dropped; this is what reproduces the
    /// published KL table.
    pub const TABLE: BoundVariant = BoundVariant { shell: ShellCount::Exact, linear: LinearTerm::Dropped };
    pub const EXACT_KEPT: BoundVariant = BoundVariant { shell: ShellCount::Exact, linear: LinearTerm::Kept };
}

impl Default for BoundVariant {
    fn default() -> Self {
        BoundVariant::THEOREM
    }
}

/// Nearest integer to `y > 0`, ties away from zero.
pub fn nearest_int(y: f64) -> u64 {
    debug_assert!(y > 0.0);
    y.round() as u64
}

/// `[n/k]` from integers, ties away from zero.
pub fn nearest_int_ratio(n: u64, k: u64) -> u64 {
    (2 * n + k) / (2 * k)
}

/// `c_Δ = ½ + [μ]/Δ + ([μ]/Δ)² ln(1 − Δ/[μ])`.
pub fn c_delta(delta: u64, mu_round: u64) -> Result<f64, BoundError> {
    if delta == 0 || delta >= mu_round {
        return Err(BoundError::Domain(format!(
            "c_delta needs 0 < delta < [mu]; got delta = {delta}, [mu] = {mu_round}"
        )));
    }
    let x = delta as f64 / mu_round as f64;
    let c = if x < 0.5 { c_delta_series(x) } else { c_delta_direct(x) };
    debug_assert!(c < 0.0, "c_delta({delta}, {mu_round}) = {c}");
    Ok(c)
}

/// `−Σ_{m≥1} x^m/(m+2)`, stopped once a term drops below 1e-18.
pub fn c_delta_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut power = x;
    let mut m = 1.0;
    loop {
        let term = power / (m + 2.0);
        sum += term;
        if term < 1e-18 {
            return -sum;
        }
        power *= x;
        m += 1.0;
    }
}

/// `½ + 1/x + ln(1 − x)/x²`; cancels catastrophically for small `x`.
pub fn c_delta_direct(x: f64) -> f64 {
    0.5 + 1.0 / x + (-x).ln_1p() / (x * x)
}

/// `B` and whether it came from the widened floor.
fn floor_b(input: &BoundInput, offset: i64) -> (u64, bool) {
    let r = input.n as f64 * (2.0 * input.theta).sqrt();
    let nearest = r.round();
    let ulp = r.next_up() - r;
    let near = (r - nearest).abs() <= FLOOR_GUARD_ULPS as f64 * ulp;
    let base = if near { nearest.max(r.floor()) } else { r.floor() };
    (base as u64 + offset.unsigned_abs(), near)
}

/// `B = ⌊n√(2θ) + k|μ − [μ]|⌋`.
pub fn compute_b(input: &BoundInput) -> u64 {
    let m = nearest_int_ratio(input.n, input.k);
    let offset = input.n as i64 - (input.k * m) as i64;
    floor_b(input, offset).0
}

/// Evaluates `[μ]`, `B`, `c_B` and both validity conditions.
pub fn derive(input: &BoundInput) -> BoundDerived {
    let mu_round = nearest_int_ratio(input.n, input.k);
    let offset = input.n as i64 - (input.k * mu_round) as i64;
    let (b, b_near_integer) = floor_b(input, offset);
    let range_ok = b > 0 && b < mu_round;
    let c_b = if range_ok { c_delta(b, mu_round).ok() } else { None };
    let slope_ok = match c_b {
        Some(c) => {
            let m = mu_round as f64;
            let ok = 2.0 * c > -(2.0 * m - 1.0) / (2.0 * m + 1.0);
            let inv = 1.0 / (2.0 * m);
            let alternate = c > -0.5 * (1.0 - inv) / (1.0 + inv);
            debug_assert_eq!(ok, alternate, "slope condition forms disagree at c_B = {c}, m = {m}");
            ok
        }
        None => false,
    };
    BoundDerived { mu_round, offset, b, b_near_integer, c_b, range_ok, slope_ok }
}

/// `ln Σ_{r=1}^{k} C(k,r) C(Δ−1,r−1) 2^r`.
pub fn inner_combinatorial_sum(k: u64, delta: u64) -> f64 {
    assert!(delta >= 1, "inner sum needs delta >= 1");
    let terms: Vec<f64> = (1..=k.min(delta))
        .map(|r| {
            log_binomial_or_zero(k as i64, r as i64)
                + log_binomial_or_zero(delta as i64 - 1, r as i64 - 1)
                + r as f64 * LN_2
        })
        .collect();
    log_sum_exp(&terms).expect("at least the r = 1 term")
}

/// Integer value of the inner sum; `None` on `u128` overflow.
pub fn inner_combinatorial_sum_exact(k: u64, delta: u64) -> Option<u128> {
    assert!(delta >= 1, "inner sum needs delta >= 1");
    let mut total: u128 = 0;
    for r in 1..=k.min(delta) {
        let term = binomial_u128(k, r)?
            .checked_mul(binomial_u128(delta - 1, r - 1)?)?
            .checked_mul(1u128.checked_shl(r as u32)?)?;
        total = total.checked_add(term)?;
    }
    Some(total)
}

pub(crate) fn binomial_u128(n: u64, r: u64) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc · (n − i) is divisible by (i + 1) after the multiplication
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Shell split: `Δ = P + N` with positive part `P` and negative part `N`,
/// `P − N = s`. `None` when no deviation vector has this `(Δ, s)`.
fn shell_parts(delta: u64, offset: i64) -> Option<(u64, u64)> {
    let d = delta as i64;
    if offset.abs() > d || (d + offset) % 2 != 0 {
        return None;
    }
    Some((((d + offset) / 2) as u64, ((d - offset) / 2) as u64))
}

/// Number of `d ∈ ℤ^k` with `Σ|d_j| = Δ` and `Σd_j = s`, ignoring the
/// lower limit `d_j ≥ −[μ]` (so an upper bound on the shell size). Sum over
/// `i` positive and `j` negative coordinates of
/// `C(k,i) C(k−i,j) C(P−1,i−1) C(N−1,j−1)`.
pub fn shell_count_log(k: u64, delta: u64, offset: i64) -> f64 {
    let Some((p, q)) = shell_parts(delta, offset) else {
        return f64::NEG_INFINITY;
    };
    let mut terms = Vec::new();
    for i in 0..=k {
        if (p == 0) != (i == 0) {
            continue;
        }
        for j in 0..=(k - i) {
            if (q == 0) != (j == 0) {
                continue;
            }
            let mut t = log_binomial_or_zero(k as i64, i as i64) + log_binomial_or_zero((k - i) as i64, j as i64);
            if i > 0 {
                t += log_binomial_or_zero(p as i64 - 1, i as i64 - 1);
            }
            if j > 0 {
                t += log_binomial_or_zero(q as i64 - 1, j as i64 - 1);
            }
            if t > f64::NEG_INFINITY {
                terms.push(t);
            }
        }
    }
    if terms.is_empty() {
        f64::NEG_INFINITY
    } else {
        log_sum_exp(&terms).expect("nonempty")
    }
}

/// Integer version of [`shell_count_log`]; `None` on overflow.
pub fn shell_count_exact(k: u64, delta: u64, offset: i64) -> Option<u128> {
    let Some((p, q)) = shell_parts(delta, offset) else {
        return Some(0);
    };
    let mut total: u128 = 0;
    for i in 0..=k {
        if (p == 0) != (i == 0) {
            continue;
        }
        for j in 0..=(k - i) {
            if (q == 0) != (j == 0) {
                continue;
            }
            let mut t = binomial_u128(k, i)?.checked_mul(binomial_u128(k - i, j)?)?;
            if i > 0 {
                t = t.checked_mul(binomial_u128(p - 1, i - 1)?)?;
            }
            if j > 0 {
                t = t.checked_mul(binomial_u128(q - 1, j - 1)?)?;
            }
            total = total.checked_add(t)?;
        }
    }
    Some(total)
}

/// Log of the prefactor `√(2πn) μⁿ/((2πm)^{k/2} mⁿ) e^{1/(12n) − s(1+1/(2m))}`.
fn log_prefactor(n: u64, k: u64, mu_round: u64, offset: i64) -> f64 {
    let (nf, kf, m) = (n as f64, k as f64, mu_round as f64);
    let s = offset as f64;
    // n ln(μ/m) with μ/m − 1 = s/(k m) carried exactly in the numerator
    let ratio_log = nf * (s / (k * mu_round) as f64).ln_1p();
    0.5 * (2.0 * PI * nf).ln() + ratio_log - 0.5 * kf * (2.0 * PI * m).ln() + 1.0 / (12.0 * nf)
        - s * (1.0 + 1.0 / (2.0 * m))
}

/// `ln(n!/((μ!)^k kⁿ))` for `μ = n/k ∈ ℤ`.
pub fn central_term_log(n: u64, k: u64) -> f64 {
    debug_assert_eq!(n % k, 0);
    log_factorial(n) - k as f64 * log_factorial(n / k) - n as f64 * (k as f64).ln()
}

fn delta_term(k: u64, delta: u64, d: &BoundDerived, variant: BoundVariant) -> f64 {
    let count = match variant.shell {
        ShellCount::Combinatorial => inner_combinatorial_sum(k, delta),
        ShellCount::Exact => shell_count_log(k, delta, d.offset),
    };
    if count == f64::NEG_INFINITY {
        return count;
    }
    let m = d.mu_round as f64;
    let x = delta as f64;
    let c = c_delta(delta, d.mu_round).expect("delta < [mu] under the range condition");
    let mut exponent = (0.5 - c) / (m * m) * x * x * x;
    if variant.linear == LinearTerm::Kept {
        exponent -= ((0.5 + c) / m - (0.5 - c) / (2.0 * m * m)) * x;
    }
    exponent + count
}

/// Evaluates the bound for `input`, failing if either validity condition
/// does not hold.
pub fn left_tail_bound(input: &BoundInput, variant: BoundVariant, exec: Execution) -> Result<BoundResult, BoundError> {
    let input = BoundInput::new(input.n, input.k, input.theta)?;
    let d = derive(&input);
    if !d.range_ok {
        return Err(BoundError::RangeCondition { b: d.b, mu_round: d.mu_round });
    }
    if !d.slope_ok {
        return Err(BoundError::SlopeCondition {
            two_c_b: 2.0 * d.c_b.unwrap_or(f64::NAN),
            threshold: d.slope_threshold(),
        });
    }
    let chunks = chunk_ranges(d.b as usize, DELTA_CHUNK);
    let partials: Vec<f64> = map_slice(exec, &chunks, |range| {
        let terms: Vec<f64> = range
            .clone()
            .map(|i| delta_term(input.k, i as u64 + 1, &d, variant))
            .filter(|t| *t > f64::NEG_INFINITY)
            .collect();
        if terms.is_empty() {
            f64::NEG_INFINITY
        } else {
            log_sum_exp(&terms).expect("finite terms")
        }
    });
    let shell_sum = log_sum_exp(&partials).expect("B >= 1 chunk");
    let mut log_bound = log_prefactor(input.n, input.k, d.mu_round, d.offset) + shell_sum;
    let central_term_included = d.offset == 0;
    if central_term_included {
        log_bound = log_sum_exp(&[log_bound, central_term_log(input.n, input.k)]).expect("no NaN");
    }
    Ok(BoundResult { log_bound, bound: log_bound.exp(), central_term_included, derived: d, variant })
}
