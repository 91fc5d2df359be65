//! Log-domain numerical kernels shared by every statistic.
//!
//! `ln(n!)` comes from a compensated cumulative table up to a cutoff
//! (default 2²⁰) and from the Stirling series above it.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul};
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// A nonnegative quantity stored as its natural logarithm.
/// `-inf` encodes zero; NaN is never stored.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogValue(f64);

impl LogValue {
    pub const ZERO: LogValue = LogValue(f64::NEG_INFINITY);
    pub const ONE: LogValue = LogValue(0.0);

    pub fn from_ln(ln: f64) -> Self {
        assert!(!ln.is_nan(), "LogValue from NaN");
        LogValue(ln)
    }

    pub fn from_value(v: f64) -> Self {
        assert!(v >= 0.0, "LogValue requires a nonnegative value, got {v}");
        LogValue(v.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    /// May exceed 1: a bound is not clamped to a probability.
    pub fn value(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn sum<I: IntoIterator<Item = LogValue>>(iter: I) -> LogValue {
        let logs: Vec<f64> = iter.into_iter().map(|v| v.0).collect();
        if logs.is_empty() {
            return LogValue::ZERO;
        }
        LogValue(log_sum_exp(&logs).expect("nonempty and NaN-free"))
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        if self.is_zero() || rhs.is_zero() {
            return LogValue::ZERO;
        }
        LogValue(self.0 + rhs.0)
    }
}

impl Div for LogValue {
    type Output = LogValue;
    fn div(self, rhs: LogValue) -> LogValue {
        assert!(!rhs.is_zero(), "LogValue division by zero");
        if self.is_zero() {
            return LogValue::ZERO;
        }
        LogValue(self.0 - rhs.0)
    }
}

impl Add for LogValue {
    type Output = LogValue;
    fn add(self, rhs: LogValue) -> LogValue {
        LogValue::sum([self, rhs])
    }
}

/// Cumulative `ln(i!)` table with a Stirling-series tail.
#[derive(Debug, Clone)]
pub struct LogFactorialTable {
    table: Vec<f64>,
}

impl LogFactorialTable {
    pub const DEFAULT_CUTOFF: usize = 1 << 20;
    /// Below this the truncated Stirling series is not accurate to 1e-13.
    const MIN_CUTOFF: usize = 32;

    pub fn with_cutoff(cutoff: usize) -> Self {
        let cutoff = cutoff.max(Self::MIN_CUTOFF);
        let mut table = Vec::with_capacity(cutoff + 1);
        table.push(0.0);
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for i in 1..=cutoff {
            let y = (i as f64).ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            table.push(sum);
        }
        LogFactorialTable { table }
    }

    pub fn cutoff(&self) -> usize {
        self.table.len() - 1
    }

    pub fn ln_factorial(&self, n: u64) -> f64 {
        if n < self.table.len() as u64 {
            self.table[n as usize]
        } else {
            stirling_series(n)
        }
    }
}

/// `ln(n!)` from the Stirling series through the `n⁻⁷` term; the remainder
/// is below `1/(1188 n⁹)`.
fn stirling_series(n: u64) -> f64 {
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let corr = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    (x + 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + corr
}

fn default_table() -> &'static LogFactorialTable {
    static TABLE: OnceLock<LogFactorialTable> = OnceLock::new();
    TABLE.get_or_init(|| LogFactorialTable::with_cutoff(LogFactorialTable::DEFAULT_CUTOFF))
}

/// `ln(n!)`.
pub fn log_factorial(n: u64) -> f64 {
    default_table().ln_factorial(n)
}

/// `ln C(n, r)`. Evaluated as `ln n! − (ln r! + ln (n−r)!)`, so swapping
/// `r` and `n − r` gives a bit-identical result.
pub fn log_binomial(n: u64, r: u64) -> Result<f64, NumericsError> {
    if r > n {
        return Err(NumericsError::Domain(format!("binomial C({n}, {r}) with r > n")));
    }
    let (lo, hi) = if r <= n - r { (r, n - r) } else { (n - r, r) };
    Ok(log_factorial(n) - (log_factorial(lo) + log_factorial(hi)))
}

/// `ln C(n, r)` with `C(n, r) = 0` outside `0 ≤ r ≤ n` (returns `-inf`).
pub fn log_binomial_or_zero(n: i64, r: i64) -> f64 {
    if n < 0 || r < 0 || r > n {
        f64::NEG_INFINITY
    } else {
        log_binomial(n as u64, r as u64).expect("checked range")
    }
}

/// `ln Σ exp(vᵢ)` with the max shifted out; the shifted terms are summed in
/// ascending order so the result does not depend on input order.
pub fn log_sum_exp(values: &[f64]) -> Result<f64, NumericsError> {
    if values.is_empty() {
        return Err(NumericsError::Domain("log_sum_exp of an empty sequence".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(NumericsError::Domain("log_sum_exp input contains NaN".into()));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return Ok(max);
    }
    let mut shifted: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    shifted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let total: f64 = shifted.iter().sum();
    Ok(max + total.ln())
}

/// Logarithms of the two sides of the effective Stirling inequality
/// `√(2πn)(n/e)ⁿ e^{1/(12n) − 1/(360n³)} < n! < √(2πn)(n/e)ⁿ e^{1/(12n)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StirlingBracket {
    pub lower: f64,
    pub upper: f64,
}

impl StirlingBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower < v && v < self.upper
    }
}

/// Both endpoints are pushed outward by a bound on the f64 rounding error of
/// their evaluation, so the enclosure holds for the exact `ln(n!)` even where
/// the lower side is within an ulp of it (n near 170).
pub fn stirling_bracket(n: u64) -> Result<StirlingBracket, NumericsError> {
    if n < 2 {
        return Err(NumericsError::Domain(format!("Stirling bracket needs n >= 2, got {n}")));
    }
    let x = n as f64;
    let half_log = 0.5 * (2.0 * PI * x).ln();
    let main = x * x.ln();
    let first = 1.0 / (12.0 * x);
    let upper = half_log + main - x + first;
    let lower = upper - 1.0 / (360.0 * x * x * x);
    let margin = 16.0 * f64::EPSILON * (half_log.abs() + main.abs() + x + first);
    Ok(StirlingBracket { lower: lower - margin, upper: upper + margin })
}

/// Rounding margin applied to each side by [`stirling_bracket`].
pub fn stirling_bracket_margin(n: u64) -> f64 {
    let x = n as f64;
    16.0 * f64::EPSILON * ((0.5 * (2.0 * PI * x).ln()).abs() + (x * x.ln()).abs() + x + 1.0 / (12.0 * x))
}
