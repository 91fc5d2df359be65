//! Number rendering for tables and brackets.
//!
//! Table percents follow the published layout: values of at least 1 % are
//! printed plainly with `precision − 1` decimals (`13.99%`), smaller ones
//! as a `precision`-digit mantissa times a power of ten (`9.28·10^-1%`).
//! CSV output uses the same digits with `e` notation and no `%` sign.
//!
//! Bracket endpoints are rounded in a chosen direction on the exact decimal
//! expansion of the `f64`, never on an already-rounded string.

use crate::walk::PercentileBracket;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Notation {
    #[default]
    Text,
    Csv,
}

/// `v` in scientific notation with `precision` significant digits.
pub fn scientific(v: f64, precision: usize, notation: Notation) -> String {
    let s = format!("{:.*e}", precision.saturating_sub(1), v);
    match notation {
        Notation::Text => s.replacen('e', "·10^", 1),
        Notation::Csv => s,
    }
}

/// A probability rendered as a percent.
pub fn percent(p: f64, precision: usize, notation: Notation) -> String {
    let v = 100.0 * p;
    let body = if v >= 1.0 || v == 0.0 {
        format!("{:.*}", precision.saturating_sub(1), v)
    } else {
        scientific(v, precision, notation)
    };
    match notation {
        Notation::Text => format!("{body}%"),
        Notation::Csv => body,
    }
}

/// A nonnegative decimal `mantissa · 10^(−scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decimal {
    pub mantissa: u128,
    pub scale: u32,
}

impl std::fmt::Display for Decimal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let digits = self.mantissa.to_string();
        let scale = self.scale as usize;
        if scale == 0 {
            return f.write_str(&digits);
        }
        let padded = format!("{digits:0>width$}", width = scale + 1);
        let (int, frac) = padded.split_at(padded.len() - scale);
        write!(f, "{int}.{frac}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Down,
    Up,
}

/// Exact decimal digits of a positive finite `x`: `0.d₀d₁d₂… · 10^(exp+1)`,
/// i.e. `d₀` sits at `10^exp`.
fn exact_digits(x: f64) -> (Vec<u8>, i32) {
    debug_assert!(x.is_finite() && x > 0.0);
    // 800 digits exceed the longest exact expansion of any f64
    let s = format!("{x:.800e}");
    let (mantissa, exp) = s.split_once('e').expect("scientific format");
    let digits: Vec<u8> = mantissa.bytes().filter(u8::is_ascii_digit).map(|b| b - b'0').collect();
    (digits, exp.parse().expect("integer exponent"))
}

/// Decimal exponent of the leading digit of `x > 0`.
pub fn leading_exponent(x: f64) -> i32 {
    exact_digits(x).1
}

/// `x · 10^shift` rounded to `decimals` places in direction `rounding`.
pub fn round_decimal(x: f64, shift: i32, decimals: u32, rounding: Rounding) -> Decimal {
    if x == 0.0 {
        return Decimal { mantissa: 0, scale: decimals };
    }
    let (digits, exp) = exact_digits(x);
    let kept = (exp + shift + decimals as i32 + 1).max(0) as usize;
    let kept = kept.min(digits.len());
    let mut mantissa: u128 = 0;
    for &d in &digits[..kept] {
        mantissa = mantissa * 10 + d as u128;
    }
    // the expansion may end before the last kept place
    let pad = (exp + shift + decimals as i32 + 1).max(0) as usize - kept;
    for _ in 0..pad {
        mantissa *= 10;
    }
    let inexact = digits[kept..].iter().any(|&d| d != 0);
    if inexact && rounding == Rounding::Up {
        mantissa += 1;
    }
    Decimal { mantissa, scale: decimals }
}

/// 1-based position of the first significant digit at which `lo < hi`
/// differ, counted from the leading digit of `hi`.
pub fn first_differing_digit(lo: f64, hi: f64) -> usize {
    if lo <= 0.0 {
        return 1;
    }
    let (a, ea) = exact_digits(lo);
    let (b, eb) = exact_digits(hi);
    if ea != eb {
        return 1;
    }
    a.iter().zip(&b).position(|(x, y)| x != y).map_or(17, |i| i + 1)
}

/// The percentile `P = 1 − tail` printed as `(lower %, upper %)` strings,
/// obtained by rounding the tail outward to `significant` digits (default:
/// the first digit at which the tail endpoints differ) and subtracting from
/// 100 exactly.
pub fn complement_percent_bracket(tail: &PercentileBracket, significant: Option<usize>) -> (String, String) {
    let sig = significant.unwrap_or_else(|| first_differing_digit(tail.lower, tail.upper)).max(1);
    let lead = if tail.upper > 0.0 { leading_exponent(tail.upper) + 2 } else { 0 };
    let decimals = (sig as i32 - 1 - lead).max(0) as u32;
    let tail_lo = round_decimal(tail.lower, 2, decimals, Rounding::Down);
    let tail_hi = round_decimal(tail.upper, 2, decimals, Rounding::Up);
    let hundred = 100 * 10u128.pow(decimals);
    let lower = Decimal { mantissa: hundred - tail_hi.mantissa.min(hundred), scale: decimals };
    let upper = Decimal { mantissa: hundred - tail_lo.mantissa.min(hundred), scale: decimals };
    (lower.to_string(), upper.to_string())
}

/// The tail itself in percent, rounded outward like
/// [`complement_percent_bracket`].
pub fn tail_percent_bracket(tail: &PercentileBracket, significant: Option<usize>) -> (String, String) {
    let sig = significant.unwrap_or_else(|| first_differing_digit(tail.lower, tail.upper)).max(1);
    let lead = if tail.upper > 0.0 { leading_exponent(tail.upper) + 2 } else { 0 };
    let decimals = (sig as i32 - 1 - lead).max(0) as u32;
    (
        round_decimal(tail.lower, 2, decimals, Rounding::Down).to_string(),
        round_decimal(tail.upper, 2, decimals, Rounding::Up).to_string(),
    )
}
