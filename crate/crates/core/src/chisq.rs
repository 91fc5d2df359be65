//! Regularized lower incomplete gamma `P(a, x)` and the Wilks percentile
//! `P(χ²_{k−1} ≤ 2nτ) = P((k−1)/2, nτ)`.
//!
//! `P` uses the power series for `x < a + 1` and the Lentz continued
//! fraction for `Q = 1 − P` otherwise. Both loops have hard iteration caps;
//! running into one is an error, never a silently truncated value.

use std::f64::consts::PI;

use thiserror::Error;

pub const SERIES_MAX_TERMS: usize = 10_000;
pub const FRACTION_MAX_ITERATIONS: usize = 1_000;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChiSquareError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("incomplete gamma P({a}, {x}) did not converge within {iterations} iterations")]
    NonConvergence { a: f64, x: f64, iterations: usize },
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(a)` for `a > 0` (Lanczos, g = 7).
pub fn ln_gamma(a: f64) -> f64 {
    debug_assert!(a > 0.0);
    if a < 0.5 {
        return (PI / (PI * a).sin()).ln() - ln_gamma(1.0 - a);
    }
    let x = a - 1.0;
    let mut s = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// `P(a, x) = γ(a, x)/Γ(a)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64, ChiSquareError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(ChiSquareError::Domain(format!("shape a = {a} must be positive and finite")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(ChiSquareError::Domain(format!("argument x = {x} must be nonnegative")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..SERIES_MAX_TERMS {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * CONVERGENCE_TOLERANCE {
                return Ok((sum * log_prefactor.exp()).min(1.0));
            }
        }
        Err(ChiSquareError::NonConvergence { a, x, iterations: SERIES_MAX_TERMS })
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=FRACTION_MAX_ITERATIONS {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() <= CONVERGENCE_TOLERANCE {
                let upper = h * log_prefactor.exp();
                return Ok((1.0 - upper).max(0.0));
            }
        }
        Err(ChiSquareError::NonConvergence { a, x, iterations: FRACTION_MAX_ITERATIONS })
    }
}

/// A χ² CDF evaluation: `dof` degrees of freedom at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareQuery {
    pub dof: u64,
    pub x: f64,
}

impl ChiSquareQuery {
    pub fn new(dof: u64, x: f64) -> Result<Self, ChiSquareError> {
        if dof == 0 {
            return Err(ChiSquareError::Domain("chi-square needs at least one degree of freedom".into()));
        }
        if x.is_nan() || x < 0.0 {
            return Err(ChiSquareError::Domain(format!("chi-square argument {x} must be nonnegative")));
        }
        Ok(ChiSquareQuery { dof, x })
    }

    /// `P(χ²_dof ≤ x)`.
    pub fn cdf(&self) -> Result<f64, ChiSquareError> {
        regularized_lower_gamma(self.dof as f64 / 2.0, self.x / 2.0)
    }
}

/// Asymptotic percentile `P(T < τ) ≈ P(χ²_{k−1} ≤ 2nτ)` for the KL divergence
/// of an `n`-trial uniform multinomial on `k` outcomes.
pub fn wilks_percentile(n: u64, k: u64, tau: f64) -> Result<f64, ChiSquareError> {
    if n == 0 {
        return Err(ChiSquareError::Domain("need at least one trial".into()));
    }
    if k < 2 {
        return Err(ChiSquareError::Domain(format!("need k >= 2 outcomes, got {k}")));
    }
    if tau.is_nan() || tau < 0.0 {
        return Err(ChiSquareError::Domain(format!("tau = {tau} must be nonnegative")));
    }
    regularized_lower_gamma((k - 1) as f64 / 2.0, n as f64 * tau)
}
