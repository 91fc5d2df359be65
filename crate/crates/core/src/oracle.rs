//! Exhaustive type-class computations for small `(n, k)`.
//!
//! A type class is a count vector `(T_1, …, T_k)` with `Σ T_j = n`; under
//! the uniform multinomial it has probability `n!/(∏ T_j!) · k^{−n}`.
//! Enumerating all of them gives the exact law of `D_KL(T/n ‖ Unif)`, which
//! is what [`verify_theorem_dominance`] compares the bound against.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bound::{self, left_tail_bound, nearest_int_ratio, BoundError, BoundInput, BoundVariant};
use crate::entropy::{pinsker_gap, FiniteDistribution};
use crate::exec::{chunk_ranges, map_slice, Execution};
use crate::numerics::log_factorial;

/// Default cap on `C(n+k−1, k−1)`.
pub const DEFAULT_GUARD: u128 = 100_000_000;
/// Classes with `D_KL` within this of `θ` count as inside the tail.
pub const BOUNDARY_TOLERANCE: f64 = 1e-13;
/// Relative slack allowed before `exact > bound` counts as a violation.
pub const DOMINANCE_SLACK: f64 = 1e-12;
/// Draws per independently seeded Monte Carlo stream.
pub const MONTE_CARLO_CHUNK: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("enumerating n = {n}, k = {k} needs {count} type classes, above the guard of {guard}")]
    TooLarge { n: u64, k: u64, count: u128, guard: u128 },
    #[error("domain error: {0}")]
    Domain(String),
}

/// A count vector with its L¹ distance `Δ = Σ|T_j − [n/k]|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeClass {
    pub counts: Vec<u64>,
    pub n: u64,
    pub delta: u64,
}

impl TypeClass {
    pub fn new(counts: Vec<u64>) -> Self {
        let n = counts.iter().sum();
        let m = if counts.is_empty() { 0 } else { nearest_int_ratio(n, counts.len() as u64) };
        let delta = counts.iter().map(|&c| c.abs_diff(m)).sum();
        TypeClass { counts, n, delta }
    }

    pub fn k(&self) -> u64 {
        self.counts.len() as u64
    }

    /// `D_KL(T/n ‖ Unif(k))` in nats.
    pub fn kl_to_uniform(&self) -> f64 {
        let (n, k) = (self.n as f64, self.k() as f64);
        self.counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * (p * k).ln()
            })
            .sum()
    }

    /// Deviations `d_j = T_j − [μ]`.
    pub fn deviations(&self) -> Vec<i64> {
        let m = nearest_int_ratio(self.n, self.k()) as i64;
        self.counts.iter().map(|&c| c as i64 - m).collect()
    }
}

/// Limits applied before an enumeration starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub guard: u128,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { guard: DEFAULT_GUARD }
    }
}

/// `C(n+k−1, k−1)`, the number of type classes.
pub fn type_class_count(n: u64, k: u64) -> Option<u128> {
    bound::binomial_u128(n + k - 1, k - 1)
}

fn check_guard(n: u64, k: u64, config: &OracleConfig) -> Result<u128, OracleError> {
    if k < 2 {
        return Err(OracleError::Domain(format!("need k >= 2 outcomes, got {k}")));
    }
    match type_class_count(n, k) {
        Some(count) if count <= config.guard => Ok(count),
        count => Err(OracleError::TooLarge { n, k, count: count.unwrap_or(u128::MAX), guard: config.guard }),
    }
}

/// Lexicographic stream of all compositions of `n` into `k` parts.
#[derive(Debug, Clone)]
pub struct TypeClasses {
    current: Option<Vec<u64>>,
}

impl Iterator for TypeClasses {
    type Item = TypeClass;

    fn next(&mut self) -> Option<TypeClass> {
        let counts = self.current.take()?;
        let k = counts.len();
        let mut next = counts.clone();
        if next[k - 1] > 0 {
            next[k - 1] -= 1;
            next[k - 2] += 1;
            self.current = Some(next);
        } else if let Some(j) = (1..k - 1).rev().find(|&j| next[j] > 0) {
            next[j - 1] += 1;
            next[k - 1] = next[j] - 1;
            next[j] = 0;
            self.current = Some(next);
        }
        Some(TypeClass::new(counts))
    }
}

pub fn enumerate_type_classes(n: u64, k: u64, config: &OracleConfig) -> Result<TypeClasses, OracleError> {
    check_guard(n, k, config)?;
    let mut start = vec![0; k as usize];
    start[k as usize - 1] = n;
    Ok(TypeClasses { current: Some(start) })
}

/// `ln(n!/(∏ T_j!) · k^{−n})`.
pub fn type_class_log_prob(t: &TypeClass) -> f64 {
    let denom: f64 = t.counts.iter().map(|&c| log_factorial(c)).sum();
    log_factorial(t.n) - denom - t.n as f64 * (t.k() as f64).ln()
}

/// Compensated (Neumaier) sum.
fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `Σ_T P(T)` over all classes; 1 up to rounding.
pub fn total_probability(n: u64, k: u64, config: &OracleConfig) -> Result<f64, OracleError> {
    Ok(compensated_sum(enumerate_type_classes(n, k, config)?.map(|t| type_class_log_prob(&t).exp())))
}

/// `P(D_KL(M_n ‖ Unif) ≤ θ)` by enumeration.
pub fn exact_kl_left_tail(n: u64, k: u64, theta: f64, config: &OracleConfig) -> Result<f64, OracleError> {
    if n == 0 {
        return Err(OracleError::Domain("need n >= 1 trials".into()));
    }
    let classes = enumerate_type_classes(n, k, config)?;
    Ok(compensated_sum(
        classes.filter(|t| t.kl_to_uniform() <= theta + BOUNDARY_TOLERANCE).map(|t| type_class_log_prob(&t).exp()),
    ))
}

/// The exact law of `D_KL(M_n ‖ Unif)`: distinct values (merged within
/// [`BOUNDARY_TOLERANCE`]) in increasing order with their probabilities.
pub fn exact_kl_law(n: u64, k: u64, config: &OracleConfig) -> Result<Vec<(f64, f64)>, OracleError> {
    if n == 0 {
        return Err(OracleError::Domain("need n >= 1 trials".into()));
    }
    let mut points: Vec<(f64, f64)> =
        enumerate_type_classes(n, k, config)?.map(|t| (t.kl_to_uniform(), type_class_log_prob(&t).exp())).collect();
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite divergence"));
    let mut law: Vec<(f64, f64)> = Vec::new();
    for (d, p) in points {
        match law.last_mut() {
            Some(last) if d - last.0 <= BOUNDARY_TOLERANCE => last.1 += p,
            _ => law.push((d, p)),
        }
    }
    Ok(law)
}

/// Smallest `D` with `P(D_KL ≤ D) ≥ p`.
pub fn exact_kl_quantile(n: u64, k: u64, p: f64, config: &OracleConfig) -> Result<f64, OracleError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(OracleError::Domain(format!("quantile level {p} outside [0, 1]")));
    }
    let law = exact_kl_law(n, k, config)?;
    let mut cumulative = 0.0;
    for &(d, mass) in &law {
        cumulative += mass;
        if cumulative >= p {
            return Ok(d);
        }
    }
    Ok(law.last().expect("at least one class").0)
}

/// `#𝒯_Δ`: classes whose L¹ distance from `([μ], …, [μ])` is `Δ`.
pub fn count_t_delta(n: u64, k: u64, delta: u64, config: &OracleConfig) -> Result<u128, OracleError> {
    Ok(enumerate_type_classes(n, k, config)?.filter(|t| t.delta == delta).count() as u128)
}

/// `Δ ↦ #𝒯_Δ` over every occurring `Δ`.
pub fn shell_histogram(n: u64, k: u64, config: &OracleConfig) -> Result<BTreeMap<u64, u128>, OracleError> {
    let mut hist = BTreeMap::new();
    for t in enumerate_type_classes(n, k, config)? {
        *hist.entry(t.delta).or_insert(0) += 1;
    }
    Ok(hist)
}

/// `Σ_{r=1}^{k} C(k,r) C(Δ−1,r−1) 2^r`.
pub fn lemma_bound(k: u64, delta: u64) -> Result<u128, OracleError> {
    if delta == 0 {
        return Err(OracleError::Domain("lemma bound needs delta >= 1".into()));
    }
    bound::inner_combinatorial_sum_exact(k, delta)
        .ok_or_else(|| OracleError::Domain(format!("lemma bound for k = {k}, delta = {delta} overflows u128")))
}

/// Outcome of checking an inequality class by class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InequalityReport {
    pub checked: u64,
    pub violations: Vec<String>,
}

impl InequalityReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `#𝒯_Δ ≤ lemma_bound(k, Δ)` for every `Δ ≥ 1` that occurs.
pub fn verify_lemma(n: u64, k: u64, config: &OracleConfig) -> Result<InequalityReport, OracleError> {
    let mut report = InequalityReport::default();
    for (&delta, &count) in shell_histogram(n, k, config)?.range(1..) {
        let bound = lemma_bound(k, delta)?;
        report.checked += 1;
        if count > bound {
            report.violations.push(format!("n={n} k={k} delta={delta}: #T={count} > {bound}"));
        }
    }
    Ok(report)
}

/// Pinsker's inequality for the empirical distribution of every class.
pub fn verify_pinsker(n: u64, k: u64, config: &OracleConfig) -> Result<InequalityReport, OracleError> {
    let uniform = FiniteDistribution::uniform(k as usize).expect("k >= 2");
    let mut report = InequalityReport::default();
    for t in enumerate_type_classes(n, k, config)? {
        let p = FiniteDistribution::from_counts(&t.counts)
            .map_err(|e| OracleError::Domain(format!("class {:?}: {e}", t.counts)))?;
        let (half_l1_sq, kl) = pinsker_gap(&p, &uniform).expect("same support");
        report.checked += 1;
        if half_l1_sq > kl + BOUNDARY_TOLERANCE {
            report.violations.push(format!("{:?}: half_l1^2 = {half_l1_sq} > kl = {kl}", t.counts));
        }
    }
    Ok(report)
}

/// One grid point of a dominance run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominancePoint {
    pub input: BoundInput,
    pub exact: f64,
    pub bound: f64,
    pub log_bound: f64,
}

impl DominancePoint {
    pub fn holds(&self) -> bool {
        self.exact <= 0.0 || self.exact.ln() <= self.log_bound + DOMINANCE_SLACK
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DominanceReport {
    pub checked: Vec<DominancePoint>,
    /// Points failing a precondition, with the reason.
    pub excluded: Vec<(BoundInput, String)>,
    pub violations: Vec<DominancePoint>,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Twenty log-spaced thresholds in `[10⁻⁴, 10⁻¹]`.
pub fn default_thetas() -> Vec<f64> {
    (0..20).map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / 19.0)).collect()
}

/// `n ∈ 6..=40`, `k ∈ {2, 3, 4}`, [`default_thetas`].
pub fn default_grid() -> Vec<BoundInput> {
    grid(6..=40, 2..=4, &default_thetas())
}

pub fn grid(ns: std::ops::RangeInclusive<u64>, ks: std::ops::RangeInclusive<u64>, thetas: &[f64]) -> Vec<BoundInput> {
    let mut points = Vec::new();
    for n in ns {
        for k in ks.clone() {
            for &theta in thetas {
                points.push(BoundInput { n, k, theta });
            }
        }
    }
    points
}

enum PointOutcome {
    Checked(DominancePoint),
    Excluded(String),
}

/// Compares the bound with the exact tail at every grid point whose
/// preconditions hold.
pub fn verify_theorem_dominance(
    grid: &[BoundInput],
    variant: BoundVariant,
    config: &OracleConfig,
    exec: Execution,
) -> Result<DominanceReport, OracleError> {
    let outcomes = map_slice(exec, grid, |input| -> Result<PointOutcome, OracleError> {
        let result = match left_tail_bound(input, variant, Execution::Sequential) {
            Ok(r) => r,
            Err(
                e @ (BoundError::RangeCondition { .. } | BoundError::SlopeCondition { .. } | BoundError::Domain(_)),
            ) => return Ok(PointOutcome::Excluded(e.to_string())),
        };
        let exact = exact_kl_left_tail(input.n, input.k, input.theta, config)?;
        Ok(PointOutcome::Checked(DominancePoint {
            input: *input,
            exact,
            bound: result.bound,
            log_bound: result.log_bound,
        }))
    });
    let mut report = DominanceReport::default();
    for (input, outcome) in grid.iter().zip(outcomes) {
        match outcome? {
            PointOutcome::Checked(point) => {
                if !point.holds() {
                    report.violations.push(point);
                }
                report.checked.push(point);
            }
            PointOutcome::Excluded(reason) => report.excluded.push((*input, reason)),
        }
    }
    Ok(report)
}

/// A Monte Carlo estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Estimates `P(D_KL(M_n ‖ Unif) ≤ θ)` from `samples` multinomial draws.
/// Chunk `i` uses `ChaCha8Rng` seeded with `seed` on stream `i`, so the
/// result does not depend on `exec`.
pub fn monte_carlo_left_tail(
    n: u64,
    k: u64,
    theta: f64,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<MonteCarloEstimate, OracleError> {
    if n == 0 || k < 2 || samples == 0 {
        return Err(OracleError::Domain(format!("need n >= 1, k >= 2, samples >= 1; got {n}, {k}, {samples}")));
    }
    let chunks = chunk_ranges(samples as usize, MONTE_CARLO_CHUNK);
    let hits: Vec<u64> = map_slice(exec, &chunks, |range| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((range.start / MONTE_CARLO_CHUNK) as u64);
        let mut counts = vec![0u64; k as usize];
        let mut hits = 0;
        for _ in range.clone() {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..n {
                counts[rng.random_range(0..k as usize)] += 1;
            }
            let t = TypeClass { counts: counts.clone(), n, delta: 0 };
            if t.kl_to_uniform() <= theta + BOUNDARY_TOLERANCE {
                hits += 1;
            }
        }
        hits
    });
    let total: u64 = hits.iter().sum();
    let p = total as f64 / samples as f64;
    Ok(MonteCarloEstimate { estimate: p, std_error: (p * (1.0 - p) / samples as f64).sqrt(), samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> OracleConfig {
        OracleConfig::default()
    }

    #[test]
    fn enumeration_order_and_counts() {
        let v: Vec<Vec<u64>> = enumerate_type_classes(2, 2, &cfg()).unwrap().map(|t| t.counts).collect();
        assert_eq!(v, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert_eq!(enumerate_type_classes(4, 3, &cfg()).unwrap().count(), 15);
        assert_eq!(enumerate_type_classes(20, 4, &cfg()).unwrap().count(), 1771);
        assert_eq!(enumerate_type_classes(0, 3, &cfg()).unwrap().count(), 1);
        let all: Vec<Vec<u64>> = enumerate_type_classes(5, 4, &cfg()).unwrap().map(|t| t.counts).collect();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn guard_is_enforced() {
        let tight = OracleConfig { guard: 10 };
        assert!(matches!(enumerate_type_classes(4, 3, &tight), Err(OracleError::TooLarge { count: 15, .. })));
    }

    #[test]
    fn class_probabilities() {
        assert_abs_diff_eq!(type_class_log_prob(&TypeClass::new(vec![1, 1])), 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(type_class_log_prob(&TypeClass::new(vec![0, 2])), 0.25f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            type_class_log_prob(&TypeClass::new(vec![2, 1, 1])),
            (12.0f64 / 81.0).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn left_tail_hand_cases() {
        assert_abs_diff_eq!(exact_kl_left_tail(2, 2, 0.1, &cfg()).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(exact_kl_left_tail(2, 2, 1.0, &cfg()).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(exact_kl_left_tail(7, 3, 0.0, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn shell_examples() {
        assert_eq!(count_t_delta(2, 2, 2, &cfg()).unwrap(), 2);
        assert_eq!(lemma_bound(2, 2).unwrap(), 8);
        assert_eq!(count_t_delta(4, 4, 0, &cfg()).unwrap(), 1);
        assert!(verify_lemma(12, 3, &cfg()).unwrap().holds());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 35 * 3 * 20);
        let t = default_thetas();
        assert_abs_diff_eq!(t[0], 1e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(t[19], 1e-1, epsilon = 1e-15);
    }

    #[test]
    fn single_point_dominance() {
        let point = [BoundInput::new(36, 3, 0.001).unwrap()];
        let report = verify_theorem_dominance(&point, BoundVariant::THEOREM, &cfg(), Execution::Sequential).unwrap();
        assert_eq!(report.checked.len(), 1);
        assert!(report.passed());
        assert!(report.checked[0].exact <= report.checked[0].bound);
    }

    #[test]
    fn invalid_point_is_excluded() {
        let point = [BoundInput::new(6, 2, 1.0).unwrap()];
        let report = verify_theorem_dominance(&point, BoundVariant::THEOREM, &cfg(), Execution::Sequential).unwrap();
        assert!(report.checked.is_empty());
        assert_eq!(report.excluded.len(), 1);
        assert!(report.excluded[0].1.contains("range condition"));
    }

    #[test]
    fn monte_carlo_is_execution_independent() {
        let a = monte_carlo_left_tail(10, 3, 0.05, 200_000, 7, Execution::Sequential).unwrap();
        let b = monte_carlo_left_tail(10, 3, 0.05, 200_000, 7, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
