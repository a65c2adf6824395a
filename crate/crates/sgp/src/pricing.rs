//! Price constructions with stated revenue guarantees.
//!
//! Each scheme returns a concrete [`PriceSchedule`] and, where a guarantee
//! is claimed, a [`GuaranteeTag`] naming the approximation factor and the
//! benchmark it is stated against. Tags only carry factors the analysis
//! actually supports; the benchmark in a tag can always be computed by the
//! [`crate::oracle`] module, which is how the test suite audits them.
//!
//! The building blocks: equalized-virtual-value prices with a target sale
//! count ([`ear_prices`], [`k_uniform_prices`]), median-of-the-maximum
//! thresholds ([`prophet_prices`]), and backward-induction price recovery
//! from target thresholds (via [`crate::equilibrium::thresholds_to_prices`]).

use crate::distributions::Dist;
use crate::equilibrium::{
    solve_seq_availability, solve_seq_status, thresholds_to_prices, CountTables,
};
use crate::error::{Error, Result};
use crate::numeric::{bisect, golden_max, pairwise_sum, product};
use crate::oracle::{self, AdaptivePolicy, BenchmarkKind};
use crate::revenue::pessimistic_and_optimistic_revenue;
use crate::scenario::{Externality, Mode, PriceSchedule, Scenario, ThresholdProfile};
use serde::Serialize;
use std::f64::consts::{E, FRAC_1_SQRT_2, SQRT_2};

/// Factor of the ex-ante price transform: 3 + 2*sqrt(2).
pub const EXANTE_FACTOR: f64 = 3.0 + 2.0 * SQRT_2;

/// Scan resolution used when a best-of scheme compares simultaneous
/// candidates by their worst equilibrium.
const BEST_OF_SCAN_GRID: usize = 512;

/// Which oracle quantity a guarantee compares against.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "benchmark", rename_all = "snake_case")]
pub enum BenchmarkRef {
    /// Optimal revenue selling a single unit.
    Myer,
    /// Optimal revenue selling at most `k` units.
    MyerK { k: usize },
    /// Best sequential threshold revenue in the full model.
    OptSeq,
    /// Best simultaneous-equilibrium threshold revenue in the full model.
    OptSimBest,
    /// Revenue of the ex-ante relaxation (sell at most one unit in
    /// expectation).
    Ear,
    /// `sum_k (w(k) - w(k-1)) * MyerK(k)` with `w(n) := 1`: the unit-capped
    /// mixture that upper-bounds any availability-model scheme.
    AvailabilityMixture,
}

impl BenchmarkRef {
    pub fn label(&self) -> String {
        match self {
            BenchmarkRef::Myer => "Myer".into(),
            BenchmarkRef::MyerK { k } => format!("MyerK({k})"),
            BenchmarkRef::OptSeq => "OptSeq".into(),
            BenchmarkRef::OptSimBest => "OptSimBest".into(),
            BenchmarkRef::Ear => "EAR".into(),
            BenchmarkRef::AvailabilityMixture => "AvailabilityMixture".into(),
        }
    }

    /// Numeric value of the benchmark on a scenario, with an error bound.
    pub fn resolve(&self, s: &Scenario) -> Result<(f64, f64)> {
        match self {
            BenchmarkRef::Myer => {
                let b = oracle::myerson_revenue(&s.agents)?;
                Ok((b.value, b.error))
            }
            BenchmarkRef::MyerK { k } => {
                let b = oracle::myerson_k_uniform(&s.agents, *k)?;
                Ok((b.value, b.error))
            }
            BenchmarkRef::OptSeq => {
                let b = oracle::benchmark(s, BenchmarkKind::OptSeq)?;
                Ok((b.value, b.error))
            }
            BenchmarkRef::OptSimBest => {
                let b = oracle::benchmark(s, BenchmarkKind::OptSimBest)?;
                Ok((b.value, b.error))
            }
            BenchmarkRef::Ear => {
                let (_, r) = ear_prices(&s.agents)?;
                Ok((r, 1e-9))
            }
            BenchmarkRef::AvailabilityMixture => {
                let Externality::Availability { w } = &s.externality else {
                    return Err(Error::domain(
                        "the unit-capped mixture benchmark needs an availability scenario",
                    ));
                };
                let n = s.n();
                let mut value = 0.0;
                let mut error = 0.0;
                for k in 1..=n {
                    let w_hi = if k < n { w[k] } else { 1.0 };
                    let dw = w_hi - w[k - 1];
                    if dw == 0.0 {
                        continue;
                    }
                    let b = oracle::myerson_k_uniform(&s.agents, k)?;
                    value += dw * b.value;
                    error += dw * b.error;
                }
                Ok((value, error))
            }
        }
    }
}

/// A scheme's claimed guarantee: its revenue is at least benchmark/factor.
#[derive(Debug, Clone, Serialize)]
pub struct GuaranteeTag {
    pub scheme: String,
    pub factor: f64,
    #[serde(flatten)]
    pub benchmark: BenchmarkRef,
}

fn tag(scheme: &str, factor: f64, benchmark: BenchmarkRef) -> GuaranteeTag {
    debug_assert!(factor > 1.0);
    GuaranteeTag {
        scheme: scheme.into(),
        factor,
        benchmark,
    }
}

fn require_regular(dists: &[Dist]) -> Result<()> {
    if dists.is_empty() {
        return Err(Error::invalid("pricing: needs at least one agent"));
    }
    if dists.iter().any(|d| !d.is_regular()) {
        return Err(Error::unsupported(
            "pricing schemes need regular distributions",
        ));
    }
    Ok(())
}

fn check_agent_weights(dists: &[Dist], w: &[f64]) -> Result<()> {
    if w.len() != dists.len() {
        return Err(Error::invalid("pricing: one weight per agent required"));
    }
    if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::invalid("pricing: weights must lie in [0, 1]"));
    }
    Ok(())
}

fn arrival_order(n: usize, mode: &Mode) -> Vec<usize> {
    match mode {
        Mode::Sequential { order: Some(o) } => o.clone(),
        _ => (0..n).collect(),
    }
}

/// Prices whose virtual values are equalized so that the expected number of
/// sales is `target` (or monopoly prices when those already sell less).
fn equalized_virtual_prices(dists: &[Dist], target: f64) -> Result<Vec<f64>> {
    require_regular(dists)?;
    let monopoly: Vec<f64> = dists.iter().map(|d| d.monopoly().0).collect();
    let demand = |prices: &[f64]| -> f64 {
        prices
            .iter()
            .zip(dists)
            .map(|(&p, d)| 1.0 - d.cdf(p))
            .sum()
    };
    if demand(&monopoly) <= target + 1e-12 {
        return Ok(monopoly);
    }
    let prices_at = |lam: f64| -> Result<Vec<f64>> {
        dists.iter().map(|d| d.inverse_virtual_value(lam)).collect()
    };
    // expected sales fall as the shared virtual value rises
    let hi = dists
        .iter()
        .map(|d| d.support().1)
        .fold(f64::NEG_INFINITY, f64::max);
    let excess = |lam: f64| -> f64 { demand(&prices_at(lam).expect("regular")) - target };
    assert!(
        excess(0.0) > 0.0 && excess(hi) <= 0.0,
        "sale count must cross the target inside the bracket"
    );
    let lam = bisect(excess, 0.0, hi);
    let prices = prices_at(lam)?;
    let residual = demand(&prices) - target;
    if residual.abs() > 1e-10 {
        return Err(Error::inconsistent(format!(
            "equalized prices missed the sale target by {residual:.2e}"
        )));
    }
    Ok(prices)
}

/// Revenue-optimal prices for the relaxed problem that only requires one
/// sale in expectation, and the relaxation's revenue.
///
/// If monopoly prices already sell at most one unit in expectation they are
/// returned unchanged; otherwise all virtual values are equalized until the
/// expected sale count is exactly one. The returned revenue upper-bounds
/// the optimal single-sale revenue.
pub fn ear_prices(dists: &[Dist]) -> Result<(Vec<f64>, f64)> {
    let p = equalized_virtual_prices(dists, 1.0)?;
    let terms: Vec<f64> = p
        .iter()
        .zip(dists)
        .map(|(&pi, d)| pi * (1.0 - d.cdf(pi)))
        .collect();
    Ok((p.clone(), pairwise_sum(&terms)))
}

/// Keep only the relaxation's large prices, discounted.
///
/// Agents whose relaxation price reaches `r / sqrt(2)` get that price
/// divided by `1 + 1/sqrt(2)`; everyone else is priced out. At any
/// equilibrium of a simultaneous sale the revenue is within a factor
/// [`EXANTE_FACTOR`] of the best simultaneous threshold revenue.
pub fn exante_transform(p_hat: &[f64], r: f64) -> Result<(Vec<f64>, GuaranteeTag)> {
    if p_hat.is_empty() || p_hat.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid(
            "ex-ante transform: needs finite nonnegative input prices",
        ));
    }
    if !r.is_finite() || r < 0.0 {
        return Err(Error::invalid(
            "ex-ante transform: revenue must be finite and nonnegative",
        ));
    }
    let cutoff = r / SQRT_2;
    let scale = 1.0 + FRAC_1_SQRT_2;
    let p: Vec<f64> = p_hat
        .iter()
        .map(|&ph| if ph >= cutoff { ph / scale } else { f64::INFINITY })
        .collect();
    // the largest price is at least the revenue, which exceeds the cutoff
    assert!(
        p.iter().any(|x| x.is_finite()),
        "at least one price must clear the cutoff"
    );
    Ok((p, tag("exante_transform", EXANTE_FACTOR, BenchmarkRef::OptSimBest)))
}

/// Threshold value `t` at which the maximum virtual value clears `t` with
/// probability exactly 1/2, and the per-agent prices realizing it.
pub fn prophet_prices(dists: &[Dist]) -> Result<(f64, Vec<f64>)> {
    require_regular(dists)?;
    let stay_prob = |t: f64| -> f64 {
        product(
            dists
                .iter()
                .map(|d| d.cdf(d.inverse_virtual_value(t).expect("regular"))),
        )
    };
    let t_hi = dists
        .iter()
        .map(|d| d.support().1)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut t_lo = t_hi - 1.0;
    let mut span = 1.0;
    // no-sale probability is 1 at t_hi and falls toward 0 going down
    for _ in 0..200 {
        if stay_prob(t_lo) < 0.5 {
            break;
        }
        span *= 2.0;
        t_lo = t_hi - span;
    }
    if stay_prob(t_lo) >= 0.5 {
        return Err(Error::unsupported(
            "prophet prices: could not bracket the half-sale threshold",
        ));
    }
    assert!(stay_prob(t_lo) <= stay_prob(t_hi), "no-sale chance must rise with t");
    let t = bisect(|x| stay_prob(x) - 0.5, t_lo, t_hi);
    let residual = stay_prob(t) - 0.5;
    if residual.abs() > 1e-10 {
        return Err(Error::inconsistent(format!(
            "prophet prices missed the half-sale point by {residual:.2e}"
        )));
    }
    let p = dists
        .iter()
        .map(|d| d.inverse_virtual_value(t))
        .collect::<Result<Vec<f64>>>()?;
    Ok((t, p))
}

/// Sequential full-model prices that implement the prophet thresholds.
///
/// `dists` are agent distributions; `order` is the arrival order. Each
/// agent's price is her threshold shrunk by the chance that no later
/// arrival buys. Revenue is at least a quarter of the best sequential
/// threshold revenue.
pub fn seq_full_prices(dists: &[Dist], order: &[usize]) -> Result<(Vec<f64>, GuaranteeTag)> {
    let (_, t_hat) = prophet_prices(dists)?;
    let s = Scenario::new(
        dists.to_vec(),
        Externality::Full,
        Mode::Sequential {
            order: Some(order.to_vec()),
        },
    )?;
    let schedule = thresholds_to_prices(&s, &ThresholdProfile::simple(t_hat))?;
    let PriceSchedule::Simple { p } = schedule else {
        unreachable!("simple thresholds produce simple prices")
    };
    Ok((p, tag("seq_full_prices", 4.0, BenchmarkRef::OptSeq)))
}

/// Revenue of one shared price `p`: `p` times the chance somebody buys it.
pub fn anonymous_revenue_at(dists: &[Dist], p: f64) -> f64 {
    p * (1.0 - product(dists.iter().map(|d| d.cdf(p))))
}

/// The best single shared price.
///
/// Candidates are the relaxation prices plus a dense grid over the union of
/// supports; the winner is polished by golden-section search. Ties keep the
/// earliest candidate (relaxation prices first, then the grid in order).
pub fn anonymous_price(dists: &[Dist]) -> Result<f64> {
    require_regular(dists)?;
    let (ear, _) = ear_prices(dists)?;
    let lo = dists.iter().map(|d| d.support().0).fold(f64::INFINITY, f64::min);
    let hi = dists
        .iter()
        .map(|d| d.support().1)
        .fold(f64::NEG_INFINITY, f64::max);
    const GRID: usize = 10_000;
    let step = (hi - lo) / (GRID - 1) as f64;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for p in ear.iter().copied().chain((0..GRID).map(|j| lo + j as f64 * step)) {
        let g = anonymous_revenue_at(dists, p);
        if g > best.1 {
            best = (p, g);
        }
    }
    let (a, b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let (refined, g_refined) = golden_max(|p| anonymous_revenue_at(dists, p), a, b, 1e-12 * (hi - lo).max(1.0));
    Ok(if g_refined > best.1 { refined } else { best.0 })
}

/// Halve a shared price so every equilibrium keeps selling.
///
/// At any simultaneous equilibrium, and for every sequential arrival order,
/// revenue stays within a factor `4e` of the full price's single-sale
/// revenue, which makes the halved price a `4e`-approximation of the best
/// threshold revenue when agent values share one distribution family scale.
pub fn halve_anonymous(p: f64) -> (PriceSchedule, GuaranteeTag) {
    assert!(p.is_finite() && p >= 0.0, "anonymous price must be finite");
    (
        PriceSchedule::Anonymous { p: p / 2.0 },
        tag("halve_anonymous", 4.0 * E, BenchmarkRef::OptSimBest),
    )
}

/// Shared price for `n` agents drawing from one distribution: half the
/// common relaxation price. Revenue at any equilibrium is at least a
/// quarter of the best simultaneous threshold revenue.
pub fn iid_nondiscriminatory(dist: &Dist, n: usize) -> Result<(PriceSchedule, GuaranteeTag)> {
    if n == 0 {
        return Err(Error::invalid("pricing: needs at least one agent"));
    }
    let (p_hat, _) = ear_prices(&vec![dist.clone(); n])?;
    Ok((
        PriceSchedule::Anonymous { p: p_hat[0] / 2.0 },
        tag("iid_nondiscriminatory", 4.0, BenchmarkRef::OptSimBest),
    ))
}

/// Monopoly prices discounted by each agent's status weight: agent i pays
/// `(1 - w_i)` times her monopoly price whether or not a sale happened.
///
/// Usable as simple prices in a simultaneous sale or as a two-tier
/// schedule with both tiers equal in a sequential one.
pub fn status_private_prices(dists: &[Dist], w: &[f64]) -> Result<Vec<f64>> {
    require_regular(dists)?;
    check_agent_weights(dists, w)?;
    Ok(dists
        .iter()
        .zip(w)
        .map(|(d, wi)| (1.0 - wi) * d.monopoly().0)
        .collect())
}

/// One history-independent price per agent for the status model.
///
/// Sequential: agent i posts a blend of her prophet threshold and her
/// sequential full-model price, weighted by her status weight; the blend
/// makes the threshold before any sale exactly the prophet threshold.
/// Simultaneous: everyone gets half the best shared price.
pub fn status_public_prices(dists: &[Dist], w: &[f64], mode: &Mode) -> Result<PriceSchedule> {
    require_regular(dists)?;
    check_agent_weights(dists, w)?;
    match mode {
        Mode::Simultaneous => {
            let p = anonymous_price(dists)?;
            Ok(PriceSchedule::Anonymous { p: p / 2.0 })
        }
        Mode::Sequential { .. } => {
            let order = arrival_order(dists.len(), mode);
            let (_, t_hat) = prophet_prices(dists)?;
            let (p_seq, _) = seq_full_prices(dists, &order)?;
            let p: Vec<f64> = (0..dists.len())
                .map(|i| (1.0 - w[i]) * t_hat[i] + w[i] * p_seq[i])
                .collect();
            Ok(PriceSchedule::TwoTier {
                p0: p.clone(),
                p_pos: p,
            })
        }
    }
}

/// The better of the private and public status schemes, measured by exact
/// sequential revenue or by worst-equilibrium simultaneous revenue.
///
/// Candidates are evaluated in a fixed order (private, public, and for
/// simultaneous sales also halved relaxation prices); ties keep the
/// earliest. The sequential winner carries a factor-6 guarantee against
/// the best sequential threshold revenue; the simultaneous winner a factor
/// `4e + 1` against the best simultaneous threshold revenue.
pub fn status_best_of(
    dists: &[Dist],
    w: &[f64],
    mode: &Mode,
) -> Result<(PriceSchedule, GuaranteeTag)> {
    require_regular(dists)?;
    check_agent_weights(dists, w)?;
    let private = status_private_prices(dists, w)?;
    match mode {
        Mode::Sequential { .. } => {
            let s = Scenario::new(
                dists.to_vec(),
                Externality::Status { w: w.to_vec() },
                mode.clone(),
            )?;
            let candidates = [
                PriceSchedule::TwoTier {
                    p0: private.clone(),
                    p_pos: private,
                },
                status_public_prices(dists, w, mode)?,
            ];
            let mut best: Option<(f64, &PriceSchedule)> = None;
            for c in &candidates {
                let r = solve_seq_status(&s, c)?.revenue;
                if best.is_none_or(|(b, _)| r > b) {
                    best = Some((r, c));
                }
            }
            let (_, schedule) = best.expect("nonempty candidate list");
            Ok((
                schedule.clone(),
                tag("status_best_of", 6.0, BenchmarkRef::OptSeq),
            ))
        }
        Mode::Simultaneous => {
            let s = Scenario::new(
                dists.to_vec(),
                Externality::Status { w: w.to_vec() },
                Mode::Simultaneous,
            )?;
            let (ear, _) = ear_prices(dists)?;
            let candidates = [
                PriceSchedule::simple(private),
                status_public_prices(dists, w, mode)?,
                PriceSchedule::simple(ear.iter().map(|p| p / 2.0).collect()),
            ];
            let mut best: Option<(f64, &PriceSchedule)> = None;
            for c in &candidates {
                let (worst, _) = pessimistic_and_optimistic_revenue(&s, c, BEST_OF_SCAN_GRID)?;
                if best.is_none_or(|(b, _)| worst > b) {
                    best = Some((worst, c));
                }
            }
            let (_, schedule) = best.expect("nonempty candidate list");
            Ok((
                schedule.clone(),
                tag("status_best_of", 4.0 * E + 1.0, BenchmarkRef::OptSimBest),
            ))
        }
    }
}

/// Flatten a history-indexed status policy to two tiers: keep its
/// empty-history prices, and after any sale charge the status-discounted
/// monopoly price. Entries for nonempty histories are ignored; the result
/// never earns less than the policy it came from.
pub fn two_tier_from_adaptive(
    policy: &AdaptivePolicy,
    dists: &[Dist],
    w: &[f64],
) -> Result<PriceSchedule> {
    require_regular(dists)?;
    check_agent_weights(dists, w)?;
    policy.validate(dists.len())?;
    let p0: Vec<f64> = policy.prices.iter().map(|row| row[0]).collect();
    let p_pos: Vec<f64> = dists
        .iter()
        .zip(w)
        .map(|(d, wi)| (1.0 - wi) * d.monopoly().0)
        .collect();
    Ok(PriceSchedule::TwoTier { p0, p_pos })
}

/// Equalized-virtual-value prices targeting `k` expected sales (monopoly
/// prices when those already sell at most `k`). Pairing them with a stop
/// after the k-th purchase earns at least half the optimal `k`-unit
/// revenue.
pub fn k_uniform_prices(dists: &[Dist], k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > dists.len() {
        return Err(Error::domain(format!(
            "unit count {k} outside 1..={}",
            dists.len()
        )));
    }
    equalized_virtual_prices(dists, k as f64)
}

/// Count-indexed availability prices that sell at most `k` units at the
/// `k`-unit equalized prices.
///
/// Row i prices the i-th arrival (agent i under the identity order): her
/// `k`-unit price while fewer than `k` agents bought, unavailable after.
/// Also returns the buyer-count probability tables of the induced
/// equilibrium. Every finite price stays above `(1 - w(k))` times the
/// agent's `k`-unit price.
pub fn availability_grad1(
    dists: &[Dist],
    w: &[f64],
    k: usize,
) -> Result<(PriceSchedule, CountTables)> {
    let n = dists.len();
    let kp = k_uniform_prices(dists, k)?;
    let s = Scenario::new(
        dists.to_vec(),
        Externality::Availability { w: w.to_vec() },
        Mode::sequential(),
    )?;
    let t: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| if j < k { kp[i] } else { f64::INFINITY })
                .collect()
        })
        .collect();
    let prices = thresholds_to_prices(&s, &ThresholdProfile::CountIndexed { t })?;
    let report = solve_seq_availability(&s, &prices)?;
    let tables = report.count_tables.expect("availability solver fills tables");
    let PriceSchedule::CountIndexed { p } = &prices else {
        unreachable!("count-indexed thresholds produce count-indexed prices")
    };
    let w_cap = if k < n { w[k] } else { 1.0 };
    for (i, row) in p.iter().enumerate() {
        for &pij in row.iter().filter(|p| p.is_finite()) {
            // the final count never exceeds k, so the discount is capped
            assert!(
                pij >= kp[i] * (1.0 - w_cap) - 1e-9,
                "price {pij} below its floor for agent {i}"
            );
        }
    }
    Ok((prices, tables))
}

/// Count-indexed availability prices that sell to the first buyer only.
///
/// Each agent gets her prophet threshold while nothing has sold, priced
/// down by the chance a later agent opens the sale instead; after the
/// first sale the good is unavailable. Revenue is at least a quarter of
/// the optimal single-sale revenue, for every availability weight profile.
pub fn availability_grad2(dists: &[Dist], w: &[f64]) -> Result<(PriceSchedule, GuaranteeTag)> {
    let n = dists.len();
    let (_, t_hat) = prophet_prices(dists)?;
    let s = Scenario::new(
        dists.to_vec(),
        Externality::Availability { w: w.to_vec() },
        Mode::sequential(),
    )?;
    let t: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| if j == 0 { t_hat[i] } else { f64::INFINITY })
                .collect()
        })
        .collect();
    let prices = thresholds_to_prices(&s, &ThresholdProfile::CountIndexed { t })?;
    let (floor, _) = seq_full_prices(dists, &(0..n).collect::<Vec<_>>())?;
    let PriceSchedule::CountIndexed { p } = &prices else {
        unreachable!("count-indexed thresholds produce count-indexed prices")
    };
    for i in 0..n {
        // the availability discount never cuts below the full-model price
        assert!(
            p[i][0] >= floor[i] - 1e-9,
            "opener price {} below the full-model price {}",
            p[i][0],
            floor[i]
        );
    }
    Ok((
        prices,
        tag("availability_grad2", 4.0, BenchmarkRef::Myer),
    ))
}

/// The best bucketed availability scheme: the first-buyer-only prices and
/// one capped scheme per power-of-two unit count, compared by exact
/// revenue.
///
/// Returns the winner, its revenue, and a logarithmic guarantee against
/// the unit-capped mixture bound. Candidates evaluate in a fixed order
/// (first-buyer-only, then caps 1, 2, 4, ...); ties keep the earliest.
pub fn availability_best_bucket(
    dists: &[Dist],
    w: &[f64],
) -> Result<(PriceSchedule, f64, GuaranteeTag)> {
    let n = dists.len();
    let s = Scenario::new(
        dists.to_vec(),
        Externality::Availability { w: w.to_vec() },
        Mode::sequential(),
    )?;
    let mut candidates = vec![availability_grad2(dists, w)?.0];
    let mut k = 1;
    while k <= n {
        candidates.push(availability_grad1(dists, w, k)?.0);
        k *= 2;
    }
    let mut best: Option<(f64, &PriceSchedule)> = None;
    for c in &candidates {
        let r = solve_seq_availability(&s, c)?.revenue;
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, c));
        }
    }
    let (revenue, schedule) = best.expect("nonempty candidate list");
    let buckets = (n as f64).log2().floor() + 2.0;
    Ok((
        schedule.clone(),
        revenue,
        tag(
            "availability_best_bucket",
            6.0 * buckets,
            BenchmarkRef::AvailabilityMixture,
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_seq_full;
    use crate::oracle::status_adaptive_revenue;

    fn uniform(n: usize) -> Vec<Dist> {
        vec![Dist::uniform(0.0, 1.0).unwrap(); n]
    }

    fn lumpy() -> Dist {
        // valid but with decreasing density, so not regular
        Dist::piecewise(vec![(0.0, 0.0), (0.1, 0.8), (1.0, 1.0)]).unwrap()
    }

    #[test]
    fn relaxation_prices_hit_their_stated_values() {
        let (p, r) = ear_prices(&uniform(2)).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!((r - 0.5).abs() < 1e-12);

        let (p, r) = ear_prices(&uniform(1)).unwrap();
        assert_eq!(p, vec![0.5]);
        assert!((r - 0.25).abs() < 1e-12);

        let (p, r) = ear_prices(&uniform(4)).unwrap();
        for pi in &p {
            assert!((pi - 0.75).abs() < 1e-9);
        }
        assert!((r - 0.75).abs() < 1e-8);
        let demand: f64 = p.iter().map(|pi| 1.0 - pi).sum();
        assert!(demand <= 1.0 + 1e-9);

        assert!(ear_prices(&[lumpy()]).is_err());
    }

    #[test]
    fn relaxation_revenue_dominates_the_single_sale_optimum() {
        // 2 agents: 0.5 vs 5/12; 4 agents: 0.75 vs 49/80
        let (_, r2) = ear_prices(&uniform(2)).unwrap();
        assert!(r2 >= 5.0 / 12.0 - 1e-9);
        let (_, r4) = ear_prices(&uniform(4)).unwrap();
        assert!(r4 >= 49.0 / 80.0 - 1e-9);
    }

    #[test]
    fn exante_keeps_large_prices_and_drops_small_ones() {
        let (p, t) = exante_transform(&[0.5, 0.5], 0.5).unwrap();
        for pi in &p {
            assert!((pi - (1.0 - FRAC_1_SQRT_2)).abs() < 1e-12);
        }
        assert!((t.factor - 5.82842712474619).abs() < 1e-10);
        assert_eq!(t.benchmark, BenchmarkRef::OptSimBest);

        let (p, _) = exante_transform(&[1.0, 0.01, 0.01], 1.0).unwrap();
        assert!((p[0] - 0.5857864376269049).abs() < 1e-12);
        assert!(p[1].is_infinite() && p[2].is_infinite());

        let (p, _) = exante_transform(&[0.5], 0.25).unwrap();
        assert!(p[0].is_finite());
    }

    #[test]
    fn prophet_prices_sell_with_probability_one_half() {
        let dists = uniform(2);
        let (t, p) = prophet_prices(&dists).unwrap();
        // F(p)^2 = 1/2 with F(p) = p forces p = 2^{-1/2}
        assert!((p[0] - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((p[1] - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((t - (SQRT_2 - 1.0)).abs() < 1e-9);
        let stay = product(dists.iter().zip(&p).map(|(d, &pi)| d.cdf(pi)));
        assert!((stay - 0.5).abs() < 1e-9);

        let (t, p) = prophet_prices(&uniform(1)).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-9);
        assert!(t.abs() < 1e-9);

        let (_, p) = prophet_prices(&uniform(3)).unwrap();
        for pi in &p {
            assert!((pi - 2f64.powf(-1.0 / 3.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn sequential_prices_telescope_under_the_arrival_order() {
        let (p, t) = seq_full_prices(&uniform(2), &[0, 1]).unwrap();
        // thresholds 2^{-1/2} each; the first arrival's price shrinks by
        // the chance the later one buys instead
        assert!((p[0] - 0.5).abs() < 1e-9);
        assert!((p[1] - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((t.factor - 4.0).abs() < 1e-12);
        assert_eq!(t.benchmark, BenchmarkRef::OptSeq);

        // reversing the order swaps which agent gets the deeper discount
        let (p, _) = seq_full_prices(&uniform(2), &[1, 0]).unwrap();
        assert!((p[0] - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((p[1] - 0.5).abs() < 1e-9);

        let (p, _) = seq_full_prices(&uniform(1), &[0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-9);

        let (p, _) = seq_full_prices(&uniform(3), &[0, 1, 2]).unwrap();
        let third = 2f64.powf(-1.0 / 3.0);
        assert!((p[0] - third.powi(3)).abs() < 1e-9);
        assert!((p[1] - third.powi(2)).abs() < 1e-9);
        assert!((p[2] - third).abs() < 1e-9);
    }

    #[test]
    fn shared_price_search_finds_the_calculus_optimum() {
        let dists = uniform(2);
        let p = anonymous_price(&dists).unwrap();
        assert!((p - 1.0 / 3f64.sqrt()).abs() < 1e-7, "{p}");
        let g = anonymous_revenue_at(&dists, p);
        assert!((g - 2.0 / (3.0 * 3f64.sqrt())).abs() < 1e-9);

        let p1 = anonymous_price(&uniform(1)).unwrap();
        assert!((p1 - 0.5).abs() < 1e-7);

        let (schedule, t) = halve_anonymous(p);
        let PriceSchedule::Anonymous { p: half } = schedule else {
            panic!("wrong shape")
        };
        assert!((half - 0.2886751345948129).abs() < 1e-7);
        assert!((t.factor - 4.0 * E).abs() < 1e-12);
    }

    #[test]
    fn identical_agents_get_half_the_common_relaxation_price() {
        let u = Dist::uniform(0.0, 1.0).unwrap();
        let cases = [(2, 0.25), (4, 0.375), (1, 0.25)];
        for (n, want) in cases {
            let (schedule, t) = iid_nondiscriminatory(&u, n).unwrap();
            let PriceSchedule::Anonymous { p } = schedule else {
                panic!("wrong shape")
            };
            assert!((p - want).abs() < 1e-9, "n={n}: {p}");
            assert!((t.factor - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn status_discounts_scale_the_monopoly_prices() {
        let dists = uniform(2);
        let p = status_private_prices(&dists, &[0.5, 0.5]).unwrap();
        assert_eq!(p, vec![0.25, 0.25]);
        let p = status_private_prices(&dists, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let p = status_private_prices(&dists, &[1.0, 1.0]).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn public_status_prices_blend_threshold_and_continuation() {
        let dists = uniform(2);
        let seq = Mode::sequential();
        let p = status_public_prices(&dists, &[0.5, 0.5], &seq).unwrap();
        let PriceSchedule::TwoTier { p0, p_pos } = &p else {
            panic!("wrong shape")
        };
        assert_eq!(p0, p_pos);
        // blend of threshold 2^{-1/2} and sequential price: (sqrt(2)+1)/4
        assert!((p0[0] - 0.6035533905932738).abs() < 1e-9, "{}", p0[0]);
        assert!((p0[1] - FRAC_1_SQRT_2).abs() < 1e-9);

        // zero weights reduce to the bare thresholds
        let p = status_public_prices(&dists, &[0.0, 0.0], &seq).unwrap();
        let PriceSchedule::TwoTier { p0, .. } = &p else {
            panic!("wrong shape")
        };
        assert!((p0[0] - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((p0[1] - FRAC_1_SQRT_2).abs() < 1e-9);

        let p = status_public_prices(&dists, &[0.3, 0.9], &Mode::Simultaneous).unwrap();
        let PriceSchedule::Anonymous { p } = p else {
            panic!("wrong shape")
        };
        assert!((p - 0.28868).abs() < 1e-5);
    }

    #[test]
    fn best_status_scheme_tracks_the_weights() {
        let dists = uniform(2);
        let seq = Mode::sequential();

        // no spillover: the monopoly-derived private prices win
        let (p, t) = status_best_of(&dists, &[0.0, 0.0], &seq).unwrap();
        let PriceSchedule::TwoTier { p0, p_pos } = &p else {
            panic!("wrong shape")
        };
        assert_eq!(p0, &vec![0.5, 0.5]);
        assert_eq!(p_pos, &vec![0.5, 0.5]);
        assert!((t.factor - 6.0).abs() < 1e-12);
        assert_eq!(t.benchmark, BenchmarkRef::OptSeq);

        // full spillover: private prices collapse to zero, public wins
        let (p, t) = status_best_of(&dists, &[1.0, 1.0], &Mode::Simultaneous).unwrap();
        assert!(matches!(p, PriceSchedule::Anonymous { .. }), "{p:?}");
        assert!((t.factor - (4.0 * E + 1.0)).abs() < 1e-12);
        assert_eq!(t.benchmark, BenchmarkRef::OptSimBest);

        // single agent, no weight: the candidates coincide at the monopoly
        let (p, _) = status_best_of(&uniform(1), &[0.0], &seq).unwrap();
        let PriceSchedule::TwoTier { p0, .. } = &p else {
            panic!("wrong shape")
        };
        assert!((p0[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn flattened_policies_keep_opening_prices_and_dominate() {
        let dists = uniform(2);
        let w = [0.5, 0.5];
        let policy = AdaptivePolicy {
            prices: vec![vec![0.6], vec![0.55, 0.3]],
        };
        let p = two_tier_from_adaptive(&policy, &dists, &w).unwrap();
        let PriceSchedule::TwoTier { p0, p_pos } = &p else {
            panic!("wrong shape")
        };
        assert_eq!(p0, &vec![0.6, 0.55]);
        assert_eq!(p_pos, &vec![0.25, 0.25]);

        // entries for nonempty histories do not matter
        let other = AdaptivePolicy {
            prices: vec![vec![0.6], vec![0.55, 0.9]],
        };
        let q = two_tier_from_adaptive(&other, &dists, &w).unwrap();
        assert_eq!(p, q);

        // the two-tier projection never earns less than the policy
        let dritte = vec![
            Dist::uniform(0.0, 1.0).unwrap(),
            Dist::uniform(0.2, 1.5).unwrap(),
            Dist::uniform(0.0, 2.0).unwrap(),
        ];
        let w3 = [0.3, 0.7, 0.5];
        let policy = AdaptivePolicy {
            prices: vec![
                vec![0.45],
                vec![0.6, 0.2],
                vec![0.3, 0.22, 0.18, 0.4],
            ],
        };
        let flat = two_tier_from_adaptive(&policy, &dritte, &w3).unwrap();
        let s = Scenario::new(
            dritte.clone(),
            Externality::Status { w: w3.to_vec() },
            Mode::sequential(),
        )
        .unwrap();
        let flat_rev = solve_seq_status(&s, &flat).unwrap().revenue;
        let policy_rev = status_adaptive_revenue(&dritte, &w3, &policy).unwrap();
        assert!(
            flat_rev >= policy_rev - 1e-9,
            "{flat_rev} vs {policy_rev}"
        );
    }

    #[test]
    fn capped_sale_prices_follow_the_expected_sale_target() {
        // monopoly prices already sell at most k in expectation
        let p = k_uniform_prices(&uniform(4), 2).unwrap();
        assert_eq!(p, vec![0.5; 4]);
        let p = k_uniform_prices(&uniform(2), 1).unwrap();
        assert_eq!(p, vec![0.5; 2]);

        // fewer units than monopoly demand: prices rise until demand = k
        let p = k_uniform_prices(&uniform(4), 1).unwrap();
        for pi in &p {
            assert!((pi - 0.75).abs() < 1e-9);
        }

        assert!(k_uniform_prices(&uniform(2), 0).is_err());
        assert!(k_uniform_prices(&uniform(2), 3).is_err());
    }

    #[test]
    fn capped_availability_prices_discount_by_the_future_count() {
        let dists = uniform(2);
        let (p, tables) = availability_grad1(&dists, &[0.0, 0.5], 1).unwrap();
        let PriceSchedule::CountIndexed { p } = &p else {
            panic!("wrong shape")
        };
        // the later agent closes the sale at her bare price; the earlier
        // one is discounted by the chance the sale happens anyway
        assert!((p[1][0] - 0.5).abs() < 1e-9);
        assert!(p[1][1].is_infinite());
        assert!((p[0][0] - 0.375).abs() < 1e-9, "{}", p[0][0]);
        // r[1][0]: final-count distribution when the last agent moves at 0
        assert!((tables.r[1][0][0] - 0.5).abs() < 1e-9);
        assert!((tables.r[1][0][1] - 0.5).abs() < 1e-9);

        // no availability before the cap, full cap: prices stay undiscounted
        let (p, _) = availability_grad1(&uniform(3), &[0.0, 0.0, 0.0], 3).unwrap();
        let PriceSchedule::CountIndexed { p } = &p else {
            panic!("wrong shape")
        };
        for (i, row) in p.iter().enumerate() {
            for (j, pij) in row.iter().enumerate() {
                assert!((pij - 0.5).abs() < 1e-9, "({i},{j})");
            }
        }
    }

    #[test]
    fn first_buyer_only_prices_lift_the_sequential_prices() {
        let dists = uniform(2);
        let (p, t) = availability_grad2(&dists, &[0.0, 0.5]).unwrap();
        let PriceSchedule::CountIndexed { p } = &p else {
            panic!("wrong shape")
        };
        assert!((p[0][0] - 0.6035533905932738).abs() < 1e-9);
        assert!((p[1][0] - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(p[1][1].is_infinite());
        assert!((t.factor - 4.0).abs() < 1e-12);
        assert_eq!(t.benchmark, BenchmarkRef::Myer);

        let (p, _) = availability_grad2(&uniform(1), &[0.0]).unwrap();
        let PriceSchedule::CountIndexed { p } = &p else {
            panic!("wrong shape")
        };
        assert!((p[0][0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn bucketed_best_of_returns_the_candidate_argmax() {
        // near-private weights: the full-cap candidate sells to everyone
        let dists = uniform(2);
        let (schedule, revenue, t) = availability_best_bucket(&dists, &[0.0, 0.0]).unwrap();
        let s = Scenario::new(
            dists.clone(),
            Externality::Availability { w: vec![0.0, 0.0] },
            Mode::sequential(),
        )
        .unwrap();
        assert!((revenue - 0.5).abs() < 1e-9, "{revenue}");
        assert!((solve_seq_availability(&s, &schedule).unwrap().revenue - revenue).abs() < 1e-12);
        assert!((t.factor - 6.0 * 3.0).abs() < 1e-12);
        assert_eq!(t.benchmark, BenchmarkRef::AvailabilityMixture);

        // the reported revenue is the max over the documented candidates
        let w = [0.0, 1.0];
        let (_, revenue, _) = availability_best_bucket(&dists, &w).unwrap();
        let s = Scenario::new(
            dists.clone(),
            Externality::Availability { w: w.to_vec() },
            Mode::sequential(),
        )
        .unwrap();
        let mut expected = solve_seq_availability(&s, &availability_grad2(&dists, &w).unwrap().0)
            .unwrap()
            .revenue;
        for k in [1, 2] {
            let r = solve_seq_availability(&s, &availability_grad1(&dists, &w, k).unwrap().0)
                .unwrap()
                .revenue;
            expected = expected.max(r);
        }
        assert!((revenue - expected).abs() < 1e-12);

        // single agent: both candidates collapse to the monopoly sale
        let (_, revenue, t) = availability_best_bucket(&uniform(1), &[0.0]).unwrap();
        assert!((revenue - 0.25).abs() < 1e-9);
        assert!((t.factor - 12.0).abs() < 1e-12);
    }

    #[test]
    fn benchmark_references_resolve_through_the_oracle() {
        let s = Scenario::new(uniform(2), Externality::Full, Mode::Simultaneous).unwrap();
        let (v, e) = BenchmarkRef::Myer.resolve(&s).unwrap();
        assert!((v - 5.0 / 12.0).abs() < e + 1e-9);
        let (v, _) = BenchmarkRef::Ear.resolve(&s).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
        let (v, e) = BenchmarkRef::MyerK { k: 2 }.resolve(&s).unwrap();
        assert!((v - 0.5).abs() < e + 1e-9);

        let av = Scenario::new(
            uniform(2),
            Externality::Availability { w: vec![0.0, 0.4] },
            Mode::sequential(),
        )
        .unwrap();
        // mixture: 0.4 * MyerK(1) + 0.6 * MyerK(2)
        let (v, e) = BenchmarkRef::AvailabilityMixture.resolve(&av).unwrap();
        assert!((v - (0.4 * 5.0 / 12.0 + 0.6 * 0.5)).abs() < e + 1e-9, "{v}");
        assert!(BenchmarkRef::AvailabilityMixture.resolve(&s).is_err());
        assert_eq!(BenchmarkRef::MyerK { k: 3 }.label(), "MyerK(3)");
    }

    #[test]
    fn first_buyer_prices_beat_plain_sequential_revenue() {
        // lifting prices without changing thresholds can only help
        let dists = vec![
            Dist::uniform(0.0, 1.0).unwrap(),
            Dist::uniform(0.2, 1.5).unwrap(),
            Dist::complement_power(2.0).unwrap(),
        ];
        let w = [0.0, 0.6, 0.9];
        let s = Scenario::new(
            dists.clone(),
            Externality::Availability { w: w.to_vec() },
            Mode::sequential(),
        )
        .unwrap();
        let (p, _) = availability_grad2(&dists, &w).unwrap();
        let grad2_rev = solve_seq_availability(&s, &p).unwrap().revenue;

        let full = Scenario::new(dists.clone(), Externality::Full, Mode::sequential()).unwrap();
        let (p_seq, _) = seq_full_prices(&dists, &[0, 1, 2]).unwrap();
        let seq_rev = solve_seq_full(&full, &PriceSchedule::simple(p_seq)).unwrap().revenue;
        assert!(grad2_rev >= seq_rev - 1e-12, "{grad2_rev} vs {seq_rev}");
    }
}
