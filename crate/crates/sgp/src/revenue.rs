//! Revenue evaluation: closed forms for every supported model and mode, a
//! seeded Monte Carlo simulator that cross-checks them, and equilibrium
//! revenue extremes for simultaneous sales.
//!
//! The simulator is counter-based: trial `t`, agent `i` draws its value from
//! `mix3(seed, t, i)`, and trials aggregate in fixed-size chunks folded in
//! index order, so results are bit-identical no matter how many worker
//! threads run.

use crate::equilibrium::{scan_sim_equilibria, EquilibriumReport};
use crate::error::{Error, Result};
use crate::numeric::{mix3, pairwise_sum, revenue_term};
use crate::oracle::{adaptive_thresholds, AdaptivePolicy};
use crate::scenario::{Externality, PriceSchedule, Scenario, ThresholdProfile};
use rayon::prelude::*;
use serde::Serialize;

/// Trials per parallel work unit. Fixed so the chunk boundaries, and with
/// them every floating-point sum, never depend on the thread count.
const SIM_CHUNK: u64 = 1 << 14;

/// Aggregate of a Monte Carlo run.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub mean: f64,
    /// Sample standard deviation divided by sqrt(trials).
    pub stderr: f64,
    /// Fraction of trials in which each agent bought (agent-id indexed).
    pub buy_freq: Vec<f64>,
    /// `count_hist[k]`: trials that ended with exactly k buyers.
    pub count_hist: Vec<u64>,
    pub seed: u64,
}

/// Expected revenue of an equilibrium, recomputed from its thresholds.
///
/// The solvers already report revenue; this recomputes it from the model's
/// own sale formula so the two derivations check each other. Simultaneous
/// sales sum `p_i (1 - F_i(T_i))` over agents (any number can buy);
/// sequential sales weight each price by the probability its state is
/// reached. The equilibrium must have been produced for `(s, p)`.
pub fn revenue_closed(s: &Scenario, p: &PriceSchedule, eq: &EquilibriumReport) -> Result<f64> {
    let n = s.n();
    let seq = s.mode.is_sequential();
    match (&s.externality, seq, &eq.thresholds) {
        (Externality::Full | Externality::Status { .. }, false, ThresholdProfile::Simple { t }) => {
            let prices = p.as_per_agent(n)?;
            let terms: Vec<f64> = (0..n)
                .map(|i| revenue_term(prices[i], 1.0 - s.agents[i].cdf(t[i])))
                .collect();
            Ok(pairwise_sum(&terms))
        }
        (Externality::Full, true, ThresholdProfile::Simple { t }) => {
            let prices = p.as_per_agent(n)?;
            let mut quiet = 1.0; // probability no one bought yet
            let mut terms = Vec::with_capacity(n);
            for agent in s.arrival_order() {
                let decline = s.agents[agent].cdf(t[agent]);
                terms.push(revenue_term(prices[agent], quiet * (1.0 - decline)));
                quiet *= decline;
            }
            Ok(pairwise_sum(&terms))
        }
        (Externality::Status { .. }, true, ThresholdProfile::TwoTier { t0, t_pos }) => {
            let PriceSchedule::TwoTier { p0, p_pos } = p else {
                return Err(Error::domain(
                    "closed revenue: prices do not match the two-tier thresholds",
                ));
            };
            let mut quiet = 1.0;
            let mut terms = Vec::with_capacity(2 * n);
            for agent in s.arrival_order() {
                let d0 = s.agents[agent].cdf(t0[agent]);
                let d_pos = s.agents[agent].cdf(t_pos[agent]);
                terms.push(revenue_term(p0[agent], quiet * (1.0 - d0)));
                terms.push(revenue_term(p_pos[agent], (1.0 - quiet) * (1.0 - d_pos)));
                quiet *= d0;
            }
            Ok(pairwise_sum(&terms))
        }
        (Externality::Availability { .. }, true, ThresholdProfile::CountIndexed { t }) => {
            let PriceSchedule::CountIndexed { p } = p else {
                return Err(Error::domain(
                    "closed revenue: prices do not match the count-indexed thresholds",
                ));
            };
            let order = s.arrival_order();
            // forward occupancy over (arrival, prior-buyer-count) states
            let mut occ = vec![1.0];
            let mut terms = Vec::new();
            for i in 0..n {
                let dist = &s.agents[order[i]];
                let mut next = vec![0.0; i + 2];
                for j in 0..=i {
                    let decline = dist.cdf(t[i][j]);
                    terms.push(revenue_term(p[i][j], occ[j] * (1.0 - decline)));
                    next[j] += occ[j] * decline;
                    next[j + 1] += occ[j] * (1.0 - decline);
                }
                occ = next;
            }
            Ok(pairwise_sum(&terms))
        }
        _ => Err(Error::domain(
            "closed revenue: unsupported model, mode, and threshold combination",
        )),
    }
}

/// Revenue at the worst and best simultaneous equilibrium.
///
/// Wraps the exhaustive equilibrium scan (full and status models); `grid`
/// is the scan's sampling resolution per agent.
pub fn pessimistic_and_optimistic_revenue(
    s: &Scenario,
    p: &PriceSchedule,
    grid: usize,
) -> Result<(f64, f64)> {
    let scan = scan_sim_equilibria(s, p, grid)?;
    Ok((scan.worst().revenue, scan.best().revenue))
}

/// One trial's walk: which thresholds apply in which state.
enum Strategy<'a> {
    /// Everyone decides at once; agent i buys iff v_i clears t[i].
    Simultaneous { t: &'a [f64], prices: Vec<f64> },
    /// Arrivals in order; only the first purchase can happen.
    SeqFull { t: &'a [f64], prices: Vec<f64> },
    /// Arrivals in order; one threshold pair before/after the first sale.
    SeqStatus {
        t0: &'a [f64],
        t_pos: &'a [f64],
        p0: &'a [f64],
        p_pos: &'a [f64],
    },
    /// Arrivals in order; thresholds depend on the prior buyer count.
    SeqAvailability {
        t: &'a [Vec<f64>],
        p: &'a [Vec<f64>],
    },
}

impl Strategy<'_> {
    fn build<'a>(
        s: &Scenario,
        p: &'a PriceSchedule,
        eq: &'a EquilibriumReport,
    ) -> Result<Strategy<'a>> {
        let n = s.n();
        let seq = s.mode.is_sequential();
        match (&s.externality, seq, &eq.thresholds) {
            (Externality::Full | Externality::Status { .. }, false, ThresholdProfile::Simple { t }) => {
                Ok(Strategy::Simultaneous {
                    t,
                    prices: p.as_per_agent(n)?,
                })
            }
            (Externality::Full, true, ThresholdProfile::Simple { t }) => Ok(Strategy::SeqFull {
                t,
                prices: p.as_per_agent(n)?,
            }),
            (Externality::Status { .. }, true, ThresholdProfile::TwoTier { t0, t_pos }) => {
                let PriceSchedule::TwoTier { p0, p_pos } = p else {
                    return Err(Error::domain(
                        "simulate: prices do not match the two-tier thresholds",
                    ));
                };
                Ok(Strategy::SeqStatus { t0, t_pos, p0, p_pos })
            }
            (Externality::Availability { .. }, true, ThresholdProfile::CountIndexed { t }) => {
                let PriceSchedule::CountIndexed { p } = p else {
                    return Err(Error::domain(
                        "simulate: prices do not match the count-indexed thresholds",
                    ));
                };
                Ok(Strategy::SeqAvailability { t, p })
            }
            _ => Err(Error::domain(
                "simulate: unsupported model, mode, and threshold combination",
            )),
        }
    }

    /// Revenue and buyer bitmask for one value profile. `order[pos]` is the
    /// agent arriving at `pos`; values are agent-id indexed.
    fn run(&self, order: &[usize], v: &[f64]) -> (f64, u64) {
        let mut revenue = 0.0;
        let mut owners = 0u64;
        match self {
            Strategy::Simultaneous { t, prices } => {
                for i in 0..v.len() {
                    // a value exactly at the threshold buys
                    if v[i] >= t[i] {
                        owners |= 1 << i;
                        revenue += prices[i];
                    }
                }
            }
            Strategy::SeqFull { t, prices } => {
                for &agent in order {
                    if owners == 0 && v[agent] >= t[agent] {
                        owners |= 1 << agent;
                        revenue += prices[agent];
                    }
                }
            }
            Strategy::SeqStatus { t0, t_pos, p0, p_pos } => {
                for &agent in order {
                    let (t, p) = if owners == 0 {
                        (t0[agent], p0[agent])
                    } else {
                        (t_pos[agent], p_pos[agent])
                    };
                    if v[agent] >= t {
                        owners |= 1 << agent;
                        revenue += p;
                    }
                }
            }
            Strategy::SeqAvailability { t, p } => {
                for (pos, &agent) in order.iter().enumerate() {
                    let j = owners.count_ones() as usize;
                    if v[agent] >= t[pos][j] {
                        owners |= 1 << agent;
                        revenue += p[pos][j];
                    }
                }
            }
        }
        (revenue, owners)
    }
}

struct ChunkStats {
    sum: f64,
    sumsq: f64,
    buys: Vec<u64>,
    hist: Vec<u64>,
}

/// Run `trials` seeded sale trials and aggregate them.
///
/// Each trial draws every agent's value, replays the purchase walk the
/// equilibrium thresholds prescribe, and records the revenue collected.
/// A given `(seed, trials)` pair always produces the same summary.
pub fn simulate(
    s: &Scenario,
    p: &PriceSchedule,
    eq: &EquilibriumReport,
    trials: u64,
    seed: u64,
) -> Result<SimulationSummary> {
    if trials == 0 {
        return Err(Error::invalid("simulate: needs at least one trial"));
    }
    let strategy = Strategy::build(s, p, eq)?;
    let order = s.arrival_order();
    let dists = &s.agents;
    run_trials(trials, seed, s.n(), move |trial, v| {
        for (i, d) in dists.iter().enumerate() {
            v[i] = d.sample(mix3(seed, trial, i as u64));
        }
        strategy.run(&order, v)
    })
}

/// Monte Carlo revenue of a history-dependent availability policy.
///
/// `policy.prices[i][m]` is agent i's price when the agents in bitmask `m`
/// (all of index < i) already bought; arrivals are in index order. The
/// trial walk uses the exact best-response thresholds for the policy.
pub fn simulate_adaptive(
    dists: &[crate::distributions::Dist],
    w: &[f64],
    policy: &AdaptivePolicy,
    trials: u64,
    seed: u64,
) -> Result<SimulationSummary> {
    if trials == 0 {
        return Err(Error::invalid("simulate: needs at least one trial"));
    }
    let t = adaptive_thresholds(dists, w, policy)?;
    run_trials(trials, seed, dists.len(), move |trial, v| {
        for (i, d) in dists.iter().enumerate() {
            v[i] = d.sample(mix3(seed, trial, i as u64));
        }
        let mut revenue = 0.0;
        let mut owners: usize = 0;
        for i in 0..dists.len() {
            if v[i] >= t[i][owners] {
                revenue += policy.prices[i][owners];
                owners |= 1 << i;
            }
        }
        (revenue, owners as u64)
    })
}

/// Chunked parallel trial runner with order-independent aggregation.
fn run_trials(
    trials: u64,
    seed: u64,
    n: usize,
    trial_fn: impl Fn(u64, &mut [f64]) -> (f64, u64) + Sync,
) -> Result<SimulationSummary> {
    let chunks = trials.div_ceil(SIM_CHUNK);
    let stats: Vec<ChunkStats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SIM_CHUNK;
            let hi = trials.min(lo + SIM_CHUNK);
            let mut revs = Vec::with_capacity((hi - lo) as usize);
            let mut sqs = Vec::with_capacity((hi - lo) as usize);
            let mut buys = vec![0u64; n];
            let mut hist = vec![0u64; n + 1];
            let mut v = vec![0.0; n];
            for trial in lo..hi {
                let (rev, owners) = trial_fn(trial, &mut v);
                revs.push(rev);
                sqs.push(rev * rev);
                hist[owners.count_ones() as usize] += 1;
                for (i, b) in buys.iter_mut().enumerate() {
                    *b += (owners >> i) & 1;
                }
            }
            ChunkStats {
                sum: pairwise_sum(&revs),
                sumsq: pairwise_sum(&sqs),
                buys,
                hist,
            }
        })
        .collect();

    // chunk partials fold in index order, independent of worker scheduling
    let sums: Vec<f64> = stats.iter().map(|c| c.sum).collect();
    let sumsqs: Vec<f64> = stats.iter().map(|c| c.sumsq).collect();
    let sum = pairwise_sum(&sums);
    let sumsq = pairwise_sum(&sumsqs);
    let mut buys = vec![0u64; n];
    let mut hist = vec![0u64; n + 1];
    for c in &stats {
        for i in 0..n {
            buys[i] += c.buys[i];
        }
        for k in 0..=n {
            hist[k] += c.hist[k];
        }
    }

    let tf = trials as f64;
    let mean = sum / tf;
    let stderr = if trials > 1 {
        let var = ((sumsq - sum * sum / tf) / (tf - 1.0)).max(0.0);
        (var / tf).sqrt()
    } else {
        0.0
    };
    Ok(SimulationSummary {
        trials,
        mean,
        stderr,
        buy_freq: buys.iter().map(|&b| b as f64 / tf).collect(),
        count_hist: hist,
        seed,
    })
}
