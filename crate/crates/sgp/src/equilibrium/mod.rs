//! Equilibrium solvers for posted-price sales with value spillovers.
//!
//! Agents see a price, anticipate how likely others are to buy, and purchase
//! exactly when their value clears a threshold. Each solver here computes
//! those thresholds for one externality model and sale mode:
//!
//! * [`solve_sim_fixed_point`]: damped best-response iteration, any model,
//!   simultaneous mode;
//! * [`scan_sim_equilibria`]: exhaustive enumeration of simultaneous
//!   equilibria (full and status models) including degenerate continua;
//! * [`solve_seq_full`], [`solve_seq_status`], [`solve_seq_availability`]:
//!   backward induction for sequential sales;
//! * [`solve_network_sim_greedy`], [`solve_network_seq_fixed_values`]:
//!   constructed equilibria on graphs.
//!
//! Conventions: per-agent vectors (`buy_probs`, simple thresholds) are
//! indexed by agent id; count-indexed rows and probability tables are indexed
//! by arrival position. An infinite threshold means the agent never buys.

mod fixed_point;
mod network;
mod scan;
mod sequential;

pub use fixed_point::solve_sim_fixed_point;
pub use network::{solve_network_seq_fixed_values, solve_network_sim_greedy, FixedValueOutcome};
pub use scan::{scan_sim_equilibria, Continuum, ScanReport};
pub use sequential::{
    solve_seq_availability, solve_seq_full, solve_seq_status, thresholds_to_prices,
};

use crate::distributions::Dist;
use crate::scenario::{Externality, Scenario, ThresholdProfile};
use serde::Serialize;

/// Buyer-count probability tables for sequential availability sales.
///
/// `q[i][j]`: probability that `j` agents bought before the i-th arrival.
/// `r[i][j][k]`: probability the final buyer count is `k`, given `j` buyers
/// when the i-th arrival is about to move. Row `i = n` is the boundary
/// (no one left to move).
#[derive(Debug, Clone, Serialize)]
pub struct CountTables {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<Vec<f64>>>,
}

/// A solved equilibrium: thresholds, purchase probabilities, and revenue.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub thresholds: ThresholdProfile,
    /// Unconditional purchase probability per agent (agent-id indexed).
    pub buy_probs: Vec<f64>,
    /// Buyer-count tables (sequential availability only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count_tables: Option<CountTables>,
    /// Probability that nobody buys.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_sale_prob: Option<f64>,
    pub revenue: f64,
    /// Sup-norm defect in the fixed-point conditions at the reported point.
    pub residual: f64,
    /// Constructed buyer set (network greedy only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<usize>>,
    /// Set when a zero price met a zero sale margin, making the threshold
    /// conventional rather than forced.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    #[serde(default)]
    pub degenerate: bool,
}

impl EquilibriumReport {
    pub(crate) fn simple(thresholds: Vec<f64>, buy_probs: Vec<f64>, revenue: f64) -> Self {
        EquilibriumReport {
            thresholds: ThresholdProfile::simple(thresholds),
            buy_probs,
            count_tables: None,
            no_sale_prob: None,
            revenue,
            residual: 0.0,
            support: None,
            degenerate: false,
        }
    }
}

/// Threshold from a price and a sale margin (one minus the expected outside
/// fraction), with the zero-margin conventions: a positive price can never
/// be met, a zero price is accepted. The flag marks the ambiguous 0/0 case.
pub(crate) fn margin_threshold(p: f64, margin: f64) -> (f64, bool) {
    if margin <= 0.0 {
        if p > 0.0 {
            (f64::INFINITY, false)
        } else {
            (0.0, true)
        }
    } else {
        (p / margin, false)
    }
}

/// Per-scenario context for computing expected externality fractions.
pub(crate) struct ExtCtx<'a> {
    pub dists: &'a [Dist],
    pub ext: &'a Externality,
    pub neighbors: Vec<Vec<usize>>,
}

impl<'a> ExtCtx<'a> {
    pub fn new(s: &'a Scenario) -> Self {
        ExtCtx {
            dists: &s.agents,
            ext: &s.externality,
            neighbors: s.neighbors(),
        }
    }

    /// Expected fraction of value agent `i` receives from the *other*
    /// agents' purchases, when agent `j` declines with probability `q[j]`.
    pub fn expected_fraction(&self, i: usize, q: &[f64]) -> f64 {
        let n = q.len();
        let others_all_decline = || -> f64 {
            let mut prod = 1.0;
            for (j, &qj) in q.iter().enumerate() {
                if j != i {
                    prod *= qj;
                }
            }
            prod
        };
        match self.ext {
            Externality::Full => 1.0 - others_all_decline(),
            Externality::Status { w } => w[i] * (1.0 - others_all_decline()),
            Externality::Network { .. } => {
                let mut prod = 1.0;
                for &j in &self.neighbors[i] {
                    prod *= q[j];
                }
                1.0 - prod
            }
            Externality::Availability { w } => {
                // distribution of the other agents' buyer count
                let mut counts = vec![0.0; n];
                counts[0] = 1.0;
                let mut m = 0;
                for (j, &qj) in q.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let buy = 1.0 - qj;
                    for k in (0..=m).rev() {
                        let c = counts[k];
                        counts[k] = c * qj;
                        counts[k + 1] += c * buy;
                    }
                    m += 1;
                }
                counts.iter().zip(w.iter()).map(|(c, wk)| c * wk).sum()
            }
        }
    }

    /// Threshold implied by price `p` when the expected outside fraction is
    /// `e`: the value at which buying and waiting give equal utility.
    pub fn threshold(p: f64, e: f64) -> f64 {
        margin_threshold(p, 1.0 - e).0
    }

    /// Sup-norm defect of the simultaneous fixed-point conditions at
    /// thresholds `t` with decline probabilities `q`.
    pub fn sup_residual(&self, p: &[f64], t: &[f64], q: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..q.len() {
            let e = self.expected_fraction(i, q);
            let margin = 1.0 - e;
            let r = if t[i].is_finite() {
                (t[i] * margin - p[i]).abs()
            } else {
                // never buys: needs price at least the top of support times
                // the margin
                let hi = self.dists[i].support().1;
                (hi * margin - p[i]).max(0.0)
            };
            worst = worst.max(r);
        }
        worst
    }
}
