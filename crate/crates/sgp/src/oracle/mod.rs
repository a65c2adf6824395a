//! Brute-force reference computations and benchmark values.
//!
//! Everything in this module trades speed for trustworthiness: quadrature with
//! explicit error bounds, exhaustive search over small state spaces, exact
//! backward induction. Solvers elsewhere are checked against these routines,
//! never the other way around. Each computed value carries a [`Benchmark`]
//! record stating how it was obtained and a bound on its numerical error, so
//! downstream comparisons can set tolerances honestly.

mod adaptive;
mod graph;
mod grid;
mod myerson;

pub use adaptive::{
    adaptive_revenue, adaptive_thresholds, optimal_adaptive_availability, status_adaptive_revenue,
    AdaptivePolicy, AdaptiveSearch,
};
pub use graph::{max_independent_set, subgame_perfect_network};
pub use grid::grid_optimal_thresholds;
pub use myerson::{myerson_k_uniform, myerson_revenue};

use crate::error::{Error, Result};
use crate::scenario::{Externality, Mode, Scenario};
use serde::Serialize;

/// What a benchmark value measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchmarkKind {
    /// Expected maximum of the positive virtual values: the optimal revenue a
    /// seller could extract selling to at most one agent.
    Myer,
    /// Expected sum of the `k` largest positive virtual values: the optimal
    /// revenue selling to at most `k` agents.
    MyerK { k: usize },
    /// Best revenue over threshold profiles for sequential full-externality
    /// posted prices, found by grid search.
    OptSeq,
    /// Best equilibrium revenue over threshold profiles for simultaneous
    /// full-externality posted prices, found by grid search.
    OptSimBest,
    /// Best revenue over adaptive set-indexed price policies in the sequential
    /// availability model.
    OptAdaptiveAvailability,
    /// Size of a maximum independent set of the network graph, which caps the
    /// revenue of any unit-value network sale.
    MaxIs,
}

/// A reference value together with its provenance and a numerical error bound.
///
/// `error` is additive: the true quantity lies within `value ± error` barring
/// a bug, not merely with high probability unless `method` says Monte Carlo.
#[derive(Debug, Clone, Serialize)]
pub struct Benchmark {
    #[serde(flatten)]
    pub kind: BenchmarkKind,
    pub value: f64,
    /// Human-readable note on how the value was computed.
    pub method: String,
    /// Bound on the numerical error of `value`.
    pub error: f64,
}

impl Benchmark {
    pub fn label(&self) -> String {
        match self.kind {
            BenchmarkKind::Myer => "myerson".into(),
            BenchmarkKind::MyerK { k } => format!("myerson_k{k}"),
            BenchmarkKind::OptSeq => "opt_seq".into(),
            BenchmarkKind::OptSimBest => "opt_sim_best".into(),
            BenchmarkKind::OptAdaptiveAvailability => "opt_adaptive_availability".into(),
            BenchmarkKind::MaxIs => "max_independent_set".into(),
        }
    }
}

/// Computes the benchmark of the given kind for a scenario.
///
/// Dispatches on `kind`; the scenario must be of a shape the kind applies to
/// (for example `MaxIs` needs a network scenario).
pub fn benchmark(s: &Scenario, kind: BenchmarkKind) -> Result<Benchmark> {
    s.validate()?;
    match kind {
        BenchmarkKind::Myer => myerson_revenue(&s.agents),
        BenchmarkKind::MyerK { k } => myerson_k_uniform(&s.agents, k),
        BenchmarkKind::OptSeq => {
            let seq = Scenario {
                mode: Mode::sequential(),
                ..s.clone()
            };
            grid_optimal_thresholds(&seq, 200).map(|(_, b)| b)
        }
        BenchmarkKind::OptSimBest => {
            let sim = Scenario {
                mode: Mode::Simultaneous,
                ..s.clone()
            };
            grid_optimal_thresholds(&sim, 200).map(|(_, b)| b)
        }
        BenchmarkKind::OptAdaptiveAvailability => match &s.externality {
            Externality::Availability { w } => {
                optimal_adaptive_availability(&s.agents, w, AdaptiveSearch::default())
                    .map(|(_, b)| b)
            }
            _ => Err(Error::unsupported(
                "adaptive availability benchmark needs an availability scenario",
            )),
        },
        BenchmarkKind::MaxIs => match &s.externality {
            Externality::Network { .. } => {
                let (size, _) = max_independent_set(s.n(), &s.neighbors())?;
                Ok(Benchmark {
                    kind: BenchmarkKind::MaxIs,
                    value: size as f64,
                    method: "exact branch and bound over vertex subsets".into(),
                    error: 0.0,
                })
            }
            _ => Err(Error::unsupported(
                "independent set benchmark needs a network scenario",
            )),
        },
    }
}
