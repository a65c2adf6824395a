//! Grid search for revenue-optimal threshold profiles under full
//! externalities.
//!
//! Revenue is evaluated through the literal pricing route of the requested
//! mode. Sequential: each agent's price is her threshold discounted by the
//! chance everyone after her declines, and a sale at position `i` requires
//! everyone before `i` to decline. Simultaneous: each price is the threshold
//! discounted by all other agents' decline odds, and the profile itself is
//! the equilibrium evaluated. The two routes agree on their optima; keeping
//! them separate lets tests confirm that instead of assuming it.

use super::{Benchmark, BenchmarkKind};
use crate::distributions::Dist;
use crate::error::{Error, Result};
use crate::numeric;
use crate::scenario::{Externality, Scenario, ThresholdProfile};
use rayon::prelude::*;

/// Revenue of a sequential full-externality sale at thresholds `t`, both
/// indexed by arrival position.
fn seq_route_value(dists: &[&Dist], t: &[f64]) -> f64 {
    let n = dists.len();
    let mut value = 0.0;
    let mut before = 1.0;
    for i in 0..n {
        let mut after = 1.0;
        for j in i + 1..n {
            after *= dists[j].cdf(t[j]);
        }
        let price = t[i] * after;
        value += price * (1.0 - dists[i].cdf(t[i])) * before;
        before *= dists[i].cdf(t[i]);
    }
    value
}

/// Revenue of the simultaneous full-externality equilibrium at thresholds
/// `t`, indexed by agent.
fn sim_route_value(dists: &[&Dist], t: &[f64]) -> f64 {
    let n = dists.len();
    let mut value = 0.0;
    for i in 0..n {
        let mut others = 1.0;
        for j in 0..n {
            if j != i {
                others *= dists[j].cdf(t[j]);
            }
        }
        let price = t[i] * others;
        value += price * (1.0 - dists[i].cdf(t[i]));
    }
    value
}

/// Finds the revenue-maximizing threshold profile for a full-externality
/// scenario by exhaustive grid search plus local polish.
///
/// Supports up to three agents; the grid is exponential in the agent count,
/// so larger instances are refused rather than silently degraded. Returns the
/// polished profile and a benchmark whose error field bounds how much better
/// an off-grid optimum could be, estimated from sampled derivatives of the
/// revenue surface.
pub fn grid_optimal_thresholds(
    s: &Scenario,
    resolution: usize,
) -> Result<(ThresholdProfile, Benchmark)> {
    s.validate()?;
    if !matches!(s.externality, Externality::Full) {
        return Err(Error::unsupported(
            "threshold grid search covers the full-externality model only",
        ));
    }
    let n = s.n();
    if n > 3 {
        return Err(Error::unsupported(format!(
            "grid search over {n} agents would need {resolution}^{n} evaluations; \
             three agents is the supported maximum"
        )));
    }
    let resolution = resolution.max(8);
    let order = s.arrival_order();
    let sequential = s.mode.is_sequential();
    // Everything below works in arrival positions; `order` maps back.
    let dists: Vec<&Dist> = order.iter().map(|&a| &s.agents[a]).collect();
    let value_at = |t: &[f64]| -> f64 {
        if sequential {
            seq_route_value(&dists, t)
        } else {
            sim_route_value(&dists, t)
        }
    };

    let axes: Vec<Vec<f64>> = dists
        .iter()
        .map(|d| {
            let (lo, hi) = d.support();
            (0..resolution)
                .map(|k| lo + (hi - lo) * k as f64 / (resolution - 1) as f64)
                .collect()
        })
        .collect();
    let steps: Vec<f64> = dists
        .iter()
        .map(|d| {
            let (lo, hi) = d.support();
            (hi - lo) / (resolution - 1) as f64
        })
        .collect();

    // Exhaustive pass, parallel over the first axis. Each slice reports its
    // best cell; slices are combined in index order so the argmax is
    // deterministic (first strict improvement wins).
    let slice_best: Vec<(f64, Vec<usize>)> = (0..resolution)
        .into_par_iter()
        .map(|k0| {
            let mut best = (f64::NEG_INFINITY, vec![0; n]);
            let mut idx = vec![0usize; n];
            idx[0] = k0;
            let mut t = vec![0.0; n];
            t[0] = axes[0][k0];
            let inner = resolution.pow(n as u32 - 1);
            for flat in 0..inner {
                let mut rem = flat;
                for i in 1..n {
                    idx[i] = rem % resolution;
                    t[i] = axes[i][idx[i]];
                    rem /= resolution;
                }
                let v = value_at(&t);
                if v > best.0 {
                    best = (v, idx.clone());
                }
            }
            best
        })
        .collect();
    let (_, best_idx) = slice_best
        .into_iter()
        .fold((f64::NEG_INFINITY, vec![0; n]), |acc, cand| {
            if cand.0 > acc.0 {
                cand
            } else {
                acc
            }
        });

    // Local polish: cycles of single-coordinate golden-section search over
    // the cell neighborhood of the grid argmax.
    let mut t_best: Vec<f64> = (0..n).map(|i| axes[i][best_idx[i]]).collect();
    let mut v_best = value_at(&t_best);
    for _ in 0..8 {
        let before = v_best;
        for i in 0..n {
            let (lo, hi) = dists[i].support();
            let a = (t_best[i] - steps[i]).max(lo);
            let b = (t_best[i] + steps[i]).min(hi);
            let mut probe = t_best.clone();
            let (x, fx) = numeric::golden_max(
                |ti| {
                    probe[i] = ti;
                    value_at(&probe)
                },
                a,
                b,
                1e-12 * (hi - lo).max(1.0),
            );
            if fx > v_best {
                t_best[i] = x;
                v_best = fx;
            }
        }
        if v_best - before < 1e-13 {
            break;
        }
    }

    // Error bound: largest sampled directional slope times half the grid
    // step, summed over axes. Probes are deterministic.
    let mut slope = vec![0.0_f64; n];
    let probe_at = |t: &[f64], slope: &mut Vec<f64>| {
        for i in 0..n {
            let (lo, hi) = dists[i].support();
            let h = (steps[i] * 1e-3).max(1e-9);
            let mut up = t.to_vec();
            let mut dn = t.to_vec();
            up[i] = (t[i] + h).min(hi);
            dn[i] = (t[i] - h).max(lo);
            let d = (value_at(&up) - value_at(&dn)).abs() / (up[i] - dn[i]).max(1e-12);
            slope[i] = slope[i].max(d);
        }
    };
    probe_at(&t_best, &mut slope);
    for probe_idx in 0..256u64 {
        let t: Vec<f64> = (0..n)
            .map(|i| {
                let (lo, hi) = dists[i].support();
                lo + (hi - lo) * numeric::unit_open(numeric::mix3(0x67726964, probe_idx, i as u64))
            })
            .collect();
        probe_at(&t, &mut slope);
    }
    let error: f64 = (0..n).map(|i| slope[i] * steps[i] / 2.0).sum();

    // Back from arrival positions to agent ids.
    let mut by_agent = vec![0.0; n];
    for (pos, &agent) in order.iter().enumerate() {
        by_agent[agent] = t_best[pos];
    }
    let kind = if sequential {
        BenchmarkKind::OptSeq
    } else {
        BenchmarkKind::OptSimBest
    };
    let bench = Benchmark {
        kind,
        value: v_best,
        method: format!(
            "exhaustive {resolution}^{n} threshold grid with golden-section polish; \
             error is max sampled slope times half the grid step"
        ),
        error,
    };
    Ok((ThresholdProfile::Simple { t: by_agent }, bench))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Mode;

    fn full_scenario(dists: Vec<Dist>, mode: Mode) -> Scenario {
        Scenario::new(dists, Externality::Full, mode).unwrap()
    }

    fn unit() -> Dist {
        Dist::Uniform { lo: 0.0, hi: 1.0 }
    }

    #[test]
    fn one_agent_grid_recovers_the_monopoly_price() {
        let s = full_scenario(vec![unit()], Mode::sequential());
        let (prof, bench) = grid_optimal_thresholds(&s, 300).unwrap();
        let t = prof.as_simple().unwrap();
        assert!((t[0] - 0.5).abs() < 1e-6, "{t:?}");
        assert!((bench.value - 0.25).abs() < 1e-9, "{}", bench.value);
    }

    #[test]
    fn two_uniform_agents_sell_sequentially_at_two_thirds() {
        let s = full_scenario(vec![unit(), unit()], Mode::sequential());
        let (prof, bench) = grid_optimal_thresholds(&s, 200).unwrap();
        let t = prof.as_simple().unwrap();
        assert!((t[0] - 2.0 / 3.0).abs() < 1e-5, "{t:?}");
        assert!((t[1] - 2.0 / 3.0).abs() < 1e-5, "{t:?}");
        assert!((bench.value - 8.0 / 27.0).abs() < 1e-9, "{}", bench.value);
        assert!(bench.error < 1e-2);
    }

    #[test]
    fn both_modes_reach_the_same_optimum() {
        let dists = vec![unit(), Dist::Uniform { lo: 0.2, hi: 1.4 }, unit()];
        let seq = full_scenario(dists.clone(), Mode::sequential());
        let sim = full_scenario(dists, Mode::Simultaneous);
        let (_, a) = grid_optimal_thresholds(&seq, 120).unwrap();
        let (_, b) = grid_optimal_thresholds(&sim, 120).unwrap();
        assert!(
            (a.value - b.value).abs() <= a.error + b.error,
            "seq {} vs sim {} (errors {} {})",
            a.value,
            b.value,
            a.error,
            b.error
        );
    }

    #[test]
    fn arrival_order_does_not_change_the_sequential_optimum() {
        let dists = vec![
            unit(),
            Dist::Uniform { lo: 0.0, hi: 2.0 },
            Dist::ComplementPower { k: 2.0 },
        ];
        let orders: Vec<Vec<usize>> = vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ];
        let mut values = Vec::new();
        for order in orders {
            let s = Scenario::new(
                dists.clone(),
                Externality::Full,
                Mode::Sequential { order: Some(order) },
            )
            .unwrap();
            let (_, b) = grid_optimal_thresholds(&s, 80).unwrap();
            values.push(b.value);
        }
        for v in &values[1..] {
            assert!((v - values[0]).abs() < 1e-7, "{values:?}");
        }
    }

    #[test]
    fn four_agents_are_refused() {
        let s = full_scenario(vec![unit(); 4], Mode::sequential());
        let err = grid_optimal_thresholds(&s, 50).unwrap_err();
        assert!(err.to_string().contains("three agents"));
    }
}
