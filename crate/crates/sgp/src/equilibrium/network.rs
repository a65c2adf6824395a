//! Constructed equilibria for graph spillovers, where an agent enjoys the
//! good exactly when a neighbor owns it.

use super::EquilibriumReport;
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, revenue_term};
use crate::distributions::Dist;
use crate::scenario::{PriceSchedule, Scenario};

/// Outcome of the deterministic sequential sale on a graph.
#[derive(Debug, Clone)]
pub struct FixedValueOutcome {
    /// Agents who buy, ascending.
    pub support: Vec<usize>,
    pub revenue: f64,
}

fn require_network(s: &Scenario) -> Result<Vec<Vec<usize>>> {
    if !matches!(
        s.externality,
        crate::scenario::Externality::Network { .. }
    ) {
        return Err(Error::invalid("this solver needs the network model"));
    }
    Ok(s.neighbors())
}

/// Greedy simultaneous equilibrium on a graph with uniform values on [0, 1].
///
/// Agents are visited by ascending price (lower index first on ties) and
/// admitted to the buyer set when no neighbor is already in it. Buyers use
/// their price as threshold; everyone else is priced out exactly because
/// some cheaper neighbor buys. The constructed profile satisfies each
/// agent's fixed-point condition with zero defect.
pub fn solve_network_sim_greedy(s: &Scenario, p: &PriceSchedule) -> Result<EquilibriumReport> {
    let neighbors = require_network(s)?;
    if s.mode.is_sequential() {
        return Err(Error::invalid("greedy construction needs simultaneous mode"));
    }
    let n = s.n();
    p.validate(n)?;
    let prices = p.as_per_agent(n)?;
    for (i, d) in s.agents.iter().enumerate() {
        if *d != Dist::uniform(0.0, 1.0)? {
            return Err(Error::domain(format!(
                "greedy construction needs uniform [0,1] values (agent {i})"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| prices[a].partial_cmp(&prices[b]).unwrap().then(a.cmp(&b)));
    let mut in_set = vec![false; n];
    let mut support = Vec::new();
    for &i in &order {
        if prices[i] < 1.0 && !neighbors[i].iter().any(|&j| in_set[j]) {
            in_set[i] = true;
            support.push(i);
        }
    }
    support.sort_unstable();

    // buyers stand at their price; a bystander would need her price divided
    // by her buying neighbors' decline odds, which lands at or above the top
    // of support
    let thresholds: Vec<f64> = (0..n)
        .map(|i| {
            if in_set[i] {
                prices[i]
            } else {
                let odds: f64 = neighbors[i]
                    .iter()
                    .filter(|&&j| in_set[j])
                    .map(|&j| prices[j])
                    .product();
                if odds > 0.0 {
                    prices[i] / odds
                } else if prices[i] > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        })
        .collect();

    let buy_probs: Vec<f64> = (0..n)
        .map(|i| if in_set[i] { 1.0 - prices[i] } else { 0.0 })
        .collect();
    let revenue = pairwise_sum(
        &(0..n)
            .map(|i| revenue_term(prices[i], buy_probs[i]))
            .collect::<Vec<_>>(),
    );

    // defect of the equilibrium condition p_i = T_i * prod of neighbor
    // declines, checked on the constructed profile
    let q: Vec<f64> = (0..n).map(|i| s.agents[i].cdf(thresholds[i])).collect();
    let mut residual: f64 = 0.0;
    for i in 0..n {
        let prod: f64 = neighbors[i].iter().map(|&j| q[j]).product();
        let r = if thresholds[i].is_finite() {
            (thresholds[i] * prod - prices[i]).abs()
        } else {
            (prod - prices[i]).max(0.0)
        };
        residual = residual.max(r);
    }

    let no_sale: f64 = q.iter().product();
    let mut report = EquilibriumReport::simple(thresholds, buy_probs, revenue);
    report.no_sale_prob = Some(no_sale);
    report.residual = residual;
    report.support = Some(support);
    Ok(report)
}

/// Deterministic sequential sale on a graph where every value is exactly 1.
///
/// Arrivals are resolved from the last mover backwards: an agent buys when
/// her price is below 1 and no later buyer neighbors her, which is the
/// subgame-perfect outcome. Prices equal to 1 are rejected because the
/// indifferent tie has no canonical resolution.
pub fn solve_network_seq_fixed_values(
    s: &Scenario,
    p: &PriceSchedule,
) -> Result<FixedValueOutcome> {
    let neighbors = require_network(s)?;
    if !s.mode.is_sequential() {
        return Err(Error::invalid("this construction needs sequential mode"));
    }
    let n = s.n();
    p.validate(n)?;
    let prices = p.as_per_agent(n)?;
    if prices.iter().any(|&x| x == 1.0) {
        return Err(Error::domain(
            "prices equal to 1 leave the buyer indifferent; perturb them",
        ));
    }

    let order = s.arrival_order();
    let mut in_set = vec![false; n];
    for &agent in order.iter().rev() {
        if prices[agent] < 1.0 && !neighbors[agent].iter().any(|&j| in_set[j]) {
            in_set[agent] = true;
        }
    }
    let support: Vec<usize> = (0..n).filter(|&i| in_set[i]).collect();
    let revenue = support.iter().map(|&i| prices[i]).sum();
    Ok(FixedValueOutcome { support, revenue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Externality, Mode};

    fn net(n: usize, edges: Vec<(usize, usize)>, mode: Mode) -> Scenario {
        Scenario::new(
            vec![Dist::uniform(0.0, 1.0).unwrap(); n],
            Externality::Network { edges },
            mode,
        )
        .unwrap()
    }

    #[test]
    fn four_cycle_alternates() {
        let s = net(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)], Mode::Simultaneous);
        let r = solve_network_sim_greedy(&s, &PriceSchedule::Anonymous { p: 0.5 }).unwrap();
        assert_eq!(r.support.as_deref(), Some(&[0, 2][..]));
        assert!((r.revenue - 0.5).abs() < 1e-12);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn triangle_keeps_only_the_cheapest() {
        let s = net(3, vec![(0, 1), (1, 2), (0, 2)], Mode::Simultaneous);
        let r =
            solve_network_sim_greedy(&s, &PriceSchedule::simple(vec![0.2, 0.5, 0.9])).unwrap();
        assert_eq!(r.support.as_deref(), Some(&[0][..]));
        assert!((r.revenue - 0.16).abs() < 1e-12);
        assert!(r.residual < 1e-12);
        let t = r.thresholds.as_simple().unwrap();
        assert!((t[1] - 2.5).abs() < 1e-12);
        assert!(t[1] >= 1.0 && t[2] >= 1.0);
    }

    #[test]
    fn edgeless_graph_sells_to_everyone() {
        let s = net(3, vec![], Mode::Simultaneous);
        let r = solve_network_sim_greedy(&s, &PriceSchedule::Anonymous { p: 0.5 }).unwrap();
        assert_eq!(r.support.as_deref(), Some(&[0, 1, 2][..]));
        assert!((r.revenue - 0.75).abs() < 1e-12);
    }

    #[test]
    fn fixed_value_path_buys_both_ends() {
        let s = net(3, vec![(0, 1), (1, 2)], Mode::sequential());
        let out =
            solve_network_seq_fixed_values(&s, &PriceSchedule::simple(vec![0.9, 0.1, 0.9]))
                .unwrap();
        assert_eq!(out.support, vec![0, 2]);
        assert!((out.revenue - 1.8).abs() < 1e-12);
    }

    #[test]
    fn fixed_value_edge_cases() {
        let s = net(3, vec![(0, 1), (1, 2)], Mode::sequential());
        let all_out =
            solve_network_seq_fixed_values(&s, &PriceSchedule::simple(vec![1.5, 1.2, 1.1]))
                .unwrap();
        assert!(all_out.support.is_empty());
        assert_eq!(all_out.revenue, 0.0);

        let edgeless = net(3, vec![], Mode::sequential());
        let everyone =
            solve_network_seq_fixed_values(&edgeless, &PriceSchedule::Anonymous { p: 0.5 })
                .unwrap();
        assert_eq!(everyone.support, vec![0, 1, 2]);

        let err = solve_network_seq_fixed_values(&s, &PriceSchedule::simple(vec![1.0, 0.5, 0.5]));
        assert!(err.is_err());
    }
}
