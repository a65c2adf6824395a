//! Backward-induction solvers for sequential sales, and the inverse map
//! from target thresholds to the prices that induce them.

use super::{margin_threshold, CountTables, EquilibriumReport};
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, revenue_term};
use crate::scenario::{Externality, PriceSchedule, Scenario, ThresholdProfile};

fn require_sequential(s: &Scenario) -> Result<Vec<usize>> {
    if !s.mode.is_sequential() {
        return Err(Error::invalid("sequential solver needs sequential mode"));
    }
    Ok(s.arrival_order())
}

/// Sequential sale with full spillover: only the first purchase matters, so
/// each arrival weighs her price against the chance that someone after her
/// buys anyway.
///
/// Thresholds are per agent and apply while no sale has happened; after a
/// sale everyone keeps full value and never pays.
pub fn solve_seq_full(s: &Scenario, p: &PriceSchedule) -> Result<EquilibriumReport> {
    let order = require_sequential(s)?;
    if !matches!(s.externality, Externality::Full) {
        return Err(Error::invalid("this solver needs the full spillover model"));
    }
    let n = s.n();
    p.validate(n)?;
    let prices = p.as_per_agent(n)?;

    let mut thresholds = vec![0.0; n];
    let mut cont = 1.0; // probability everyone after the current arrival declines
    for &agent in order.iter().rev() {
        let (t, _) = margin_threshold(prices[agent], cont);
        thresholds[agent] = t;
        cont *= s.agents[agent].cdf(t);
    }

    let mut buy_probs = vec![0.0; n];
    let mut before = 1.0; // probability no sale before the current arrival
    let mut terms = Vec::with_capacity(n);
    for &agent in &order {
        let decline = s.agents[agent].cdf(thresholds[agent]);
        buy_probs[agent] = before * (1.0 - decline);
        terms.push(revenue_term(prices[agent], buy_probs[agent]));
        before *= decline;
    }

    let mut report = EquilibriumReport::simple(thresholds, buy_probs, pairwise_sum(&terms));
    report.no_sale_prob = Some(before);
    Ok(report)
}

/// Sequential sale with status spillover and two-tier prices: one price
/// while nothing has sold, another afterwards.
pub fn solve_seq_status(s: &Scenario, p: &PriceSchedule) -> Result<EquilibriumReport> {
    let order = require_sequential(s)?;
    let Externality::Status { w } = &s.externality else {
        return Err(Error::invalid("this solver needs the status model"));
    };
    let n = s.n();
    p.validate(n)?;
    let PriceSchedule::TwoTier { p0, p_pos } = p else {
        return Err(Error::invalid("status sequential sale needs two-tier prices"));
    };

    // After a sale the externality is locked in at w[i], so the threshold is
    // immediate. Before any sale it also depends on whether someone later
    // would buy at the no-sale price.
    let mut t_pos = vec![0.0; n];
    for i in 0..n {
        (t_pos[i], _) = margin_threshold(p_pos[i], 1.0 - w[i]);
    }
    let mut t0 = vec![0.0; n];
    let mut cont = 1.0;
    for &agent in order.iter().rev() {
        let margin = (1.0 - w[agent]) + w[agent] * cont;
        let (t, _) = margin_threshold(p0[agent], margin);
        t0[agent] = t;
        cont *= s.agents[agent].cdf(t);
    }

    let mut buy_probs = vec![0.0; n];
    let mut terms = Vec::with_capacity(2 * n);
    let mut quiet = 1.0; // probability nobody bought before the current arrival
    for &agent in &order {
        let d0 = s.agents[agent].cdf(t0[agent]);
        let d_pos = s.agents[agent].cdf(t_pos[agent]);
        buy_probs[agent] = quiet * (1.0 - d0) + (1.0 - quiet) * (1.0 - d_pos);
        terms.push(revenue_term(p0[agent], quiet * (1.0 - d0)));
        terms.push(revenue_term(p_pos[agent], (1.0 - quiet) * (1.0 - d_pos)));
        quiet *= d0;
    }

    let mut report = EquilibriumReport::simple(vec![], buy_probs, pairwise_sum(&terms));
    report.thresholds = ThresholdProfile::TwoTier { t0, t_pos };
    report.no_sale_prob = Some(quiet);
    Ok(report)
}

/// Sequential sale with availability spillover and count-indexed prices.
///
/// `p[i][j]` is the price facing the i-th arrival when `j` agents have
/// bought. The solver runs a backward pass over (position, count) states
/// computing thresholds and final-count continuation tables, then a forward
/// pass for the state occupancy probabilities and revenue.
pub fn solve_seq_availability(s: &Scenario, p: &PriceSchedule) -> Result<EquilibriumReport> {
    let order = require_sequential(s)?;
    let Externality::Availability { w } = &s.externality else {
        return Err(Error::invalid("this solver needs the availability model"));
    };
    let n = s.n();
    p.validate(n)?;
    let PriceSchedule::CountIndexed { p } = p else {
        return Err(Error::invalid(
            "availability sequential sale needs count-indexed prices",
        ));
    };

    // r[i][j][k]: final buyer count hits k from state (arrival i, count j).
    // Row i = n is the boundary where the count can no longer move.
    let mut r = vec![Vec::new(); n + 1];
    r[n] = (0..=n)
        .map(|j| {
            let mut row = vec![0.0; n + 1];
            row[j] = 1.0;
            row
        })
        .collect();
    let mut t = vec![Vec::new(); n];
    let mut degenerate = false;
    for i in (0..n).rev() {
        let dist = &s.agents[order[i]];
        let mut rows = Vec::with_capacity(i + 1);
        let mut t_row = Vec::with_capacity(i + 1);
        for j in 0..=i {
            // margin: buying now yields certain full value; declining yields
            // the expected availability fraction of the final count among
            // the others.
            let outside: f64 = (j..n).map(|k| w.get(k).copied().unwrap_or(1.0) * r[i + 1][j][k]).sum();
            let (tij, degen) = margin_threshold(p[i][j], 1.0 - outside);
            degenerate |= degen;
            t_row.push(tij);
            let decline = dist.cdf(tij);
            let row: Vec<f64> = (0..=n)
                .map(|k| {
                    decline * r[i + 1][j][k]
                        + (1.0 - decline) * r[i + 1][j + 1][k]
                })
                .collect();
            rows.push(row);
        }
        r[i] = rows;
        t[i] = t_row;
    }

    // forward occupancy: q[i][j] = probability of state (i, j)
    let mut q = vec![Vec::new(); n + 1];
    q[0] = vec![1.0];
    for i in 0..n {
        let dist = &s.agents[order[i]];
        let mut next = vec![0.0; i + 2];
        for j in 0..=i {
            let decline = dist.cdf(t[i][j]);
            next[j] += q[i][j] * decline;
            next[j + 1] += q[i][j] * (1.0 - decline);
        }
        q[i + 1] = next;
    }

    let mut buy_probs = vec![0.0; n];
    let mut terms = Vec::new();
    for i in 0..n {
        let dist = &s.agents[order[i]];
        let mut total = 0.0;
        for j in 0..=i {
            let sale = q[i][j] * (1.0 - dist.cdf(t[i][j]));
            total += sale;
            terms.push(revenue_term(p[i][j], sale));
        }
        buy_probs[order[i]] = total;
    }
    let no_sale: f64 = (0..n).map(|i| s.agents[order[i]].cdf(t[i][0])).product();

    let revenue = pairwise_sum(&terms);
    let mut report = EquilibriumReport::simple(vec![], buy_probs, revenue);
    report.thresholds = ThresholdProfile::CountIndexed { t };
    report.count_tables = Some(CountTables {
        q: q[..n].to_vec(),
        r: r[..n].to_vec(),
    });
    report.no_sale_prob = Some(no_sale);
    report.degenerate = degenerate;
    Ok(report)
}

/// Prices that make given thresholds an equilibrium.
///
/// Supported combinations: full model (both modes), status model in
/// sequential mode with two-tier thresholds, and availability in sequential
/// mode with count-indexed thresholds. The result round-trips through the
/// matching solver.
pub fn thresholds_to_prices(s: &Scenario, t: &ThresholdProfile) -> Result<PriceSchedule> {
    let n = s.n();
    t.validate(n)?;
    match (&s.externality, s.mode.is_sequential(), t) {
        (Externality::Full, false, ThresholdProfile::Simple { t }) => {
            let q: Vec<f64> = (0..n).map(|i| s.agents[i].cdf(t[i])).collect();
            let p = (0..n)
                .map(|i| {
                    let others: f64 = (0..n).filter(|&j| j != i).map(|j| q[j]).product();
                    t[i] * others
                })
                .collect();
            Ok(PriceSchedule::simple(p))
        }
        (Externality::Full, true, ThresholdProfile::Simple { t }) => {
            let order = s.arrival_order();
            let mut p = vec![0.0; n];
            let mut cont = 1.0;
            for &agent in order.iter().rev() {
                p[agent] = t[agent] * cont;
                cont *= s.agents[agent].cdf(t[agent]);
            }
            Ok(PriceSchedule::simple(p))
        }
        (Externality::Status { w }, true, ThresholdProfile::TwoTier { t0, t_pos }) => {
            let order = s.arrival_order();
            let p_pos: Vec<f64> = (0..n).map(|i| (1.0 - w[i]) * t_pos[i]).collect();
            let mut p0 = vec![0.0; n];
            let mut cont = 1.0;
            for &agent in order.iter().rev() {
                p0[agent] = t0[agent] * ((1.0 - w[agent]) + w[agent] * cont);
                cont *= s.agents[agent].cdf(t0[agent]);
            }
            Ok(PriceSchedule::TwoTier { p0, p_pos })
        }
        (Externality::Availability { w }, true, ThresholdProfile::CountIndexed { t }) => {
            let order = s.arrival_order();
            let mut r = vec![Vec::new(); n + 1];
            r[n] = (0..=n)
                .map(|j| {
                    let mut row = vec![0.0; n + 1];
                    row[j] = 1.0;
                    row
                })
                .collect();
            let mut p = vec![Vec::new(); n];
            for i in (0..n).rev() {
                let dist = &s.agents[order[i]];
                let mut rows = Vec::with_capacity(i + 1);
                let mut p_row = Vec::with_capacity(i + 1);
                for j in 0..=i {
                    let outside: f64 = (j..n)
                        .map(|k| w.get(k).copied().unwrap_or(1.0) * r[i + 1][j][k])
                        .sum();
                    let tij = t[i][j];
                    if tij.is_finite() {
                        p_row.push(tij * (1.0 - outside));
                    } else {
                        p_row.push(f64::INFINITY);
                    }
                    let decline = dist.cdf(tij);
                    let row: Vec<f64> = (0..=n)
                        .map(|k| decline * r[i + 1][j][k] + (1.0 - decline) * r[i + 1][j + 1][k])
                        .collect();
                    rows.push(row);
                }
                r[i] = rows;
                p[i] = p_row;
            }
            Ok(PriceSchedule::CountIndexed { p })
        }
        _ => Err(Error::unsupported(
            "no price construction for this model, mode, and threshold shape",
        )),
    }
}
