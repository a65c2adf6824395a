//! Damped best-response iteration for simultaneous sales.

use super::{ExtCtx, EquilibriumReport};
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, revenue_term};
use crate::scenario::{PriceSchedule, Scenario};

/// Solve a simultaneous equilibrium by damped iteration on decline
/// probabilities.
///
/// Works for every externality model. Each round recomputes every agent's
/// best-response threshold against the current decline profile and moves a
/// `damping` fraction of the way there; `damping = 1` is undamped and can
/// oscillate between two best responses, hence the default of one half in
/// the CLI.
///
/// Converges when successive decline profiles differ by at most `tol` in
/// sup norm; otherwise reports the final defect so the caller can fall back
/// to [`super::scan_sim_equilibria`].
pub fn solve_sim_fixed_point(
    s: &Scenario,
    p: &PriceSchedule,
    damping: f64,
    max_iter: usize,
    tol: f64,
) -> Result<EquilibriumReport> {
    if s.mode.is_sequential() {
        return Err(Error::invalid("fixed-point solver needs simultaneous mode"));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::invalid("damping must lie in (0, 1]"));
    }
    let n = s.n();
    p.validate(n)?;
    let prices = p.as_per_agent(n)?;
    let ctx = ExtCtx::new(s);

    // start from the no-externality best responses
    let mut q: Vec<f64> = (0..n)
        .map(|i| s.agents[i].cdf(prices[i]))
        .collect();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let mut diff: f64 = 0.0;
        let target: Vec<f64> = (0..n)
            .map(|i| {
                let e = ctx.expected_fraction(i, &q);
                s.agents[i].cdf(ExtCtx::threshold(prices[i], e))
            })
            .collect();
        for i in 0..n {
            let next = (1.0 - damping) * q[i] + damping * target[i];
            diff = diff.max((next - q[i]).abs());
            q[i] = next;
        }
        if diff <= tol {
            converged = true;
            break;
        }
    }

    let thresholds: Vec<f64> = (0..n)
        .map(|i| ExtCtx::threshold(prices[i], ctx.expected_fraction(i, &q)))
        .collect();
    let residual = ctx.sup_residual(&prices, &thresholds, &q);
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }

    let buy_probs: Vec<f64> = (0..n).map(|i| 1.0 - s.agents[i].cdf(thresholds[i])).collect();
    let revenue = pairwise_sum(
        &(0..n)
            .map(|i| revenue_term(prices[i], buy_probs[i]))
            .collect::<Vec<_>>(),
    );
    let no_sale = q.iter().product();
    let mut report = EquilibriumReport::simple(thresholds, buy_probs, revenue);
    report.no_sale_prob = Some(no_sale);
    report.residual = residual;
    Ok(report)
}
