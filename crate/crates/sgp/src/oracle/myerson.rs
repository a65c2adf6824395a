//! Optimal-auction revenue benchmarks via virtual values.
//!
//! The seller-optimal revenue from selling at most one unit to independent
//! regular agents equals the expected maximum of the positive virtual values;
//! with up to `k` interchangeable units it is the expected sum of the `k`
//! largest positive virtual values. Small instances are integrated by
//! quadrature with a stated error bound, larger ones fall back to seeded
//! Monte Carlo with a reported standard error.

use super::{Benchmark, BenchmarkKind};
use crate::distributions::Dist;
use crate::error::{Error, Result};
use crate::numeric;
use rayon::prelude::*;

const MC_TRIALS: u64 = 10_000_000;
const MC_CHUNK: u64 = 1 << 16;
const MC_SEED: u64 = 0x6d79_6572_736f_6e;

fn require_regular(dists: &[Dist]) -> Result<()> {
    if dists.is_empty() {
        return Err(Error::domain("need at least one agent"));
    }
    for (i, d) in dists.iter().enumerate() {
        d.validate()?;
        if !d.is_regular() {
            return Err(Error::unsupported(format!(
                "agent {i} has an irregular distribution; benchmarks need regularity"
            )));
        }
    }
    Ok(())
}

/// `E[max(floor, phi(v)^+)]` for a single agent, in closed form.
///
/// Splitting the integral at the value where the virtual value crosses
/// `floor` leaves a tail whose antiderivative telescopes to
/// `x (1 - F(x))`, so no quadrature is needed at the innermost level.
fn best_against(d: &Dist, floor: f64) -> f64 {
    let x = d
        .inverse_virtual_value(floor)
        .expect("regularity was checked upfront");
    let u = d.cdf(x);
    floor * u + x * (1.0 - u)
}

/// Expected maximum of positive virtual values by nested quadrature over
/// quantile space, for up to three agents. The innermost expectation is
/// closed-form, so at most two quadrature levels are stacked.
fn max_plus_quadrature(dists: &[Dist]) -> (f64, f64) {
    let phi_plus = |d: &Dist, u: f64| -> f64 {
        let v = d.quantile(u).expect("quadrature stays inside [0, 1]");
        d.virtual_value(v).max(0.0)
    };
    match dists {
        [d0] => (best_against(d0, 0.0), 1e-12),
        [d0, d1] => {
            let mut f = |u: f64| best_against(d1, phi_plus(d0, u));
            (numeric::adaptive_simpson(&mut f, 0.0, 1.0, 1e-11), 1e-9)
        }
        [d0, d1, d2] => {
            let mut outer = |u0: f64| {
                let floor0 = phi_plus(d0, u0);
                let mut inner = |u1: f64| best_against(d2, floor0.max(phi_plus(d1, u1)));
                numeric::adaptive_simpson(&mut inner, 0.0, 1.0, 1e-12)
            };
            (numeric::adaptive_simpson(&mut outer, 0.0, 1.0, 1e-9), 1e-7)
        }
        _ => unreachable!("quadrature route is gated to n <= 3"),
    }
}

/// Probability that each agent's virtual value exceeds `t`, then the expected
/// number of exceedances capped at `k`, via the count distribution.
fn expected_capped_count(dists: &[Dist], k: usize, t: f64) -> f64 {
    let n = dists.len();
    // counts[m] = Pr[exactly m of the processed agents exceed t]
    let mut counts = vec![0.0; n + 1];
    counts[0] = 1.0;
    for (i, d) in dists.iter().enumerate() {
        let x = d
            .inverse_virtual_value(t)
            .expect("regularity was checked upfront");
        let s = 1.0 - d.cdf(x);
        for m in (0..=i).rev() {
            counts[m + 1] += counts[m] * s;
            counts[m] *= 1.0 - s;
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(m, pr)| m.min(k) as f64 * pr)
        .sum()
}

/// Expected sum of the `k` largest positive virtual values as a single
/// integral of the capped exceedance count over the positive axis.
fn top_k_survival(dists: &[Dist], k: usize, tol: f64) -> f64 {
    let t_max = dists
        .iter()
        .map(|d| d.support().1)
        .fold(0.0_f64, f64::max);
    if t_max <= 0.0 {
        return 0.0;
    }
    let mut f = |t: f64| expected_capped_count(dists, k, t);
    numeric::adaptive_simpson(&mut f, 0.0, t_max, tol)
}

/// Monte Carlo estimate of the expected sum of the `k` largest positive
/// virtual values. Returns `(mean, stderr)`. Deterministic for a fixed agent
/// list: the stream is indexed by `(trial, agent)`, chunks are fixed-size, and
/// chunk results are combined in order, so worker count cannot change the
/// result.
fn top_k_monte_carlo(dists: &[Dist], k: usize) -> (f64, f64) {
    let n_chunks = MC_TRIALS.div_ceil(MC_CHUNK);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * MC_CHUNK;
            let hi = (lo + MC_CHUNK).min(MC_TRIALS);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut tops: Vec<f64> = Vec::with_capacity(dists.len());
            for trial in lo..hi {
                tops.clear();
                for (lane, d) in dists.iter().enumerate() {
                    let u = numeric::unit_open(numeric::mix3(MC_SEED, trial, lane as u64));
                    let v = d.quantile(u).expect("unit_open stays inside [0, 1]");
                    let phi = d.virtual_value(v);
                    if phi > 0.0 {
                        tops.push(phi);
                    }
                }
                tops.sort_by(|a, b| b.partial_cmp(a).expect("virtual values are not NaN"));
                let x: f64 = tops.iter().take(k).sum();
                sum += x;
                sumsq += x * x;
            }
            (sum, sumsq)
        })
        .collect();
    let (sum, sumsq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, q), (cs, cq)| (s + cs, q + cq));
    let nf = MC_TRIALS as f64;
    let mean = sum / nf;
    let var = (sumsq / nf - mean * mean).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Optimal single-unit revenue benchmark: the expected maximum of the
/// positive virtual values.
///
/// Up to three agents are integrated by nested adaptive quadrature over
/// quantile space; more agents fall back to a ten-million-sample Monte Carlo
/// run whose standard error is reported as the benchmark error.
pub fn myerson_revenue(dists: &[Dist]) -> Result<Benchmark> {
    require_regular(dists)?;
    let (value, error, method) = if dists.len() <= 3 {
        let (v, e) = max_plus_quadrature(dists);
        (v, e, "nested adaptive quadrature over quantile space".into())
    } else {
        let (v, se) = top_k_monte_carlo(dists, 1);
        (
            v,
            4.0 * se,
            format!("Monte Carlo, {MC_TRIALS} samples, stderr {se:.2e}"),
        )
    };
    Ok(Benchmark {
        kind: BenchmarkKind::Myer,
        value,
        method,
        error,
    })
}

/// Optimal `k`-unit revenue benchmark: the expected sum of the `k` largest
/// positive virtual values.
///
/// Up to three agents use quadrature on the capped exceedance count; more
/// agents fall back to seeded Monte Carlo with the standard error reported.
pub fn myerson_k_uniform(dists: &[Dist], k: usize) -> Result<Benchmark> {
    require_regular(dists)?;
    if k == 0 || k > dists.len() {
        return Err(Error::domain(format!(
            "unit count {k} outside 1..={}",
            dists.len()
        )));
    }
    let (value, error, method) = if dists.len() <= 3 {
        (
            top_k_survival(dists, k, 1e-11),
            1e-9,
            "adaptive quadrature on the capped exceedance count".into(),
        )
    } else {
        let (v, se) = top_k_monte_carlo(dists, k);
        (
            v,
            4.0 * se,
            format!("Monte Carlo, {MC_TRIALS} samples, stderr {se:.2e}"),
        )
    };
    Ok(Benchmark {
        kind: BenchmarkKind::MyerK { k },
        value,
        method,
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Dist {
        Dist::Uniform { lo: 0.0, hi: 1.0 }
    }

    #[test]
    fn single_agent_reduces_to_the_monopoly_revenue() {
        let b = myerson_revenue(&[unit()]).unwrap();
        assert!((b.value - 0.25).abs() < 1e-10, "{}", b.value);

        let d = Dist::ComplementPower { k: 2.0 };
        let b = myerson_revenue(&[d.clone()]).unwrap();
        assert!((b.value - d.monopoly().1).abs() < 1e-9, "{}", b.value);
    }

    #[test]
    fn two_and_three_uniform_agents_match_exact_integrals() {
        let b2 = myerson_revenue(&[unit(), unit()]).unwrap();
        assert!((b2.value - 5.0 / 12.0).abs() < 1e-8, "{}", b2.value);

        let b3 = myerson_revenue(&[unit(), unit(), unit()]).unwrap();
        assert!((b3.value - 17.0 / 32.0).abs() < 1e-7, "{}", b3.value);
    }

    #[test]
    fn quadrature_and_survival_routes_agree() {
        let cases: Vec<Vec<Dist>> = vec![
            vec![unit(), Dist::Uniform { lo: 0.5, hi: 2.0 }],
            vec![
                unit(),
                Dist::ComplementPower { k: 2.0 },
                Dist::Uniform { lo: 0.2, hi: 1.3 },
            ],
        ];
        for dists in cases {
            let nested = myerson_revenue(&dists).unwrap().value;
            let survival = top_k_survival(&dists, 1, 1e-11);
            assert!(
                (nested - survival).abs() < 1e-7,
                "nested {nested} vs survival {survival}"
            );
        }
    }

    #[test]
    fn monte_carlo_sits_within_four_stderr_of_quadrature() {
        let dists = vec![unit(), unit(), Dist::Uniform { lo: 0.0, hi: 2.0 }];
        let exact = myerson_revenue(&dists).unwrap().value;
        let (mc, se) = top_k_monte_carlo(&dists, 1);
        assert!((mc - exact).abs() < 4.0 * se, "mc {mc} exact {exact} se {se}");
    }

    #[test]
    fn all_units_for_iid_uniform_agents_sell_at_the_monopoly_rate() {
        for n in 1..=3usize {
            let dists = vec![unit(); n];
            let b = myerson_k_uniform(&dists, n).unwrap();
            assert!(
                (b.value - 0.25 * n as f64).abs() < 1e-8,
                "n={n}: {}",
                b.value
            );
        }
    }

    #[test]
    fn one_unit_matches_the_single_item_benchmark() {
        let dists = vec![unit(), Dist::Uniform { lo: 0.3, hi: 1.7 }];
        let single = myerson_revenue(&dists).unwrap().value;
        let k1 = myerson_k_uniform(&dists, 1).unwrap().value;
        assert!((single - k1).abs() < 1e-8, "{single} vs {k1}");
    }

    #[test]
    fn monte_carlo_route_is_used_above_three_agents() {
        let dists = vec![unit(); 4];
        let b = myerson_revenue(&dists).unwrap();
        assert!(b.method.contains("Monte Carlo"));
        // E[max phi+] for four iid unit uniforms: 1 - E[((1+t)/2)^4] on [0,1]
        // integrates to 1 - 31/80.
        let exact = 1.0 - 31.0 / 80.0;
        assert!((b.value - exact).abs() < b.error, "{} vs {exact}", b.value);
        assert!(b.error < 1e-2);
    }

    #[test]
    fn unit_count_outside_the_agent_range_is_rejected() {
        assert!(myerson_k_uniform(&[unit()], 0).is_err());
        assert!(myerson_k_uniform(&[unit()], 2).is_err());
    }
}
