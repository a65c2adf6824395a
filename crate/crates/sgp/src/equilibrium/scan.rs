//! Enumeration of simultaneous equilibria for the full and status models.
//!
//! Fixed-point iteration finds one equilibrium; pessimistic revenue
//! guarantees need them all. Writing `P` for the probability that nobody
//! buys, each agent's condition becomes a scalar equation in her threshold
//! with `P` as the only coupling, so the solver sweeps a fine grid of `P`
//! values, collects each agent's candidate thresholds, keeps combinations
//! whose decline probabilities multiply back to `P`, and polishes survivors
//! with a Newton step on the full system.
//!
//! Linear CDF pieces proportional to the value make an agent's equation
//! vanish identically at one special `P`; every threshold on the piece then
//! works, and joint solutions form a continuum. Those are detected at the
//! special values and reported as flagged intervals with exact revenue
//! extremes (a vertex scan for the infimum, water-filling for the
//! supremum). Equilibria where some agent buys outright (price at or below
//! her lowest possible value) have `P = 0` and are found by a separate
//! closed-form pass.

use super::{margin_threshold, EquilibriumReport, ExtCtx};
use crate::distributions::Dist;
use crate::error::{Error, Result};
use crate::numeric::{bisect, pairwise_sum, revenue_term, solve_linear};
use crate::scenario::{Externality, PriceSchedule, Scenario};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;

/// Tolerance for accepting a polished equilibrium, applied to the defect of
/// the threshold conditions.
const RESIDUAL_GATE: f64 = 1e-9;
/// Consistency window (multiples of the grid step) for sending a candidate
/// combination to the Newton polish.
const WINDOW_STEPS: f64 = 64.0;

/// A connected set of equilibria sharing one no-sale probability.
///
/// `worst` and `best` are genuine members attaining the revenue infimum and
/// supremum over the set.
#[derive(Debug, Clone, Serialize)]
pub struct Continuum {
    /// Probability that nobody buys, constant across the set.
    pub no_sale_prob: f64,
    /// Agents whose threshold ranges freely over a linear piece.
    pub free_agents: Vec<usize>,
    pub worst: EquilibriumReport,
    pub best: EquilibriumReport,
}

/// Everything the scan found: isolated equilibria plus continua.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub isolated: Vec<EquilibriumReport>,
    pub continua: Vec<Continuum>,
}

impl ScanReport {
    /// All reports, continuum extremes included.
    pub fn reports(&self) -> impl Iterator<Item = &EquilibriumReport> {
        self.isolated.iter().chain(
            self.continua
                .iter()
                .flat_map(|c| [&c.worst, &c.best]),
        )
    }

    /// The equilibrium with the lowest revenue (continuum infima included).
    pub fn worst(&self) -> &EquilibriumReport {
        self.reports()
            .min_by(|a, b| a.revenue.partial_cmp(&b.revenue).unwrap())
            .expect("scan reports are never empty")
    }

    /// The equilibrium with the highest revenue.
    pub fn best(&self) -> &EquilibriumReport {
        self.reports()
            .max_by(|a, b| a.revenue.partial_cmp(&b.revenue).unwrap())
            .expect("scan reports are never empty")
    }

    pub fn is_empty(&self) -> bool {
        self.isolated.is_empty() && self.continua.is_empty()
    }
}

/// One linear CDF piece `F(v) = a + b v` on `[v0, v1]`.
#[derive(Debug, Clone, Copy)]
struct Seg {
    v0: f64,
    v1: f64,
    a: f64,
    b: f64,
}

/// Per-agent scan state: price, weight, support, and either exact linear
/// pieces or a tabulated version of the root function.
struct AgentScan {
    p: f64,
    w: f64,
    hi: f64,
    segs: Option<Vec<Seg>>,
    /// `g(t) = base + P * slope` sampled on `ts`; roots of `g` are
    /// candidate thresholds.
    table: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// Special `P` where a linear piece makes the equation vanish: `(P*,
    /// segment index)`.
    specials: Vec<(f64, usize)>,
}

/// The value of the (multiplied-through) equilibrium condition whose roots
/// are candidate thresholds: `t (1-w) F(t) + w t P - p F(t)`.
fn g_value(d: &Dist, w: f64, p: f64, t: f64, big_p: f64) -> f64 {
    let f = d.cdf(t);
    t * (1.0 - w) * f + w * t * big_p - p * f
}

fn linear_segments(d: &Dist) -> Option<Vec<Seg>> {
    match d {
        Dist::Uniform { lo, hi } => {
            let b = 1.0 / (hi - lo);
            Some(vec![Seg {
                v0: *lo,
                v1: *hi,
                a: -lo * b,
                b,
            }])
        }
        Dist::Piecewise { points } => Some(
            points
                .windows(2)
                .map(|pair| {
                    let (v0, f0) = pair[0];
                    let (v1, f1) = pair[1];
                    let b = (f1 - f0) / (v1 - v0);
                    Seg {
                        v0,
                        v1,
                        a: f0 - b * v0,
                        b,
                    }
                })
                .collect(),
        ),
        Dist::ShiftedPower { ell, eps } if *ell == 1.0 => {
            let m = 1.0 + eps;
            Some(vec![Seg {
                v0: 0.0,
                v1: m,
                a: 0.0,
                b: 1.0 / m,
            }])
        }
        Dist::ComplementPower { k } if *k == 1.0 => Some(vec![Seg {
            v0: 0.0,
            v1: 1.0,
            a: 0.0,
            b: 1.0,
        }]),
        _ => None,
    }
}

impl AgentScan {
    fn new(d: &Dist, w: f64, p: f64) -> Self {
        let (lo, hi) = d.support();
        if !p.is_finite() {
            // an unreachable price admits only the never-buy decision
            return AgentScan {
                p,
                w,
                hi,
                segs: None,
                table: None,
                specials: Vec::new(),
            };
        }
        let segs = linear_segments(d);
        let mut specials = Vec::new();
        if let Some(segs) = &segs {
            if w == 1.0 && p > 0.0 {
                for (k, seg) in segs.iter().enumerate() {
                    if seg.a == 0.0 {
                        let star = p * seg.b;
                        if star > 0.0 && star <= 1.0 {
                            specials.push((star, k));
                        }
                    }
                }
            }
        }
        let table = if segs.is_none() {
            // g is linear in P, so tabulate its two coefficients once
            const POINTS: usize = 1024;
            let ts: Vec<f64> = (0..=POINTS)
                .map(|k| lo + (hi - lo) * k as f64 / POINTS as f64)
                .collect();
            let base: Vec<f64> = ts
                .iter()
                .map(|&t| {
                    let f = d.cdf(t);
                    t * (1.0 - w) * f - p * f
                })
                .collect();
            let slope: Vec<f64> = ts.iter().map(|&t| w * t).collect();
            Some((ts, base, slope))
        } else {
            None
        };
        AgentScan {
            p,
            w,
            hi,
            segs,
            table,
            specials,
        }
    }

    /// No-buy threshold at aggregate `P`, if it clears the support.
    fn no_buy(&self, big_p: f64) -> Option<f64> {
        let margin = (1.0 - self.w) + self.w * big_p;
        let (t, _) = margin_threshold(self.p, margin);
        if t >= self.hi * (1.0 - 1e-12) {
            Some(t.max(self.hi))
        } else {
            None
        }
    }
}

/// One candidate decision for an agent at a given aggregate `P`: a point
/// threshold or a free piece.
#[derive(Debug, Clone, Copy)]
enum Opt {
    Point { q: f64 },
    Free { q_lo: f64, q_hi: f64, b: f64 },
}

impl Opt {
    fn q_range(&self) -> (f64, f64) {
        match *self {
            Opt::Point { q, .. } => (q, q),
            Opt::Free { q_lo, q_hi, .. } => (q_lo, q_hi),
        }
    }
}

/// All candidate decisions for one agent at aggregate `P`.
fn agent_options(a: &AgentScan, d: &Dist, big_p: f64, q_floor: f64) -> Vec<Opt> {
    let mut opts = Vec::new();
    let mut frees: Vec<(f64, f64, f64)> = Vec::new();
    if let Some(segs) = &a.segs {
        for (k, seg) in segs.iter().enumerate() {
            if a
                .specials
                .iter()
                .any(|&(star, ks)| ks == k && (big_p - star).abs() <= 1e-12 * (1.0 + star))
            {
                let q_lo = (seg.a + seg.b * seg.v0).clamp(0.0, 1.0);
                let q_hi = (seg.a + seg.b * seg.v1).clamp(0.0, 1.0);
                frees.push((q_lo, q_hi, seg.b));
                continue;
            }
            // g on the segment is the quadratic alpha t^2 + beta t + gamma
            let alpha = (1.0 - a.w) * seg.b;
            let beta = (1.0 - a.w) * seg.a + a.w * big_p - a.p * seg.b;
            let gamma = -a.p * seg.a;
            let vtol = 1e-12 * (1.0 + seg.v1.abs());
            let mut push = |t: f64| {
                if t >= seg.v0 - vtol && t <= seg.v1 + vtol {
                    let tc = t.clamp(seg.v0, seg.v1);
                    let q = (seg.a + seg.b * tc).clamp(0.0, 1.0);
                    opts.push(Opt::Point { q });
                }
            };
            if alpha.abs() <= 1e-14 * (beta.abs() + gamma.abs()) {
                if beta.abs() > 0.0 {
                    push(-gamma / beta);
                }
            } else {
                let disc = beta * beta - 4.0 * alpha * gamma;
                if disc >= 0.0 {
                    let root = disc.sqrt();
                    let qq = -0.5 * (beta + beta.signum() * root);
                    push(qq / alpha);
                    if qq.abs() > 0.0 {
                        push(gamma / qq);
                    }
                }
            }
        }
    } else if let Some((ts, base, slope)) = &a.table {
        let mut prev = base[0] + big_p * slope[0];
        for k in 1..ts.len() {
            let cur = base[k] + big_p * slope[k];
            if prev == 0.0 || (prev < 0.0) != (cur < 0.0) {
                let t = bisect(|t| g_value(d, a.w, a.p, t, big_p), ts[k - 1], ts[k]);
                opts.push(Opt::Point { q: d.cdf(t) });
            }
            prev = cur;
        }
        if prev == 0.0 {
            opts.push(Opt::Point { q: 1.0 });
        }
    }
    if a.no_buy(big_p).is_some() {
        opts.push(Opt::Point { q: 1.0 });
    }

    // prune: a zero decline probability forces a zero aggregate (that case
    // lives in the sure-buyer pass), every decline probability must reach
    // the target product, and a point inside a free piece is already part
    // of the continuum
    opts.retain(|o| match o {
        Opt::Point { q, .. } => {
            *q > 0.0
                && *q >= q_floor
                && !frees
                    .iter()
                    .any(|&(ql, qh, _)| *q >= ql - 1e-9 && *q <= qh + 1e-9)
        }
        Opt::Free { .. } => true,
    });
    opts.sort_by(|x, y| x.q_range().0.partial_cmp(&y.q_range().0).unwrap());
    opts.dedup_by(|x, y| match (&*x, &*y) {
        (Opt::Point { q: qx, .. }, Opt::Point { q: qy, .. }) => (qx - qy).abs() <= 1e-10,
        _ => false,
    });
    for (q_lo, q_hi, b) in frees {
        if q_hi >= q_floor {
            opts.push(Opt::Free {
                q_lo: q_lo.max(0.0),
                q_hi,
                b,
            });
        }
    }
    opts
}

/// Depth-first enumeration of option combinations whose decline product can
/// land in the window around `target`.
fn enumerate_selections(
    options: &[Vec<Opt>],
    target: f64,
    window: f64,
    out: &mut Vec<Vec<usize>>,
) {
    let n = options.len();
    let mut suffix_lo = vec![1.0; n + 1];
    let mut suffix_hi = vec![1.0; n + 1];
    for i in (0..n).rev() {
        let (mut mn, mut mx) = (f64::INFINITY, 0.0f64);
        for o in &options[i] {
            let (l, h) = o.q_range();
            mn = mn.min(l);
            mx = mx.max(h);
        }
        if options[i].is_empty() {
            return; // some agent has no consistent decision
        }
        suffix_lo[i] = suffix_lo[i + 1] * mn;
        suffix_hi[i] = suffix_hi[i + 1] * mx;
    }
    let mut current = Vec::with_capacity(n);
    fn rec(
        options: &[Vec<Opt>],
        idx: usize,
        lo: f64,
        hi: f64,
        suffix_lo: &[f64],
        suffix_hi: &[f64],
        target: f64,
        window: f64,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if out.len() >= 4096 {
            return;
        }
        if hi * suffix_hi[idx] < target - window || lo * suffix_lo[idx] > target + window {
            return;
        }
        if idx == options.len() {
            out.push(current.clone());
            return;
        }
        for (k, o) in options[idx].iter().enumerate() {
            let (ql, qh) = o.q_range();
            current.push(k);
            rec(
                options,
                idx + 1,
                lo * ql,
                hi * qh,
                suffix_lo,
                suffix_hi,
                target,
                window,
                current,
                out,
            );
            current.pop();
        }
    }
    rec(
        options,
        0,
        1.0,
        1.0,
        &suffix_lo,
        &suffix_hi,
        target,
        window,
        &mut current,
        out,
    );
}

/// Reconstruct a full report from decline probabilities, verifying the
/// threshold conditions from scratch. `None` when the profile fails the
/// residual gate.
fn report_from_q(s: &Scenario, w: &[f64], prices: &[f64], q: &[f64]) -> Option<EquilibriumReport> {
    let n = q.len();
    let thresholds: Vec<f64> = (0..n)
        .map(|i| {
            let others: f64 = (0..n).filter(|&j| j != i).map(|j| q[j]).product();
            let margin = (1.0 - w[i]) + w[i] * others;
            margin_threshold(prices[i], margin).0
        })
        .collect();
    // dual route: recompute decline probabilities from the thresholds
    let q_check: Vec<f64> = (0..n).map(|i| s.agents[i].cdf(thresholds[i])).collect();
    for i in 0..n {
        if (q_check[i] - q[i]).abs() > 1e-8 {
            return None;
        }
    }
    let ctx = ExtCtx::new(s);
    let residual = ctx.sup_residual(prices, &thresholds, &q_check);
    if residual > RESIDUAL_GATE {
        return None;
    }
    let buy_probs: Vec<f64> = q.iter().map(|x| 1.0 - x).collect();
    let revenue = pairwise_sum(
        &(0..n)
            .map(|i| revenue_term(prices[i], buy_probs[i]))
            .collect::<Vec<_>>(),
    );
    let mut report = EquilibriumReport::simple(thresholds, buy_probs, revenue);
    report.no_sale_prob = Some(q.iter().product());
    report.residual = residual;
    Some(report)
}

/// Newton refinement of the decline profile on its non-frozen coordinates.
fn newton_polish(
    dists: &[Dist],
    w: &[f64],
    prices: &[f64],
    mut q: Vec<f64>,
    frozen: &[bool],
) -> Option<Vec<f64>> {
    let idx: Vec<usize> = (0..q.len()).filter(|&i| !frozen[i]).collect();
    if idx.is_empty() {
        return Some(q);
    }
    let defect = |q: &[f64]| -> Vec<f64> {
        idx.iter()
            .map(|&i| {
                let others: f64 = (0..q.len()).filter(|&j| j != i).map(|j| q[j]).product();
                let margin = (1.0 - w[i]) + w[i] * others;
                q[i] - dists[i].cdf(margin_threshold(prices[i], margin).0)
            })
            .collect()
    };
    let sup = |h: &[f64]| h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for _ in 0..60 {
        let h0 = defect(&q);
        if sup(&h0) <= 1e-13 {
            return Some(q);
        }
        let d = idx.len();
        let mut jac = vec![vec![0.0; d]; d];
        let step = 1e-7;
        for (c, &jc) in idx.iter().enumerate() {
            let keep = q[jc];
            q[jc] = (keep + step).min(1.0);
            let hp = defect(&q);
            q[jc] = (keep - step).max(0.0);
            let hm = defect(&q);
            q[jc] = keep;
            let denom = 2.0 * step;
            for r in 0..d {
                jac[r][c] = (hp[r] - hm[r]) / denom;
            }
        }
        let neg: Vec<f64> = h0.iter().map(|x| -x).collect();
        let delta = solve_linear(&jac, &neg)?;
        let mut improved = false;
        let mut scale = 1.0;
        for _ in 0..6 {
            let mut trial = q.clone();
            for (c, &jc) in idx.iter().enumerate() {
                trial[jc] = (q[jc] + scale * delta[c]).clamp(1e-12, 1.0 - 1e-12);
            }
            if sup(&defect(&trial)) < sup(&h0) {
                q = trial;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    None
}

/// Closed-form equilibria where at least one agent buys outright, so the
/// no-sale probability is exactly zero.
fn sure_buyer_pass(s: &Scenario, w: &[f64], prices: &[f64]) -> Vec<Vec<f64>> {
    let n = s.n();
    // threshold when somebody else certainly buys
    let t_locked: Vec<f64> = (0..n)
        .map(|i| margin_threshold(prices[i], 1.0 - w[i]).0)
        .collect();
    let q_locked: Vec<f64> = (0..n).map(|i| s.agents[i].cdf(t_locked[i])).collect();
    let mut found = Vec::new();
    let sure: Vec<usize> = (0..n).filter(|&i| q_locked[i] <= 0.0).collect();
    if sure.len() >= 2 {
        found.push(q_locked.clone());
    }
    // a lone outright buyer: everyone else is locked by her purchase, and
    // her own threshold must still fall below her whole support
    for k in 0..n {
        let others: f64 = (0..n).filter(|&j| j != k).map(|j| q_locked[j]).product();
        if others <= 0.0 {
            continue; // another sure buyer exists; covered above
        }
        let margin = (1.0 - w[k]) + w[k] * others;
        let t_k = margin_threshold(prices[k], margin).0;
        if s.agents[k].cdf(t_k) <= 0.0 {
            let mut q = q_locked.clone();
            q[k] = 0.0;
            found.push(q);
        }
    }
    found
}

/// What one grid candidate produced, in deterministic order.
enum Found {
    Isolated(Vec<f64>),
    Continuum {
        no_sale: f64,
        free: Vec<(usize, f64, f64, f64)>, // agent, q_lo, q_hi, slope
        fixed_q: Vec<f64>,                 // full vector; free slots hold 1.0
    },
}

/// Revenue extremes of `sum p_i (1 - q_i)` over the box-constrained product
/// manifold `prod q_i = target`. Returns the two attaining profiles
/// (worst first).
fn continuum_extremes(
    free: &[(usize, f64, f64, f64)],
    prices: &[f64],
    target: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let f = free.len();
    let lo_prod: f64 = free.iter().map(|x| x.1).product();
    let hi_prod: f64 = free.iter().map(|x| x.2).product();
    if target < lo_prod * (1.0 - 1e-9) - 1e-12 || target > hi_prod * (1.0 + 1e-9) + 1e-12 {
        return None;
    }
    // worst revenue: maximize sum p q. The maximum of a linear functional
    // on this manifold puts every coordinate but one at a box endpoint.
    let mut best_lin = f64::NEG_INFINITY;
    let mut worst_q: Option<Vec<f64>> = None;
    for free_idx in 0..f {
        for mask in 0u64..(1 << (f - 1)) {
            let mut q = vec![0.0; f];
            let mut prod = 1.0;
            let mut bit = 0;
            for j in 0..f {
                if j == free_idx {
                    continue;
                }
                let (_, ql, qh, _) = free[j];
                let v = if mask & (1 << bit) != 0 { qh } else { ql };
                bit += 1;
                q[j] = v;
                prod *= v;
            }
            if prod <= 0.0 {
                continue;
            }
            let rem = target / prod;
            let (_, ql, qh, _) = free[free_idx];
            if rem < ql - 1e-9 || rem > qh + 1e-9 {
                continue;
            }
            q[free_idx] = rem.clamp(ql, qh);
            let lin: f64 = (0..f).map(|j| prices[free[j].0] * q[j]).sum();
            if lin > best_lin {
                best_lin = lin;
                worst_q = Some(q);
            }
        }
    }
    let worst_q = worst_q?;

    // best revenue: minimize sum p q by water-filling q_i = lambda / p_i,
    // clamped to the box; the product is monotone in lambda.
    let prod_at = |lambda: f64| -> f64 {
        free.iter()
            .map(|&(agent, ql, qh, _)| {
                if prices[agent] > 0.0 {
                    (lambda / prices[agent]).clamp(ql, qh)
                } else {
                    qh
                }
            })
            .product()
    };
    let mut lam_hi = 1.0;
    for _ in 0..200 {
        if prod_at(lam_hi) >= target {
            break;
        }
        lam_hi *= 2.0;
    }
    let lambda = bisect(|l| prod_at(l) - target, 0.0, lam_hi);
    let best_q: Vec<f64> = free
        .iter()
        .map(|&(agent, ql, qh, _)| {
            if prices[agent] > 0.0 {
                (lambda / prices[agent]).clamp(ql, qh)
            } else {
                qh
            }
        })
        .collect();
    Some((worst_q, best_q))
}

fn process_candidate(
    s: &Scenario,
    agents: &[AgentScan],
    w: &[f64],
    prices: &[f64],
    big_p: f64,
    window: f64,
) -> Vec<Found> {
    let n = agents.len();
    let q_floor = (big_p - window).max(0.0);
    let options: Vec<Vec<Opt>> = (0..n)
        .map(|i| agent_options(&agents[i], &s.agents[i], big_p, q_floor))
        .collect();
    let mut selections = Vec::new();
    enumerate_selections(&options, big_p, window, &mut selections);
    let mut out = Vec::new();
    for sel in selections {
        let mut free: Vec<(usize, f64, f64, f64)> = Vec::new();
        let mut q = vec![1.0; n];
        let mut frozen = vec![false; n];
        for i in 0..n {
            match options[i][sel[i]] {
                Opt::Point { q: qi } => {
                    q[i] = qi;
                    frozen[i] = qi >= 1.0 - 1e-9;
                }
                Opt::Free { q_lo, q_hi, b } => free.push((i, q_lo, q_hi, b)),
            }
        }
        if free.is_empty() {
            if let Some(polished) = newton_polish(&s.agents, w, prices, q, &frozen) {
                // a polish that drifted to a distant aggregate started from
                // a spurious combination
                let prod: f64 = polished.iter().product();
                if (prod - big_p).abs() <= 2.0 * window {
                    out.push(Found::Isolated(polished));
                }
            }
            continue;
        }
        let fixed_prod: f64 = (0..n)
            .filter(|i| !free.iter().any(|f| f.0 == *i))
            .map(|i| q[i])
            .product();
        if fixed_prod <= 0.0 {
            continue;
        }
        let target = big_p / fixed_prod;
        if free.len() == 1 {
            // one free agent pins down an isolated point
            let (agent, ql, qh, _) = free[0];
            if target >= ql - 1e-9 && target <= qh + 1e-9 {
                q[agent] = target.clamp(ql, qh);
                out.push(Found::Isolated(q));
            }
            continue;
        }
        if free.len() > 20 {
            continue; // past any sane instance size
        }
        out.push(Found::Continuum {
            no_sale: big_p,
            free,
            fixed_q: q,
        });
    }
    out
}

/// Enumerate the simultaneous equilibria of a full- or status-model sale.
///
/// `grid` controls the resolution of the no-sale-probability sweep; the
/// default CLI value is 10000. The scan runs in parallel over grid chunks
/// and its output does not depend on the worker count. If a first pass
/// finds nothing the resolution is escalated once; a second empty pass is
/// reported as an internal inconsistency, since an equilibrium always
/// exists.
pub fn scan_sim_equilibria(s: &Scenario, p: &PriceSchedule, grid: usize) -> Result<ScanReport> {
    if s.mode.is_sequential() {
        return Err(Error::invalid("the scan needs simultaneous mode"));
    }
    let n = s.n();
    p.validate(n)?;
    let prices = p.as_per_agent(n)?;
    let w: Vec<f64> = match &s.externality {
        Externality::Full => vec![1.0; n],
        Externality::Status { w } => w.clone(),
        _ => {
            return Err(Error::unsupported(
                "the scan covers the full and status models",
            ))
        }
    };
    for (i, d) in s.agents.iter().enumerate() {
        if !d.is_regular() {
            return Err(Error::domain(format!(
                "the scan needs regular distributions (agent {i})"
            )));
        }
    }

    let report = scan_at(s, &w, &prices, grid)?;
    if !report.is_empty() {
        return Ok(report);
    }
    let report = scan_at(s, &w, &prices, grid.saturating_mul(10))?;
    if !report.is_empty() {
        return Ok(report);
    }
    Err(Error::inconsistent(
        "no equilibrium found at escalated resolution, yet one must exist",
    ))
}

fn scan_at(s: &Scenario, w: &[f64], prices: &[f64], grid: usize) -> Result<ScanReport> {
    let n = s.n();
    let grid = grid.max(100);
    let agents: Vec<AgentScan> = (0..n)
        .map(|i| AgentScan::new(&s.agents[i], w[i], prices[i]))
        .collect();

    let step = 1.0 / grid as f64;
    let mut cands: Vec<f64> = (1..=grid).map(|k| k as f64 * step).collect();
    let mut tail = step;
    for _ in 0..60 {
        tail *= 0.5;
        if tail < 1e-18 {
            break;
        }
        cands.push(tail);
    }
    for a in &agents {
        for &(star, _) in &a.specials {
            cands.push(star);
        }
        // birth point of the no-buy decision
        if a.w > 1e-15 {
            let birth = (a.p / a.hi - (1.0 - a.w)) / a.w;
            if birth > 0.0 && birth <= 1.0 {
                cands.push(birth);
            }
        }
    }
    cands.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cands.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));

    let window = WINDOW_STEPS * step;
    let found: Vec<Found> = cands
        .par_chunks(512)
        .map(|chunk| {
            let mut local = Vec::new();
            for &big_p in chunk {
                local.extend(process_candidate(s, &agents, w, prices, big_p, window));
            }
            local
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let mut isolated = Vec::new();
    let mut continua = Vec::new();
    let mut seen_iso: BTreeSet<Vec<i64>> = BTreeSet::new();
    let mut seen_cont: BTreeSet<Vec<i64>> = BTreeSet::new();
    let q_key = |q: &[f64]| -> Vec<i64> {
        q.iter()
            .map(|x| (x.min(1.0) * 1e7).round() as i64)
            .collect()
    };

    for q in sure_buyer_pass(s, w, prices) {
        if let Some(report) = report_from_q(s, w, prices, &q) {
            if seen_iso.insert(q_key(&q)) {
                isolated.push(report);
            }
        }
    }

    for item in found {
        match item {
            Found::Isolated(q) => {
                if let Some(report) = report_from_q(s, w, prices, &q) {
                    if seen_iso.insert(q_key(&q)) {
                        isolated.push(report);
                    }
                }
            }
            Found::Continuum {
                no_sale,
                free,
                fixed_q,
            } => {
                let mut key: Vec<i64> = free.iter().map(|f| f.0 as i64).collect();
                key.push(-1);
                key.extend(q_key(&fixed_q));
                key.push((no_sale * 1e9).round() as i64);
                if !seen_cont.insert(key) {
                    continue;
                }
                let target: f64 = no_sale
                    / (0..n)
                        .filter(|i| !free.iter().any(|f| f.0 == *i))
                        .map(|i| fixed_q[i])
                        .product::<f64>();
                let Some((worst_free, best_free)) = continuum_extremes(&free, prices, target)
                else {
                    continue;
                };
                let fill = |vals: &[f64]| -> Vec<f64> {
                    let mut q = fixed_q.clone();
                    for (slot, &(agent, ..)) in free.iter().enumerate() {
                        q[agent] = vals[slot];
                    }
                    q
                };
                let worst = report_from_q(s, w, prices, &fill(&worst_free));
                let best = report_from_q(s, w, prices, &fill(&best_free));
                if let (Some(worst), Some(best)) = (worst, best) {
                    continua.push(Continuum {
                        no_sale_prob: no_sale,
                        free_agents: free.iter().map(|f| f.0).collect(),
                        worst,
                        best,
                    });
                }
            }
        }
    }

    Ok(ScanReport { isolated, continua })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_sim_fixed_point;
    use crate::scenario::Mode;

    fn uniform_full(n: usize) -> Scenario {
        Scenario::new(
            vec![Dist::uniform(0.0, 1.0).unwrap(); n],
            Externality::Full,
            Mode::Simultaneous,
        )
        .unwrap()
    }

    #[test]
    fn two_agent_continuum_with_exact_extremes() {
        let s = uniform_full(2);
        let r = scan_sim_equilibria(&s, &PriceSchedule::simple(vec![0.5, 0.5]), 2_000).unwrap();
        assert!(r.isolated.is_empty(), "{:?}", r.isolated.len());
        assert_eq!(r.continua.len(), 1);
        let c = &r.continua[0];
        assert!((c.no_sale_prob - 0.5).abs() < 1e-12);
        assert!((c.worst.revenue - 0.25).abs() < 1e-9);
        assert!((c.best.revenue - (1.0 - 0.5f64.sqrt())).abs() < 1e-9);
        let best_t = c.best.thresholds.as_simple().unwrap();
        assert!((best_t[0] - 0.5f64.sqrt()).abs() < 1e-7);
        assert!((best_t[1] - 0.5f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn mixed_prices_give_one_isolated_equilibrium() {
        let s = uniform_full(2);
        let r = scan_sim_equilibria(&s, &PriceSchedule::simple(vec![0.5, 0.9]), 2_000).unwrap();
        assert_eq!(r.continua.len(), 0);
        assert_eq!(r.isolated.len(), 1, "{:#?}", r.isolated);
        let eq = &r.isolated[0];
        let t = eq.thresholds.as_simple().unwrap();
        assert!((t[0] - 0.5).abs() < 1e-9);
        assert!((t[1] - 1.8).abs() < 1e-9);
        assert!((eq.revenue - 0.25).abs() < 1e-10);
        assert_eq!(r.worst().revenue, r.best().revenue);
    }

    #[test]
    fn anonymous_price_for_ten_agents_has_symmetric_best() {
        let s = uniform_full(10);
        let p = (10.0f64 / 11.0).powi(10);
        let r = scan_sim_equilibria(&s, &PriceSchedule::Anonymous { p }, 2_000).unwrap();
        assert_eq!(r.continua.len(), 1);
        let c = &r.continua[0];
        let best_expected = (10.0f64 / 11.0).powi(11);
        assert!((c.best.revenue - best_expected).abs() < 1e-9, "{}", c.best.revenue);
        for &t in c.best.thresholds.as_simple().unwrap() {
            assert!((t - 10.0 / 11.0).abs() < 1e-7);
        }
        let worst_expected = p * (1.0 - p);
        assert!((c.worst.revenue - worst_expected).abs() < 1e-9);
        assert!(r.isolated.is_empty());
    }

    #[test]
    fn outright_buyers_found_by_the_zero_pass() {
        // private-value agents whose price sits at the bottom of support
        let s = Scenario::new(
            vec![Dist::uniform(1.0, 1.5).unwrap(); 2],
            Externality::Status { w: vec![0.0, 0.0] },
            Mode::Simultaneous,
        )
        .unwrap();
        let r = scan_sim_equilibria(&s, &PriceSchedule::simple(vec![1.0, 1.0]), 500).unwrap();
        assert_eq!(r.isolated.len(), 1);
        assert!((r.isolated[0].revenue - 2.0).abs() < 1e-12);
        assert_eq!(r.isolated[0].no_sale_prob, Some(0.0));

        // full externality with one agent priced into a certain purchase:
        // she buys, everyone else free-rides
        let s = Scenario::new(
            vec![
                Dist::uniform(0.0, 1.0).unwrap(),
                Dist::uniform(1.0, 2.0).unwrap(),
            ],
            Externality::Full,
            Mode::Simultaneous,
        )
        .unwrap();
        let r = scan_sim_equilibria(&s, &PriceSchedule::simple(vec![0.5, 0.2]), 500).unwrap();
        assert_eq!(r.isolated.len(), 1, "{:#?}", r.isolated);
        let eq = &r.isolated[0];
        assert!((eq.revenue - 0.2).abs() < 1e-12);
        assert_eq!(eq.buy_probs[0], 0.0);
        assert_eq!(eq.buy_probs[1], 1.0);
    }

    #[test]
    fn status_scan_agrees_with_fixed_point() {
        let s = Scenario::new(
            vec![
                Dist::uniform(0.0, 1.0).unwrap(),
                Dist::uniform(0.2, 0.8).unwrap(),
            ],
            Externality::Status { w: vec![0.5, 0.7] },
            Mode::Simultaneous,
        )
        .unwrap();
        let p = PriceSchedule::simple(vec![0.3, 0.3]);
        let scan = scan_sim_equilibria(&s, &p, 2_000).unwrap();
        let fp = solve_sim_fixed_point(&s, &p, 0.5, 20_000, 1e-13).unwrap();
        let fp_t = fp.thresholds.as_simple().unwrap();
        let hit = scan.reports().any(|r| {
            r.thresholds
                .as_simple()
                .unwrap()
                .iter()
                .zip(fp_t)
                .all(|(a, b)| (a - b).abs() < 1e-6)
        });
        assert!(hit, "fixed point {fp_t:?} missing from scan");
        for r in scan.reports() {
            assert!(r.residual <= RESIDUAL_GATE);
        }
    }

    #[test]
    fn smooth_families_are_scanned_via_tables() {
        let s = Scenario::new(
            vec![
                Dist::complement_power(2.0).unwrap(),
                Dist::uniform(0.0, 1.0).unwrap(),
            ],
            Externality::Full,
            Mode::Simultaneous,
        )
        .unwrap();
        let p = PriceSchedule::simple(vec![0.2, 0.4]);
        let scan = scan_sim_equilibria(&s, &p, 2_000).unwrap();
        assert!(!scan.is_empty());
        for r in scan.reports() {
            assert!(r.residual <= RESIDUAL_GATE, "residual {}", r.residual);
        }
    }

    #[test]
    fn worker_count_does_not_change_the_result() {
        let s = uniform_full(3);
        let p = PriceSchedule::simple(vec![0.4, 0.5, 0.6]);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| scan_sim_equilibria(&s, &p, 3_000).unwrap())
        };
        let one = run(1);
        let eight = run(8);
        assert_eq!(one.isolated.len(), eight.isolated.len());
        assert_eq!(one.continua.len(), eight.continua.len());
        for (a, b) in one.reports().zip(eight.reports()) {
            assert_eq!(a.revenue.to_bits(), b.revenue.to_bits());
            let (ta, tb) = (
                a.thresholds.as_simple().unwrap(),
                b.thresholds.as_simple().unwrap(),
            );
            assert_eq!(ta.len(), tb.len());
            for (x, y) in ta.iter().zip(tb) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
