//! Exact graph-side references: maximum independent sets and the
//! subgame-perfect outcome of sequential network sales with known values.

use crate::error::{Error, Result};

/// Maximum independent set by branch and bound over vertex bitmasks.
///
/// Branches on the lowest remaining vertex, pruning when even taking every
/// remaining vertex cannot beat the incumbent. Exact; refuses more than
/// twenty vertices since the worst case is exponential. Returns the set size
/// and one witness, sorted ascending.
pub fn max_independent_set(n: usize, neighbors: &[Vec<usize>]) -> Result<(usize, Vec<usize>)> {
    if n > 20 {
        return Err(Error::unsupported(format!(
            "independent set search over {n} vertices refused; twenty is the supported maximum"
        )));
    }
    if neighbors.len() != n {
        return Err(Error::invalid("adjacency list length differs from n"));
    }
    let mut adj = vec![0u32; n];
    for (v, ns) in neighbors.iter().enumerate() {
        for &u in ns {
            if u >= n {
                return Err(Error::invalid(format!("edge endpoint {u} out of range")));
            }
            adj[v] |= 1 << u;
            adj[u] |= 1 << v;
        }
    }

    fn grow(
        candidates: u32,
        chosen: u32,
        adj: &[u32],
        best: &mut (u32, u32), // (size, mask)
    ) {
        let size = chosen.count_ones();
        if size + candidates.count_ones() <= best.0 {
            return;
        }
        if candidates == 0 {
            // Strict improvement keeps the first witness found.
            if size > best.0 {
                *best = (size, chosen);
            }
            return;
        }
        let v = candidates.trailing_zeros() as usize;
        grow(
            candidates & !(1 << v) & !adj[v],
            chosen | (1 << v),
            adj,
            best,
        );
        grow(candidates & !(1 << v), chosen, adj, best);
    }

    let mut best = (0u32, 0u32);
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    grow(all, 0, &adj, &mut best);
    let witness: Vec<usize> = (0..n).filter(|&v| best.1 & (1 << v) != 0).collect();
    Ok((best.0 as usize, witness))
}

/// Subgame-perfect buyer set of a sequential network sale with known values.
///
/// Agents arrive in index order; each sees the full history and buys exactly
/// when buying beats declining under perfect foresight of the continuation.
/// The game tree over (position, owner-set) states is folded exactly, so the
/// cost is exponential in `n`; more than ten agents are refused. Indifference
/// would make the outcome selection-dependent, so prices equal to an agent's
/// value, and zero prices, are rejected.
pub fn subgame_perfect_network(
    n: usize,
    neighbors: &[Vec<usize>],
    prices: &[f64],
    values: &[f64],
) -> Result<Vec<usize>> {
    if n > 10 {
        return Err(Error::unsupported(format!(
            "subgame folding over {n} agents refused; ten is the supported maximum"
        )));
    }
    if neighbors.len() != n || prices.len() != n || values.len() != n {
        return Err(Error::invalid("inputs must all have length n"));
    }
    for i in 0..n {
        if prices[i] == values[i] || prices[i] == 0.0 {
            return Err(Error::domain(format!(
                "agent {i} can be exactly indifferent at price {}; perturb the price",
                prices[i]
            )));
        }
    }
    let mut adj = vec![0u32; n];
    for (v, ns) in neighbors.iter().enumerate() {
        for &u in ns {
            if u >= n {
                return Err(Error::invalid(format!("edge endpoint {u} out of range")));
            }
            adj[v] |= 1 << u;
            adj[u] |= 1 << v;
        }
    }

    // final_set[i][mask]: eventual owner set when play reaches position i
    // with owners `mask`. Folded backward so each lookup is O(1).
    let mut next: Vec<u32> = (0..1u32 << n).collect();
    for i in (0..n).rev() {
        let mut cur = vec![0u32; 1 << i];
        for (mask, slot) in cur.iter_mut().enumerate() {
            let mask = mask as u32;
            let decline_final = next[mask as usize];
            let buy_final = next[(mask | (1 << i)) as usize];
            let u_buy = values[i] - prices[i];
            let u_decline = if adj[i] & decline_final != 0 {
                values[i]
            } else {
                0.0
            };
            *slot = if u_buy > u_decline {
                buy_final
            } else {
                decline_final
            };
        }
        next = cur;
    }
    let fin = next[0];
    Ok((0..n).filter(|&v| fin & (1 << v) != 0).collect())
}
