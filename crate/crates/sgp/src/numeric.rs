//! Small numeric toolkit: bracketed root finding, 1-D maximization,
//! adaptive quadrature, counter-based random numbers, and stable summation.
//!
//! Everything here is deterministic. The random-number helpers are pure
//! functions of their integer arguments so that parallel and serial callers
//! produce bit-identical streams.

/// Default iteration cap for bisection loops.
pub const BISECT_MAX_ITER: usize = 200;
/// Default interval tolerance for bisection loops.
pub const BISECT_TOL: f64 = 1e-12;

/// Root of a continuous function on a bracketing interval.
///
/// Requires `f(lo)` and `f(hi)` to have opposite signs (either may be zero).
/// Runs plain bisection: robust against the kinked and piecewise functions
/// used throughout the crate, and the 200-iteration cap is far past f64
/// resolution anyway.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    debug_assert!(
        flo.signum() != fhi.signum(),
        "bisect: no sign change on [{lo}, {hi}] (f: {flo}, {fhi})"
    );
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= BISECT_TOL * (1.0 + mid.abs()) {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximum of a unimodal-ish function on `[lo, hi]` by golden-section search.
/// Returns `(argmax, max)`. For multimodal inputs callers should seed with a
/// grid first; this only polishes within the bracket.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut a = hi - INVPHI * (hi - lo);
    let mut b = lo + INVPHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INVPHI * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INVPHI * (hi - lo);
            fa = f(a);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    if fm >= fa && fm >= fb {
        (mid, fm)
    } else if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &mut impl FnMut(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        // 15x comes from the Richardson error model of Simpson's rule.
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// SplitMix64 finalizer. Bijective mixing of a 64-bit counter into a
/// high-quality pseudo-random word.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Pseudo-random word for a (seed, trial, lane) triple.
///
/// Pure function: trial t / lane l on any worker yields the same word, which
/// is what makes parallel simulation bit-identical to serial.
pub fn mix3(seed: u64, trial: u64, lane: u64) -> u64 {
    let a = splitmix64(seed ^ 0x6a09_e667_f3bc_c909_u64.wrapping_mul(trial.wrapping_add(1)));
    splitmix64(a ^ 0xbb67_ae85_84ca_a73b_u64.wrapping_mul(lane.wrapping_add(1)))
}

/// Map a random word to the open unit interval, never returning 0.0 or 1.0.
pub fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) / 9_007_199_254_740_992.0
}

/// Pairwise (cascade) summation. Order-insensitive error of O(log n) ulps,
/// and a fixed association independent of how the slice was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Product of a slice; empty product is 1.
pub fn product(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(1.0, |acc, x| acc * x)
}

/// `price * prob` with the convention that a never-accepted infinite price
/// contributes zero revenue instead of NaN.
pub fn revenue_term(price: f64, prob: f64) -> f64 {
    if prob <= 0.0 || !price.is_finite() {
        0.0
    } else {
        price * prob
    }
}

/// Solve the dense system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when the matrix is numerically singular. Sized for the
/// handful-of-agents systems this crate deals in.
pub fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| {
            m[r1][col].abs().partial_cmp(&m[r2][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}
