//! Value distributions for agents.
//!
//! Four families, all atomless with nonnegative support:
//!
//! * `Uniform { lo, hi }` on `[lo, hi]`
//! * `ShiftedPower { ell, eps }` with CDF `(v / (1 + eps))^ell` on `[0, 1 + eps]`
//! * `ComplementPower { k }` with CDF `1 - (1 - v)^k` on `[0, 1]`
//! * `Piecewise { points }`, a piecewise-linear CDF given by its knots
//!
//! The first three are regular (nondecreasing virtual value) for every legal
//! parameter choice. Piecewise distributions are checked at construction and
//! carry the result in [`Dist::is_regular`].
//!
//! ```
//! use sgp::distributions::Dist;
//!
//! let d = Dist::uniform(0.0, 1.0).unwrap();
//! assert_eq!(d.virtual_value(0.75), 0.5);
//! let (p, r) = d.monopoly();
//! assert_eq!((p, r), (0.5, 0.25));
//! ```

use crate::error::{Error, Result};
use crate::numeric;
use serde::{Deserialize, Serialize};

/// A single agent's value distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Dist {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// CDF `(v / (1 + eps))^ell` on `[0, 1 + eps]`.
    ShiftedPower {
        ell: f64,
        eps: f64,
    },
    /// CDF `1 - (1 - v)^k` on `[0, 1]`.
    ComplementPower {
        k: f64,
    },
    /// Piecewise-linear CDF through the given `(value, cdf)` knots.
    Piecewise {
        points: Vec<(f64, f64)>,
    },
}

impl Dist {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = Dist::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn shifted_power(ell: f64, eps: f64) -> Result<Self> {
        let d = Dist::ShiftedPower { ell, eps };
        d.validate()?;
        Ok(d)
    }

    pub fn complement_power(k: f64) -> Result<Self> {
        let d = Dist::ComplementPower { k };
        d.validate()?;
        Ok(d)
    }

    pub fn piecewise(points: Vec<(f64, f64)>) -> Result<Self> {
        let d = Dist::Piecewise { points };
        d.validate()?;
        Ok(d)
    }

    /// Check every constructor invariant, naming the violated constraint.
    pub fn validate(&self) -> Result<()> {
        match self {
            Dist::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::invalid("uniform: lo and hi must be finite"));
                }
                if *lo < 0.0 {
                    return Err(Error::invalid("uniform: lo must be nonnegative"));
                }
                if lo >= hi {
                    return Err(Error::invalid("uniform: requires lo < hi"));
                }
            }
            Dist::ShiftedPower { ell, eps } => {
                if !ell.is_finite() || *ell < 1.0 {
                    return Err(Error::invalid("shifted_power: requires ell >= 1"));
                }
                if !eps.is_finite() || *eps <= 0.0 {
                    return Err(Error::invalid("shifted_power: requires eps > 0"));
                }
            }
            Dist::ComplementPower { k } => {
                if !k.is_finite() || *k < 1.0 {
                    return Err(Error::invalid("complement_power: requires k >= 1"));
                }
            }
            Dist::Piecewise { points } => {
                if points.len() < 2 {
                    return Err(Error::invalid("piecewise: needs at least two knots"));
                }
                if points.iter().any(|(v, f)| !v.is_finite() || !f.is_finite()) {
                    return Err(Error::invalid("piecewise: knots must be finite"));
                }
                if points[0].0 < 0.0 {
                    return Err(Error::invalid("piecewise: support must be nonnegative"));
                }
                if points[0].1 != 0.0 {
                    return Err(Error::invalid("piecewise: first knot must have cdf 0"));
                }
                if points[points.len() - 1].1 != 1.0 {
                    return Err(Error::invalid("piecewise: last knot must have cdf 1"));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::invalid(
                            "piecewise: knot values must be strictly increasing",
                        ));
                    }
                    if w[1].1 <= w[0].1 {
                        return Err(Error::invalid(
                            "piecewise: cdf must be strictly increasing (positive density)",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Closed support `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Dist::Uniform { lo, hi } => (*lo, *hi),
            Dist::ShiftedPower { eps, .. } => (0.0, 1.0 + eps),
            Dist::ComplementPower { .. } => (0.0, 1.0),
            Dist::Piecewise { points } => (points[0].0, points[points.len() - 1].0),
        }
    }

    /// CDF, extended by 0 below and 1 above the support. `cdf(inf) = 1`.
    pub fn cdf(&self, v: f64) -> f64 {
        debug_assert!(!v.is_nan(), "cdf of NaN");
        let (lo, hi) = self.support();
        if v <= lo {
            return 0.0;
        }
        if v >= hi {
            return 1.0;
        }
        match self {
            Dist::Uniform { lo, hi } => (v - lo) / (hi - lo),
            Dist::ShiftedPower { ell, eps } => (v / (1.0 + eps)).powf(*ell),
            Dist::ComplementPower { k } => 1.0 - (1.0 - v).powf(*k),
            Dist::Piecewise { points } => {
                let j = segment_index(points, v);
                let (v0, f0) = points[j];
                let (v1, f1) = points[j + 1];
                f0 + (f1 - f0) * (v - v0) / (v1 - v0)
            }
        }
    }

    /// Density, 0 outside the open support. Right-continuous at knots.
    pub fn pdf(&self, v: f64) -> f64 {
        debug_assert!(!v.is_nan(), "pdf of NaN");
        let (lo, hi) = self.support();
        if v < lo || v > hi {
            return 0.0;
        }
        match self {
            Dist::Uniform { lo, hi } => 1.0 / (hi - lo),
            Dist::ShiftedPower { ell, eps } => {
                let m = 1.0 + eps;
                ell * (v / m).powf(ell - 1.0) / m
            }
            Dist::ComplementPower { k } => k * (1.0 - v).powf(k - 1.0),
            Dist::Piecewise { points } => {
                let j = if v >= hi {
                    points.len() - 2
                } else {
                    segment_index(points, v)
                };
                let (v0, f0) = points[j];
                let (v1, f1) = points[j + 1];
                (f1 - f0) / (v1 - v0)
            }
        }
    }

    /// Quantile (inverse CDF) on `[0, 1]`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::domain(format!("quantile argument {u} outside [0, 1]")));
        }
        let (lo, hi) = self.support();
        Ok(match self {
            Dist::Uniform { lo, hi } => lo + u * (hi - lo),
            Dist::ShiftedPower { ell, eps } => (1.0 + eps) * u.powf(1.0 / ell),
            Dist::ComplementPower { k } => 1.0 - (1.0 - u).powf(1.0 / k),
            Dist::Piecewise { points } => {
                if u <= 0.0 {
                    lo
                } else if u >= 1.0 {
                    hi
                } else {
                    let j = points
                        .windows(2)
                        .position(|w| u < w[1].1)
                        .unwrap_or(points.len() - 2);
                    let (v0, f0) = points[j];
                    let (v1, f1) = points[j + 1];
                    v0 + (v1 - v0) * (u - f0) / (f1 - f0)
                }
            }
        })
    }

    /// One deterministic draw: the quantile of a seed-derived uniform variate.
    pub fn sample(&self, seed: u64) -> f64 {
        let u = numeric::unit_open(numeric::splitmix64(seed));
        self.quantile(u).expect("unit_open stays inside [0, 1]")
    }

    /// Virtual value `v - (1 - F(v)) / f(v)`, evaluated on the support
    /// (arguments are clamped to it). May be `-inf` where the density
    /// vanishes at the lower end.
    pub fn virtual_value(&self, v: f64) -> f64 {
        let (lo, hi) = self.support();
        let v = v.clamp(lo, hi);
        match self {
            Dist::Uniform { hi, .. } => 2.0 * v - hi,
            Dist::ShiftedPower { ell, eps } => {
                let m = 1.0 + eps;
                // At v = 0 this is -inf for ell > 1 (density vanishes) and
                // -m for ell = 1; IEEE semantics give both without a branch.
                v - (m.powf(*ell) - v.powf(*ell)) / (ell * v.powf(ell - 1.0))
            }
            Dist::ComplementPower { k } => v - (1.0 - v) / k,
            Dist::Piecewise { points } => {
                let j = if v >= hi {
                    points.len() - 2
                } else {
                    segment_index(points, v)
                };
                let (v0, f0) = points[j];
                let (v1, f1) = points[j + 1];
                let slope = (f1 - f0) / (v1 - v0);
                let fv = f0 + slope * (v - v0);
                v - (1.0 - fv) / slope
            }
        }
    }

    /// Whether the virtual value is nondecreasing on the support.
    ///
    /// The closed-form families are regular for every legal parameter. A
    /// piecewise CDF is regular iff its density never drops across a knot
    /// (within each segment the virtual value has slope 2).
    pub fn is_regular(&self) -> bool {
        match self {
            Dist::Uniform { .. } | Dist::ShiftedPower { .. } | Dist::ComplementPower { .. } => true,
            Dist::Piecewise { points } => {
                let mut prev_slope = f64::NEG_INFINITY;
                for w in points.windows(2) {
                    let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                    if slope < prev_slope {
                        return false;
                    }
                    prev_slope = slope;
                }
                true
            }
        }
    }

    /// Inverse of the virtual value, clamped to the support: the smallest
    /// `v` with `virtual_value(v) >= t` (so `t` below the range maps to `lo`
    /// and above it to `hi`). Errors on non-regular distributions.
    pub fn inverse_virtual_value(&self, t: f64) -> Result<f64> {
        if !self.is_regular() {
            return Err(Error::unsupported(
                "inverse virtual value needs a regular distribution",
            ));
        }
        let (lo, hi) = self.support();
        Ok(match self {
            Dist::Uniform { lo, hi } => ((t + hi) / 2.0).clamp(*lo, *hi),
            Dist::ComplementPower { k } => ((k * t + 1.0) / (k + 1.0)).clamp(0.0, 1.0),
            Dist::ShiftedPower { .. } => {
                if t <= self.virtual_value(lo) {
                    lo
                } else if t >= self.virtual_value(hi) {
                    hi
                } else {
                    // Strictly increasing; push the bracket's lower end toward
                    // 0 until it straddles the crossing, then bisect.
                    let mut a = hi * 1e-12;
                    while self.virtual_value(a) > t {
                        a *= 0.5;
                    }
                    numeric::bisect(|v| self.virtual_value(v) - t, a, hi)
                }
            }
            Dist::Piecewise { .. } => {
                if t <= self.virtual_value(lo) {
                    lo
                } else if t >= self.virtual_value(hi) {
                    hi
                } else {
                    // Monotone with upward jumps at knots; bisection converges
                    // to the crossing point either way.
                    numeric::bisect(|v| self.virtual_value(v) - t, lo, hi)
                }
            }
        })
    }

    /// Monopoly (single-agent revenue-optimal) posted price and its revenue
    /// `p (1 - F(p))`.
    pub fn monopoly(&self) -> (f64, f64) {
        let p = match self {
            Dist::Uniform { lo, hi } => (hi / 2.0).clamp(*lo, *hi),
            Dist::ShiftedPower { ell, eps } => {
                // argmax of p (1 - (p/m)^ell) in closed form
                (1.0 + eps) / (ell + 1.0).powf(1.0 / ell)
            }
            Dist::ComplementPower { k } => 1.0 / (k + 1.0),
            Dist::Piecewise { points } => {
                // Revenue is quadratic on each segment; enumerate vertices
                // and knots.
                let mut best = (points[0].0, 0.0);
                let mut consider = |p: f64| {
                    let r = p * (1.0 - self.cdf(p));
                    if r > best.1 {
                        best = (p, r);
                    }
                };
                for w in points.windows(2) {
                    let (v0, f0) = w[0];
                    let (v1, f1) = w[1];
                    let slope = (f1 - f0) / (v1 - v0);
                    // d/dp [p (1 - f0 - slope (p - v0))] = 0
                    let vertex = (1.0 - f0 + slope * v0) / (2.0 * slope);
                    if vertex > v0 && vertex < v1 {
                        consider(vertex);
                    }
                    consider(v0);
                    consider(v1);
                }
                best.0
            }
        };
        (p, p * (1.0 - self.cdf(p)))
    }

    /// Short human-readable label, used in CLI output.
    pub fn label(&self) -> String {
        match self {
            Dist::Uniform { lo, hi } => format!("uniform[{lo},{hi}]"),
            Dist::ShiftedPower { ell, eps } => format!("shifted_power(ell={ell},eps={eps})"),
            Dist::ComplementPower { k } => format!("complement_power(k={k})"),
            Dist::Piecewise { points } => format!("piecewise({} knots)", points.len()),
        }
    }
}

/// Index of the segment containing `v`, assuming `lo <= v < hi`.
fn segment_index(points: &[(f64, f64)], v: f64) -> usize {
    points
        .windows(2)
        .position(|w| v < w[1].0)
        .unwrap_or(points.len() - 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u01() -> Dist {
        Dist::uniform(0.0, 1.0).unwrap()
    }

    #[test]
    fn uniform_queries() {
        let d = u01();
        assert_eq!(d.quantile(0.25).unwrap(), 0.25);
        assert_eq!(d.cdf(0.25), 0.25);
        assert_eq!(d.pdf(0.5), 1.0);
        assert_eq!(d.virtual_value(0.75), 0.5);
        assert_eq!(d.cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn uniform_monopoly_interior_and_boundary() {
        assert_eq!(u01().monopoly(), (0.5, 0.25));
        // Support bounded away from zero: the unconstrained argmax hi/2 = 1.0
        // sits at the lower end, where everyone accepts.
        let d = Dist::uniform(1.0, 2.0).unwrap();
        assert_eq!(d.monopoly(), (1.0, 1.0));
    }

    #[test]
    fn complement_power_virtual_value() {
        let d = Dist::complement_power(2.0).unwrap();
        assert_eq!(d.virtual_value(0.5), 0.25);
        assert!((d.monopoly().0 - 1.0 / 3.0).abs() < 1e-15);
        // inverse round trip
        let v = d.inverse_virtual_value(0.25).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shifted_power_monopoly_matches_grid() {
        let d = Dist::shifted_power(2.0, 0.1).unwrap();
        let (p, r) = d.monopoly();
        // independent grid + polish
        let (pg, rg) = crate::numeric::golden_max(|x| x * (1.0 - d.cdf(x)), 0.0, 1.1, 1e-12);
        assert!((p - pg).abs() < 1e-6, "{p} vs {pg}");
        assert!((r - rg).abs() < 1e-10);
        // regular: virtual value increasing, inverse round-trips
        let v = d.inverse_virtual_value(d.virtual_value(0.7)).unwrap();
        assert!((v - 0.7).abs() < 1e-9);
    }

    #[test]
    fn piecewise_basics() {
        let d = Dist::piecewise(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap();
        assert!(d.is_regular());
        assert_eq!(d.quantile(0.25).unwrap(), 0.5);
        assert_eq!(d.cdf(0.25), 0.125);
        assert_eq!(d.pdf(0.25), 0.5);
        assert_eq!(d.pdf(0.75), 1.5);
        let (p, r) = d.monopoly();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((r - 0.375).abs() < 1e-12);
    }

    #[test]
    fn piecewise_decreasing_density_is_irregular() {
        let d = Dist::piecewise(vec![(0.0, 0.0), (0.5, 0.75), (1.0, 1.0)]).unwrap();
        assert!(!d.is_regular());
        assert!(d.inverse_virtual_value(0.0).is_err());
    }

    #[test]
    fn validation_names_the_constraint() {
        let err = Dist::uniform(1.0, 1.0).unwrap_err().to_string();
        assert!(err.contains("lo < hi"), "{err}");
        let err = Dist::piecewise(vec![(0.0, 0.0), (1.0, 0.5)])
            .unwrap_err()
            .to_string();
        assert!(err.contains("cdf 1"), "{err}");
    }

    #[test]
    fn quantile_cdf_round_trip() {
        for d in [
            u01(),
            Dist::uniform(0.5, 3.0).unwrap(),
            Dist::shifted_power(3.0, 0.25).unwrap(),
            Dist::complement_power(4.0).unwrap(),
            Dist::piecewise(vec![(0.1, 0.0), (0.4, 0.1), (0.9, 0.6), (2.0, 1.0)]).unwrap(),
        ] {
            for i in 1..40 {
                let u = i as f64 / 40.0;
                let v = d.quantile(u).unwrap();
                assert!((d.cdf(v) - u).abs() < 1e-10, "{} at u={u}", d.label());
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = Dist::shifted_power(2.0, 0.5).unwrap();
        assert_eq!(d.sample(42).to_bits(), d.sample(42).to_bits());
        assert_ne!(d.sample(42).to_bits(), d.sample(43).to_bits());
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        assert!(u01().quantile(-0.1).is_err());
        assert!(u01().quantile(1.1).is_err());
    }

    #[test]
    fn serde_family_literals() {
        let d: Dist = serde_json::from_str(r#"{"family":"uniform","lo":0.0,"hi":1.0}"#).unwrap();
        assert_eq!(d, u01());
        let d: Dist = serde_json::from_str(r#"{"family":"complement_power","k":2.0}"#).unwrap();
        assert_eq!(d, Dist::complement_power(2.0).unwrap());
        let d: Dist =
            serde_json::from_str(r#"{"family":"shifted_power","ell":3.0,"eps":0.1}"#).unwrap();
        let round = serde_json::to_string(&d).unwrap();
        let d2: Dist = serde_json::from_str(&round).unwrap();
        assert_eq!(d, d2);
        let d: Dist =
            serde_json::from_str(r#"{"family":"piecewise","points":[[0.0,0.0],[1.0,1.0]]}"#)
                .unwrap();
        assert!(d.validate().is_ok());
    }
}
