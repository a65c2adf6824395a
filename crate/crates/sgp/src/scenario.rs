//! Scenario configuration: who the agents are, how ownership spills over to
//! non-owners, and in which mode the sale runs.
//!
//! A scenario file is a JSON document:
//!
//! ```json
//! {
//!   "agents": [{"family": "uniform", "lo": 0.0, "hi": 1.0}],
//!   "externality": {"type": "availability", "w": [0.0, 0.5, 0.8]},
//!   "mode": {"type": "sequential"}
//! }
//! ```
//!
//! Buyer sets are passed around as bitmasks (`u64`), which caps instances at
//! 64 agents; everything in this crate is desk-scale well below that.

use crate::distributions::Dist;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// How a purchase by the set `S` affects a non-owner `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Externality {
    /// Any purchase grants every agent full value.
    Full,
    /// Non-owner `i` enjoys fraction `w[i]` of her value once anyone owns.
    Status { w: Vec<f64> },
    /// Non-owners enjoy fraction `w[|S|]`, nondecreasing in the owner count.
    /// `w` is indexed `0..n-1` (a non-owner sees at most `n-1` owners).
    Availability { w: Vec<f64> },
    /// Full value iff a graph neighbor owns; undirected simple graph.
    Network { edges: Vec<(usize, usize)> },
}

/// Sale mode: one simultaneous round, or arrivals in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mode {
    Simultaneous,
    Sequential {
        /// Arrival order as agent indices; defaults to `0..n`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<Vec<usize>>,
    },
}

impl Mode {
    pub fn sequential() -> Self {
        Mode::Sequential { order: None }
    }

    pub fn is_sequential(&self) -> bool {
        matches!(self, Mode::Sequential { .. })
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Optional label used in CSV output; file stem is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub agents: Vec<Dist>,
    pub externality: Externality,
    pub mode: Mode,
}

impl Scenario {
    pub fn new(agents: Vec<Dist>, externality: Externality, mode: Mode) -> Result<Self> {
        let s = Scenario {
            id: None,
            agents,
            externality,
            mode,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    /// Arrival order as agent indices (identity unless configured).
    pub fn arrival_order(&self) -> Vec<usize> {
        match &self.mode {
            Mode::Sequential { order: Some(o) } => o.clone(),
            _ => (0..self.n()).collect(),
        }
    }

    /// Adjacency lists for the network model; empty lists otherwise.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n()];
        if let Externality::Network { edges } = &self.externality {
            for &(u, v) in edges {
                adj[u].push(v);
                adj[v].push(u);
            }
            for list in &mut adj {
                list.sort_unstable();
                list.dedup();
            }
        }
        adj
    }

    /// Check dimension agreement and every model invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::invalid("scenario: needs at least one agent"));
        }
        if n > 64 {
            return Err(Error::invalid("scenario: at most 64 agents supported"));
        }
        for d in &self.agents {
            d.validate()?;
        }
        match &self.externality {
            Externality::Full => {}
            Externality::Status { w } => {
                if w.len() != n {
                    return Err(Error::invalid(format!(
                        "status weights: expected {n} entries, got {}",
                        w.len()
                    )));
                }
                if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::invalid("status weights: entries must lie in [0, 1]"));
                }
            }
            Externality::Availability { w } => {
                if w.len() != n {
                    return Err(Error::invalid(format!(
                        "availability weights: expected {n} entries (indices 0..{}), got {}",
                        n - 1,
                        w.len()
                    )));
                }
                if w[0] != 0.0 {
                    return Err(Error::invalid("availability weights: w[0] must be 0"));
                }
                if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::invalid(
                        "availability weights: entries must lie in [0, 1]",
                    ));
                }
                if w.windows(2).any(|p| p[1] < p[0]) {
                    return Err(Error::invalid(
                        "availability weights: must be nondecreasing",
                    ));
                }
            }
            Externality::Network { edges } => {
                for &(u, v) in edges {
                    if u == v {
                        return Err(Error::invalid(format!("network: self-loop at node {u}")));
                    }
                    if u >= n || v >= n {
                        return Err(Error::invalid(format!(
                            "network: edge ({u},{v}) references a node >= {n}"
                        )));
                    }
                }
            }
        }
        if let Mode::Sequential { order: Some(o) } = &self.mode {
            let mut seen = vec![false; n];
            if o.len() != n {
                return Err(Error::invalid("order: must list every agent exactly once"));
            }
            for &i in o {
                if i >= n || seen[i] {
                    return Err(Error::invalid("order: not a permutation of 0..n"));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }

    /// Fraction of her value a non-owner keeps; 1 for owners.
    ///
    /// `owners` is a bitmask over agent indices.
    pub fn externality_fraction(&self, i: usize, owners: u64) -> f64 {
        externality_fraction(&self.externality, &self.neighbors(), i, owners)
    }

    pub fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            let kind = match &self.externality {
                Externality::Full => "full",
                Externality::Status { .. } => "status",
                Externality::Availability { .. } => "availability",
                Externality::Network { .. } => "network",
            };
            format!("{}x{}-{}", self.n(), self.agents[0].label(), kind)
        })
    }
}

/// Fraction of value agent `i` receives when `owners` hold the good.
///
/// Works on prebuilt adjacency lists so hot loops don't rebuild them.
pub fn externality_fraction(
    ext: &Externality,
    neighbors: &[Vec<usize>],
    i: usize,
    owners: u64,
) -> f64 {
    if owners & (1 << i) != 0 {
        return 1.0;
    }
    if owners == 0 {
        return 0.0;
    }
    match ext {
        Externality::Full => 1.0,
        Externality::Status { w } => w[i],
        Externality::Availability { w } => w[owners.count_ones() as usize],
        Externality::Network { .. } => {
            if neighbors[i].iter().any(|&j| owners & (1 << j) != 0) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Posted prices in one of the four shapes solvers accept.
///
/// An infinite price means "never offered" and serializes as the string
/// `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PriceSchedule {
    /// One price per agent.
    Simple {
        #[serde(with = "ext_real_vec")]
        p: Vec<f64>,
    },
    /// The same price for every agent.
    Anonymous { p: f64 },
    /// Status-style: one price before any sale, another after.
    TwoTier {
        #[serde(with = "ext_real_vec")]
        p0: Vec<f64>,
        #[serde(rename = "p_gt0", with = "ext_real_vec")]
        p_pos: Vec<f64>,
    },
    /// `p[i][j]`: price for the i-th arrival when j prior agents bought.
    /// Lower-triangular: row i has i+1 entries.
    CountIndexed {
        #[serde(with = "ext_real_mat")]
        p: Vec<Vec<f64>>,
    },
}

impl PriceSchedule {
    pub fn simple(p: Vec<f64>) -> Self {
        PriceSchedule::Simple { p }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = |x: &f64| *x >= 0.0 && !x.is_nan();
        match self {
            PriceSchedule::Simple { p } => {
                if p.len() != n {
                    return Err(Error::invalid(format!(
                        "simple prices: expected {n} entries, got {}",
                        p.len()
                    )));
                }
                if !p.iter().all(ok) {
                    return Err(Error::invalid("prices: must be nonnegative"));
                }
            }
            PriceSchedule::Anonymous { p } => {
                if !ok(p) || !p.is_finite() {
                    return Err(Error::invalid("anonymous price: must be finite nonnegative"));
                }
            }
            PriceSchedule::TwoTier { p0, p_pos } => {
                if p0.len() != n || p_pos.len() != n {
                    return Err(Error::invalid(format!(
                        "two-tier prices: both tiers need {n} entries"
                    )));
                }
                if !p0.iter().all(ok) || !p_pos.iter().all(ok) {
                    return Err(Error::invalid("prices: must be nonnegative"));
                }
            }
            PriceSchedule::CountIndexed { p } => {
                if p.len() != n {
                    return Err(Error::invalid(format!(
                        "count-indexed prices: expected {n} rows, got {}",
                        p.len()
                    )));
                }
                for (i, row) in p.iter().enumerate() {
                    if row.len() != i + 1 {
                        return Err(Error::invalid(format!(
                            "count-indexed prices: row {i} needs {} entries (lower triangular), got {}",
                            i + 1,
                            row.len()
                        )));
                    }
                    if !row.iter().all(ok) {
                        return Err(Error::invalid("prices: must be nonnegative"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-agent price vector for the shapes that have one.
    pub fn as_per_agent(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            PriceSchedule::Simple { p } => Ok(p.clone()),
            PriceSchedule::Anonymous { p } => Ok(vec![*p; n]),
            _ => Err(Error::unsupported(
                "this operation needs simple or anonymous prices",
            )),
        }
    }
}

/// Per-agent purchase thresholds, in the same shapes as [`PriceSchedule`].
/// An infinite threshold means "never buys".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ThresholdProfile {
    Simple {
        #[serde(with = "ext_real_vec")]
        t: Vec<f64>,
    },
    TwoTier {
        #[serde(with = "ext_real_vec")]
        t0: Vec<f64>,
        #[serde(rename = "t_gt0", with = "ext_real_vec")]
        t_pos: Vec<f64>,
    },
    /// `t[i][j]` for the i-th arrival with j prior buyers; lower triangular.
    CountIndexed {
        #[serde(with = "ext_real_mat")]
        t: Vec<Vec<f64>>,
    },
}

impl ThresholdProfile {
    pub fn simple(t: Vec<f64>) -> Self {
        ThresholdProfile::Simple { t }
    }

    /// The per-agent threshold vector; errors on count-indexed profiles.
    pub fn as_simple(&self) -> Result<&[f64]> {
        match self {
            ThresholdProfile::Simple { t } => Ok(t),
            _ => Err(Error::unsupported("expected a simple threshold profile")),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = |x: &f64| *x >= 0.0 && !x.is_nan();
        match self {
            ThresholdProfile::Simple { t } => {
                if t.len() != n || !t.iter().all(ok) {
                    return Err(Error::invalid("thresholds: need n nonnegative entries"));
                }
            }
            ThresholdProfile::TwoTier { t0, t_pos } => {
                if t0.len() != n || t_pos.len() != n || !t0.iter().all(ok) || !t_pos.iter().all(ok)
                {
                    return Err(Error::invalid("thresholds: need n nonnegative entries"));
                }
            }
            ThresholdProfile::CountIndexed { t } => {
                if t.len() != n {
                    return Err(Error::invalid("thresholds: expected n rows"));
                }
                for (i, row) in t.iter().enumerate() {
                    if row.len() != i + 1 || !row.iter().all(ok) {
                        return Err(Error::invalid(
                            "thresholds: rows must be lower triangular and nonnegative",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut s: Scenario = serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    if s.id.is_none() {
        s.id = path
            .file_stem()
            .map(|stem| stem.to_string_lossy().into_owned());
    }
    s.validate()?;
    Ok(s)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    s.validate()?;
    let text = serde_json::to_string_pretty(s).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_schedule(path: impl AsRef<Path>, n: usize) -> Result<PriceSchedule> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let p: PriceSchedule = serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    p.validate(n)?;
    Ok(p)
}

pub fn save_schedule(p: &PriceSchedule, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(p).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Extended reals in JSON: numbers, with infinity spelled `"inf"`.
mod ext_real {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrInf {
        Num(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        match NumOrInf::deserialize(de)? {
            NumOrInf::Num(x) => Ok(x),
            NumOrInf::Word(w) if w == "inf" => Ok(f64::INFINITY),
            NumOrInf::Word(w) => Err(D::Error::custom(format!(
                "expected a number or \"inf\", got \"{w}\""
            ))),
        }
    }
}

mod ext_real_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::ext_real")] f64);

    pub fn serialize<S: Serializer>(xs: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        let wrapped: Vec<Wrap> = xs.iter().map(|x| Wrap(*x)).collect();
        wrapped.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(de)?.into_iter().map(|w| w.0).collect())
    }
}

mod ext_real_mat {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row(#[serde(with = "super::ext_real_vec")] Vec<f64>);

    pub fn serialize<S: Serializer>(xs: &[Vec<f64>], ser: S) -> Result<S::Ok, S::Error> {
        let wrapped: Vec<Row> = xs.iter().map(|r| Row(r.clone())).collect();
        wrapped.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Vec<f64>>, D::Error> {
        Ok(Vec::<Row>::deserialize(de)?.into_iter().map(|r| r.0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_agents(n: usize) -> Vec<Dist> {
        (0..n).map(|_| Dist::uniform(0.0, 1.0).unwrap()).collect()
    }

    #[test]
    fn fraction_by_model() {
        let full = Scenario::new(uniform_agents(2), Externality::Full, Mode::Simultaneous).unwrap();
        assert_eq!(full.externality_fraction(0, 0b00), 0.0);
        assert_eq!(full.externality_fraction(0, 0b10), 1.0);
        assert_eq!(full.externality_fraction(0, 0b01), 1.0);

        let status = Scenario::new(
            uniform_agents(2),
            Externality::Status { w: vec![0.5, 0.8] },
            Mode::Simultaneous,
        )
        .unwrap();
        assert_eq!(status.externality_fraction(1, 0b01), 0.8);
        assert_eq!(status.externality_fraction(1, 0b10), 1.0);

        let avail = Scenario::new(
            uniform_agents(3),
            Externality::Availability {
                w: vec![0.0, 0.5, 0.8],
            },
            Mode::sequential(),
        )
        .unwrap();
        assert_eq!(avail.externality_fraction(2, 0b011), 0.8);
        assert_eq!(avail.externality_fraction(2, 0b001), 0.5);

        let net = Scenario::new(
            uniform_agents(3),
            Externality::Network {
                edges: vec![(0, 1), (1, 2)],
            },
            Mode::Simultaneous,
        )
        .unwrap();
        assert_eq!(net.externality_fraction(0, 0b010), 1.0);
        assert_eq!(net.externality_fraction(0, 0b100), 0.0);
    }

    #[test]
    fn full_recovered_from_degenerate_weights() {
        let n = 6;
        let full = Scenario::new(uniform_agents(n), Externality::Full, Mode::Simultaneous).unwrap();
        let status = Scenario::new(
            uniform_agents(n),
            Externality::Status { w: vec![1.0; n] },
            Mode::Simultaneous,
        )
        .unwrap();
        let mut w = vec![1.0; n];
        w[0] = 0.0;
        let avail = Scenario::new(
            uniform_agents(n),
            Externality::Availability { w },
            Mode::Simultaneous,
        )
        .unwrap();
        for mask in 0..(1u64 << n) {
            for i in 0..n {
                let f = full.externality_fraction(i, mask);
                assert_eq!(f, status.externality_fraction(i, mask));
                assert_eq!(f, avail.externality_fraction(i, mask));
            }
        }
    }

    #[test]
    fn validation_rejects_bad_weights_and_orders() {
        let err = Scenario::new(
            uniform_agents(3),
            Externality::Availability {
                w: vec![0.0, 0.8, 0.5],
            },
            Mode::sequential(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("nondecreasing"), "{err}");

        let err = Scenario::new(
            uniform_agents(2),
            Externality::Network {
                edges: vec![(0, 0)],
            },
            Mode::Simultaneous,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("self-loop"), "{err}");

        let err = Scenario::new(
            uniform_agents(2),
            Externality::Full,
            Mode::Sequential {
                order: Some(vec![0, 0]),
            },
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("permutation"), "{err}");
    }

    #[test]
    fn scenario_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("avail.json");
        let s = Scenario::new(
            uniform_agents(3),
            Externality::Availability {
                w: vec![0.0, 0.5, 0.8],
            },
            Mode::sequential(),
        )
        .unwrap();
        save_scenario(&s, &path).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(loaded.agents, s.agents);
        assert_eq!(loaded.externality, s.externality);
        assert_eq!(loaded.mode, s.mode);
        assert_eq!(loaded.id.as_deref(), Some("avail"));
    }

    #[test]
    fn parse_error_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"agents\": [}").unwrap();
        let err = load_scenario(&path).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn infinite_prices_serialize_as_inf() {
        let p = PriceSchedule::simple(vec![0.5, f64::INFINITY]);
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"inf\""), "{text}");
        let back: PriceSchedule = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);

        let t: ThresholdProfile =
            serde_json::from_str(r#"{"type":"count_indexed","t":[[0.5],["inf",0.25]]}"#).unwrap();
        t.validate(2).unwrap();
        let ThresholdProfile::CountIndexed { t } = &t else {
            panic!("wrong variant");
        };
        assert_eq!(t[1][0], f64::INFINITY);
    }

    #[test]
    fn schedule_shape_validation() {
        let p = PriceSchedule::CountIndexed {
            p: vec![vec![0.5], vec![0.4]],
        };
        let err = p.validate(2).unwrap_err().to_string();
        assert!(err.contains("lower triangular"), "{err}");
        assert!(PriceSchedule::simple(vec![-0.1]).validate(1).is_err());
        assert!(PriceSchedule::Anonymous { p: f64::INFINITY }.validate(3).is_err());
    }
}
