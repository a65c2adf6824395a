//! Pricing and equilibrium analysis for goods whose value spills over to
//! non-buyers.
//!
//! One sale can serve many: a club good, a shared tool, a status purchase.
//! This crate models agents with independent private values, an externality
//! rule describing what non-buyers receive, and posted-price sale mechanisms
//! in simultaneous or sequential mode. It provides:
//!
//! * equilibrium solvers for each externality model and sale mode
//!   ([`equilibrium`]),
//! * price constructions with provable revenue guarantees ([`pricing`]),
//! * exact and Monte Carlo revenue evaluation ([`revenue`]),
//! * brute-force benchmarks for small instances ([`oracle`]).
//!
//! ```
//! use sgp::distributions::Dist;
//! use sgp::scenario::{Externality, Mode, Scenario};
//!
//! let s = Scenario::new(
//!     vec![Dist::uniform(0.0, 1.0).unwrap(); 2],
//!     Externality::Full,
//!     Mode::Simultaneous,
//! )
//! .unwrap();
//! assert_eq!(s.externality_fraction(0, 0b10), 1.0);
//! ```

pub mod cli;
pub mod distributions;
pub mod equilibrium;
pub mod error;
pub mod numeric;
pub mod oracle;
pub mod pricing;
pub mod revenue;
pub mod scenario;

pub use error::{Error, Result};

// The guide's code samples compile here as documentation tests, so the book
// in book/ can never drift from the actual API.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/model.md")]
    pub struct Model;
    #[doc = include_str!("../../../book/src/distributions.md")]
    pub struct Distributions;
    #[doc = include_str!("../../../book/src/equilibria.md")]
    pub struct Equilibria;
    #[doc = include_str!("../../../book/src/pricing.md")]
    pub struct Pricing;
    #[doc = include_str!("../../../book/src/oracles.md")]
    pub struct Oracles;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
}
