//! Combinatorial-auction mechanism laboratory.
//!
//! Everything a seller-side welfare experiment needs at desk scale:
//!
//! - exact-rational valuations with demand oracles ([`valuations`]),
//! - hard-instance generators with seeded reproducibility ([`instances`]),
//! - truthful phase-two mechanisms: single-price, posted-price, single-bid,
//!   secretary, and maximal-in-range ([`mechanisms`]),
//! - brute-force ground truth for welfare and mechanism search ([`oracles`]),
//! - no-regret bidder dynamics and empirical price-of-anarchy ([`learning`]),
//! - allocation-family shattering and generalized VC dimension ([`shattering`]),
//! - taxation-principle menu extraction and structured submenus ([`menus`]).
//!
//! All welfare identities are checked in exact rational arithmetic
//! ([`money::Money`]); floating point appears only in the learning module and
//! in Monte Carlo statistics.

pub mod error;
pub mod instances;
pub mod items;
pub mod learning;
pub mod mechanisms;
pub mod menus;
pub mod money;
pub mod oracles;
pub mod rng;
pub mod shattering;
pub mod valuations;

pub use error::Error;
pub use instances::Instance;
pub use items::ItemSet;
pub use mechanisms::Outcome;
pub use money::{Money, Rational};
pub use valuations::Valuation;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
