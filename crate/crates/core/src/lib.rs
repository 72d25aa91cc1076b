//! Event-driven simulation of classical billiards in regular polygons, the
//! circle and the Sinai table.
//!
//! The crate covers table geometry ([`geometry`]), exact trajectory evolution
//! ([`dynamics`]), closed-table collision statistics ([`ensemble`]), open-table
//! escape experiments ([`escape`]), closed-form reference distributions
//! ([`oracles`]) and power-law estimation ([`analysis`]).
//!
//! Ensembles are reproducible: particle `i` draws from its own random stream
//! keyed by `(seed, i)` and results are merged with exact integer arithmetic,
//! so the output is identical with or without the `parallel` feature and for
//! any rayon thread count.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod escape;
pub mod geometry;
pub mod oracles;
pub mod par;
pub mod quad;
pub mod vec2;

pub use error::{BilliardError, Result};
pub use geometry::{Opening, Placement, Table, TableSpec};
pub use vec2::Vec2;
