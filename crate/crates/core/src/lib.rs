//! Pair correlations of dilated integer sequences modulo one.
//!
//! The crate evaluates the pair-correlation statistic `R_N(s)` of
//! `({a_n α})` on exact inputs, computes additive energies and difference
//! profiles, decomposes Kronecker point sets into bundles along the
//! continued fraction of α, checks three counting lemmas, detects
//! degree-one quasi-arithmetic structure and runs a four-way case analysis
//! that proposes scales `s` at which the statistic deviates from `2s`.

pub mod contfrac;
pub mod energy;
pub mod error;
pub mod gaps;
pub mod numeric;
pub mod paircorr;
pub mod ratio;
pub mod sequences;
pub mod structure;
pub mod witness;

pub use error::{Error, Result};
pub use numeric::{AlphaSpec, CirclePoint, FixedAlpha};
