//! Exponential-family random network models (ERNM).
//!
//! An ERNM is a joint exponential family over a directed graph `Y` and the
//! nodal attributes `X` attached to it:
//!
//! ```text
//! P(Y = y, X = x | eta) = exp(eta . g(y, x)) / c(eta)
//! ```
//!
//! The crate is organised around the pieces needed to work with such a model:
//!
//! * [`network`] holds the mutable graph plus attribute table, with the degree
//!   caches the change statistics rely on.
//! * [`stats`] is the term catalog defining `g`, with exact change statistics
//!   for dyad toggles and attribute changes, and the model file format.
//! * [`sampler`] is the Metropolis-Hastings kernel (tie/no-tie dyad moves mixed
//!   with attribute moves) and the multi-chain driver.
//! * [`inference`] implements Monte Carlo maximum likelihood, Fisher and
//!   parametric-bootstrap standard errors, and exact enumeration for tiny
//!   networks.
//! * [`gof`] builds goodness-of-fit envelopes and degeneracy diagnostics.

pub mod error;
pub mod gof;
pub mod inference;
pub mod io;
pub mod network;
pub mod sampler;
pub mod stats;
pub mod summary;
pub mod synth;

pub use error::{Error, Result};
pub use network::{AttrValue, AttributeTable, Dyad, Network, Variable, VariableKind};
pub use stats::{Model, ModelSpec, StatVector, TermSpec};
