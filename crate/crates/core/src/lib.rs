//! Exact ground states of periodic spin-1 chains, spin-correlation features,
//! and a k-nearest-neighbour phase classifier trained on two models and
//! used to predict the third.
//!
//! Layers, bottom up: [`operators`] (spin-1 algebra on `3^N` states),
//! [`hamiltonians`] (H1, H2, H3 as matrix-free maps), [`eigensolver`]
//! (dense and Lanczos ground states), [`features`], [`labels`], [`knn`] and
//! [`experiment`].

pub mod dataset;
pub mod eigensolver;
pub mod error;
pub mod experiment;
pub mod features;
pub mod hamiltonians;
pub mod knn;
pub mod labels;
pub mod operators;
pub mod par;

pub use error::{Error, Result};
pub use hamiltonians::{Model, ModelSpec, Params};
pub use labels::PhaseLabel;
