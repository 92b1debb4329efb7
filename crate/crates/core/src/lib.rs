//! Numerical laboratory for weighted maximal-operator inequalities on
//! spaces of exponential volume growth.
//!
//! Two backends are provided: an annular radial model of a Harmonic NA
//! group ([`geometry`], [`radialops`]) and exact rooted k-ary trees
//! ([`treelab`]). Weight families live in [`weights`], Jacobi and spherical
//! functions in [`specfun`], the condition checkers in [`checkers`],
//! and configuration plus named experiments in [`cli`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkers;
pub mod cli;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod quad;
pub mod radialops;
pub mod specfun;
pub mod treelab;
pub mod weights;

pub use error::{Error, Result};
