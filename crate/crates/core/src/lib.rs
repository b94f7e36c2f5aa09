//! Closed SO(2,1) orbits on the space of unimodular lattices in ℝ³: flows,
//! heights, Haar sampling, Birkhoff averages and the exact arithmetic of
//! Markov numbers and ternary minima.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ergodic;
pub mod error;
pub mod flows;
pub mod form;
pub mod haar;
pub mod lattice;
pub mod linalg;
pub mod markov;
pub mod reduction;
pub mod rng;
pub mod stats;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattices.md")]
    mod lattices {}
    #[doc = include_str!("../../../book/src/orbits.md")]
    mod orbits {}
    #[doc = include_str!("../../../book/src/averages.md")]
    mod averages {}
    #[doc = include_str!("../../../book/src/markov.md")]
    mod markov {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
