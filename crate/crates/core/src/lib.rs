//! Exact desk-scale computation of noise stability, influences and the
//! semigroup inequalities that relate them.
//!
//! The crate is organised by model: finite measured spaces ([`space`]) and
//! their reversible Markov generators ([`markov`]), the discrete cube
//! ([`boolean`]), Gaussian space through Hermite expansions ([`gauss`]) and
//! Cayley-graph walks ([`groups`]). [`bounds`] evaluates the inequalities and
//! sweeps them against exact left-hand sides; [`junta`] extracts junta
//! approximations.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boolean;
pub mod bounds;
pub mod error;
pub mod gauss;
pub mod groups;
pub mod junta;
pub mod markov;
pub mod mc;
pub mod quad;
pub mod space;

pub use error::{Error, Result};
pub use boolean::{CubeFunction, WalshExpansion};
pub use markov::{Direction, Generator, SemigroupEvolution, SparseOperator};
pub use space::{FiniteProductSpace, TableFunction};
