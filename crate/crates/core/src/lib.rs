//! Harmonic analysis on finite windows of trees rooted at infinity.
//!
//! The crate works with flow measures on a window (the tent of an apex cut
//! at a bottom level) and implements the trapezoid calculus, maximal
//! operators, Calderón–Zygmund and atomic decompositions, BMO norms, dyadic
//! families and kernel conditions on top of it. All measure identities are
//! evaluated in exact rational arithmetic.

pub mod czd;
pub mod dyadic;
pub mod error;
pub mod function;
pub mod generate;
pub mod hardy;
pub mod maximal;
pub mod measure;
pub mod operators;
pub mod rational;
pub mod spec_io;
pub mod trapezoid;
pub mod tree;

pub use error::{Error, Result};
pub use function::VertexFunction;
pub use measure::FlowMeasure;
pub use rational::Q;
pub use trapezoid::{FamilyConfig, Trapezoid};
pub use tree::{TreeWindow, VertexId};
