//! Reactive Turing machines, sets with atoms, and branching bisimilarity.

pub mod atoms;
pub mod orbitsets;
pub mod lts;
pub mod bisim;
pub mod rtm;
pub mod rtm_atoms;
pub mod compilers;
pub mod pi;
pub mod cli;
mod syntax;

pub use syntax::ParseError;
