//! Existential fixed point logic: parsing, finite-structure model checking,
//! Gödel encoding of the syntax into a meta-structure, and a machine-generated
//! truth predicate checked against the native evaluator.

pub mod evaluator;
pub mod meta;
pub mod metacheck;
pub mod parser;
pub mod satgen;
pub mod structure;
pub mod syntax;
pub mod tabled;
