//! CHC satisfiability solving by combining symbolic zone reasoning with
//! data-driven invariant learning.
//!
//! The crate is organized around a small expression language ([`expr`]),
//! Horn clause systems over it ([`chc`]), a Z3 backend ([`smt`]), the
//! symbolic reasoner that grows reachable/doomed zones ([`reasoner`]), a
//! dataset of labeled program states ([`dataset`]), an SVM + decision-tree
//! learner ([`learner`]), and the guess-and-check driver ([`engine`]).

pub mod chc;
pub mod dataset;
pub mod engine;
pub mod learner;
pub mod parse;
pub mod reasoner;
pub mod eval;
pub mod expr;
pub mod smt;
