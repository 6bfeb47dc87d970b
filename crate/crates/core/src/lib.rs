//! Synthesis of SMT-LIB stubs for opaque stateless functions.
//!
//! Pipeline: sample an oracle ([`sampler`]), evolve an expression over a typed
//! grammar ([`gp`]) scored by [`fitness`], translate the winner to SMT-LIB
//! ([`smtlib`]) and measure it against a solver ([`bench`]).

pub mod bench;
pub mod cli;
pub mod eval;
pub mod fitness;
pub mod gp;
pub mod grammar;
pub mod oracles;
pub mod pipeline;
pub mod sampler;
pub mod smtlib;
pub mod values;
