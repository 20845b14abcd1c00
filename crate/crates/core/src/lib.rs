//! Stochastic HYPE: parse models, compile them to transition-driven
//! stochastic hybrid automata and simulate the resulting PDMP.

pub mod compiler;
pub mod model;
pub mod parser;
pub mod simulator;
pub mod tdsha;
