//! Model checking and equilibrium synthesis for responsibility-aware agents
//! in parametric concurrent stochastic games.

pub mod checker;
pub mod logic;
pub mod model;
pub mod oracle;
pub mod polyarith;
pub mod synth;
pub mod trace;
