//! Deceptive density control for teams of agents.
//!
//! A team allocates its members over goal cells according to the equilibrium
//! of a zero-sum matrix game. An adversary who does not know which utility
//! matrix is in play predicts the team's motion as the maximum-entropy policy
//! realizing each candidate equilibrium. The team then moves so that, for a
//! while, its density looks like a decoy (exaggeration) or like no candidate
//! in particular (ambiguity), before settling into the true allocation.
//!
//! * [`mdp`]: MDPs, policies, occupancy measures, grids, the layered MDP.
//! * [`game`]: matrix games and max-entropy equilibria.
//! * [`solver`]: LP / relative-entropy program front end.
//! * [`prediction`]: the adversary's predicted policies.
//! * [`deception`]: exaggeration and ambiguity synthesis.
//! * [`observer`]: divergences, deceptiveness scores, likelihood-ratio tests.
//! * [`scenario`], [`pipeline`], [`artifacts`]: file formats and orchestration.

pub mod artifacts;
pub mod deception;
pub mod error;
pub mod flow;
pub mod game;
pub mod mdp;
pub mod observer;
pub mod pipeline;
pub mod prediction;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
