//! The L-Game: rules engine, retrograde solver, a from-scratch Q-network and
//! self-play Deep Q-Learning with whole-game experience replay.

pub mod arena;
pub mod cli;
pub mod game;
pub mod neural;
pub mod rng;
pub mod solver;
pub mod trainer;
