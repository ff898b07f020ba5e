//! Transfer-learning deep-RL navigation toolkit.
//!
//! A dueling Double-DQN with prioritized replay is trained across a library of
//! procedurally generated indoor corridors, then fine-tuned in unseen
//! environments with only the last few fully connected layers unfrozen.

pub mod action;
pub mod env;
pub mod eval;
pub mod nn;
pub mod replay;
pub mod trainer;
