//! Offline reinforcement learning workbench.
//!
//! Exact dynamic-programming oracles for finite MDPs, offline dataset
//! samplers, off-policy estimators, pessimistic optimizers, coverage
//! diagnostics and a seeded experiment harness. Every quantity that has a
//! closed form is computed exactly so estimators can be checked against it.
//!
//! State-action tensors are stored flat with index `s * n_actions + a`.

pub mod coverage;
pub mod data;
pub mod error;
pub mod exec;
pub mod function_class;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod ope;
pub mod opt;
pub mod selection;

pub use error::{Error, Result};
pub use exec::Exec;
