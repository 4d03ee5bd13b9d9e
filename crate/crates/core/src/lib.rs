//! Spectral-Galerkin simulation of Landau-Lifshitz(-Gilbert) flows whose
//! values lie in a compact Lie algebra.

pub mod algebra;
pub mod cli;
pub mod config;
pub mod demag;
pub mod domain;
pub mod error;
pub mod flow;
pub mod selftest;
pub mod verify;

pub use error::{Error, Result};
