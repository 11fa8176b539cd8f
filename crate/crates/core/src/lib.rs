//! Simulator for quantum homomorphic encryption built from teleportation
//! gadgets.

pub mod acceptance;
pub mod barrington;
pub mod bench;
pub mod boolcircuit;
pub mod classical_he;
pub mod demo;
pub mod doc;
pub mod error;
pub mod funcexpr;
pub mod gadget;
pub mod gardenhose;
pub mod quantum;
pub mod session;
pub mod tp;

pub use error::{QheError, Result};
