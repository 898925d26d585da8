#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
//! Finite-element laboratory for a coupled heat / thin-layer Lamé / thick
//! Lamé system: a 3D heat field in a fluid box, a 2D elastic layer on the
//! faces of an immersed solid block, and 3D elasticity inside the block.

pub mod app;
pub mod assembly;
pub mod config;
pub mod error;
pub mod evolution;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod pencil;
pub mod resolvent;
pub mod verify;

pub use error::{Error, Result};
