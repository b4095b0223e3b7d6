// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controllers;
pub mod error;
pub mod error_state;
pub mod output;
mod par;
pub mod riccati;
pub mod rotations;
pub mod simulation;
pub mod sweep;
pub mod trajectory;
pub mod vehicle;
pub mod verify;

pub use error::{Error, Result};
