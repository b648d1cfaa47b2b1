#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod aero;
pub mod atmosphere;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod ppo;
pub mod scenario;
pub mod tgo;

pub use error::{Error, Result};
