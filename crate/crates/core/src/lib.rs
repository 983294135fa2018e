#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cubes;
pub mod error;
pub mod extension;
pub mod families;
pub mod grid;
pub mod harness;
pub mod io;
pub mod littlewood_paley;
pub mod norms;
pub mod pde;
pub mod spectral;

pub use error::{Error, Result};
pub use littlewood_paley::Exponent;
