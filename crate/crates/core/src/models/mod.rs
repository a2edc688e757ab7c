//! Benchmark problems.

pub mod adr;
pub mod burgers;
pub mod kl;
pub mod toy;

pub use adr::{AdrModel, AdrSpec};
pub use burgers::{BurgersModel, BurgersSpec};
pub use toy::{ToyModel, ToySpec};
