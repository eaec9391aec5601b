//! Quaternionic models of Reeb and magnetic flows on `S3` and `ST*S2`.

pub mod census;
pub mod cover;
pub mod dynamics;
pub mod error;
pub mod finsler;
pub mod forms;
pub mod quat;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
