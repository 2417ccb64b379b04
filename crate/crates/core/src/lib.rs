pub mod config;
pub mod error;
pub mod floer;
pub mod gluing;
pub mod grid;
pub mod linalg;
pub mod linear;
pub mod report;
pub mod scale;
pub mod sparse;
pub mod suite;
pub mod verify;

pub use error::{Error, Result};
