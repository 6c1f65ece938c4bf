//! Library surface of the experiment runner, exposed so integration tests
//! can drive runs without shelling out to the binary.

pub mod aggregate;
pub mod config;
pub mod refz;
pub mod runner;
