//! Command-line front end, file formats and parallel sweeps for paired
//! binary equivalence tests.

pub mod cli;
pub mod io;
pub mod sweep;
