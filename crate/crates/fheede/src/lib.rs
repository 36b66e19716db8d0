//! Binary formats, PGM IO, profile files and the `fheede` command line.

pub mod cli;
pub mod config;
pub mod format;
pub mod pgm;
