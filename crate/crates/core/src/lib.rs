//! Energy-optimized semantic loss (EOSL) for choosing between semantic
//! encoder/decoder models.
//!
//! EOSL adds four weighted terms per transmission attempt: semantic noise
//! (`1 - similarity`), block channel loss, and communication and semantic
//! energy each normalized by the largest value in the candidate set. Lower
//! is better.

pub mod channel;
pub mod config;
pub mod energy;
pub mod eosl;
pub mod error;
pub mod selection;
pub mod similarity;

pub use error::{Error, ErrorKind, Result};
