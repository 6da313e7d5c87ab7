//! Approximate trace reconstruction over the binary deletion channel.
//!
//! The pipeline aligns traces with a block-majority match test, looks for
//! isolated-one anchors in the aligned windows, reconstructs a chunk after
//! each usable anchor and concatenates the chunks. Simulation helpers record
//! the provenance of every trace bit so the probabilistic building blocks
//! can be checked by Monte Carlo (see [`lemmalab`]).

pub mod alignment;
pub mod anchors;
pub mod bitcore;
pub mod blocktest;
pub mod channel;
pub mod codedtr;
pub mod desk;
pub mod editdist;
pub mod error;
pub mod lemmalab;
pub mod prefixrecon;
pub mod reconstruct;

pub use bitcore::{maj, sample_uniform, BitString, RngHandle, Stream};
pub use error::{Error, Result};
