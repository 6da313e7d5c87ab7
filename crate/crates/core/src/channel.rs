//! The binary deletion channel with recorded retention variables.
//!
//! Provenance is 1-based, matching the identity `g_U(j) = l` iff
//! `r_1 + ... + r_l = j`. Every other API in the crate is 0-based; use
//! [`TraceRecord::source_index`] to convert.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitcore::{BitString, RngHandle};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    q: f64,
}

impl ChannelParams {
    /// Deletion probability `q`, strictly inside (0, 1).
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(invalid("q", format!("deletion probability must lie in (0,1), got {q}")));
        }
        Ok(ChannelParams { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Retention probability `1 - q`.
    pub fn p(&self) -> f64 {
        1.0 - self.q
    }
}

/// A trace together with the simulation ground truth that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub trace: BitString,
    pub retention_mask: BitString,
    provenance: Vec<usize>,
}

impl TraceRecord {
    /// `g_U(j)` in 1-based coordinates on both sides.
    pub fn g(&self, j: usize) -> usize {
        assert!(j >= 1 && j <= self.provenance.len(), "trace index {j} out of 1..={}", self.provenance.len());
        self.provenance[j - 1]
    }

    /// 0-based source index of 0-based trace position `i`.
    pub fn source_index(&self, i: usize) -> usize {
        self.provenance[i] - 1
    }

    /// Entry `k` holds `g_U(k + 1)` (1-based).
    pub fn provenance(&self) -> &[usize] {
        &self.provenance
    }

    pub fn source_len(&self) -> usize {
        self.retention_mask.len()
    }
}

/// Retention variables for a source of length `n`: independent Bernoulli(p).
pub fn sample_mask(n: usize, params: ChannelParams, rng: &mut RngHandle) -> BitString {
    let p = params.p();
    (0..n).map(|_| rng.gen_bool(p)).collect()
}

/// Passes `x` through the deletion channel.
pub fn transmit(x: &BitString, params: ChannelParams, rng: &mut RngHandle) -> TraceRecord {
    let mask = sample_mask(x.len(), params, rng);
    transmit_with_mask(x, &mask).expect("mask sampled at source length")
}

/// Deterministic replay: keeps exactly the positions where `mask` is one.
pub fn transmit_with_mask(x: &BitString, mask: &BitString) -> Result<TraceRecord> {
    if x.len() != mask.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: mask.len() });
    }
    let kept = mask.count_ones();
    let mut trace = BitString::with_capacity(kept);
    let mut provenance = Vec::with_capacity(kept);
    for (l, retained) in mask.iter().enumerate() {
        if retained {
            trace.push(x.get(l));
            provenance.push(l + 1);
        }
    }
    Ok(TraceRecord { trace, retention_mask: mask.clone(), provenance })
}

/// `count` independent traces; trace `t` uses `rng.derive(t)`.
pub fn transmit_many(x: &BitString, params: ChannelParams, count: usize, rng: &RngHandle) -> Vec<TraceRecord> {
    (0..count)
        .map(|t| transmit(x, params, &mut rng.derive(t as u64)))
        .collect()
}
