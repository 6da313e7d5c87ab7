//! Prefix reconstruction from aligned trace suffixes.
//!
//! Every suffix starts just after a surviving anchor 1, so all of them begin
//! at (nearly) the same source position. A strategy turns them into the first
//! `k` bits of the source from that point. Strategies are looked up by name
//! in a [`StrategyRegistry`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bitcore::BitString;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixTask {
    pub suffixes: Vec<BitString>,
    pub k: usize,
    pub p: f64,
    /// Ground-truth source suffix; only simulation code fills this in.
    pub truth: Option<BitString>,
}

impl PrefixTask {
    pub fn new(suffixes: Vec<BitString>, k: usize, p: f64) -> Self {
        PrefixTask { suffixes, k, p, truth: None }
    }

    pub fn with_truth(mut self, truth: BitString) -> Self {
        self.truth = Some(truth);
        self
    }

    /// Largest `k` the coverage guard admits, `floor(p * min |suffix|)`.
    pub fn max_k(&self) -> usize {
        let shortest = self.suffixes.iter().map(BitString::len).min().unwrap_or(0);
        (self.p * shortest as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.suffixes.len() < 2 {
            return Err(Error::TooShort(format!("prefix reconstruction needs at least 2 suffixes, got {}", self.suffixes.len())));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(invalid("p", format!("must lie in (0, 1], got {}", self.p)));
        }
        if self.k > self.max_k() {
            return Err(invalid("k", format!("{} exceeds the coverage bound {}", self.k, self.max_k())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixResult {
    pub bits: BitString,
    /// Vote margin `|ones - zeros| / voters` per output bit.
    pub confidence: Vec<f64>,
}

pub trait PrefixStrategy: Send + Sync {
    fn name(&self) -> &str;

    fn reconstruct(&self, task: &PrefixTask) -> Result<PrefixResult>;

    /// Whole-string reconstruction from complete traces, used when the input
    /// is too short for the anchored pipeline. `task.k` is the length hint and
    /// the coverage guard does not apply.
    fn reconstruct_full(&self, task: &PrefixTask) -> Result<PrefixResult> {
        Ok(Bma::run(&task.suffixes, task.k, task.p))
    }
}

/// Bitwise majority alignment.
///
/// Each suffix has a cursor. An output bit is the strict majority of the bits
/// under the live cursors (ties give 0). Cursors whose bit agrees advance by
/// one; a disagreeing cursor stays put, unless it has now disagreed
/// `ceil(1/p)` times in a row, in which case it advances too.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bma;

impl Bma {
    /// Runs up to `k` steps without the coverage guard, stopping early once
    /// every cursor has run off its suffix.
    pub fn run(suffixes: &[BitString], k: usize, p: f64) -> PrefixResult {
        let patience = (1.0 / p).ceil().max(1.0) as usize;
        let mut cursors = vec![0usize; suffixes.len()];
        let mut misses = vec![0usize; suffixes.len()];
        let mut bits = BitString::with_capacity(k);
        let mut confidence = Vec::with_capacity(k);
        for _ in 0..k {
            let (mut ones, mut voters) = (0usize, 0usize);
            for (s, &c) in suffixes.iter().zip(&cursors) {
                if c < s.len() {
                    voters += 1;
                    ones += s.get(c) as usize;
                }
            }
            if voters == 0 {
                break;
            }
            let bit = 2 * ones > voters;
            bits.push(bit);
            confidence.push(ones.abs_diff(voters - ones) as f64 / voters as f64);
            for ((s, c), miss) in suffixes.iter().zip(cursors.iter_mut()).zip(misses.iter_mut()) {
                if *c >= s.len() {
                    continue;
                }
                if s.get(*c) == bit {
                    *c += 1;
                    *miss = 0;
                } else {
                    *miss += 1;
                    if *miss >= patience {
                        *c += 1;
                        *miss = 0;
                    }
                }
            }
        }
        PrefixResult { bits, confidence }
    }
}

impl PrefixStrategy for Bma {
    fn name(&self) -> &str {
        "bma"
    }

    fn reconstruct(&self, task: &PrefixTask) -> Result<PrefixResult> {
        task.validate()?;
        Ok(Bma::run(&task.suffixes, task.k, task.p))
    }
}

/// Returns the true source bits; an upper bound for error attribution.
#[derive(Debug, Clone, Copy, Default)]
pub struct Oracle;

impl PrefixStrategy for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn reconstruct(&self, task: &PrefixTask) -> Result<PrefixResult> {
        task.validate()?;
        let truth = task.truth.as_ref().ok_or(Error::ProvenanceMissing)?;
        let k = task.k.min(truth.len());
        Ok(PrefixResult { bits: truth.slice(0, k), confidence: vec![1.0; k] })
    }

    fn reconstruct_full(&self, task: &PrefixTask) -> Result<PrefixResult> {
        let truth = task.truth.as_ref().ok_or(Error::ProvenanceMissing)?;
        Ok(PrefixResult { bits: truth.clone(), confidence: vec![1.0; truth.len()] })
    }
}

#[derive(Clone, Default)]
pub struct StrategyRegistry {
    strategies: BTreeMap<String, Arc<dyn PrefixStrategy>>,
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.strategies.keys()).finish()
    }
}

impl StrategyRegistry {
    pub fn new() -> Self {
        StrategyRegistry::default()
    }

    /// Registry holding `"bma"` and `"oracle"`.
    pub fn with_defaults() -> Self {
        let mut r = StrategyRegistry::new();
        r.register("bma", Arc::new(Bma)).expect("fresh registry");
        r.register("oracle", Arc::new(Oracle)).expect("fresh registry");
        r
    }

    pub fn register(&mut self, name: &str, strategy: Arc<dyn PrefixStrategy>) -> Result<()> {
        if self.strategies.contains_key(name) {
            return Err(Error::DuplicateStrategy(name.to_string()));
        }
        self.strategies.insert(name.to_string(), strategy);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn PrefixStrategy>> {
        self.strategies.get(name).cloned().ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.strategies.keys().map(String::as_str)
    }
}

/// Runs the default BMA strategy.
pub fn reconstruct_prefix(task: &PrefixTask) -> Result<PrefixResult> {
    Bma.reconstruct(task)
}
