//! Block-majority match test between two equal-length windows.
//!
//! A window of length `m` is cut into `floor(m^alpha)` contiguous,
//! left-aligned blocks of length `floor(m / block_count)`; leftover bits at
//! the end are ignored. The windows match when strictly more than
//! `(1/2 + kappa0) * block_count` blocks have the same majority bit.

use serde::{Deserialize, Serialize};

use crate::bitcore::{BitString, OnesPrefix};
use crate::error::{invalid, Error, Result};

/// Paper range for the block exponent.
pub const ALPHA_RANGE: (f64, f64) = (0.49, 0.5);
/// Range accepted when the desk-scale override is on.
pub const DESK_ALPHA_RANGE: (f64, f64) = (0.3, 0.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub alpha: f64,
    pub kappa0: f64,
    /// Set when `alpha` lies outside the standard range; reported with results.
    pub desk_override: bool,
}

impl TestParams {
    pub fn new(alpha: f64, kappa0: f64, desk_override: bool) -> Result<Self> {
        let params = TestParams { alpha, kappa0, desk_override };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = if self.desk_override { DESK_ALPHA_RANGE } else { ALPHA_RANGE };
        if !(self.alpha > lo && self.alpha < hi) {
            let hint = if self.desk_override { "" } else { " (desk override unlocks (0.3, 0.5))" };
            return Err(invalid("alpha", format!("must lie in ({lo}, {hi}), got {}{hint}", self.alpha)));
        }
        if !(self.kappa0 > 0.0 && self.kappa0 < 0.5) {
            return Err(invalid("kappa0", format!("must lie in (0, 0.5), got {}", self.kappa0)));
        }
        Ok(())
    }

    /// Whether `alpha` sits outside the standard range.
    pub fn is_desk_scale(&self) -> bool {
        !(self.alpha > ALPHA_RANGE.0 && self.alpha < ALPHA_RANGE.1)
    }
}

impl Default for TestParams {
    fn default() -> Self {
        TestParams { alpha: 0.495, kappa0: 0.05, desk_override: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub block_count: usize,
    pub block_len: usize,
}

impl BlockSchedule {
    pub fn used_len(&self) -> usize {
        self.block_count * self.block_len
    }
}

/// `floor(v)`, except that values within rounding noise of an integer snap to it
/// (`4096f64.powf(0.5)` must give 64, not 63).
pub(crate) fn floor_snap(v: f64) -> usize {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        v.floor() as usize
    }
}

pub fn block_schedule(m: usize, alpha: f64) -> Result<BlockSchedule> {
    let block_count = if m == 0 { 0 } else { floor_snap((m as f64).powf(alpha)) };
    if m < 4 || block_count < 2 {
        return Err(Error::TooShort(format!(
            "window length {m} yields {block_count} blocks at alpha={alpha}; at least 2 are needed"
        )));
    }
    Ok(BlockSchedule { block_count, block_len: m / block_count })
}

/// The acceptance rule `agree > (1/2 + kappa0) * blocks`.
#[inline]
pub fn threshold_met(agree: usize, blocks: usize, kappa0: f64) -> bool {
    agree as f64 > (0.5 + kappa0) * blocks as f64
}

/// Smallest agreement count that passes the threshold.
pub fn min_agreement(blocks: usize, kappa0: f64) -> usize {
    let t = (0.5 + kappa0) * blocks as f64;
    t.floor() as usize + 1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub matched: bool,
    pub agree_count: usize,
    pub block_count: usize,
    pub sigma: Vec<bool>,
}

pub fn test_match(u: &BitString, v: &BitString, params: &TestParams) -> Result<TestVerdict> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    let sched = block_schedule(u.len(), params.alpha)?;
    let sigma: Vec<bool> = (0..sched.block_count)
        .map(|k| {
            let (a, b) = (k * sched.block_len, (k + 1) * sched.block_len);
            let mu = 2 * u.count_ones_in(a, b) > b - a;
            let mv = 2 * v.count_ones_in(a, b) > b - a;
            mu == mv
        })
        .collect();
    let agree_count = sigma.iter().filter(|&&s| s).count();
    Ok(TestVerdict {
        matched: threshold_met(agree_count, sched.block_count, params.kappa0),
        agree_count,
        block_count: sched.block_count,
        sigma,
    })
}

/// Reusable form of [`test_match`] for sliding one reference window over a
/// trace: the reference majorities are computed once and candidates are read
/// from prefix popcounts.
#[derive(Debug, Clone)]
pub struct WindowMatcher {
    schedule: BlockSchedule,
    reference: Vec<bool>,
    needed: usize,
}

impl WindowMatcher {
    pub fn new(reference: &OnesPrefix, start: usize, m: usize, params: &TestParams) -> Result<Self> {
        let schedule = block_schedule(m, params.alpha)?;
        if start + m > reference.len() {
            return Err(Error::OutOfRange(format!("reference window {start}..{} beyond length {}", start + m, reference.len())));
        }
        let reference = (0..schedule.block_count)
            .map(|k| {
                let a = start + k * schedule.block_len;
                reference.maj(a, a + schedule.block_len)
            })
            .collect();
        Ok(WindowMatcher {
            schedule,
            reference,
            needed: min_agreement(schedule.block_count, params.kappa0),
        })
    }

    pub fn window_len(&self) -> usize {
        self.schedule.used_len()
    }

    /// Verdict for the candidate window starting at `start`; stops early once
    /// the outcome is decided.
    pub fn matches_at(&self, candidate: &OnesPrefix, start: usize) -> bool {
        let blocks = self.schedule.block_count;
        let len = self.schedule.block_len;
        let mut agree = 0;
        for (k, &r) in self.reference.iter().enumerate() {
            let a = start + k * len;
            if candidate.maj(a, a + len) == r {
                agree += 1;
                if agree >= self.needed {
                    return true;
                }
            } else if agree + (blocks - k - 1) < self.needed {
                return false;
            }
        }
        agree >= self.needed
    }
}
