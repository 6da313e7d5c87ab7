//! Desk-scale presets.
//!
//! The formula constants only make anchors observable for astronomically
//! large inputs, so runs at `n` around `2^16` use fixed window lengths and a
//! coarser match test. These values were calibrated by Monte Carlo sweeps
//! with the estimators in [`crate::lemmalab`]; every report produced with
//! them is flagged as desk scale.
//!
//! | knob                    | value                   |
//! |-------------------------|-------------------------|
//! | `alpha`, `kappa0`       | 0.4, 0.15               |
//! | `K1`                    | 256 (one level at `n = 2^16`) |
//! | level-1 search          | within 150 of the rescaled position |
//! | trace-anchor / pseudo   | 13 / 12 bits with no ones |
//! | anchor / pseudo         | 15 / 14 bits with no ones |
//! | super-anchor            | 17                      |
//! | spurious                | 24 bits with exactly 2 ones |

use crate::alignment::Level1Search;
use crate::anchors::LengthOverrides;
use crate::blocktest::TestParams;
use crate::channel::ChannelParams;
use crate::error::Result;
use crate::lemmalab::LabParams;
use crate::reconstruct::PipelineParams;

pub const ALPHA: f64 = 0.4;
pub const KAPPA0: f64 = 0.15;
pub const K1: usize = 256;
pub const LEVEL1: Level1Search = Level1Search::Windowed { radius: 150 };

pub const ANCHORS: LengthOverrides = LengthOverrides {
    trace_anchor_len: Some(13),
    trace_pseudo_len: Some(12),
    trace_pseudo_cap: Some(0),
    anchor_len: Some(15),
    pseudo_len: Some(14),
    pseudo_cap: Some(0),
    super_anchor_len: Some(17),
    super_pseudo_cap: Some(0),
    spurious_len: Some(24),
    spurious_cap: Some(2),
};

pub fn test_params() -> TestParams {
    TestParams { alpha: ALPHA, kappa0: KAPPA0, desk_override: true }
}

/// Pipeline preset for deletion probability `q`, 16 traces.
pub fn pipeline(q: f64) -> Result<PipelineParams> {
    let mut p = PipelineParams::new(ChannelParams::new(q)?, test_params());
    p.k1 = K1;
    p.level1 = LEVEL1;
    p.anchor_overrides = ANCHORS;
    Ok(p)
}

/// Estimator preset for deletion probability `q`, 8 traces.
pub fn lab(q: f64) -> Result<LabParams> {
    let mut p = LabParams::new(ChannelParams::new(q)?, test_params());
    p.k1 = K1;
    p.level1 = LEVEL1;
    p.anchor_overrides = ANCHORS;
    Ok(p)
}
