//! Anchors: long runs of zeros with a single one exactly in the middle.
//!
//! Trace-side kinds (trace-anchor, trace-pseudo-anchor) decide whether an
//! aligned window is *j-good* or *j-spurious*; source-side kinds (anchor,
//! pseudo-anchor, super-anchor) define *useful* and *super-useful* source
//! positions, which only simulation code can evaluate.
//!
//! Lengths derive from `K2` with base-2 logarithms, `lg = log2(K2)`:
//!
//! | kind                | length                          | ones            |
//! |---------------------|---------------------------------|-----------------|
//! | trace-anchor        | `2 floor((2 + c0 p / 4) C9 lg) + 1` | exactly 1, middle |
//! | trace-pseudo-anchor | `ceil(C9 lg)`                   | `<= floor(1.5 C8 lg)` |
//! | anchor              | `4 floor(C9 lg / p) + 1`        | exactly 1, middle |
//! | pseudo-anchor       | `ceil(2 C9 lg / p)`             | `<= floor(lg / p)` |
//! | super-anchor        | odd part of `(4/p + c0) C9 lg`, at least `anchor_len + 2` | exactly 1, middle |
//!
//! Every length and cap can be overridden directly for small `K2`.

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentOutcome, Interval};
use crate::bitcore::{BitString, OnesPrefix};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnchorKind {
    TraceAnchor,
    TracePseudo,
    Anchor,
    Pseudo,
    SuperAnchor,
}

impl AnchorKind {
    pub fn has_single_middle_one(self) -> bool {
        matches!(self, AnchorKind::TraceAnchor | AnchorKind::Anchor | AnchorKind::SuperAnchor)
    }
}

/// Direct settings that replace the formula values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthOverrides {
    pub trace_anchor_len: Option<usize>,
    pub trace_pseudo_len: Option<usize>,
    pub trace_pseudo_cap: Option<usize>,
    pub anchor_len: Option<usize>,
    pub pseudo_len: Option<usize>,
    pub pseudo_cap: Option<usize>,
    pub super_anchor_len: Option<usize>,
    pub super_pseudo_cap: Option<usize>,
    pub spurious_len: Option<usize>,
    pub spurious_cap: Option<usize>,
}

impl LengthOverrides {
    pub fn is_empty(&self) -> bool {
        *self == LengthOverrides::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorParams {
    pub c0: f64,
    pub c8: f64,
    pub c9: f64,
    pub p: f64,
    pub k2: usize,
    pub overrides: LengthOverrides,
}

impl AnchorParams {
    pub fn new(c0: f64, c8: f64, c9: f64, p: f64, k2: usize) -> Self {
        AnchorParams { c0, c8, c9, p, k2, overrides: LengthOverrides::default() }
    }

    pub fn with_overrides(mut self, overrides: LengthOverrides) -> Self {
        self.overrides = overrides;
        self
    }

    pub fn lg(&self) -> f64 {
        (self.k2 as f64).log2()
    }

    /// Resolves formulas and overrides, then checks parity and orderings.
    pub fn lengths(&self) -> Result<AnchorLengths> {
        if !(self.c0 > 0.0 && self.c0 < 0.01) {
            return Err(invalid("c0", format!("must lie in (0, 0.01), got {}", self.c0)));
        }
        if !(self.c8 > 0.0) {
            return Err(invalid("C8", format!("must be positive, got {}", self.c8)));
        }
        if !(self.c9 > 0.0) {
            return Err(invalid("C9", format!("must be positive, got {}", self.c9)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid("p", format!("retention probability must lie in (0,1), got {}", self.p)));
        }
        if self.k2 < 2 {
            return Err(invalid("K2", format!("must be at least 2, got {}", self.k2)));
        }
        let (c0, c8, c9, p, lg) = (self.c0, self.c8, self.c9, self.p, self.lg());
        let o = &self.overrides;
        let floor = |v: f64| v.floor() as usize;
        let ceil = |v: f64| v.ceil() as usize;
        let lengths = AnchorLengths {
            trace_anchor_len: o.trace_anchor_len.unwrap_or(2 * floor((2.0 + 0.25 * c0 * p) * c9 * lg) + 1),
            trace_pseudo_len: o.trace_pseudo_len.unwrap_or(ceil(c9 * lg)),
            trace_pseudo_cap: o.trace_pseudo_cap.unwrap_or(floor(1.5 * c8 * lg)),
            anchor_len: o.anchor_len.unwrap_or(4 * floor(c9 * lg / p) + 1),
            pseudo_len: o.pseudo_len.unwrap_or(ceil(2.0 * c9 * lg / p)),
            pseudo_cap: o.pseudo_cap.unwrap_or(floor(lg / p)),
            super_anchor_len: o.super_anchor_len.unwrap_or(0),
            super_pseudo_cap: o.super_pseudo_cap.unwrap_or(floor(2.0 * c8 * lg / p)),
            spurious_len: o.spurious_len.unwrap_or(ceil(c9 * lg)),
            spurious_cap: o.spurious_cap.unwrap_or(floor(0.5 * lg)),
            k2: self.k2,
        };
        let mut lengths = lengths;
        if o.super_anchor_len.is_none() {
            // the c0 margin is below one bit for small K2, which would leave the
            // super-anchor shorter than the anchor it must contain
            let formula = round_down_odd(floor((4.0 / p + c0) * c9 * lg));
            lengths.super_anchor_len = formula.max(lengths.anchor_len + 2);
        }
        lengths.validate()?;
        Ok(lengths)
    }
}

fn round_down_odd(v: usize) -> usize {
    if v % 2 == 1 {
        v
    } else {
        v.saturating_sub(1).max(1)
    }
}

/// Resolved window lengths and one-count caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorLengths {
    pub trace_anchor_len: usize,
    pub trace_pseudo_len: usize,
    pub trace_pseudo_cap: usize,
    pub anchor_len: usize,
    pub pseudo_len: usize,
    pub pseudo_cap: usize,
    pub super_anchor_len: usize,
    pub super_pseudo_cap: usize,
    pub spurious_len: usize,
    pub spurious_cap: usize,
    pub k2: usize,
}

impl AnchorLengths {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("trace_anchor_len", self.trace_anchor_len),
            ("anchor_len", self.anchor_len),
            ("super_anchor_len", self.super_anchor_len),
        ] {
            if v % 2 == 0 {
                return Err(invalid(field, format!("must be odd so the middle is defined, got {v}")));
            }
        }
        for (field, v) in [
            ("trace_pseudo_len", self.trace_pseudo_len),
            ("pseudo_len", self.pseudo_len),
            ("spurious_len", self.spurious_len),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        if self.trace_pseudo_len >= self.trace_anchor_len {
            return Err(invalid("trace_pseudo_len", "must be shorter than trace_anchor_len"));
        }
        if !(self.pseudo_len < self.anchor_len && self.anchor_len < self.super_anchor_len) {
            return Err(invalid("anchor_len", "lengths must satisfy pseudo_len < anchor_len < super_anchor_len"));
        }
        Ok(())
    }

    /// Window length and ones cap for the capped kinds.
    fn capped(&self, kind: AnchorKind) -> Option<(usize, usize)> {
        match kind {
            AnchorKind::TracePseudo => Some((self.trace_pseudo_len, self.trace_pseudo_cap)),
            AnchorKind::Pseudo => Some((self.pseudo_len, self.pseudo_cap)),
            _ => None,
        }
    }

    pub fn len_of(&self, kind: AnchorKind) -> usize {
        match kind {
            AnchorKind::TraceAnchor => self.trace_anchor_len,
            AnchorKind::TracePseudo => self.trace_pseudo_len,
            AnchorKind::Anchor => self.anchor_len,
            AnchorKind::Pseudo => self.pseudo_len,
            AnchorKind::SuperAnchor => self.super_anchor_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorHit {
    pub interval: Interval,
    pub kind: AnchorKind,
    /// Index of the single one for the exactly-one kinds.
    pub one_position: Option<usize>,
}

impl AnchorHit {
    pub fn shifted(self, offset: usize) -> AnchorHit {
        AnchorHit {
            interval: Interval::new(self.interval.start + offset, self.interval.end + offset),
            kind: self.kind,
            one_position: self.one_position.map(|p| p + offset),
        }
    }
}

/// All windows of length `len` whose only one sits in the middle.
fn middle_one_hits(w: &BitString, prefix: &OnesPrefix, len: usize, kind: AnchorKind) -> Vec<AnchorHit> {
    let half = len / 2;
    let mut hits = Vec::new();
    if w.len() < len {
        return hits;
    }
    for c in half..w.len() - half {
        if w.get(c) && prefix.ones(c - half, c + half + 1) == 1 {
            hits.push(AnchorHit {
                interval: Interval::new(c - half, c + half + 1),
                kind,
                one_position: Some(c),
            });
        }
    }
    hits
}

/// Starts of all windows of length `len` with at most `cap` ones.
fn low_weight_starts(prefix: &OnesPrefix, len: usize, cap: usize) -> impl Iterator<Item = usize> + '_ {
    let last = (prefix.len() + 1).saturating_sub(len);
    (0..last).filter(move |&s| prefix.ones(s, s + len) <= cap)
}

fn hits_of(w: &BitString, prefix: &OnesPrefix, kind: AnchorKind, lengths: &AnchorLengths) -> Vec<AnchorHit> {
    match lengths.capped(kind) {
        Some((len, cap)) => low_weight_starts(prefix, len, cap)
            .map(|s| AnchorHit { interval: Interval::new(s, s + len), kind, one_position: None })
            .collect(),
        None => middle_one_hits(w, prefix, lengths.len_of(kind), kind),
    }
}

/// Sliding-window scan for every hit of `kind` in `w` (positions relative to `w`).
pub fn scan(w: &BitString, kind: AnchorKind, lengths: &AnchorLengths) -> Result<Vec<AnchorHit>> {
    let len = lengths.len_of(kind);
    if len > w.len() {
        return Err(Error::TooShort(format!("{kind:?} length {len} exceeds window length {}", w.len())));
    }
    Ok(hits_of(w, &OnesPrefix::new(w), kind, lengths))
}

/// Exactly one trace-anchor, and no trace-pseudo-anchor disjoint from it.
pub fn is_j_good(window: &BitString, lengths: &AnchorLengths) -> (bool, Option<AnchorHit>) {
    let prefix = OnesPrefix::new(window);
    let anchors = middle_one_hits(window, &prefix, lengths.trace_anchor_len, AnchorKind::TraceAnchor);
    let [hit] = anchors[..] else {
        return (false, None);
    };
    let disjoint_pseudo = low_weight_starts(&prefix, lengths.trace_pseudo_len, lengths.trace_pseudo_cap)
        .any(|s| !Interval::new(s, s + lengths.trace_pseudo_len).intersects(&hit.interval));
    if disjoint_pseudo {
        (false, None)
    } else {
        (true, Some(hit))
    }
}

/// Some window of `spurious_len` holds between 2 and `spurious_cap` ones.
pub fn is_j_spurious(window: &BitString, lengths: &AnchorLengths) -> bool {
    if lengths.spurious_cap < 2 || window.len() < lengths.spurious_len {
        return false;
    }
    let prefix = OnesPrefix::new(window);
    let len = lengths.spurious_len;
    (0..=window.len() - len).any(|s| {
        let ones = prefix.ones(s, s + len);
        (2..=lengths.spurious_cap).contains(&ones)
    })
}

/// Per-trace classification behind [`is_trace_useful`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceUsefulness {
    pub useful: bool,
    /// Indexed by `t - 1` for `t = 1..=T`.
    pub good: Vec<bool>,
    pub spurious: Vec<bool>,
    /// Trace-anchor of each good trace, in that trace's coordinates.
    pub hits: Vec<Option<AnchorHit>>,
    pub good_count: usize,
    pub spurious_count: usize,
}

/// Thresholds: at least `p T / 2` good traces and at most `p^2 T / 8` spurious ones.
pub fn trace_useful_thresholds(p: f64, t: usize) -> (f64, f64) {
    (0.5 * p * t as f64, 0.125 * p * p * t as f64)
}

/// Classifies every trace's final window, trace 1 included (its window is
/// `[j - K2, j + K2)`); empty windows are neither good nor spurious.
pub fn is_trace_useful(outcome: &AlignmentOutcome, traces: &[BitString], lengths: &AnchorLengths, p: f64) -> TraceUsefulness {
    let total = traces.len();
    let mut good = vec![false; total];
    let mut spurious = vec![false; total];
    let mut hits = vec![None; total];
    for t in 1..=total {
        let Some(w) = outcome.window_of(t) else { continue };
        let window = traces[t - 1].slice(w.start, w.end);
        let (is_good, hit) = is_j_good(&window, lengths);
        good[t - 1] = is_good;
        hits[t - 1] = hit.map(|h| h.shifted(w.start));
        spurious[t - 1] = is_j_spurious(&window, lengths);
    }
    let good_count = good.iter().filter(|&&g| g).count();
    let spurious_count = spurious.iter().filter(|&&s| s).count();
    let (need_good, max_spurious) = trace_useful_thresholds(p, total);
    TraceUsefulness {
        useful: good_count as f64 >= need_good && spurious_count as f64 <= max_spurious,
        good,
        spurious,
        hits,
        good_count,
        spurious_count,
    }
}

/// `[pos - K2, pos + K2]` as a half-open interval, if it fits in `x`.
fn neighbourhood(x: &BitString, pos: usize, k2: usize) -> Result<Interval> {
    if pos < k2 || pos + k2 >= x.len() {
        return Err(Error::OutOfRange(format!("neighbourhood {pos} ± {k2} leaves string of length {}", x.len())));
    }
    Ok(Interval::new(pos - k2, pos + k2 + 1))
}

/// Exactly one anchor in `x[pos - K2, pos + K2]` and no pseudo-anchor disjoint from it.
pub fn source_useful(x: &BitString, pos: usize, lengths: &AnchorLengths) -> Result<bool> {
    Ok(source_anchor(x, pos, lengths)?.is_some())
}

/// The unique anchor (in `x` coordinates) when `pos` is useful.
pub fn source_anchor(x: &BitString, pos: usize, lengths: &AnchorLengths) -> Result<Option<AnchorHit>> {
    let nb = neighbourhood(x, pos, lengths.k2)?;
    let w = x.slice(nb.start, nb.end);
    let prefix = OnesPrefix::new(&w);
    let anchors = middle_one_hits(&w, &prefix, lengths.anchor_len, AnchorKind::Anchor);
    let [hit] = anchors[..] else { return Ok(None) };
    let disjoint = low_weight_starts(&prefix, lengths.pseudo_len, lengths.pseudo_cap)
        .any(|s| !Interval::new(s, s + lengths.pseudo_len).intersects(&hit.interval));
    Ok((!disjoint).then(|| hit.shifted(nb.start)))
}

/// A super-anchor centred at `pos`, and no window of `pseudo_len` with at
/// most `super_pseudo_cap` ones inside the neighbourhood and disjoint from it.
pub fn source_super_useful(x: &BitString, pos: usize, lengths: &AnchorLengths) -> Result<bool> {
    let nb = neighbourhood(x, pos, lengths.k2)?;
    let half = lengths.super_anchor_len / 2;
    if pos < half || pos + half >= x.len() || !x.get(pos) || x.count_ones_in(pos - half, pos + half + 1) != 1 {
        return Ok(false);
    }
    let anchor = Interval::new(pos - half, pos + half + 1);
    let w = x.slice(nb.start, nb.end);
    let prefix = OnesPrefix::new(&w);
    let len = lengths.pseudo_len;
    let disjoint = low_weight_starts(&prefix, len, lengths.super_pseudo_cap)
        .any(|s| !Interval::new(nb.start + s, nb.start + s + len).intersects(&anchor));
    Ok(!disjoint)
}
