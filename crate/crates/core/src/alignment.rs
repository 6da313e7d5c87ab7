//! Iterative alignment of every trace against the neighborhood of index `j`
//! in trace 1.
//!
//! Lengths shrink as `L_1 = floor(sqrt(n))`, `L_{r+1} = floor(sqrt(L_r))`
//! until `L_R <= K1`. At level `r` the reference is `U1[j - 2L_r, j - L_r)`;
//! in trace `t` the leftmost matching window `[s, s + L_r)` is taken and the
//! next level searches `[s + L_r, s + 3L_r)`.
//!
//! Intervals are half-open. The final window of a trace therefore has length
//! `2 K2`, and the trace-1 counterpart is `[j - K2, j + K2)`.

use serde::{Deserialize, Serialize};

use crate::bitcore::{BitString, OnesPrefix};
use crate::blocktest::{TestParams, WindowMatcher};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignSchedule {
    /// `L_1, ..., L_R`.
    pub levels: Vec<usize>,
    pub k1: usize,
}

impl AlignSchedule {
    /// Stop level `R` (1-based count of levels).
    pub fn stop_level(&self) -> usize {
        self.levels.len()
    }

    /// Final length `K2 = L_R`.
    pub fn k2(&self) -> usize {
        *self.levels.last().expect("schedule has at least one level")
    }

    pub fn l1(&self) -> usize {
        self.levels[0]
    }
}

pub fn build_schedule(n: usize, k1: usize) -> Result<AlignSchedule> {
    if k1 < 4 {
        return Err(invalid("K1", format!("must be at least 4, got {k1}")));
    }
    if k1 > n {
        return Err(invalid("K1", format!("{k1} exceeds the string length {n}; alignment is unnecessary")));
    }
    let mut levels = vec![n.isqrt()];
    while *levels.last().unwrap() > k1 {
        let next = levels.last().unwrap().isqrt();
        levels.push(next);
    }
    Ok(AlignSchedule { levels, k1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Interval { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// True when the two share at least one position.
    pub fn intersects(&self, other: &Interval) -> bool {
        !self.is_empty() && !other.is_empty() && self.start < other.end && other.start < self.end
    }
}

/// Where level 1 looks for the leftmost match in each trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level1Search {
    /// Every window of the trace.
    WholeTrace,
    /// Windows starting within `radius` of the length-rescaled position of
    /// the reference window.
    Windowed { radius: usize },
}

/// Per-trace outcome, `t >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceAlignment {
    /// `I_1, I_2, ...` as found; shorter than the schedule when a level failed.
    pub matched: Vec<Interval>,
    /// `Ĩ_R`, or `None` when some level found no match.
    pub window: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentOutcome {
    pub j: usize,
    /// Entry `i` belongs to trace `t = i + 2`.
    pub traces: Vec<TraceAlignment>,
    pub anchor_window_1: Interval,
    pub schedule: AlignSchedule,
}

impl AlignmentOutcome {
    pub fn windows(&self) -> impl Iterator<Item = Option<Interval>> + '_ {
        self.traces.iter().map(|t| t.window)
    }

    /// Final window for trace `t` (1-based); trace 1 gets `anchor_window_1`.
    pub fn window_of(&self, t: usize) -> Option<Interval> {
        if t == 1 {
            Some(self.anchor_window_1)
        } else {
            self.traces.get(t - 2).and_then(|a| a.window)
        }
    }
}

/// Holds per-trace prefix popcounts so repeated alignments (one per scanned
/// `j`) do not rebuild them.
#[derive(Debug, Clone)]
pub struct Aligner<'a> {
    traces: &'a [BitString],
    prefixes: Vec<OnesPrefix>,
    schedule: AlignSchedule,
    test: TestParams,
    search: Level1Search,
}

impl<'a> Aligner<'a> {
    pub fn new(traces: &'a [BitString], schedule: AlignSchedule, test: TestParams, search: Level1Search) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::TooShort("alignment needs at least trace 1".into()));
        }
        test.validate()?;
        Ok(Aligner {
            prefixes: traces.iter().map(OnesPrefix::new).collect(),
            traces,
            schedule,
            test,
            search,
        })
    }

    pub fn schedule(&self) -> &AlignSchedule {
        &self.schedule
    }

    pub fn prefix(&self, t: usize) -> &OnesPrefix {
        &self.prefixes[t - 1]
    }

    /// Valid `j` satisfy `2 L_1 <= j` and `j + K2 <= |U1|`.
    pub fn j_bounds(&self) -> (usize, usize) {
        let len1 = self.traces[0].len();
        let lo = 2 * self.schedule.l1();
        let hi = len1.saturating_sub(self.schedule.k2());
        (lo, hi)
    }

    pub fn align(&self, j: usize) -> Result<AlignmentOutcome> {
        let (lo, hi) = self.j_bounds();
        if j < lo || j > hi {
            return Err(Error::OutOfRange(format!("j = {j} outside [{lo}, {hi}] for trace 1 of length {}", self.traces[0].len())));
        }
        // reference matchers are shared by every trace
        let mut matchers = Vec::with_capacity(self.schedule.levels.len());
        for &l in &self.schedule.levels {
            matchers.push(WindowMatcher::new(&self.prefixes[0], j - 2 * l, l, &self.test)?);
        }
        let traces = (1..self.traces.len()).map(|t| self.align_trace(t, j, &matchers)).collect();
        let k2 = self.schedule.k2();
        Ok(AlignmentOutcome {
            j,
            traces,
            anchor_window_1: Interval::new(j - k2, j + k2),
            schedule: self.schedule.clone(),
        })
    }

    fn align_trace(&self, t: usize, j: usize, matchers: &[WindowMatcher]) -> TraceAlignment {
        let prefix = &self.prefixes[t];
        let len = self.traces[t].len();
        let levels = &self.schedule.levels;
        let mut matched = Vec::with_capacity(levels.len());

        let l1 = levels[0];
        if len < l1 {
            return TraceAlignment { matched, window: None };
        }
        let last_start = len - l1;
        let (mut from, mut to) = match self.search {
            Level1Search::WholeTrace => (0, last_start),
            Level1Search::Windowed { radius } => {
                let len1 = self.traces[0].len() as f64;
                let centre = (((j - 2 * l1) as f64) * len as f64 / len1).round() as usize;
                (centre.saturating_sub(radius).min(last_start), (centre + radius).min(last_start))
            }
        };

        for (r, (&l, matcher)) in levels.iter().zip(matchers).enumerate() {
            let found = (from..=to).find(|&s| matcher.matches_at(prefix, s));
            let Some(s) = found else {
                return TraceAlignment { matched, window: None };
            };
            matched.push(Interval::new(s, s + l));
            // Ĩ_r = [s + L_r, s + 3 L_r)
            let tilde = Interval::new(s + l, s + 3 * l);
            match levels.get(r + 1) {
                Some(&next) => {
                    let end = tilde.end.min(len);
                    if end < tilde.start + next {
                        return TraceAlignment { matched, window: None };
                    }
                    from = tilde.start;
                    to = end - next;
                }
                None => {
                    let window = (tilde.end <= len).then_some(tilde);
                    return TraceAlignment { matched, window };
                }
            }
        }
        unreachable!("schedule has at least one level")
    }
}

/// One-shot alignment; see [`Aligner`] for repeated use.
pub fn align(
    traces: &[BitString],
    j: usize,
    schedule: &AlignSchedule,
    test: &TestParams,
    search: Level1Search,
) -> Result<AlignmentOutcome> {
    Aligner::new(traces, schedule.clone(), *test, search)?.align(j)
}
