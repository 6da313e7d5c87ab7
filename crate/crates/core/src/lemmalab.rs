//! Monte Carlo estimators for the probabilistic statements behind the
//! alignment and anchor machinery.
//!
//! Each trial draws its randomness from `rng.derive(trial)`, so results are
//! reproducible bit for bit and independent of scheduling. Conditioning is by
//! rejection; an acceptance rate under [`ACCEPTANCE_FLOOR`] aborts the run.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{build_schedule, Aligner, Level1Search};
use crate::anchors::{is_trace_useful, source_anchor, AnchorLengths, AnchorParams, LengthOverrides};
use crate::bitcore::{sample_uniform, BitString, OnesPrefix, RngHandle, Stream};
use crate::blocktest::{test_match, TestParams};
use crate::channel::{transmit, transmit_many, ChannelParams, TraceRecord};
use crate::error::{invalid, Error, Result};

use rand::Rng;

pub const ACCEPTANCE_FLOOR: f64 = 1e-3;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LemmaId {
    TrueMatch,
    FalseMatch,
    OnTrack,
    UsefulJoint,
    NotUsefulJoint,
    AnchorCorrespond,
}

impl LemmaId {
    pub fn as_str(self) -> &'static str {
        match self {
            LemmaId::TrueMatch => "truematch",
            LemmaId::FalseMatch => "falsematch",
            LemmaId::OnTrack => "ontrack",
            LemmaId::UsefulJoint => "useful_joint",
            LemmaId::NotUsefulJoint => "not_useful_joint",
            LemmaId::AnchorCorrespond => "anchor_correspond",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaEstimate {
    pub lemma: LemmaId,
    pub trials: u64,
    /// Count of the estimated event; for `AnchorCorrespond` that is a mismatch.
    pub successes: u64,
    pub point: f64,
    pub wilson: (f64, f64),
    pub acceptance_rate: f64,
    pub condition_params: BTreeMap<String, f64>,
}

impl LemmaEstimate {
    pub fn new(lemma: LemmaId, successes: u64, trials: u64, acceptance_rate: f64, condition_params: BTreeMap<String, f64>) -> Self {
        let point = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        LemmaEstimate { lemma, trials, successes, point, wilson: wilson_interval(successes, trials, Z95), acceptance_rate, condition_params }
    }

    pub fn ci_width(&self) -> f64 {
        self.wilson.1 - self.wilson.0
    }
}

/// Wilson score interval; `(0, 1)` when there are no trials.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let ph = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (ph + z2 / (2.0 * n)) / denom;
    let half = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).clamp(0.0, ph), (centre + half).clamp(ph, 1.0))
}

/// Settings shared by all estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabParams {
    pub channel: ChannelParams,
    pub test: TestParams,
    /// Near-offset exponent: windows count as aligned when endpoints differ by at most `m^lambda`.
    pub lambda: f64,
    /// Far-offset exponent: windows count as far when endpoints differ by more than `m^(1 - beta)`.
    pub beta: f64,
    pub n: usize,
    pub trace_count: usize,
    pub k1: usize,
    pub level1: Level1Search,
    pub c0: f64,
    pub c8: f64,
    pub c9: f64,
    pub anchor_overrides: LengthOverrides,
    /// Source length multiple (in units of `m / p`) for the match estimators.
    pub match_span: f64,
    /// Scanned indices per sampled source in the joint estimators.
    pub j_per_sample: usize,
}

impl LabParams {
    pub fn new(channel: ChannelParams, test: TestParams) -> Self {
        LabParams {
            channel,
            test,
            lambda: 0.5025,
            beta: 0.2,
            n: 1 << 16,
            trace_count: 8,
            k1: 64,
            level1: Level1Search::WholeTrace,
            c0: 0.005,
            c8: 1.0,
            c9: 2.0,
            anchor_overrides: LengthOverrides::default(),
            match_span: 4.0,
            j_per_sample: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.test.validate()?;
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(invalid("lambda", format!("must lie in (0, 1), got {}", self.lambda)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid("beta", format!("must lie in (0, 1), got {}", self.beta)));
        }
        if self.trace_count < 2 {
            return Err(invalid("T", format!("need at least 2 traces, got {}", self.trace_count)));
        }
        if !(self.match_span >= 2.0) {
            return Err(invalid("match_span", format!("must be at least 2, got {}", self.match_span)));
        }
        if self.j_per_sample == 0 {
            return Err(invalid("j_per_sample", "must be positive"));
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        self.channel.p()
    }

    fn anchor_lengths(&self, k2: usize) -> Result<AnchorLengths> {
        AnchorParams::new(self.c0, self.c8, self.c9, self.p(), k2)
            .with_overrides(self.anchor_overrides)
            .lengths()
    }

    fn base_conditions(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("q".into(), self.channel.q());
        m.insert("alpha".into(), self.test.alpha);
        m.insert("kappa0".into(), self.test.kappa0);
        m
    }
}

fn check_trials(trials: u64, min: u64) -> Result<()> {
    if trials < min {
        return Err(invalid("trials", format!("need at least {min}, got {trials}")));
    }
    Ok(())
}

fn check_rate(lemma: &'static str, accepted: u64, attempts: u64) -> Result<f64> {
    let rate = if attempts == 0 { 0.0 } else { accepted as f64 / attempts as f64 };
    if rate < ACCEPTANCE_FLOOR {
        return Err(Error::ConditioningInfeasible { lemma, rate, floor: ACCEPTANCE_FLOOR });
    }
    Ok(rate)
}

/// Per trial: accepted flag for the event, and rejection attempts used.
type TrialOutcome = Result<(bool, u64)>;

fn run_trials<F>(trials: u64, rng: &RngHandle, f: F) -> Result<(u64, u64)>
where
    F: Fn(&mut RngHandle) -> TrialOutcome + Sync,
{
    let outcomes: Vec<TrialOutcome> = (0..trials).into_par_iter().map(|t| f(&mut rng.derive(t))).collect();
    let mut hits = 0;
    let mut attempts = 0;
    for o in outcomes {
        let (hit, used) = o?;
        hits += hit as u64;
        attempts += used;
    }
    Ok((hits, attempts))
}

/// Cap on `(i, j)` proposals per sampled trace pair.
const MAX_ATTEMPTS: u64 = (10.0 / ACCEPTANCE_FLOOR) as u64;

struct PairSample {
    u: TraceRecord,
    v: TraceRecord,
}

fn sample_pair(m: usize, params: &LabParams, rng: &mut RngHandle) -> PairSample {
    let n = (params.match_span * m as f64 / params.p()).ceil() as usize + m;
    let x = sample_uniform(n, &mut rng.with_stream(Stream::Source).derive(rng.gen()));
    let mut ret = rng.with_stream(Stream::Retention).derive(rng.gen());
    let u = transmit(&x, params.channel, &mut ret);
    let v = transmit(&x, params.channel, &mut ret);
    PairSample { u, v }
}

/// Match rate of `U[i, i+m)` against `V[j, j+m)` given `|g_U(i) - g_V(j)| <= m^lambda`.
///
/// Each trial samples one trace pair, then proposes `i` uniformly and `j`
/// uniformly among the indices whose provenance can satisfy the condition,
/// until the condition holds.
pub fn estimate_truematch(m: usize, params: &LabParams, trials: u64, rng: &RngHandle) -> Result<LemmaEstimate> {
    params.validate()?;
    check_trials(trials, 100)?;
    if m < 16 {
        return Err(invalid("m", format!("must be at least 16, got {m}")));
    }
    let reach = (m as f64).powf(params.lambda);
    let r = reach.ceil() as usize;
    let (hits, attempts) = run_trials(trials, rng, |rng| {
        let PairSample { u, v } = sample_pair(m, params, rng);
        if u.trace.len() < m || v.trace.len() < m {
            return Err(Error::TooShort(format!("sampled traces shorter than m = {m}")));
        }
        for attempt in 1..=MAX_ATTEMPTS {
            let i = rng.gen_range(0..=u.trace.len() - m);
            let gi = u.source_index(i);
            let j0 = v.provenance().partition_point(|&g| g - 1 < gi);
            let hi_j = v.trace.len() - m;
            let lo = j0.saturating_sub(r).min(hi_j);
            let j = rng.gen_range(lo..=(j0 + r).min(hi_j));
            if (gi as f64 - v.source_index(j) as f64).abs() <= reach {
                let verdict = test_match(&u.trace.slice(i, i + m), &v.trace.slice(j, j + m), &params.test)?;
                return Ok((verdict.matched, attempt));
            }
        }
        Ok((false, MAX_ATTEMPTS))
    })?;
    let rate = check_rate("truematch", trials, attempts)?;
    let mut cond = params.base_conditions();
    cond.insert("m".into(), m as f64);
    cond.insert("lambda".into(), params.lambda);
    Ok(LemmaEstimate::new(LemmaId::TrueMatch, hits, trials, rate, cond))
}

/// Match rate given `g_U(i) > g_V(j) + m^(1 - beta)`, with `i`, `j` uniform.
pub fn estimate_falsematch(m: usize, params: &LabParams, trials: u64, rng: &RngHandle) -> Result<LemmaEstimate> {
    params.validate()?;
    check_trials(trials, 100)?;
    if m < 16 {
        return Err(invalid("m", format!("must be at least 16, got {m}")));
    }
    let gap = (m as f64).powf(1.0 - params.beta);
    let (hits, attempts) = run_trials(trials, rng, |rng| {
        let PairSample { u, v } = sample_pair(m, params, rng);
        if u.trace.len() < m || v.trace.len() < m {
            return Err(Error::TooShort(format!("sampled traces shorter than m = {m}")));
        }
        for attempt in 1..=MAX_ATTEMPTS {
            let i = rng.gen_range(0..=u.trace.len() - m);
            let j = rng.gen_range(0..=v.trace.len() - m);
            if u.source_index(i) as f64 > v.source_index(j) as f64 + gap {
                let verdict = test_match(&u.trace.slice(i, i + m), &v.trace.slice(j, j + m), &params.test)?;
                return Ok((verdict.matched, attempt));
            }
        }
        Ok((false, MAX_ATTEMPTS))
    })?;
    let rate = check_rate("falsematch", trials, attempts)?;
    let mut cond = params.base_conditions();
    cond.insert("m".into(), m as f64);
    cond.insert("beta".into(), params.beta);
    Ok(LemmaEstimate::new(LemmaId::FalseMatch, hits, trials, rate, cond))
}

struct TraceSample {
    x: BitString,
    records: Vec<TraceRecord>,
    traces: Vec<BitString>,
}

fn sample_traces(params: &LabParams, rng: &mut RngHandle) -> TraceSample {
    let x = sample_uniform(params.n, &mut rng.with_stream(Stream::Source).derive(rng.gen()));
    let ret = rng.with_stream(Stream::Retention).derive(rng.gen());
    let records = transmit_many(&x, params.channel, params.trace_count, &ret);
    let traces = records.iter().map(|r| r.trace.clone()).collect();
    TraceSample { x, records, traces }
}

/// Whether every final window is non-empty and stays within `K2^(1 - beta/2)`
/// source positions of trace 1's window, position by position.
pub fn on_track(outcome: &crate::alignment::AlignmentOutcome, records: &[TraceRecord], beta: f64) -> bool {
    let k2 = outcome.schedule.k2();
    let bound = (k2 as f64).powf(1.0 - beta / 2.0);
    let l1 = outcome.anchor_window_1.start;
    (2..=records.len()).all(|t| {
        let Some(w) = outcome.window_of(t) else { return false };
        (0..2 * k2).all(|k| {
            let a = records[t - 1].source_index(w.start + k) as f64;
            let b = records[0].source_index(l1 + k) as f64;
            (a - b).abs() <= bound
        })
    })
}

/// Rate at which a random `j` aligns every trace on track.
pub fn estimate_ontrack(params: &LabParams, trials: u64, rng: &RngHandle) -> Result<LemmaEstimate> {
    params.validate()?;
    check_trials(trials, 1)?;
    let schedule = build_schedule(params.n, params.k1)?;
    let (hits, attempts) = run_trials(trials, rng, |rng| {
        let s = sample_traces(params, rng);
        let aligner = Aligner::new(&s.traces, schedule.clone(), params.test, params.level1)?;
        let (lo, hi) = aligner.j_bounds();
        if lo > hi {
            return Err(Error::TooShort(format!("trace 1 too short for the alignment schedule at n = {}", params.n)));
        }
        let j = rng.gen_range(lo..=hi);
        let outcome = aligner.align(j)?;
        Ok((on_track(&outcome, &s.records, params.beta), 1))
    })?;
    let rate = check_rate("ontrack", trials, attempts)?;
    let mut cond = params.base_conditions();
    cond.insert("n".into(), params.n as f64);
    cond.insert("T".into(), params.trace_count as f64);
    cond.insert("K1".into(), params.k1 as f64);
    cond.insert("K2".into(), schedule.k2() as f64);
    cond.insert("beta".into(), params.beta);
    Ok(LemmaEstimate::new(LemmaId::OnTrack, hits, trials, rate, cond))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEstimates {
    /// `g(j)` useful and `j` trace-useful.
    pub useful: LemmaEstimate,
    /// `g(j)` not useful and `j` trace-useful.
    pub not_useful: LemmaEstimate,
    /// `j` trace-useful.
    pub trace_useful: LemmaEstimate,
}

/// Joint frequencies over random `(x, traces, j)`. `trials` counts samples;
/// each contributes `j_per_sample` indices.
pub fn estimate_useful_joint(params: &LabParams, trials: u64, rng: &RngHandle) -> Result<JointEstimates> {
    params.validate()?;
    check_trials(trials, 1)?;
    let schedule = build_schedule(params.n, params.k1)?;
    let k2 = schedule.k2();
    let lengths = params.anchor_lengths(k2)?;
    let p = params.p();
    let per_sample: Vec<Result<[u64; 3]>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng.derive(t);
            let s = sample_traces(params, &mut rng);
            let aligner = Aligner::new(&s.traces, schedule.clone(), params.test, params.level1)?;
            let (lo, hi) = aligner.j_bounds();
            let mut counts = [0u64; 3];
            for _ in 0..params.j_per_sample {
                let j = rng.gen_range(lo..=hi);
                let outcome = aligner.align(j)?;
                if !is_trace_useful(&outcome, &s.traces, &lengths, p).useful {
                    continue;
                }
                counts[2] += 1;
                let g = s.records[0].source_index(j);
                let useful = g >= k2 && g + k2 < s.x.len() && source_anchor(&s.x, g, &lengths)?.is_some();
                counts[if useful { 0 } else { 1 }] += 1;
            }
            Ok(counts)
        })
        .collect();
    let mut totals = [0u64; 3];
    for c in per_sample {
        let c = c?;
        for i in 0..3 {
            totals[i] += c[i];
        }
    }
    let n_idx = trials * params.j_per_sample as u64;
    let mut cond = params.base_conditions();
    cond.insert("n".into(), params.n as f64);
    cond.insert("T".into(), params.trace_count as f64);
    cond.insert("K2".into(), k2 as f64);
    cond.insert("super_anchor_len".into(), lengths.super_anchor_len as f64);
    Ok(JointEstimates {
        useful: LemmaEstimate::new(LemmaId::UsefulJoint, totals[0], n_idx, 1.0, cond.clone()),
        not_useful: LemmaEstimate::new(LemmaId::NotUsefulJoint, totals[1], n_idx, 1.0, cond.clone()),
        trace_useful: LemmaEstimate::new(LemmaId::UsefulJoint, totals[2], n_idx, 1.0, cond),
    })
}

/// Mismatch rate between a good trace's anchor one and the source anchor one.
///
/// Samples `(x, traces)` in fixed rounds and proposes `j_per_sample`
/// uniform indices per sample. A proposal is accepted when `g(j)` is useful
/// and `j` is trace-useful; each good trace at an accepted `j` is one trial.
/// `trials` is the number of conditioned `(j, t)` pairs to collect, taken in
/// sample and proposal order.
pub fn estimate_anchor_correspond(params: &LabParams, trials: u64, rng: &RngHandle) -> Result<LemmaEstimate> {
    params.validate()?;
    check_trials(trials, 1)?;
    let schedule = build_schedule(params.n, params.k1)?;
    let k2 = schedule.k2();
    let lengths = params.anchor_lengths(k2)?;
    let p = params.p();
    // one entry per proposal: the mismatch flags of the good traces when accepted
    let propose = |b: u64| -> Result<Vec<Option<Vec<bool>>>> {
        let mut rng = rng.derive(b);
        let s = sample_traces(params, &mut rng);
        let aligner = Aligner::new(&s.traces, schedule.clone(), params.test, params.level1)?;
        let (lo, hi) = aligner.j_bounds();
        let mut out = Vec::with_capacity(params.j_per_sample);
        for _ in 0..params.j_per_sample {
            let j = rng.gen_range(lo..=hi);
            let g = s.records[0].source_index(j);
            if g < k2 || g + k2 >= s.x.len() {
                out.push(None);
                continue;
            }
            let outcome = aligner.align(j)?;
            let usefulness = is_trace_useful(&outcome, &s.traces, &lengths, p);
            let anchor = if usefulness.useful { source_anchor(&s.x, g, &lengths)? } else { None };
            out.push(anchor.map(|a| {
                let gamma = a.one_position.expect("anchors have a middle one");
                usefulness
                    .hits
                    .iter()
                    .enumerate()
                    .filter_map(|(t, hit)| hit.and_then(|h| h.one_position).map(|pos| s.records[t].source_index(pos) != gamma))
                    .collect()
            }));
        }
        Ok(out)
    };

    const ROUND: u64 = 8;
    let (mut mismatches, mut collected, mut proposed, mut accepted) = (0u64, 0u64, 0u64, 0u64);
    let mut round = 0u64;
    while collected < trials {
        let batch: Vec<Result<Vec<Option<Vec<bool>>>>> = (round * ROUND..(round + 1) * ROUND).into_par_iter().map(propose).collect();
        for sample in batch {
            for proposal in sample? {
                if collected >= trials {
                    break;
                }
                proposed += 1;
                let Some(flags) = proposal else { continue };
                accepted += 1;
                for mismatch in flags.into_iter().take((trials - collected) as usize) {
                    collected += 1;
                    mismatches += mismatch as u64;
                }
            }
        }
        round += 1;
        if proposed >= MAX_ATTEMPTS {
            check_rate("anchor_correspond", accepted, proposed)?;
        }
    }
    let rate = check_rate("anchor_correspond", accepted, proposed)?;
    let mut cond = params.base_conditions();
    cond.insert("n".into(), params.n as f64);
    cond.insert("T".into(), params.trace_count as f64);
    cond.insert("K2".into(), k2 as f64);
    cond.insert("bound".into(), 1.0 / (k2 as f64).sqrt());
    Ok(LemmaEstimate::new(LemmaId::AnchorCorrespond, mismatches, collected, rate, cond))
}

/// Diagnostic: some block of length at least `ceil(pseudo_len / 4)` inside
/// `x[pos - K2, pos + K2]` holds between 2 and `pseudo_cap` ones.
pub fn has_spurious_companion(x: &BitString, pos: usize, lengths: &AnchorLengths) -> Result<bool> {
    let k2 = lengths.k2;
    if pos < k2 || pos + k2 >= x.len() {
        return Err(Error::OutOfRange(format!("neighbourhood {pos} ± {k2} leaves string of length {}", x.len())));
    }
    let cap = lengths.pseudo_cap;
    if cap < 2 {
        return Ok(false);
    }
    let w = x.slice(pos - k2, pos + k2 + 1);
    let prefix = OnesPrefix::new(&w);
    let len = lengths.pseudo_len.div_ceil(4).max(1);
    if w.len() < len {
        return Ok(false);
    }
    // a longer block only gains ones, so [a, a + len) must be under the cap and
    // [a, end) must reach two
    Ok((0..=w.len() - len).any(|a| prefix.ones(a, a + len) <= cap && prefix.ones(a, w.len()) >= 2))
}
