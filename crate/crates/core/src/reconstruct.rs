//! End-to-end approximate reconstruction.
//!
//! Trace 1 is scanned left to right. At each index `j` every trace is aligned
//! and the final windows are classified; when `j` is trace-useful, the
//! suffixes after the trace-anchor ones are handed to a prefix strategy and
//! the resulting chunk is kept. The scan then jumps past `j + spacing`.
//! The output is the concatenation of the chunks.

use serde::{Deserialize, Serialize};

use crate::alignment::{build_schedule, AlignSchedule, Aligner, Level1Search};
use crate::anchors::{is_trace_useful, AnchorLengths, AnchorParams, LengthOverrides};
use crate::bitcore::BitString;
use crate::blocktest::TestParams;
use crate::channel::{ChannelParams, TraceRecord};
use crate::editdist::{edit_distance, edit_distance_banded, Banded, EditDistance};
use crate::error::{invalid, Error, Result};
use crate::prefixrecon::{PrefixTask, StrategyRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub channel: ChannelParams,
    pub test: TestParams,
    pub c0: f64,
    pub c8: f64,
    pub c9: f64,
    pub anchor_overrides: LengthOverrides,
    pub k1: usize,
    /// Replace `k1` with `(1/epsilon)^100`, capped at the length estimate.
    pub k1_from_epsilon: bool,
    pub epsilon: f64,
    pub trace_count: usize,
    pub c10: f64,
    pub chunk_len: Option<usize>,
    pub spacing: Option<usize>,
    /// Scan range as fractions of `|U1|`.
    pub j_range: (f64, f64),
    /// Below this estimated source length the traces are reconstructed whole.
    pub min_n_guard: usize,
    pub strategy: String,
    pub level1: Level1Search,
    /// Also scan the reversed traces to cover the right half.
    pub full_scan: bool,
}

impl PipelineParams {
    pub fn new(channel: ChannelParams, test: TestParams) -> Self {
        let epsilon = 0.05;
        PipelineParams {
            channel,
            test,
            c0: 0.005,
            c8: 1.0,
            c9: 2.0,
            anchor_overrides: LengthOverrides::default(),
            k1: 64,
            k1_from_epsilon: false,
            epsilon,
            trace_count: 16,
            c10: 1.5,
            chunk_len: None,
            spacing: None,
            j_range: (epsilon * epsilon, 0.5 - epsilon * epsilon),
            min_n_guard: 1024,
            strategy: "bma".into(),
            level1: Level1Search::WholeTrace,
            full_scan: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.test.validate()?;
        let (a, b) = self.j_range;
        if !(a > 0.0 && a < b && b <= 1.0) {
            return Err(invalid("j_range", format!("need 0 < start < end <= 1, got ({a}, {b})")));
        }
        if !(self.c10 > 0.0) {
            return Err(invalid("C10", format!("must be positive, got {}", self.c10)));
        }
        if self.chunk_len == Some(0) {
            return Err(invalid("chunk_len", "must be at least 1"));
        }
        if self.spacing == Some(0) {
            return Err(invalid("spacing", "must be positive"));
        }
        if self.k1 < 4 {
            return Err(invalid("K1", format!("must be at least 4, got {}", self.k1)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(invalid("epsilon", format!("must lie in (0, 0.5), got {}", self.epsilon)));
        }
        if self.trace_count < 2 {
            return Err(invalid("T", format!("need at least 2 traces, got {}", self.trace_count)));
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        self.channel.p()
    }

    /// Anchor parameters for final alignment length `k2`.
    pub fn anchor_params(&self, k2: usize) -> AnchorParams {
        AnchorParams::new(self.c0, self.c8, self.c9, self.p(), k2).with_overrides(self.anchor_overrides)
    }

    /// Everything that depends on the source length (estimate) `n`.
    pub fn resolve(&self, n: usize) -> Result<ResolvedPipeline> {
        self.validate()?;
        let k1 = if self.k1_from_epsilon {
            let theoretical = (1.0 / self.epsilon).powi(100);
            if theoretical >= n as f64 { n } else { theoretical as usize }
        } else {
            self.k1
        };
        let schedule = build_schedule(n, k1.min(n))?;
        let k2 = schedule.k2();
        let lengths = self.anchor_params(k2).lengths()?;
        let p = self.p();
        let k2f = k2 as f64;
        let chunk_len = self.chunk_len.unwrap_or_else(|| k2f.powf(self.c10).ceil() as usize);
        let spacing = self
            .spacing
            .unwrap_or_else(|| (p * k2f.powf(self.c10) + p * k2f.powf(0.75 * self.c10)).ceil() as usize);
        Ok(ResolvedPipeline { schedule, lengths, chunk_len, spacing })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPipeline {
    pub schedule: AlignSchedule,
    pub lengths: AnchorLengths,
    pub chunk_len: usize,
    pub spacing: usize,
}

/// Simulation ground truth: the source and each trace's 0-based provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub source: BitString,
    pub provenance: Vec<Vec<usize>>,
}

impl GroundTruth {
    pub fn from_records(source: &BitString, records: &[TraceRecord]) -> Self {
        GroundTruth {
            source: source.clone(),
            provenance: records.iter().map(|r| (0..r.trace.len()).map(|i| r.source_index(i)).collect()).collect(),
        }
    }

    fn reversed(&self) -> GroundTruth {
        let n = self.source.len();
        GroundTruth {
            source: self.source.reversed(),
            provenance: self.provenance.iter().map(|g| g.iter().rev().map(|&s| n - 1 - s).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanDirection {
    Forward,
    /// Found on the reversed traces; the chunk extends leftwards from `j`.
    Reversed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    /// Index in trace 1, forward coordinates.
    pub j: usize,
    pub direction: ScanDirection,
    pub bits: BitString,
    pub strategy: String,
    /// `good[t - 1]` for `t = 1..=T`.
    pub good: Vec<bool>,
    /// First source index covered, when ground truth was supplied.
    pub source_start: Option<usize>,
}

impl ChunkRecord {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub x_hat: BitString,
    /// In output order; `x_hat` is their concatenation.
    pub chunks: Vec<ChunkRecord>,
    pub n_estimate: usize,
    /// `None` when the whole-trace fallback ran.
    pub resolved: Option<ResolvedPipeline>,
    pub desk_scale: bool,
}

impl ReconstructionReport {
    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    /// `|x_hat|` over the estimated source length.
    pub fn coverage(&self) -> f64 {
        if self.n_estimate == 0 {
            0.0
        } else {
            (self.x_hat.len() as f64 / self.n_estimate as f64).min(1.0)
        }
    }

    pub fn fallback(&self) -> bool {
        self.resolved.is_none()
    }

    fn from_chunks(chunks: Vec<ChunkRecord>, n_estimate: usize, resolved: Option<ResolvedPipeline>, desk_scale: bool) -> Self {
        let mut x_hat = BitString::new();
        for c in &chunks {
            x_hat.extend_from(&c.bits);
        }
        ReconstructionReport { x_hat, chunks, n_estimate, resolved, desk_scale }
    }
}

/// Pipeline with the default strategies and no ground truth.
pub fn reconstruct(traces: &[BitString], params: &PipelineParams) -> Result<ReconstructionReport> {
    reconstruct_with(traces, params, &StrategyRegistry::with_defaults(), None)
}

pub fn reconstruct_with(
    traces: &[BitString],
    params: &PipelineParams,
    registry: &StrategyRegistry,
    truth: Option<&GroundTruth>,
) -> Result<ReconstructionReport> {
    if traces.len() < 2 {
        return Err(Error::TooShort(format!("reconstruction needs at least 2 traces, got {}", traces.len())));
    }
    if traces.iter().any(BitString::is_empty) {
        return Err(Error::TooShort("every trace must be non-empty".into()));
    }
    params.validate()?;
    let strategy = registry.get(&params.strategy)?;
    let p = params.p();
    let mean_len = traces.iter().map(BitString::len).sum::<usize>() as f64 / traces.len() as f64;
    let n_estimate = (mean_len / p).round() as usize;
    let desk_scale = params.test.is_desk_scale() || params.anchor_overrides != LengthOverrides::default() || !params.k1_from_epsilon;

    if n_estimate < params.min_n_guard {
        let mut task = PrefixTask::new(traces.to_vec(), n_estimate, p);
        if let Some(t) = truth {
            task = task.with_truth(t.source.clone());
        }
        let result = strategy.reconstruct_full(&task)?;
        let chunk = ChunkRecord {
            j: 0,
            direction: ScanDirection::Forward,
            bits: result.bits,
            strategy: strategy.name().to_string(),
            good: vec![true; traces.len()],
            source_start: truth.map(|_| 0),
        };
        return Ok(ReconstructionReport::from_chunks(vec![chunk], n_estimate, None, desk_scale));
    }

    let resolved = params.resolve(n_estimate)?;
    let len1 = traces[0].len();
    let min_len = 2 * resolved.schedule.l1() + 2 * resolved.schedule.k2();
    if len1 < min_len {
        return Err(Error::TooShort(format!("trace 1 has length {len1}, the scan needs at least {min_len}")));
    }
    let frac = |f: f64| (f * len1 as f64).floor() as usize;
    let start = frac(params.j_range.0).max(1);
    let scanner = Scanner { params, resolved: &resolved, registry, strategy: &params.strategy };

    let mut chunks = scanner.scan(traces, truth, start, frac(params.j_range.1), ScanDirection::Forward)?;
    if params.full_scan {
        let reversed: Vec<BitString> = traces.iter().map(BitString::reversed).collect();
        let rev_truth = truth.map(GroundTruth::reversed);
        // stop early enough that right-half chunks end near the middle
        let reach = (p * resolved.chunk_len as f64).ceil() as usize;
        let end = len1.saturating_sub(frac(params.j_range.1)).saturating_sub(reach);
        let mut right = scanner.scan(&reversed, rev_truth.as_ref(), start, end, ScanDirection::Reversed)?;
        right.reverse();
        chunks.extend(right);
    }
    Ok(ReconstructionReport::from_chunks(chunks, n_estimate, Some(resolved), desk_scale))
}

struct Scanner<'a> {
    params: &'a PipelineParams,
    resolved: &'a ResolvedPipeline,
    registry: &'a StrategyRegistry,
    strategy: &'a str,
}

impl Scanner<'_> {
    fn scan(
        &self,
        traces: &[BitString],
        truth: Option<&GroundTruth>,
        from: usize,
        to: usize,
        direction: ScanDirection,
    ) -> Result<Vec<ChunkRecord>> {
        let p = self.params.p();
        let strategy = self.registry.get(self.strategy)?;
        let aligner = Aligner::new(traces, self.resolved.schedule.clone(), self.params.test, self.params.level1)?;
        let (lo, hi) = aligner.j_bounds();
        let len1 = traces[0].len();
        let mut chunks = Vec::new();
        let mut j = from.max(lo);
        let last = to.min(hi);
        while j <= last {
            let outcome = aligner.align(j)?;
            let usefulness = is_trace_useful(&outcome, traces, &self.resolved.lengths, p);
            if !usefulness.useful {
                j += 1;
                continue;
            }
            let anchored: Vec<(usize, usize)> = usefulness
                .hits
                .iter()
                .enumerate()
                .filter_map(|(i, h)| h.and_then(|h| h.one_position).map(|g| (i, g)))
                .collect();
            let suffixes: Vec<BitString> = anchored.iter().map(|&(i, g)| traces[i].slice(g + 1, traces[i].len())).collect();
            let mut task = PrefixTask::new(suffixes, 0, p);
            task.k = self.resolved.chunk_len.min(task.max_k());
            if anchored.len() < 2 || task.k == 0 {
                j += 1;
                continue;
            }
            let source_start = truth.map(|t| {
                let (i, g) = anchored[0];
                t.provenance[i][g] + 1
            });
            if let (Some(t), Some(s)) = (truth, source_start) {
                let end = (s + self.resolved.chunk_len).min(t.source.len());
                task = task.with_truth(t.source.slice(s.min(end), end));
            }
            let result = strategy.reconstruct(&task)?;
            let (j_fwd, bits, source_start) = match direction {
                ScanDirection::Forward => (j, result.bits, source_start),
                ScanDirection::Reversed => {
                    let n = truth.map(|t| t.source.len()).unwrap_or(0);
                    let len = result.bits.len();
                    (len1 - 1 - j, result.bits.reversed(), source_start.map(|s| (n - s).saturating_sub(len)))
                }
            };
            chunks.push(ChunkRecord {
                j: j_fwd,
                direction,
                bits,
                strategy: strategy.name().to_string(),
                good: usefulness.good,
                source_start,
            });
            j += self.resolved.spacing + 1;
        }
        Ok(chunks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub x_hat_len: usize,
    pub edit_distance: EditDistance,
    pub normalized_de: f64,
    pub chunk_count: usize,
    /// `|x_hat| / n`, capped at 1.
    pub coverage: f64,
}

/// Banded distance first (cheap when `x_hat` is close to `x`), exact otherwise.
pub fn evaluate(x: &BitString, report: &ReconstructionReport) -> Metrics {
    let n = x.len();
    let y = &report.x_hat;
    let band = n.abs_diff(y.len()) + 64;
    let banded_cost = (2 * band + 1) * n.max(y.len());
    let exact_cost = n.max(y.len()) * (n.min(y.len()) / 64 + 1) * 8;
    let d = match (banded_cost <= exact_cost).then(|| edit_distance_banded(x, y, band)) {
        Some(Ok(Banded::Exact(d))) => d,
        _ => edit_distance(x, y),
    };
    Metrics {
        n,
        x_hat_len: y.len(),
        edit_distance: d,
        normalized_de: d.normalized(n),
        chunk_count: report.chunk_count(),
        coverage: if n == 0 { 0.0 } else { (y.len() as f64 / n as f64).min(1.0) },
    }
}

/// Drops chunk `i` when `g(j_i) <= g(j_{i-1}) + K2^C10 + K2^(C10/10)`, judged
/// against the previous chunk of the same scan direction. Returns the pruned
/// report and the number of chunks removed. `records[0]` must be trace 1.
pub fn prune_overlaps(
    report: &ReconstructionReport,
    records: &[TraceRecord],
    params: &PipelineParams,
) -> Result<(ReconstructionReport, usize)> {
    let trace1 = records.first().ok_or(Error::ProvenanceMissing)?;
    let Some(resolved) = &report.resolved else {
        return Ok((report.clone(), 0));
    };
    let k2 = resolved.schedule.k2() as f64;
    let threshold = k2.powf(params.c10) + k2.powf(params.c10 / 10.0);
    let g = |j: usize| trace1.g(j + 1) as f64;

    let mut kept = Vec::with_capacity(report.chunks.len());
    let mut removed = 0;
    for dir in [ScanDirection::Forward, ScanDirection::Reversed] {
        let mut in_scan_order: Vec<&ChunkRecord> = report.chunks.iter().filter(|c| c.direction == dir).collect();
        if dir == ScanDirection::Reversed {
            in_scan_order.reverse();
        }
        let mut survivors = Vec::new();
        for (i, c) in in_scan_order.iter().enumerate() {
            let overlaps = i > 0 && {
                let (cur, prev) = (g(c.j), g(in_scan_order[i - 1].j));
                match dir {
                    ScanDirection::Forward => cur <= prev + threshold,
                    ScanDirection::Reversed => cur >= prev - threshold,
                }
            };
            if overlaps {
                removed += 1;
            } else {
                survivors.push((*c).clone());
            }
        }
        if dir == ScanDirection::Reversed {
            survivors.reverse();
        }
        kept.extend(survivors);
    }
    let pruned = ReconstructionReport::from_chunks(kept, report.n_estimate, report.resolved.clone(), report.desk_scale);
    Ok((pruned, removed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcore::{sample_uniform, RngHandle, Stream};
    use crate::channel::{transmit_many, transmit_with_mask};

    fn desk(q: f64) -> PipelineParams {
        let mut p = PipelineParams::new(ChannelParams::new(q).unwrap(), TestParams::new(0.4, 0.1, true).unwrap());
        p.anchor_overrides = LengthOverrides {
            trace_anchor_len: Some(9),
            trace_pseudo_len: Some(8),
            trace_pseudo_cap: Some(1),
            anchor_len: Some(11),
            pseudo_len: Some(10),
            pseudo_cap: Some(1),
            super_anchor_len: Some(13),
            super_pseudo_cap: Some(1),
            spurious_len: Some(8),
            spurious_cap: Some(1),
        };
        p
    }

    #[test]
    fn identity_channel_chunks_are_substrings() {
        let x = sample_uniform(1 << 14, &mut RngHandle::new(1, Stream::Source));
        let mask = BitString::ones(x.len());
        let records: Vec<TraceRecord> = (0..4).map(|_| transmit_with_mask(&x, &mask).unwrap()).collect();
        let traces: Vec<BitString> = records.iter().map(|r| r.trace.clone()).collect();
        let mut params = desk(0.01);
        params.trace_count = 4;
        // one alignment level, searched exactly where the reference sits
        params.k1 = 256;
        params.level1 = Level1Search::Windowed { radius: 0 };
        let truth = GroundTruth::from_records(&x, &records);
        let report = reconstruct_with(&traces, &params, &StrategyRegistry::with_defaults(), Some(&truth)).unwrap();
        assert!(report.chunk_count() > 0);
        for c in &report.chunks {
            let s = c.source_start.unwrap();
            assert_eq!(c.bits, x.slice(s, s + c.len()));
        }
        let m = evaluate(&x, &report);
        assert!(m.normalized_de <= 1.0 - m.coverage + 0.01, "{m:?}");
        let starts: Vec<usize> = report.chunks.iter().map(|c| c.j).collect();
        let spacing = report.resolved.as_ref().unwrap().spacing;
        assert!(starts.windows(2).all(|w| w[1] > w[0] + spacing));
    }

    #[test]
    fn too_few_traces() {
        let x = sample_uniform(5000, &mut RngHandle::new(2, Stream::Source));
        assert!(reconstruct(&[x], &desk(0.2)).is_err());
    }

    #[test]
    fn evaluate_edges() {
        let x = sample_uniform(3000, &mut RngHandle::new(3, Stream::Source));
        let mut report = ReconstructionReport::from_chunks(Vec::new(), 3000, None, true);
        assert_eq!(evaluate(&x, &report).normalized_de, 1.0);
        report.x_hat = x.clone();
        assert_eq!(evaluate(&x, &report).normalized_de, 0.0);
        report.x_hat = sample_uniform(1700, &mut RngHandle::new(4, Stream::Source));
        let m = evaluate(&x, &report);
        assert_eq!(m.edit_distance.value() % 2, (3000 + 1700) % 2);
        assert_eq!(m.edit_distance, edit_distance(&x, &report.x_hat));
    }

    #[test]
    fn fallback_below_guard() {
        let x = sample_uniform(64, &mut RngHandle::new(5, Stream::Source));
        let records = transmit_many(&x, ChannelParams::new(0.05).unwrap(), 16, &RngHandle::new(5, Stream::Retention));
        let traces: Vec<BitString> = records.iter().map(|r| r.trace.clone()).collect();
        let report = reconstruct(&traces, &desk(0.05)).unwrap();
        assert!(report.fallback());
        assert!(evaluate(&x, &report).normalized_de < 0.2);
        let truth = GroundTruth::from_records(&x, &records);
        let mut oracle = desk(0.05);
        oracle.strategy = "oracle".into();
        let report = reconstruct_with(&traces, &oracle, &StrategyRegistry::with_defaults(), Some(&truth)).unwrap();
        assert_eq!(report.x_hat, x);
    }

    #[test]
    fn params_validation() {
        let mut p = desk(0.2);
        p.j_range = (0.4, 0.3);
        assert!(p.validate().is_err());
        let mut p = desk(0.2);
        p.spacing = Some(0);
        assert!(p.validate().is_err());
        let mut p = desk(0.2);
        p.k1_from_epsilon = true;
        assert_eq!(p.resolve(1 << 16).unwrap().schedule.levels, vec![256]);
    }

    fn chunk(j: usize, direction: ScanDirection) -> ChunkRecord {
        ChunkRecord { j, direction, bits: BitString::zeros(4), strategy: "bma".into(), good: vec![], source_start: None }
    }

    #[test]
    fn pruning() {
        let x = BitString::zeros(10_000);
        let record = transmit_with_mask(&x, &BitString::ones(10_000)).unwrap();
        let params = desk(0.2);
        let resolved = params.resolve(10_000).unwrap();
        let k2 = resolved.schedule.k2() as f64;
        let thr = (k2.powf(1.5) + k2.powf(0.15)) as usize;
        let chunks = vec![
            chunk(100, ScanDirection::Forward),
            chunk(100 + thr + 5, ScanDirection::Forward),
            chunk(100 + 3 * thr, ScanDirection::Forward),
        ];
        let report = ReconstructionReport::from_chunks(chunks, 10_000, Some(resolved.clone()), true);
        let (pruned, removed) = prune_overlaps(&report, &[record.clone()], &params).unwrap();
        assert_eq!(removed, 0);
        assert_eq!(pruned, report);

        let chunks = vec![chunk(100, ScanDirection::Forward), chunk(100 + thr / 2, ScanDirection::Forward)];
        let report = ReconstructionReport::from_chunks(chunks, 10_000, Some(resolved), true);
        let (pruned, removed) = prune_overlaps(&report, &[record], &params).unwrap();
        assert_eq!(removed, 1);
        assert_eq!(pruned.chunks, vec![chunk(100, ScanDirection::Forward)]);
        assert!(matches!(prune_overlaps(&report, &[], &params), Err(Error::ProvenanceMissing)));
    }
}
