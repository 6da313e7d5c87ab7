//! Coded trace reconstruction on short blocks.
//!
//! A code is packed greedily: pick a uniform survivor, delete every string
//! within the exclusion radius of it, repeat until nothing survives. Decoding
//! runs the reconstruction pipeline and returns the nearest codeword.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitcore::{BitString, RngHandle};
use crate::editdist::edit_distance;
use crate::error::{invalid, Error, Result};
use crate::reconstruct::{reconstruct, PipelineParams};

/// Largest block length the exhaustive construction accepts.
pub const MAX_EXHAUSTIVE_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCode {
    pub n: usize,
    pub radius: usize,
    pub codewords: Vec<BitString>,
    /// Seed of the construction; unknown for imported codes.
    pub construction_seed: Option<u64>,
}

/// LCS of two strings of at most 64 bits, bit-parallel in one word.
fn lcs_word(x: u64, xlen: usize, y: u64, ylen: usize) -> usize {
    if xlen == 0 || ylen == 0 {
        return 0;
    }
    let mask = if ylen == 64 { u64::MAX } else { (1u64 << ylen) - 1 };
    let ones = y & mask;
    let zeros = !y & mask;
    let mut v = mask;
    for i in 0..xlen {
        let m = if (x >> i) & 1 == 1 { ones } else { zeros };
        let u = v & m;
        v = (v.wrapping_add(u) | (v & !m)) & mask;
    }
    ylen - v.count_ones() as usize
}

fn word_distance(a: u64, b: u64, n: usize) -> usize {
    2 * n - 2 * lcs_word(a, n, b, n)
}

/// Greedy packing over all of `{0,1}^n`.
///
/// Survivors are kept in increasing numeric order (bit `i` of the value is
/// string position `i`) and each pick is `survivors[rng.gen_range(0..len)]`.
pub fn build_code_greedy(n: usize, radius: usize, rng: &mut RngHandle, max_codewords: Option<usize>) -> Result<EditCode> {
    if n == 0 || n > MAX_EXHAUSTIVE_LEN {
        return Err(invalid("n", format!("exhaustive construction needs 1 <= n <= {MAX_EXHAUSTIVE_LEN}, got {n}")));
    }
    let cap = max_codewords.unwrap_or(usize::MAX);
    let mut survivors: Vec<u64> = (0..1u64 << n).collect();
    let mut picks = Vec::new();
    while !survivors.is_empty() && picks.len() < cap {
        let pick = survivors[rng.gen_range(0..survivors.len())];
        picks.push(pick);
        survivors.retain(|&s| word_distance(s, pick, n) > radius);
    }
    Ok(EditCode {
        n,
        radius,
        codewords: picks.into_iter().map(|w| BitString::from_u64(w, n)).collect(),
        construction_seed: Some(rng.seed()),
    })
}

impl EditCode {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Checks every pair; returns the first offending pair of indices.
    pub fn check_separation(&self) -> std::result::Result<(), (usize, usize)> {
        for a in 0..self.codewords.len() {
            for b in a + 1..self.codewords.len() {
                if edit_distance(&self.codewords[a], &self.codewords[b]).value() <= self.radius {
                    return Err((a, b));
                }
            }
        }
        Ok(())
    }

    /// `log2 |S| / n`.
    pub fn rate(&self) -> f64 {
        code_rate(self)
    }

    /// `"n radius count"` then one codeword per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n, self.radius, self.codewords.len());
        for c in &self.codewords {
            writeln!(out, "{c}").expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<EditCode> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty code file".into()))?;
        let fields: Vec<usize> = header
            .split_whitespace()
            .map(|f| f.parse().map_err(|_| Error::Parse(format!("bad header field {f:?}"))))
            .collect::<Result<_>>()?;
        let [n, radius, count] = fields[..] else {
            return Err(Error::Parse(format!("header must be \"n radius count\", got {header:?}")));
        };
        let codewords: Vec<BitString> = lines.map(|l| l.trim().parse()).collect::<Result<_>>()?;
        if codewords.len() != count {
            return Err(Error::Parse(format!("header announces {count} codewords, found {}", codewords.len())));
        }
        if let Some(bad) = codewords.iter().find(|c| c.len() != n) {
            return Err(Error::Parse(format!("codeword {bad} has length {}, expected {n}", bad.len())));
        }
        Ok(EditCode { n, radius, codewords, construction_seed: None })
    }
}

pub fn code_rate(code: &EditCode) -> f64 {
    if code.codewords.is_empty() || code.n == 0 {
        return 0.0;
    }
    (code.codewords.len() as f64).log2() / code.n as f64
}

/// Index of the codeword closest to `estimate`; ties go to the lowest index.
pub fn nearest_codeword(estimate: &BitString, code: &EditCode) -> Result<usize> {
    code.codewords
        .iter()
        .enumerate()
        .map(|(i, c)| (edit_distance(estimate, c), i))
        .min()
        .map(|(_, i)| i)
        .ok_or(Error::EmptyCode)
}

pub fn decode(traces: &[BitString], code: &EditCode, pipeline: &PipelineParams) -> Result<BitString> {
    if code.is_empty() {
        return Err(Error::EmptyCode);
    }
    let report = reconstruct(traces, pipeline)?;
    Ok(code.codewords[nearest_codeword(&report.x_hat, code)?].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcore::Stream;
    use crate::blocktest::TestParams;
    use crate::channel::{transmit_many, ChannelParams};
    use crate::editdist::edit_distance_dp;

    /// Independent greedy: boolean survivor table, table-DP distances.
    fn oracle_greedy(n: usize, radius: usize, rng: &mut RngHandle) -> Vec<BitString> {
        let all: Vec<BitString> = (0..1u64 << n).map(|w| BitString::from_u64(w, n)).collect();
        let mut alive = vec![true; all.len()];
        let mut out = Vec::new();
        loop {
            let count = alive.iter().filter(|&&a| a).count();
            if count == 0 {
                return out;
            }
            let k = rng.gen_range(0..count);
            let idx = alive.iter().enumerate().filter(|(_, &a)| a).nth(k).unwrap().0;
            for (i, s) in all.iter().enumerate() {
                if alive[i] && edit_distance_dp(s, &all[idx]).value() <= radius {
                    alive[i] = false;
                }
            }
            out.push(all[idx].clone());
        }
    }

    #[test]
    fn word_lcs_matches_general() {
        let mut rng = RngHandle::new(1, Stream::Harness);
        for _ in 0..2000 {
            let n = rng.gen_range(1..=20);
            let (a, b) = (rng.gen_range(0..1u64 << n), rng.gen_range(0..1u64 << n));
            let d = edit_distance(&BitString::from_u64(a, n), &BitString::from_u64(b, n)).value();
            assert_eq!(word_distance(a, b, n), d);
        }
    }

    #[test]
    fn radius_extremes() {
        let mut rng = RngHandle::new(2, Stream::Harness);
        assert_eq!(build_code_greedy(6, 12, &mut rng, None).unwrap().len(), 1);
        let all = build_code_greedy(6, 0, &mut rng, None).unwrap();
        assert_eq!(all.len(), 64);
        assert_eq!(code_rate(&all), 1.0);
        assert_eq!(build_code_greedy(6, 0, &mut rng, Some(10)).unwrap().len(), 10);
        assert!(build_code_greedy(21, 3, &mut rng, None).is_err());
    }

    #[test]
    fn greedy_matches_oracle() {
        for seed in 0..5 {
            let code = build_code_greedy(8, 3, &mut RngHandle::new(seed, Stream::Harness), None).unwrap();
            let oracle = oracle_greedy(8, 3, &mut RngHandle::new(seed, Stream::Harness));
            assert_eq!(code.codewords, oracle, "seed {seed}");
            assert!(code.check_separation().is_ok());
        }
    }

    #[test]
    fn single_codeword_rate() {
        let code = EditCode { n: 8, radius: 3, codewords: vec![BitString::zeros(8)], construction_seed: None };
        assert_eq!(code_rate(&code), 0.0);
    }

    #[test]
    fn text_round_trip() {
        let code = build_code_greedy(8, 3, &mut RngHandle::new(3, Stream::Harness), None).unwrap();
        let back = EditCode::from_text(&code.to_text()).unwrap();
        assert_eq!(back.codewords, code.codewords);
        assert_eq!((back.n, back.radius), (8, 3));
        assert!(EditCode::from_text("8 3 2\n00000000\n").is_err());
        assert!(EditCode::from_text("8 3\n").is_err());
        assert!(EditCode::from_text("8 3 1\n0000\n").is_err());
    }

    #[test]
    fn nearest_codeword_sufficient_condition() {
        let code = build_code_greedy(10, 5, &mut RngHandle::new(4, Stream::Harness), None).unwrap();
        let mut rng = RngHandle::new(5, Stream::Harness);
        for (i, c) in code.codewords.iter().enumerate() {
            // a flipped bit is at distance 2, under half the radius
            let mut noisy = c.clone();
            let pos = rng.gen_range(0..10);
            noisy.set(pos, !noisy.get(pos));
            assert!(2 * edit_distance(&noisy, c).value() < code.radius);
            assert_eq!(nearest_codeword(&noisy, &code).unwrap(), i);
            assert_eq!(nearest_codeword(c, &code).unwrap(), i);
        }
        let empty = EditCode { n: 4, radius: 1, codewords: vec![], construction_seed: None };
        assert!(matches!(nearest_codeword(&BitString::zeros(4), &empty), Err(Error::EmptyCode)));
    }

    #[test]
    fn decode_identity_and_singleton() {
        let code = build_code_greedy(12, 4, &mut RngHandle::new(6, Stream::Harness), None).unwrap();
        let params = PipelineParams::new(ChannelParams::new(0.1).unwrap(), TestParams::default());
        for c in code.codewords.iter().take(20) {
            let traces = vec![c.clone(); 8];
            let mut p = params.clone();
            p.channel = ChannelParams::new(1e-9).unwrap();
            assert_eq!(&decode(&traces, &code, &p).unwrap(), c);
        }
        let single = EditCode { n: 12, radius: 4, codewords: vec![code.codewords[0].clone()], construction_seed: None };
        let traces: Vec<BitString> = transmit_many(&code.codewords[1], params.channel, 8, &RngHandle::new(7, Stream::Retention))
            .into_iter()
            .map(|r| r.trace)
            .collect();
        assert_eq!(decode(&traces, &single, &params).unwrap(), code.codewords[0]);
    }
}
