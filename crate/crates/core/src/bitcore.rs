//! Packed bit strings, the majority function and seeded random streams.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// An immutable-by-convention sequence of bits packed into 64-bit words.
///
/// Bit `i` lives in word `i / 64` at bit position `i % 64`. Bits past `len`
/// in the last word are always zero, which keeps equality and popcounts
/// word-wise.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            words: Vec::with_capacity(bits.div_ceil(WORD)),
            len: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = BitString {
            words: vec![u64::MAX; len.div_ceil(WORD)],
            len,
        };
        s.clear_tail();
        s
    }

    /// Builds a string from `0`/`1` values; any nonzero byte counts as 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        bits.iter().map(|&b| b != 0).collect()
    }

    /// Low `len` bits of `value`, least significant bit first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= WORD);
        let mut s = BitString {
            words: if len == 0 { vec![] } else { vec![value] },
            len,
        };
        s.clear_tail();
        s
    }

    /// Inverse of [`BitString::from_u64`]; `len` must be at most 64.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= WORD);
        self.words.first().copied().unwrap_or(0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len);
        let mask = 1u64 << (i % WORD);
        if bit {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % WORD == 0 {
            self.words.push(0);
        }
        if bit {
            self.words[self.len / WORD] |= 1u64 << (self.len % WORD);
        }
        self.len += 1;
    }

    pub fn extend_from(&mut self, other: &BitString) {
        // TODO: word-level shift-and-or append; bitwise is fine at current sizes.
        self.words.reserve(other.words.len());
        for bit in other.iter() {
            self.push(bit);
        }
    }

    /// Half-open slice `self[a..b]`.
    pub fn slice(&self, a: usize, b: usize) -> BitString {
        assert!(a <= b && b <= self.len, "slice {a}..{b} out of range for length {}", self.len);
        let len = b - a;
        let mut words = Vec::with_capacity(len.div_ceil(WORD));
        let shift = a % WORD;
        let first = a / WORD;
        for k in 0..len.div_ceil(WORD) {
            let lo = self.words[first + k] >> shift;
            let hi = if shift != 0 {
                self.words.get(first + k + 1).map_or(0, |w| w << (WORD - shift))
            } else {
                0
            };
            words.push(lo | hi);
        }
        let mut s = BitString { words, len };
        s.clear_tail();
        s
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of ones in the half-open range `a..b`.
    pub fn count_ones_in(&self, a: usize, b: usize) -> usize {
        assert!(a <= b && b <= self.len);
        if a == b {
            return 0;
        }
        let (wa, wb) = (a / WORD, (b - 1) / WORD);
        let lo_mask = u64::MAX << (a % WORD);
        let hi_mask = u64::MAX >> (WORD - 1 - (b - 1) % WORD);
        if wa == wb {
            return (self.words[wa] & lo_mask & hi_mask).count_ones() as usize;
        }
        let mut total = (self.words[wa] & lo_mask).count_ones() as usize;
        for w in &self.words[wa + 1..wb] {
            total += w.count_ones() as usize;
        }
        total + (self.words[wb] & hi_mask).count_ones() as usize
    }

    pub fn complement(&self) -> BitString {
        let mut s = BitString {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        s.clear_tail();
        s
    }

    pub fn reversed(&self) -> BitString {
        (0..self.len).rev().map(|i| self.get(i)).collect()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = bool> + ExactSizeIterator + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Raw packed words; bits beyond `len` are zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
        self.words.truncate(self.len.div_ceil(WORD));
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let iter = iter.into_iter();
        let mut s = BitString::with_capacity(iter.size_hint().0);
        for bit in iter {
            s.push(bit);
        }
        s
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.iter() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Serialized as a `0`/`1` string.
impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitString(\"{self}\")")
        } else {
            write!(f, "BitString(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

/// Prefix popcounts over a bit string, for O(1) range counts.
#[derive(Debug, Clone)]
pub struct OnesPrefix {
    cumulative: Vec<u32>,
}

impl OnesPrefix {
    pub fn new(bits: &BitString) -> Self {
        let mut cumulative = Vec::with_capacity(bits.len() + 1);
        let mut acc = 0u32;
        cumulative.push(0);
        for bit in bits.iter() {
            acc += bit as u32;
            cumulative.push(acc);
        }
        OnesPrefix { cumulative }
    }

    #[inline]
    pub fn ones(&self, a: usize, b: usize) -> usize {
        (self.cumulative[b] - self.cumulative[a]) as usize
    }

    /// Majority of `a..b`: one iff ones strictly outnumber zeros.
    #[inline]
    pub fn maj(&self, a: usize, b: usize) -> bool {
        2 * self.ones(a, b) > b - a
    }

    pub fn len(&self) -> usize {
        self.cumulative.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 1 iff there are strictly more ones than zeros; ties (and the empty string) give 0.
pub fn maj(w: &BitString) -> bool {
    2 * w.count_ones() > w.len()
}

/// Which random quantity a handle drives. Each stream gets its own sub-seed,
/// so source bits and retention variables never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    Source,
    Retention,
    Harness,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Source => 0x5352_4345_0000_0001,
            Stream::Retention => 0x5245_544e_0000_0002,
            Stream::Harness => 0x4841_524e_0000_0003,
        }
    }
}

/// SplitMix64 finalizer, used to turn (seed, tag, index) into sub-seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded generator for one stream.
///
/// The generator is ChaCha8 (`rand_chacha`), keyed via `seed_from_u64` with
/// `splitmix64(seed ^ stream_tag)`. ChaCha output is specified independently
/// of platform and word size, so a fixed `(seed, stream)` reproduces the same
/// draw sequence everywhere. Child handles for workers or trials come from
/// [`RngHandle::derive`].
#[derive(Clone, Debug)]
pub struct RngHandle {
    seed: u64,
    stream: Stream,
    rng: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ stream.tag()));
        RngHandle { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> Stream {
        self.stream
    }

    /// Independent child handle on the same stream, e.g. for trace `index`.
    pub fn derive(&self, index: u64) -> RngHandle {
        let child = splitmix64(self.seed ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)));
        RngHandle::new(child, self.stream)
    }

    /// Same seed, different stream.
    pub fn with_stream(&self, stream: Stream) -> RngHandle {
        RngHandle::new(self.seed, stream)
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// `n` independent uniform bits, one 64-bit draw per word.
pub fn sample_uniform(n: usize, rng: &mut RngHandle) -> BitString {
    let words = (0..n.div_ceil(WORD)).map(|_| rng.next_u64()).collect();
    let mut s = BitString { words, len: n };
    s.clear_tail();
    s
}
