//! Insertion/deletion edit distance, `d_e(x, y) = |x| + |y| - 2 LCS(x, y)`.
//!
//! [`edit_distance`] runs the LCS recurrence bit-parallel (one machine word
//! holds 64 DP cells of a row); [`edit_distance_dp`] is the plain two-row
//! table and serves as the reference path. The banded variant is used when
//! only small distances matter.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bitcore::BitString;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EditDistance(pub usize);

impl EditDistance {
    pub fn value(self) -> usize {
        self.0
    }

    /// Distance divided by `n` (the source length); 0 when `n` is 0.
    pub fn normalized(self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.0 as f64 / n as f64
        }
    }
}

impl fmt::Display for EditDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Length of a longest common subsequence, bit-parallel over the shorter string.
pub fn lcs_len(x: &BitString, y: &BitString) -> usize {
    let (outer, inner) = if x.len() >= y.len() { (x, y) } else { (y, x) };
    let m = inner.len();
    if m == 0 {
        return 0;
    }
    let words = m.div_ceil(64);
    // match masks: bit i of mask[c] is set iff inner[i] == c
    let ones = inner.words();
    let tail = if m % 64 == 0 { u64::MAX } else { (1u64 << (m % 64)) - 1 };
    let mut zeros: Vec<u64> = ones.iter().map(|w| !w).collect();
    zeros[words - 1] &= tail;

    let mut v = vec![u64::MAX; words];
    v[words - 1] = tail;
    for c in outer.iter() {
        let mask = if c { ones } else { &zeros[..] };
        let mut carry = 0u64;
        for k in 0..words {
            let vk = v[k];
            let u = vk & mask[k];
            let (s1, c1) = vk.overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry);
            carry = (c1 | c2) as u64;
            v[k] = s2 | (vk & !mask[k]);
        }
        v[words - 1] &= tail;
    }
    m - v.iter().map(|w| w.count_ones() as usize).sum::<usize>()
}

pub fn edit_distance(x: &BitString, y: &BitString) -> EditDistance {
    EditDistance(x.len() + y.len() - 2 * lcs_len(x, y))
}

/// Two-row LCS table, O(|x||y|) time.
pub fn edit_distance_dp(x: &BitString, y: &BitString) -> EditDistance {
    let ys: Vec<bool> = y.iter().collect();
    let mut prev = vec![0usize; ys.len() + 1];
    let mut cur = vec![0usize; ys.len() + 1];
    for a in x.iter() {
        for (j, &b) in ys.iter().enumerate() {
            cur[j + 1] = if a == b { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    EditDistance(x.len() + y.len() - 2 * prev[ys.len()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Banded {
    Exact(EditDistance),
    /// True distance is larger than the band.
    Exceeds { band: usize },
}

/// Edit distance restricted to the diagonal band `|i - j| <= band`.
///
/// Any script of cost `c` stays within `|i - j| <= c`, so a banded optimum
/// that is at most `band` is the exact distance.
pub fn edit_distance_banded(x: &BitString, y: &BitString, band: usize) -> Result<Banded> {
    let (n, m) = (x.len(), y.len());
    if band < n.abs_diff(m) {
        return Err(invalid("band", format!("band {band} is smaller than the length difference {}", n.abs_diff(m))));
    }
    const INF: usize = usize::MAX / 4;
    let width = 2 * band + 1;
    // row i stores columns j in [i - band, i + band] at offset j + band - i
    let mut prev = vec![INF; width];
    let mut cur = vec![INF; width];
    for (off, cell) in prev.iter_mut().enumerate() {
        let j = off as isize - band as isize;
        if (0..=m as isize).contains(&j) {
            *cell = j as usize;
        }
    }
    let ys: Vec<bool> = y.iter().collect();
    for i in 1..=n {
        let xi = x.get(i - 1);
        for off in 0..width {
            let j = i as isize + off as isize - band as isize;
            cur[off] = if j < 0 || j > m as isize {
                INF
            } else if j == 0 {
                i
            } else {
                let j = j as usize;
                // (i-1, j-1) sits at the same offset in the previous row
                if xi == ys[j - 1] {
                    prev[off]
                } else {
                    let up = if off + 1 < width { prev[off + 1] } else { INF };
                    let left = if off > 0 { cur[off - 1] } else { INF };
                    up.min(left).saturating_add(1)
                }
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m + band - n];
    Ok(if d <= band { Banded::Exact(EditDistance(d)) } else { Banded::Exceeds { band } })
}
