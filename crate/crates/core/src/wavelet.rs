//! Coiflet quadrature-mirror filters and the periodized wavelet-packet tree.
//!
//! Conventions (also relied upon by serialized models):
//!
//! * the high-pass filter is the alternating flip of the low-pass filter,
//!   `g[i] = (-1)^i h[L-1-i]`;
//! * analysis is periodized correlate-then-decimate with zero-based circular
//!   indexing, `c[k] = sum_i f[i] x[(2k + i) mod m]`;
//! * node `(l+1, 2b)` is the low-pass child of `(l, b)` and `(l+1, 2b+1)` its
//!   high-pass child (natural, not sequency, ordering).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coiflet order 1 (6 taps), scaling filter normalized to `sum h = sqrt(2)`.
const COIF6: [f64; 6] = [
    -0.015655728135791993,
    -0.07273261951252645,
    0.3848648468648578,
    0.8525720202116004,
    0.3378976624574818,
    -0.07273261951252645,
];

/// Coiflet order 3 (18 taps).
const COIF18: [f64; 18] = [
    -3.459977319727278e-05,
    -7.0983302506379e-05,
    0.0004662169598204029,
    0.0011175187708306303,
    -0.0025745176881367972,
    -0.009007976136730624,
    0.015880544863669452,
    0.03455502757329774,
    -0.08230192710629983,
    -0.07179982161915484,
    0.42848347637737,
    0.7937772226260872,
    0.40517690240911824,
    -0.06112339000297255,
    -0.06577191128146936,
    0.023452696142077168,
    0.007782596425672746,
    -0.003793512864380802,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterFamily {
    Coiflet,
}

impl fmt::Display for FilterFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterFamily::Coiflet => f.write_str("coiflet"),
        }
    }
}

/// A two-channel orthogonal filter bank.
#[derive(Clone, Debug, PartialEq)]
pub struct QmfPair {
    pub family: FilterFamily,
    pub low_pass: Vec<f64>,
    pub high_pass: Vec<f64>,
}

impl QmfPair {
    pub fn taps(&self) -> usize {
        self.low_pass.len()
    }

    fn from_low_pass(family: FilterFamily, low_pass: &[f64]) -> Self {
        let taps = low_pass.len();
        let high_pass = (0..taps)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * low_pass[taps - 1 - i]
            })
            .collect();
        QmfPair {
            family,
            low_pass: low_pass.to_vec(),
            high_pass,
        }
    }
}

/// Returns the filter bank for `family` with the given tap count.
pub fn build_filter(family: FilterFamily, taps: usize) -> Result<QmfPair> {
    match (family, taps) {
        (FilterFamily::Coiflet, 6) => Ok(QmfPair::from_low_pass(family, &COIF6)),
        (FilterFamily::Coiflet, 18) => Ok(QmfPair::from_low_pass(family, &COIF18)),
        _ => Err(Error::UnsupportedFilter {
            family: family.to_string(),
            taps,
        }),
    }
}

/// Which wavelet-packet dictionary a model was built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DictionaryConfig {
    pub family: FilterFamily,
    pub taps: usize,
    pub depth: usize,
}

impl DictionaryConfig {
    pub fn coiflet(taps: usize, depth: usize) -> Self {
        DictionaryConfig {
            family: FilterFamily::Coiflet,
            taps,
            depth,
        }
    }

    pub fn filter(&self) -> Result<QmfPair> {
        build_filter(self.family, self.taps)
    }

    /// Full-depth dictionary for signals of length `n`.
    pub fn full_depth(taps: usize, n: usize) -> Result<Self> {
        let j = log2_exact(n)?;
        Ok(Self::coiflet(taps, j))
    }
}

/// A subspace of the dictionary: `block` of `2^level` at `level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub level: usize,
    pub block: usize,
}

impl NodeId {
    pub const ROOT: NodeId = NodeId { level: 0, block: 0 };

    pub fn new(level: usize, block: usize) -> Self {
        NodeId { level, block }
    }

    pub fn children(self) -> (NodeId, NodeId) {
        (
            NodeId::new(self.level + 1, 2 * self.block),
            NodeId::new(self.level + 1, 2 * self.block + 1),
        )
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.level, self.block)
    }
}

pub(crate) fn log2_exact(n: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::LengthNotDyadic(n));
    }
    Ok(n.trailing_zeros() as usize)
}

/// All wavelet-packet coefficients of one signal down to `depth`.
///
/// Every level is stored as one contiguous row of length `n`; node `(l, b)`
/// occupies `[b * n/2^l, (b+1) * n/2^l)` of row `l`. Consequently the flat
/// coordinate id `l * n + b * n/2^l + i` orders coordinates by
/// `(level, block, index)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTree {
    n: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl CoefficientTree {
    pub fn signal_length(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total number of dictionary coordinates, `(depth + 1) * n`.
    pub fn num_coordinates(&self) -> usize {
        (self.depth + 1) * self.n
    }

    pub fn level(&self, level: usize) -> &[f64] {
        &self.levels[level]
    }

    pub fn node(&self, node: NodeId) -> &[f64] {
        let len = self.n >> node.level;
        &self.levels[node.level][node.block * len..(node.block + 1) * len]
    }

    /// The input signal (node `(0,0)`).
    pub fn signal(&self) -> &[f64] {
        &self.levels[0]
    }

    pub fn coordinate(&self, node: NodeId, index: usize) -> Result<f64> {
        let oob = Error::IndexOutOfRange {
            level: node.level,
            block: node.block,
            index,
        };
        if node.level > self.depth || node.block >= (1 << node.level) {
            return Err(oob);
        }
        let len = self.n >> node.level;
        if index >= len {
            return Err(oob);
        }
        Ok(self.levels[node.level][node.block * len + index])
    }

    /// Coordinate by flat id; see the type docs for the layout.
    #[inline]
    pub fn flat(&self, id: usize) -> f64 {
        self.levels[id / self.n][id % self.n]
    }
}

/// Full periodized wavelet-packet analysis of `signal` down to `depth`.
pub fn wpt_analyze(signal: &[f64], qmf: &QmfPair, depth: usize) -> Result<CoefficientTree> {
    let n = signal.len();
    let max = log2_exact(n)?;
    if depth > max {
        return Err(Error::DepthExceedsLog2N { depth, max });
    }
    let mut levels = Vec::with_capacity(depth + 1);
    levels.push(signal.to_vec());
    for l in 0..depth {
        let parent = &levels[l];
        let len = n >> l;
        let half = len / 2;
        let mut next = vec![0.0; n];
        for (b, src) in parent.chunks_exact(len).enumerate() {
            let (lo, hi) = next[2 * b * half..(2 * b + 2) * half].split_at_mut(half);
            split_periodic(src, qmf, lo, hi);
        }
        levels.push(next);
    }
    Ok(CoefficientTree { n, depth, levels })
}

fn split_periodic(src: &[f64], qmf: &QmfPair, lo: &mut [f64], hi: &mut [f64]) {
    let m = src.len();
    for k in 0..m / 2 {
        let mut a = 0.0;
        let mut d = 0.0;
        for (i, (&h, &g)) in qmf.low_pass.iter().zip(&qmf.high_pass).enumerate() {
            let x = src[(2 * k + i) % m];
            a += h * x;
            d += g * x;
        }
        lo[k] = a;
        hi[k] = d;
    }
}

/// Analyzes a batch of signals, in parallel when the feature is enabled.
pub fn analyze_batch(
    signals: &[Vec<f64>],
    dict: &DictionaryConfig,
) -> Result<Vec<CoefficientTree>> {
    let qmf = dict.filter()?;
    crate::par::try_map(signals, |s| wpt_analyze(s, &qmf, dict.depth))
}
