//! Bottom-up best-basis search and K-term feature selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::ScoreTable;
use crate::wavelet::{CoefficientTree, NodeId};

/// A tiling of the dictionary tree: a set of nodes covering the signal axis
/// exactly once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    /// Nodes in left-to-right order along the axis.
    pub nodes: Vec<NodeId>,
    pub score: f64,
}

impl Basis {
    /// True if `nodes` is an antichain whose dyadic supports cover `[0,1)` once.
    pub fn is_tiling(&self, depth: usize) -> bool {
        let mut cover = 0u128;
        let unit = 1u128 << depth;
        for n in &self.nodes {
            if n.level > depth || n.block >= 1 << n.level {
                return false;
            }
            cover += unit >> n.level;
        }
        if cover != unit {
            return false;
        }
        // With total measure 1, any overlap would leave a gap elsewhere.
        let mut spans: Vec<(u128, u128)> = self
            .nodes
            .iter()
            .map(|n| {
                let w = unit >> n.level;
                (n.block as u128 * w, (n.block as u128 + 1) * w)
            })
            .collect();
        spans.sort_unstable();
        spans.windows(2).all(|w| w[0].1 == w[1].0)
    }
}

/// Maximizes the additive score over all tilings of the tree.
///
/// A node is kept whenever its own score is at least the best combined score
/// of its children, so ties resolve to the coarser basis.
pub fn best_basis(table: &ScoreTable) -> Basis {
    let depth = table.depth();
    // best[l][b] = (score, keep_self)
    let mut best: Vec<Vec<(f64, bool)>> = (0..=depth).map(|l| vec![(0.0, true); 1 << l]).collect();
    for (b, slot) in best[depth].iter_mut().enumerate() {
        *slot = (table.node_score(NodeId::new(depth, b)), true);
    }
    for l in (0..depth).rev() {
        for b in 0..1usize << l {
            let own = table.node_score(NodeId::new(l, b));
            let split = best[l + 1][2 * b].0 + best[l + 1][2 * b + 1].0;
            best[l][b] = if own >= split {
                (own, true)
            } else {
                (split, false)
            };
        }
    }
    let mut nodes = Vec::new();
    let mut stack = vec![NodeId::ROOT];
    while let Some(node) = stack.pop() {
        if best[node.level][node.block].1 {
            nodes.push(node);
        } else {
            let (lo, hi) = node.children();
            stack.push(hi);
            stack.push(lo);
        }
    }
    Basis {
        nodes,
        score: best[0][0].0,
    }
}

/// One selected coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub node: NodeId,
    pub index: usize,
    pub score: f64,
}

/// The `K` most discriminating coordinates of a basis, in decreasing score
/// order (ties by `(level, block, index)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub signal_length: usize,
    pub features: Vec<Feature>,
    pub basis: Basis,
}

impl FeatureSpace {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    /// True if both spaces select the same coordinates in the same order.
    pub fn same_features(&self, other: &FeatureSpace) -> bool {
        self.features.len() == other.features.len()
            && self
                .features
                .iter()
                .zip(&other.features)
                .all(|(a, b)| a.node == b.node && a.index == b.index)
    }
}

pub fn top_k_features(basis: &Basis, table: &ScoreTable, k: usize) -> Result<FeatureSpace> {
    let n = table.signal_length();
    if k == 0 {
        return Err(Error::InvalidParams("K must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let mut all: Vec<(usize, Feature)> = basis
        .nodes
        .iter()
        .flat_map(|&node| {
            table
                .node_scores(node)
                .iter()
                .enumerate()
                .map(move |(index, &score)| Feature { node, index, score })
        })
        .map(|f| (table.flat_id(f.node, f.index), f))
        .collect();
    all.sort_by(|(ia, a), (ib, b)| match b.score.total_cmp(&a.score) {
        Ordering::Equal => ia.cmp(ib),
        o => o,
    });
    Ok(FeatureSpace {
        signal_length: n,
        features: all.into_iter().take(k).map(|(_, f)| f).collect(),
        basis: basis.clone(),
    })
}

/// First `k` feature coordinates of `tree`, clamped to `[-1, 1]`.
///
/// For unit-norm signals the coordinates lie in `[-1, 1]` mathematically; the
/// clamp only absorbs last-bit rounding so that such points stay inside the
/// root cube.
pub fn project(tree: &CoefficientTree, fs: &FeatureSpace, k: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; k];
    project_into(tree, fs, &mut out)?;
    Ok(out)
}

pub fn project_into(tree: &CoefficientTree, fs: &FeatureSpace, out: &mut [f64]) -> Result<()> {
    if out.len() > fs.dim() {
        return Err(Error::DimensionMismatch {
            expected: fs.dim(),
            actual: out.len(),
        });
    }
    if tree.signal_length() != fs.signal_length {
        return Err(Error::DimensionMismatch {
            expected: fs.signal_length,
            actual: tree.signal_length(),
        });
    }
    for (o, f) in out.iter_mut().zip(&fs.features) {
        *o = tree.coordinate(f.node, f.index)?.clamp(-1.0, 1.0);
    }
    Ok(())
}
