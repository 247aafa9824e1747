//! Per-coordinate class statistics and the additive discrimination measures.
//!
//! All statistics are indexed by the flat coordinate id of a
//! [`CoefficientTree`], so a table covers every node of the dictionary at
//! once and a basis score is the sum of its coordinates' entries.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::wavelet::{CoefficientTree, NodeId};

pub const DEFAULT_REGULARIZER: f64 = 1e-12;

/// Which discrimination measure drives basis selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    /// Squared difference of class energies, `(E[Z1²] - E[Z2²])²`.
    Lambda,
    /// Energy difference normalized by the spread of the squared coordinates.
    LambdaPrime,
    /// Signed cross-class separation over within-class pair dispersion.
    LambdaDoublePrime,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 3] = [
        MeasureKind::LambdaPrime,
        MeasureKind::LambdaDoublePrime,
        MeasureKind::Lambda,
    ];

    /// Smallest class size for which the measure is defined.
    pub fn min_class_size(self) -> usize {
        match self {
            MeasureKind::LambdaDoublePrime => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureKind::Lambda => "lambda",
            MeasureKind::LambdaPrime => "lambda-prime",
            MeasureKind::LambdaDoublePrime => "lambda-double-prime",
        })
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    /// Accepts the long names and the method numbering used in reports:
    /// `lambda1` is the primed measure, `lambda2` the double-primed one and
    /// `lambda3` the plain energy measure.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" | "lambda3" => Ok(MeasureKind::Lambda),
            "lambda-prime" | "lambda_prime" | "lambda1" => Ok(MeasureKind::LambdaPrime),
            "lambda-double-prime" | "lambda_double_prime" | "lambda2" => {
                Ok(MeasureKind::LambdaDoublePrime)
            }
            other => Err(Error::InvalidParams(format!("unknown measure {other:?}"))),
        }
    }
}

/// Divisor used for the empirical variances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceEstimator {
    /// Divide by `J`.
    #[default]
    Population,
    /// Divide by `J - 1`.
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub kind: MeasureKind,
    pub regularizer: f64,
    #[serde(default)]
    pub variance: VarianceEstimator,
}

impl Measure {
    pub fn new(kind: MeasureKind) -> Self {
        Measure {
            kind,
            regularizer: DEFAULT_REGULARIZER,
            variance: VarianceEstimator::Population,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.regularizer > 0.0 && self.regularizer.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "regularizer must be positive, got {}",
                self.regularizer
            )));
        }
        Ok(())
    }

    /// Score of coordinate `m` under this measure.
    pub fn score(&self, stats: &CoordinateStats, m: usize) -> f64 {
        match self.kind {
            MeasureKind::Lambda => score_lambda(stats, m),
            MeasureKind::LambdaPrime => score_lambda_prime(stats, m, self.regularizer),
            MeasureKind::LambdaDoublePrime => {
                score_lambda_double_prime_stats(stats, m, self.regularizer)
            }
        }
    }
}

/// Empirical moments of one class, one entry per flat coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassMoments {
    pub count: usize,
    pub mean_z: Vec<f64>,
    pub mean_z2: Vec<f64>,
    pub var_z: Vec<f64>,
    pub var_z2: Vec<f64>,
}

impl ClassMoments {
    /// `E[(Z - Z')²]` over ordered distinct pairs of class members.
    pub fn pair_dispersion(&self, m: usize, estimator: VarianceEstimator) -> f64 {
        let j = self.count as f64;
        let sample_var = match estimator {
            VarianceEstimator::Population if self.count > 1 => self.var_z[m] * j / (j - 1.0),
            VarianceEstimator::Population => 0.0,
            VarianceEstimator::Sample => self.var_z[m],
        };
        2.0 * sample_var
    }
}

/// Moments of both classes over a shared dictionary.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateStats {
    pub signal_length: usize,
    pub depth: usize,
    pub estimator: VarianceEstimator,
    pub classes: [ClassMoments; 2],
}

impl CoordinateStats {
    pub fn num_coordinates(&self) -> usize {
        (self.depth + 1) * self.signal_length
    }
}

fn check_shapes(trees: &[&CoefficientTree], n: usize, depth: usize) -> Result<()> {
    for t in trees {
        if t.signal_length() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: t.signal_length(),
            });
        }
        if t.depth() != depth {
            return Err(Error::ConfigMismatch(format!(
                "tree depth {} differs from {depth}",
                t.depth()
            )));
        }
    }
    Ok(())
}

fn class_moments(trees: &[&CoefficientTree], estimator: VarianceEstimator) -> ClassMoments {
    let n = trees[0].signal_length();
    let depth = trees[0].depth();
    let j = trees.len() as f64;
    let denom = match estimator {
        VarianceEstimator::Population => j,
        VarianceEstimator::Sample => j - 1.0,
    };
    let per_level = par::map_range(depth + 1, |l| {
        let mut m1 = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        for t in trees {
            for ((a, b), &z) in m1.iter_mut().zip(m2.iter_mut()).zip(t.level(l)) {
                *a += z;
                *b += z * z;
            }
        }
        m1.iter_mut().for_each(|v| *v /= j);
        m2.iter_mut().for_each(|v| *v /= j);
        let mut v1 = vec![0.0; n];
        let mut v2 = vec![0.0; n];
        if denom > 0.0 {
            for t in trees {
                for (i, &z) in t.level(l).iter().enumerate() {
                    let d1 = z - m1[i];
                    let d2 = z * z - m2[i];
                    v1[i] += d1 * d1;
                    v2[i] += d2 * d2;
                }
            }
            v1.iter_mut().for_each(|v| *v = (*v / denom).max(0.0));
            v2.iter_mut().for_each(|v| *v = (*v / denom).max(0.0));
        }
        [m1, m2, v1, v2]
    });
    let mut out = ClassMoments {
        count: trees.len(),
        mean_z: Vec::with_capacity((depth + 1) * n),
        mean_z2: Vec::with_capacity((depth + 1) * n),
        var_z: Vec::with_capacity((depth + 1) * n),
        var_z2: Vec::with_capacity((depth + 1) * n),
    };
    for [m1, m2, v1, v2] in per_level {
        out.mean_z.extend(m1);
        out.mean_z2.extend(m2);
        out.var_z.extend(v1);
        out.var_z2.extend(v2);
    }
    out
}

/// Empirical moments of both classes under uniform sample weights.
pub fn coordinate_stats(
    class1: &[&CoefficientTree],
    class2: &[&CoefficientTree],
    estimator: VarianceEstimator,
) -> Result<CoordinateStats> {
    let first = class1
        .first()
        .ok_or_else(|| Error::EmptyClass("1".into()))?;
    if class2.is_empty() {
        return Err(Error::EmptyClass("2".into()));
    }
    let (n, depth) = (first.signal_length(), first.depth());
    check_shapes(class1, n, depth)?;
    check_shapes(class2, n, depth)?;
    Ok(CoordinateStats {
        signal_length: n,
        depth,
        estimator,
        classes: [
            class_moments(class1, estimator),
            class_moments(class2, estimator),
        ],
    })
}

/// Normalized time-frequency energy map of one class:
/// `sum_j (w_m . x_j)² / sum_j ||x_j||²` for every dictionary coordinate.
pub fn energy_map(trees: &[&CoefficientTree]) -> Result<Vec<f64>> {
    let first = trees.first().ok_or_else(|| Error::EmptyClass("?".into()))?;
    check_shapes(trees, first.signal_length(), first.depth())?;
    let total: f64 = trees
        .iter()
        .map(|t| t.signal().iter().map(|v| v * v).sum::<f64>())
        .sum();
    let mut out = vec![0.0; first.num_coordinates()];
    let n = first.signal_length();
    for t in trees {
        for (l, row) in out.chunks_mut(n).enumerate() {
            for (o, &z) in row.iter_mut().zip(t.level(l)) {
                *o += z * z;
            }
        }
    }
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

pub fn score_lambda(stats: &CoordinateStats, m: usize) -> f64 {
    let d = stats.classes[0].mean_z2[m] - stats.classes[1].mean_z2[m];
    d * d
}

pub fn score_lambda_prime(stats: &CoordinateStats, m: usize, regularizer: f64) -> f64 {
    let [a, b] = &stats.classes;
    let d = a.mean_z2[m] - b.mean_z2[m];
    d * d / (a.var_z2[m] + b.var_z2[m] + regularizer)
}

/// `sqrt(E_cross[(Z1 - Z2)²]) / (sqrt(E_1[(Z - Z')²]) + sqrt(E_2[(Z - Z')²]) + reg)`
fn double_prime_ratio(cross: f64, within1: f64, within2: f64, regularizer: f64) -> f64 {
    cross.max(0.0).sqrt() / (within1.max(0.0).sqrt() + within2.max(0.0).sqrt() + regularizer)
}

fn cross_dispersion(mean1: f64, mean_sq1: f64, mean2: f64, mean_sq2: f64) -> f64 {
    mean_sq1 - 2.0 * mean1 * mean2 + mean_sq2
}

pub fn score_lambda_double_prime_stats(stats: &CoordinateStats, m: usize, regularizer: f64) -> f64 {
    let [a, b] = &stats.classes;
    let cross = cross_dispersion(a.mean_z[m], a.mean_z2[m], b.mean_z[m], b.mean_z2[m]);
    double_prime_ratio(
        cross,
        a.pair_dispersion(m, stats.estimator),
        b.pair_dispersion(m, stats.estimator),
        regularizer,
    )
}

/// The double-primed score of one coordinate given its raw values per class.
pub fn score_lambda_double_prime(class1: &[f64], class2: &[f64], regularizer: f64) -> Result<f64> {
    for (name, c) in [("1", class1), ("2", class2)] {
        if c.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: name.into(),
                size: c.len(),
            });
        }
    }
    let moments = |c: &[f64]| {
        let j = c.len() as f64;
        let m1 = c.iter().sum::<f64>() / j;
        let m2 = c.iter().map(|z| z * z).sum::<f64>() / j;
        let var = c.iter().map(|z| (z - m1) * (z - m1)).sum::<f64>() / (j - 1.0);
        (m1, m2, 2.0 * var)
    };
    let (a1, a2, wa) = moments(class1);
    let (b1, b2, wb) = moments(class2);
    Ok(double_prime_ratio(
        cross_dispersion(a1, a2, b1, b2),
        wa,
        wb,
        regularizer,
    ))
}

/// Per-coordinate scores over the whole dictionary.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    signal_length: usize,
    depth: usize,
    scores: Vec<f64>,
}

impl ScoreTable {
    /// Wraps precomputed scores laid out by flat coordinate id.
    pub fn from_scores(signal_length: usize, depth: usize, scores: Vec<f64>) -> Result<Self> {
        let max = crate::wavelet::log2_exact(signal_length)?;
        if depth > max {
            return Err(Error::DepthExceedsLog2N { depth, max });
        }
        let expected = (depth + 1) * signal_length;
        if scores.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: scores.len(),
            });
        }
        if let Some(bad) = scores.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::InvalidParams(format!(
                "scores must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(ScoreTable {
            signal_length,
            depth,
            scores,
        })
    }

    pub fn signal_length(&self) -> usize {
        self.signal_length
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn flat_id(&self, node: NodeId, index: usize) -> usize {
        node.level * self.signal_length + node.block * (self.signal_length >> node.level) + index
    }

    pub fn node_scores(&self, node: NodeId) -> &[f64] {
        let len = self.signal_length >> node.level;
        let start = node.level * self.signal_length + node.block * len;
        &self.scores[start..start + len]
    }

    /// Sum of a node's coordinate scores, accumulated left to right.
    pub fn node_score(&self, node: NodeId) -> f64 {
        self.node_scores(node).iter().sum()
    }
}

/// Scores every dictionary coordinate for the two classes.
pub fn score_table(
    class1: &[&CoefficientTree],
    class2: &[&CoefficientTree],
    measure: &Measure,
) -> Result<ScoreTable> {
    measure.validate()?;
    let min = measure.kind.min_class_size();
    for (name, c) in [("1", class1), ("2", class2)] {
        if c.is_empty() {
            return Err(Error::EmptyClass(name.into()));
        }
        if c.len() < min {
            return Err(Error::ClassTooSmall {
                class: name.into(),
                size: c.len(),
            });
        }
    }
    let stats = coordinate_stats(class1, class2, measure.variance)?;
    Ok(score_table_from_stats(&stats, measure))
}

pub fn score_table_from_stats(stats: &CoordinateStats, measure: &Measure) -> ScoreTable {
    let n = stats.signal_length;
    let mut scores = vec![0.0; stats.num_coordinates()];
    par::for_each_chunk_mut(&mut scores, n, |l, row| {
        for (i, s) in row.iter_mut().enumerate() {
            *s = measure.score(stats, l * n + i);
        }
    });
    ScoreTable {
        signal_length: n,
        depth: stats.depth,
        scores,
    }
}

/// Summed length of the intersections of the one-sigma intervals of the
/// squared coordinates, `[E[Z²] - sd(Z²), E[Z²] + sd(Z²)]`, over `coords`.
pub fn interval_overlap(stats: &CoordinateStats, coords: impl IntoIterator<Item = usize>) -> f64 {
    let [a, b] = &stats.classes;
    coords
        .into_iter()
        .map(|m| {
            let (sa, sb) = (a.var_z2[m].sqrt(), b.var_z2[m].sqrt());
            let lo = (a.mean_z2[m] - sa).max(b.mean_z2[m] - sb);
            let hi = (a.mean_z2[m] + sa).min(b.mean_z2[m] + sb);
            (hi - lo).max(0.0)
        })
        .sum()
}
