//! Dyadic cluster search: builds an ordered list of class-pure dyadic cubes
//! in a sequence of discriminant feature spaces.
//!
//! The search state machine:
//!
//! 1. select a feature space from the points still in play (every time in
//!    MLDB mode, once in LDB mode) and project them;
//! 2. sweep the dyadic cubes of `[-1,1]^k` depth first, starting from the
//!    root, for the first cube holding at least `max(alpha, beta)` points with
//!    error rate at most `delta`. Cubes with enough points but too high an
//!    error rate are split into `2^k` children;
//! 3. store such a cube, drop its points, and restart the sweep at `k = 1`,
//!    `delta = 0`; when a sweep after a store finds nothing, go back to 1;
//!    otherwise escalate `k` and then `delta`.
//!
//! The run ends once both classes are down to their sparseness thresholds or
//! a full sweep at `delta = delta_cap` stores nothing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::best_basis::{best_basis, project_into, top_k_features, FeatureSpace};
use crate::error::{Error, Result};
use crate::measures::{score_table, Measure, MeasureKind};
use crate::wavelet::{CoefficientTree, DictionaryConfig};

/// Cubes are never split below this depth; points closer than `2^-47`
/// cannot be separated anyway.
pub const MAX_CUBE_DEPTH: u32 = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Select the basis once.
    Ldb,
    /// Re-select the basis after every saturated post-cluster sweep.
    Mldb,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ldb => "ldb",
            Mode::Mldb => "mldb",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ldb" => Ok(Mode::Ldb),
            "mldb" => Ok(Mode::Mldb),
            other => Err(Error::InvalidParams(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcsaParams {
    /// Feature-space dimension `K`.
    pub k: usize,
    /// Error-budget increment.
    pub delta: f64,
    /// Sparseness fraction for termination.
    pub eta: f64,
    /// Minimum cluster size as a fraction of the remaining points.
    pub mu: f64,
    /// Minimum cluster size as a fraction of the initial points.
    pub nu: f64,
    pub mode: Mode,
    pub measure: Measure,
    pub delta_cap: f64,
}

impl DcsaParams {
    /// `K = 5, delta = 0.01, eta = 0.05, nu = 0.05` with the given `mu`.
    pub fn standard(mu: f64, mode: Mode, kind: MeasureKind) -> Self {
        DcsaParams {
            k: 5,
            delta: 0.01,
            eta: 0.05,
            mu,
            nu: 0.05,
            mode,
            measure: Measure::new(kind),
            delta_cap: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.k < 1 {
            return bad("K must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.eta >= 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in [0,1), got {}", self.eta));
        }
        if !(self.mu < 1.0 && self.nu > 0.0 && self.mu >= self.nu) {
            return bad(format!(
                "need 1 > mu >= nu > 0, got mu = {}, nu = {}",
                self.mu, self.nu
            ));
        }
        if !(self.delta_cap > 0.0 && self.delta_cap <= 0.5) {
            return bad(format!(
                "delta_cap must lie in (0, 0.5], got {}",
                self.delta_cap
            ));
        }
        self.measure.validate()
    }
}

/// A cube `prod_i [-1 + 2 c_i / 2^d, -1 + 2 (c_i + 1) / 2^d)` in `[-1,1]^k`,
/// closed at `+1`. Serialized as exact dyadic fractions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CubeRepr", into = "CubeRepr")]
pub struct DyadicCube {
    depth: u32,
    cells: Vec<u64>,
}

/// Interval endpoints as numerators over `2^denominator_log2`.
#[derive(Serialize, Deserialize)]
struct CubeRepr {
    denominator_log2: u32,
    intervals: Vec<[i64; 2]>,
}

impl From<DyadicCube> for CubeRepr {
    fn from(c: DyadicCube) -> Self {
        let scale = 1i64 << c.depth;
        CubeRepr {
            denominator_log2: c.depth,
            intervals: c
                .cells
                .iter()
                .map(|&p| {
                    let lo = 2 * p as i64 - scale;
                    [lo, lo + 2]
                })
                .collect(),
        }
    }
}

impl TryFrom<CubeRepr> for DyadicCube {
    type Error = String;

    fn try_from(r: CubeRepr) -> std::result::Result<Self, String> {
        if r.denominator_log2 > MAX_CUBE_DEPTH {
            return Err(format!("cube depth {} too large", r.denominator_log2));
        }
        if r.intervals.is_empty() {
            return Err("cube has no axes".into());
        }
        let scale = 1i64 << r.denominator_log2;
        let cells = r
            .intervals
            .iter()
            .map(|&[lo, hi]| {
                let p = lo + scale;
                if hi - lo != 2 || p < 0 || p % 2 != 0 || p / 2 >= scale {
                    Err(format!(
                        "[{lo}, {hi}] / 2^{} is not a dyadic cell",
                        r.denominator_log2
                    ))
                } else {
                    Ok((p / 2) as u64)
                }
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(DyadicCube {
            depth: r.denominator_log2,
            cells,
        })
    }
}

impl DyadicCube {
    /// `[-1,1]^dim`.
    pub fn root(dim: usize) -> Self {
        DyadicCube {
            depth: 0,
            cells: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn side(&self) -> f64 {
        2.0 * 0.5f64.powi(self.depth as i32)
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.cells[axis] as f64 * self.side() - 1.0
    }

    pub fn upper(&self, axis: usize) -> f64 {
        (self.cells[axis] + 1) as f64 * self.side() - 1.0
    }

    /// Membership of the first `dim` coordinates of `point`.
    pub fn contains(&self, point: &[f64]) -> bool {
        debug_assert!(point.len() >= self.dim());
        (0..self.dim()).all(|i| {
            let (lo, hi) = (self.lower(i), self.upper(i));
            let x = point[i];
            x >= lo && (x < hi || (x == 1.0 && hi == 1.0))
        })
    }

    /// The `2^k` children in binary-counting order, axis 0 the low bit.
    pub fn split(&self) -> Vec<DyadicCube> {
        let k = self.dim();
        (0..1u64 << k)
            .map(|c| DyadicCube {
                depth: self.depth + 1,
                cells: self
                    .cells
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| 2 * p + ((c >> i) & 1))
                    .collect(),
            })
            .collect()
    }

    /// Index into [`split`](Self::split) of the child holding `point`.
    fn child_of(&self, point: &[f64]) -> usize {
        let half = self.side() / 2.0;
        (0..self.dim())
            .filter(|&i| point[i] >= self.lower(i) + half)
            .fold(0, |acc, i| acc | (1 << i))
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "[{}, {})", self.lower(i), self.upper(i))?;
        }
        Ok(())
    }
}

/// Name of one side of a two-class problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassName {
    Class(u32),
    /// Everything except the given class (one-vs-rest).
    NotClass(u32),
}

impl fmt::Display for ClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassName::Class(c) => write!(f, "{c}"),
            ClassName::NotClass(c) => write!(f, "not-{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub cube: DyadicCube,
    /// Index into [`Oracle::feature_spaces`].
    pub feature_space: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub epsilon: f64,
    pub label: ClassName,
    /// Set when `n_a == n_b`; the label then defaults to the first class.
    pub tie: bool,
    pub frequency_base: usize,
    /// Error budget in force when the cube was stored.
    pub delta: f64,
    /// Training points removed by this cube; ids index class 1 then class 2.
    pub captured: Vec<usize>,
}

impl ClusterRecord {
    pub fn count(&self) -> usize {
        self.n_a + self.n_b
    }

    /// `(1 - epsilon) * (n_a + n_b) / |X|`.
    pub fn vote_weight(&self) -> f64 {
        (1.0 - self.epsilon) * self.count() as f64 / self.frequency_base as f64
    }
}

/// A trained two-class dyadic-cube classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub dictionary: DictionaryConfig,
    pub signal_length: usize,
    pub params: DcsaParams,
    pub classes: [ClassName; 2],
    pub class_sizes: [usize; 2],
    pub feature_spaces: Vec<FeatureSpace>,
    pub records: Vec<ClusterRecord>,
}

impl Oracle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let o: Oracle = serde_json::from_str(s)?;
        o.check()?;
        Ok(o)
    }

    fn check(&self) -> Result<()> {
        for r in &self.records {
            let fs = self.feature_spaces.get(r.feature_space).ok_or_else(|| {
                Error::format("oracle", "record references a missing feature space")
            })?;
            if r.cube.dim() > fs.dim() {
                return Err(Error::format(
                    "oracle",
                    "cube dimension exceeds feature space",
                ));
            }
        }
        Ok(())
    }

    /// Whether `tree` comes from the dictionary this oracle was trained on.
    pub fn check_tree(&self, tree: &CoefficientTree) -> Result<()> {
        if tree.signal_length() != self.signal_length || tree.depth() != self.dictionary.depth {
            return Err(Error::ConfigMismatch(format!(
                "oracle expects length {} depth {}, tree has length {} depth {}",
                self.signal_length,
                self.dictionary.depth,
                tree.signal_length(),
                tree.depth()
            )));
        }
        Ok(())
    }
}

fn ceil_count(frac: f64, n: usize) -> usize {
    (frac * n as f64).ceil() as usize
}

struct Search<'a> {
    trees: Vec<&'a CoefficientTree>,
    /// Class side of each point, 0 or 1.
    side: Vec<u8>,
    alive: Vec<bool>,
    k_max: usize,
    /// Row-major `points x K` projections in the current feature space.
    proj: Vec<f64>,
}

impl Search<'_> {
    fn alive_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for (i, &a) in self.alive.iter().enumerate() {
            if a {
                c[self.side[i] as usize] += 1;
            }
        }
        c
    }

    fn point(&self, id: usize) -> &[f64] {
        &self.proj[id * self.k_max..(id + 1) * self.k_max]
    }

    fn select(&self, measure: &Measure) -> Result<FeatureSpace> {
        let mut classes: [Vec<&CoefficientTree>; 2] = [Vec::new(), Vec::new()];
        for (i, t) in self.trees.iter().enumerate() {
            if self.alive[i] {
                classes[self.side[i] as usize].push(*t);
            }
        }
        let table = score_table(&classes[0], &classes[1], measure)?;
        top_k_features(&best_basis(&table), &table, self.k_max)
    }

    fn reproject(&mut self, fs: &FeatureSpace) -> Result<()> {
        let k = self.k_max;
        for (i, t) in self.trees.iter().enumerate() {
            if self.alive[i] {
                project_into(t, fs, &mut self.proj[i * k..(i + 1) * k])?;
            }
        }
        Ok(())
    }

    /// Depth-first sweep of `[-1,1]^k`; returns the first storable cube and
    /// the points inside it.
    fn sweep(&self, k: usize, threshold: usize, delta: f64) -> Option<(DyadicCube, Vec<usize>)> {
        let all: Vec<usize> = (0..self.trees.len()).filter(|&i| self.alive[i]).collect();
        let mut stack = vec![(DyadicCube::root(k), all)];
        while let Some((cube, members)) = stack.pop() {
            if members.len() < threshold {
                continue;
            }
            let nb = members.iter().filter(|&&i| self.side[i] == 1).count();
            let na = members.len() - nb;
            let eps = na.min(nb) as f64 / members.len() as f64;
            if eps <= delta {
                return Some((cube, members));
            }
            if cube.depth() >= MAX_CUBE_DEPTH {
                continue;
            }
            let children = cube.split();
            let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); children.len()];
            for &id in &members {
                let c = cube.child_of(self.point(id));
                debug_assert!(children[c].contains(self.point(id)));
                buckets[c].push(id);
            }
            for (child, b) in children.into_iter().zip(buckets).rev() {
                stack.push((child, b));
            }
        }
        None
    }
}

/// Trains a two-class oracle on coefficient trees of class 1 and class 2.
pub fn run_dcsa(
    class1: &[&CoefficientTree],
    class2: &[&CoefficientTree],
    classes: [ClassName; 2],
    dictionary: DictionaryConfig,
    params: &DcsaParams,
) -> Result<Oracle> {
    params.validate()?;
    for (name, c) in [(classes[0], class1), (classes[1], class2)] {
        if c.is_empty() {
            return Err(Error::EmptyClass(name.to_string()));
        }
    }
    let n = class1[0].signal_length();
    for t in class1.iter().chain(class2) {
        if t.signal_length() != n || t.depth() != dictionary.depth {
            return Err(Error::ConfigMismatch(format!(
                "training tree (length {}, depth {}) does not match length {n}, depth {}",
                t.signal_length(),
                t.depth(),
                dictionary.depth
            )));
        }
    }
    if params.k > n {
        return Err(Error::KTooLarge { k: params.k, n });
    }

    let total = class1.len() + class2.len();
    let beta = ceil_count(params.nu, total);
    let gamma = [
        ceil_count(params.eta, class1.len()),
        ceil_count(params.eta, class2.len()),
    ];
    let min_size = params.measure.kind.min_class_size();

    let mut search = Search {
        trees: class1.iter().chain(class2).copied().collect(),
        side: std::iter::repeat_n(0u8, class1.len())
            .chain(std::iter::repeat_n(1u8, class2.len()))
            .collect(),
        alive: vec![true; total],
        k_max: params.k,
        proj: vec![0.0; total * params.k],
    };
    let mut feature_spaces: Vec<FeatureSpace> = Vec::new();
    let mut records = Vec::new();

    'select: loop {
        let counts = search.alive_counts();
        let reselect = feature_spaces.is_empty()
            || (params.mode == Mode::Mldb && counts.iter().all(|&c| c >= min_size));
        if reselect {
            let fs = search.select(&params.measure)?;
            let same = feature_spaces.last().is_some_and(|l| l.same_features(&fs));
            if !same {
                feature_spaces.push(fs);
            }
        }
        let current = feature_spaces.len() - 1;
        search.reproject(&feature_spaces[current])?;

        let mut steps = 0u32;
        let mut k = 1;
        let mut found = false;
        loop {
            let [na, nb] = search.alive_counts();
            if na <= gamma[0] && nb <= gamma[1] {
                break 'select;
            }
            let alpha = ceil_count(params.mu, na + nb);
            let threshold = alpha.max(beta).max(1);
            let delta = (steps as f64 * params.delta).min(params.delta_cap);

            if let Some((cube, members)) = search.sweep(k, threshold, delta) {
                let cb = members.iter().filter(|&&i| search.side[i] == 1).count();
                let ca = members.len() - cb;
                let label = if cb > ca { classes[1] } else { classes[0] };
                for &id in &members {
                    search.alive[id] = false;
                }
                records.push(ClusterRecord {
                    cube,
                    feature_space: current,
                    n_a: ca,
                    n_b: cb,
                    epsilon: ca.min(cb) as f64 / (ca + cb) as f64,
                    label,
                    tie: ca == cb,
                    frequency_base: total,
                    delta,
                    captured: members,
                });
                found = true;
                steps = 0;
                k = 1;
                continue;
            }
            if found {
                continue 'select;
            }
            if k < params.k {
                k += 1;
                continue;
            }
            if delta >= params.delta_cap {
                break 'select;
            }
            k = 1;
            steps += 1;
        }
    }

    Ok(Oracle {
        dictionary,
        signal_length: n,
        params: *params,
        classes,
        class_sizes: [class1.len(), class2.len()],
        feature_spaces,
        records,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub cube_depth: u32,
    pub dim: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub epsilon: f64,
    pub feature_space: usize,
    pub label: ClassName,
}

/// Per-record summary of a training run plus its aggregate training rates.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
    /// Percent of training points captured by some cube.
    pub classification_rate: f64,
    /// Percent of captured points in a cube's minority class.
    pub error_rate: f64,
}

pub fn training_trace(oracle: &Oracle) -> TrainingTrace {
    let rows: Vec<TraceRow> = oracle
        .records
        .iter()
        .map(|r| TraceRow {
            cube_depth: r.cube.depth(),
            dim: r.cube.dim(),
            n_a: r.n_a,
            n_b: r.n_b,
            epsilon: r.epsilon,
            feature_space: r.feature_space,
            label: r.label,
        })
        .collect();
    let captured: usize = oracle.records.iter().map(|r| r.count()).sum();
    let wrong: usize = oracle.records.iter().map(|r| r.n_a.min(r.n_b)).sum();
    let base: usize = oracle.class_sizes.iter().sum();
    TrainingTrace {
        rows,
        classification_rate: if base == 0 {
            0.0
        } else {
            100.0 * captured as f64 / base as f64
        },
        error_rate: if captured == 0 {
            0.0
        } else {
            100.0 * wrong as f64 / captured as f64
        },
    }
}

impl fmt::Display for TrainingTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>4} {:>5} {:>3} {:>6} {:>6} {:>8} {:>6} label",
            "#", "depth", "k", "n_a", "n_b", "eps", "space"
        )?;
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(
                f,
                "{:>4} {:>5} {:>3} {:>6} {:>6} {:>8.4} {:>6} {}",
                i + 1,
                r.cube_depth,
                r.dim,
                r.n_a,
                r.n_b,
                r.epsilon,
                r.feature_space,
                r.label
            )?;
        }
        write!(
            f,
            "classification rate {:.2}%  error rate {:.2}%",
            self.classification_rate, self.error_rate
        )
    }
}
