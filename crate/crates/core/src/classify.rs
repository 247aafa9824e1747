//! Applying oracles: first-match weighted votes, weighted-majority
//! ensembles and dataset scoring.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::best_basis::project_into;
use crate::dataset::Dataset;
use crate::dcsa::{run_dcsa, ClassName, DcsaParams, Oracle};
use crate::error::{Error, Result};
use crate::par;
use crate::wavelet::{analyze_batch, wpt_analyze, CoefficientTree, DictionaryConfig};

/// One oracle's answer for one signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    /// `None` when no cube contains the signal.
    pub label: Option<ClassName>,
    pub weight: f64,
    /// Index of the matching record.
    pub record: Option<usize>,
}

impl Vote {
    pub const UNDETERMINED: Vote = Vote {
        label: None,
        weight: 0.0,
        record: None,
    };
}

/// Scans the oracle's cubes in discovery order and votes for the first hit.
pub fn classify_sample(oracle: &Oracle, tree: &CoefficientTree) -> Result<Vote> {
    oracle.check_tree(tree)?;
    let k = oracle.params.k;
    // Project lazily, once per feature space.
    let mut proj: Vec<Option<Vec<f64>>> = vec![None; oracle.feature_spaces.len()];
    for (j, r) in oracle.records.iter().enumerate() {
        let p = match &mut proj[r.feature_space] {
            Some(p) => p,
            slot => {
                let fs = &oracle.feature_spaces[r.feature_space];
                let mut v = vec![0.0; k.min(fs.dim())];
                project_into(tree, fs, &mut v)?;
                slot.insert(v)
            }
        };
        if r.cube.contains(p) {
            return Ok(Vote {
                label: Some(r.label),
                weight: r.vote_weight(),
                record: Some(j),
            });
        }
    }
    Ok(Vote::UNDETERMINED)
}

/// How a vote for the "not i" side of a one-vs-rest member is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RestVotes {
    /// Split the weight evenly over every other class of the ensemble.
    #[default]
    Spread,
    /// Count it as no evidence.
    Discard,
}

impl fmt::Display for RestVotes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RestVotes::Spread => "spread",
            RestVotes::Discard => "discard",
        })
    }
}

impl std::str::FromStr for RestVotes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spread" => Ok(RestVotes::Spread),
            "discard" => Ok(RestVotes::Discard),
            _ => Err(Error::InvalidParams(format!(
                "unknown rest-vote policy {s:?}"
            ))),
        }
    }
}

/// A weighted-majority committee of oracles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<Oracle>,
    #[serde(default)]
    pub rest_votes: RestVotes,
}

impl EnsembleSpec {
    pub fn new(members: Vec<Oracle>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidParams("ensemble needs at least one member".into()))?;
        if let Some(o) = members
            .iter()
            .find(|o| o.signal_length != first.signal_length)
        {
            return Err(Error::ConfigMismatch(format!(
                "ensemble members disagree on signal length ({} vs {})",
                first.signal_length, o.signal_length
            )));
        }
        Ok(EnsembleSpec {
            members,
            rest_votes: RestVotes::default(),
        })
    }

    pub fn with_rest_votes(mut self, policy: RestVotes) -> Self {
        self.rest_votes = policy;
        self
    }

    /// Every concrete class named by a member, ascending.
    pub fn classes(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self
            .members
            .iter()
            .flat_map(|o| o.classes)
            .map(|n| match n {
                ClassName::Class(c) | ClassName::NotClass(c) => c,
            })
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn aggregate(&self, votes: &[Vote]) -> (Option<u32>, f64) {
        aggregate_votes(votes, self.rest_votes, &self.classes())
    }

    /// Union of the members of several ensembles; keeps the first part's
    /// rest-vote policy.
    pub fn superpose<'a>(parts: impl IntoIterator<Item = &'a EnsembleSpec>) -> Result<Self> {
        let parts: Vec<&EnsembleSpec> = parts.into_iter().collect();
        let policy = parts.first().map(|e| e.rest_votes).unwrap_or_default();
        Ok(Self::new(
            parts
                .iter()
                .flat_map(|e| e.members.iter().cloned())
                .collect(),
        )?
        .with_rest_votes(policy))
    }

    pub fn signal_length(&self) -> usize {
        self.members[0].signal_length
    }

    fn dictionaries(&self) -> Vec<DictionaryConfig> {
        let mut d: Vec<DictionaryConfig> = Vec::new();
        for m in &self.members {
            if !d.contains(&m.dictionary) {
                d.push(m.dictionary);
            }
        }
        d
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: EnsembleSpec = serde_json::from_str(s)?;
        // Re-validate each member through the oracle loader.
        for m in &e.members {
            Oracle::from_json(&serde_json::to_string(m)?)?;
        }
        Ok(Self::new(e.members)?.with_rest_votes(e.rest_votes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Winning class, `None` for undetermined.
    pub label: Option<u32>,
    /// Total weight collected by the winning class.
    pub weight: f64,
    pub votes: Vec<Vote>,
}

/// Weighted majority over member votes. Undetermined votes carry no
/// evidence; a "not i" vote is handled per `rest` with `classes` as the
/// label set. An exact tie at the top or an all-zero tally is undetermined.
pub fn aggregate_votes(votes: &[Vote], rest: RestVotes, classes: &[u32]) -> (Option<u32>, f64) {
    let mut tally: BTreeMap<u32, f64> = BTreeMap::new();
    for v in votes {
        match v.label {
            Some(ClassName::Class(c)) => *tally.entry(c).or_insert(0.0) += v.weight,
            Some(ClassName::NotClass(c)) if rest == RestVotes::Spread => {
                let others = classes.iter().filter(|&&o| o != c).count();
                for &o in classes.iter().filter(|&&o| o != c) {
                    *tally.entry(o).or_insert(0.0) += v.weight / others as f64;
                }
            }
            _ => {}
        }
    }
    let mut best: Option<(u32, f64)> = None;
    let mut tied = false;
    for (&c, &w) in &tally {
        match best {
            Some((_, bw)) if w == bw => tied = true,
            Some((_, bw)) if w < bw => {}
            _ => {
                best = Some((c, w));
                tied = false;
            }
        }
    }
    match best {
        Some((c, w)) if w > 0.0 && !tied => (Some(c), w),
        _ => (None, 0.0),
    }
}

/// Trees of `signal` for every dictionary the ensemble uses.
fn analyze_for(
    spec: &EnsembleSpec,
    signal: &[f64],
) -> Result<Vec<(DictionaryConfig, CoefficientTree)>> {
    spec.dictionaries()
        .into_iter()
        .map(|d| Ok((d, wpt_analyze(signal, &d.filter()?, d.depth)?)))
        .collect()
}

pub fn classify_ensemble_trees(
    spec: &EnsembleSpec,
    trees: &[(DictionaryConfig, CoefficientTree)],
) -> Result<Prediction> {
    let votes = spec
        .members
        .iter()
        .map(|m| {
            let tree = trees
                .iter()
                .find(|(d, _)| *d == m.dictionary)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::ConfigMismatch("no tree for member dictionary".into()))?;
            classify_sample(m, tree)
        })
        .collect::<Result<Vec<_>>>()?;
    let (label, weight) = spec.aggregate(&votes);
    Ok(Prediction {
        label,
        weight,
        votes,
    })
}

pub fn classify_ensemble(spec: &EnsembleSpec, signal: &[f64]) -> Result<Prediction> {
    if signal.len() != spec.signal_length() {
        return Err(Error::ConfigMismatch(format!(
            "signal length {} but the model expects {}",
            signal.len(),
            spec.signal_length()
        )));
    }
    classify_ensemble_trees(spec, &analyze_for(spec, signal)?)
}

pub fn predict_dataset(spec: &EnsembleSpec, dataset: &Dataset) -> Result<Vec<Prediction>> {
    par::try_map(dataset.signals(), |s| classify_ensemble(spec, s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub truth: u32,
    pub predicted: Option<u32>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub total: usize,
    pub classified: usize,
    pub misclassified: usize,
    pub undetermined: usize,
    /// Percent of samples given a class.
    pub classification_rate: f64,
    /// Percent of classified samples given the wrong class.
    pub error_rate: f64,
    pub confusion: Vec<ConfusionEntry>,
}

pub fn score_predictions(
    truth: &[u32],
    predicted: impl IntoIterator<Item = Option<u32>>,
) -> Result<ScoreReport> {
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut confusion: BTreeMap<(u32, Option<u32>), usize> = BTreeMap::new();
    let mut n = 0;
    for (&t, p) in truth.iter().zip(predicted) {
        *confusion.entry((t, p)).or_insert(0) += 1;
        n += 1;
    }
    if n != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: n,
        });
    }
    let undetermined: usize = confusion
        .iter()
        .filter(|((_, p), _)| p.is_none())
        .map(|(_, c)| c)
        .sum();
    let misclassified: usize = confusion
        .iter()
        .filter(|((t, p), _)| p.is_some_and(|p| p != *t))
        .map(|(_, c)| c)
        .sum();
    let classified = n - undetermined;
    Ok(ScoreReport {
        total: n,
        classified,
        misclassified,
        undetermined,
        classification_rate: 100.0 * classified as f64 / n as f64,
        error_rate: if classified == 0 {
            0.0
        } else {
            100.0 * misclassified as f64 / classified as f64
        },
        confusion: confusion
            .into_iter()
            .map(|((truth, predicted), count)| ConfusionEntry {
                truth,
                predicted,
                count,
            })
            .collect(),
    })
}

pub fn score_dataset(spec: &EnsembleSpec, dataset: &Dataset) -> Result<ScoreReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = predict_dataset(spec, dataset)?;
    score_predictions(dataset.labels(), preds.iter().map(|p| p.label))
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "samples {}  classified {} ({:.2}%)  misclassified {} ({:.2}% of classified)  undetermined {}",
            self.total,
            self.classified,
            self.classification_rate,
            self.misclassified,
            self.error_rate,
            self.undetermined
        )
    }
}

/// Trains one oracle per class against the rest, or a single oracle for a
/// two-class problem. `trees[i]` must be the tree of `train.signals()[i]`.
pub fn make_one_vs_rest(
    train: &Dataset,
    trees: &[CoefficientTree],
    dictionary: DictionaryConfig,
    params: &DcsaParams,
) -> Result<EnsembleSpec> {
    if trees.len() != train.len() {
        return Err(Error::DimensionMismatch {
            expected: train.len(),
            actual: trees.len(),
        });
    }
    let classes = train.classes();
    let pick =
        |idx: &[usize]| -> Vec<&CoefficientTree> { idx.iter().map(|&i| &trees[i]).collect() };
    match classes.len() {
        0 => Err(Error::EmptyDataset),
        1 => Err(Error::InvalidParams(
            "training data needs at least two classes".into(),
        )),
        2 => {
            let (a, b) = (classes[0], classes[1]);
            let o = run_dcsa(
                &pick(&train.indices_of(a)),
                &pick(&train.indices_of(b)),
                [ClassName::Class(a), ClassName::Class(b)],
                dictionary,
                params,
            )?;
            EnsembleSpec::new(vec![o])
        }
        _ => {
            let members = par::try_map(&classes, |&c| {
                let rest: Vec<usize> = (0..train.len())
                    .filter(|&i| train.labels()[i] != c)
                    .collect();
                run_dcsa(
                    &pick(&train.indices_of(c)),
                    &pick(&rest),
                    [ClassName::Class(c), ClassName::NotClass(c)],
                    dictionary,
                    params,
                )
            })?;
            EnsembleSpec::new(members)
        }
    }
}

/// Analyzes `train` and runs [`make_one_vs_rest`].
pub fn train_ensemble(
    train: &Dataset,
    dictionary: DictionaryConfig,
    params: &DcsaParams,
) -> Result<EnsembleSpec> {
    let trees = analyze_batch(train.signals(), &dictionary)?;
    make_one_vs_rest(train, &trees, dictionary, params)
}
