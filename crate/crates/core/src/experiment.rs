//! End-to-end benchmark runs: generate data, train the eight method variants,
//! score both splits, aggregate over realizations and render reports.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{
    aggregate_votes, classify_sample, make_one_vs_rest, score_predictions, EnsembleSpec, RestVotes,
    Vote,
};
use crate::datagen::{gen_experiment, Example, RngSpec, SplitSizes};
use crate::dataset::Dataset;
use crate::dcsa::{DcsaParams, Mode};
use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureKind, VarianceEstimator, DEFAULT_REGULARIZER};
use crate::par;
use crate::wavelet::{analyze_batch, wpt_analyze, CoefficientTree, DictionaryConfig};

/// The reported method rows, in table order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "LDB1")]
    Ldb1,
    #[serde(rename = "MLDB1")]
    Mldb1,
    #[serde(rename = "LDB2")]
    Ldb2,
    #[serde(rename = "MLDB2")]
    Mldb2,
    #[serde(rename = "LDB3")]
    Ldb3,
    #[serde(rename = "MLDB3")]
    Mldb3,
    #[serde(rename = "SLDB")]
    Sldb,
    #[serde(rename = "SMLDB")]
    Smldb,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Ldb1,
        Method::Mldb1,
        Method::Ldb2,
        Method::Mldb2,
        Method::Ldb3,
        Method::Mldb3,
        Method::Sldb,
        Method::Smldb,
    ];

    /// Measure and mode of a single-measure method; `None` for superpositions.
    /// Numbering: 1 is the primed measure, 2 the double-primed, 3 the plain one.
    pub fn base(self) -> Option<(MeasureKind, Mode)> {
        use MeasureKind::*;
        Some(match self {
            Method::Ldb1 => (LambdaPrime, Mode::Ldb),
            Method::Mldb1 => (LambdaPrime, Mode::Mldb),
            Method::Ldb2 => (LambdaDoublePrime, Mode::Ldb),
            Method::Mldb2 => (LambdaDoublePrime, Mode::Mldb),
            Method::Ldb3 => (Lambda, Mode::Ldb),
            Method::Mldb3 => (Lambda, Mode::Mldb),
            Method::Sldb | Method::Smldb => return None,
        })
    }

    /// Single-measure methods combined by a superposition.
    pub fn parts(self) -> &'static [Method] {
        match self {
            Method::Sldb => &[Method::Ldb1, Method::Ldb2, Method::Ldb3],
            Method::Smldb => &[Method::Mldb1, Method::Mldb2, Method::Mldb3],
            _ => &[],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Ldb1 => "LDB1",
            Method::Mldb1 => "MLDB1",
            Method::Ldb2 => "LDB2",
            Method::Mldb2 => "MLDB2",
            Method::Ldb3 => "LDB3",
            Method::Mldb3 => "MLDB3",
            Method::Sldb => "SLDB",
            Method::Smldb => "SMLDB",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown method {s:?}")))
    }
}

const BASE_METHODS: [Method; 6] = [
    Method::Ldb1,
    Method::Mldb1,
    Method::Ldb2,
    Method::Mldb2,
    Method::Ldb3,
    Method::Mldb3,
];

/// Cluster-search settings shared by every method; measure and mode are
/// filled in per method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcsaSettings {
    pub k: usize,
    pub delta: f64,
    pub eta: f64,
    pub mu: f64,
    pub nu: f64,
    #[serde(default = "default_delta_cap")]
    pub delta_cap: f64,
    #[serde(default = "default_regularizer")]
    pub regularizer: f64,
    #[serde(default)]
    pub variance: VarianceEstimator,
}

fn default_delta_cap() -> f64 {
    0.5
}

fn default_regularizer() -> f64 {
    DEFAULT_REGULARIZER
}

impl DcsaSettings {
    pub fn params(&self, kind: MeasureKind, mode: Mode) -> DcsaParams {
        DcsaParams {
            k: self.k,
            delta: self.delta,
            eta: self.eta,
            mu: self.mu,
            nu: self.nu,
            mode,
            measure: Measure {
                kind,
                regularizer: self.regularizer,
                variance: self.variance,
            },
            delta_cap: self.delta_cap,
        }
    }
}

fn default_realizations() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub example: Example,
    pub seed: u64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Angle of the first sample of the scattering signals.
    #[serde(default)]
    pub phase_offset: f64,
    #[serde(default)]
    pub sizes: SplitSizes,
    /// Treatment of "not i" votes from one-vs-rest members.
    #[serde(default)]
    pub rest_votes: RestVotes,
    pub dictionary: DictionaryConfig,
    pub dcsa: DcsaSettings,
}

impl ExperimentConfig {
    /// Published settings for `example`: coiflet-18 at depth 10 with
    /// `mu = 0.10` for the scattering examples, coiflet-6 at full depth with
    /// `mu = 0.20` for the triangles.
    pub fn standard(example: Example, seed: u64) -> Self {
        let (taps, mu) = match example {
            Example::Ex1 | Example::Ex2 => (18, 0.10),
            Example::Ex3 => (6, 0.20),
        };
        let depth = example.signal_length().trailing_zeros() as usize;
        ExperimentConfig {
            example,
            seed,
            realizations: 10,
            phase_offset: 0.0,
            sizes: SplitSizes::default(),
            rest_votes: RestVotes::default(),
            dictionary: DictionaryConfig::coiflet(taps, depth),
            dcsa: DcsaSettings {
                k: 5,
                delta: 0.01,
                eta: 0.05,
                mu,
                nu: 0.05,
                delta_cap: 0.5,
                regularizer: DEFAULT_REGULARIZER,
                variance: VarianceEstimator::Population,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::InvalidParams(
                "realizations must be at least 1".into(),
            ));
        }
        self.dictionary.filter()?;
        let n = self.example.signal_length();
        let max = n.trailing_zeros() as usize;
        if self.dictionary.depth > max {
            return Err(Error::DepthExceedsLog2N {
                depth: self.dictionary.depth,
                max,
            });
        }
        for m in BASE_METHODS {
            let (kind, mode) = m.base().expect("base method");
            self.dcsa.params(kind, mode).validate()?;
        }
        Ok(())
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Rates of one method on one split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub classification_rate: f64,
    pub error_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub train: Rates,
    pub test: Rates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub index: u64,
    pub methods: Vec<MethodResult>,
}

impl RealizationResult {
    pub fn get(&self, m: Method) -> &MethodResult {
        self.methods
            .iter()
            .find(|r| r.method == m)
            .expect("all methods present")
    }
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub train_rate: Stat,
    pub test_rate: Stat,
    pub train_error: Stat,
    pub test_error: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub realizations: usize,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn from_realizations(results: &[RealizationResult]) -> Self {
        let rows = Method::ALL
            .iter()
            .map(|&m| {
                let pick = |f: &dyn Fn(&MethodResult) -> f64| {
                    Stat::of(&results.iter().map(|r| f(r.get(m))).collect::<Vec<_>>())
                };
                ResultRow {
                    method: m,
                    train_rate: pick(&|r| r.train.classification_rate),
                    test_rate: pick(&|r| r.test.classification_rate),
                    train_error: pick(&|r| r.train.error_rate),
                    test_error: pick(&|r| r.test.error_rate),
                }
            })
            .collect();
        ResultTable {
            realizations: results.len(),
            rows,
        }
    }

    pub fn row(&self, m: Method) -> &ResultRow {
        self.rows
            .iter()
            .find(|r| r.method == m)
            .expect("all methods present")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub realizations: Vec<RealizationResult>,
    pub table: ResultTable,
}

/// The six trained single-measure ensembles of one realization.
pub struct TrainedMethods {
    pub ensembles: Vec<(Method, EnsembleSpec)>,
    classes: Vec<u32>,
    rest_votes: RestVotes,
}

impl TrainedMethods {
    pub fn get(&self, m: Method) -> Option<&EnsembleSpec> {
        self.ensembles.iter().find(|(k, _)| *k == m).map(|(_, e)| e)
    }

    /// Ensemble for any method, superpositions included.
    pub fn ensemble(&self, m: Method) -> Result<EnsembleSpec> {
        match m.base() {
            Some(_) => Ok(self.get(m).expect("trained").clone()),
            None => {
                EnsembleSpec::superpose(m.parts().iter().map(|p| self.get(*p).expect("trained")))
            }
        }
    }
}

pub fn train_methods(
    train: &Dataset,
    trees: &[CoefficientTree],
    config: &ExperimentConfig,
) -> Result<TrainedMethods> {
    let ensembles = par::try_map(&BASE_METHODS, |&m| {
        let (kind, mode) = m.base().expect("base method");
        let params = config.dcsa.params(kind, mode);
        let e = make_one_vs_rest(train, trees, config.dictionary, &params)?;
        Ok::<_, Error>((m, e.with_rest_votes(config.rest_votes)))
    })?;
    Ok(TrainedMethods {
        ensembles,
        classes: train.classes(),
        rest_votes: config.rest_votes,
    })
}

/// Predicted label of every method for one tree, in [`Method::ALL`] order.
fn predict_all(trained: &TrainedMethods, tree: &CoefficientTree) -> Result<[Option<u32>; 8]> {
    let mut votes: Vec<(Method, Vec<Vote>)> = Vec::with_capacity(6);
    for (m, e) in &trained.ensembles {
        let v = e
            .members
            .iter()
            .map(|o| classify_sample(o, tree))
            .collect::<Result<Vec<_>>>()?;
        votes.push((*m, v));
    }
    let of = |m: Method| -> &[Vote] { &votes.iter().find(|(k, _)| *k == m).expect("trained").1 };
    let agg = |v: &[Vote]| aggregate_votes(v, trained.rest_votes, &trained.classes).0;
    let mut out = [None; 8];
    for (slot, m) in out.iter_mut().zip(Method::ALL) {
        *slot = if m.base().is_some() {
            agg(of(m))
        } else {
            let all: Vec<Vote> = m
                .parts()
                .iter()
                .flat_map(|p| of(*p).iter().copied())
                .collect();
            agg(&all)
        };
    }
    Ok(out)
}

fn rates_per_method(labels: &[u32], preds: &[[Option<u32>; 8]]) -> Result<Vec<Rates>> {
    (0..8)
        .map(|j| {
            let r = score_predictions(labels, preds.iter().map(|p| p[j]))?;
            Ok(Rates {
                classification_rate: r.classification_rate,
                error_rate: r.error_rate,
            })
        })
        .collect()
}

pub fn run_realization(config: &ExperimentConfig, index: u64) -> Result<RealizationResult> {
    let rng = RngSpec::new(config.seed);
    let (train, test) = gen_experiment(
        config.example,
        index,
        &rng,
        config.sizes,
        config.phase_offset,
    )?;
    let train_trees = analyze_batch(train.signals(), &config.dictionary)?;
    let trained = train_methods(&train, &train_trees, config)?;

    let train_preds = par::try_map(&train_trees, |t| predict_all(&trained, t))?;
    let qmf = config.dictionary.filter()?;
    let test_preds = par::try_map(test.signals(), |s| {
        predict_all(&trained, &wpt_analyze(s, &qmf, config.dictionary.depth)?)
    })?;
    let train_rates = rates_per_method(train.labels(), &train_preds)?;
    let test_rates = rates_per_method(test.labels(), &test_preds)?;
    Ok(RealizationResult {
        index,
        methods: Method::ALL
            .iter()
            .enumerate()
            .map(|(j, &method)| MethodResult {
                method,
                train: train_rates[j],
                test: test_rates[j],
            })
            .collect(),
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let realizations =
        par::try_map_range(config.realizations, |i| run_realization(config, i as u64))?;
    let table = ResultTable::from_realizations(&realizations);
    Ok(ExperimentResult {
        config: config.clone(),
        realizations,
        table,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

const CSV_HEADER: &str = "method,train_rate,train_rate_sd,test_rate,test_rate_sd,train_error,train_error_sd,test_error,test_error_sd";

fn config_echo(config: &ExperimentConfig) -> Result<String> {
    let mut s = String::new();
    for line in config.to_toml()?.lines() {
        writeln!(s, "# {line}").unwrap();
    }
    Ok(s)
}

/// Renders the table, prefixed by the resolved configuration as `#` lines.
pub fn emit_report(
    table: &ResultTable,
    config: &ExperimentConfig,
    format: ReportFormat,
) -> Result<String> {
    let mut s = config_echo(config)?;
    match format {
        ReportFormat::Csv => {
            writeln!(s, "{CSV_HEADER}").unwrap();
            for r in &table.rows {
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    r.method,
                    r.train_rate.mean,
                    r.train_rate.sd,
                    r.test_rate.mean,
                    r.test_rate.sd,
                    r.train_error.mean,
                    r.train_error.sd,
                    r.test_error.mean,
                    r.test_error.sd
                )
                .unwrap();
            }
        }
        ReportFormat::Text => {
            writeln!(
                s,
                "# means over {} realization(s); sigma is the sample standard deviation",
                table.realizations
            )
            .unwrap();
            writeln!(
                s,
                "{:<7}|{:^27}|{:^27}",
                "", "Classification rate (%)", "Error rate (%)"
            )
            .unwrap();
            writeln!(
                s,
                "{:<7}|{:^13} {:^13}|{:^13} {:^13}",
                "", "Training", "Test", "Training", "Test"
            )
            .unwrap();
            writeln!(
                s,
                "{:<7}|{:>6} {:>6} {:>6} {:>6} |{:>6} {:>6} {:>6} {:>6}",
                "Method", "Total", "sigma", "Total", "sigma", "Total", "sigma", "Total", "sigma"
            )
            .unwrap();
            writeln!(s, "{}", "-".repeat(64)).unwrap();
            for r in &table.rows {
                writeln!(
                    s,
                    "{:<7}|{:>6.1} {:>6.1} {:>6.1} {:>6.1} |{:>6.1} {:>6.1} {:>6.1} {:>6.1}",
                    r.method.name(),
                    r.train_rate.mean,
                    r.train_rate.sd,
                    r.test_rate.mean,
                    r.test_rate.sd,
                    r.train_error.mean,
                    r.train_error.sd,
                    r.test_error.mean,
                    r.test_error.sd
                )
                .unwrap();
            }
        }
    }
    Ok(s)
}

/// Parses a table written by [`emit_report`] in CSV format.
pub fn parse_csv_report(text: &str) -> Result<ResultTable> {
    let bad = |d: String| Error::format("csv report", d);
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad("missing header".into()));
    }
    let mut rows = Vec::new();
    let mut realizations = None;
    for line in text.lines().filter(|l| l.starts_with("# means over ")) {
        realizations = line.split_whitespace().nth(3).and_then(|v| v.parse().ok());
    }
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields, got {}", f.len())));
        }
        let v = f[1..]
            .iter()
            .map(|x| x.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let st = |i: usize| Stat {
            mean: v[i],
            sd: v[i + 1],
        };
        rows.push(ResultRow {
            method: f[0].parse()?,
            train_rate: st(0),
            test_rate: st(2),
            train_error: st(4),
            test_error: st(6),
        });
    }
    Ok(ResultTable {
        realizations: realizations.unwrap_or(0),
        rows,
    })
}

/// One CSV line per (realization, method).
pub fn realizations_csv(results: &[RealizationResult]) -> String {
    let mut s = String::from("realization,method,train_rate,train_error,test_rate,test_error\n");
    for r in results {
        for m in &r.methods {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.index,
                m.method,
                m.train.classification_rate,
                m.train.error_rate,
                m.test.classification_rate,
                m.test.error_rate
            )
            .unwrap();
        }
    }
    s
}
