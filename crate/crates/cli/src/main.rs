use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ldb_core::classify::{predict_dataset, score_predictions, RestVotes};
use ldb_core::dcsa::training_trace;
use ldb_core::experiment::{realizations_csv, DcsaSettings};
use ldb_core::{
    build_filter, emit_report, gen_experiment, run_experiment, train_ensemble, ClassName, Dataset,
    DictionaryConfig, EnsembleSpec, Example, ExperimentConfig, MeasureKind, Mode, ReportFormat,
    RngSpec, SplitSizes, VarianceEstimator,
};

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! outln {
    ($($arg:tt)*) => {
        writeln!(io::stdout(), $($arg)*).map_err(ldb_core::Error::from)
    };
}

fn out(s: &str) -> ldb_core::Result<()> {
    Ok(io::stdout().write_all(s.as_bytes())?)
}

#[derive(Parser)]
#[command(
    name = "ldb",
    version,
    about = "Local discriminant basis classifiers on wavelet packets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one realization of a synthetic benchmark
    Gen(GenArgs),
    /// Train a one-vs-rest ensemble on a labeled dataset
    Train(TrainArgs),
    /// Classify a dataset with a trained model
    Classify(ClassifyArgs),
    /// Run a full benchmark and write the result tables
    Experiment(ExperimentArgs),
    /// Print the standard configuration of a benchmark as TOML
    DefaultConfig {
        #[arg(long, default_value = "ex3")]
        example: Example,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the low- and high-pass analysis filters
    DumpFilters {
        #[arg(long, default_value_t = 6)]
        taps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DataFormat {
    Bin,
    Csv,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    example: Example,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    realization: u64,
    #[arg(long, default_value_t = 100)]
    train_per_class: usize,
    #[arg(long, default_value_t = 1000)]
    test_per_class: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phase_offset: f64,
    #[arg(long, value_enum, default_value = "bin")]
    format: DataFormat,
    /// Directory receiving train.{bin,csv} and test.{bin,csv}
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Discrimination measure; repeat to superpose several
    #[arg(long = "measure", required = true)]
    measures: Vec<MeasureKind>,
    #[arg(long, default_value = "ldb")]
    mode: Mode,
    #[arg(long, default_value_t = 6)]
    taps: usize,
    /// Decomposition depth, full depth when omitted
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 0.2)]
    mu: f64,
    #[arg(long, default_value_t = 0.05)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    delta_cap: f64,
    #[arg(long, default_value_t = ldb_core::measures::DEFAULT_REGULARIZER)]
    regularizer: f64,
    #[arg(long, default_value = "population", value_parser = parse_variance)]
    variance: VarianceEstimator,
    /// How "not i" votes of one-vs-rest members count: spread or discard
    #[arg(long, default_value = "spread")]
    rest_votes: RestVotes,
    #[arg(long)]
    out: PathBuf,
    /// Suppress the per-cube training trace
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write the prediction dump here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML configuration; the standard one for --example otherwise
    #[arg(long, conflicts_with = "example")]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    example: Option<Example>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override the number of realizations
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variance(s: &str) -> Result<VarianceEstimator, String> {
    match s {
        "population" => Ok(VarianceEstimator::Population),
        "sample" => Ok(VarianceEstimator::Sample),
        _ => Err(format!("expected population or sample, got {s:?}")),
    }
}

fn gen(a: GenArgs) -> ldb_core::Result<()> {
    let sizes = SplitSizes {
        train_per_class: a.train_per_class,
        test_per_class: a.test_per_class,
    };
    let (train, test) = gen_experiment(
        a.example,
        a.realization,
        &RngSpec::new(a.seed),
        sizes,
        a.phase_offset,
    )?;
    fs::create_dir_all(&a.out)?;
    let ext = match a.format {
        DataFormat::Bin => "bin",
        DataFormat::Csv => "csv",
    };
    for (name, ds) in [("train", &train), ("test", &test)] {
        let p = a.out.join(format!("{name}.{ext}"));
        ds.save(&p)?;
        outln!(
            "{}: {} signals of length {}",
            p.display(),
            ds.len(),
            ds.signal_length()
        )?;
    }
    Ok(())
}

fn train(a: TrainArgs) -> ldb_core::Result<()> {
    let data = Dataset::load(&a.train)?;
    let dictionary = match a.depth {
        Some(d) => DictionaryConfig::coiflet(a.taps, d),
        None => DictionaryConfig::full_depth(a.taps, data.signal_length())?,
    };
    let settings = DcsaSettings {
        k: a.k,
        delta: a.delta,
        eta: a.eta,
        mu: a.mu,
        nu: a.nu,
        delta_cap: a.delta_cap,
        regularizer: a.regularizer,
        variance: a.variance,
    };
    let mut parts = Vec::new();
    for &kind in &a.measures {
        let params = settings.params(kind, a.mode);
        let e = train_ensemble(&data, dictionary, &params)?;
        if !a.quiet {
            for o in &e.members {
                outln!(
                    "== {} {} {} vs {}",
                    a.mode,
                    kind,
                    o.classes[0],
                    o.classes[1]
                )?;
                outln!("{}", training_trace(o))?;
            }
        }
        parts.push(e);
    }
    let model = EnsembleSpec::superpose(&parts)?.with_rest_votes(a.rest_votes);
    fs::write(&a.out, model.to_json()?)?;
    outln!(
        "wrote {} oracle(s) to {}",
        model.members.len(),
        a.out.display()
    )?;
    Ok(())
}

fn classify(a: ClassifyArgs) -> ldb_core::Result<()> {
    let model = EnsembleSpec::from_json(&fs::read_to_string(&a.model)?)?;
    let data = Dataset::load(&a.data)?;
    let preds = predict_dataset(&model, &data)?;
    let mut s = String::from("id\ttruth\tpredicted\tweight\tvotes\n");
    for (i, (p, truth)) in preds.iter().zip(data.labels()).enumerate() {
        let label = p
            .label
            .map_or("UNDETERMINED".to_string(), |l| l.to_string());
        let votes: Vec<String> = p
            .votes
            .iter()
            .map(|v| match v.label {
                Some(ClassName::Class(c)) => format!("{c}:{}", v.weight),
                Some(ClassName::NotClass(c)) => format!("not{c}:{}", v.weight),
                None => "-".to_string(),
            })
            .collect();
        writeln!(
            s,
            "{i}\t{truth}\t{label}\t{}\t{}",
            p.weight,
            votes.join(" ")
        )
        .unwrap();
    }
    match &a.out {
        Some(p) => fs::write(p, s)?,
        None => out(&s)?,
    }
    let report = score_predictions(data.labels(), preds.iter().map(|p| p.label))?;
    eprintln!("{report}");
    Ok(())
}

fn experiment(a: ExperimentArgs) -> ldb_core::Result<()> {
    let mut config = match (&a.config, a.example) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(ex)) => ExperimentConfig::standard(ex, a.seed),
        (None, None) => unreachable!("enforced by clap"),
    };
    if let Some(r) = a.realizations {
        config.realizations = r;
    }
    let result = run_experiment(&config)?;
    write_outputs(&a.out, &result)?;
    out(&emit_report(&result.table, &config, ReportFormat::Text)?)?;
    Ok(())
}

fn write_outputs(
    dir: &Path,
    result: &ldb_core::experiment::ExperimentResult,
) -> ldb_core::Result<()> {
    fs::create_dir_all(dir)?;
    let cfg = &result.config;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    fs::write(
        dir.join("report.txt"),
        emit_report(&result.table, cfg, ReportFormat::Text)?,
    )?;
    fs::write(
        dir.join("report.csv"),
        emit_report(&result.table, cfg, ReportFormat::Csv)?,
    )?;
    fs::write(
        dir.join("realizations.csv"),
        realizations_csv(&result.realizations),
    )?;
    Ok(())
}

fn dump_filters(taps: usize) -> ldb_core::Result<()> {
    let q = build_filter(ldb_core::wavelet::FilterFamily::Coiflet, taps)?;
    outln!("i\tlow_pass\thigh_pass")?;
    for (i, (h, g)) in q.low_pass.iter().zip(&q.high_pass).enumerate() {
        outln!("{i}\t{h:?}\t{g:?}")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Classify(a) => classify(a),
        Command::Experiment(a) => experiment(a),
        Command::DefaultConfig { example, seed } => ExperimentConfig::standard(example, seed)
            .to_toml()
            .and_then(|s| out(&s)),
        Command::DumpFilters { taps } => dump_filters(taps),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(ldb_core::Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
