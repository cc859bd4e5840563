//! Command-line workflows: `clean`, `report`, `features` and `dedup`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer failure under
//! the `fail` policy.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::coverage::{CoverageConfig, FeatureVector, RemoteErrorPolicy, ScorerSpec};
use crate::dataset::{read_records, FieldMapping, JsonlWriter, Record};
use crate::error::{Error, Result};
use crate::pipeline::{
    dedup_by_focal_name, for_each_ordered, record_features, run_pipeline, NoiseReport,
    PipelineConfig, ScoringScope,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SCORER: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "cleantest",
    version,
    about = "Find and remove noise in unit-test-generation datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label every record, write the surviving records, verdicts and a report.
    Clean(CleanArgs),
    /// Label every record (coverage scored on all of them) and write a report.
    Report(ReportArgs),
    /// Export the per-record feature vectors used by coverage scorers.
    Features(FeaturesArgs),
    /// Drop training records whose focal method name appears in a holdout set.
    Dedup(DedupArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input JSONL corpus.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON file mapping canonical fields to dot-separated source paths.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// `static`, `sidecar:<path>` or `http:<url>`.
    #[arg(long, default_value = "static")]
    pub coverage_scorer: String,
    /// Records need a branch-coverage score strictly above this value.
    #[arg(long, default_value_t = crate::coverage::DEFAULT_THRESHOLD)]
    pub coverage_threshold: f64,
    /// Also flag Object-typed return values and parameters as ambiguous.
    #[arg(long)]
    pub ambiguous_object: bool,
    /// What to do when the HTTP scorer fails: fail, keep or drop.
    #[arg(long, default_value = "fail")]
    pub on_remote_error: String,
}

#[derive(Debug, Args)]
pub struct JobsArg {
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Clean JSONL output.
    #[arg(long)]
    pub output: PathBuf,
    /// Verdict JSONL output, one line per input record.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Report JSON output.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub filters: FilterArgs,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Report JSON output.
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub filters: FilterArgs,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Feature JSONL output.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Holdout JSONL whose focal method names must not occur in training.
    #[arg(long)]
    pub holdout: PathBuf,
    /// Surviving training records.
    #[arg(long)]
    pub output: PathBuf,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Scorer { .. } => EXIT_SCORER,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what} `{}` not found\n\nFor more information, try '--help'.",
            path.display()
        )))
    }
}

impl InputArgs {
    fn open(&self) -> Result<impl Iterator<Item = Result<Record>>> {
        require_file(&self.input, "input file")?;
        let mapping = match &self.mapping {
            Some(path) => {
                require_file(path, "mapping file")?;
                FieldMapping::load(path)?
            }
            None => FieldMapping::default(),
        };
        read_records(&self.input, mapping)
    }
}

impl FilterArgs {
    fn pipeline_config(&self, scope: ScoringScope) -> Result<PipelineConfig> {
        let scorer: ScorerSpec = self.coverage_scorer.parse()?;
        if let ScorerSpec::Sidecar(path) = &scorer {
            require_file(path, "sidecar score file")?;
        }
        let mut coverage = CoverageConfig::default().with_threshold(self.coverage_threshold)?;
        coverage.scorer = scorer;
        coverage.on_remote_error = self.on_remote_error.parse::<RemoteErrorPolicy>()?;
        Ok(PipelineConfig {
            object_mode: self.ambiguous_object,
            coverage,
            scope,
        })
    }
}

impl JobsArg {
    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs as usize)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }
}

fn write_report(report: &NoiseReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct FeatureRow<'a> {
    id: &'a str,
    #[serde(flatten)]
    features: FeatureVector,
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Clean(args) => clean(args),
        Command::Report(args) => report(args),
        Command::Features(args) => features(args),
        Command::Dedup(args) => dedup(args),
    }
}

fn clean(args: &CleanArgs) -> Result<()> {
    let cfg = args.filters.pipeline_config(ScoringScope::Survivors)?;
    let records = args.input.open()?;
    let scorer = cfg.coverage.build_scorer()?;
    let pool = args.jobs.pool()?;

    let mut clean_out = JsonlWriter::create(&args.output)?;
    let mut verdict_out = args
        .verdicts
        .as_deref()
        .map(JsonlWriter::create)
        .transpose()?;
    let report = run_pipeline(records, &cfg, scorer.as_ref(), &pool, |record, verdict| {
        if let Some(out) = verdict.apply(record) {
            clean_out.write(&out)?;
        }
        if let Some(v) = verdict_out.as_mut() {
            v.write(verdict)?;
        }
        Ok(())
    })?;
    clean_out.finish()?;
    if let Some(v) = verdict_out {
        v.finish()?;
    }
    if let Some(path) = &args.report {
        write_report(&report, path)?;
    }
    print!("{}", report.render_table());
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let cfg = args.filters.pipeline_config(ScoringScope::All)?;
    let records = args.input.open()?;
    let scorer = cfg.coverage.build_scorer()?;
    let pool = args.jobs.pool()?;
    let report = run_pipeline(records, &cfg, scorer.as_ref(), &pool, |_, _| Ok(()))?;
    write_report(&report, &args.report)?;
    print!("{}", report.render_table());
    Ok(())
}

fn features(args: &FeaturesArgs) -> Result<()> {
    let records = args.input.open()?;
    let pool = args.jobs.pool()?;
    let mut out = JsonlWriter::create(&args.output)?;
    for_each_ordered(
        records,
        &pool,
        |r| Ok(record_features(r)),
        |record, features| {
            out.write(&FeatureRow {
                id: &record.id,
                features,
            })
        },
    )?;
    out.finish()?;
    Ok(())
}

fn dedup(args: &DedupArgs) -> Result<()> {
    require_file(&args.holdout, "holdout file")?;
    let train: Vec<Record> = args.input.open()?.collect::<Result<_>>()?;
    let mapping = match &args.input.mapping {
        Some(path) => FieldMapping::load(path)?,
        None => FieldMapping::default(),
    };
    let holdout: Vec<Record> = read_records(&args.holdout, mapping)?.collect::<Result<_>>()?;
    let (kept, dropped) = dedup_by_focal_name(train, &holdout);
    crate::dataset::write_records(&kept, &args.output)?;
    println!("dropped {dropped}");
    Ok(())
}
