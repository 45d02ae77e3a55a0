//! `osr`: generate synthetic object datasets, run open-set recognition
//! experiments and sweeps, and merge their reports.

mod values;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use osr_core::clusterer::{verify_trace, write_trace};
use osr_core::config::{load_synthetic, set_synthetic, synthetic_to_kv};
use osr_core::experiment::{run_experiment_on, run_trial, sweep};
use osr_core::report::{compare_csv, compare_markdown, sweep_csv};
use osr_core::sample::FEATURE_NAMES;
use osr_core::synthetic::class_separation;
use osr_core::{
    generate_synthetic, Dataset, ExperimentConfig, ExperimentReport, SweepParam, SyntheticSpec,
};

/// Default output directory when `--out` is not given.
const OUT_DIR_ENV: &str = "OSR_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "osr",
    version,
    about = "Open-set recognition of objects from mechanical properties"
)]
struct Cli {
    /// Print progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset CSV and print its class table.
    Generate(GenerateArgs),
    /// Run an experiment and write JSON and markdown reports.
    Run(RunArgs),
    /// Run one experiment per parameter value and write the curve as CSV.
    Sweep(SweepArgs),
    /// Merge JSON reports into one comparison table.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct Overrides {
    /// Config file: flat `key = value` text, or JSON by `.json` extension.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, String)>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    overrides: Overrides,

    /// Output CSV path [default: $OSR_OUT_DIR/dataset.csv or ./dataset.csv].
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    overrides: Overrides,

    /// Output directory [default: $OSR_OUT_DIR or .].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Trials run in parallel.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,

    /// Leave runtime and creation time out of the reports.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: ExperimentArgs,

    /// File name stem for the reports.
    #[arg(long, default_value = "report")]
    name: String,

    /// Also write each trial's clusterer assignment log as JSON lines.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: ExperimentArgs,

    /// Parameter to vary: alpha, beta, n_gen, tau_update or novel_fraction.
    #[arg(long)]
    param: String,

    /// Comma-separated list, or `lo..hi` (step 0.1) or `lo..hi:step`.
    #[arg(long)]
    values: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CompareFormat {
    Markdown,
    Csv,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// JSON reports written by `run` or `sweep`.
    inputs: Vec<PathBuf>,

    #[arg(long, value_enum, default_value = "markdown")]
    format: CompareFormat,

    /// Write the table here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("empty key in `{s}`"));
    }
    Ok((k.to_owned(), v.trim().to_owned()))
}

/// Process exit status by failure kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Exit {
    Config = 2,
    Data = 3,
    Runtime = 4,
}

#[derive(Debug)]
struct Failure {
    exit: Exit,
    error: anyhow::Error,
}

impl Failure {
    fn new(exit: Exit, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            exit,
            error: error.into(),
        }
    }
}

/// Classifies a library error, falling back to `stage` when the error
/// itself does not say.
fn at(stage: Exit) -> impl Fn(osr_core::Error) -> Failure {
    move |e| {
        let exit = if e.is_config_error() {
            Exit::Config
        } else if e.is_data_error() {
            Exit::Data
        } else {
            stage
        };
        Failure::new(exit, e)
    }
}

type CliResult<T> = Result<T, Failure>;

struct Log(u8);

impl Log {
    fn info(&self, msg: impl std::fmt::Display) {
        if self.0 >= 1 {
            eprintln!("{msg}");
        }
    }

    fn debug(&self, msg: impl std::fmt::Display) {
        if self.0 >= 2 {
            eprintln!("{msg}");
        }
    }
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Defaults, then the config file, then `--set` overrides in order.
fn experiment_config(o: &Overrides) -> CliResult<ExperimentConfig> {
    let mut config = match &o.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| {
            Failure::new(
                Exit::Config,
                anyhow!(e).context(format!("loading config {}", path.display())),
            )
        })?,
        None => ExperimentConfig::default(),
    };
    for (k, v) in &o.set {
        config.set(k, v).map_err(at(Exit::Config))?;
    }
    config.validate().map_err(at(Exit::Config))?;
    Ok(config)
}

fn synthetic_spec(o: &Overrides) -> CliResult<SyntheticSpec> {
    let mut spec = match &o.config {
        Some(path) => load_synthetic(path).map_err(|e| {
            Failure::new(
                Exit::Config,
                anyhow!(e).context(format!("loading config {}", path.display())),
            )
        })?,
        None => SyntheticSpec::default(),
    };
    for (k, v) in &o.set {
        set_synthetic(&mut spec, k, v).map_err(at(Exit::Config))?;
    }
    spec.validate().map_err(|e| Failure::new(Exit::Config, e))?;
    Ok(spec)
}

fn create_parent(path: &Path) -> CliResult<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(|e| Failure::new(Exit::Runtime, e)),
        None => Ok(()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    create_parent(path)?;
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(|e| Failure::new(Exit::Runtime, e))
}

fn finish(mut report: ExperimentReport, no_timestamp: bool) -> ExperimentReport {
    if no_timestamp {
        report.without_timing()
    } else {
        report.stamp_now();
        report
    }
}

fn write_reports(report: &ExperimentReport, dir: &Path, stem: &str) -> CliResult<Vec<PathBuf>> {
    let json = report.to_json().map_err(at(Exit::Runtime))?;
    let paths = [
        dir.join(format!("{stem}.json")),
        dir.join(format!("{stem}.md")),
    ];
    write_file(&paths[0], json)?;
    write_file(&paths[1], report.to_markdown())?;
    Ok(paths.to_vec())
}

fn generate(args: &GenerateArgs, log: &Log) -> CliResult<()> {
    let spec = synthetic_spec(&args.overrides)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_out_dir().join("dataset.csv"));
    let synth = generate_synthetic(&spec).map_err(at(Exit::Data))?;
    log.info(format_args!(
        "generated {} rows ({} clipped into range)",
        synth.dataset.len(),
        synth.clipped
    ));

    let mut header = String::from("generator spec\n");
    header.push_str(&synthetic_to_kv(&spec, ""));
    create_parent(&out)?;
    synth
        .dataset
        .save_csv_with_comments(&out, &header)
        .map_err(at(Exit::Runtime))?;

    println!(
        "{}",
        class_table(&synth.dataset, &synth.class_means, &synth.class_sigmas)
    );
    let mut min_sep = f64::INFINITY;
    for a in 0..synth.class_means.len() {
        for b in a + 1..synth.class_means.len() {
            let s = class_separation(
                &synth.class_means[a],
                &synth.class_sigmas[a],
                &synth.class_means[b],
                &synth.class_sigmas[b],
            );
            min_sep = min_sep.min(s);
        }
    }
    println!("minimum class separation: {min_sep:.2}");
    println!("wrote {}", out.display());
    Ok(())
}

fn class_table(data: &Dataset, means: &[[f64; 4]], sigmas: &[[f64; 4]]) -> String {
    let counts = data.class_counts();
    let mut out = format!("{:<6} {:>5}", "class", "rows");
    for f in FEATURE_NAMES {
        out.push_str(&format!(" {:>22}", format!("{f} (mean ± σ)")));
    }
    for (c, name) in data.class_names().iter().enumerate() {
        out.push_str(&format!("\n{name:<6} {:>5}", counts[c]));
        for f in 0..FEATURE_NAMES.len() {
            out.push_str(&format!(
                " {:>22}",
                format!("{:.4} ± {:.4}", means[c][f], sigmas[c][f])
            ));
        }
    }
    out
}

fn load_data(config: &ExperimentConfig) -> CliResult<Dataset> {
    config.data.load().map_err(|e| {
        let exit = if e.is_config_error() {
            Exit::Config
        } else {
            Exit::Data
        };
        Failure::new(exit, anyhow!(e).context("loading dataset"))
    })
}

fn run(args: &RunArgs, log: &Log) -> CliResult<()> {
    let common = &args.common;
    let config = experiment_config(&common.overrides)?;
    let dir = common.out.clone().unwrap_or_else(default_out_dir);
    let data = load_data(&config)?;
    log.info(format_args!(
        "running {} trials of arm {} on {} rows",
        config.repetitions,
        config.arm.name(),
        data.len()
    ));
    let report =
        run_experiment_on(&config, &data, usize::from(common.jobs)).map_err(at(Exit::Runtime))?;
    let report = finish(report, common.no_timestamp);

    let mut traces = Vec::new();
    if args.trace {
        for (i, &seed) in report.seeds.iter().enumerate() {
            let outcome = run_trial(&config, &data, i, seed).map_err(at(Exit::Runtime))?;
            verify_trace(&outcome.trace).map_err(|m| {
                Failure::new(Exit::Runtime, anyhow!("trial {i}: trace check failed: {m}"))
            })?;
            let mut buf = Vec::new();
            write_trace(&outcome.trace, &mut buf)
                .context("serialising trace")
                .map_err(|e| Failure::new(Exit::Runtime, e))?;
            log.debug(format_args!(
                "trial {i}: {} trace records",
                outcome.trace.len()
            ));
            traces.push(buf);
        }
    }

    for path in write_reports(&report, &dir, &args.name)? {
        println!("wrote {}", path.display());
    }
    for (i, buf) in traces.iter().enumerate() {
        let path = dir
            .join(format!("{}.trace", args.name))
            .join(format!("trial_{i:03}.jsonl"));
        write_file(&path, buf)?;
    }
    if !traces.is_empty() {
        println!("wrote {} trace files", traces.len());
    }
    let ari = report.metric(|t| t.novel_ari);
    let overall = report.metric(|t| t.overall_accuracy);
    let recog = report.metric(|t| t.recognition_rate);
    println!(
        "overall accuracy {:.4} ± {:.4}, recognition {:.4} ± {:.4}, novel ARI {:.4} ± {:.4}",
        overall.mean, overall.std, recog.mean, recog.std, ari.mean, ari.std
    );
    Ok(())
}

fn run_sweep(args: &SweepArgs, log: &Log) -> CliResult<()> {
    let common = &args.common;
    let param: SweepParam = args.param.parse().map_err(at(Exit::Config))?;
    let values = values::parse(&args.values)
        .map_err(|m| Failure::new(Exit::Config, anyhow!("--values: {m}")))?;
    let config = experiment_config(&common.overrides)?;
    for &v in &values {
        param.apply(&config, v).map_err(at(Exit::Config))?;
    }
    let dir = common.out.clone().unwrap_or_else(default_out_dir);
    let data = load_data(&config)?;
    log.info(format_args!(
        "sweeping {} over {} values, {} trials each",
        param.name(),
        values.len(),
        config.repetitions
    ));

    let mut result = sweep(&config, &data, param, &values, usize::from(common.jobs))
        .map_err(at(Exit::Runtime))?;
    result.reports = result
        .reports
        .into_iter()
        .map(|r| finish(r, common.no_timestamp))
        .collect();

    let csv_path = dir.join(format!("sweep_{}.csv", param.name()));
    write_file(&csv_path, sweep_csv(&result))?;
    println!("wrote {}", csv_path.display());
    for (v, report) in result.values.iter().zip(&result.reports) {
        let stem = format!("sweep_{}_{}", param.name(), v);
        for path in write_reports(report, &dir, &stem)? {
            log.info(format_args!("wrote {}", path.display()));
        }
    }
    for p in result.curve() {
        println!(
            "{} = {:<8} ARI {:.4} ± {:.4}",
            param.name(),
            p.value,
            p.ari.mean,
            p.ari.std
        );
    }
    Ok(())
}

fn report(args: &ReportArgs, log: &Log) -> CliResult<()> {
    if args.inputs.is_empty() {
        return Err(Failure::new(
            Exit::Config,
            anyhow!("no input reports given"),
        ));
    }
    let reports = args
        .inputs
        .iter()
        .map(|p| {
            log.debug(format_args!("reading {}", p.display()));
            ExperimentReport::load_json(p).map_err(|e| {
                let exit = if e.is_config_error() {
                    Exit::Config
                } else {
                    Exit::Data
                };
                Failure::new(exit, anyhow!(e).context(format!("reading {}", p.display())))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let table = match args.format {
        CompareFormat::Markdown => compare_markdown(&reports),
        CompareFormat::Csv => compare_csv(&reports),
    }
    .map_err(at(Exit::Runtime))?;
    match &args.out {
        Some(path) => {
            write_file(path, table)?;
            println!("wrote {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

/// The error chain joined by `: `, skipping causes whose text an outer
/// message already includes.
fn describe(error: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = Log(cli.verbose);
    let result = match &cli.command {
        Command::Generate(a) => generate(a, &log),
        Command::Run(a) => run(a, &log),
        Command::Sweep(a) => run_sweep(a, &log),
        Command::Report(a) => report(a, &log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.exit as u8)
        }
    }
}
