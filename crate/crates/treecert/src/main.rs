use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use treecert::core::{Ensemble, HyperRect};
use treecert::format::{alt, dataset, model, property};
use treecert::parallel::{is_robust_parallel, verify_property_parallel, BatchOptions, BatchReport};
use treecert::report::{write_human, write_records, BatchKind};
use treecert::Error;

const EXIT_OK: u8 = 0;
const EXIT_FALSIFIED: u8 = 1;
const EXIT_UNSOLVED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NO_INPUT: u8 = 66;
const EXIT_IO: u8 = 74;

/// Formal verification of decision tree ensembles.
///
/// Exit status: 0 verified, 1 falsified, 2 unsolved because of timeouts,
/// 64 usage error, 65 malformed input, 66 unreadable input, 74 output error.
#[derive(Parser)]
#[command(name = "treecert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that every dataset sample is robust to perturbations of size epsilon.
    Robustness(RobustnessArgs),
    /// Check an assertion over the input region of a property file.
    Property(PropertyArgs),
    /// Translation-validate an alternate-format model.
    Validate(ValidateArgs),
    /// Convert an alternate-format model to the native format.
    Convert(ConvertArgs),
    /// Print model scores and classes for every dataset sample.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Records,
}

#[derive(Args)]
struct RunArgs {
    /// Native model file.
    #[arg(long)]
    model: PathBuf,
    /// Per-item timeout in seconds.
    #[arg(long, default_value_t = 60.0, value_parser = positive, allow_negative_numbers = true)]
    timeout: f64,
    /// Worker threads.
    #[arg(long, env = "TREECERT_JOBS", default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RobustnessArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 1.0, value_parser = positive, allow_negative_numbers = true)]
    epsilon: f64,
    /// Feature domain `lo:hi` applied to every feature.
    #[arg(long, value_parser = parse_clamp)]
    clamp: Option<(f64, f64)>,
}

#[derive(Args)]
struct PropertyArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    property: PathBuf,
    /// Number of disjoint sub-regions to verify in parallel.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    split: u32,
}

#[derive(Args)]
struct ValidateArgs {
    /// Alternate-format model file.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    /// Alternate-format model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn parse_clamp(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected `lo:hi`")?;
    let lo: f64 = lo.parse().map_err(|_| format!("invalid lower bound `{lo}`"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("invalid upper bound `{hi}`"))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("`{s}` is not a finite range with lo <= hi"));
    }
    Ok((lo, hi))
}

/// A failure that ends the process with a specific exit status.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => EXIT_NO_INPUT,
            _ => EXIT_DATA,
        };
        Failure(code, e.to_string())
    }
}

/// Buffered report destination: the `--output` file or standard output.
fn open_output(output: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure(EXIT_IO, format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_report(
    output: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), Failure> {
    let mut out = open_output(output)?;
    write(&mut out).and_then(|()| out.flush()).map_err(|e| {
        let target = output.map_or("standard output".to_string(), |p| p.display().to_string());
        Failure(EXIT_IO, format!("{target}: {e}"))
    })
}

fn options(run: &RunArgs, clamp: Option<HyperRect>) -> BatchOptions {
    BatchOptions {
        jobs: run.jobs as usize,
        deadline: Some(Duration::from_secs_f64(run.timeout)),
        clamp,
    }
}

fn batch_exit(report: &BatchReport) -> u8 {
    let s = &report.summary;
    if s.falsified > 0 {
        EXIT_FALSIFIED
    } else if s.errors > 0 {
        EXIT_DATA
    } else if s.timeout > 0 {
        EXIT_UNSOLVED
    } else {
        EXIT_OK
    }
}

fn finish(run: &RunArgs, report: &BatchReport, kind: BatchKind, started: Instant) -> Result<u8, Failure> {
    write_report(run.output.as_deref(), |mut out| match run.format {
        Format::Records => write_records(&mut out, report),
        Format::Human => {
            eprintln!("hint: measure peak memory with `/usr/bin/time -v treecert ...` (maximum resident set size)");
            write_human(&mut out, report, kind)?;
            writeln!(
                out,
                "total: {:.3} s including input parsing",
                started.elapsed().as_secs_f64()
            )
        }
    })?;
    Ok(batch_exit(report))
}

fn check_features(ens: &Ensemble, found: usize, what: &str) -> Result<(), Failure> {
    if found == ens.n_features() {
        Ok(())
    } else {
        Err(Failure(
            EXIT_DATA,
            format!("{what} has {found} features but the model has {}", ens.n_features()),
        ))
    }
}

fn robustness(args: &RobustnessArgs, started: Instant) -> Result<u8, Failure> {
    let ens = model::read(&args.run.model)?;
    let data = dataset::read(&args.dataset)?;
    check_features(&ens, data.n_features, "dataset")?;
    let clamp = args.clamp.map(|(lo, hi)| {
        let n = ens.n_features();
        HyperRect::closed(&vec![lo; n], &vec![hi; n]).expect("bounds have matching lengths")
    });
    let report = is_robust_parallel(&ens, &data.samples, args.epsilon, &options(&args.run, clamp));
    finish(&args.run, &report, BatchKind::Robustness, started)
}

fn property(args: &PropertyArgs, started: Instant) -> Result<u8, Failure> {
    let ens = model::read(&args.run.model)?;
    let spec = property::read(&args.property)?;
    check_features(&ens, spec.input.dim(), "property")?;
    let report = verify_property_parallel(&ens, &spec, args.split as usize, &options(&args.run, None))
        .map_err(|e| Failure(EXIT_DATA, format!("{}: {e}", args.property.display())))?;
    finish(&args.run, &report, BatchKind::Property, started)
}

fn validate(args: &ValidateArgs) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(&args.model)
        .map_err(|e| Failure(EXIT_NO_INPUT, format!("{}: {e}", args.model.display())))?;
    let original = alt::parse(&text).map_err(|e| e.in_file(&args.model))?;
    let report = alt::roundtrip_validate_with(&original, Some(&text), |_| {});
    let mut out = String::new();
    for d in &report.discrepancies {
        out.push_str(&format!("discrepancy: {d}\n"));
    }
    out.push_str(&format!(
        "byte-identical: {}\nsemantic check: {} of {} sampled inputs disagree\nresult: {}\n",
        if report.byte_identical { "yes" } else { "no" },
        report.semantic_mismatches,
        report.semantic_samples,
        if report.is_clean() {
            "equivalent"
        } else {
            "NOT equivalent"
        }
    ));
    write_report(None, |w| w.write_all(out.as_bytes()))?;
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_FALSIFIED })
}

fn convert(args: &ConvertArgs) -> Result<u8, Failure> {
    let converted = alt::convert(&alt::read(&args.model)?)?;
    model::write(&args.output, &converted.ensemble).map_err(|e| Failure(EXIT_IO, e.to_string()))?;
    Ok(EXIT_OK)
}

fn predict(args: &PredictArgs) -> Result<u8, Failure> {
    let ens = model::read(&args.model)?;
    let data = dataset::read(&args.dataset)?;
    check_features(&ens, data.n_features, "dataset")?;
    let rows = data
        .samples
        .iter()
        .map(|s| ens.predict(&s.features))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure(EXIT_DATA, e.to_string()))?;
    write_report(args.output.as_deref(), |out| {
        for (i, scores) in rows.iter().enumerate() {
            let class = treecert::core::argmax(scores);
            let scores: Vec<String> = scores.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{i}\t{}\t{class}", scores.join(" "))?;
        }
        Ok(())
    })?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let result = match &cli.command {
        Command::Robustness(a) => robustness(a, started),
        Command::Property(a) => property(a, started),
        Command::Validate(a) => validate(a),
        Command::Convert(a) => convert(a),
        Command::Predict(a) => predict(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("treecert: {msg}");
            ExitCode::from(code)
        }
    }
}
