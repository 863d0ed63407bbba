//! Command-line driver: jet dumps, invariant dumps, point comparison, grid
//! sweeps, and raw matrix-tuple tests.
//!
//! Exit codes for `compare`: 0 equivalent, 1 inequivalent, 2 inconclusive,
//! 3 and above for errors. Other commands exit 0 on success, ≥3 on error.

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use spechtloc::config::{
    invariants_to_json, jet_to_json, point_comparison_to_json, report_to_json, verdict_to_json,
    RequestSpec, TupleFileSpec,
};
use spechtloc::localization::{extract_invariants, normalize};
use spechtloc::pipeline::{compare_localizations, compare_via_metric, render_text, sweep, to_csv};
use spechtloc::specht::{compare_tuples, Status};
use spechtloc::C64;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spechtloc",
    about = "Localization invariants of kernel models and unitary equivalence of their localizations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file (models, basepoints, order, tolerances)
    #[arg(long)]
    config: PathBuf,
    /// Override the basepoint, e.g. "[[0.5,0],[0.1,0.2]]"
    #[arg(long)]
    point: Option<String>,
    /// Override the localization order k
    #[arg(long)]
    k: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Dump a model's Gram jet at a basepoint
    Jet {
        #[command(flatten)]
        common: ConfigArgs,
        /// Jet order (defaults to k-1 from the config, or 2)
        #[arg(long)]
        order: Option<u32>,
        /// Dump the normalized jet instead of the raw one
        #[arg(long)]
        normalized: bool,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the invariant matrices of model_a at a basepoint
    Invariants {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two models at a single basepoint
    Compare {
        #[command(flatten)]
        common: ConfigArgs,
        /// Use the normalized-metric route instead of the invariant route
        #[arg(long)]
        via_metric: bool,
        /// Write the verdict record as JSON
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Compare two models over all configured basepoints
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        /// Write the machine-readable report as JSON
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-point distances as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Decide joint unitary equivalence of two raw matrix tuples
    Specht {
        /// JSON file with tuple_a / tuple_b as arrays of [re, im] matrices
        #[arg(long)]
        tuples: PathBuf,
        /// Override the trace-word enumeration depth
        #[arg(long)]
        max_len: Option<usize>,
    },
}

fn read_request(path: &Path) -> Result<RequestSpec> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn parse_point_override(text: &str) -> Result<Vec<C64>> {
    let pairs: Vec<[f64; 2]> =
        serde_json::from_str(text).context("point must look like [[re,im],...]")?;
    Ok(pairs.iter().map(|p| C64::new(p[0], p[1])).collect())
}

fn resolve_point(spec: &RequestSpec, common: &ConfigArgs) -> Result<Vec<C64>> {
    match &common.point {
        Some(text) => parse_point_override(text),
        None => Ok(spec.first_point()?),
    }
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Jet {
            common,
            order,
            normalized,
            out,
        } => {
            let spec = read_request(&common.config)?;
            let model = spec.model_a.build()?;
            let point = resolve_point(&spec, &common)?;
            let k = common.k.or(spec.k).unwrap_or(model.rank() as u32 + 1);
            let order = order.unwrap_or_else(|| k.saturating_sub(1).max(1));
            let jet = model.jet_at(&point, order)?;
            let jet = if normalized { normalize(&jet)?.0 } else { jet };
            write_or_print(&out, &serde_json::to_string_pretty(&jet_to_json(&jet))?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Invariants { common, out } => {
            let spec = read_request(&common.config)?;
            let model = spec.model_a.build()?;
            let point = resolve_point(&spec, &common)?;
            let k = common.k.or(spec.k).unwrap_or(model.rank() as u32 + 1);
            let (normalized, _) = normalize(&model.jet_at(&point, k - 1)?)?;
            let invariants = extract_invariants(&normalized, k)?;
            write_or_print(
                &out,
                &serde_json::to_string_pretty(&invariants_to_json(&invariants))?,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            common,
            via_metric,
            json_out,
        } => {
            let spec = read_request(&common.config)?;
            let model_a = spec.model_a.build()?;
            let model_b = spec
                .model_b
                .as_ref()
                .map(|m| m.build())
                .transpose()?
                .context("`model_b` is required for compare")?;
            let point = resolve_point(&spec, &common)?;
            let k = common.k.or(spec.k).unwrap_or(model_a.rank() as u32 + 1);
            let opts = spec.compare_options();
            let record = if via_metric {
                compare_via_metric(&model_a, &model_b, &point, k, &opts)?
            } else {
                compare_localizations(&model_a, &model_b, &point, k, &opts)?
            };
            println!(
                "{} at z = ({}), k = {}: {}",
                record.verdict.status,
                point
                    .iter()
                    .map(|c| format!("{:+.4}{:+.4}i", c.re, c.im))
                    .collect::<Vec<_>>()
                    .join(", "),
                k,
                record.verdict.reason
            );
            if let Some(path) = &json_out {
                fs::write(
                    path,
                    serde_json::to_string_pretty(&point_comparison_to_json(&record))?,
                )
                .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(match record.verdict.status {
                Status::Equivalent => ExitCode::SUCCESS,
                Status::Inequivalent => ExitCode::from(1),
                Status::Inconclusive => ExitCode::from(2),
            })
        }
        Command::Sweep { common, out, csv } => {
            let spec = read_request(&common.config)?;
            let mut request = spec.build_request()?;
            if let Some(k) = common.k {
                request.order_k = Some(k);
            }
            if let Some(text) = &common.point {
                request.points = spechtloc::pipeline::PointSet::Single(parse_point_override(text)?);
            }
            let report = sweep(&request)?;
            print!("{}", render_text(&report));
            if let Some(path) = &out {
                fs::write(
                    path,
                    serde_json::to_string_pretty(&report_to_json(&report))?,
                )
                .with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = &csv {
                fs::write(path, to_csv(&report))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Specht { tuples, max_len } => {
            let text = fs::read_to_string(&tuples)
                .with_context(|| format!("reading {}", tuples.display()))?;
            let spec: TupleFileSpec = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", tuples.display()))?;
            let (tuple_a, tuple_b, mut opts) = spec.build()?;
            if let Some(len) = max_len {
                opts.max_word_len = len;
            }
            let outcome = compare_tuples(&tuple_a, &tuple_b, &opts)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&verdict_to_json(&outcome.verdict))?
            );
            Ok(match outcome.verdict.status {
                Status::Equivalent => ExitCode::SUCCESS,
                Status::Inequivalent => ExitCode::from(1),
                Status::Inconclusive => ExitCode::from(2),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
