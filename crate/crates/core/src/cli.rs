//! `proctor` command line: analyze, evaluate, simulate and plot.
//!
//! Exit codes for `analyze`: 0 clean, 3 suspicious, 4 registration failed,
//! 1 on I/O, parse or validation errors, 2 on bad usage.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EngineConfig, CONFIG_ENV_VAR};
use crate::engine::{analyze_stream, AnalysisReport, Label};
use crate::error::{Error, Result};
use crate::metrics::{MetricConfig, MetricReport};
use crate::plot::{timeline, timeline_csv, timeline_svg};
use crate::records::{read_labels, write_labels, write_record_stream, EventInterval};
use crate::synth::{generate, Scenario};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SUSPICIOUS: i32 = 3;
pub const EXIT_REGISTRATION_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "proctor", version, about = "Cheating-event analysis for recorded exam videos")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct ConfigArgs {
    /// Engine config file (flat `key = value`).
    #[arg(long, env = CONFIG_ENV_VAR)]
    pub config: Option<PathBuf>,
    /// Threshold override, `key=value`; repeatable, beats the config file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<EngineConfig> {
        EngineConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotFormat {
    Csv,
    Svg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze one frame-record stream and write a report.
    Analyze {
        records: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Report destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include the per-frame verdict table (needed by `plot`).
        #[arg(long)]
        per_frame: bool,
    },
    /// Analyze every video of a manifest and score it against its labels.
    Evaluate {
        /// CSV with header `records,labels`; paths relative to the manifest.
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Machine-readable results; tables always go to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Segment length in seconds; repeatable.
        #[arg(long = "segment-len", default_values_t = [1.0, 3.0])]
        segment_len: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        iou: f64,
        #[arg(long, default_value_t = 0.5)]
        match_rate: f64,
        /// One-to-one instance matching.
        #[arg(long)]
        strict: bool,
    },
    /// Render a scenario file to a record stream and a label file.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out_records: PathBuf,
        #[arg(long)]
        out_labels: PathBuf,
    },
    /// Timeline of truth, detections and raw traces from a per-frame report.
    Plot {
        report: PathBuf,
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = PlotFormat::Csv)]
        format: PlotFormat,
    },
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_analyze(records: &Path, cfg: &EngineConfig, out: Option<&Path>, per_frame: bool) -> Result<AnalysisReport> {
    let outcome = analyze_stream(BufReader::new(open(records)?), cfg, per_frame)?;
    write_text(out, &outcome.report.to_json(cfg, outcome.gallery.len()))?;
    Ok(outcome.report)
}

#[derive(Debug, Clone, Serialize)]
pub struct VideoRow {
    pub records: String,
    pub labels: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overall: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rows: Vec<VideoRow>,
    pub metrics: MetricReport,
}

impl Evaluation {
    pub fn succeeded(&self) -> usize {
        self.rows.iter().filter(|r| r.status == "ok").count()
    }

    pub fn to_json(&self) -> String {
        let metrics: serde_json::Value = serde_json::from_str(&self.metrics.to_json()).expect("valid json");
        let value = serde_json::json!({ "videos": self.rows, "metrics": metrics });
        let mut text = serde_json::to_string_pretty(&value).expect("serializes");
        text.push('\n');
        text
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            match (&r.overall, &r.error) {
                (Some(l), _) => out.push_str(&format!("{}: {:?}\n", r.records, l)),
                (None, Some(e)) => out.push_str(&format!("{}: FAILED: {e}\n", r.records)),
                _ => {}
            }
        }
        out.push('\n');
        out.push_str(&self.metrics.render_tables());
        out
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<(String, String)>> {
    #[derive(serde::Deserialize)]
    struct Entry {
        records: String,
        labels: String,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let entries = rdr
        .deserialize::<Entry>()
        .map(|e| {
            e.map(|e| (e.records, e.labels)).map_err(|err| Error::Parse {
                line: err.position().map_or(0, |p| p.line() as usize),
                message: err.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if entries.is_empty() {
        return Err(Error::Usage(format!("manifest {} lists no videos", path.display())));
    }
    Ok(entries)
}

/// Runs analysis over every manifest entry (in parallel) and pools the
/// scores. Rows keep manifest order.
pub fn cmd_evaluate(manifest: &Path, cfg: &EngineConfig, metric_cfg: &MetricConfig) -> Result<Evaluation> {
    metric_cfg.validate()?;
    let entries = read_manifest(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let results: Vec<Result<(Vec<EventInterval>, AnalysisReport)>> = entries
        .par_iter()
        .map(|(records, labels)| {
            let truth = read_labels(open(&base.join(labels))?)?;
            let outcome = analyze_stream(BufReader::new(open(&base.join(records))?), cfg, false)?;
            Ok((truth, outcome.report))
        })
        .collect();

    let mut metrics = MetricReport::new(metric_cfg);
    let mut rows = Vec::with_capacity(entries.len());
    for ((records, labels), res) in entries.into_iter().zip(results) {
        let scored = res.and_then(|(truth, report)| {
            metrics.add_video(&truth, &report)?;
            Ok(report.overall)
        });
        rows.push(match scored {
            Ok(overall) => VideoRow {
                records,
                labels,
                status: "ok",
                overall: Some(overall),
                error: None,
            },
            Err(e) => VideoRow {
                records,
                labels,
                status: "error",
                overall: None,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(Evaluation { rows, metrics })
}

pub fn cmd_simulate(scenario: &Path, out_records: &Path, out_labels: &Path) -> Result<()> {
    let text = std::fs::read_to_string(scenario)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", scenario.display())))?;
    let scenario = Scenario::from_toml(&text)?;
    let (records, truth) = generate(&scenario)?;
    write_record_stream(&records, create(out_records)?)?;
    write_labels(&truth, create(out_labels)?)?;
    Ok(())
}

pub fn cmd_plot(report: &Path, labels: &Path, out: &Path, format: PlotFormat) -> Result<()> {
    let text = std::fs::read_to_string(report)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", report.display())))?;
    let (report, cfg) = AnalysisReport::from_json(&text)?;
    let truth = read_labels(open(labels)?)?;
    let rows = timeline(&report, &truth)?;
    let body = match format {
        PlotFormat::Csv => timeline_csv(&rows),
        PlotFormat::Svg => timeline_svg(&rows, &cfg),
    };
    write_text(Some(out), &body)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::RegistrationFailed { .. } => EXIT_REGISTRATION_FAILED,
        Error::Usage(_) => EXIT_USAGE,
        _ => EXIT_ERROR,
    }
}

/// Runs a parsed invocation and returns the process exit code. Diagnostics
/// go to standard error.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Analyze {
            records,
            config,
            out,
            per_frame,
        } => config
            .load()
            .and_then(|cfg| cmd_analyze(&records, &cfg, out.as_deref(), per_frame))
            .map(|report| match report.overall {
                Label::Clean => EXIT_CLEAN,
                Label::Suspicious => EXIT_SUSPICIOUS,
            }),
        Command::Evaluate {
            manifest,
            config,
            out,
            segment_len,
            iou,
            match_rate,
            strict,
        } => {
            let metric_cfg = |cfg: &EngineConfig| MetricConfig {
                iou_threshold: iou,
                segment_lens_sec: segment_len.clone(),
                segment_match_rate: match_rate,
                fps: cfg.fps,
                strict_matching: strict,
            };
            config.load().and_then(|cfg| {
                let eval = cmd_evaluate(&manifest, &cfg, &metric_cfg(&cfg))?;
                for row in eval.rows.iter().filter(|r| r.error.is_some()) {
                    eprintln!("proctor: {}: {}", row.records, row.error.as_deref().unwrap_or_default());
                }
                write_text(None, &eval.render())?;
                if let Some(out) = out {
                    write_text(Some(&out), &eval.to_json())?;
                }
                Ok(if eval.succeeded() == 0 { EXIT_ERROR } else { EXIT_CLEAN })
            })
        }
        Command::Simulate {
            scenario,
            out_records,
            out_labels,
        } => cmd_simulate(&scenario, &out_records, &out_labels).map(|_| EXIT_CLEAN),
        Command::Plot {
            report,
            labels,
            out,
            format,
        } => cmd_plot(&report, &labels, &out, format).map(|_| EXIT_CLEAN),
    };
    result.unwrap_or_else(|e| {
        eprintln!("proctor: {e}");
        exit_code_for(&e)
    })
}
