//! Command-line front end: `run`, `sweep` and `validate`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Error;
use crate::safety::{compute_sh, UncertaintyMode};
use crate::sim::trace::{write_trace_csv, CycleStatistics, TraceSummary};
use crate::sim::{run_method, RunMethod};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_JSON_FILE: &str = "sweep.json";
pub const SWEEP_CSV_FILE: &str = "sweep.csv";

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Internal = 1,
    Validation = 2,
    Timeout = 3,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

/// A failed command with the status it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self { status: Status::Validation, message: message.into() }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self { status: Status::Internal, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Timeout(_) => Status::Timeout,
            Error::Config(_) | Error::Argument(_) | Error::MissingLimit(_) => Status::Validation,
            _ => Status::Internal,
        };
        Self { status, message: e.to_string() }
    }
}

pub type CmdResult<T> = std::result::Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(name = "hrsf", version, about = "Human-aware speed regulation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one run and write its trace and summary.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory for trace.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat runs per method and tabulate cycle-time statistics.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated method names; all six when omitted.
        #[arg(long, value_delimiter = ',')]
        profiles: Option<Vec<String>>,
        /// Runs per method with consecutive seeds; the document's sim.repeats when omitted.
        #[arg(long)]
        repeats: Option<usize>,
        /// Directory for sweep.json and sweep.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every section and recompute the human-motion contributions.
    Validate {
        /// Scenario document (JSON).
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario document (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Replaces sim.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replaces regulator.uncertainty_mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    PerAxis,
    Scalar,
}

impl From<ModeArg> for UncertaintyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PerAxis => UncertaintyMode::PerAxis,
            ModeArg::Scalar => UncertaintyMode::Scalar,
        }
    }
}

/// Settings given on the command line that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<UncertaintyMode>,
}

impl From<&CommonArgs> for Overrides {
    fn from(a: &CommonArgs) -> Self {
        Self { seed: a.seed, mode: a.mode.map(Into::into) }
    }
}

/// Loads, overrides and validates a scenario.
pub fn load_config(path: &Path, overrides: Overrides) -> CmdResult<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    if let Some(seed) = overrides.seed {
        cfg.sim.seed = seed;
    }
    if let Some(mode) = overrides.mode {
        cfg.regulator.uncertainty_mode = mode;
    }
    let issues = cfg.check();
    if !issues.is_empty() {
        return Err(Failure::validation(issues.join("\n")));
    }
    Ok(cfg)
}

/// Summary document written next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub uncertainty_mode: UncertaintyMode,
    pub trace_file: String,
    #[serde(flatten)]
    pub summary: TraceSummary,
}

pub fn cmd_run(config: &Path, out: &Path, overrides: Overrides) -> CmdResult<RunSummary> {
    let cfg = load_config(config, overrides)?;
    info!("running {} with seed {}", cfg.method, cfg.sim.seed);
    let (records, summary) = run_method(&cfg, cfg.method, cfg.sim.seed)?;
    fs::create_dir_all(out).map_err(|e| Failure::internal(format!("cannot create {}: {e}", out.display())))?;
    let trace_path = out.join(TRACE_FILE);
    let file = File::create(&trace_path).map_err(|e| Failure::internal(format!("cannot write {}: {e}", trace_path.display())))?;
    let mut writer = BufWriter::new(file);
    write_trace_csv(&records, &mut writer)
        .and_then(|_| writer.flush())
        .map_err(|e| Failure::internal(format!("cannot write {}: {e}", trace_path.display())))?;
    let doc = RunSummary {
        scenario: cfg.name.clone(),
        uncertainty_mode: cfg.regulator.uncertainty_mode,
        trace_file: TRACE_FILE.into(),
        summary,
    };
    write_json(&out.join(SUMMARY_FILE), &doc)?;
    Ok(doc)
}

/// One row of the method comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: RunMethod,
    /// 1 for the fastest mean cycle time.
    pub rank: usize,
    pub stats: CycleStatistics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub scenario: String,
    pub repeats: usize,
    pub base_seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, method: RunMethod) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,rank,runs,mean_s,std_s,coexistence,collaboration,cooperation\n");
        for r in &self.rows {
            let share = |k: &str| r.stats.phase_shares.get(k).copied().unwrap_or(0.0);
            let _ = writeln!(
                s,
                "{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3}",
                r.method,
                r.rank,
                r.stats.runs,
                r.stats.mean_s,
                r.stats.std_s,
                share("coexistence"),
                share("collaboration"),
                share("cooperation")
            );
        }
        s
    }

    pub fn render(&self) -> String {
        let mut s = format!("{:<24} {:>4} {:>18}\n", "method", "rank", "cycle time [s]");
        for r in &self.rows {
            let _ = writeln!(s, "{:<24} {:>4} {:>9.2} ± {:<6.2}", r.method.as_str(), r.rank, r.stats.mean_s, r.stats.std_s);
        }
        s
    }
}

pub fn parse_methods(names: &[String]) -> CmdResult<Vec<RunMethod>> {
    let mut methods = Vec::new();
    for name in names {
        let m = RunMethod::parse(name.trim()).ok_or_else(|| Failure::validation(format!("unknown profile '{name}'")))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(Failure::validation("no profiles selected"));
    }
    Ok(methods)
}

/// Runs every method `repeats` times with consecutive seeds.
pub fn sweep(cfg: &ScenarioConfig, methods: &[RunMethod], repeats: usize) -> CmdResult<SweepTable> {
    if repeats == 0 {
        return Err(Failure::validation("repeats must be at least 1"));
    }
    let base = cfg.sim.seed;
    let jobs: Vec<(RunMethod, u64)> =
        methods.iter().flat_map(|&m| (0..repeats as u64).map(move |i| (m, base.wrapping_add(i)))).collect();
    let results: Vec<_> = jobs.par_iter().map(|&(m, seed)| run_method(cfg, m, seed).map(|(_, s)| s)).collect();
    let mut summaries = Vec::with_capacity(results.len());
    for r in results {
        summaries.push(r?);
    }
    let mut rows: Vec<SweepRow> = methods
        .iter()
        .zip(summaries.chunks(repeats))
        .map(|(&m, chunk)| SweepRow { method: m, rank: 0, stats: CycleStatistics::from_summaries(m.as_str(), chunk) })
        .collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].stats.mean_s.total_cmp(&rows[b].stats.mean_s).then(a.cmp(&b)));
    for (rank, i) in order.into_iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    Ok(SweepTable { scenario: cfg.name.clone(), repeats, base_seed: base, rows })
}

pub fn cmd_sweep(
    config: &Path,
    profiles: Option<&[String]>,
    repeats: Option<usize>,
    out: Option<&Path>,
    overrides: Overrides,
) -> CmdResult<SweepTable> {
    let cfg = load_config(config, overrides)?;
    let methods = match profiles {
        Some(names) => parse_methods(names)?,
        None => RunMethod::ALL.to_vec(),
    };
    let repeats = repeats.unwrap_or(cfg.sim.repeats as usize);
    info!("sweeping {} methods x {repeats} runs", methods.len());
    let table = sweep(&cfg, &methods, repeats)?;
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(|e| Failure::internal(format!("cannot create {}: {e}", out.display())))?;
        write_json(&out.join(SWEEP_JSON_FILE), &table)?;
        let path = out.join(SWEEP_CSV_FILE);
        fs::write(&path, table.to_csv()).map_err(|e| Failure::internal(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(table)
}

/// Report lines for a config that passed validation.
pub fn cmd_validate(config: &Path) -> CmdResult<Vec<String>> {
    let cfg = load_config(config, Overrides::default())?;
    let far = Some(cfg.human_speed.near_threshold_mm);
    let mut lines = Vec::new();
    for (profile, expected) in cfg.profiles_with_expectations() {
        let sh = compute_sh(profile.t_lat_max_ms, &cfg.human_speed, far).round();
        let line = match expected {
            Some(e) => format!("{}: S_h = {sh} mm (expected {e} mm) confirmed", profile.name),
            None => format!("{}: S_h = {sh} mm (no expectation recorded)", profile.name),
        };
        lines.push(line);
    }
    lines.push(format!("{}: all sections valid", config.display()));
    Ok(lines)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::internal(format!("cannot write {}: {e}", path.display())))
}

/// Dispatches a parsed command line, printing results and errors.
pub fn execute(cli: Cli) -> Status {
    let outcome = match cli.command {
        Command::Run { common, out } => cmd_run(&common.config, &out, (&common).into()).map(|doc| {
            println!(
                "{}: cycle time {:.3} s (no-interference {:.3} s), trace in {}",
                doc.summary.method,
                doc.summary.t_cycle_s,
                doc.summary.no_interference_time_s,
                out.join(TRACE_FILE).display()
            );
        }),
        Command::Sweep { common, profiles, repeats, out } => {
            cmd_sweep(&common.config, profiles.as_deref(), repeats, out.as_deref(), (&common).into())
                .map(|table| print!("{}", table.render()))
        }
        Command::Validate { config } => cmd_validate(&config).map(|lines| {
            for l in lines {
                println!("{l}");
            }
        }),
    };
    match outcome {
        Ok(()) => Status::Success,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.status
        }
    }
}
