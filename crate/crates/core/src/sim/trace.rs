use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::body::BodyPartLabel;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

use super::human::Phase;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t_s: f64,
    pub q_rad: Vec<f64>,
    pub tcp_mm: Vec3,
    pub commanded_mm_s: f64,
    /// TCP speed over the step that starts at `t_s`.
    pub actual_mm_s: f64,
    pub separation_mm: Option<f64>,
    pub limiting_part: Option<BodyPartLabel>,
    pub phase: Option<Phase>,
}

pub fn csv_header(dof: usize) -> String {
    let mut cols = vec!["t_s".to_string()];
    cols.extend((1..=dof).map(|i| format!("q{i}_rad")));
    cols.extend(
        ["tcp_x_mm", "tcp_y_mm", "tcp_z_mm", "cmd_v_mm_s", "act_v_mm_s", "sep_mm", "limiting_part", "phase"].map(String::from),
    );
    cols.join(",")
}

/// Writes records with fixed precision; an unmeasured separation is an
/// empty field.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    let dof = records.first().map_or(0, |r| r.q_rad.len());
    writeln!(out, "{}", csv_header(dof))?;
    for r in records {
        write!(out, "{:.3}", r.t_s)?;
        for q in &r.q_rad {
            write!(out, ",{q:.6}")?;
        }
        write!(out, ",{:.3},{:.3},{:.3}", r.tcp_mm.x, r.tcp_mm.y, r.tcp_mm.z)?;
        write!(out, ",{:.3},{:.3},", r.commanded_mm_s, r.actual_mm_s)?;
        if let Some(sep) = r.separation_mm {
            write!(out, "{sep:.3}")?;
        }
        let part = r.limiting_part.map_or("none", BodyPartLabel::token);
        let phase = r.phase.map_or("none", Phase::token);
        writeln!(out, ",{part},{phase}")?;
    }
    out.flush()
}

fn at_initial(q: &[f64], initial: &[f64]) -> bool {
    q.iter().zip(initial).all(|(a, b)| (a - b).abs() <= 1e-9)
}

/// Time from the last sample at the initial pose before the robot first
/// moves until the first sample of the final stay at the initial pose.
pub fn measure_cycle_time(trace: &[TraceRecord]) -> Result<f64> {
    let first = trace.first().ok_or(Error::IncompleteCycle)?;
    let home = &first.q_rad;
    let departure = trace.iter().position(|r| !at_initial(&r.q_rad, home)).ok_or(Error::IncompleteCycle)?;
    let away = trace.iter().rposition(|r| !at_initial(&r.q_rad, home)).expect("found above");
    let back = trace.get(away + 1).ok_or(Error::IncompleteCycle)?;
    Ok(back.t_s - trace[departure - 1].t_s)
}

/// Fraction of the cycle spent in each scripted phase, keyed by token
/// (`none` for unannotated time).
pub fn phase_shares(trace: &[TraceRecord]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in trace {
        *counts.entry(r.phase.map_or("none", Phase::token).to_string()).or_default() += 1;
    }
    let n = trace.len().max(1) as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub method: String,
    pub seed: u64,
    pub t_cycle_s: f64,
    pub no_interference_time_s: f64,
    pub phase_shares: BTreeMap<String, f64>,
    pub min_commanded_mm_s: f64,
    pub min_separation_mm: Option<f64>,
    pub steps: usize,
}

/// Mean and sample standard deviation of repeated cycle times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStatistics {
    pub method: String,
    pub runs: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub cycle_times_s: Vec<f64>,
    pub phase_shares: BTreeMap<String, f64>,
}

impl CycleStatistics {
    pub fn from_summaries(method: &str, summaries: &[TraceSummary]) -> Self {
        let times: Vec<f64> = summaries.iter().map(|s| s.t_cycle_s).collect();
        let n = times.len();
        let mean = if n == 0 { 0.0 } else { times.iter().sum::<f64>() / n as f64 };
        let std = if n < 2 { 0.0 } else { (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
        let mut phase_shares: BTreeMap<String, f64> = BTreeMap::new();
        for s in summaries {
            for (k, v) in &s.phase_shares {
                *phase_shares.entry(k.clone()).or_default() += v / n as f64;
            }
        }
        Self { method: method.to_string(), runs: n, mean_s: mean, std_s: std, cycle_times_s: times, phase_shares }
    }
}
