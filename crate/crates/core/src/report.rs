//! Centralized vs warmstarted comparison tables built from run outputs.
//!
//! A run directory holds `solve_x<scale>_trace.csv`,
//! `warmstart_x<scale>_trace.csv` and `warmstart_x<scale>_partition.csv`
//! files; rows pair the solve and warmstart traces of one demand scale.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::driver::{Phase, TraceRecord};
use crate::error::{Error, Result};
use crate::partition::PsiReport;
use crate::tntp::{read_trace, write_atomic};

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub scenario: String,
    /// Partition columns as in [`PsiReport::row`].
    pub partition: [String; 5],
    pub centralized_seconds: f64,
    pub warmstart_seconds: f64,
    /// Full-network gap after the first heuristic iteration.
    pub heuristic_gap: f64,
}

impl ComparisonRow {
    pub fn savings(&self) -> f64 {
        savings(self.centralized_seconds, self.warmstart_seconds)
    }
}

/// Fraction of the centralized time saved by warmstarting.
pub fn savings(centralized_seconds: f64, warmstart_seconds: f64) -> f64 {
    if centralized_seconds > 0.0 {
        (centralized_seconds - warmstart_seconds) / centralized_seconds
    } else {
        0.0
    }
}

pub fn tag(command: &str, demand_scale: f64) -> String {
    format!("{command}_x{demand_scale}")
}

pub fn write_partition_stats(report: &PsiReport, path: impl AsRef<Path>) -> Result<()> {
    let mut s = PsiReport::HEADER.join(",");
    s.push('\n');
    s.push_str(&report.row().join(","));
    s.push('\n');
    write_atomic(path.as_ref(), &s)
}

fn read_partition_stats(path: &Path) -> Result<[String; 5]> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let row = text
        .lines()
        .nth(1)
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: "missing partition row".into(),
        })?;
    let cells: Vec<String> = row.split(',').map(|c| c.trim().to_string()).collect();
    cells.try_into().map_err(|c: Vec<String>| Error::Parse {
        path: path.to_path_buf(),
        line: 2,
        message: format!("expected 5 partition columns, got {}", c.len()),
    })
}

fn finish_time(trace: &[TraceRecord]) -> f64 {
    trace.last().map_or(0.0, |r| r.elapsed_seconds)
}

/// Pairs every warmstart trace in `dir` with the solve trace of the same
/// demand scale.
pub fn collect(dir: impl AsRef<Path>) -> Result<Vec<ComparisonRow>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut scales: Vec<(f64, String)> = Vec::new();
    for entry in entries {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(scale) = name
            .strip_prefix("warmstart_x")
            .and_then(|r| r.strip_suffix("_trace.csv"))
        {
            if let Ok(v) = scale.parse::<f64>() {
                scales.push((v, scale.to_string()));
            }
        }
    }
    scales.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rows = Vec::new();
    for (_, scale) in scales {
        let central = dir.join(format!("solve_x{scale}_trace.csv"));
        if !central.exists() {
            log::warn!("no centralized trace for demand scale {scale}; skipping");
            continue;
        }
        let central = read_trace(&central)?;
        let warm = read_trace(dir.join(format!("warmstart_x{scale}_trace.csv")))?;
        let stats = dir.join(format!("warmstart_x{scale}_partition.csv"));
        let partition = if stats.exists() {
            read_partition_stats(&stats)?
        } else {
            std::array::from_fn(|_| "-".to_string())
        };
        let heuristic_gap = warm
            .iter()
            .find(|r| r.phase == Phase::Heuristic)
            .map_or(f64::NAN, |r| r.relative_gap);
        rows.push(ComparisonRow {
            scenario: scale,
            partition,
            centralized_seconds: finish_time(&central),
            warmstart_seconds: finish_time(&warm),
            heuristic_gap,
        });
    }
    if rows.is_empty() {
        return Err(Error::Validation(format!(
            "{} has no matching solve and warmstart traces",
            dir.display()
        )));
    }
    Ok(rows)
}

const HEADER: [&str; 10] = [
    "demand",
    "n1:n2",
    "m1:m2",
    "# boundary nodes",
    "# cut links",
    "psi",
    "centralized (s)",
    "warmstart (s)",
    "gap after 1 iter",
    "% savings",
];

pub fn render(rows: &[ComparisonRow]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut c = vec![r.scenario.clone()];
            c.extend(r.partition.iter().cloned());
            c.push(format!("{:.3}", r.centralized_seconds));
            c.push(format!("{:.3}", r.warmstart_seconds));
            c.push(format!("{:.3e}", r.heuristic_gap));
            c.push(format!("{:.1}", 100.0 * r.savings()));
            c
        })
        .collect();
    let widths: Vec<usize> = (0..HEADER.len())
        .map(|i| {
            cells
                .iter()
                .map(|c| c[i].len())
                .chain([HEADER[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        let parts: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  "));
    };
    line(&mut out, &HEADER);
    for c in &cells {
        line(&mut out, &c.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
